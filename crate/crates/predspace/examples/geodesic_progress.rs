//! Geodesics on the product of spheres and the progress coordinate:
//! interpolation between models, projecting a model onto the
//! ignorance-truth geodesic, and the confident-model regime where the
//! projection pins to truth despite a substantial error rate.

use predspace::geometry::{
    distance_to_geodesic, min_geodesic_distance_to_point, progress_error_bound, progress_on,
    Geodesic, ProgressRegime,
};
use predspace::metrics::{bhattacharyya, DistanceKind};
use predspace::{ignorance, truth, LabelVector, PredictionTensor};

fn main() -> predspace::Result<()> {
    let (n, c) = (60, 10);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c)?;
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c)?;
    let geodesic = Geodesic::new(&p0, &ps)?;

    println!("progress of points generated along the geodesic itself:");
    for k in 0..=5 {
        let alpha = k as f64 / 5.0;
        let point = geodesic.point(alpha)?;
        println!("  alpha = {alpha:.1}  ->  progress = {:.6}", progress_on(&point, &geodesic)?);
    }

    // A maximally confident model that is wrong on 20% of samples still
    // projects exactly onto truth: its error is below 1 - C^(-1/2).
    let mut probs = vec![0.0f64; n * c];
    for i in 0..n {
        let predicted = if i % 5 == 0 {
            (labels.class_index(i) + 1) % c
        } else {
            labels.class_index(i)
        };
        probs[i * c + predicted] = 1.0;
    }
    let confident = PredictionTensor::new(n, c, probs, "confident")?;
    let err = confident.error_rate(&labels)?;
    println!("\nconfident model: error = {err:.2}, progress = {:.4}", progress_on(&confident, &geodesic)?);
    println!(
        "  bound 1 - C^-1/2 = {:.4}, regime = {:?}",
        1.0 - 1.0 / (c as f64).sqrt(),
        progress_error_bound(err, c)?
    );
    assert_eq!(progress_error_bound(err, c)?, ProgressRegime::AtTruthProjection);

    // Distance from a model to the nearest point of a geodesic.
    let off = geodesic.point(0.5)?;
    println!(
        "\nd_B from the geodesic midpoint to the geodesic: {:.2e}",
        distance_to_geodesic(&off, &geodesic, DistanceKind::Bhattacharyya)?
    );

    // A random-label corner: the geodesic from it to truth never comes
    // close to ignorance.
    let corner_labels = LabelVector::new(
        (0..n)
            .map(|i| {
                if i < n / c {
                    labels.label(i)
                } else {
                    (labels.label(i) % c as u32) + 1
                }
            })
            .collect(),
        c,
    )?;
    let corner = truth(&corner_labels, c)?;
    let corner_geodesic = Geodesic::new(&corner, &ps)?;
    let closest =
        min_geodesic_distance_to_point(&corner_geodesic, &p0, DistanceKind::Bhattacharyya)?;
    println!("\nrandom-label corner at d_B(corner, P0) = {:.4}:", bhattacharyya(&corner, &p0)?);
    println!("  min d_B from its geodesic-to-truth down to ignorance = {closest:.4}");
    let cf = c as f64;
    println!(
        "  analytic lower bound log(C)/(2C) + (C-1) log(C/2)/(2C) = {:.4}",
        cf.ln() / (2.0 * cf) + (cf - 1.0) * (cf / 2.0).ln() / (2.0 * cf)
    );
    Ok(())
}
