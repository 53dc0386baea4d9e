//! Centroids of model groups under six divergences and what they buy as
//! ensembles: the same members aggregated different ways land at different
//! errors and progress.

use predspace::centroids::{
    centroid, centroid_objective, ensemble_report, lambert_w0, CentroidKind,
};
use predspace::{LabelVector, PredictionTensor};
use rand::{Rng, SeedableRng};

fn main() -> predspace::Result<()> {
    // Hand-sized pair first: the centroid coordinates differ per kind.
    let a = PredictionTensor::new(1, 2, vec![0.2, 0.8], "a")?;
    let b = PredictionTensor::new(1, 2, vec![0.6, 0.4], "b")?;
    println!("centroids of (0.2, 0.8) and (0.6, 0.4):");
    for kind in CentroidKind::ALL {
        let c = centroid(&[a.clone(), b.clone()], kind)?;
        let obj = centroid_objective(&[a.clone(), b.clone()], &c, kind)?;
        println!(
            "  {:<16} ({:.4}, {:.4})   objective {:.6}",
            kind.name(),
            c.row(0)[0],
            c.row(0)[1],
            obj
        );
    }
    println!("(Lambert W drives the Jeffreys row: W(1) = {:.6})", lambert_w0(1.0));

    // A 10-member ensemble of noisy confident models: most members agree
    // with the truth, each has its own blind spots.
    let (n, c) = (200, 5);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let members: Vec<PredictionTensor> = (0..10)
        .map(|k| {
            let mut probs = vec![0.0f64; n * c];
            for i in 0..n {
                let wrong = rng.gen::<f64>() < 0.3;
                let predicted = if wrong {
                    rng.gen_range(0..c)
                } else {
                    labels.class_index(i)
                };
                let confidence = 0.55 + 0.4 * rng.gen::<f64>();
                for y in 0..c {
                    probs[i * c + y] = if y == predicted {
                        confidence
                    } else {
                        (1.0 - confidence) / (c - 1) as f64
                    };
                }
            }
            PredictionTensor::new(n, c, probs, format!("member{k}")).unwrap()
        })
        .collect();

    let mean_member_error = members
        .iter()
        .map(|m| m.error_rate(&labels).unwrap())
        .sum::<f64>()
        / members.len() as f64;
    println!("\n10-member ensemble, mean member error {:.3}:", mean_member_error);
    println!("  {:<16} {:>7} {:>12} {:>10}", "kind", "error", "d_B(truth)", "progress");
    for row in ensemble_report(&members, &labels)? {
        println!(
            "  {:<16} {:>7.3} {:>12.4} {:>10.4}",
            row.kind.name(),
            row.error,
            row.d_b_to_truth,
            row.progress
        );
    }
    Ok(())
}
