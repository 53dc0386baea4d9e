//! Intensive distances between probabilistic models: the special points of
//! prediction space, the analytic anchor values between them, and why the
//! per-sample-averaged distances stay informative in high dimension while
//! the product-form Hellinger distance saturates.

use predspace::metrics::{
    bhattacharyya, cross_entropy_half_check, geodesic_distance, hellinger, pairwise_matrix,
    symmetric_kl, DistanceKind,
};
use predspace::{ignorance, truth, LabelVector, PredictionTensor};
use rand::{Rng, SeedableRng};

fn random_model(rng: &mut impl Rng, n: usize, c: usize, id: &str) -> PredictionTensor {
    let mut probs = vec![0.0f64; n * c];
    for row in probs.chunks_mut(c) {
        let mut s = 0.0;
        for p in row.iter_mut() {
            *p = -(rng.gen::<f64>()).ln();
            s += *p;
        }
        for p in row.iter_mut() {
            *p /= s;
        }
    }
    PredictionTensor::new(n, c, probs, id).unwrap()
}

fn main() -> predspace::Result<()> {
    let (n, c) = (1000, 10);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c)?;
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c)?;

    println!("ignorance vs truth, N={n}, C={c}:");
    println!("  d_B = {:.7}   (ln C / 2 = {:.7})", bhattacharyya(&p0, &ps)?, (c as f64).ln() / 2.0);
    println!(
        "  d_G = {:.7}   (arccos C^-1/2 = {:.7})",
        geodesic_distance(&p0, &ps)?,
        (1.0 / (c as f64).sqrt()).acos()
    );

    // Against a one-hot truth, the Bhattacharyya distance is half the
    // cross-entropy loss.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let w = random_model(&mut rng, n, c, "w");
    let (db, half_ce) = cross_entropy_half_check(&w, &labels)?;
    println!("\nrandom model vs truth: d_B = {db:.6}, CE/2 = {half_ce:.6}");

    // Two independent high-dimensional models: the Hellinger product
    // saturates at 2 while d_B and d_sKL stay O(1).
    let a = random_model(&mut rng, n, c, "a");
    let b = random_model(&mut rng, n, c, "b");
    println!("\ntwo independent random models:");
    println!("  d_H   = {:.8}  (saturated)", hellinger(&a, &b)?);
    println!("  d_B   = {:.4}", bhattacharyya(&a, &b)?);
    println!("  d_sKL = {:.4}", symmetric_kl(&a, &b)?);

    // Chunked pairwise matrix over a small model collection.
    let models: Vec<PredictionTensor> = (0..6)
        .map(|i| random_model(&mut rng, 50, 5, &format!("model{i}")))
        .collect();
    let dm = pairwise_matrix(&models, DistanceKind::Bhattacharyya, 2, None)?;
    println!("\npairwise d_B over {} models:", dm.m());
    for i in 0..dm.m() {
        let row: Vec<String> = (0..dm.m()).map(|j| format!("{:.3}", dm.get(i, j))).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
