//! InPCA: isometric Minkowski embedding of an intensive distance matrix.
//! Demonstrates the signed pairwise-norm isometry, time-like axes from
//! triangle-inequality violations, explained stress, and the standard-PCA
//! comparison whose spectrum stays non-negative.

use predspace::embedding::{explained_pairwise_distances, inpca, minkowski_sq_between};
use predspace::metrics::{pairwise_matrix, DistanceKind};
use predspace::PredictionTensor;
use rand::{Rng, SeedableRng};

fn random_models(m: usize, n: usize, c: usize, seed: u64) -> Vec<PredictionTensor> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|i| {
            let mut probs = vec![0.0f64; n * c];
            for row in probs.chunks_mut(c) {
                let mut s = 0.0;
                for p in row.iter_mut() {
                    *p = rng.gen::<f64>() + 1e-3;
                    s += *p;
                }
                for p in row.iter_mut() {
                    *p /= s;
                }
            }
            PredictionTensor::new(n, c, probs, format!("m{i}")).unwrap()
        })
        .collect()
}

fn main() -> predspace::Result<()> {
    let models = random_models(24, 80, 5, 3);

    let d = pairwise_matrix(&models, DistanceKind::Bhattacharyya, 8, None)?;
    let full = inpca(&d, d.m())?;

    // Full-dimension signed norms reproduce the distance matrix.
    let mut worst: f64 = 0.0;
    for i in 0..d.m() {
        for j in 0..d.m() {
            worst = worst.max((full.minkowski_sq(i, j) - d.get(i, j)).abs());
        }
    }
    println!("isometry residual over all pairs: {worst:.2e}");

    let negatives = full.eigenvalues.iter().filter(|&&l| l < -1e-12).count();
    println!(
        "spectrum: {} kept eigenvalues, {} negative (time-like axes)",
        full.eigenvalues.len(),
        negatives
    );
    println!("top eigenvalues: {:?}", &full.eigenvalues[..5.min(full.dims())]);

    for dim in [1, 3, 10] {
        println!("explained stress at d={dim}: {:.4}", full.explained_stress(dim)?);
    }

    // Truncated coordinates still explain most pairwise distances.
    let k = 3;
    let mut top = Vec::new();
    for i in 0..d.m() {
        top.extend_from_slice(&full.coord(i)[..k]);
    }
    println!(
        "explained pairwise distances with top-{k} coordinates: {:.4}",
        explained_pairwise_distances(&d, &top, k, &full.signature[..k])?
    );
    let x01 = minkowski_sq_between(&top[0..k], &top[k..2 * k], &full.signature[..k]);
    println!("  pair (0,1): top-{k} signed norm {x01:.4} vs distance {:.4}", d.get(0, 1));

    // Standard PCA on squared-Euclidean distances never produces a
    // time-like axis.
    let de = pairwise_matrix(&models, DistanceKind::SquaredEuclidean, 8, None)?;
    let pca = inpca(&de, de.m())?;
    let min_eig = pca.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("\nstandard-PCA path: smallest eigenvalue {min_eig:.2e} (non-negative spectrum)");
    Ok(())
}
