//! Extending an embedding without recomputing it: out-of-sample projection
//! by triangulation, weighted InPCA as exact shorthand for repeating
//! points, joint train/test embeddings, and rigid alignment of two
//! coordinate sets.

use predspace::embedding::{
    align_embeddings, inpca, joint_train_test_embed, weighted_inpca,
};
use predspace::metrics::{distance, pairwise_matrix, DistanceKind};
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
    let kind = DistanceKind::Bhattacharyya;
    let models = random_models(10, 40, 4, 11);
    let d = pairwise_matrix(&models, kind, 8, None)?;
    let emb = inpca(&d, 6)?;

    // Re-projecting a member by its own distance row lands on its
    // coordinates exactly.
    let reproj = emb.project_new(d.row(4))?;
    let drift: f64 = reproj
        .iter()
        .zip(emb.coord(4))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("member re-projection drift: {drift:.2e}");

    // A genuinely new model enters by triangulation from its distances.
    let newcomer = &random_models(1, 40, 4, 99)[0];
    let dists: Vec<f64> = models
        .iter()
        .map(|m| distance(newcomer, m, kind))
        .collect::<predspace::Result<_>>()?;
    let coords = emb.project_new(&dists)?;
    println!("projected newcomer: {:?}", &coords[..3]);

    // Weighted InPCA with integer multiplicities equals InPCA on the
    // repeated matrix, up to a rigid transform.
    let small = random_models(4, 30, 3, 5);
    let ds = pairwise_matrix(&small, kind, 4, None)?;
    let weighted = weighted_inpca(&ds, &[3.0, 1.0, 1.0, 1.0], 4)?;
    let mut repeated = vec![
        small[0].clone().with_id("m0a"),
        small[0].clone().with_id("m0b"),
        small[0].clone().with_id("m0c"),
    ];
    repeated.extend_from_slice(&small[1..]);
    let dr = pairwise_matrix(&repeated, kind, 8, None)?;
    let naive = inpca(&dr, 4)?;
    let mut naive_coords = Vec::new();
    for &row in &[0usize, 3, 4, 5] {
        naive_coords.extend_from_slice(naive.coord(row));
    }
    let alignment = align_embeddings(weighted.coords(), &naive_coords, 4, 4)?;
    println!("weighted vs repeated-matrix embedding RMSD: {:.2e}", alignment.rmsd);

    // Joint train/test: test models enter the train coordinates through
    // train-derived means.
    let train = random_models(8, 40, 4, 21);
    let test = random_models(8, 40, 4, 22);
    let (train_emb, test_coords) = joint_train_test_embed(&train, &test, kind, 4)?;
    println!("\njoint embedding (first coordinate):");
    for i in 0..4 {
        println!(
            "  model {i}: train {:+.4}  test {:+.4}",
            train_emb.coord(i)[0],
            test_coords[i * train_emb.dims()]
        );
    }
    Ok(())
}
