//! From raw checkpoint trajectories to a configuration dendrogram: progress
//! indexing, uniform-progress resampling, reparameterization-invariant
//! trajectory distances, tube widths, and hierarchical clustering.

use predspace::cluster::{hierarchical_cluster, Linkage};
use predspace::geometry::Geodesic;
use predspace::model::{Checkpoint, ConfigTag};
use predspace::trajectory::{
    average_over_seeds, common_resample, index_by_progress, median_tube_width, resample,
    trajectory_distance, trajectory_distance_matrix,
};
use predspace::{ignorance, truth, LabelVector, PredictionTensor, Trajectory};
use predspace::metrics::DistanceKind;

/// A smooth synthetic path from uniform toward one-hot rows, with the pace
/// controlled per trajectory; `gamma` bends the clock, `lag` holds a class
/// back, so different (gamma, lag) pairs produce genuinely different paths.
fn synthetic_run(n: usize, c: usize, gamma: f64, lag: f64, steps: usize, seed: i64) -> Trajectory {
    let checkpoints = (0..=steps)
        .map(|k| {
            let t = (k as f64 / steps as f64).powf(gamma);
            let mut probs = vec![0.0f64; n * c];
            for s in 0..n {
                let f = (t * (1.0 - lag * (s as f64 / n as f64))).clamp(0.0, 1.0);
                for y in 0..c {
                    let one_hot = if y == s % c { 1.0 } else { 0.0 };
                    probs[s * c + y] = (1.0 - f) / c as f64 + f * one_hot;
                }
            }
            Checkpoint {
                tensor: PredictionTensor::new(n, c, probs, format!("s{seed}k{k}")).unwrap(),
                step: k as u64,
                epoch: k as f64,
                progress: None,
            }
        })
        .collect();
    let mut config = ConfigTag::default();
    config.architecture = if lag < 0.25 { "fast" } else { "lagged" }.into();
    config.seed = seed;
    Trajectory::new(checkpoints, config).unwrap()
}

fn main() -> predspace::Result<()> {
    let (n, c, k_grid) = (40, 4, 50);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c)?;
    let reference = Geodesic::new(&ignorance(n, c), &truth(&labels, c)?)?;

    // Reparameterization robustness: the same path recorded at half the
    // checkpoint rate is still at (almost) zero trajectory distance.
    let dense = synthetic_run(n, c, 1.0, 0.1, 60, 0);
    let sparse = Trajectory::new(
        dense.checkpoints.iter().step_by(2).cloned().collect(),
        dense.config.clone(),
    )?;
    let rd = resample(&index_by_progress(&dense, &reference)?, k_grid)?;
    let rs = resample(&index_by_progress(&sparse, &reference)?, k_grid)?;
    println!(
        "d_traj(path, every-other-checkpoint path) = {:.2e}",
        trajectory_distance(&rd, &rs)?
    );

    // Two configuration families, three seeds each.
    let mut resampled = Vec::new();
    for seed in 0..3 {
        // Seeds perturb the path itself (lag), not just its clock (gamma).
        let wiggle = seed as f64 * 0.02;
        for (gamma, lag) in [(1.0 + wiggle, 0.1 + wiggle), (1.6 + wiggle, 0.45 + wiggle)] {
            let t = synthetic_run(n, c, gamma, lag, 60, seed);
            resampled.push(resample(&index_by_progress(&t, &reference)?, k_grid)?);
        }
    }

    // Tube width of one family across its seeds, on a shared grid.
    let family = common_resample(
        &resampled
            .iter()
            .filter(|t| t.config.architecture == "fast")
            .cloned()
            .collect::<Vec<_>>(),
        k_grid,
    )?;
    let widths = median_tube_width(&family)?;
    println!(
        "fast-family tube width: median over grid {:.4}, max {:.4}",
        widths[widths.len() / 2],
        widths.iter().cloned().fold(0.0f64, f64::max)
    );

    let tdm = trajectory_distance_matrix(&resampled, DistanceKind::Bhattacharyya)?;
    let keys: Vec<String> = resampled.iter().map(|t| t.config.group_key()).collect();
    let averaged = average_over_seeds(&tdm, &keys)?;
    println!("\nseed-averaged distances between configurations:");
    for i in 0..averaged.m() {
        for j in (i + 1)..averaged.m() {
            println!("  {} vs {}: {:.4}", averaged.ids[i], averaged.ids[j], averaged.get(i, j));
        }
    }

    let dendrogram = hierarchical_cluster(&averaged, Linkage::Average)?;
    println!("\nnewick: {}", dendrogram.to_newick());
    let parts = dendrogram.cut(dendrogram.merges.last().unwrap().height);
    println!("clusters below the top merge: {parts:?}");
    Ok(())
}
