//! The trainer end to end in memory: sample a sloppy Gaussian dataset,
//! label it with a random teacher, train a few students, and look at the
//! trajectories through the lens of the rest of the crate.

use predspace::geometry::Geodesic;
use predspace::metrics::{bhattacharyya, pairwise_matrix, DistanceKind};
use predspace::model::ConfigTag;
use predspace::synth::{
    geometric_schedule, sample_dataset, train, GaussianDatasetSpec, InitKind, LabelSource,
    MlpSpec, OptMethod, OptimizerSpec, TaskSpec, TrainSeeds,
};
use predspace::trajectory::{index_by_progress, resample, trajectory_distance};
use predspace::{ignorance, truth, PredictionTensor};

fn main() -> predspace::Result<()> {
    let data = sample_dataset(&GaussianDatasetSpec {
        n_train: 500,
        n_test: 100,
        input_dim: 30,
        sloppiness: 0.5,
        seed: 11,
    })?;
    let task = TaskSpec {
        labels: LabelSource::Teacher { hidden: 50, seed: 7 },
        n_classes: 5,
    };
    let student = MlpSpec::new(vec![30, 64, 5], InitKind::Default)?;

    let epochs = 60;
    let steps = (data.train.nrows().div_ceil(100) * epochs) as u64;
    let mut outcomes = Vec::new();
    for (seed, method) in [(1u64, OptMethod::Sgd), (2, OptMethod::Sgd), (3, OptMethod::NesterovSgd)] {
        let opt = OptimizerSpec {
            method,
            batch_size: 100,
            learning_rate: 0.1,
            weight_decay: 0.0,
            epochs,
            checkpoint_schedule: geometric_schedule(steps, 40),
        };
        let mut tag = ConfigTag::default();
        tag.architecture = "mlp-1x64".into();
        tag.optimizer = format!("{method:?}");
        tag.seed = seed as i64;
        let out = train(
            &data,
            &task,
            &student,
            &opt,
            TrainSeeds { init: seed, shuffle: seed ^ 0xff },
            &tag,
        )?;
        println!(
            "{:?} seed {seed}: {} checkpoints, final train error {:.3}, diverged = {}",
            method,
            out.train_traj.len(),
            out.final_train_error,
            out.diverged
        );
        outcomes.push(out);
    }

    // The first checkpoint sits near ignorance; training moves toward truth.
    let (n, c) = (data.train.nrows(), 5);
    let labels = outcomes[0]
        .train_traj
        .checkpoints
        .first()
        .map(|_| predspace::synth::resolve_labels(&task, &data))
        .unwrap()?
        .0;
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c)?;
    let first = &outcomes[0].train_traj.checkpoints[0].tensor;
    let last = &outcomes[0].train_traj.checkpoints.last().unwrap().tensor;
    println!("\nd_B(init, ignorance) = {:.4}", bhattacharyya(first, &p0)?);
    println!("d_B(final, truth)    = {:.4}", bhattacharyya(last, &ps)?);

    // Equal-progress comparison of two seeds of the same configuration.
    let reference = Geodesic::new(&p0, &ps)?;
    let r0 = resample(&index_by_progress(&outcomes[0].train_traj, &reference)?, 50)?;
    let r1 = resample(&index_by_progress(&outcomes[1].train_traj, &reference)?, 50)?;
    println!("\nd_traj between two seeds of the same config: {:.4}", trajectory_distance(&r0, &r1)?);

    // The whole run collection is effectively low-dimensional.
    let models: Vec<PredictionTensor> = outcomes
        .iter()
        .flat_map(|o| o.train_traj.checkpoints.iter().map(|ck| ck.tensor.clone()))
        .collect();
    let dm = pairwise_matrix(&models, DistanceKind::Bhattacharyya, 64, None)?;
    let emb = predspace::embedding::inpca(&dm, 10)?;
    println!(
        "explained stress over {} checkpoints: d=1 {:.3}, d=3 {:.3}, d=10 {:.3}",
        dm.m(),
        emb.explained_stress(1)?,
        emb.explained_stress(3)?,
        emb.explained_stress(10)?
    );
    Ok(())
}
