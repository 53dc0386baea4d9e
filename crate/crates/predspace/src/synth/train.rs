//! Mini-batch training with checkpoint recording, and the two-stage corner
//! experiment. Each run is single-threaded and fully determined by its
//! three seeds (dataset, init, batch order); independent runs parallelize
//! at the caller.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{InitKind, Mlp, MlpSpec};
use super::{resolve_labels, SyntheticDataset, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ConfigTag, LabelVector, PredictionTensor, Trajectory};

/// Loss above this (or non-finite) truncates the run with a divergence flag.
pub const DIVERGENCE_LOSS: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    Sgd,
    /// Nesterov momentum with coefficient 0.9:
    /// `v <- mu v - eta g; w <- w + mu v - eta g`.
    NesterovSgd,
}

impl OptMethod {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => OptMethod::Sgd,
            "nesterov" => OptMethod::NesterovSgd,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown optimizer '{other}' (expected sgd|nesterov)"
                )))
            }
        })
    }
}

pub const NESTEROV_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub method: OptMethod,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Coupled decay, added to the weight gradients (not biases).
    pub weight_decay: f64,
    pub epochs: usize,
    /// Strictly increasing step numbers at which predictions are recorded;
    /// step 0 is the initialization.
    pub checkpoint_schedule: Vec<u64>,
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch size and epochs must be >= 1".into(),
            ));
        }
        if self.checkpoint_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "checkpoint schedule must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Geometric checkpoint schedule over `[0, total_steps]`: dense at the
/// start, ratio-spaced later, at most `max_checkpoints` entries, always
/// containing 0 and the final step.
pub fn geometric_schedule(total_steps: u64, max_checkpoints: usize) -> Vec<u64> {
    assert!(max_checkpoints >= 2);
    if total_steps == 0 {
        return vec![0];
    }
    let budget = max_checkpoints - 1;
    let ratio = (total_steps as f64)
        .powf(1.0 / (budget.saturating_sub(1)).max(1) as f64)
        .max(1.0 + 1e-9);
    let mut steps = vec![0u64];
    let mut x = 1.0f64;
    while steps.len() < budget && (x.round() as u64) < total_steps {
        let s = x.round() as u64;
        if *steps.last().unwrap() != s {
            steps.push(s);
        }
        x *= ratio;
        // Ratio spacing below integer resolution advances by one step.
        if (x.round() as u64) <= s {
            x = (s + 1) as f64;
        }
    }
    if *steps.last().unwrap() != total_steps {
        steps.push(total_steps);
    }
    steps
}

/// The seed triple that pins a run down.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainSeeds {
    pub init: u64,
    pub shuffle: u64,
}

/// Everything a finished run produces: train- and test-split trajectories,
/// the final network, and the divergence flag.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub train_traj: Trajectory,
    pub test_traj: Trajectory,
    pub final_train_error: f64,
    pub diverged: bool,
    pub final_mlp: Mlp,
}

/// Trains a fresh student on the dataset and task; records softmax outputs
/// on the train and held-out inputs at each scheduled step.
pub fn train(
    data: &SyntheticDataset,
    task: &TaskSpec,
    student: &MlpSpec,
    opt: &OptimizerSpec,
    seeds: TrainSeeds,
    config: &ConfigTag,
) -> Result<TrainOutcome> {
    let mlp = Mlp::init(student, seeds.init);
    let (train_labels, _test_labels) = resolve_labels(task, data)?;
    train_from(mlp, data, &train_labels, opt, seeds.shuffle, config)
}

/// Trains from an existing network state (stage-2 runs resume from the
/// stage-1 endpoint).
pub fn train_from(
    mut mlp: Mlp,
    data: &SyntheticDataset,
    train_labels: &LabelVector,
    opt: &OptimizerSpec,
    shuffle_seed: u64,
    config: &ConfigTag,
) -> Result<TrainOutcome> {
    opt.validate()?;
    if train_labels.len() != data.train.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} train rows",
            train_labels.len(),
            data.train.nrows()
        )));
    }
    if train_labels.n_classes() != mlp.n_classes() {
        return Err(Error::ShapeMismatch(format!(
            "task has {} classes, student emits {}",
            train_labels.n_classes(),
            mlp.n_classes()
        )));
    }
    let n = data.train.nrows();
    let steps_per_epoch = n.div_ceil(opt.batch_size);
    let labels0: Vec<usize> = (0..n).map(|i| train_labels.class_index(i)).collect();

    let mut velocity: Vec<(Array2<f64>, ndarray::Array1<f64>)> = mlp
        .layers
        .iter()
        .map(|l| {
            (
                Array2::zeros(l.w.raw_dim()),
                ndarray::Array1::zeros(l.b.raw_dim()),
            )
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut schedule = opt.checkpoint_schedule.iter().copied().peekable();
    let mut train_ckpts: Vec<Checkpoint> = Vec::new();
    let mut test_ckpts: Vec<Checkpoint> = Vec::new();
    let record = |mlp: &Mlp, step: u64, tc: &mut Vec<Checkpoint>, vc: &mut Vec<Checkpoint>| {
        let epoch = step as f64 / steps_per_epoch as f64;
        for (inputs, sink, split) in
            [(&data.train, &mut *tc, "train"), (&data.test, &mut *vc, "test")]
        {
            if inputs.nrows() == 0 {
                continue;
            }
            let probs = mlp.probabilities(inputs);
            let tensor = PredictionTensor::new(
                inputs.nrows(),
                mlp.n_classes(),
                probs.into_raw_vec_and_offset().0,
                format!("{split}#{step}"),
            )
            .expect("softmax rows are stochastic");
            sink.push(Checkpoint {
                tensor,
                step,
                epoch,
                progress: None,
            });
        }
    };

    let mut step = 0u64;
    if schedule.next_if_eq(&0).is_some() {
        record(&mlp, 0, &mut train_ckpts, &mut test_ckpts);
    }
    let mut diverged = false;
    'outer: for _epoch in 0..opt.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(opt.batch_size) {
            let x = data.train.select(ndarray::Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels0[i]).collect();
            let (loss, grads) = mlp.loss_and_grads(&x, &y);
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                diverged = true;
                break 'outer;
            }
            for (l, layer) in mlp.layers.iter_mut().enumerate() {
                let mut gw = grads.w[l].clone();
                if opt.weight_decay > 0.0 {
                    gw.scaled_add(opt.weight_decay, &layer.w);
                }
                let gb = &grads.b[l];
                match opt.method {
                    OptMethod::Sgd => {
                        layer.w.scaled_add(-opt.learning_rate, &gw);
                        layer.b.scaled_add(-opt.learning_rate, gb);
                    }
                    OptMethod::NesterovSgd => {
                        let (vw, vb) = &mut velocity[l];
                        vw.mapv_inplace(|v| v * NESTEROV_MOMENTUM);
                        vw.scaled_add(-opt.learning_rate, &gw);
                        vb.mapv_inplace(|v| v * NESTEROV_MOMENTUM);
                        vb.scaled_add(-opt.learning_rate, gb);
                        layer.w.scaled_add(NESTEROV_MOMENTUM, vw);
                        layer.w.scaled_add(-opt.learning_rate, &gw);
                        layer.b.scaled_add(NESTEROV_MOMENTUM, vb);
                        layer.b.scaled_add(-opt.learning_rate, gb);
                    }
                }
            }
            step += 1;
            if schedule.next_if_eq(&step).is_some() {
                record(&mlp, step, &mut train_ckpts, &mut test_ckpts);
            }
        }
    }

    if train_ckpts.is_empty() || train_ckpts.last().unwrap().step != step {
        // Divergence truncation keeps whatever was recorded plus the last
        // healthy state; normal runs land here only if the schedule missed
        // the final step.
        if !diverged {
            record(&mlp, step, &mut train_ckpts, &mut test_ckpts);
        }
    }
    if train_ckpts.is_empty() {
        return Err(Error::Numerical(
            "run diverged before the first checkpoint".into(),
        ));
    }

    let final_tensor = &train_ckpts.last().unwrap().tensor;
    let final_train_error = final_tensor.error_rate(train_labels)?;
    let train_traj = Trajectory::new(train_ckpts, config.clone())?;
    let test_traj = Trajectory::new(test_ckpts, config.clone())?;
    Ok(TrainOutcome {
        train_traj,
        test_traj,
        final_train_error,
        diverged,
        final_mlp: mlp,
    })
}

/// One corner of the two-stage experiment.
#[derive(Debug)]
pub struct CornerRun {
    pub corner: usize,
    pub seed: usize,
    /// Trained from an unscaled-Gaussian init toward random labels.
    pub stage1: TrainOutcome,
    /// Resumed from the stage-1 endpoint toward the real truth.
    pub stage2: TrainOutcome,
}

/// Two-stage corner experiment: students start near simplex corners
/// (unscaled Gaussian init), first fit a random-label task, then retrain
/// from those endpoints toward the real labels.
pub fn corner_experiment(
    data: &SyntheticDataset,
    task: &TaskSpec,
    student: &MlpSpec,
    opt: &OptimizerSpec,
    n_corners: usize,
    seeds_per_corner: usize,
    base_seed: u64,
) -> Result<Vec<CornerRun>> {
    if n_corners == 0 || seeds_per_corner == 0 {
        return Err(Error::InvalidArgument(
            "need at least one corner and one seed".into(),
        ));
    }
    let (real_train_labels, _) = resolve_labels(task, data)?;
    let corner_student = MlpSpec {
        layer_widths: student.layer_widths.clone(),
        init: InitKind::CornerGaussian,
    };
    let mut runs = Vec::with_capacity(n_corners * seeds_per_corner);
    for corner in 0..n_corners {
        // Each corner carries its own random-label task.
        let random_task = TaskSpec {
            labels: super::LabelSource::Random {
                seed: base_seed ^ (corner as u64).wrapping_mul(0x9e3779b97f4a7c15),
            },
            n_classes: task.n_classes,
        };
        let (corner_train_labels, _) = resolve_labels(&random_task, data)?;
        for seed in 0..seeds_per_corner {
            let run_seed = base_seed
                .wrapping_add(corner as u64 * 1_000_003)
                .wrapping_add(seed as u64 * 7_919);
            let mut cfg = ConfigTag {
                architecture: format!("corner{corner}"),
                optimizer: "sgd".into(),
                batch_size: opt.batch_size,
                learning_rate: opt.learning_rate,
                weight_decay: opt.weight_decay,
                augmentation: "none".into(),
                seed: seed as i64,
            };
            let stage1_mlp = Mlp::init(&corner_student, run_seed);
            cfg.architecture = format!("corner{corner}-stage1");
            let stage1 = train_from(
                stage1_mlp,
                data,
                &corner_train_labels,
                opt,
                run_seed ^ 0xabcd,
                &cfg,
            )?;
            cfg.architecture = format!("corner{corner}-stage2");
            let stage2 = train_from(
                stage1.final_mlp.clone(),
                data,
                &real_train_labels,
                opt,
                run_seed ^ 0xdcba,
                &cfg,
            )?;
            runs.push(CornerRun {
                corner,
                seed,
                stage1,
                stage2,
            });
        }
    }
    Ok(runs)
}
