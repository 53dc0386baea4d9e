//! Synthetic teacher-student experiments: sloppy/isotropic Gaussian inputs,
//! teacher labeling, an MLP trainer recording prediction trajectories, and
//! the two-stage corner experiment. This module generates every desk-scale
//! corpus the rest of the crate is exercised on.

mod mlp;
mod train;

pub use mlp::{Dense, Gradients, InitKind, Mlp, MlpSpec};
pub use train::{
    corner_experiment, geometric_schedule, train, train_from, CornerRun, OptMethod,
    OptimizerSpec, TrainOutcome, TrainSeeds,
};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabelVector;

/// Zero-mean Gaussian inputs with a diagonal covariance whose eigenvalues
/// decay as `50 c exp(-c i)` (uniform on a log scale). `c` at or below
/// [`ISOTROPIC_THRESHOLD`] means the identity covariance instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianDatasetSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub input_dim: usize,
    /// Sloppiness decay rate `c >= 0`.
    pub sloppiness: f64,
    pub seed: u64,
}

/// Below this, the covariance is the identity.
pub const ISOTROPIC_THRESHOLD: f64 = 1e-9;
/// Eigenvalues are clamped here to avoid denormals at large `c i`.
pub const MIN_EIGENVALUE: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: GaussianDatasetSpec,
    pub train: Array2<f64>,
    pub test: Array2<f64>,
}

/// Covariance eigenvalues for a spec, 1-based index in the decay.
pub fn covariance_eigenvalues(spec: &GaussianDatasetSpec) -> Vec<f64> {
    (1..=spec.input_dim)
        .map(|i| {
            if spec.sloppiness <= ISOTROPIC_THRESHOLD {
                1.0
            } else {
                (50.0 * spec.sloppiness * (-spec.sloppiness * i as f64).exp())
                    .max(MIN_EIGENVALUE)
            }
        })
        .collect()
}

/// Samples train and held-out inputs; bit-identical for a fixed seed.
pub fn sample_dataset(spec: &GaussianDatasetSpec) -> Result<SyntheticDataset> {
    if spec.input_dim == 0 || spec.n_train == 0 {
        return Err(Error::InvalidArgument(
            "dataset needs input_dim >= 1 and n_train >= 1".into(),
        ));
    }
    if spec.sloppiness < 0.0 {
        return Err(Error::InvalidArgument("sloppiness must be >= 0".into()));
    }
    let stds: Vec<f64> = covariance_eigenvalues(spec)
        .into_iter()
        .map(|l| l.sqrt())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |n: usize| {
        Array2::from_shape_fn((n, spec.input_dim), |(_, j)| {
            rng.sample::<f64, _>(StandardNormal) * stds[j]
        })
    };
    // Train first, then test; the order is part of the determinism contract.
    let train = draw(spec.n_train);
    let test = draw(spec.n_test);
    Ok(SyntheticDataset {
        spec: spec.clone(),
        train,
        test,
    })
}

/// Where task labels come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Argmax of a randomly initialized teacher with one hidden layer of
    /// the given width.
    Teacher { hidden: usize, seed: u64 },
    /// Uniformly random labels.
    Random { seed: u64 },
    /// Caller-provided labels (train, test).
    Fixed { train: Vec<u32>, test: Vec<u32> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub labels: LabelSource,
    pub n_classes: usize,
}

/// Labels inputs by the argmax of a teacher network's logits.
pub fn label_with_teacher(
    inputs: &Array2<f64>,
    teacher: &MlpSpec,
    seed: u64,
) -> Result<LabelVector> {
    if teacher.input_dim() != inputs.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "teacher expects input dim {}, data has {}",
            teacher.input_dim(),
            inputs.ncols()
        )));
    }
    let net = Mlp::init(teacher, seed);
    let logits = net.logits(inputs);
    let labels: Vec<u32> = logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best as u32 + 1
        })
        .collect();
    LabelVector::new(labels, teacher.n_classes())
}

/// Resolves a task into (train labels, test labels).
pub fn resolve_labels(
    task: &TaskSpec,
    data: &SyntheticDataset,
) -> Result<(LabelVector, LabelVector)> {
    match &task.labels {
        LabelSource::Teacher { hidden, seed } => {
            let teacher = MlpSpec::new(
                vec![data.spec.input_dim, *hidden, task.n_classes],
                InitKind::Default,
            )?;
            Ok((
                label_with_teacher(&data.train, &teacher, *seed)?,
                label_with_teacher(&data.test, &teacher, *seed)?,
            ))
        }
        LabelSource::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let c = task.n_classes as u32;
            let mut draw = |n: usize| -> Result<LabelVector> {
                LabelVector::new(
                    (0..n).map(|_| rng.gen_range(1..=c)).collect(),
                    task.n_classes,
                )
            };
            let train = draw(data.spec.n_train)?;
            let test = draw(data.spec.n_test)?;
            Ok((train, test))
        }
        LabelSource::Fixed { train, test } => Ok((
            LabelVector::new(train.clone(), task.n_classes)?,
            LabelVector::new(test.clone(), task.n_classes)?,
        )),
    }
}

/// A full experiment preset: dataset, task, and the configuration grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub dataset: GaussianDatasetSpec,
    /// One corpus per sloppiness value; the dataset seed is offset per value.
    pub sloppiness: Vec<f64>,
    pub n_classes: usize,
    pub teacher_hidden: usize,
    pub teacher_seed: u64,
    pub grid: ConfigGrid,
    #[serde(default = "default_max_checkpoints")]
    pub max_checkpoints: usize,
    /// Optional two-stage corner experiment instead of the plain grid.
    #[serde(default)]
    pub corners: Option<CornerSpec>,
}

fn default_max_checkpoints() -> usize {
    70
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigGrid {
    pub hidden_layers: Vec<usize>,
    pub width: usize,
    pub optimizers: Vec<String>,
    pub batch_sizes: Vec<usize>,
    pub weight_decays: Vec<f64>,
    /// Learning rate is this ratio times the batch size.
    pub learning_rate_per_batch: f64,
    pub epochs: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerSpec {
    pub n_corners: usize,
    pub seeds_per_corner: usize,
}

impl Preset {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Format(format!(
                "bad preset JSON at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Bundled presets by name.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name {
            "sloppy-small" => include_str!("../../presets/sloppy-small.json"),
            "appendix-grid" => include_str!("../../presets/appendix-grid.json"),
            "acceptance-small" => include_str!("../../presets/acceptance-small.json"),
            "corners-small" => include_str!("../../presets/corners-small.json"),
            _ => return None,
        };
        Some(Self::from_json(text).expect("bundled presets parse"))
    }

    /// All flat run configurations of the grid (one per config x seed),
    /// excluding the sloppiness axis.
    pub fn run_configs(&self) -> Vec<crate::model::ConfigTag> {
        let mut out = Vec::new();
        for &depth in &self.grid.hidden_layers {
            for opt in &self.grid.optimizers {
                for &batch in &self.grid.batch_sizes {
                    for &wd in &self.grid.weight_decays {
                        for seed in 0..self.grid.seeds {
                            out.push(crate::model::ConfigTag {
                                architecture: format!("mlp-{depth}x{}", self.grid.width),
                                optimizer: opt.clone(),
                                batch_size: batch,
                                learning_rate: self.grid.learning_rate_per_batch
                                    * batch as f64,
                                weight_decay: wd,
                                augmentation: "none".into(),
                                seed: seed as i64,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Student widths for a config tag, e.g. "mlp-2x256" -> [d, 256, 256, C].
    pub fn student_spec(&self, tag: &crate::model::ConfigTag) -> Result<MlpSpec> {
        let depth: usize = tag
            .architecture
            .strip_prefix("mlp-")
            .and_then(|s| s.split('x').next())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unparseable architecture {}", tag.architecture))
            })?;
        let mut widths = vec![self.dataset.input_dim];
        widths.extend(std::iter::repeat(self.grid.width).take(depth));
        widths.push(self.n_classes);
        MlpSpec::new(widths, InitKind::Default)
    }
}
