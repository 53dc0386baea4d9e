//! Domain types: probabilistic models over a fixed sample set, special
//! points of prediction space, training trajectories and their metadata.
//!
//! A classifier evaluated on `N` samples with `C` classes is a point in the
//! `N(C-1)`-dimensional product of probability simplices. [`PredictionTensor`]
//! is that point: one row of class probabilities per sample. Everything else
//! in this crate (distances, geodesics, embeddings) operates on these.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums may deviate from 1 by at most this much before a tensor is
/// rejected outright.
pub const ROW_SUM_REPAIR: f64 = 1e-4;
/// Row sums must be within this tolerance after construction/renormalization.
pub const ROW_SUM_TOL: f64 = 1e-6;

/// Predicted class probabilities of one model over `n_samples` x `n_classes`.
///
/// Rows live on the probability simplex: entries in `[0, 1]`, each row
/// summing to 1 within [`ROW_SUM_TOL`]. Stored row-major in `f64`; on-disk
/// formats use `f32` (see [`crate::format`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    n_samples: usize,
    n_classes: usize,
    probs: Vec<f64>,
    pub model_id: String,
}

impl PredictionTensor {
    /// Validates ranges and row sums. Rows off by more than [`ROW_SUM_TOL`]
    /// are rejected; use [`PredictionTensor::from_rows_repair`] for data that
    /// may carry serialization rounding.
    pub fn new(
        n_samples: usize,
        n_classes: usize,
        probs: Vec<f64>,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        let mut t = Self::unchecked(n_samples, n_classes, probs, model_id);
        t.validate(ROW_SUM_TOL)?;
        t.clamp_unit_interval();
        Ok(t)
    }

    /// Like [`PredictionTensor::new`] but renormalizes rows whose sum is off
    /// by at most [`ROW_SUM_REPAIR`] and rejects anything worse.
    pub fn from_rows_repair(
        n_samples: usize,
        n_classes: usize,
        probs: Vec<f64>,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        let mut t = Self::unchecked(n_samples, n_classes, probs, model_id);
        t.validate_shape()?;
        for n in 0..t.n_samples {
            let row = &mut t.probs[n * t.n_classes..(n + 1) * t.n_classes];
            let mut sum = 0.0;
            for &p in row.iter() {
                if !p.is_finite() {
                    return Err(Error::InvalidProbabilities(format!(
                        "non-finite entry in row {n}"
                    )));
                }
                if !(-ROW_SUM_TOL..=1.0 + ROW_SUM_REPAIR).contains(&p) {
                    return Err(Error::InvalidProbabilities(format!(
                        "entry {p} out of [0,1] in row {n}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_REPAIR {
                return Err(Error::InvalidProbabilities(format!(
                    "row {n} sums to {sum}, beyond repair threshold {ROW_SUM_REPAIR}"
                )));
            }
            // Rows already inside the strict tolerance stay untouched so
            // that on-disk round trips remain bit exact.
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                for p in row.iter_mut() {
                    *p /= sum;
                }
            }
        }
        t.clamp_unit_interval();
        Ok(t)
    }

    fn unchecked(
        n_samples: usize,
        n_classes: usize,
        probs: Vec<f64>,
        model_id: impl Into<String>,
    ) -> Self {
        Self {
            n_samples,
            n_classes,
            probs,
            model_id: model_id.into(),
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if self.n_samples < 1 || self.n_classes < 2 {
            return Err(Error::ShapeMismatch(format!(
                "need N >= 1 and C >= 2, got N={} C={}",
                self.n_samples, self.n_classes
            )));
        }
        if self.probs.len() != self.n_samples * self.n_classes {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                self.n_samples * self.n_classes,
                self.probs.len()
            )));
        }
        Ok(())
    }

    fn validate(&self, row_tol: f64) -> Result<()> {
        self.validate_shape()?;
        for n in 0..self.n_samples {
            let row = self.row(n);
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || !(-row_tol..=1.0 + row_tol).contains(&p) {
                    return Err(Error::InvalidProbabilities(format!(
                        "entry {p} out of [0,1] in row {n}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::InvalidProbabilities(format!(
                    "row {n} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Entries can end up at 1 + O(eps) after renormalization; pin them back.
    fn clamp_unit_interval(&mut self) {
        for p in &mut self.probs {
            *p = p.clamp(0.0, 1.0);
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Row-major probability buffer, length `n_samples * n_classes`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Class distribution of sample `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.probs[n * self.n_classes..(n + 1) * self.n_classes]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_samples == other.n_samples && self.n_classes == other.n_classes
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_samples, self.n_classes, other.n_samples, other.n_classes
            )));
        }
        Ok(())
    }

    /// Fraction of samples whose argmax disagrees with `truth`.
    /// Ties resolve to the lowest class index, so ignorance predicts class 1.
    pub fn error_rate(&self, truth: &LabelVector) -> Result<f64> {
        if truth.len() != self.n_samples {
            return Err(Error::ShapeMismatch(format!(
                "labels len {} vs N={}",
                truth.len(),
                self.n_samples
            )));
        }
        let mut wrong = 0usize;
        for n in 0..self.n_samples {
            if self.argmax(n) != truth.class_index(n) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / self.n_samples as f64)
    }

    /// 0-based argmax of row `n`, lowest index on ties.
    pub fn argmax(&self, n: usize) -> usize {
        let row = self.row(n);
        let mut best = 0usize;
        for (c, &p) in row.iter().enumerate().skip(1) {
            if p > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn with_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }
}

/// Ground-truth (or task) labels, 1-based in interfaces, length `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<u32>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<u32>, n_classes: usize) -> Result<Self> {
        for &l in &labels {
            if l < 1 || l as usize > n_classes {
                return Err(Error::InvalidLabel {
                    label: l as i64,
                    n_classes,
                });
            }
        }
        Ok(Self { labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// 1-based label of sample `n`.
    pub fn label(&self, n: usize) -> u32 {
        self.labels[n]
    }

    /// 0-based class index of sample `n`.
    pub fn class_index(&self, n: usize) -> usize {
        self.labels[n] as usize - 1
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Distinguished points of prediction space.
///
/// `Ignorance` assigns `1/C` everywhere; `Truth` is one-hot on the
/// ground-truth labels; `Corner` is one-hot on an arbitrary label vector
/// (e.g. a random-label task).
#[derive(Debug, Clone)]
pub enum SpecialPoint {
    Ignorance,
    Truth(LabelVector),
    Corner(LabelVector),
}

impl SpecialPoint {
    /// Materializes the point as a concrete tensor of the given shape.
    pub fn materialize(&self, n_samples: usize, n_classes: usize) -> Result<PredictionTensor> {
        match self {
            SpecialPoint::Ignorance => {
                let p = 1.0 / n_classes as f64;
                PredictionTensor::new(
                    n_samples,
                    n_classes,
                    vec![p; n_samples * n_classes],
                    "ignorance",
                )
            }
            SpecialPoint::Truth(labels) | SpecialPoint::Corner(labels) => {
                if labels.len() != n_samples {
                    return Err(Error::ShapeMismatch(format!(
                        "labels len {} vs N={}",
                        labels.len(),
                        n_samples
                    )));
                }
                if labels.n_classes() > n_classes {
                    return Err(Error::InvalidLabel {
                        label: labels.labels().iter().copied().max().unwrap_or(0) as i64,
                        n_classes,
                    });
                }
                let mut probs = vec![0.0; n_samples * n_classes];
                for n in 0..n_samples {
                    probs[n * n_classes + labels.class_index(n)] = 1.0;
                }
                let id = match self {
                    SpecialPoint::Truth(_) => "truth",
                    _ => "corner",
                };
                PredictionTensor::new(n_samples, n_classes, probs, id)
            }
        }
    }
}

/// Shorthand for the uniform model `P_0`.
pub fn ignorance(n_samples: usize, n_classes: usize) -> PredictionTensor {
    SpecialPoint::Ignorance
        .materialize(n_samples, n_classes)
        .expect("ignorance is always valid")
}

/// Shorthand for the one-hot model `P_*` of `labels`.
pub fn truth(labels: &LabelVector, n_classes: usize) -> Result<PredictionTensor> {
    SpecialPoint::Truth(labels.clone()).materialize(labels.len(), n_classes)
}

/// Training configuration metadata attached to a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConfigTag {
    pub architecture: String,
    pub optimizer: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub augmentation: String,
    pub seed: i64,
}

impl ConfigTag {
    /// Configuration identity ignoring the seed, used when averaging
    /// trajectory distances over weight initializations.
    pub fn group_key(&self) -> String {
        format!(
            "{}|{}|b{}|lr{}|wd{}|{}",
            self.architecture,
            self.optimizer,
            self.batch_size,
            self.learning_rate,
            self.weight_decay,
            self.augmentation
        )
    }
}

/// One recorded model along a trajectory.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tensor: PredictionTensor,
    /// Gradient-update count at which the model was recorded.
    pub step: u64,
    /// Fractional epochs completed.
    pub epoch: f64,
    /// Progress along the ignorance-truth geodesic; filled by
    /// [`crate::trajectory::index_by_progress`].
    pub progress: Option<f64>,
}

/// Ordered checkpoints of one training run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub config: ConfigTag,
}

impl Trajectory {
    /// Checkpoints must share N and C and have strictly increasing steps.
    /// Most operations additionally require at least two checkpoints.
    pub fn new(checkpoints: Vec<Checkpoint>, config: ConfigTag) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::EmptyInput("trajectory has no checkpoints"));
        }
        let first = &checkpoints[0].tensor;
        let (n, c) = (first.n_samples(), first.n_classes());
        for (i, ck) in checkpoints.iter().enumerate() {
            if ck.tensor.n_samples() != n || ck.tensor.n_classes() != c {
                return Err(Error::ShapeMismatch(format!(
                    "checkpoint {i} has shape {}x{}, expected {}x{}",
                    ck.tensor.n_samples(),
                    ck.tensor.n_classes(),
                    n,
                    c
                )));
            }
            if i > 0 && checkpoints[i - 1].step >= ck.step {
                return Err(Error::InvalidArgument(format!(
                    "steps not strictly increasing at checkpoint {i}"
                )));
            }
        }
        Ok(Self {
            checkpoints,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.checkpoints[0].tensor.n_samples()
    }

    pub fn n_classes(&self) -> usize {
        self.checkpoints[0].tensor.n_classes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ignorance_is_uniform() {
        let t = ignorance(2, 4);
        for n in 0..2 {
            for &p in t.row(n) {
                assert_eq!(p, 0.25);
            }
        }
    }

    #[test]
    fn truth_is_one_hot() {
        let labels = LabelVector::new(vec![2, 1], 3).unwrap();
        let t = truth(&labels, 3).unwrap();
        assert_eq!(t.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_label_rejected() {
        let err = LabelVector::new(vec![5], 3).unwrap_err();
        match err {
            Error::InvalidLabel { label, n_classes } => {
                assert_eq!(label, 5);
                assert_eq!(n_classes, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn repair_renormalizes_small_deviation() {
        // 1.00005 total: inside the repair threshold.
        let t =
            PredictionTensor::from_rows_repair(1, 2, vec![0.50005, 0.5], "x").unwrap();
        let s: f64 = t.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repair_rejects_large_deviation() {
        let err = PredictionTensor::from_rows_repair(1, 2, vec![0.5, 0.4], "x").unwrap_err();
        assert!(matches!(err, Error::InvalidProbabilities(_)));
    }

    #[test]
    fn nan_rejected() {
        let err = PredictionTensor::from_rows_repair(1, 2, vec![f64::NAN, 1.0], "x").unwrap_err();
        assert!(matches!(err, Error::InvalidProbabilities(_)));
    }

    #[test]
    fn error_rate_ties_break_low() {
        // Ignorance predicts class 1 everywhere under the tie-break rule.
        let t = ignorance(4, 2);
        let labels = LabelVector::new(vec![1, 2, 1, 2], 2).unwrap();
        assert_eq!(t.error_rate(&labels).unwrap(), 0.5);
    }

    #[test]
    fn trajectory_requires_increasing_steps() {
        let labels = LabelVector::new(vec![1], 2).unwrap();
        let t = truth(&labels, 2).unwrap();
        let ck = |step| Checkpoint {
            tensor: t.clone(),
            step,
            epoch: 0.0,
            progress: None,
        };
        let err = Trajectory::new(vec![ck(3), ck(3)], ConfigTag::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
