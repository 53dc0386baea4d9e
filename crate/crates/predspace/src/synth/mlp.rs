//! A small fully-connected ReLU network with explicit backprop, sized for
//! teacher-student experiments. f64 throughout so analytic gradients can be
//! checked against central finite differences.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Weight initialization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Uniform on `[-fan_in^-1/2, fan_in^-1/2]` for weights and biases.
    Default,
    /// Unscaled standard Gaussian weights (biases zero): the resulting
    /// softmax sits near a corner of the simplex.
    CornerGaussian,
}

/// Architecture: input width, hidden widths, output width (= classes).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub init: InitKind,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, init: InitKind) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least input and output widths".into(),
            ));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero layer width".into()));
        }
        Ok(Self { layer_widths, init })
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// ReLU MLP; the last layer is linear (logits).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients.
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Mlp {
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layer_widths.len() - 1);
        for pair in spec.layer_widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let (w, b) = match spec.init {
                InitKind::Default => {
                    let s = 1.0 / (fan_in as f64).sqrt();
                    let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                        rng.gen_range(-s..=s)
                    });
                    let b = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-s..=s));
                    (w, b)
                }
                InitKind::CornerGaussian => {
                    let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                        rng.sample::<f64, _>(StandardNormal)
                    });
                    (w, Array1::zeros(fan_out))
                }
            };
            layers.push(Dense { w, b });
        }
        Self { layers }
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    /// Logits for a batch (rows are samples).
    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w) + &layer.b;
            if l + 1 < self.layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Row-stochastic softmax probabilities.
    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        for mut row in z.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        z
    }

    /// Mean cross-entropy over the batch (log-softmax form, no decay term)
    /// and its parameter gradients. `labels` are 0-based class indices.
    pub fn loss_and_grads(&self, x: &Array2<f64>, labels: &[usize]) -> (f64, Gradients) {
        let batch = x.nrows();
        debug_assert_eq!(labels.len(), batch);

        // Forward, keeping post-activation values per layer.
        let depth = self.layers.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(depth + 1);
        acts.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.w) + &layer.b;
            if l + 1 < depth {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }

        // Loss from log-softmax; delta = (softmax - onehot) / batch.
        let logits = &acts[depth];
        let mut delta = Array2::zeros((batch, logits.ncols()));
        let mut loss = 0.0;
        for (i, row) in logits.rows().into_iter().enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            loss -= row[labels[i]] - log_z;
            for (c, v) in row.iter().enumerate() {
                let p = (v - log_z).exp();
                delta[(i, c)] =
                    (p - if c == labels[i] { 1.0 } else { 0.0 }) / batch as f64;
            }
        }
        loss /= batch as f64;

        let mut gw: Vec<Array2<f64>> = Vec::with_capacity(depth);
        let mut gb: Vec<Array1<f64>> = Vec::with_capacity(depth);
        let mut upstream = delta;
        for l in (0..depth).rev() {
            gw.push(acts[l].t().dot(&upstream));
            gb.push(upstream.sum_axis(Axis(0)));
            if l > 0 {
                let mut da = upstream.dot(&self.layers[l].w.t());
                // ReLU mask from the post-activation values.
                da.zip_mut_with(&acts[l], |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                upstream = da;
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Gradients { w: gw, b: gb })
    }
}
