//! Geodesics on the product of (C-1)-spheres, progress projection onto the
//! ignorance-truth geodesic, and point-to-geodesic distances.
//!
//! In square-root coordinates each sample's distribution is a point on the
//! unit sphere, so the geodesic between two models is a per-sample great
//! circle. Progress of a model is the interpolation parameter of its
//! closest point on the ignorance-truth geodesic under the product-sphere
//! geodesic distance.

use crate::error::{Error, Result};
use crate::metrics::{DistanceKind, EPS_P};
use crate::model::PredictionTensor;

/// Per-sample arcs shorter than this are treated as degenerate: the great
/// circle formula is 0/0 there and the limit is the constant distribution.
pub const DEGENERATE_ARC: f64 = 1e-9;

/// Solver tolerance in the interpolation parameter.
pub const ALPHA_TOL: f64 = 1e-6;
const GOLDEN_MAX_ITERS: usize = 200;
/// Coarse scan size used to bracket the minimum before golden-section
/// refinement; guards against shallow multimodality.
const SCAN_POINTS: usize = 64;

/// A geodesic between two models, with precomputed square-root coordinates
/// and per-sample half angles `d_G^n = arccos(sum_c sqrt(p_u p_v))`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    n_samples: usize,
    n_classes: usize,
    sqrt_u: Vec<f64>,
    sqrt_v: Vec<f64>,
    half_angles: Vec<f64>,
    endpoints: (PredictionTensor, PredictionTensor),
}

impl Geodesic {
    pub fn new(u: &PredictionTensor, v: &PredictionTensor) -> Result<Self> {
        u.check_same_shape(v)?;
        let (n, c) = (u.n_samples(), u.n_classes());
        let sqrt_u: Vec<f64> = u.probs().iter().map(|p| p.sqrt()).collect();
        let sqrt_v: Vec<f64> = v.probs().iter().map(|p| p.sqrt()).collect();
        let mut half_angles = Vec::with_capacity(n);
        for i in 0..n {
            let mut bc = 0.0;
            for j in i * c..(i + 1) * c {
                bc += sqrt_u[j] * sqrt_v[j];
            }
            half_angles.push(bc.clamp(-1.0, 1.0).acos());
        }
        Ok(Self {
            n_samples: n,
            n_classes: c,
            sqrt_u,
            sqrt_v,
            half_angles,
            endpoints: (u.clone(), v.clone()),
        })
    }

    pub fn endpoints(&self) -> (&PredictionTensor, &PredictionTensor) {
        (&self.endpoints.0, &self.endpoints.1)
    }

    /// Per-sample half angles, each in `[0, pi/2]`.
    pub fn per_sample_half_angle(&self) -> &[f64] {
        &self.half_angles
    }

    /// True when the endpoints coincide on every sample.
    pub fn is_degenerate(&self) -> bool {
        self.half_angles.iter().all(|&d| d < DEGENERATE_ARC)
    }

    /// The point at interpolation parameter `alpha` in `[0, 1]`. Exact
    /// endpoints are returned for alpha = 0 and 1; degenerate per-sample
    /// arcs interpolate linearly in square-root coordinates.
    pub fn point(&self, alpha: f64) -> Result<PredictionTensor> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        if alpha == 0.0 {
            return Ok(self.endpoints.0.clone());
        }
        if alpha == 1.0 {
            return Ok(self.endpoints.1.clone());
        }
        let (n, c) = (self.n_samples, self.n_classes);
        let mut probs = vec![0.0f64; n * c];
        for i in 0..n {
            let d = self.half_angles[i];
            let (a, b) = interp_coefficients(alpha, d);
            let row = &mut probs[i * c..(i + 1) * c];
            let mut norm = 0.0;
            for (k, slot) in row.iter_mut().enumerate() {
                let s = a * self.sqrt_u[i * c + k] + b * self.sqrt_v[i * c + k];
                let p = s * s;
                *slot = p;
                norm += p;
            }
            for slot in row.iter_mut() {
                *slot /= norm;
            }
        }
        PredictionTensor::new(n, c, probs, format!("geodesic@{alpha}"))
    }

    /// Bhattacharyya coefficients of `w` against both endpoints, per sample,
    /// for fast objective evaluation along the arc.
    fn coefficients_against(&self, w: &PredictionTensor) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.endpoints.0.check_same_shape(w)?;
        let (n, c) = (self.n_samples, self.n_classes);
        let sqrt_w: Vec<f64> = w.probs().iter().map(|p| p.sqrt()).collect();
        let mut wu = Vec::with_capacity(n);
        let mut wv = Vec::with_capacity(n);
        for i in 0..n {
            let (mut du, mut dv) = (0.0, 0.0);
            for j in i * c..(i + 1) * c {
                du += sqrt_w[j] * self.sqrt_u[j];
                dv += sqrt_w[j] * self.sqrt_v[j];
            }
            wu.push(du);
            wv.push(dv);
        }
        Ok((sqrt_w, wu, wv))
    }
}

/// sin((1-a)d)/sin(d) and sin(ad)/sin(d), with the linear limit for
/// degenerate arcs.
fn interp_coefficients(alpha: f64, d: f64) -> (f64, f64) {
    if d < DEGENERATE_ARC {
        (1.0 - alpha, alpha)
    } else {
        let s = d.sin();
        ((((1.0 - alpha) * d).sin()) / s, ((alpha * d).sin()) / s)
    }
}

/// Objective evaluator for distances from a fixed model to points along a
/// geodesic, O(N) per evaluation for Bhattacharyya/geodesic kinds after an
/// O(NC) setup.
struct ArcObjective<'a> {
    g: &'a Geodesic,
    kind: DistanceKind,
    sqrt_w: Vec<f64>,
    wu: Vec<f64>,
    wv: Vec<f64>,
    w: &'a PredictionTensor,
}

impl<'a> ArcObjective<'a> {
    fn new(g: &'a Geodesic, w: &'a PredictionTensor, kind: DistanceKind) -> Result<Self> {
        let (sqrt_w, wu, wv) = g.coefficients_against(w)?;
        Ok(Self {
            g,
            kind,
            sqrt_w,
            wu,
            wv,
            w,
        })
    }

    fn eval(&self, alpha: f64) -> f64 {
        let n = self.g.n_samples;
        match self.kind {
            DistanceKind::Bhattacharyya | DistanceKind::Geodesic | DistanceKind::Hellinger => {
                let mut log_acc = 0.0;
                let mut ang_acc = 0.0;
                let mut prod = 1.0;
                for i in 0..n {
                    let (a, b) = interp_coefficients(alpha, self.g.half_angles[i]);
                    let bc = a * self.wu[i] + b * self.wv[i];
                    match self.kind {
                        DistanceKind::Bhattacharyya => log_acc += bc.max(EPS_P).ln(),
                        DistanceKind::Geodesic => ang_acc += bc.clamp(-1.0, 1.0).acos(),
                        _ => prod *= bc.clamp(0.0, 1.0),
                    }
                }
                match self.kind {
                    DistanceKind::Bhattacharyya => (-log_acc / n as f64).max(0.0),
                    DistanceKind::Geodesic => ang_acc / n as f64,
                    _ => 2.0 * (1.0 - prod),
                }
            }
            DistanceKind::SymmetricKL | DistanceKind::SquaredEuclidean => {
                let c = self.g.n_classes;
                let mut acc = 0.0;
                for i in 0..n {
                    let (a, b) = interp_coefficients(alpha, self.g.half_angles[i]);
                    let mut row = [0.0f64; 64];
                    let row = &mut row[..c.min(64)];
                    let mut heap_row;
                    let row: &mut [f64] = if c <= 64 {
                        row
                    } else {
                        heap_row = vec![0.0f64; c];
                        &mut heap_row
                    };
                    let mut norm = 0.0;
                    for k in 0..c {
                        let s = a * self.g.sqrt_u[i * c + k] + b * self.g.sqrt_v[i * c + k];
                        let p = s * s;
                        row[k] = p;
                        norm += p;
                    }
                    for k in 0..c {
                        let p = row[k] / norm;
                        let q = self.sqrt_w[i * c + k] * self.sqrt_w[i * c + k];
                        match self.kind {
                            DistanceKind::SymmetricKL => {
                                acc += (p - q) * (p.max(EPS_P).ln() - q.max(EPS_P).ln());
                            }
                            _ => {
                                let d = p - q;
                                acc += d * d;
                            }
                        }
                    }
                }
                let _ = self.w;
                acc / n as f64
            }
        }
    }
}

/// Minimizes `f` over `[0, 1]`: a coarse scan brackets the minimum, then
/// golden-section search refines it to [`ALPHA_TOL`]. Returns the best
/// `(alpha, f(alpha))` seen, so boundary minima come out exact.
fn minimize_on_unit_interval(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best_alpha = 0.0;
    let mut best_val = f64::INFINITY;
    let mut best_idx = 0usize;
    for k in 0..=SCAN_POINTS {
        let alpha = k as f64 / SCAN_POINTS as f64;
        let v = f(alpha);
        if v < best_val {
            best_val = v;
            best_alpha = alpha;
            best_idx = k;
        }
    }
    let mut lo = (best_idx.saturating_sub(1)) as f64 / SCAN_POINTS as f64;
    let mut hi = ((best_idx + 1).min(SCAN_POINTS)) as f64 / SCAN_POINTS as f64;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0usize;
    while hi - lo > ALPHA_TOL && iters < GOLDEN_MAX_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best_val {
            best_val = v;
            best_alpha = x;
        }
    }
    (best_alpha, best_val)
}

/// Progress of `w` along the `start -> truth` geodesic: the parameter of
/// the closest point under the product-sphere geodesic distance.
pub fn progress(
    w: &PredictionTensor,
    start: &PredictionTensor,
    truth: &PredictionTensor,
) -> Result<f64> {
    let g = Geodesic::new(start, truth)?;
    progress_on(w, &g)
}

/// Progress against a prebuilt geodesic; use this when indexing many
/// checkpoints against the same reference arc.
pub fn progress_on(w: &PredictionTensor, g: &Geodesic) -> Result<f64> {
    if g.is_degenerate() {
        return Err(Error::DegenerateGeodesic);
    }
    let obj = ArcObjective::new(g, w, DistanceKind::Geodesic)?;
    let (alpha, _) = minimize_on_unit_interval(|a| obj.eval(a));
    Ok(alpha)
}

/// Minimum distance (of the given kind) from `w` to any point of the
/// geodesic, to [`ALPHA_TOL`] in the parameter.
pub fn distance_to_geodesic(
    w: &PredictionTensor,
    g: &Geodesic,
    kind: DistanceKind,
) -> Result<f64> {
    if g.is_degenerate() {
        return Err(Error::DegenerateGeodesic);
    }
    let obj = ArcObjective::new(g, w, kind)?;
    let (_, val) = minimize_on_unit_interval(|a| obj.eval(a));
    Ok(val)
}

/// Same minimization with the argument roles swapped: how close the
/// geodesic comes to a fixed point `x`.
pub fn min_geodesic_distance_to_point(
    g: &Geodesic,
    x: &PredictionTensor,
    kind: DistanceKind,
) -> Result<f64> {
    distance_to_geodesic(x, g, kind)
}

/// Where a maximally confident model's projection onto the
/// ignorance-truth geodesic lands as a function of its error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgressRegime {
    /// Error below `1 - C^(-1/2)` (strict): the projection sits at truth.
    AtTruthProjection,
    Interior,
}

/// Classifies a confident model by the bound `error < 1 - 1/sqrt(C)`.
pub fn progress_error_bound(error_rate: f64, n_classes: usize) -> Result<ProgressRegime> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::InvalidArgument(format!(
            "error rate {error_rate} outside [0, 1]"
        )));
    }
    let threshold = 1.0 - 1.0 / (n_classes as f64).sqrt();
    Ok(if error_rate < threshold {
        ProgressRegime::AtTruthProjection
    } else {
        ProgressRegime::Interior
    })
}
