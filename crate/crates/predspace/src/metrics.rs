//! Per-sample-averaged intensive distances between prediction tensors and
//! chunked construction of large pairwise distance matrices.
//!
//! All distances except Hellinger are averaged over samples, so they stay
//! O(1) as `N` grows. Hellinger keeps the product form on purpose: it
//! saturates at 2 in high dimension, which is exactly what it is here to
//! demonstrate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{LabelVector, PredictionTensor};

/// Probability clamp applied inside logs and denominators. One-hot
/// checkpoints would otherwise produce infinities in the symmetrized KL.
pub const EPS_P: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Bhattacharyya,
    Geodesic,
    SymmetricKL,
    Hellinger,
    SquaredEuclidean,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 5] = [
        DistanceKind::Bhattacharyya,
        DistanceKind::Geodesic,
        DistanceKind::SymmetricKL,
        DistanceKind::Hellinger,
        DistanceKind::SquaredEuclidean,
    ];

    /// Stable numeric code used in the DMX1 cache header.
    pub fn code(self) -> u32 {
        match self {
            DistanceKind::Bhattacharyya => 0,
            DistanceKind::Geodesic => 1,
            DistanceKind::SymmetricKL => 2,
            DistanceKind::Hellinger => 3,
            DistanceKind::SquaredEuclidean => 4,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        Ok(match code {
            0 => DistanceKind::Bhattacharyya,
            1 => DistanceKind::Geodesic,
            2 => DistanceKind::SymmetricKL,
            3 => DistanceKind::Hellinger,
            4 => DistanceKind::SquaredEuclidean,
            other => return Err(Error::Format(format!("unknown distance kind code {other}"))),
        })
    }

    /// CLI spelling: bhat, geo, skl, hell, euclid.
    pub fn parse_flag(s: &str) -> Result<Self> {
        Ok(match s {
            "bhat" => DistanceKind::Bhattacharyya,
            "geo" => DistanceKind::Geodesic,
            "skl" => DistanceKind::SymmetricKL,
            "hell" => DistanceKind::Hellinger,
            "euclid" => DistanceKind::SquaredEuclidean,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown distance kind '{other}' (expected bhat|geo|skl|hell|euclid)"
                )))
            }
        })
    }

    pub fn flag(&self) -> &'static str {
        match self {
            DistanceKind::Bhattacharyya => "bhat",
            DistanceKind::Geodesic => "geo",
            DistanceKind::SymmetricKL => "skl",
            DistanceKind::Hellinger => "hell",
            DistanceKind::SquaredEuclidean => "euclid",
        }
    }
}

/// Sums logs of per-sample coefficients by multiplying runs of them and
/// taking one log per run; resets before the product can underflow. Exact
/// to rounding and much cheaper than a log per sample.
#[inline]
fn chunked_log_sum(mut fold: impl FnMut() -> Option<f64>) -> f64 {
    let mut acc = 0.0f64;
    let mut prod = 1.0f64;
    while let Some(bc) = fold() {
        prod *= bc;
        if prod < 1e-250 {
            acc += prod.ln();
            prod = 1.0;
        }
    }
    acc + prod.ln()
}

/// Bhattacharyya distance per sample:
/// `-N^-1 sum_n log sum_c sqrt(p_u^n(c) p_v^n(c))`.
pub fn bhattacharyya(u: &PredictionTensor, v: &PredictionTensor) -> Result<f64> {
    u.check_same_shape(v)?;
    let (n, c) = (u.n_samples(), u.n_classes());
    let (pu, pv) = (u.probs(), v.probs());
    let mut i = 0;
    let acc = chunked_log_sum(|| {
        if i >= n {
            return None;
        }
        let mut bc = 0.0;
        for j in i * c..(i + 1) * c {
            bc += (pu[j] * pv[j]).sqrt();
        }
        i += 1;
        Some(bc.max(EPS_P))
    });
    Ok((-acc / n as f64).max(0.0))
}

/// Geodesic distance on the product of (C-1)-spheres:
/// `N^-1 sum_n arccos(sum_c sqrt(p_u^n(c) p_v^n(c)))`.
pub fn geodesic_distance(u: &PredictionTensor, v: &PredictionTensor) -> Result<f64> {
    u.check_same_shape(v)?;
    let (n, c) = (u.n_samples(), u.n_classes());
    let (pu, pv) = (u.probs(), v.probs());
    let mut acc = 0.0;
    for i in 0..n {
        let mut bc = 0.0;
        for j in i * c..(i + 1) * c {
            bc += (pu[j] * pv[j]).sqrt();
        }
        acc += bc.clamp(-1.0, 1.0).acos();
    }
    Ok(acc / n as f64)
}

/// Symmetrized Kullback-Leibler divergence, per-sample averaged, with
/// probabilities clamped below by [`EPS_P`] inside the logs.
pub fn symmetric_kl(u: &PredictionTensor, v: &PredictionTensor) -> Result<f64> {
    u.check_same_shape(v)?;
    let (n, c) = (u.n_samples(), u.n_classes());
    let (pu, pv) = (u.probs(), v.probs());
    let mut acc = 0.0;
    for j in 0..n * c {
        let (a, b) = (pu[j], pv[j]);
        acc += (a - b) * (a.max(EPS_P).ln() - b.max(EPS_P).ln());
    }
    Ok((acc / n as f64).max(0.0))
}

/// Hellinger distance in the paper's product form,
/// `2 (1 - prod_n sum_c sqrt(p_u^n(c) p_v^n(c)))`. Not per-sample averaged;
/// saturates at 2 for independent high-dimensional models.
pub fn hellinger(u: &PredictionTensor, v: &PredictionTensor) -> Result<f64> {
    u.check_same_shape(v)?;
    let (n, c) = (u.n_samples(), u.n_classes());
    let (pu, pv) = (u.probs(), v.probs());
    let mut prod = 1.0;
    for i in 0..n {
        let mut bc = 0.0;
        for j in i * c..(i + 1) * c {
            bc += (pu[j] * pv[j]).sqrt();
        }
        prod *= bc.clamp(0.0, 1.0);
    }
    Ok(2.0 * (1.0 - prod))
}

/// Per-sample mean of squared probability differences (the standard-PCA
/// distance): `N^-1 sum_n sum_c (p_u - p_v)^2`.
pub fn squared_euclidean(u: &PredictionTensor, v: &PredictionTensor) -> Result<f64> {
    u.check_same_shape(v)?;
    let n = u.n_samples();
    let (pu, pv) = (u.probs(), v.probs());
    let mut acc = 0.0;
    for j in 0..pu.len() {
        let d = pu[j] - pv[j];
        acc += d * d;
    }
    Ok(acc / n as f64)
}

/// Dispatches on `kind`.
pub fn distance(u: &PredictionTensor, v: &PredictionTensor, kind: DistanceKind) -> Result<f64> {
    match kind {
        DistanceKind::Bhattacharyya => bhattacharyya(u, v),
        DistanceKind::Geodesic => geodesic_distance(u, v),
        DistanceKind::SymmetricKL => symmetric_kl(u, v),
        DistanceKind::Hellinger => hellinger(u, v),
        DistanceKind::SquaredEuclidean => squared_euclidean(u, v),
    }
}

/// Checks the identity "Bhattacharyya distance to a one-hot truth is half
/// the cross-entropy loss". Returns `(d_B(P_w, P_*), CE/2)`; the two agree
/// to 1e-10. The cross entropy clamps `p` at `EPS_P^2` so the identity also
/// holds at probability zero, where both sides hit the clamp.
pub fn cross_entropy_half_check(
    w: &PredictionTensor,
    truth_labels: &LabelVector,
) -> Result<(f64, f64)> {
    if truth_labels.len() != w.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "labels len {} vs N={}",
            truth_labels.len(),
            w.n_samples()
        )));
    }
    let truth = crate::model::truth(truth_labels, w.n_classes())?;
    let db = bhattacharyya(w, &truth)?;
    let mut ce = 0.0;
    for n in 0..w.n_samples() {
        let p = w.row(n)[truth_labels.class_index(n)];
        ce -= p.max(EPS_P * EPS_P).ln();
    }
    Ok((db, 0.5 * ce / w.n_samples() as f64))
}

/// Optional pre-processing hook for very large `C`: mixes classes through a
/// random row-stochastic matrix into `target_classes` columns, preserving
/// row sums. The mixing matrix distribution is uniform entries normalized
/// per original class; deterministic under `seed`.
pub fn random_class_projection(
    t: &PredictionTensor,
    target_classes: usize,
    seed: u64,
) -> Result<PredictionTensor> {
    use rand::{Rng, SeedableRng};
    if target_classes < 2 {
        return Err(Error::InvalidArgument(
            "target_classes must be at least 2".into(),
        ));
    }
    let (n, c) = (t.n_samples(), t.n_classes());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut mix = vec![0.0f64; c * target_classes];
    for row in mix.chunks_mut(target_classes) {
        let mut sum = 0.0;
        for m in row.iter_mut() {
            *m = rng.gen::<f64>();
            sum += *m;
        }
        for m in row.iter_mut() {
            *m /= sum;
        }
    }
    let mut out = vec![0.0f64; n * target_classes];
    for i in 0..n {
        let row = t.row(i);
        let dst = &mut out[i * target_classes..(i + 1) * target_classes];
        for (ci, &p) in row.iter().enumerate() {
            let mrow = &mix[ci * target_classes..(ci + 1) * target_classes];
            for (k, &m) in mrow.iter().enumerate() {
                dst[k] += p * m;
            }
        }
    }
    PredictionTensor::from_rows_repair(n, target_classes, out, t.model_id.clone())
}

/// Full dense matrices are kept in memory up to this size; beyond it an
/// on-disk row-block cache is mandatory.
pub const MAX_IN_MEMORY_M: usize = 65_536;

/// Symmetric matrix of pairwise intensive distances (per-sample units).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub kind: DistanceKind,
    pub ids: Vec<String>,
    entries: Vec<f64>,
    m: usize,
}

/// Pairwise distances between whole trajectories (see
/// [`crate::trajectory::trajectory_distance_matrix`]); same layout and
/// invariants, ids name trajectories instead of models.
pub type TrajectoryDistanceMatrix = DistanceMatrix;

impl DistanceMatrix {
    /// Validates symmetry (1e-12), zero diagonal and non-negative finite
    /// entries.
    pub fn new(kind: DistanceKind, ids: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        let m = ids.len();
        if entries.len() != m * m {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for m={m}, got {}",
                m * m,
                entries.len()
            )));
        }
        for i in 0..m {
            if entries[i * m + i] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "nonzero diagonal at {i}: {}",
                    entries[i * m + i]
                )));
            }
            for j in 0..i {
                let (a, b) = (entries[i * m + j], entries[j * m + i]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::Numerical(format!("bad entry D[{i}][{j}] = {a}")));
                }
                if (a - b).abs() > 1e-12 {
                    return Err(Error::Numerical(format!(
                        "asymmetry at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            ids,
            entries,
            m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    /// Mean of row `i` (used by the embedding centering).
    pub fn row_mean(&self, i: usize) -> f64 {
        self.row(i).iter().sum::<f64>() / self.m as f64
    }
}

/// Precomputed per-model representation so each pair costs one pass over
/// `N*C` values with no transcendentals inside the class loop.
enum Prepared {
    /// sqrt(p), for Bhattacharyya / geodesic / Hellinger.
    Sqrt(Vec<f64>),
    /// (p, ln(max(p, EPS_P))) for symmetrized KL.
    LogP(Vec<f64>, Vec<f64>),
    /// raw p for squared Euclidean.
    Raw(Vec<f64>),
}

struct PairEngine {
    kind: DistanceKind,
    n: usize,
    c: usize,
    prepared: Vec<Prepared>,
}

impl PairEngine {
    fn new(models: &[PredictionTensor], kind: DistanceKind) -> Result<Self> {
        let first = &models[0];
        for m in models.iter().skip(1) {
            first.check_same_shape(m)?;
        }
        let prepared = models
            .iter()
            .map(|t| match kind {
                DistanceKind::Bhattacharyya | DistanceKind::Geodesic | DistanceKind::Hellinger => {
                    Prepared::Sqrt(t.probs().iter().map(|p| p.sqrt()).collect())
                }
                DistanceKind::SymmetricKL => Prepared::LogP(
                    t.probs().to_vec(),
                    t.probs().iter().map(|p| p.max(EPS_P).ln()).collect(),
                ),
                DistanceKind::SquaredEuclidean => Prepared::Raw(t.probs().to_vec()),
            })
            .collect();
        Ok(Self {
            kind,
            n: first.n_samples(),
            c: first.n_classes(),
            prepared,
        })
    }

    /// Fixed sample-major summation order keeps results identical across
    /// thread counts.
    fn pair(&self, i: usize, j: usize) -> f64 {
        let (n, c) = (self.n, self.c);
        match (&self.prepared[i], &self.prepared[j]) {
            (Prepared::Sqrt(a), Prepared::Sqrt(b)) => match self.kind {
                DistanceKind::Bhattacharyya => {
                    let mut s = 0;
                    let acc = chunked_log_sum(|| {
                        if s >= n {
                            return None;
                        }
                        let mut bc = 0.0;
                        for k in s * c..(s + 1) * c {
                            bc += a[k] * b[k];
                        }
                        s += 1;
                        Some(bc.max(EPS_P))
                    });
                    (-acc / n as f64).max(0.0)
                }
                DistanceKind::Geodesic => {
                    let mut acc = 0.0;
                    for s in 0..n {
                        let mut bc = 0.0;
                        for k in s * c..(s + 1) * c {
                            bc += a[k] * b[k];
                        }
                        acc += bc.clamp(-1.0, 1.0).acos();
                    }
                    acc / n as f64
                }
                _ => {
                    let mut prod = 1.0;
                    for s in 0..n {
                        let mut bc = 0.0;
                        for k in s * c..(s + 1) * c {
                            bc += a[k] * b[k];
                        }
                        prod *= bc.clamp(0.0, 1.0);
                    }
                    2.0 * (1.0 - prod)
                }
            },
            (Prepared::LogP(pa, la), Prepared::LogP(pb, lb)) => {
                let mut acc = 0.0;
                for k in 0..n * c {
                    acc += (pa[k] - pb[k]) * (la[k] - lb[k]);
                }
                (acc / n as f64).max(0.0)
            }
            (Prepared::Raw(pa), Prepared::Raw(pb)) => {
                let mut acc = 0.0;
                for k in 0..n * c {
                    let d = pa[k] - pb[k];
                    acc += d * d;
                }
                acc / n as f64
            }
            _ => unreachable!("prepared kinds are homogeneous"),
        }
    }
}

/// Computes the full pairwise matrix over `models`, in row blocks of size
/// `chunk`. When `cache_path` is given, finished blocks are spilled to a
/// DMX1 file and a partial file with a matching header is resumed instead
/// of recomputed. Entries are identical regardless of thread count.
pub fn pairwise_matrix(
    models: &[PredictionTensor],
    kind: DistanceKind,
    chunk: usize,
    cache_path: Option<&Path>,
) -> Result<DistanceMatrix> {
    if models.is_empty() {
        return Err(Error::EmptyInput("no models for pairwise matrix"));
    }
    if chunk == 0 {
        return Err(Error::InvalidArgument("chunk must be >= 1".into()));
    }
    let m = models.len();
    if m > MAX_IN_MEMORY_M {
        return Err(Error::InvalidArgument(format!(
            "m={m} exceeds the in-memory limit {MAX_IN_MEMORY_M}; compute via the on-disk cache in smaller corpora"
        )));
    }
    let ids: Vec<String> = models.iter().map(|t| t.model_id.clone()).collect();
    let engine = PairEngine::new(models, kind)?;

    let mut cache = match cache_path {
        Some(p) => Some(crate::format::DmxCache::open_or_create(p, kind, m)?),
        None => None,
    };
    let start_row = cache.as_ref().map_or(0, |c| c.rows_completed());

    let mut entries = vec![0.0f64; m * m];
    if let Some(c) = &mut cache {
        // Refill finished rows (upper triangle) from the cache.
        for i in 0..start_row {
            let row = c.read_row(i)?;
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                entries[i * m + j] = v;
                entries[j * m + i] = v;
            }
        }
    }

    let mut block_start = start_row;
    while block_start < m {
        let block_end = (block_start + chunk).min(m);
        // Each (i, j >= i) entry is computed by exactly one worker.
        let rows: Vec<(usize, Vec<f64>)> = (block_start..block_end)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0f64; m - i];
                for j in (i + 1)..m {
                    row[j - i] = engine.pair(i, j);
                }
                (i, row)
            })
            .collect();
        for (i, row) in &rows {
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                entries[i * m + j] = v;
                entries[j * m + i] = v;
            }
        }
        if let Some(cch) = &mut cache {
            for (i, row) in &rows {
                cch.append_row(*i, row)?;
            }
            cch.set_rows_completed(block_end)?;
        }
        block_start = block_end;
    }

    DistanceMatrix::new(kind, ids, entries)
}
