//! Centroids of sets of probabilistic models under different divergences,
//! and ensemble evaluation by error, distance to truth and progress.
//!
//! Each centroid kind aggregates per sample and per class, then
//! renormalizes onto the simplex:
//!
//! | kind            | divergence                         | centroid            |
//! |-----------------|------------------------------------|---------------------|
//! | Arithmetic      | squared Euclidean                  | mean p              |
//! | SqrtArithmetic  | squared Hellinger                  | (mean sqrt p)^2     |
//! | Geometric       | reverse KL                         | geometric mean      |
//! | Harmonic        | Pearson chi-square                 | harmonic mean       |
//! | Bhattacharyya   | Bhattacharyya distance             | fixed point         |
//! | Jeffreys        | symmetrized KL                     | AM / W(e AM / GM)   |
//!
//! The first four renormalized means are the exact simplex minimizers of
//! their divergences; the Jeffreys solution needs a scalar Lagrange shift
//! inside the Lambert W to stay exact on the simplex.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry;
use crate::metrics::{self, EPS_P};
use crate::model::{ignorance, truth, LabelVector, PredictionTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidKind {
    Arithmetic,
    SqrtArithmetic,
    Geometric,
    Harmonic,
    Bhattacharyya,
    Jeffreys,
}

impl CentroidKind {
    pub const ALL: [CentroidKind; 6] = [
        CentroidKind::Arithmetic,
        CentroidKind::SqrtArithmetic,
        CentroidKind::Geometric,
        CentroidKind::Harmonic,
        CentroidKind::Bhattacharyya,
        CentroidKind::Jeffreys,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CentroidKind::Arithmetic => "arithmetic",
            CentroidKind::SqrtArithmetic => "sqrt_arithmetic",
            CentroidKind::Geometric => "geometric",
            CentroidKind::Harmonic => "harmonic",
            CentroidKind::Bhattacharyya => "bhattacharyya",
            CentroidKind::Jeffreys => "jeffreys",
        }
    }
}

/// Principal branch of the Lambert W function on `[0, inf)` via Halley
/// iteration, tolerance 1e-12.
pub fn lambert_w0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut w = (1.0 + x).ln();
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        // Halley step.
        let denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-12 * w.abs().max(1e-12) {
            break;
        }
    }
    w
}

fn check_group(models: &[PredictionTensor]) -> Result<(usize, usize)> {
    let first = models.first().ok_or(Error::EmptyInput("no models"))?;
    for m in models.iter().skip(1) {
        first.check_same_shape(m)?;
    }
    Ok((first.n_samples(), first.n_classes()))
}

/// Centroid of a group under the given kind. Rows are renormalized onto the
/// simplex; the Bhattacharyya kind iterates its fixed point to 1e-12 in L1
/// per row (at most 1000 iterations), Jeffreys solves the Lagrange-shifted
/// Lambert-W form exactly.
pub fn centroid(models: &[PredictionTensor], kind: CentroidKind) -> Result<PredictionTensor> {
    let (n, c) = check_group(models)?;
    let m = models.len() as f64;
    let mut out = vec![0.0f64; n * c];
    for s in 0..n {
        let rows: Vec<&[f64]> = models.iter().map(|t| t.row(s)).collect();
        let dst = &mut out[s * c..(s + 1) * c];
        match kind {
            CentroidKind::Arithmetic => {
                for (y, slot) in dst.iter_mut().enumerate() {
                    *slot = rows.iter().map(|r| r[y]).sum::<f64>() / m;
                }
            }
            CentroidKind::SqrtArithmetic => {
                for (y, slot) in dst.iter_mut().enumerate() {
                    let s: f64 = rows.iter().map(|r| r[y].sqrt()).sum::<f64>() / m;
                    *slot = s * s;
                }
            }
            CentroidKind::Geometric => {
                for (y, slot) in dst.iter_mut().enumerate() {
                    let lg: f64 = rows.iter().map(|r| r[y].max(EPS_P).ln()).sum::<f64>() / m;
                    *slot = lg.exp();
                }
            }
            CentroidKind::Harmonic => {
                for (y, slot) in dst.iter_mut().enumerate() {
                    let inv: f64 = rows.iter().map(|r| 1.0 / r[y].max(EPS_P)).sum();
                    *slot = m / inv;
                }
            }
            CentroidKind::Bhattacharyya => bhattacharyya_row(&rows, dst),
            CentroidKind::Jeffreys => jeffreys_row(&rows, dst),
        }
        let sum: f64 = dst.iter().sum();
        for p in dst.iter_mut() {
            *p /= sum;
        }
    }
    PredictionTensor::new(n, c, out, format!("centroid:{}", kind.name()))
}

/// Fixed point of the first-order optimality condition of the mean
/// Bhattacharyya distance: `c_y <- (sum_i sqrt(p_iy) / BC_i(c))^2`,
/// renormalized, starting from uniform.
fn bhattacharyya_row(rows: &[&[f64]], dst: &mut [f64]) {
    let c = dst.len();
    let mut cur = vec![1.0 / c as f64; c];
    let mut next = vec![0.0f64; c];
    for _ in 0..1000 {
        for slot in next.iter_mut() {
            *slot = 0.0;
        }
        for row in rows {
            let bc: f64 = row
                .iter()
                .zip(&cur)
                .map(|(p, q)| (p * q).sqrt())
                .sum::<f64>()
                .max(EPS_P);
            for (slot, p) in next.iter_mut().zip(row.iter()) {
                *slot += p.sqrt() / bc;
            }
        }
        let mut norm = 0.0;
        for slot in next.iter_mut() {
            *slot = *slot * *slot;
            norm += *slot;
        }
        let mut delta = 0.0;
        for (nc, oc) in next.iter_mut().zip(cur.iter_mut()) {
            *nc /= norm;
            delta += (*nc - *oc).abs();
            *oc = *nc;
        }
        if delta <= 1e-12 {
            break;
        }
    }
    dst.copy_from_slice(&cur);
}

/// Exact simplex Jeffreys centroid: `c_y = a_y / W(e^(1-lambda) a_y / g_y)`
/// with the scalar `lambda` solved so the row sums to one. The sum is
/// monotone increasing in `lambda`, so bisection is safe.
fn jeffreys_row(rows: &[&[f64]], dst: &mut [f64]) {
    let c = dst.len();
    let m = rows.len() as f64;
    let mut a = vec![0.0f64; c];
    let mut g = vec![0.0f64; c];
    for y in 0..c {
        // Clamp below so an all-zero class degrades to ~EPS_P instead of
        // the indeterminate 0 / W(0).
        a[y] = (rows.iter().map(|r| r[y]).sum::<f64>() / m).max(EPS_P);
        g[y] = (rows.iter().map(|r| r[y].max(EPS_P).ln()).sum::<f64>() / m).exp();
    }
    let sum_at = |lam: f64| -> f64 {
        (0..c)
            .map(|y| a[y] / lambert_w0((1.0 - lam).exp() * a[y] / g[y].max(EPS_P)))
            .sum()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while sum_at(lo) > 1.0 {
        lo *= 2.0;
    }
    while sum_at(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let lam = 0.5 * (lo + hi);
    for y in 0..c {
        dst[y] = a[y] / lambert_w0((1.0 - lam).exp() * a[y] / g[y].max(EPS_P));
    }
}

/// Mean of the kind's defining divergence from each member to `candidate`,
/// per-sample averaged.
pub fn centroid_objective(
    models: &[PredictionTensor],
    candidate: &PredictionTensor,
    kind: CentroidKind,
) -> Result<f64> {
    let (n, _) = check_group(models)?;
    models[0].check_same_shape(candidate)?;
    let mut acc = 0.0;
    for t in models {
        acc += match kind {
            CentroidKind::Arithmetic => metrics::squared_euclidean(t, candidate)?,
            CentroidKind::SqrtArithmetic => {
                let mut d = 0.0;
                for (p, q) in t.probs().iter().zip(candidate.probs()) {
                    let diff = p.sqrt() - q.sqrt();
                    d += diff * diff;
                }
                d / n as f64
            }
            CentroidKind::Geometric => {
                // Reverse KL: sum q log(q/p).
                let mut d = 0.0;
                for (p, q) in t.probs().iter().zip(candidate.probs()) {
                    if *q > 0.0 {
                        d += q * (q.max(EPS_P).ln() - p.max(EPS_P).ln());
                    }
                }
                d / n as f64
            }
            CentroidKind::Harmonic => {
                // Pearson chi-square of the candidate against the member.
                let mut d = 0.0;
                for (p, q) in t.probs().iter().zip(candidate.probs()) {
                    let diff = q - p;
                    d += diff * diff / p.max(EPS_P);
                }
                d / n as f64
            }
            CentroidKind::Bhattacharyya => metrics::bhattacharyya(t, candidate)?,
            CentroidKind::Jeffreys => metrics::symmetric_kl(t, candidate)?,
        };
    }
    Ok(acc / models.len() as f64)
}

/// One row of [`ensemble_report`].
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleRow {
    pub kind: CentroidKind,
    pub error: f64,
    pub d_b_to_truth: f64,
    pub progress: f64,
}

/// Evaluates every centroid kind of a model group against the truth:
/// error rate, Bhattacharyya distance to truth, and progress of the
/// centroid along the ignorance-truth geodesic.
pub fn ensemble_report(
    group: &[PredictionTensor],
    truth_labels: &LabelVector,
) -> Result<Vec<EnsembleRow>> {
    let (n, c) = check_group(group)?;
    if truth_labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "labels len {} vs N={n}",
            truth_labels.len()
        )));
    }
    let p0 = ignorance(n, c);
    let ps = truth(truth_labels, c)?;
    let reference = geometry::Geodesic::new(&p0, &ps)?;
    let mut out = Vec::with_capacity(CentroidKind::ALL.len());
    for kind in CentroidKind::ALL {
        let center = centroid(group, kind)?;
        out.push(EnsembleRow {
            kind,
            error: center.error_rate(truth_labels)?,
            d_b_to_truth: metrics::bhattacharyya(&center, &ps)?,
            progress: geometry::progress_on(&center, &reference)?,
        });
    }
    Ok(out)
}
