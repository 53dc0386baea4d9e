//! Rigid alignment of two embeddings (translation + orthogonal map,
//! reflections allowed, no scaling), minimizing the root-mean-square
//! deviation of corresponding points.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Result of aligning point set `b` onto point set `a`.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Row-major `dims x dims` orthogonal matrix (may include sign flips).
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
    pub rmsd: f64,
    pub dims: usize,
}

impl AlignmentResult {
    /// Applies the fitted transform to a point.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dims;
        (0..d)
            .map(|i| {
                let mut acc = self.translation[i];
                for j in 0..d {
                    acc += self.rotation[i * d + j] * p[j];
                }
                acc
            })
            .collect()
    }
}

/// Orthogonal Procrustes: finds the translation and orthogonal matrix (with
/// sign flips) mapping `b` onto `a`. Both are `m x dims` row-major.
pub fn align_embeddings(a: &[f64], b: &[f64], m: usize, dims: usize) -> Result<AlignmentResult> {
    if a.len() != m * dims || b.len() != m * dims {
        return Err(Error::ShapeMismatch(format!(
            "expected {m}x{dims} coordinate blocks, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if m == 0 {
        return Err(Error::EmptyInput("no points to align"));
    }
    let mean = |x: &[f64]| -> Vec<f64> {
        let mut mu = vec![0.0f64; dims];
        for row in x.chunks(dims) {
            for (m, v) in mu.iter_mut().zip(row) {
                *m += v;
            }
        }
        for v in mu.iter_mut() {
            *v /= m as f64;
        }
        mu
    };
    let ma = mean(a);
    let mb = mean(b);

    // Cross-covariance of centered sets: M = Bc^T Ac.
    let mut cross: DMatrix<f64> = DMatrix::zeros(dims, dims);
    for i in 0..m {
        for r in 0..dims {
            for c in 0..dims {
                cross[(r, c)] +=
                    (b[i * dims + r] - mb[r]) * (a[i * dims + c] - ma[c]);
            }
        }
    }
    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    // R = V U^T maximizes the trace over the full orthogonal group.
    let r: DMatrix<f64> = vt.transpose() * u.transpose();

    let mut rotation = vec![0.0f64; dims * dims];
    for i in 0..dims {
        for j in 0..dims {
            rotation[i * dims + j] = r[(i, j)];
        }
    }
    let mut translation = vec![0.0f64; dims];
    for i in 0..dims {
        let mut acc = ma[i];
        for j in 0..dims {
            acc -= r[(i, j)] * mb[j];
        }
        translation[i] = acc;
    }
    let result = AlignmentResult {
        rotation,
        translation,
        rmsd: 0.0,
        dims,
    };
    let mut sq = 0.0;
    for i in 0..m {
        let t = result.apply(&b[i * dims..(i + 1) * dims]);
        for (x, y) in t.iter().zip(&a[i * dims..(i + 1) * dims]) {
            sq += (x - y) * (x - y);
        }
    }
    Ok(AlignmentResult {
        rmsd: (sq / m as f64).sqrt(),
        ..result
    })
}
