//! Symmetric eigensolvers behind the embeddings: a dense path for moderate
//! sizes and a Lanczos path that retrieves extreme eigenpairs from both ends
//! of the spectrum, which is what largest-|eigenvalue| selection needs when
//! eigenvalues can be negative.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrices up to this order use the dense solver; larger ones go through
/// Lanczos.
pub const DENSE_LIMIT: usize = 4096;

/// Residual tolerance (relative to the matrix scale) for iterative pairs.
pub const LANCZOS_TOL: f64 = 1e-9;

/// Eigenpairs sorted by descending |eigenvalue|, ties by descending value.
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column-major: vector `k` occupies `vectors[k * m..(k + 1) * m]`.
    pub vectors: Vec<f64>,
    pub m: usize,
}

impl EigenPairs {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.m..(k + 1) * self.m]
    }
}

fn sort_pairs(mut pairs: Vec<(f64, Vec<f64>)>, keep: usize, m: usize) -> EigenPairs {
    pairs.sort_by(|a, b| {
        b.0.abs()
            .total_cmp(&a.0.abs())
            .then(b.0.total_cmp(&a.0))
    });
    pairs.truncate(keep);
    let mut values = Vec::with_capacity(pairs.len());
    let mut vectors = Vec::with_capacity(pairs.len() * m);
    for (v, vec) in pairs {
        values.push(v);
        vectors.extend_from_slice(&vec);
    }
    EigenPairs { values, vectors, m }
}

/// Fixes eigenvector signs deterministically: the entry of largest absolute
/// value is made positive.
pub fn fix_signs(pairs: &mut EigenPairs) {
    let m = pairs.m;
    for k in 0..pairs.values.len() {
        let col = &mut pairs.vectors[k * m..(k + 1) * m];
        let mut best = 0usize;
        for (i, &v) in col.iter().enumerate().skip(1) {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Full dense symmetric eigendecomposition, keeping the `keep` pairs of
/// largest magnitude.
pub fn dense_symmetric(w: &[f64], m: usize, keep: usize) -> Result<EigenPairs> {
    let mat = DMatrix::from_row_slice(m, m, w);
    let eig = mat.symmetric_eigen();
    let pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|k| {
            (
                eig.eigenvalues[k],
                eig.eigenvectors.column(k).iter().copied().collect(),
            )
        })
        .collect();
    let mut out = sort_pairs(pairs, keep, m);
    fix_signs(&mut out);
    Ok(out)
}

/// Lanczos with full reorthogonalization. Extreme Ritz pairs converge first
/// at both spectrum ends, so the `keep` largest-magnitude pairs are reliable
/// once their residuals pass the tolerance.
pub fn lanczos_extreme(
    matvec: &dyn Fn(&[f64], &mut [f64]),
    m: usize,
    keep: usize,
    scale: f64,
) -> Result<EigenPairs> {
    use rand::{Rng, SeedableRng};
    let keep = keep.min(m);
    let mut subspace = (4 * keep + 40).min(m);
    loop {
        // Deterministic start vector; the all-ones direction is often in the
        // nullspace of centered matrices, so use a seeded random unit vector.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
        normalize(&mut v);

        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut wbuf = vec![0.0f64; m];
        let mut exhausted = false;

        for j in 0..subspace {
            matvec(&basis[j], &mut wbuf);
            let alpha = dot(&basis[j], &wbuf);
            alphas.push(alpha);
            for (wi, bi) in wbuf.iter_mut().zip(&basis[j]) {
                *wi -= alpha * bi;
            }
            if j > 0 {
                let beta_prev = betas[j - 1];
                for (wi, bi) in wbuf.iter_mut().zip(&basis[j - 1]) {
                    *wi -= beta_prev * bi;
                }
            }
            // Full reorthogonalization, twice for stability.
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(b, &wbuf);
                    for (wi, bi) in wbuf.iter_mut().zip(b) {
                        *wi -= proj * bi;
                    }
                }
            }
            let beta = norm(&wbuf);
            if beta < 1e-13 * scale.max(1.0) || j + 1 == subspace || basis.len() == m {
                if beta < 1e-13 * scale.max(1.0) {
                    exhausted = true;
                }
                break;
            }
            betas.push(beta);
            let next: Vec<f64> = wbuf.iter().map(|&x| x / beta).collect();
            basis.push(next);
        }

        let k = alphas.len();
        // Ritz pairs from the tridiagonal projection.
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = t.symmetric_eigen();
        let beta_last = if k < m && !exhausted {
            norm(&wbuf)
        } else {
            0.0
        };

        let mut ritz: Vec<(f64, f64, DVector<f64>)> = (0..k)
            .map(|i| {
                let y = eig.eigenvectors.column(i).into_owned();
                let residual = (beta_last * y[k - 1]).abs();
                (eig.eigenvalues[i], residual, y)
            })
            .collect();
        ritz.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(b.0.total_cmp(&a.0)));

        let wanted = keep.min(k);
        let ok = ritz
            .iter()
            .take(wanted)
            .all(|(_, r, _)| *r <= LANCZOS_TOL * scale.max(1e-30));
        if ok || exhausted || subspace >= m {
            let pairs: Vec<(f64, Vec<f64>)> = ritz
                .into_iter()
                .take(wanted)
                .map(|(val, _, y)| {
                    let mut v = vec![0.0f64; m];
                    for (j, b) in basis.iter().enumerate() {
                        let c = y[j];
                        for (vi, bi) in v.iter_mut().zip(b) {
                            *vi += c * bi;
                        }
                    }
                    normalize(&mut v);
                    (val, v)
                })
                .collect();
            let mut out = sort_pairs(pairs, keep, m);
            fix_signs(&mut out);
            return Ok(out);
        }
        if subspace == m {
            return Err(Error::Numerical(
                "Lanczos failed to converge at full subspace".into(),
            ));
        }
        subspace = (subspace * 2).min(m);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
}
