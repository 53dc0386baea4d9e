//! Isometric Minkowski embeddings of distance matrices (InPCA and
//! relatives), explained stress, out-of-sample projection, weighted and
//! train/test joint variants, progress-kernel averages and anchor-based
//! embeddings.
//!
//! The centered matrix `W = -LDL/2` is eigendecomposed and coordinates are
//! `X = U sqrt(|Lambda|)`. Negative eigenvalues give time-like axes that
//! subtract from squared distances; with the full spectrum the signed
//! pairwise norms reproduce `D` exactly.

mod align;
mod eigen;

pub use align::{align_embeddings, AlignmentResult};
pub use eigen::{DENSE_LIMIT, LANCZOS_TOL};

use crate::error::{Error, Result};
use crate::metrics::{self, DistanceKind, DistanceMatrix};
use crate::model::PredictionTensor;

/// Minkowski embedding of `m` models into `dims` coordinates.
#[derive(Debug, Clone)]
pub struct MinkowskiEmbedding {
    pub ids: Vec<String>,
    m: usize,
    dims: usize,
    /// Row-major `m x dims` coordinates.
    coords: Vec<f64>,
    /// Kept eigenvalues, sorted by descending magnitude.
    pub eigenvalues: Vec<f64>,
    /// +1 space-like / -1 time-like per kept dimension.
    pub signature: Vec<i8>,
    /// Row-major `m x dims` eigenvector matrix (mu-orthonormal basis).
    basis: Vec<f64>,
    /// Weighted row means of D and the weighted grand mean, retained for
    /// out-of-sample projection.
    row_means: Vec<f64>,
    grand_mean: f64,
    /// Multiplicity weights normalized to mean 1 (all ones for plain InPCA).
    weights: Vec<f64>,
    /// Frobenius energy of the centered matrix: the exact full-spectrum
    /// sum of squared eigenvalues, regardless of how many pairs were kept.
    total_spectral_energy: f64,
    pub source_kind: DistanceKind,
}

impl MinkowskiEmbedding {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }

    pub fn basis_column_entry(&self, u: usize, k: usize) -> f64 {
        self.basis[u * self.dims + k]
    }

    /// Signed squared Minkowski interval between embedded members.
    pub fn minkowski_sq(&self, i: usize, j: usize) -> f64 {
        minkowski_sq_between(self.coord(i), self.coord(j), &self.signature)
    }

    /// Explained stress of the top `d` dimensions:
    /// `1 - sqrt(sum_{k>d} lambda_k^2 / sum_k lambda_k^2)`.
    /// The denominator is exact: it uses the Frobenius identity rather than
    /// requiring every eigenpair.
    pub fn explained_stress(&self, d: usize) -> Result<f64> {
        if d == 0 || d > self.eigenvalues.len() {
            return Err(Error::InvalidArgument(format!(
                "d={d} outside 1..={}",
                self.eigenvalues.len()
            )));
        }
        if self.total_spectral_energy <= 0.0 {
            return Ok(1.0);
        }
        let head: f64 = self.eigenvalues[..d].iter().map(|l| l * l).sum();
        let tail = (self.total_spectral_energy - head).max(0.0);
        Ok(1.0 - (tail / self.total_spectral_energy).sqrt())
    }

    /// Projects a new model from its distances to the original members
    /// (Eq. 9's triangulation, with a sign factor on time-like axes so that
    /// re-projecting a member reproduces its own coordinates exactly).
    pub fn project_new(&self, new_distances: &[f64]) -> Result<Vec<f64>> {
        if new_distances.len() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "expected {} distances, got {}",
                self.m,
                new_distances.len()
            )));
        }
        let mu_hat: Vec<f64> = self.weights.iter().map(|w| w / self.m as f64).collect();
        let dbar: f64 = new_distances
            .iter()
            .zip(&mu_hat)
            .map(|(d, mu)| d * mu)
            .sum();
        let scale = self.eigenvalues.first().map_or(0.0, |l| l.abs());
        let mut out = vec![0.0f64; self.dims];
        for k in 0..self.dims {
            let lam = self.eigenvalues[k];
            if lam.abs() <= 1e-12 * scale.max(1e-300) {
                continue;
            }
            let mut acc = 0.0;
            for u in 0..self.m {
                let w_new = 0.5 * (-new_distances[u] + self.row_means[u] + dbar - self.grand_mean);
                acc += self.weights[u] * w_new * self.basis[u * self.dims + k];
            }
            out[k] = lam.signum() * acc / lam.abs().sqrt();
        }
        Ok(out)
    }
}

/// Signed squared interval under a +/-1 signature.
pub fn minkowski_sq_between(a: &[f64], b: &[f64], signature: &[i8]) -> f64 {
    a.iter()
        .zip(b)
        .zip(signature)
        .map(|((x, y), &s)| s as f64 * (x - y) * (x - y))
        .sum()
}

/// InPCA embedding of a pairwise intensive distance matrix.
pub fn inpca(d: &DistanceMatrix, dims: usize) -> Result<MinkowskiEmbedding> {
    weighted_inpca(d, &vec![1.0; d.m()], dims)
}

/// Weighted InPCA: multiplicities shift the centroid and emphasize models
/// exactly as if each row of `D` had been repeated that many times before a
/// plain InPCA. Uniform multiplicities reduce to [`inpca`] exactly.
///
/// The non-symmetric eigenproblem of the weighted centered matrix is solved
/// through the similarity-transformed symmetric problem
/// `diag(sqrt(nu)) W diag(sqrt(nu))`, which has the same spectrum.
pub fn weighted_inpca(
    d: &DistanceMatrix,
    multiplicities: &[f64],
    dims: usize,
) -> Result<MinkowskiEmbedding> {
    let m = d.m();
    if multiplicities.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} multiplicities for m={m}",
            multiplicities.len()
        )));
    }
    for &w in multiplicities {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "multiplicities must be positive reals, got {w}"
            )));
        }
    }
    if dims < 1 || dims > m {
        return Err(Error::InvalidArgument(format!("dims={dims} outside 1..={m}")));
    }
    let total: f64 = multiplicities.iter().sum();
    // Normalized to mean 1 so the uniform case is numerically identical to
    // plain InPCA (eigenvalue scale included).
    let nu: Vec<f64> = multiplicities
        .iter()
        .map(|w| w * m as f64 / total)
        .collect();
    let mu_hat: Vec<f64> = nu.iter().map(|v| v / m as f64).collect();

    // Weighted centering.
    let mut row_means = vec![0.0f64; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += mu_hat[j] * d.get(i, j);
        }
        row_means[i] = acc;
    }
    let grand_mean: f64 = (0..m).map(|i| mu_hat[i] * row_means[i]).sum();

    let sqrt_nu: Vec<f64> = nu.iter().map(|v| v.sqrt()).collect();
    let mut s = vec![0.0f64; m * m];
    let mut fro = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let w = -0.5 * (d.get(i, j) - row_means[i] - row_means[j] + grand_mean);
            let v = sqrt_nu[i] * w * sqrt_nu[j];
            s[i * m + j] = v;
            fro += v * v;
        }
    }
    // Symmetrize away rounding asymmetry before the eigensolver.
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (s[i * m + j] + s[j * m + i]);
            s[i * m + j] = v;
            s[j * m + i] = v;
        }
    }

    let pairs = if m <= DENSE_LIMIT {
        eigen::dense_symmetric(&s, m, dims)?
    } else {
        let scale = fro.sqrt();
        let matvec = move |v: &[f64], out: &mut [f64]| {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| {
                let row = &s[i * m..(i + 1) * m];
                *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
            });
        };
        eigen::lanczos_extreme(&matvec, m, dims + 8, scale)?
    };

    let kept = dims.min(pairs.values.len());
    let mut eigenvalues = Vec::with_capacity(kept);
    let mut signature = Vec::with_capacity(kept);
    let mut basis = vec![0.0f64; m * kept];
    let mut coords = vec![0.0f64; m * kept];
    for k in 0..kept {
        let lam = pairs.values[k];
        eigenvalues.push(lam);
        signature.push(if lam >= 0.0 { 1 } else { -1 });
        let z = pairs.vector(k);
        // Scale back: y = z / sqrt(nu) is nu-orthonormal.
        let sq = lam.abs().sqrt();
        for u in 0..m {
            let y = z[u] / sqrt_nu[u];
            basis[u * kept + k] = y;
            coords[u * kept + k] = y * sq;
        }
    }

    Ok(MinkowskiEmbedding {
        ids: d.ids.clone(),
        m,
        dims: kept,
        coords,
        eigenvalues,
        signature,
        basis,
        row_means,
        grand_mean,
        weights: nu,
        total_spectral_energy: fro,
        source_kind: d.kind,
    })
}

/// Explained pairwise distances of a coordinate set against the original
/// matrix: `1 - sum_ij |D_ij - |X_i - X_j|^2| / sum_ij D_ij` with the signed
/// Minkowski norm.
pub fn explained_pairwise_distances(
    d: &DistanceMatrix,
    coords: &[f64],
    dims: usize,
    signature: &[i8],
) -> Result<f64> {
    let m = d.m();
    if coords.len() != m * dims || signature.len() < dims {
        return Err(Error::ShapeMismatch(format!(
            "coords {}x{dims} with {} signature entries for m={m}",
            coords.len() / dims.max(1),
            signature.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let x = minkowski_sq_between(
                &coords[i * dims..(i + 1) * dims],
                &coords[j * dims..(j + 1) * dims],
                &signature[..dims],
            );
            num += (d.get(i, j) - x).abs();
            den += d.get(i, j);
        }
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - num / den)
}

/// Embeds train models by InPCA and places each index-aligned test model in
/// the same coordinates by mixing test-test distances with train-derived
/// means. With `test == train` this reduces to member self-projection and
/// reproduces the train coordinates.
pub fn joint_train_test_embed(
    train: &[PredictionTensor],
    test: &[PredictionTensor],
    kind: DistanceKind,
    dims: usize,
) -> Result<(MinkowskiEmbedding, Vec<f64>)> {
    if train.len() != test.len() {
        return Err(Error::ShapeMismatch(format!(
            "train/test counts differ: {} vs {}",
            train.len(),
            test.len()
        )));
    }
    let d_train = metrics::pairwise_matrix(train, kind, 256, None)?;
    let emb = inpca(&d_train, dims)?;
    let d_test = metrics::pairwise_matrix(test, kind, 256, None)?;
    let m = train.len();
    let mut coords = vec![0.0f64; m * emb.dims()];
    for w in 0..m {
        // Test-test distances in the first term, train means in the rest.
        let x = project_mixed(&emb, d_test.row(w))?;
        coords[w * emb.dims()..(w + 1) * emb.dims()].copy_from_slice(&x);
    }
    Ok((emb, coords))
}

/// Eq. 9-style projection where the new distance vector may come from a
/// different sample space (the train/test trick): identical arithmetic to
/// `project_new`, exposed for the joint embedding.
fn project_mixed(emb: &MinkowskiEmbedding, distances: &[f64]) -> Result<Vec<f64>> {
    emb.project_new(distances)
}

/// Gaussian-progress-weighted average of models (Eq. of the progress
/// kernel): weights `exp(-(s_i - s)^2 / (2 sigma^2))`, normalized.
pub fn progress_kernel_average(
    models: &[(PredictionTensor, f64)],
    s: f64,
    sigma: f64,
) -> Result<PredictionTensor> {
    if models.is_empty() {
        return Err(Error::EmptyInput("no models to average"));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let first = &models[0].0;
    for (t, _) in models.iter().skip(1) {
        first.check_same_shape(t)?;
    }
    // Softmax trick keeps the weights finite for far-away progress values.
    let exponents: Vec<f64> = models
        .iter()
        .map(|(_, sp)| -((sp - s) * (sp - s)) / (2.0 * sigma * sigma))
        .collect();
    let max_e = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max_e).exp()).collect();
    let z: f64 = weights.iter().sum();
    let (n, c) = (first.n_samples(), first.n_classes());
    let mut acc = vec![0.0f64; n * c];
    for ((t, _), w) in models.iter().zip(&weights) {
        for (a, &p) in acc.iter_mut().zip(t.probs()) {
            *a += w * p;
        }
    }
    for a in acc.iter_mut() {
        *a /= z;
    }
    PredictionTensor::new(n, c, acc, format!("kernel@{s}"))
}

/// Builds a small InPCA from four anchor models (canonically ignorance,
/// truth and two progress-kernel averages) and projects every model into it.
/// Returns the anchor embedding and the row-major `len x 3` coordinates.
pub fn basis_embedding(
    anchors: &[PredictionTensor; 4],
    all_models: &[PredictionTensor],
    kind: DistanceKind,
) -> Result<(MinkowskiEmbedding, Vec<f64>)> {
    let d4 = metrics::pairwise_matrix(anchors.as_slice(), kind, 4, None)?;
    for i in 0..4 {
        for j in 0..i {
            if d4.get(i, j) < 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "degenerate anchors: {i} and {j} coincide"
                )));
            }
        }
    }
    // Four points span at most three non-trivial dimensions.
    let emb = inpca(&d4, 3)?;
    let mut coords = vec![0.0f64; all_models.len() * emb.dims()];
    for (r, model) in all_models.iter().enumerate() {
        let mut dist = vec![0.0f64; 4];
        for (j, anchor) in anchors.iter().enumerate() {
            dist[j] = metrics::distance(model, anchor, kind)?;
        }
        let x = emb.project_new(&dist)?;
        coords[r * emb.dims()..(r + 1) * emb.dims()].copy_from_slice(&x);
    }
    Ok((emb, coords))
}
