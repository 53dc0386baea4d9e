//! Corpus-level analyses: training statistics, explained stress over all
//! checkpoints, progress/error regression, per-configuration ensembles,
//! trajectory clustering, and the corner-convergence check. Both the CLI
//! `report` command and the acceptance suite run through these.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::centroids::{self, CentroidKind};
use crate::cluster::{self, Dendrogram, Linkage};
use crate::corpus::{Corpus, CorpusSlice, Split};
use crate::embedding;
use crate::error::{Error, Result};
use crate::geometry::Geodesic;
use crate::metrics::{self, DistanceKind};
use crate::model::{ignorance, truth, PredictionTensor, Trajectory};
use crate::trajectory::{self, ResampledTrajectory};

/// Train-error threshold used in the corpus statistics.
pub const LOW_ERROR: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct TrainingStats {
    pub n_runs: usize,
    pub n_diverged: usize,
    pub frac_low_train_error: f64,
    pub median_final_train_error: f64,
}

/// Stats over the "main"-stage runs of one slice.
pub fn training_stats(corpus: &Corpus, slice_dir: &str) -> TrainingStats {
    let mut errors: Vec<f64> = Vec::new();
    let mut diverged = 0usize;
    for (key, run) in &corpus.info.runs {
        if !key.starts_with(&format!("{slice_dir}/")) || run.stage != "main" {
            continue;
        }
        errors.push(run.final_train_error);
        if run.diverged {
            diverged += 1;
        }
    }
    let n = errors.len();
    let low = errors.iter().filter(|&&e| e <= LOW_ERROR).count();
    errors.sort_by(|a, b| a.total_cmp(b));
    TrainingStats {
        n_runs: n,
        n_diverged: diverged,
        frac_low_train_error: if n == 0 { 0.0 } else { low as f64 / n as f64 },
        median_final_train_error: if n == 0 {
            f64::NAN
        } else {
            errors[n / 2]
        },
    }
}

/// Everything computed from one slice's train-split trajectories in a
/// single pass (they are expensive to load and index).
#[derive(Debug, Clone, Serialize)]
pub struct SliceAnalysis {
    pub dir: String,
    pub sloppiness: f64,
    pub n_models: usize,
    /// Explained stress of the all-checkpoint InPCA at selected dims.
    pub explained_stress: BTreeMap<usize, f64>,
    pub top_eigenvalues: Vec<f64>,
    pub progress_error_r2: f64,
    pub progress_db_r2: f64,
    pub dendrogram: Dendrogram,
}

/// The usual reporting dims for explained stress.
pub const STRESS_DIMS: [usize; 5] = [1, 3, 10, 25, 50];

/// Squared Pearson correlation.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Progress-indexes every train trajectory of a slice against its
/// ignorance-truth geodesic and runs the full analysis bundle: InPCA stress
/// over all checkpoints, progress/error and progress/distance regressions,
/// and the seed-averaged trajectory dendrogram.
pub fn analyze_slice(
    slice: &CorpusSlice,
    grid_points: usize,
    linkage: Linkage,
) -> Result<SliceAnalysis> {
    let labels = slice.label_vector(Split::Train)?;
    let runs = slice.load_all(Split::Train)?;
    let first = runs
        .first()
        .ok_or(Error::EmptyInput("slice has no runs"))?;
    let (n, c) = (first.1.n_samples(), first.1.n_classes());
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c)?;
    let reference = Geodesic::new(&p0, &ps)?;

    // Index by progress once; reused by the regression and the resampling.
    let mut indexed: Vec<Trajectory> = Vec::with_capacity(runs.len());
    for (_, t) in &runs {
        indexed.push(trajectory::index_by_progress(t, &reference)?);
    }
    drop(runs);

    // Progress/error and progress/d_B regressions over all checkpoints.
    let mut progress = Vec::new();
    let mut errors = Vec::new();
    let mut dbs = Vec::new();
    for t in &indexed {
        for ck in &t.checkpoints {
            progress.push(ck.progress.unwrap());
            errors.push(ck.tensor.error_rate(&labels)?);
            dbs.push(metrics::bhattacharyya(&ck.tensor, &ps)?);
        }
    }
    let progress_error_r2 = r_squared(&progress, &errors);
    let progress_db_r2 = r_squared(&progress, &dbs);

    // All-checkpoint InPCA.
    let models: Vec<PredictionTensor> = indexed
        .iter()
        .flat_map(|t| t.checkpoints.iter().map(|ck| ck.tensor.clone()))
        .collect();
    let n_models = models.len();
    let dmx = metrics::pairwise_matrix(&models, DistanceKind::Bhattacharyya, 256, None)?;
    drop(models);
    let dims = STRESS_DIMS
        .iter()
        .copied()
        .max()
        .unwrap()
        .min(dmx.m());
    let emb = embedding::inpca(&dmx, dims)?;
    let mut explained_stress = BTreeMap::new();
    for d in STRESS_DIMS {
        if d <= emb.dims() {
            explained_stress.insert(d, emb.explained_stress(d)?);
        }
    }
    let top_eigenvalues = emb.eigenvalues.iter().take(10).copied().collect();
    drop(dmx);

    // Seed-averaged trajectory distances and the dendrogram.
    let resampled: Vec<ResampledTrajectory> = indexed
        .iter()
        .map(|t| trajectory::resample(t, grid_points))
        .collect::<Result<_>>()?;
    let tdm = trajectory::trajectory_distance_matrix(&resampled, DistanceKind::Bhattacharyya)?;
    let keys: Vec<String> = resampled
        .iter()
        .map(|t| t.config.group_key())
        .collect();
    let averaged = trajectory::average_over_seeds(&tdm, &keys)?;
    let dendrogram = cluster::hierarchical_cluster(&averaged, linkage)?;

    Ok(SliceAnalysis {
        dir: slice
            .dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sloppiness: slice.sloppiness,
        n_models,
        explained_stress,
        top_eigenvalues,
        progress_error_r2,
        progress_db_r2,
        dendrogram,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupEnsemble {
    pub group_key: String,
    pub n_members: usize,
    /// Test error per centroid kind.
    pub test_error: BTreeMap<String, f64>,
}

/// Final-checkpoint test-split ensembles per configuration group (seeds are
/// the members).
pub fn slice_ensembles(slice: &CorpusSlice) -> Result<Vec<GroupEnsemble>> {
    let labels = slice.label_vector(Split::Test)?;
    let mut groups: BTreeMap<String, Vec<PredictionTensor>> = BTreeMap::new();
    for file in slice.manifest.keys() {
        let t = slice.load_run(file, Split::Test)?;
        let key = t.config.group_key();
        let last = t
            .checkpoints
            .into_iter()
            .last()
            .ok_or(Error::EmptyInput("empty trajectory"))?;
        groups.entry(key).or_default().push(last.tensor);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (group_key, members) in groups {
        let mut test_error = BTreeMap::new();
        for kind in CentroidKind::ALL {
            let center = centroids::centroid(&members, kind)?;
            test_error.insert(kind.name().to_string(), center.error_rate(&labels)?);
        }
        out.push(GroupEnsemble {
            group_key,
            n_members: members.len(),
            test_error,
        });
    }
    Ok(out)
}

/// Fraction of groups where the harmonic-mean ensemble's test error is at
/// most the arithmetic-mean ensemble's.
pub fn hm_le_am_fraction(ensembles: &[GroupEnsemble]) -> f64 {
    if ensembles.is_empty() {
        return 0.0;
    }
    let good = ensembles
        .iter()
        .filter(|g| g.test_error["harmonic"] <= g.test_error["arithmetic"])
        .count();
    good as f64 / ensembles.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerRunReport {
    pub file: String,
    pub start_db_to_ignorance: f64,
    pub min_db_to_ignorance: f64,
    pub approaches_ignorance: bool,
}

/// For each stage-2 trajectory: does the path come strictly closer to
/// ignorance than its starting point (the stage-1 endpoint)?
pub fn corner_convergence(corpus: &Corpus) -> Result<Vec<CornerRunReport>> {
    let mut out = Vec::new();
    for slice in &corpus.slices {
        let stage2: Vec<String> = corpus
            .info
            .runs
            .iter()
            .filter(|(k, r)| {
                r.stage == "stage2"
                    && k.starts_with(
                        &slice
                            .dir
                            .file_name()
                            .map(|s| format!("{}/", s.to_string_lossy()))
                            .unwrap_or_default(),
                    )
            })
            .map(|(k, _)| k.split('/').next_back().unwrap().to_string())
            .collect();
        for file in stage2 {
            let t = slice.load_run(&file, Split::Train)?;
            let p0 = ignorance(t.n_samples(), t.n_classes());
            let start = metrics::bhattacharyya(&t.checkpoints[0].tensor, &p0)?;
            let min = t
                .checkpoints
                .iter()
                .map(|ck| metrics::bhattacharyya(&ck.tensor, &p0))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            out.push(CornerRunReport {
                file,
                start_db_to_ignorance: start,
                min_db_to_ignorance: min,
                approaches_ignorance: min < start,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub training: TrainingStats,
    pub analysis: SliceAnalysis,
    pub ensembles: Vec<GroupEnsemble>,
    pub hm_le_am_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub corpus: String,
    pub tool_version: String,
    pub slices: Vec<SliceReport>,
    pub corner_runs: Vec<CornerRunReport>,
    pub corner_fraction_approaching: Option<f64>,
    pub wall_time_seconds: f64,
}

/// Runs the whole analysis bundle over a corpus.
pub fn full_report(corpus: &Corpus, grid_points: usize, linkage: Linkage) -> Result<CorpusReport> {
    let t0 = std::time::Instant::now();
    let mut slices = Vec::new();
    let has_main = corpus.info.runs.values().any(|r| r.stage == "main");
    if has_main {
        for slice in &corpus.slices {
            let dir = slice
                .dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let ensembles = slice_ensembles(slice)?;
            let frac = hm_le_am_fraction(&ensembles);
            slices.push(SliceReport {
                training: training_stats(corpus, &dir),
                analysis: analyze_slice(slice, grid_points, linkage)?,
                ensembles,
                hm_le_am_fraction: frac,
            });
        }
    }
    let corner_runs = corner_convergence(corpus)?;
    let corner_fraction_approaching = if corner_runs.is_empty() {
        None
    } else {
        Some(
            corner_runs.iter().filter(|r| r.approaches_ignorance).count() as f64
                / corner_runs.len() as f64,
        )
    };
    Ok(CorpusReport {
        corpus: corpus.info.name.clone(),
        tool_version: corpus.info.tool_version.clone(),
        slices,
        corner_runs,
        corner_fraction_approaching,
        wall_time_seconds: t0.elapsed().as_secs_f64(),
    })
}
