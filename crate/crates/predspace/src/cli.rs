//! Command-line front end: datasets -> distances -> geometry -> embeddings
//! -> reports. Every command writes a run manifest beside its outputs and
//! exits 0 on success, 2 on validation errors, 3 on numerical failures.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cluster::Linkage;
use crate::corpus::{self, Split};
use crate::embedding;
use crate::error::{Error, Result};
use crate::format::{self, RunManifest};
use crate::geometry::Geodesic;
use crate::metrics::{self, DistanceKind};
use crate::model::{ignorance, truth, PredictionTensor};
use crate::report;
use crate::synth::Preset;
use crate::trajectory;

#[derive(Parser)]
#[command(
    name = "predspace",
    version,
    about = "Prediction-space analysis of classifier training trajectories"
)]
struct Cli {
    /// Size of the rayon thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory corpus from a preset.
    Synth(SynthArgs),
    /// Pairwise distance matrix over all checkpoints of a corpus slice.
    Distances(DistancesArgs),
    /// InPCA / weighted-InPCA embedding of a distance matrix.
    Embed(EmbedArgs),
    /// Per-checkpoint progress, error and distance-to-truth report.
    Progress(ProgressArgs),
    /// Trajectory distances, seed-averaged clustering, dendrogram export.
    Trajdist(TrajdistArgs),
    /// Full analysis bundle over a corpus, one summary JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Bundled preset name (sloppy-small, appendix-grid, acceptance-small,
    /// corners-small) or a path to a preset JSON.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    /// Base seed for all runs in the corpus.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DistancesArgs {
    /// Corpus slice directory (with manifest.json) or explicit .pred files.
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "bhat")]
    kind: String,
    /// Which record of each run file to use for slice inputs.
    #[arg(long, default_value = "train")]
    split: String,
    /// Row-block size for the chunked computation.
    #[arg(long, default_value_t = 256)]
    chunk: usize,
    /// Output DMX1 file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Input DMX1 distance matrix.
    #[arg(long)]
    dmx: PathBuf,
    #[arg(long, default_value_t = 50)]
    dims: usize,
    /// Optional JSON array of positive multiplicities (weighted InPCA).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Corpus slice directory for config/progress metadata columns.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    split: String,
    /// Instead of embedding the matrix directly, build a 4-anchor basis
    /// embedding (ignorance, truth, and progress-kernel averages at the two
    /// given progress values) and project every model into it. Requires
    /// --corpus.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    basis: Option<Vec<f64>>,
    /// Kernel width for --basis anchors.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Output prefix: writes <out>.csv and <out>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProgressArgs {
    /// Corpus slice directory.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrajdistArgs {
    /// Corpus slice directory.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    /// Progress grid resolution for resampling.
    #[arg(long, default_value_t = 50)]
    grid: usize,
    #[arg(long, default_value = "bhat")]
    kind: String,
    #[arg(long, default_value = "average")]
    linkage: String,
    /// Output prefix: writes <out>.dmx, <out>.csv, <out>.dendrogram.json
    /// and <out>.newick.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Corpus root directory (with corpus.json).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 50)]
    grid: usize,
    #[arg(long, default_value = "average")]
    linkage: String,
    /// Output directory for summary.json.
    #[arg(long)]
    out: PathBuf,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Distances(args) => cmd_distances(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Progress(args) => cmd_progress(args),
        Command::Trajdist(args) => cmd_trajdist(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn manifest_params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn write_run_manifest(
    beside: &Path,
    command: &str,
    inputs: Vec<String>,
    parameters: BTreeMap<String, String>,
    t0: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        inputs,
        parameters,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: t0.elapsed().as_secs_f64(),
    };
    let path = if beside.is_dir() {
        beside.join("run-manifest.json")
    } else {
        let mut s = beside.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    };
    format::write_json_atomic(&path, &manifest)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let t0 = Instant::now();
    let preset = match Preset::bundled(&args.preset) {
        Some(p) => p,
        None => Preset::from_json(&std::fs::read_to_string(&args.preset)?)?,
    };
    let info = corpus::generate(&preset, &args.out, args.seed)?;
    println!(
        "generated corpus '{}': {} runs across {} slice(s) at {}",
        info.name,
        info.runs.len(),
        info.slices.len(),
        args.out.display()
    );
    write_run_manifest(
        &args.out,
        "synth",
        vec![args.preset.clone()],
        manifest_params(&[("seed", args.seed.to_string()), ("preset", args.preset)]),
        t0,
    )
}

/// Loads models for the distances command: a slice directory or explicit
/// PRED1 files.
fn collect_models(inputs: &[PathBuf], split: Split) -> Result<Vec<PredictionTensor>> {
    let mut models = Vec::new();
    if inputs.len() == 1 && inputs[0].is_dir() {
        let slice = load_slice(&inputs[0])?;
        for (file, t) in slice.load_all(split)? {
            for ck in t.checkpoints {
                models.push(
                    ck.tensor
                        .with_id(format!("{file}#{}", ck.step)),
                );
            }
        }
    } else {
        for path in inputs {
            for t in format::load_predictions(path)? {
                for ck in t.checkpoints {
                    models.push(ck.tensor);
                }
            }
        }
    }
    if models.is_empty() {
        return Err(Error::EmptyInput("no models found in inputs"));
    }
    Ok(models)
}

/// A slice directory is any directory with manifest.json + labels.json.
fn load_slice(dir: &Path) -> Result<corpus::CorpusSlice> {
    Ok(corpus::CorpusSlice {
        manifest: format::read_json(&dir.join("manifest.json"))?,
        labels: format::read_json(&dir.join("labels.json"))?,
        sloppiness: f64::NAN,
        dir: dir.to_path_buf(),
    })
}

/// Cache location for resumable distance runs: set MANIFOLD_CACHE_DIR to
/// enable spilling.
fn distance_cache_path(ids: &[String], kind: DistanceKind) -> Option<PathBuf> {
    let dir = std::env::var_os("MANIFOLD_CACHE_DIR")?;
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&[kind.code() as u8]);
    for id in ids {
        eat(id.as_bytes());
        eat(&[0]);
    }
    Some(PathBuf::from(dir).join(format!("pairwise-{h:016x}.dmx")))
}

fn cmd_distances(args: DistancesArgs) -> Result<()> {
    let t0 = Instant::now();
    let kind = DistanceKind::parse_flag(&args.kind)?;
    let split = Split::parse_flag(&args.split)?;
    let models = collect_models(&args.inputs, split)?;
    let ids: Vec<String> = models.iter().map(|m| m.model_id.clone()).collect();
    let cache = distance_cache_path(&ids, kind);
    if let Some(c) = &cache {
        if let Some(parent) = c.parent() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let dm = metrics::pairwise_matrix(&models, kind, args.chunk, cache.as_deref())?;
    format::save_dmx(&dm, &args.out)?;
    println!(
        "{} models, {:?} distances -> {}",
        dm.m(),
        kind,
        args.out.display()
    );
    write_run_manifest(
        &args.out,
        "distances",
        args.inputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        manifest_params(&[
            ("kind", args.kind),
            ("split", args.split),
            ("chunk", args.chunk.to_string()),
        ]),
        t0,
    )
}

/// Metadata columns for the embedding CSV, joined from a slice manifest.
struct ModelMeta {
    config: Option<crate::model::ConfigTag>,
    progress: Option<f64>,
}

fn model_metadata(
    ids: &[String],
    slice_dir: &Path,
    split: Split,
) -> Result<BTreeMap<String, ModelMeta>> {
    let slice = load_slice(slice_dir)?;
    let labels = slice.label_vector(split)?;
    let mut out = BTreeMap::new();
    for (file, t) in slice.load_all(split)? {
        let (n, c) = (t.n_samples(), t.n_classes());
        let reference = Geodesic::new(&ignorance(n, c), &truth(&labels, c)?)?;
        let indexed = trajectory::index_by_progress(&t, &reference)?;
        for ck in indexed.checkpoints {
            let id = format!("{file}#{}", ck.step);
            out.insert(
                id,
                ModelMeta {
                    config: Some(indexed.config.clone()),
                    progress: ck.progress,
                },
            );
        }
    }
    let _ = ids;
    Ok(out)
}

fn embedding_csv(
    path: &Path,
    ids: &[String],
    coords: &[f64],
    dims: usize,
    meta: &BTreeMap<String, ModelMeta>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("model_id,architecture,optimizer,batch_size,learning_rate,weight_decay,augmentation,seed,progress");
    for k in 1..=dims {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        let m = meta.get(id);
        let cfg = m.and_then(|m| m.config.as_ref());
        let progress = m.and_then(|m| m.progress);
        out.push_str(id);
        match cfg {
            Some(c) => out.push_str(&format!(
                ",{},{},{},{},{},{},{}",
                c.architecture,
                c.optimizer,
                c.batch_size,
                c.learning_rate,
                c.weight_decay,
                c.augmentation,
                c.seed
            )),
            None => out.push_str(",,,,,,,"),
        }
        match progress {
            Some(p) => out.push_str(&format!(",{p}")),
            None => out.push(','),
        }
        for k in 0..dims {
            out.push_str(&format!(",{}", coords[i * dims + k]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct EmbeddingSidecar {
    eigenvalues: Vec<f64>,
    signature: Vec<i8>,
    explained_stress: BTreeMap<usize, f64>,
}

fn print_stress_line(emb: &embedding::MinkowskiEmbedding) -> Result<BTreeMap<usize, f64>> {
    let mut stress = BTreeMap::new();
    for d in 1..=emb.dims() {
        stress.insert(d, emb.explained_stress(d)?);
    }
    let mut parts = Vec::new();
    for d in report::STRESS_DIMS {
        if let Some(s) = stress.get(&d) {
            parts.push(format!("d={d}: {:.3}", s));
        }
    }
    println!("explained stress  {}", parts.join("  "));
    Ok(stress)
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let t0 = Instant::now();
    let split = Split::parse_flag(&args.split)?;
    let csv_path = args.out.with_extension("csv");
    let json_path = args.out.with_extension("json");

    let (ids, coords, dims, sidecar) = if let Some(progress_anchors) = &args.basis {
        let slice_dir = args.corpus.as_ref().ok_or_else(|| {
            Error::InvalidArgument("--basis requires --corpus".into())
        })?;
        let (ids, coords, dims, emb) =
            basis_embed_slice(slice_dir, split, progress_anchors, args.sigma)?;
        let stress = print_stress_line(&emb)?;
        (
            ids,
            coords,
            dims,
            EmbeddingSidecar {
                eigenvalues: emb.eigenvalues.clone(),
                signature: emb.signature.clone(),
                explained_stress: stress,
            },
        )
    } else {
        let dm = format::load_dmx(&args.dmx)?;
        if args.dims > dm.m() {
            return Err(Error::InvalidArgument(format!(
                "dims {} exceeds matrix size {}",
                args.dims,
                dm.m()
            )));
        }
        let emb = match &args.weights {
            Some(path) => {
                let w: Vec<f64> = format::read_json(path)?;
                embedding::weighted_inpca(&dm, &w, args.dims)?
            }
            None => embedding::inpca(&dm, args.dims)?,
        };
        let stress = print_stress_line(&emb)?;
        (
            dm.ids.clone(),
            emb.coords().to_vec(),
            emb.dims(),
            EmbeddingSidecar {
                eigenvalues: emb.eigenvalues.clone(),
                signature: emb.signature.clone(),
                explained_stress: stress,
            },
        )
    };

    let meta = match &args.corpus {
        Some(dir) => model_metadata(&ids, dir, split)?,
        None => BTreeMap::new(),
    };
    embedding_csv(&csv_path, &ids, &coords, dims, &meta)?;
    format::write_json_atomic(&json_path, &sidecar)?;
    println!("embedding -> {} / {}", csv_path.display(), json_path.display());
    write_run_manifest(
        &csv_path,
        "embed",
        vec![args.dmx.display().to_string()],
        manifest_params(&[
            ("dims", args.dims.to_string()),
            ("sigma", args.sigma.to_string()),
            (
                "weights",
                args.weights
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            (
                "basis",
                args.basis
                    .as_ref()
                    .map(|b| format!("{b:?}"))
                    .unwrap_or_default(),
            ),
        ]),
        t0,
    )
}

/// Four-anchor basis embedding of a whole slice: anchors are ignorance,
/// truth, and progress-kernel averages at the two given progress values.
fn basis_embed_slice(
    slice_dir: &Path,
    split: Split,
    anchors_at: &[f64],
    sigma: f64,
) -> Result<(Vec<String>, Vec<f64>, usize, embedding::MinkowskiEmbedding)> {
    let slice = load_slice(slice_dir)?;
    let labels = slice.label_vector(split)?;
    let runs = slice.load_all(split)?;
    let first = runs.first().ok_or(Error::EmptyInput("empty slice"))?;
    let (n, c) = (first.1.n_samples(), first.1.n_classes());
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c)?;
    let reference = Geodesic::new(&p0, &ps)?;

    let mut ids = Vec::new();
    let mut with_progress: Vec<(PredictionTensor, f64)> = Vec::new();
    for (file, t) in &runs {
        let indexed = trajectory::index_by_progress(t, &reference)?;
        for ck in indexed.checkpoints {
            ids.push(format!("{file}#{}", ck.step));
            with_progress.push((ck.tensor, ck.progress.unwrap()));
        }
    }
    let a1 = embedding::progress_kernel_average(&with_progress, anchors_at[0], sigma)?;
    let a2 = embedding::progress_kernel_average(&with_progress, anchors_at[1], sigma)?;
    let anchors = [p0, ps, a1, a2];
    let models: Vec<PredictionTensor> =
        with_progress.into_iter().map(|(t, _)| t).collect();
    let (emb, coords) =
        embedding::basis_embedding(&anchors, &models, DistanceKind::Bhattacharyya)?;
    Ok((ids, coords, emb.dims(), emb))
}

fn cmd_progress(args: ProgressArgs) -> Result<()> {
    let t0 = Instant::now();
    let split = Split::parse_flag(&args.split)?;
    let slice = load_slice(&args.inputs)?;
    let labels = slice.label_vector(split)?;
    let runs = slice.load_all(split)?;
    let first = runs.first().ok_or(Error::EmptyInput("empty slice"))?;
    let (n, c) = (first.1.n_samples(), first.1.n_classes());
    let ps = truth(&labels, c)?;
    let reference = Geodesic::new(&ignorance(n, c), &ps)?;

    let mut csv = String::from("model_id,step,progress,error,d_b_to_truth\n");
    let mut progress = Vec::new();
    let mut errors = Vec::new();
    let mut dbs = Vec::new();
    for (file, t) in &runs {
        let indexed = trajectory::index_by_progress(t, &reference)?;
        for ck in &indexed.checkpoints {
            let p = ck.progress.unwrap();
            let e = ck.tensor.error_rate(&labels)?;
            let db = metrics::bhattacharyya(&ck.tensor, &ps)?;
            csv.push_str(&format!("{file}#{},{},{p},{e},{db}\n", ck.step, ck.step));
            progress.push(p);
            errors.push(e);
            dbs.push(db);
        }
    }
    std::fs::write(&args.out, csv)?;
    println!(
        "R^2(progress, error) = {:.4}   R^2(progress, d_B) = {:.4}",
        report::r_squared(&progress, &errors),
        report::r_squared(&progress, &dbs)
    );
    write_run_manifest(
        &args.out,
        "progress",
        vec![args.inputs.display().to_string()],
        manifest_params(&[("split", args.split)]),
        t0,
    )
}

fn cmd_trajdist(args: TrajdistArgs) -> Result<()> {
    let t0 = Instant::now();
    let split = Split::parse_flag(&args.split)?;
    let kind = DistanceKind::parse_flag(&args.kind)?;
    let linkage = Linkage::parse_flag(&args.linkage)?;
    let slice = load_slice(&args.inputs)?;
    let labels = slice.label_vector(split)?;
    let runs = slice.load_all(split)?;
    let first = runs.first().ok_or(Error::EmptyInput("empty slice"))?;
    let (n, c) = (first.1.n_samples(), first.1.n_classes());
    let reference = Geodesic::new(&ignorance(n, c), &truth(&labels, c)?)?;

    let mut resampled = Vec::with_capacity(runs.len());
    for (_, t) in &runs {
        let indexed = trajectory::index_by_progress(t, &reference)?;
        resampled.push(trajectory::resample(&indexed, args.grid)?);
    }
    let tdm = trajectory::trajectory_distance_matrix(&resampled, kind)?;

    let dmx_path = args.out.with_extension("dmx");
    format::save_dmx(&tdm, &dmx_path)?;
    let mut csv = String::from("id");
    for id in &tdm.ids {
        csv.push(',');
        csv.push_str(id);
    }
    csv.push('\n');
    for i in 0..tdm.m() {
        csv.push_str(&tdm.ids[i]);
        for j in 0..tdm.m() {
            csv.push_str(&format!(",{}", tdm.get(i, j)));
        }
        csv.push('\n');
    }
    std::fs::write(args.out.with_extension("csv"), csv)?;

    let keys: Vec<String> = resampled.iter().map(|t| t.config.group_key()).collect();
    let averaged = trajectory::average_over_seeds(&tdm, &keys)?;
    let dend = crate::cluster::hierarchical_cluster(&averaged, linkage)?;
    format::write_json_atomic(&args.out.with_extension("dendrogram.json"), &dend)?;
    std::fs::write(args.out.with_extension("newick"), dend.to_newick())?;
    println!(
        "{} trajectories, {} config groups -> {}",
        tdm.m(),
        averaged.m(),
        args.out.display()
    );
    write_run_manifest(
        &dmx_path,
        "trajdist",
        vec![args.inputs.display().to_string()],
        manifest_params(&[
            ("grid", args.grid.to_string()),
            ("kind", args.kind),
            ("linkage", args.linkage),
            ("split", args.split),
        ]),
        t0,
    )
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let t0 = Instant::now();
    let linkage = Linkage::parse_flag(&args.linkage)?;
    let corpus = corpus::load(&args.corpus)?;
    let rep = report::full_report(&corpus, args.grid, linkage)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("summary.json");
    format::write_json_atomic(&path, &rep)?;
    for slice in &rep.slices {
        println!(
            "slice {}: {} runs ({} diverged), {:.0}% at <=5% train error, stress@10 = {:.3}, R^2(progress,error) = {:.3}, HM<=AM in {:.0}% of groups",
            slice.analysis.dir,
            slice.training.n_runs,
            slice.training.n_diverged,
            100.0 * slice.training.frac_low_train_error,
            slice.analysis.explained_stress.get(&10).copied().unwrap_or(f64::NAN),
            slice.analysis.progress_error_r2,
            100.0 * slice.hm_le_am_fraction,
        );
    }
    if let Some(frac) = rep.corner_fraction_approaching {
        println!(
            "corner stage-2 runs approaching ignorance: {:.0}%",
            100.0 * frac
        );
    }
    println!("summary -> {}", path.display());
    write_run_manifest(
        &path,
        "report",
        vec![args.corpus.display().to_string()],
        manifest_params(&[
            ("grid", args.grid.to_string()),
            ("linkage", args.linkage),
        ]),
        t0,
    )
}
