//! End-to-end tests of the `predspace` binary: corpus generation,
//! distances, embedding, progress, trajectory clustering and reporting,
//! plus exit-code conventions.

use std::path::{Path, PathBuf};
use std::process::Command;

use predspace::format;
use predspace::geometry::Geodesic;
use predspace::model::{Checkpoint, ConfigTag};
use predspace::{ignorance, truth, LabelVector, Trajectory};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_predspace"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY_PRESET: &str = r#"{
    "name": "tiny-cli",
    "dataset": {"n_train": 60, "n_test": 20, "input_dim": 6,
                "sloppiness": 0.0, "seed": 31},
    "sloppiness": [0.5],
    "n_classes": 3,
    "teacher_hidden": 10,
    "teacher_seed": 5,
    "grid": {
        "hidden_layers": [1], "width": 16,
        "optimizers": ["sgd"], "batch_sizes": [20],
        "weight_decays": [0.0],
        "learning_rate_per_batch": 2e-3,
        "epochs": 12, "seeds": 2
    },
    "max_checkpoints": 12
}"#;

fn generate_tiny(dir: &Path) -> PathBuf {
    let preset_path = dir.join("preset.json");
    std::fs::write(&preset_path, TINY_PRESET).unwrap();
    let corpus = dir.join("corpus");
    let out = bin()
        .args([
            "synth",
            "--preset",
            preset_path.to_str().unwrap(),
            "--out",
            corpus.to_str().unwrap(),
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    corpus
}

#[test]
fn full_pipeline() {
    let dir = tmp("cli_pipeline");
    let corpus = generate_tiny(&dir);
    let slice = corpus.join("c0p5");
    assert!(slice.join("manifest.json").exists());
    assert!(slice.join("labels.json").exists());
    assert!(corpus.join("run-manifest.json").exists(), "run manifest beside outputs");

    // Distances over all checkpoints of the train split.
    let dmx = dir.join("train.dmx");
    let out = bin()
        .args([
            "distances",
            "--inputs",
            slice.to_str().unwrap(),
            "--kind",
            "bhat",
            "--out",
            dmx.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dm = format::load_dmx(&dmx).unwrap();
    assert!(dm.m() > 10);

    // Embedding with metadata join.
    let emb_prefix = dir.join("embed");
    let out = bin()
        .args([
            "embed",
            "--dmx",
            dmx.to_str().unwrap(),
            "--dims",
            "5",
            "--corpus",
            slice.to_str().unwrap(),
            "--out",
            emb_prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("explained stress"), "{stdout}");
    assert!(stdout.contains("d=1:"), "prints the stress ladder: {stdout}");
    let csv = std::fs::read_to_string(dir.join("embed.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("model_id,architecture,optimizer,batch_size"));
    assert!(header.ends_with("x5"));
    assert_eq!(csv.lines().count(), dm.m() + 1);
    // Metadata columns are filled for corpus models.
    assert!(csv.lines().nth(1).unwrap().contains("mlp-1x16"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("embed.json")).unwrap()).unwrap();
    assert_eq!(sidecar["eigenvalues"].as_array().unwrap().len(), 5);
    assert_eq!(sidecar["signature"].as_array().unwrap().len(), 5);

    // Progress report.
    let progress_csv = dir.join("progress.csv");
    let out = bin()
        .args([
            "progress",
            "--inputs",
            slice.to_str().unwrap(),
            "--out",
            progress_csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("R^2"));
    let pcsv = std::fs::read_to_string(&progress_csv).unwrap();
    assert!(pcsv.starts_with("model_id,step,progress,error,d_b_to_truth"));

    // Trajectory distances + dendrogram.
    let traj_prefix = dir.join("traj");
    let out = bin()
        .args([
            "trajdist",
            "--inputs",
            slice.to_str().unwrap(),
            "--grid",
            "20",
            "--out",
            traj_prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("traj.dmx").exists());
    assert!(dir.join("traj.csv").exists());
    assert!(dir.join("traj.dendrogram.json").exists());
    let newick = std::fs::read_to_string(dir.join("traj.newick")).unwrap();
    assert!(newick.ends_with(';'));

    // Full report.
    let report_dir = dir.join("report");
    let out = bin()
        .args([
            "report",
            "--corpus",
            corpus.to_str().unwrap(),
            "--grid",
            "20",
            "--out",
            report_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(report_dir.join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["slices"].as_array().unwrap().len(), 1);
}

#[test]
fn synth_is_idempotent_and_counts_match() {
    let dir = tmp("cli_determinism");
    let a = generate_tiny(&dir.join("a"));
    std::fs::create_dir_all(dir.join("b")).unwrap();
    let b = generate_tiny(&dir.join("b"));
    let file = "mlp-1x16_sgd_b20_wd0_s0.pred";
    let bytes_a = std::fs::read(a.join("c0p5").join(file)).unwrap();
    let bytes_b = std::fs::read(b.join("c0p5").join(file)).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seeds give bit-identical corpora");
}

#[test]
fn bundled_sloppy_small_produces_six_files() {
    let dir = tmp("cli_sloppy_small");
    let corpus = dir.join("corpus");
    let out = bin()
        .args([
            "synth",
            "--preset",
            "sloppy-small",
            "--out",
            corpus.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let preds = std::fs::read_dir(corpus.join("c0p5"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pred")
        })
        .count();
    assert_eq!(preds, 6, "2 configs x 3 seeds");
}

#[test]
fn invalid_preset_is_a_validation_error() {
    let dir = tmp("cli_badpreset");
    let preset_path = dir.join("bad.json");
    std::fs::write(&preset_path, "{ not json").unwrap();
    let out = bin()
        .args([
            "synth",
            "--preset",
            preset_path.to_str().unwrap(),
            "--out",
            dir.join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "parse errors carry a location: {err}");
}

#[test]
fn mixed_shapes_are_a_validation_error() {
    let dir = tmp("cli_mixed");
    // Two files with different C.
    for (name, c) in [("a.pred", 3usize), ("b.pred", 4)] {
        let labels = LabelVector::new((0..5).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
        let t = truth(&labels, c).unwrap();
        let traj = Trajectory::new(
            vec![
                Checkpoint { tensor: t.clone(), step: 0, epoch: 0.0, progress: None },
                Checkpoint { tensor: t, step: 1, epoch: 1.0, progress: None },
            ],
            ConfigTag::default(),
        )
        .unwrap();
        format::save_predictions(&[traj], &dir.join(name)).unwrap();
    }
    let out = bin()
        .args([
            "distances",
            "--inputs",
            dir.join("a.pred").to_str().unwrap(),
            dir.join("b.pred").to_str().unwrap(),
            "--out",
            dir.join("out.dmx").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

/// A slice directory whose trajectories march along the ignorance-truth
/// geodesic: progress and distance-to-truth are then monotonically related,
/// so the reported regression is essentially perfect.
#[test]
fn progress_on_geodesic_corpus_is_strongly_correlated() {
    let dir = tmp("cli_geodesic_corpus");
    let slice = dir.join("slice");
    std::fs::create_dir_all(&slice).unwrap();
    let (n, c) = (40usize, 4usize);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
    let g = Geodesic::new(&ignorance(n, c), &truth(&labels, c).unwrap()).unwrap();
    let mut manifest = format::CorpusManifest::new();
    for (f, offsets) in [("run0.pred", 0.0f64), ("run1.pred", 0.04)] {
        let checkpoints: Vec<Checkpoint> = (0..12)
            .map(|k| {
                let alpha = (offsets + k as f64 / 12.0).min(1.0);
                Checkpoint {
                    tensor: g.point(alpha).unwrap(),
                    step: k as u64,
                    epoch: k as f64,
                    progress: None,
                }
            })
            .collect();
        let traj = Trajectory::new(checkpoints, ConfigTag::default()).unwrap();
        // Record the same trajectory as both train and test records.
        format::save_predictions(&[traj.clone(), traj], &slice.join(f)).unwrap();
        manifest.insert(f.to_string(), ConfigTag::default());
    }
    format::write_json_atomic(&slice.join("manifest.json"), &manifest).unwrap();
    format::write_json_atomic(
        &slice.join("labels.json"),
        &format::CorpusLabels {
            n_classes: c,
            train: labels.labels().to_vec(),
            test: labels.labels().to_vec(),
        },
    )
    .unwrap();

    let out = bin()
        .args([
            "progress",
            "--inputs",
            slice.to_str().unwrap(),
            "--out",
            dir.join("p.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // Parse "R^2(progress, d_B) = x.xxxx" off the summary line.
    let r2: f64 = stdout
        .split("R^2(progress, d_B) = ")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(r2 >= 0.99, "geodesic corpus regression R^2 {r2} < 0.99: {stdout}");
}
