//! Generation and loading of trajectory corpora on disk: one subdirectory
//! per sloppiness value, PRED1 files with `[train, test]` records per run,
//! a `manifest.json` of configurations, `labels.json` with the task labels,
//! and a top-level `corpus.json` tying everything together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::format::{self, CorpusLabels, CorpusManifest};
use crate::model::{ConfigTag, LabelVector, Trajectory};
use crate::synth::{
    self, corner_experiment, geometric_schedule, sample_dataset, train, GaussianDatasetSpec,
    LabelSource, OptMethod, OptimizerSpec, Preset, TaskSpec, TrainOutcome, TrainSeeds,
};

/// Which record of a run file to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn parse_flag(s: &str) -> Result<Self> {
        Ok(match s {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown split '{other}' (expected train|test)"
                )))
            }
        })
    }

    pub fn record_index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

/// Per-run summary recorded at generation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_train_error: f64,
    pub diverged: bool,
    /// "main", "stage1" or "stage2".
    pub stage: String,
}

/// Top-level corpus metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub name: String,
    pub tool_version: String,
    pub base_seed: u64,
    pub preset: Preset,
    /// Subdirectory name per sloppiness value.
    pub slices: Vec<SliceInfo>,
    /// Keyed by `<subdir>/<file>`.
    pub runs: BTreeMap<String, RunSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceInfo {
    pub dir: String,
    pub sloppiness: f64,
}

/// A loaded corpus slice: file table, labels, location.
#[derive(Debug, Clone)]
pub struct CorpusSlice {
    pub dir: PathBuf,
    pub sloppiness: f64,
    pub manifest: CorpusManifest,
    pub labels: CorpusLabels,
}

impl CorpusSlice {
    pub fn label_vector(&self, split: Split) -> Result<LabelVector> {
        let raw = match split {
            Split::Train => &self.labels.train,
            Split::Test => &self.labels.test,
        };
        LabelVector::new(raw.clone(), self.labels.n_classes)
    }

    /// Loads the chosen record of one run file with its config attached.
    pub fn load_run(&self, file: &str, split: Split) -> Result<Trajectory> {
        let trajectories = format::load_predictions(&self.dir.join(file))?;
        let mut t = trajectories
            .into_iter()
            .nth(split.record_index())
            .ok_or_else(|| {
                Error::Format(format!("{file} has no record for split {split:?}"))
            })?;
        if let Some(cfg) = self.manifest.get(file) {
            t.config = cfg.clone();
        }
        Ok(t)
    }

    /// All runs of the slice under one split, manifest order.
    pub fn load_all(&self, split: Split) -> Result<Vec<(String, Trajectory)>> {
        self.manifest
            .keys()
            .map(|f| Ok((f.clone(), self.load_run(f, split)?)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub info: CorpusInfo,
    pub slices: Vec<CorpusSlice>,
}

/// Loads a corpus directory (written by [`generate`]).
pub fn load(root: &Path) -> Result<Corpus> {
    let info: CorpusInfo = format::read_json(&root.join("corpus.json"))?;
    let mut slices = Vec::with_capacity(info.slices.len());
    for s in &info.slices {
        let dir = root.join(&s.dir);
        slices.push(CorpusSlice {
            manifest: format::read_json(&dir.join("manifest.json"))?,
            labels: format::read_json(&dir.join("labels.json"))?,
            sloppiness: s.sloppiness,
            dir,
        });
    }
    Ok(Corpus {
        root: root.to_path_buf(),
        info,
        slices,
    })
}

fn mix_seed(base: u64, slice: usize, run: usize) -> u64 {
    // splitmix-style mixing keeps runs decorrelated across any grid shape.
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(1 + slice as u64))
        .wrapping_add(0xbf58476d1ce4e5b9u64.wrapping_mul(1 + run as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn sanitize_float(c: f64) -> String {
    format!("{c}").replace('.', "p")
}

/// Generates a corpus from a preset: one slice per sloppiness value, one
/// PRED1 file per run holding the train record then the test record.
/// Deterministic given `(preset, base_seed)`; independent runs train in
/// parallel.
pub fn generate(preset: &Preset, out_dir: &Path, base_seed: u64) -> Result<CorpusInfo> {
    std::fs::create_dir_all(out_dir)?;
    let mut info = CorpusInfo {
        name: preset.name.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed,
        preset: preset.clone(),
        slices: Vec::new(),
        runs: BTreeMap::new(),
    };

    for (si, &c) in preset.sloppiness.iter().enumerate() {
        let sub = format!("c{}", sanitize_float(c));
        let dir = out_dir.join(&sub);
        std::fs::create_dir_all(&dir)?;
        let spec = GaussianDatasetSpec {
            sloppiness: c,
            seed: preset.dataset.seed.wrapping_add(si as u64),
            ..preset.dataset.clone()
        };
        let data = sample_dataset(&spec)?;
        let task = TaskSpec {
            labels: LabelSource::Teacher {
                hidden: preset.teacher_hidden,
                seed: preset.teacher_seed,
            },
            n_classes: preset.n_classes,
        };
        let (train_labels, test_labels) = synth::resolve_labels(&task, &data)?;
        format::write_json_atomic(
            &dir.join("labels.json"),
            &CorpusLabels {
                n_classes: preset.n_classes,
                train: train_labels.labels().to_vec(),
                test: test_labels.labels().to_vec(),
            },
        )?;

        let manifest: Mutex<CorpusManifest> = Mutex::new(CorpusManifest::new());
        let runs: Mutex<BTreeMap<String, RunSummary>> = Mutex::new(BTreeMap::new());

        if let Some(corners) = &preset.corners {
            let tag0 = preset
                .run_configs()
                .into_iter()
                .next()
                .ok_or(Error::EmptyInput("corner preset needs a grid config"))?;
            let student = preset.student_spec(&tag0)?;
            let opt = optimizer_for(preset, &tag0, &data)?;
            let results = corner_experiment(
                &data,
                &task,
                &student,
                &opt,
                corners.n_corners,
                corners.seeds_per_corner,
                mix_seed(base_seed, si, 0),
            )?;
            for run in &results {
                for (stage, outcome) in
                    [("stage1", &run.stage1), ("stage2", &run.stage2)]
                {
                    let file = format!(
                        "corner{}_s{}_{stage}.pred",
                        run.corner, run.seed
                    );
                    write_run(&dir, &file, outcome)?;
                    manifest
                        .lock()
                        .unwrap()
                        .insert(file.clone(), outcome.train_traj.config.clone());
                    runs.lock().unwrap().insert(
                        format!("{sub}/{file}"),
                        RunSummary {
                            final_train_error: outcome.final_train_error,
                            diverged: outcome.diverged,
                            stage: stage.to_string(),
                        },
                    );
                }
            }
        } else {
            let configs = preset.run_configs();
            configs
                .par_iter()
                .enumerate()
                .map(|(ri, tag)| -> Result<()> {
                    let student = preset.student_spec(tag)?;
                    let opt = optimizer_for(preset, tag, &data)?;
                    let seed = mix_seed(base_seed, si, ri);
                    let outcome = train(
                        &data,
                        &task,
                        &student,
                        &opt,
                        TrainSeeds {
                            init: seed,
                            shuffle: seed ^ 0x5151_5151,
                        },
                        tag,
                    )?;
                    let file = format!(
                        "{}_{}_b{}_wd{}_s{}.pred",
                        tag.architecture,
                        tag.optimizer,
                        tag.batch_size,
                        sanitize_float(tag.weight_decay),
                        tag.seed
                    );
                    write_run(&dir, &file, &outcome)?;
                    manifest.lock().unwrap().insert(file.clone(), tag.clone());
                    runs.lock().unwrap().insert(
                        format!("{sub}/{file}"),
                        RunSummary {
                            final_train_error: outcome.final_train_error,
                            diverged: outcome.diverged,
                            stage: "main".to_string(),
                        },
                    );
                    Ok(())
                })
                .collect::<Result<Vec<()>>>()?;
        }

        format::write_json_atomic(&dir.join("manifest.json"), &manifest.into_inner().unwrap())?;
        info.runs.extend(runs.into_inner().unwrap());
        info.slices.push(SliceInfo {
            dir: sub,
            sloppiness: c,
        });
    }

    format::write_json_atomic(&out_dir.join("corpus.json"), &info)?;
    Ok(info)
}

fn optimizer_for(
    preset: &Preset,
    tag: &ConfigTag,
    data: &synth::SyntheticDataset,
) -> Result<OptimizerSpec> {
    let steps_per_epoch = data.train.nrows().div_ceil(tag.batch_size);
    let total = (steps_per_epoch * preset.grid.epochs) as u64;
    Ok(OptimizerSpec {
        method: OptMethod::parse(&tag.optimizer)?,
        batch_size: tag.batch_size,
        learning_rate: tag.learning_rate,
        weight_decay: tag.weight_decay,
        epochs: preset.grid.epochs,
        checkpoint_schedule: geometric_schedule(total, preset.max_checkpoints),
    })
}

fn write_run(dir: &Path, file: &str, outcome: &TrainOutcome) -> Result<()> {
    format::save_predictions(
        &[outcome.train_traj.clone(), outcome.test_traj.clone()],
        &dir.join(file),
    )
}
