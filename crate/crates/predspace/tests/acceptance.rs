//! Acceptance suite: twelve numbered criteria covering analytic anchors,
//! isometry, geodesic projection, trajectory distances, out-of-sample and
//! weighted embeddings, centroids, the trainer's gradients, and the
//! desk-scale synthetic experiments. Runs as one sequential test so the
//! per-criterion runtime budgets are measured without interleaving; prints
//! one PASS/FAIL line per criterion (visible with `--nocapture`).

use std::path::PathBuf;
use std::time::{Duration, Instant};

use predspace::centroids::{centroid, centroid_objective, CentroidKind};
use predspace::cluster::Linkage;
use predspace::corpus::{self, Split};
use predspace::embedding::{
    align_embeddings, inpca, joint_train_test_embed, weighted_inpca,
};
use predspace::geometry::{
    min_geodesic_distance_to_point, progress_on, Geodesic,
};
use predspace::metrics::{
    self, bhattacharyya, cross_entropy_half_check, geodesic_distance, hellinger,
    pairwise_matrix, DistanceKind,
};
use predspace::model::{Checkpoint, ConfigTag};
use predspace::report;
use predspace::synth::{
    geometric_schedule, sample_dataset, train, GaussianDatasetSpec, InitKind, LabelSource, Mlp,
    MlpSpec, OptMethod, OptimizerSpec, Preset, TaskSpec, TrainSeeds,
};
use predspace::trajectory::{index_by_progress, resample, trajectory_distance};
use predspace::{ignorance, truth, LabelVector, PredictionTensor, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

struct Harness {
    outcomes: Vec<Outcome>,
}

impl Harness {
    fn run(
        &mut self,
        name: &'static str,
        budget: Option<Duration>,
        f: impl FnOnce() -> Result<String, String>,
    ) {
        let t0 = Instant::now();
        let result = f();
        let elapsed = t0.elapsed();
        let (mut passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let mut line = detail;
        if let Some(b) = budget {
            if elapsed > b {
                passed = false;
                line = format!("{line}; OVER BUDGET {:?} > {:?}", elapsed, b);
            }
        }
        println!(
            "[{}] {name} ({:.1}s): {line}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        self.outcomes.push(Outcome {
            name,
            passed,
            detail: line,
            elapsed,
            budget,
        });
    }
}

fn random_model(rng: &mut impl Rng, n: usize, c: usize, id: String) -> PredictionTensor {
    let mut probs = vec![0.0f64; n * c];
    for row in probs.chunks_mut(c) {
        let mut s = 0.0;
        for p in row.iter_mut() {
            *p = -(rng.gen::<f64>()).ln();
            s += *p;
        }
        for p in row.iter_mut() {
            *p /= s;
        }
    }
    PredictionTensor::new(n, c, probs, id).unwrap()
}

fn random_models(rng: &mut impl Rng, m: usize, n: usize, c: usize) -> Vec<PredictionTensor> {
    (0..m)
        .map(|i| random_model(rng, n, c, format!("m{i}")))
        .collect()
}

fn check(cond: bool, ok: String, bad: String) -> Result<String, String> {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn criterion_1_isometry() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let shapes = [(3usize, 17usize, 2usize), (8, 100, 10), (32, 53, 5), (64, 64, 3)];
    let mut worst_rel: f64 = 0.0;
    for (m, n, c) in shapes {
        for kind in DistanceKind::ALL {
            let models = random_models(&mut rng, m, n, c);
            let d = pairwise_matrix(&models, kind, 16, None).map_err(|e| e.to_string())?;
            let scale = d
                .entries()
                .iter()
                .cloned()
                .fold(0.0f64, f64::max)
                .max(1e-12);
            let e = inpca(&d, m).map_err(|e| e.to_string())?;
            for i in 0..m {
                for j in 0..m {
                    let rel = (e.minkowski_sq(i, j) - d.get(i, j)).abs() / scale;
                    worst_rel = worst_rel.max(rel);
                }
            }
        }
    }
    check(
        worst_rel <= 1e-8,
        format!("full-spectrum signed norms reproduce D; worst relative residual {worst_rel:.2e}"),
        format!("isometry violated: worst relative residual {worst_rel:.2e}"),
    )
}

fn criterion_2_analytic_anchors() -> Result<String, String> {
    let mut worst = 0.0f64;
    for c in [2usize, 5, 10, 1000] {
        let n = 4;
        let labels =
            LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
        let p0 = ignorance(n, c);
        let ps = truth(&labels, c).unwrap();
        let db = bhattacharyya(&p0, &ps).map_err(|e| e.to_string())?;
        let dg = geodesic_distance(&p0, &ps).map_err(|e| e.to_string())?;
        worst = worst.max((db - (c as f64).ln() / 2.0).abs());
        worst = worst.max((dg - (1.0 / (c as f64).sqrt()).acos()).abs());
    }
    if worst > 1e-12 {
        return Err(format!("anchor mismatch {worst:.2e} > 1e-12"));
    }
    // Half cross-entropy identity on a random model.
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (n, c) = (100, 5);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
    let w = random_model(&mut rng, n, c, "w".into());
    let (db, hce) = cross_entropy_half_check(&w, &labels).map_err(|e| e.to_string())?;
    let gap = (db - hce).abs();
    check(
        gap <= 1e-10,
        format!("anchors exact to {worst:.1e}; d_B vs CE/2 gap {gap:.1e}"),
        format!("cross-entropy identity violated: gap {gap:.2e}"),
    )
}

fn criterion_3_geodesic_progress() -> Result<String, String> {
    let (n, c) = (50, 10);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
    let p0 = ignorance(n, c);
    let ps = truth(&labels, c).unwrap();
    let g = Geodesic::new(&p0, &ps).map_err(|e| e.to_string())?;

    // Projection of on-geodesic points.
    let mut worst_alpha = 0.0f64;
    for k in 0..=10 {
        let alpha = k as f64 / 10.0;
        let w = g.point(alpha).map_err(|e| e.to_string())?;
        let s = progress_on(&w, &g).map_err(|e| e.to_string())?;
        worst_alpha = worst_alpha.max((s - alpha).abs());
    }
    if worst_alpha > 1e-5 {
        return Err(format!("progress(point(alpha)) off by {worst_alpha:.2e}"));
    }

    // Midpoint equidistance and additivity over random endpoint pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..20 {
        let u = random_model(&mut rng, 10, 4, "u".into());
        let v = random_model(&mut rng, 10, 4, "v".into());
        let guv = Geodesic::new(&u, &v).map_err(|e| e.to_string())?;
        let mid = guv.point(0.5).map_err(|e| e.to_string())?;
        let d1 = geodesic_distance(&u, &mid).unwrap();
        let d2 = geodesic_distance(&mid, &v).unwrap();
        if (d1 - d2).abs() > 1e-10 {
            return Err(format!("midpoint equidistance violated: {d1} vs {d2}"));
        }
        let (a, b) = (0.15, 0.85);
        let pa = guv.point(a).unwrap();
        let pb = guv.point(b).unwrap();
        let add = (geodesic_distance(&pa, &pb).unwrap()
            - (b - a) * geodesic_distance(&u, &v).unwrap())
        .abs();
        if add > 1e-10 {
            return Err(format!("arc additivity violated by {add:.2e}"));
        }
    }

    // 100 random confident models below the error bound project to truth.
    let threshold = 1.0 - 1.0 / (c as f64).sqrt();
    for trial in 0..100 {
        let eps = rng.gen::<f64>() * (threshold - 0.02);
        let mut probs = vec![0.0f64; n * c];
        for i in 0..n {
            let wrong = rng.gen::<f64>() < eps;
            let class = if wrong {
                (labels.class_index(i) + 1 + rng.gen_range(0..c - 1)) % c
            } else {
                labels.class_index(i)
            };
            let class = if class == labels.class_index(i) && wrong {
                (class + 1) % c
            } else {
                class
            };
            probs[i * c + class] = 1.0;
        }
        let w = PredictionTensor::new(n, c, probs, format!("conf{trial}")).unwrap();
        if w.error_rate(&labels).unwrap() >= threshold {
            continue;
        }
        let s = progress_on(&w, &g).map_err(|e| e.to_string())?;
        if s < 1.0 - 1e-9 {
            return Err(format!("confident model projected to {s} < 1"));
        }
    }
    Ok(format!(
        "projection exact to {worst_alpha:.1e}; equidistance/additivity at 1e-10; confident bound holds on 100 models"
    ))
}

fn criterion_4_random_task_bound() -> Result<String, String> {
    let (n, c) = (100, 10);
    let labels = LabelVector::new((0..n).map(|i| (i % c) as u32 + 1).collect(), c).unwrap();
    // Corner agrees with the truth on exactly N/C samples.
    let corner_labels: Vec<u32> = (0..n)
        .map(|i| {
            if i < n / c {
                labels.label(i)
            } else {
                (labels.label(i) % c as u32) + 1
            }
        })
        .collect();
    let agreements = corner_labels
        .iter()
        .zip(labels.labels())
        .filter(|(a, b)| a == b)
        .count();
    assert_eq!(agreements, n / c);
    let corner = truth(&LabelVector::new(corner_labels, c).unwrap(), c).unwrap();
    let ps = truth(&labels, c).unwrap();
    let p0 = ignorance(n, c);
    let g = Geodesic::new(&corner, &ps).map_err(|e| e.to_string())?;
    let dmin = min_geodesic_distance_to_point(&g, &p0, DistanceKind::Bhattacharyya)
        .map_err(|e| e.to_string())?;
    let bound = 0.8394;
    check(
        dmin >= bound - 1e-3,
        format!("min distance to ignorance {dmin:.4} >= {bound} - 1e-3"),
        format!("bound violated: {dmin:.4} < {bound} - 1e-3"),
    )
}

/// A real trained trajectory with a dense checkpoint schedule.
fn dense_trained_trajectory() -> Trajectory {
    let data = sample_dataset(&GaussianDatasetSpec {
        n_train: 300,
        n_test: 10,
        input_dim: 20,
        sloppiness: 0.5,
        seed: 88,
    })
    .unwrap();
    let task = TaskSpec {
        labels: LabelSource::Teacher { hidden: 20, seed: 9 },
        n_classes: 3,
    };
    let student = MlpSpec::new(vec![20, 32, 3], InitKind::Default).unwrap();
    let epochs = 30usize;
    let steps = (300usize.div_ceil(50) * epochs) as u64;
    let opt = OptimizerSpec {
        method: OptMethod::Sgd,
        batch_size: 50,
        learning_rate: 0.1,
        weight_decay: 0.0,
        epochs,
        checkpoint_schedule: (0..=steps).collect(),
    };
    train(
        &data,
        &task,
        &student,
        &opt,
        TrainSeeds { init: 3, shuffle: 4 },
        &ConfigTag::default(),
    )
    .unwrap()
    .train_traj
}

fn criterion_5_reparameterization() -> Result<String, String> {
    let dense = dense_trained_trajectory();
    let sparse = Trajectory::new(
        dense.checkpoints.iter().step_by(2).cloned().collect::<Vec<Checkpoint>>(),
        dense.config.clone(),
    )
    .unwrap();
    let (n, c) = (dense.n_samples(), dense.n_classes());
    // The run's own task labels are irrelevant here: progress only needs a
    // consistent reference geodesic, taken from the final argmax.
    let final_ck = dense.checkpoints.last().unwrap();
    let labels = LabelVector::new(
        (0..n).map(|i| final_ck.tensor.argmax(i) as u32 + 1).collect(),
        c,
    )
    .unwrap();
    let reference =
        Geodesic::new(&ignorance(n, c), &truth(&labels, c).unwrap()).unwrap();
    let rd = resample(&index_by_progress(&dense, &reference).unwrap(), 50)
        .map_err(|e| e.to_string())?;
    let rs = resample(&index_by_progress(&sparse, &reference).unwrap(), 50)
        .map_err(|e| e.to_string())?;
    let d = trajectory_distance(&rd, &rs).map_err(|e| e.to_string())?;
    check(
        d <= 1e-3,
        format!(
            "d_traj(run, every-other-checkpoint run) = {d:.2e} <= 1e-3 ({} vs {} checkpoints)",
            dense.len(),
            sparse.len()
        ),
        format!("reparameterization distance {d:.2e} > 1e-3"),
    )
}

fn criterion_6_out_of_sample() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    // Member re-projection.
    let models = random_models(&mut rng, 16, 30, 4);
    let d = pairwise_matrix(&models, DistanceKind::Bhattacharyya, 8, None).unwrap();
    let e = inpca(&d, 10).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for j in 0..d.m() {
        let x = e.project_new(d.row(j)).map_err(|e| e.to_string())?;
        for (a, b) in x.iter().zip(e.coord(j)) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst > 1e-8 {
        return Err(format!("member re-projection drift {worst:.2e} > 1e-8"));
    }

    // Weighted InPCA vs naive repetition.
    let small = random_models(&mut rng, 3, 20, 3);
    let d3 = pairwise_matrix(&small, DistanceKind::Bhattacharyya, 4, None).unwrap();
    let weighted = weighted_inpca(&d3, &[2.0, 1.0, 1.0], 3).map_err(|e| e.to_string())?;
    let rep = vec![
        small[0].clone().with_id("a"),
        small[0].clone().with_id("b"),
        small[1].clone(),
        small[2].clone(),
    ];
    let d4 = pairwise_matrix(&rep, DistanceKind::Bhattacharyya, 4, None).unwrap();
    let naive = inpca(&d4, 3).map_err(|e| e.to_string())?;
    let mut naive_coords = Vec::new();
    for &row in &[0usize, 2, 3] {
        naive_coords.extend_from_slice(naive.coord(row));
    }
    let rmsd = align_embeddings(weighted.coords(), &naive_coords, 3, 3)
        .map_err(|e| e.to_string())?
        .rmsd;
    if rmsd > 1e-8 {
        return Err(format!("weighted-vs-repetition RMSD {rmsd:.2e} > 1e-8"));
    }

    // Joint train/test with test == train.
    let train_models = random_models(&mut rng, 9, 25, 3);
    let (emb, coords) = joint_train_test_embed(
        &train_models,
        &train_models,
        DistanceKind::Bhattacharyya,
        6,
    )
    .map_err(|e| e.to_string())?;
    let mut joint_worst = 0.0f64;
    for i in 0..train_models.len() {
        for k in 0..emb.dims() {
            joint_worst =
                joint_worst.max((coords[i * emb.dims() + k] - emb.coord(i)[k]).abs());
        }
    }
    check(
        joint_worst <= 1e-8,
        format!(
            "re-projection {worst:.1e}; weighted-vs-repetition RMSD {rmsd:.1e}; joint test=train drift {joint_worst:.1e}"
        ),
        format!("joint train/test drift {joint_worst:.2e} > 1e-8"),
    )
}

/// Grid + golden-section refinement oracle for C=2 centroid objectives.
fn grid_minimum(
    models: &[PredictionTensor],
    kind: CentroidKind,
    refine: bool,
) -> f64 {
    let eval = |t: f64| {
        let cand = PredictionTensor::new(1, 2, vec![t, 1.0 - t], "cand").unwrap();
        centroid_objective(models, &cand, kind).unwrap()
    };
    let mut best_t = 0.5;
    let mut best = f64::INFINITY;
    for i in 0..=10_000 {
        let t = 1e-6 + (1.0 - 2e-6) * i as f64 / 10_000.0;
        let v = eval(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    if refine {
        let (mut lo, mut hi) = ((best_t - 2e-4).max(1e-9), (best_t + 2e-4).min(1.0 - 1e-9));
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..90 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if eval(x1) <= eval(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        best = best.min(eval(0.5 * (lo + hi)));
    }
    best
}

fn criterion_7_centroids() -> Result<String, String> {
    let mk = |p: f64| PredictionTensor::new(1, 2, vec![p, 1.0 - p], "m").unwrap();
    let pairs = [
        (mk(0.9), mk(0.5)),
        (mk(0.99), mk(0.3)),
        (mk(0.2), mk(0.6)),
        (mk(0.7), mk(0.35)),
    ];
    let mut worst_gap = f64::NEG_INFINITY;
    for (a, b) in &pairs {
        let group = [a.clone(), b.clone()];
        for kind in CentroidKind::ALL {
            let c = centroid(&group, kind).map_err(|e| e.to_string())?;
            let ours = centroid_objective(&group, &c, kind).unwrap();
            let grid = grid_minimum(&group, kind, false);
            let gap = ours - grid;
            worst_gap = worst_gap.max(gap);
            if gap > 1e-8 {
                return Err(format!(
                    "{} centroid beaten by grid search: gap {gap:.2e}",
                    kind.name()
                ));
            }
        }
        // Jeffreys closed form vs refined numeric minimum.
        let cj = centroid(&group, CentroidKind::Jeffreys).unwrap();
        let ours = centroid_objective(&group, &cj, CentroidKind::Jeffreys).unwrap();
        let numeric = grid_minimum(&group, CentroidKind::Jeffreys, true);
        if (ours - numeric).abs() > 1e-8 {
            return Err(format!(
                "Jeffreys closed form vs numeric minimum gap {:.2e}",
                (ours - numeric).abs()
            ));
        }
    }
    Ok(format!(
        "all six centroids beat/match the 1e4-point grid (worst gap {worst_gap:.1e}); Jeffreys matches numeric minimization"
    ))
}

fn criterion_8_gradient_check() -> Result<String, String> {
    let spec = MlpSpec::new(vec![6, 8, 4], InitKind::Default).unwrap();
    let mut mlp = Mlp::init(&spec, 707);
    let x = ndarray::Array2::from_shape_fn((5, 6), |(i, j)| ((i * 7 + j) as f64 * 0.53).sin());
    let labels = vec![0usize, 3, 1, 2, 0];
    let (_, grads) = mlp.loss_and_grads(&x, &labels);
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    for l in 0..mlp.layers.len() {
        for idx in 0..mlp.layers[l].w.len() {
            let orig = mlp.layers[l].w.as_slice().unwrap()[idx];
            mlp.layers[l].w.as_slice_mut().unwrap()[idx] = orig + h;
            let (lp, _) = mlp.loss_and_grads(&x, &labels);
            mlp.layers[l].w.as_slice_mut().unwrap()[idx] = orig - h;
            let (lm, _) = mlp.loss_and_grads(&x, &labels);
            mlp.layers[l].w.as_slice_mut().unwrap()[idx] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads.w[l].as_slice().unwrap()[idx];
            let rel =
                (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    check(
        max_rel <= 1e-4,
        format!("max relative gradient error {max_rel:.2e} <= 1e-4"),
        format!("gradient check failed: {max_rel:.2e} > 1e-4"),
    )
}

fn acceptance_corpus_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_corpus")
}

fn criterion_9_synthetic_end_to_end() -> Result<String, String> {
    let root = acceptance_corpus_root();
    let _ = std::fs::remove_dir_all(&root);
    let preset = Preset::bundled("acceptance-small").unwrap();
    let info = corpus::generate(&preset, &root, 2024).map_err(|e| e.to_string())?;
    let corpus = corpus::load(&root).map_err(|e| e.to_string())?;

    // Training success pooled over both sloppiness values.
    let n_runs = info.runs.len();
    let low = info
        .runs
        .values()
        .filter(|r| r.final_train_error <= report::LOW_ERROR)
        .count();
    let frac = low as f64 / n_runs as f64;
    if frac < 0.8 {
        return Err(format!(
            "only {low}/{n_runs} runs reached <=5% train error"
        ));
    }

    // Explained stress of the top-10 dimensions, per sloppiness value.
    let mut stress_notes = Vec::new();
    for slice in &corpus.slices {
        let analysis = report::analyze_slice(slice, 50, Linkage::Average)
            .map_err(|e| e.to_string())?;
        let s10 = *analysis.explained_stress.get(&10).unwrap();
        stress_notes.push(format!("c={}: stress@10 = {s10:.3}", slice.sloppiness));
        if s10 < 0.75 {
            return Err(format!(
                "c={}: explained stress@10 = {s10:.3} < 0.75",
                slice.sloppiness
            ));
        }
    }
    Ok(format!(
        "{low}/{n_runs} runs at <=5% train error; {}",
        stress_notes.join("; ")
    ))
}

fn criterion_10_corner_convergence() -> Result<String, String> {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("corner_corpus");
    let _ = std::fs::remove_dir_all(&root);
    let preset = Preset::bundled("corners-small").unwrap();
    corpus::generate(&preset, &root, 4242).map_err(|e| e.to_string())?;
    let corpus = corpus::load(&root).map_err(|e| e.to_string())?;
    let runs = report::corner_convergence(&corpus).map_err(|e| e.to_string())?;
    let n = runs.len();
    let good = runs.iter().filter(|r| r.approaches_ignorance).count();
    if n != 6 {
        return Err(format!("expected 6 stage-2 runs, found {n}"));
    }
    check(
        good as f64 / n as f64 >= 0.8,
        format!("{good}/{n} stage-2 trajectories pass closer to ignorance than their corner endpoint"),
        format!("only {good}/{n} stage-2 trajectories approach ignorance"),
    )
}

fn criterion_11_hellinger_saturation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let (n, c) = (1000, 10);
    let mut min_h = f64::INFINITY;
    let mut max_db = 0.0f64;
    for i in 0..20 {
        let a = random_model(&mut rng, n, c, format!("a{i}"));
        let b = random_model(&mut rng, n, c, format!("b{i}"));
        min_h = min_h.min(hellinger(&a, &b).unwrap());
        max_db = max_db.max(bhattacharyya(&a, &b).unwrap());
    }
    check(
        min_h >= 2.0 - 1e-4 && max_db > 0.01 && max_db < 5.0,
        format!("d_H >= {min_h:.6} (saturated) while d_B <= {max_db:.3} stays O(1)"),
        format!("saturation failed: min d_H {min_h}, max d_B {max_db}"),
    )
}

fn criterion_12_ensemble_property(corpus_root: &PathBuf) -> Result<String, String> {
    let corpus = corpus::load(corpus_root).map_err(|e| e.to_string())?;
    let mut groups = 0usize;
    let mut good = 0usize;
    for slice in &corpus.slices {
        let ensembles = report::slice_ensembles(slice).map_err(|e| e.to_string())?;
        for g in &ensembles {
            groups += 1;
            if g.test_error["harmonic"] <= g.test_error["arithmetic"] {
                good += 1;
            }
        }
    }
    let frac = good as f64 / groups as f64;
    check(
        frac >= 0.7,
        format!("harmonic <= arithmetic test error in {good}/{groups} seed groups"),
        format!("harmonic beat arithmetic in only {good}/{groups} groups"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut h = Harness { outcomes: Vec::new() };
    let sec = Duration::from_secs;

    h.run("criterion 1: isometry suite", Some(sec(10)), criterion_1_isometry);
    h.run("criterion 2: analytic anchors", None, criterion_2_analytic_anchors);
    h.run(
        "criterion 3: geodesic/progress suite",
        Some(sec(30)),
        criterion_3_geodesic_progress,
    );
    h.run(
        "criterion 4: random-task geodesic bound",
        Some(sec(10)),
        criterion_4_random_task_bound,
    );
    h.run(
        "criterion 5: trajectory reparameterization",
        None,
        criterion_5_reparameterization,
    );
    h.run(
        "criterion 6: out-of-sample/weighted consistency",
        None,
        criterion_6_out_of_sample,
    );
    h.run("criterion 7: centroid suite", None, criterion_7_centroids);
    h.run("criterion 8: gradient check", None, criterion_8_gradient_check);
    h.run(
        "criterion 9: synthetic end-to-end",
        Some(sec(1800)),
        criterion_9_synthetic_end_to_end,
    );
    h.run(
        "criterion 10: corner convergence",
        Some(sec(900)),
        criterion_10_corner_convergence,
    );
    h.run(
        "criterion 11: Hellinger saturation",
        None,
        criterion_11_hellinger_saturation,
    );
    let corpus_root = acceptance_corpus_root();
    h.run("criterion 12: ensemble property", None, || {
        criterion_12_ensemble_property(&corpus_root)
    });

    let failures: Vec<&Outcome> = h.outcomes.iter().filter(|o| !o.passed).collect();
    println!("\nacceptance summary: {}/{} criteria passed", h.outcomes.len() - failures.len(), h.outcomes.len());
    for o in &h.outcomes {
        let budget = o
            .budget
            .map(|b| format!(" (budget {:?})", b))
            .unwrap_or_default();
        println!(
            "  [{}] {} in {:.1}s{budget}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
    assert!(failures.is_empty(), "{} acceptance criteria failed", failures.len());
}
