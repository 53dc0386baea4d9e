//! Progress reindexing of trajectories, uniform-progress resampling via
//! geodesic interpolation, trajectory distances, tube widths, and
//! per-trajectory distance-to-geodesic profiles.
//!
//! Raw checkpoint indices are a poor clock: two runs of the same dynamics
//! recorded at different rates look far apart. Reindexing by progress and
//! comparing at equal progress repairs that.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance_to_geodesic, progress_on, Geodesic};
use crate::metrics::{self, DistanceKind, TrajectoryDistanceMatrix};
use crate::model::{ConfigTag, PredictionTensor, Trajectory};

/// Default number of uniform progress grid points for resampling.
pub const DEFAULT_GRID: usize = 50;

/// A trajectory re-expressed on a uniform progress grid.
#[derive(Debug, Clone)]
pub struct ResampledTrajectory {
    grid: Vec<f64>,
    points: Vec<PredictionTensor>,
    pub config: ConfigTag,
}

impl ResampledTrajectory {
    /// Grid must be strictly increasing, one valid tensor per grid value.
    pub fn new(grid: Vec<f64>, points: Vec<PredictionTensor>, config: ConfigTag) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 values".into()));
        }
        if grid.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid len {} vs points len {}",
                grid.len(),
                points.len()
            )));
        }
        for w in grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(
                    "grid must be strictly increasing".into(),
                ));
            }
        }
        for p in points.iter().skip(1) {
            points[0].check_same_shape(p)?;
        }
        Ok(Self {
            grid,
            points,
            config,
        })
    }

    /// A trajectory pinned to one model over the whole `[0, 1]` range.
    pub fn constant(model: &PredictionTensor, k: usize, config: ConfigTag) -> Result<Self> {
        let grid: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        Self::new(grid, vec![model.clone(); k], config)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn points(&self) -> &[PredictionTensor] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn s_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Evaluates the trajectory at progress `s` inside its range by
    /// geodesic interpolation between the bracketing grid points. Values on
    /// a grid point return that point exactly.
    pub fn eval_at(&self, s: f64) -> Result<PredictionTensor> {
        if s < self.s_min() - 1e-9 || s > self.s_max() + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "s={s} outside grid range [{}, {}]",
                self.s_min(),
                self.s_max()
            )));
        }
        let s = s.clamp(self.s_min(), self.s_max());
        // Last index with grid value <= s.
        let i = match self.grid.partition_point(|&g| g <= s) {
            0 => 0,
            p => p - 1,
        };
        if (self.grid[i] - s).abs() < 1e-12 {
            return Ok(self.points[i].clone());
        }
        let j = (i + 1).min(self.grid.len() - 1);
        if j == i {
            return Ok(self.points[i].clone());
        }
        let alpha = (s - self.grid[i]) / (self.grid[j] - self.grid[i]);
        let g = Geodesic::new(&self.points[i], &self.points[j])?;
        g.point(alpha.clamp(0.0, 1.0))
    }
}

fn progress_values(t: &Trajectory) -> Result<Vec<f64>> {
    t.checkpoints
        .iter()
        .enumerate()
        .map(|(i, ck)| {
            ck.progress.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "checkpoint {i} has no progress; run index_by_progress first"
                ))
            })
        })
        .collect()
}

/// Non-monotone progress sequences (loss spikes) are replaced by their
/// running maximum so that progress is a usable integration variable.
pub fn monotonize(progress: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(progress.len());
    let mut hi = f64::NEG_INFINITY;
    for &p in progress {
        hi = hi.max(p);
        out.push(hi);
    }
    out
}

/// Computes the progress of every checkpoint against the reference geodesic
/// (canonically ignorance to truth), monotonizes, and returns the indexed
/// trajectory.
pub fn index_by_progress(t: &Trajectory, reference: &Geodesic) -> Result<Trajectory> {
    if t.len() < 2 {
        return Err(Error::InvalidArgument(
            "progress indexing needs at least 2 checkpoints".into(),
        ));
    }
    let raw: Vec<f64> = t
        .checkpoints
        .par_iter()
        .map(|ck| progress_on(&ck.tensor, reference))
        .collect::<Result<_>>()?;
    let mono = monotonize(&raw);
    let mut out = t.clone();
    for (ck, p) in out.checkpoints.iter_mut().zip(mono) {
        ck.progress = Some(p);
    }
    Ok(out)
}

/// Resamples a progress-indexed trajectory at `k` uniform progress values
/// covering its own range. Interior points come from geodesic interpolation
/// between the bracketing checkpoints; progress ties bracket by the later
/// checkpoint.
pub fn resample(t: &Trajectory, k: usize) -> Result<ResampledTrajectory> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if t.len() < 2 {
        return Err(Error::InvalidArgument(
            "resampling needs at least 2 checkpoints".into(),
        ));
    }
    let prog = progress_values(t)?;
    let (s0, s1) = (prog[0], *prog.last().unwrap());
    if s1 - s0 < 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "degenerate progress range [{s0}, {s1}]"
        )));
    }
    let grid: Vec<f64> = (0..k)
        .map(|i| s0 + (s1 - s0) * i as f64 / (k - 1) as f64)
        .collect();
    let points: Vec<PredictionTensor> = grid
        .par_iter()
        .map(|&s| -> Result<PredictionTensor> {
            // Later checkpoint wins on ties: last index with progress <= s.
            let i = match prog.partition_point(|&p| p <= s) {
                0 => 0,
                p => p - 1,
            };
            if (prog[i] - s).abs() < 1e-12 || i + 1 >= prog.len() {
                return Ok(t.checkpoints[i].tensor.clone());
            }
            let j = i + 1;
            let alpha = ((s - prog[i]) / (prog[j] - prog[i])).clamp(0.0, 1.0);
            let g = Geodesic::new(&t.checkpoints[i].tensor, &t.checkpoints[j].tensor)?;
            g.point(alpha)
        })
        .collect::<Result<_>>()?;
    ResampledTrajectory::new(grid, points, t.config.clone())
}

/// Distance between two trajectories: the integral of the given distance
/// between equal-progress points over the intersection of their progress
/// ranges (trapezoid rule), normalized by the range length.
pub fn trajectory_distance_with_kind(
    a: &ResampledTrajectory,
    b: &ResampledTrajectory,
    kind: DistanceKind,
) -> Result<f64> {
    let lo = a.s_min().max(b.s_min());
    let hi = a.s_max().min(b.s_max());
    if hi <= lo {
        return Err(Error::EmptyInput("trajectories share no progress range"));
    }
    let k = a.len().max(b.len());
    let vals: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let s = lo + (hi - lo) * i as f64 / (k - 1) as f64;
            let pa = a.eval_at(s)?;
            let pb = b.eval_at(s)?;
            metrics::distance(&pa, &pb, kind)
        })
        .collect::<Result<_>>()?;
    let mut acc = (vals[0] + vals[k - 1]) / 2.0;
    acc += vals[1..k - 1].iter().sum::<f64>();
    Ok(acc / (k - 1) as f64)
}

/// The canonical trajectory distance (Bhattacharyya integrand).
pub fn trajectory_distance(a: &ResampledTrajectory, b: &ResampledTrajectory) -> Result<f64> {
    trajectory_distance_with_kind(a, b, DistanceKind::Bhattacharyya)
}

/// Pairwise trajectory distances; `ids` default to each config's group key
/// plus seed.
pub fn trajectory_distance_matrix(
    trajectories: &[ResampledTrajectory],
    kind: DistanceKind,
) -> Result<TrajectoryDistanceMatrix> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectories"));
    }
    let m = trajectories.len();
    let ids: Vec<String> = trajectories
        .iter()
        .map(|t| format!("{}|s{}", t.config.group_key(), t.config.seed))
        .collect();
    let mut entries = vec![0.0f64; m * m];
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| trajectory_distance_with_kind(&trajectories[i], &trajectories[j], kind))
        .collect::<Result<_>>()?;
    for (&(i, j), d) in pairs.iter().zip(dists) {
        entries[i * m + j] = d;
        entries[j * m + i] = d;
    }
    TrajectoryDistanceMatrix::new(kind, ids, entries)
}

/// Averages a trajectory distance matrix over weight initializations:
/// entries are grouped by the configuration key of each trajectory and each
/// config-pair cell becomes the mean over its seed pairs.
pub fn average_over_seeds(
    tdm: &TrajectoryDistanceMatrix,
    group_keys: &[String],
) -> Result<TrajectoryDistanceMatrix> {
    if group_keys.len() != tdm.m() {
        return Err(Error::ShapeMismatch(format!(
            "{} group keys for m={}",
            group_keys.len(),
            tdm.m()
        )));
    }
    let mut groups: Vec<String> = Vec::new();
    for k in group_keys {
        if !groups.contains(k) {
            groups.push(k.clone());
        }
    }
    let g = groups.len();
    let mut sums = vec![0.0f64; g * g];
    let mut counts = vec![0usize; g * g];
    for i in 0..tdm.m() {
        let gi = groups.iter().position(|k| k == &group_keys[i]).unwrap();
        for j in 0..tdm.m() {
            if i == j {
                continue;
            }
            let gj = groups.iter().position(|k| k == &group_keys[j]).unwrap();
            sums[gi * g + gj] += tdm.get(i, j);
            counts[gi * g + gj] += 1;
        }
    }
    let mut entries = vec![0.0f64; g * g];
    for a in 0..g {
        for b in 0..g {
            if a == b {
                continue;
            }
            if counts[a * g + b] == 0 {
                return Err(Error::EmptyInput("config pair with no seed pairs"));
            }
            entries[a * g + b] = sums[a * g + b] / counts[a * g + b] as f64;
        }
    }
    // Counting both (i,j) and (j,i) keeps the result exactly symmetric.
    TrajectoryDistanceMatrix::new(tdm.kind, groups, entries)
}

/// Pointwise arithmetic mean of a group sharing one grid.
pub fn mean_trajectory(group: &[ResampledTrajectory]) -> Result<ResampledTrajectory> {
    let first = group.first().ok_or(Error::EmptyInput("empty group"))?;
    check_shared_grid(group)?;
    let (n, c) = (first.points[0].n_samples(), first.points[0].n_classes());
    let mut points = Vec::with_capacity(first.len());
    for gi in 0..first.len() {
        let mut acc = vec![0.0f64; n * c];
        for t in group {
            for (a, &p) in acc.iter_mut().zip(t.points[gi].probs()) {
                *a += p;
            }
        }
        for a in acc.iter_mut() {
            *a /= group.len() as f64;
        }
        points.push(PredictionTensor::new(
            n,
            c,
            acc,
            format!("mean@{}", first.grid[gi]),
        )?);
    }
    ResampledTrajectory::new(first.grid.clone(), points, first.config.clone())
}

/// Re-expresses a group on one shared grid of `k` points spanning the
/// intersection of their progress ranges, so pointwise group operations
/// (means, tube widths) line up.
pub fn common_resample(
    group: &[ResampledTrajectory],
    k: usize,
) -> Result<Vec<ResampledTrajectory>> {
    if group.is_empty() {
        return Err(Error::EmptyInput("empty group"));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    let lo = group
        .iter()
        .map(|t| t.s_min())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = group
        .iter()
        .map(|t| t.s_max())
        .fold(f64::INFINITY, f64::min);
    if hi <= lo {
        return Err(Error::EmptyInput("group shares no progress range"));
    }
    let grid: Vec<f64> = (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect();
    group
        .iter()
        .map(|t| {
            let points = grid
                .iter()
                .map(|&s| t.eval_at(s))
                .collect::<Result<Vec<_>>>()?;
            ResampledTrajectory::new(grid.clone(), points, t.config.clone())
        })
        .collect()
}

fn check_shared_grid(group: &[ResampledTrajectory]) -> Result<()> {
    let first = &group[0];
    for t in group.iter().skip(1) {
        if t.len() != first.len()
            || t.grid
                .iter()
                .zip(&first.grid)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::ShapeMismatch("grids do not match".into()));
        }
    }
    Ok(())
}

/// Per grid point, the Bhattacharyya distances of each member to the group
/// mean. `tube_width(g)[i][k]` is member `k`'s distance at grid point `i`.
pub fn tube_width(group: &[ResampledTrajectory]) -> Result<Vec<Vec<f64>>> {
    let mean = mean_trajectory(group)?;
    let mut out = Vec::with_capacity(mean.len());
    for gi in 0..mean.len() {
        let mut widths = Vec::with_capacity(group.len());
        for t in group {
            widths.push(metrics::bhattacharyya(&t.points[gi], &mean.points[gi])?);
        }
        out.push(widths);
    }
    Ok(out)
}

/// Median width per grid point.
pub fn median_tube_width(group: &[ResampledTrajectory]) -> Result<Vec<f64>> {
    Ok(tube_width(group)?
        .into_iter()
        .map(|mut w| {
            w.sort_by(|a, b| a.total_cmp(b));
            let n = w.len();
            if n % 2 == 1 {
                w[n / 2]
            } else {
                (w[n / 2 - 1] + w[n / 2]) / 2.0
            }
        })
        .collect())
}

/// Distance of every grid point to a geodesic.
pub fn geodesic_profile(
    t: &ResampledTrajectory,
    g: &Geodesic,
    kind: DistanceKind,
) -> Result<Vec<f64>> {
    t.points
        .par_iter()
        .map(|p| distance_to_geodesic(p, g, kind))
        .collect()
}
