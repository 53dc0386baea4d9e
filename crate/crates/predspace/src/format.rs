//! On-disk formats: PRED1 prediction files, DMX1 distance caches, and the
//! JSON sidecars that tie a corpus together.
//!
//! PRED1 (little-endian): magic `PRD1`, u32 version=1, u32 record count,
//! then per trajectory record: u64 N, u32 C, u32 T, `T*N*C` f32
//! probabilities in checkpoint-major, sample-major, class-minor order,
//! followed by T u64 step numbers. Probabilities are stored as f32 and
//! promoted to f64 in memory; epochs are not persisted.
//!
//! DMX1 (little-endian): magic `DMX1`, u32 version=1, u32 distance-kind
//! code, u64 m, u64 rows-completed, then row-major f64 upper-triangle rows
//! (row `i` holds entries `j = i..m`, diagonal included). The
//! rows-completed field makes interrupted pairwise computations resumable.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{DistanceKind, DistanceMatrix};
use crate::model::{Checkpoint, ConfigTag, PredictionTensor, Trajectory};

const PRED_MAGIC: &[u8; 4] = b"PRD1";
const DMX_MAGIC: &[u8; 4] = b"DMX1";
const DMX_HEADER_LEN: u64 = 4 + 4 + 4 + 8 + 8;

/// Writes trajectories to a PRED1 file. Probabilities are truncated to f32;
/// a save/load round trip of f32-representable data is bit exact.
pub fn save_predictions(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PRED_MAGIC)?;
    w.write_u32::<LittleEndian>(1)?;
    w.write_u32::<LittleEndian>(trajectories.len() as u32)?;
    for t in trajectories {
        let (n, c) = (t.n_samples(), t.n_classes());
        w.write_u64::<LittleEndian>(n as u64)?;
        w.write_u32::<LittleEndian>(c as u32)?;
        w.write_u32::<LittleEndian>(t.len() as u32)?;
        for ck in &t.checkpoints {
            for &p in ck.tensor.probs() {
                w.write_f32::<LittleEndian>(p as f32)?;
            }
        }
        for ck in &t.checkpoints {
            w.write_u64::<LittleEndian>(ck.step)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a PRED1 file. Rows whose sums drifted by at most 1e-4 (f32
/// truncation, external producers) are renormalized; anything worse is
/// rejected. Model ids are `<file-stem>#<record>#<checkpoint>`.
pub fn load_predictions(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PRED_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}",
            path.display(),
            magic
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != 1 {
        return Err(Error::Format(format!("unsupported PRED1 version {version}")));
    }
    let n_records = r.read_u32::<LittleEndian>()?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = Vec::with_capacity(n_records as usize);
    for rec in 0..n_records {
        let n = r.read_u64::<LittleEndian>()? as usize;
        let c = r.read_u32::<LittleEndian>()? as usize;
        let t = r.read_u32::<LittleEndian>()? as usize;
        if n == 0 || c < 2 || t == 0 {
            return Err(Error::Format(format!(
                "record {rec}: bad shape N={n} C={c} T={t}"
            )));
        }
        let mut raw = vec![0f32; n * c];
        let mut checkpoints = Vec::with_capacity(t);
        for k in 0..t {
            for v in raw.iter_mut() {
                *v = r.read_f32::<LittleEndian>()?;
            }
            let probs: Vec<f64> = raw.iter().map(|&p| p as f64).collect();
            let tensor = PredictionTensor::from_rows_repair(
                n,
                c,
                probs,
                format!("{stem}#{rec}#{k}"),
            )?;
            checkpoints.push(Checkpoint {
                tensor,
                step: 0,
                epoch: 0.0,
                progress: None,
            });
        }
        for ck in checkpoints.iter_mut() {
            ck.step = r.read_u64::<LittleEndian>()?;
        }
        out.push(Trajectory::new(checkpoints, ConfigTag::default())?);
    }
    Ok(out)
}

/// Saves a full distance matrix as a DMX1 file (rows-completed = m) plus an
/// `<path>.ids.json` sidecar carrying the model ids.
pub fn save_dmx(dm: &DistanceMatrix, path: &Path) -> Result<()> {
    let mut cache = DmxCache::create(path, dm.kind, dm.m())?;
    for i in 0..dm.m() {
        let row: Vec<f64> = (i..dm.m()).map(|j| dm.get(i, j)).collect();
        cache.append_row(i, &row)?;
    }
    cache.set_rows_completed(dm.m())?;
    let ids_path = ids_sidecar(path);
    write_json_atomic(&ids_path, &dm.ids)?;
    Ok(())
}

/// Loads a complete DMX1 file; ids come from the sidecar when present.
pub fn load_dmx(path: &Path) -> Result<DistanceMatrix> {
    let cache = DmxCache::open(path)?;
    let m = cache.m();
    if cache.rows_completed() != m {
        return Err(Error::Format(format!(
            "{}: incomplete matrix ({}/{} rows)",
            path.display(),
            cache.rows_completed(),
            m
        )));
    }
    let mut entries = vec![0.0f64; m * m];
    let mut cache = cache;
    for i in 0..m {
        let row = cache.read_row(i)?;
        for (off, &v) in row.iter().enumerate() {
            entries[i * m + i + off] = v;
            entries[(i + off) * m + i] = v;
        }
    }
    let ids = match std::fs::read(ids_sidecar(path)) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("bad ids sidecar: {e}")))?,
        Err(_) => (0..m).map(|i| format!("m{i}")).collect(),
    };
    DistanceMatrix::new(cache.kind(), ids, entries)
}

fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids.json");
    PathBuf::from(s)
}

/// Resumable on-disk store for a pairwise computation.
pub struct DmxCache {
    file: File,
    kind: DistanceKind,
    m: usize,
    rows_completed: usize,
}

impl DmxCache {
    pub fn create(path: &Path, kind: DistanceKind, m: usize) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        file.write_all(DMX_MAGIC)?;
        file.write_u32::<LittleEndian>(1)?;
        file.write_u32::<LittleEndian>(kind.code())?;
        file.write_u64::<LittleEndian>(m as u64)?;
        file.write_u64::<LittleEndian>(0)?;
        Ok(Self {
            file,
            kind,
            m,
            rows_completed: 0,
        })
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut magic = [0u8; 4];
        file.read_exact(&mut magic)?;
        if &magic != DMX_MAGIC {
            return Err(Error::Format(format!(
                "{}: bad magic {:?}",
                path.display(),
                magic
            )));
        }
        let version = file.read_u32::<LittleEndian>()?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported DMX1 version {version}")));
        }
        let kind = DistanceKind::from_code(file.read_u32::<LittleEndian>()?)?;
        let m = file.read_u64::<LittleEndian>()? as usize;
        let rows_completed = file.read_u64::<LittleEndian>()? as usize;
        if rows_completed > m {
            return Err(Error::Format(format!(
                "rows-completed {rows_completed} exceeds m={m}"
            )));
        }
        Ok(Self {
            file,
            kind,
            m,
            rows_completed,
        })
    }

    /// Opens an existing cache if its header matches, otherwise starts a
    /// fresh one.
    pub fn open_or_create(path: &Path, kind: DistanceKind, m: usize) -> Result<Self> {
        if path.exists() {
            match Self::open(path) {
                Ok(c) if c.kind == kind && c.m == m => return Ok(c),
                Ok(c) => {
                    return Err(Error::Format(format!(
                        "{}: cache header mismatch (kind {:?} m {}, wanted {:?} {})",
                        path.display(),
                        c.kind,
                        c.m,
                        kind,
                        m
                    )))
                }
                Err(_) => {}
            }
        }
        Self::create(path, kind, m)
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows_completed(&self) -> usize {
        self.rows_completed
    }

    fn row_offset(&self, i: usize) -> u64 {
        let (i, m) = (i as u64, self.m as u64);
        let before = i * (2 * m - i + 1) / 2;
        DMX_HEADER_LEN + 8 * before
    }

    /// Reads the upper-triangle row `i` (length `m - i`); only valid below
    /// `rows_completed`.
    pub fn read_row(&mut self, i: usize) -> Result<Vec<f64>> {
        if i >= self.rows_completed {
            return Err(Error::Format(format!("row {i} not in cache")));
        }
        self.file.seek(SeekFrom::Start(self.row_offset(i)))?;
        let len = self.m - i;
        let mut row = vec![0.0f64; len];
        for v in row.iter_mut() {
            *v = self.file.read_f64::<LittleEndian>()?;
        }
        Ok(row)
    }

    /// Writes the upper-triangle row `i` at its fixed offset. The row is not
    /// considered durable until `set_rows_completed` advances past it.
    pub fn append_row(&mut self, i: usize, row: &[f64]) -> Result<()> {
        debug_assert_eq!(row.len(), self.m - i);
        self.file.seek(SeekFrom::Start(self.row_offset(i)))?;
        let mut buf = Vec::with_capacity(row.len() * 8);
        for &v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.file.write_all(&buf)?;
        Ok(())
    }

    pub fn set_rows_completed(&mut self, rows: usize) -> Result<()> {
        self.file.seek(SeekFrom::Start(4 + 4 + 4 + 8))?;
        self.file.write_u64::<LittleEndian>(rows as u64)?;
        self.file.flush()?;
        self.rows_completed = rows;
        Ok(())
    }
}

/// Sidecar manifest: ConfigTag fields keyed by PRED1 file name.
pub type CorpusManifest = BTreeMap<String, ConfigTag>;

/// Task labels for a corpus, 1-based, one vector per split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusLabels {
    pub n_classes: usize,
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

/// Provenance record written atomically beside every CLI output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

/// Serializes `value` to `path` via a temp file + rename so readers never
/// observe a partial document.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default(),
        std::process::id()
    ));
    let data = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Format(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(&tmp, data)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ignorance, ConfigTag};

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn random_trajectory(seed: u64, t: usize, n: usize, c: usize) -> Trajectory {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut checkpoints = Vec::new();
        for k in 0..t {
            let mut probs = vec![0.0f64; n * c];
            for row in probs.chunks_mut(c) {
                let mut s = 0.0;
                for p in row.iter_mut() {
                    // f32-representable values so round trips are bit exact.
                    *p = (rng.gen::<f32>() + 0.01) as f64;
                    s += *p;
                }
                for p in row.iter_mut() {
                    *p = ((*p / s) as f32) as f64;
                }
                let s2: f64 = row.iter().sum();
                let last = row.len() - 1;
                row[last] = ((row[last] + (1.0 - s2)) as f32) as f64;
            }
            checkpoints.push(Checkpoint {
                tensor: PredictionTensor::from_rows_repair(n, c, probs, format!("m{k}"))
                    .unwrap(),
                step: k as u64 * 3,
                epoch: k as f64,
                progress: None,
            });
        }
        Trajectory::new(checkpoints, ConfigTag::default()).unwrap()
    }

    #[test]
    fn pred1_round_trip_bit_exact() {
        let dir = tmpdir();
        let path = dir.path().join("a.pred");
        let traj = random_trajectory(1, 3, 10, 5);
        save_predictions(std::slice::from_ref(&traj), &path).unwrap();
        let loaded = load_predictions(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].len(), 3);
        for (a, b) in traj.checkpoints.iter().zip(&loaded[0].checkpoints) {
            assert_eq!(a.step, b.step);
            for (&x, &y) in a.tensor.probs().iter().zip(b.tensor.probs()) {
                assert_eq!(x as f32, y as f32);
                assert_eq!(y, (y as f32) as f64, "loaded values are f32-exact");
            }
        }
    }

    #[test]
    fn pred1_empty_container() {
        let dir = tmpdir();
        let path = dir.path().join("empty.pred");
        save_predictions(&[], &path).unwrap();
        assert!(load_predictions(&path).unwrap().is_empty());
    }

    #[test]
    fn pred1_bad_magic() {
        let dir = tmpdir();
        let path = dir.path().join("bad.pred");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(
            load_predictions(&path).unwrap_err(),
            Error::Format(_)
        ));
    }

    #[test]
    fn pred1_unwritable_path() {
        let err =
            save_predictions(&[], Path::new("/nonexistent-dir/x.pred")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn dmx_round_trip_and_resume() {
        use crate::metrics::{pairwise_matrix, DistanceKind};
        let dir = tmpdir();
        let models: Vec<_> = (0..5)
            .map(|i| {
                let t = random_trajectory(i, 1, 8, 3);
                t.checkpoints[0].tensor.clone().with_id(format!("id{i}"))
            })
            .collect();
        let cold = pairwise_matrix(&models, DistanceKind::Bhattacharyya, 2, None).unwrap();

        // Partially filled cache: first block of 2 rows completed.
        let cache_path = dir.path().join("c.dmx");
        {
            let mut c =
                DmxCache::create(&cache_path, DistanceKind::Bhattacharyya, 5).unwrap();
            for i in 0..2 {
                let row: Vec<f64> = (i..5).map(|j| cold.get(i, j)).collect();
                c.append_row(i, &row).unwrap();
            }
            c.set_rows_completed(2).unwrap();
        }
        let resumed =
            pairwise_matrix(&models, DistanceKind::Bhattacharyya, 2, Some(&cache_path))
                .unwrap();
        assert_eq!(resumed.entries(), cold.entries());

        // Header mismatch is an error.
        let err = pairwise_matrix(&models, DistanceKind::Geodesic, 2, Some(&cache_path));
        assert!(err.is_err());

        // Full save/load round trip.
        let out = dir.path().join("full.dmx");
        save_dmx(&cold, &out).unwrap();
        let loaded = load_dmx(&out).unwrap();
        assert_eq!(loaded.entries(), cold.entries());
        assert_eq!(loaded.ids, cold.ids);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tmpdir();
        let path = dir.path().join("manifest.json");
        let mut m = CorpusManifest::new();
        m.insert(
            "run_0.pred".into(),
            ConfigTag {
                architecture: "mlp-1x64".into(),
                optimizer: "sgd".into(),
                batch_size: 200,
                learning_rate: 0.1,
                weight_decay: 0.0,
                augmentation: "none".into(),
                seed: 7,
            },
        );
        write_json_atomic(&path, &m).unwrap();
        let back: CorpusManifest = read_json(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ignorance_survives_f32_round_trip_for_awkward_c() {
        // 1/3 is not f32-exact; the loader's repair path must accept it.
        let dir = tmpdir();
        let path = dir.path().join("ign.pred");
        let t = ignorance(4, 3);
        let traj = Trajectory::new(
            vec![
                Checkpoint {
                    tensor: t.clone(),
                    step: 0,
                    epoch: 0.0,
                    progress: None,
                },
                Checkpoint {
                    tensor: t,
                    step: 1,
                    epoch: 1.0,
                    progress: None,
                },
            ],
            ConfigTag::default(),
        )
        .unwrap();
        save_predictions(&[traj], &path).unwrap();
        let loaded = load_predictions(&path).unwrap();
        assert_eq!(loaded[0].checkpoints.len(), 2);
    }
}
