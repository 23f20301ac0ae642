//! Uniformly sampled state sequences: noise injection, z-score
//! normalization, and the CSV + JSON-sidecar disk format.

use super::SystemSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{stream, Stream};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Per-dimension normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStat {
    pub mean: f64,
    pub std: f64,
}

/// A uniformly sampled state sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Mat,
    pub dt: f64,
    pub t0: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub normalization: Option<Vec<NormStat>>,
}

/// Sidecar metadata written next to a trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub dt: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub system: String,
    pub params: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Mat, dt: f64) -> Self {
        Trajectory {
            states,
            dt,
            t0: 0.0,
            seed: 0,
            noise_sigma: 0.0,
            normalization: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of samples (rows).
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.states.row(i)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Argument("trajectory needs at least 2 samples".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Argument("dt must be positive".into()));
        }
        if !crate::linalg::all_finite(self.states.data()) {
            return Err(Error::Numeric("trajectory contains non-finite values".into()));
        }
        if let Some(stats) = &self.normalization {
            if stats.len() != self.dim() {
                return Err(Error::Argument("normalization length mismatch".into()));
            }
            if stats.iter().any(|s| !(s.std > 0.0)) {
                return Err(Error::Argument(
                    "normalization stds must be strictly positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-dimension mean.
    pub fn mean(&self) -> Vec<f64> {
        let (m, d) = (self.len(), self.dim());
        let mut mu = vec![0.0; d];
        for i in 0..m {
            for (j, v) in self.row(i).iter().enumerate() {
                mu[j] += v;
            }
        }
        mu.iter_mut().for_each(|v| *v /= m as f64);
        mu
    }

    /// Per-dimension population variance.
    pub fn variance(&self) -> Vec<f64> {
        let (m, d) = (self.len(), self.dim());
        let mu = self.mean();
        let mut var = vec![0.0; d];
        for i in 0..m {
            for (j, v) in self.row(i).iter().enumerate() {
                let c = v - mu[j];
                var[j] += c * c;
            }
        }
        var.iter_mut().for_each(|v| *v /= m as f64);
        var
    }

    /// Sum of per-dimension variances (trace of the empirical covariance).
    pub fn total_variance(&self) -> f64 {
        self.variance().iter().sum()
    }

    /// Drops the first `fraction` of rows (transient removal for training
    /// data, so samples approximate the stationary distribution).
    pub fn drop_transient(&self, fraction: f64) -> Trajectory {
        assert!((0.0..1.0).contains(&fraction));
        let skip = (self.len() as f64 * fraction).floor() as usize;
        let keep = self.len() - skip;
        let mut states = Mat::zeros(keep, self.dim());
        for i in 0..keep {
            states.row_mut(i).copy_from_slice(self.row(skip + i));
        }
        Trajectory {
            states,
            dt: self.dt,
            t0: self.t0 + skip as f64 * self.dt,
            seed: self.seed,
            noise_sigma: self.noise_sigma,
            normalization: self.normalization.clone(),
        }
    }

    /// CSV with header `t,x0,...,x{D-1}` and 17-significant-digit floats
    /// (exact f64 round-trip).
    pub fn to_csv_string(&self) -> String {
        let d = self.dim();
        let mut out = String::from("t");
        for j in 0..d {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for i in 0..self.len() {
            let t = self.t0 + i as f64 * self.dt;
            out.push_str(&format!("{t:.16e}"));
            for v in self.row(i) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }

    pub fn meta(&self, spec: &SystemSpec) -> TrajectoryMeta {
        TrajectoryMeta {
            dt: self.dt,
            seed: self.seed,
            noise_sigma: self.noise_sigma,
            system: spec.kind.name().into(),
            params: spec.params.clone(),
        }
    }

    /// Parses the CSV format of [`Trajectory::to_csv_string`], validating
    /// the header, rectangularity, finiteness, and uniform time spacing
    /// (1e-9 relative). Row numbers in errors are 1-based; 0 is the header.
    pub fn from_csv_string(text: &str) -> Result<Trajectory> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Ingestion { row: 0, message: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.is_empty() || cols[0] != "t" {
            return Err(Error::Ingestion {
                row: 0,
                message: "header must start with 't'".into(),
            });
        }
        let d = cols.len() - 1;
        if d == 0 {
            return Err(Error::Ingestion {
                row: 0,
                message: "no state columns".into(),
            });
        }
        for (j, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{j}") {
                return Err(Error::Ingestion {
                    row: 0,
                    message: format!("expected column 'x{j}', found '{c}'"),
                });
            }
        }
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Ingestion {
                    row: lineno,
                    message: format!("expected {} fields, found {}", d + 1, fields.len()),
                });
            }
            for (k, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::Ingestion {
                    row: lineno,
                    message: format!("unparseable number '{f}'"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Ingestion {
                        row: lineno,
                        message: format!("non-finite value in column {k}"),
                    });
                }
                if k == 0 {
                    times.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        if times.len() < 2 {
            return Err(Error::Ingestion {
                row: times.len(),
                message: "need at least 2 samples".into(),
            });
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Ingestion {
                row: 2,
                message: "time must be strictly increasing".into(),
            });
        }
        for i in 1..times.len() {
            let gap = times[i] - times[i - 1];
            if ((gap - dt) / dt).abs() > 1e-9 {
                return Err(Error::Ingestion {
                    row: i + 1,
                    message: format!("non-uniform spacing: gap {gap} vs dt {dt}"),
                });
            }
        }
        let m = times.len();
        let mut traj = Trajectory::new(Mat::from_vec(m, d, data), dt);
        traj.t0 = times[0];
        Ok(traj)
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory> {
        let text = std::fs::read_to_string(path)?;
        Trajectory::from_csv_string(&text)
    }
}

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Adds i.i.d. Gaussian observation noise N(0, σ²) to every entry.
/// Deterministic given `seed`; σ = 0 returns a bitwise-equal copy.
pub fn add_observation_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Trajectory {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut out = traj.clone();
    out.noise_sigma = sigma;
    if sigma == 0.0 {
        return out;
    }
    out.seed = seed;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = stream(seed, Stream::Noise);
    for v in out.states.data_mut() {
        *v += normal.sample(&mut rng);
    }
    out
}

/// Per-dimension z-score; the (mean, std) pairs are stored so
/// [`denormalize`] can undo it.
pub fn normalize(traj: &Trajectory) -> Result<Trajectory> {
    if traj.normalization.is_some() {
        return Err(Error::Argument("trajectory is already normalized".into()));
    }
    let mu = traj.mean();
    let var = traj.variance();
    let mut stats = Vec::with_capacity(traj.dim());
    for (dim, (&m, &v)) in mu.iter().zip(&var).enumerate() {
        if v <= 0.0 {
            return Err(Error::DegenerateData { dim });
        }
        stats.push(NormStat { mean: m, std: v.sqrt() });
    }
    let mut out = traj.clone();
    let d = out.dim();
    for i in 0..out.len() {
        let row = out.states.row_mut(i);
        for j in 0..d {
            row[j] = (row[j] - stats[j].mean) / stats[j].std;
        }
    }
    out.normalization = Some(stats);
    Ok(out)
}

/// Undoes [`normalize`] using the stored statistics.
pub fn denormalize(traj: &Trajectory) -> Trajectory {
    let Some(stats) = &traj.normalization else {
        return traj.clone();
    };
    let mut out = traj.clone();
    let d = out.dim();
    for i in 0..out.len() {
        let row = out.states.row_mut(i);
        for j in 0..d {
            row[j] = row[j] * stats[j].std + stats[j].mean;
        }
    }
    out.normalization = None;
    out
}
