//! Externally predicted solutions and their evaluation.
//!
//! One JSON object per line: `{"sample_index", "theta", "W_re_im"}`. `theta`
//! holds the `I` phases in radians (any real value, taken modulo 2π).
//! `W_re_im` holds `2MK` reals: the real parts of `W` in row-major order
//! (`m * K + k`), followed by the imaginary parts in the same order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cfee_core::beam::project_row_power;
use cfee_core::metrics::penalized_objective;
use cfee_core::stats::StatsError;
use cfee_core::{BeamMatrix, Evaluation, PhaseVector, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::harness::Summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_index: usize,
    pub theta: Vec<f64>,
    #[serde(rename = "W_re_im", alias = "w_re_im")]
    pub w_re_im: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("sample {sample_index}: {message}")]
    Sample { sample_index: usize, message: String },
    #[error("dataset has {dataset} samples but {predictions} predictions were given")]
    Length { dataset: usize, predictions: usize },
    #[error("configuration has M={m}, K={k}, I={i}; dataset has M={dm}, K={dk}, I={di}")]
    Dimensions {
        m: usize,
        k: usize,
        i: usize,
        dm: usize,
        dk: usize,
        di: usize,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl PredictionRecord {
    pub fn new(sample_index: usize, w: &BeamMatrix, v: &PhaseVector) -> Self {
        Self {
            sample_index,
            theta: v.angles().to_vec(),
            w_re_im: w.to_genes(),
        }
    }

    pub fn decode(&self, num_aps: usize, num_users: usize, num_elements: usize) -> Result<(BeamMatrix, PhaseVector), PredictionError> {
        let bad = |message: String| PredictionError::Sample {
            sample_index: self.sample_index,
            message,
        };
        if self.theta.len() != num_elements {
            return Err(bad(format!("theta has {} entries, expected {num_elements}", self.theta.len())));
        }
        let genes = 2 * num_aps * num_users;
        if self.w_re_im.len() != genes {
            return Err(bad(format!("W_re_im has {} entries, expected {genes}", self.w_re_im.len())));
        }
        if self.theta.iter().chain(&self.w_re_im).any(|x| !x.is_finite()) {
            return Err(bad("non-finite value".to_string()));
        }
        Ok((
            BeamMatrix::from_genes(num_aps, num_users, &self.w_re_im),
            PhaseVector::from_angles(self.theta.iter().copied()),
        ))
    }
}

pub fn write_predictions<W: Write>(mut out: W, records: &[PredictionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), PredictionError> {
    let io = |source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_predictions(BufWriter::new(file), records).map_err(io)
}

pub fn parse_predictions<R: BufRead>(reader: R, path: &Path) -> Result<Vec<PredictionRecord>, PredictionError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| PredictionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| PredictionError::Json {
            path: path.to_path_buf(),
            line: n + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PredictionError> {
    let file = File::open(path).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_predictions(BufReader::new(file), path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub ee: f64,
    pub rates: Vec<f64>,
    pub penalized: f64,
    pub feasible: bool,
    pub rates_ok: bool,
    pub power_ok: bool,
}

impl Score {
    fn of(eval: &Evaluation, penalized: f64) -> Self {
        Self {
            ee: eval.ee,
            rates: eval.rates.clone(),
            penalized,
            feasible: eval.report.feasible,
            rates_ok: eval.report.rates_ok(),
            power_ok: eval.report.power_ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_index: usize,
    /// `W` exactly as predicted.
    pub raw: Score,
    /// Rows of `W` scaled onto the per-AP power budget first.
    pub projected: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub scores: Vec<SampleScore>,
    pub raw: Summary,
    pub projected: Summary,
}

fn summary(scores: &[&Score]) -> Result<Summary, StatsError> {
    let ee: Vec<f64> = scores.iter().map(|s| s.ee).collect();
    let feasible: Vec<bool> = scores.iter().map(|s| s.feasible).collect();
    Summary::new(&ee, &feasible, &vec![false; scores.len()], None)
}

/// Scores every prediction against its dataset sample with the core metrics.
///
/// Each dataset sample needs exactly one prediction; the order of the
/// predictions file does not matter.
pub fn evaluate_predictions(dataset: &Dataset, predictions: &[PredictionRecord], config: &ScenarioConfig) -> Result<PredictionReport, PredictionError> {
    let h = &dataset.header;
    if (config.num_aps, config.num_users, config.total_elements()) != (h.num_aps, h.num_users, h.num_elements) {
        return Err(PredictionError::Dimensions {
            m: config.num_aps,
            k: config.num_users,
            i: config.total_elements(),
            dm: h.num_aps,
            dk: h.num_users,
            di: h.num_elements,
        });
    }
    if predictions.len() != dataset.samples.len() {
        return Err(PredictionError::Length {
            dataset: dataset.samples.len(),
            predictions: predictions.len(),
        });
    }
    let mut slots: Vec<Option<&PredictionRecord>> = vec![None; dataset.samples.len()];
    for p in predictions {
        let slot = slots.get_mut(p.sample_index).ok_or_else(|| PredictionError::Sample {
            sample_index: p.sample_index,
            message: format!("no such sample, dataset has {}", dataset.samples.len()),
        })?;
        if slot.replace(p).is_some() {
            return Err(PredictionError::Sample {
                sample_index: p.sample_index,
                message: "duplicate prediction".to_string(),
            });
        }
    }
    let mut scores = Vec::with_capacity(slots.len());
    for (channels, p) in dataset.samples.iter().zip(slots) {
        let p = p.expect("lengths match and indices are unique");
        let (w, v) = p.decode(h.num_aps, h.num_users, h.num_elements)?;
        let raw = Evaluation::new(channels, &v, &w, config);
        let wp = project_row_power(&w, config.p_max);
        let projected = Evaluation::new(channels, &v, &wp, config);
        scores.push(SampleScore {
            sample_index: p.sample_index,
            raw: Score::of(&raw, penalized_objective(channels, &v, &w, config)),
            projected: Score::of(&projected, penalized_objective(channels, &v, &wp, config)),
        });
    }
    let raw = summary(&scores.iter().map(|s| &s.raw).collect::<Vec<_>>())?;
    let projected = summary(&scores.iter().map(|s| &s.projected).collect::<Vec<_>>())?;
    Ok(PredictionReport { scores, raw, projected })
}
