//! Channel datasets: one JSON header line, then one JSON record per sample.
//!
//! Records hold `g_au[k][m]` (entries of the row `g^H_{AU,k}`) and
//! `g_aiu[k][i][m]` (the `I x M` cascaded matrix of user `k`, row-major), every
//! complex number as a `[re, im]` pair. Floats are written in shortest
//! round-trip form, so reading a file back reproduces the arrays bitwise.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cfee_core::{sample_scenario, CMatrix, ChannelSet, ScenarioConfig, C64};
use serde::{Deserialize, Serialize};

use crate::config_file::{ConfigFile, ConfigFileError};
use crate::seeds::derive_seed;

pub const DATASET_FORMAT: &str = "cfee-channels";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
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
    #[error("{path}: bad header: {message}")]
    Header { path: PathBuf, message: String },
    #[error("{path}: sample {sample_index}: {message}")]
    Record {
        path: PathBuf,
        sample_index: usize,
        message: String,
    },
    #[error("{path}: header announces {expected} samples, found {found}")]
    Count {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("count must be at least 1")]
    EmptyRequest,
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("sampling failed: {0}")]
    Sampling(#[from] cfee_core::ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub config: ConfigFile,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_irs: usize,
    pub elements_per_irs: usize,
    pub num_elements: usize,
    pub count: usize,
    pub seed: u64,
    /// `2MIK + 2MK`.
    pub feature_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub sample_index: usize,
    pub g_au: Vec<Vec<[f64; 2]>>,
    pub g_aiu: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<ChannelSet>,
}

/// Real inputs per sample seen by a learner: real and imaginary parts of every
/// cascaded and direct channel entry.
pub fn feature_count(num_aps: usize, num_users: usize, num_elements: usize) -> usize {
    2 * num_aps * num_elements * num_users + 2 * num_aps * num_users
}

/// Seed of sample `index` in a dataset drawn with `master`.
pub fn sample_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| pair(m[(r, c)])).collect()).collect()
}

fn matrix(rows: &[Vec<[f64; 2]>], nrows: usize, ncols: usize) -> Result<CMatrix, String> {
    if rows.len() != nrows {
        return Err(format!("expected {nrows} rows, found {}", rows.len()));
    }
    let mut out = CMatrix::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(format!("row {r} has {} entries, expected {ncols}", row.len()));
        }
        for (c, [re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(format!("non-finite entry at ({r}, {c})"));
            }
            out[(r, c)] = C64::new(*re, *im);
        }
    }
    Ok(out)
}

impl ChannelRecord {
    pub fn from_channels(sample_index: usize, channels: &ChannelSet) -> Self {
        Self {
            sample_index,
            g_au: rows(&channels.direct),
            g_aiu: channels.cascaded.iter().map(rows).collect(),
        }
    }

    pub fn to_channels(&self, header: &DatasetHeader) -> Result<ChannelSet, String> {
        let (m, k, i) = (header.num_aps, header.num_users, header.num_elements);
        let direct = matrix(&self.g_au, k, m).map_err(|e| format!("g_au: {e}"))?;
        if self.g_aiu.len() != k {
            return Err(format!("g_aiu: expected {k} users, found {}", self.g_aiu.len()));
        }
        let cascaded = self
            .g_aiu
            .iter()
            .enumerate()
            .map(|(user, g)| matrix(g, i, m).map_err(|e| format!("g_aiu[{user}]: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        ChannelSet::from_cascaded(direct, cascaded).map_err(|e| e.to_string())
    }
}

impl DatasetHeader {
    pub fn new(config: &ScenarioConfig, count: usize, seed: u64) -> Self {
        let num_elements = config.total_elements();
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            config: ConfigFile::from_scenario(config),
            num_aps: config.num_aps,
            num_users: config.num_users,
            num_irs: config.num_irs,
            elements_per_irs: config.elements_per_irs,
            num_elements,
            count,
            seed,
            feature_count: feature_count(config.num_aps, config.num_users, num_elements),
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.format != DATASET_FORMAT {
            return Err(format!("format {:?}, expected {DATASET_FORMAT:?}", self.format));
        }
        if self.version != DATASET_VERSION {
            return Err(format!("unsupported version {}", self.version));
        }
        if self.num_elements != self.num_irs * self.elements_per_irs {
            return Err("num_elements differs from num_irs * elements_per_irs".to_string());
        }
        if self.feature_count != feature_count(self.num_aps, self.num_users, self.num_elements) {
            return Err(format!("feature_count {} disagrees with the dimensions", self.feature_count));
        }
        Ok(())
    }
}

/// Writes a header and the given samples.
pub fn write_dataset<W: Write>(mut out: W, header: &DatasetHeader, samples: &[ChannelSet]) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for (idx, s) in samples.iter().enumerate() {
        serde_json::to_writer(&mut out, &ChannelRecord::from_channels(idx, s))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Draws `count` independent realizations (fresh geometry and fading each)
/// and writes them to `path`.
pub fn export_dataset(config: &ScenarioConfig, count: usize, seed: u64, path: &Path) -> Result<DatasetHeader, DatasetError> {
    if count == 0 {
        return Err(DatasetError::EmptyRequest);
    }
    let samples = (0..count)
        .map(|i| sample_scenario(config, sample_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let header = DatasetHeader::new(config, count, seed);
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_dataset(BufWriter::new(file), &header, &samples).map_err(io)?;
    Ok(header)
}

pub fn parse_dataset<R: BufRead>(reader: R, path: &Path) -> Result<Dataset, DatasetError> {
    let path_buf = path.to_path_buf();
    let mut lines = reader.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let io = |source| DatasetError::Io {
        path: path_buf.clone(),
        source,
    };
    let header: DatasetHeader = match lines.next() {
        None => {
            return Err(DatasetError::Header {
                path: path_buf.clone(),
                message: "empty file".to_string(),
            })
        }
        Some((n, line)) => serde_json::from_str(&line.map_err(io)?).map_err(|source| DatasetError::Json {
            path: path_buf.clone(),
            line: n + 1,
            source,
        })?,
    };
    header.check().map_err(|message| DatasetError::Header {
        path: path_buf.clone(),
        message,
    })?;
    let mut samples = Vec::with_capacity(header.count);
    for (n, line) in lines {
        let record: ChannelRecord = serde_json::from_str(&line.map_err(io)?).map_err(|source| DatasetError::Json {
            path: path_buf.clone(),
            line: n + 1,
            source,
        })?;
        let record_error = |message| DatasetError::Record {
            path: path_buf.clone(),
            sample_index: record.sample_index,
            message,
        };
        if record.sample_index != samples.len() {
            return Err(record_error(format!("out of order, expected index {}", samples.len())));
        }
        samples.push(record.to_channels(&header).map_err(record_error)?);
    }
    if samples.len() != header.count {
        return Err(DatasetError::Count {
            path: path_buf,
            expected: header.count,
            found: samples.len(),
        });
    }
    Ok(Dataset { header, samples })
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(BufReader::new(file), path)
}

impl Dataset {
    /// Scenario echoed in the header.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigFileError> {
        self.header.config.scenario()
    }
}
