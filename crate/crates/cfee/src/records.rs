//! Output files: trial records, traces, CDF points, timings, reports and
//! single-run solutions.
//!
//! Record files carry no wall-clock data, so a fixed seed reproduces them byte
//! for byte. Runtimes go to a separate timing file.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cfee_core::{FeasibilityReport, Solution};
use serde::{Deserialize, Serialize};

use crate::harness::{RunReport, Scheme, TraceRow, TrialRecord};

const RECORD_HEADER: [&str; 11] = [
    "trial", "seed", "scheme", "ee", "feasible", "rates_ok", "power_ok", "failed", "iterations", "converged", "rates",
];

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.scheme.to_string(),
            r.ee.to_string(),
            r.feasible.to_string(),
            r.rates_ok.to_string(),
            r.power_ok.to_string(),
            r.failed.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            join(&r.rates),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RECORD_HEADER {
        bail!("unexpected record header {:?}", headers);
    }
    let mut out = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let field = |i: usize| row.get(i).ok_or_else(|| anyhow!("line {line}: missing column {}", RECORD_HEADER[i]));
        let ctx = |i: usize| format!("line {line}: column {}", RECORD_HEADER[i]);
        let rates_text = field(10)?;
        let rates = if rates_text.is_empty() {
            Vec::new()
        } else {
            rates_text
                .split(';')
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| ctx(10))?
        };
        out.push(TrialRecord {
            trial: field(0)?.parse().with_context(|| ctx(0))?,
            seed: field(1)?.parse().with_context(|| ctx(1))?,
            scheme: field(2)?.parse::<Scheme>().map_err(|e| anyhow!("{}: {e}", ctx(2)))?,
            ee: field(3)?.parse().with_context(|| ctx(3))?,
            feasible: field(4)?.parse().with_context(|| ctx(4))?,
            rates_ok: field(5)?.parse().with_context(|| ctx(5))?,
            power_ok: field(6)?.parse().with_context(|| ctx(6))?,
            failed: field(7)?.parse().with_context(|| ctx(7))?,
            iterations: field(8)?.parse().with_context(|| ctx(8))?,
            converged: field(9)?.parse().with_context(|| ctx(9))?,
            rates,
            runtime_s: 0.0,
        });
    }
    Ok(out)
}

pub fn write_timing<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "scheme", "runtime_s"])?;
    for r in records {
        w.write_record([r.trial.to_string(), r.scheme.to_string(), r.runtime_s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Fills `runtime_s` of matching `(trial, scheme)` records.
pub fn apply_timing<R: Read>(input: R, records: &mut [TrialRecord]) -> Result<()> {
    let mut rd = csv::Reader::from_reader(input);
    for row in rd.deserialize::<(usize, String, f64)>() {
        let (trial, scheme, t) = row?;
        let scheme: Scheme = scheme.parse().map_err(|e: String| anyhow!(e))?;
        for r in records.iter_mut().filter(|r| r.trial == trial && r.scheme == scheme) {
            r.runtime_s = t;
        }
    }
    Ok(())
}

pub fn write_traces<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "scheme", "iteration", "ee"])?;
    for r in rows {
        w.write_record([r.trial.to_string(), r.scheme.to_string(), r.iteration.to_string(), r.ee.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf<W: Write>(out: W, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "ee", "probability"])?;
    for s in &report.schemes {
        for (ee, p) in &s.summary.cdf {
            w.write_record([s.scheme.to_string(), ee.to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Feasibility report in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRecord {
    pub feasible: bool,
    pub rate_slack: Vec<f64>,
    pub power_slack: Vec<f64>,
    pub modulus_deviation: f64,
    pub rate_shortfall: f64,
    pub power_excess: f64,
}

impl From<&FeasibilityReport> for FeasibilityRecord {
    fn from(r: &FeasibilityReport) -> Self {
        Self {
            feasible: r.feasible,
            rate_slack: r.rate_slack.clone(),
            power_slack: r.power_slack.clone(),
            modulus_deviation: r.modulus_deviation,
            rate_shortfall: r.rate_shortfall(),
            power_excess: r.power_excess(),
        }
    }
}

/// One optimized instance as written by `optimize` and `ga`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub scheme: Scheme,
    pub seed: u64,
    pub ee: f64,
    pub rates: Vec<f64>,
    pub feasibility: FeasibilityRecord,
    pub iterations: usize,
    pub converged: bool,
    pub theta: Vec<f64>,
    /// Same layout as the predictions format.
    #[serde(rename = "W_re_im")]
    pub w_re_im: Vec<f64>,
}

impl SolutionFile {
    pub fn new(scheme: Scheme, seed: u64, sol: &Solution) -> Self {
        Self {
            scheme,
            seed,
            ee: sol.ee,
            rates: sol.rates.clone(),
            feasibility: (&sol.report).into(),
            iterations: sol.flags.outer_iterations,
            converged: sol.flags.converged,
            theta: sol.v.angles().to_vec(),
            w_re_im: sol.w.to_genes(),
        }
    }
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(std::io::BufReader::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn out_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir.to_path_buf())
}
