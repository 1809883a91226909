//! Monte-Carlo driver: every scheme runs on the same channel draw per trial.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use cfee_core::altopt::{run_algorithm1, AlgorithmOptions};
use cfee_core::beam::matched_filter;
use cfee_core::ga::{fitness, run_ga_detailed, GenomeLayout};
use cfee_core::stats::{self, StatsError};
use cfee_core::{sample_scenario, ChannelSet, GaConfig, PhaseBackend, PhaseVector, ScenarioConfig, Solution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Alternating optimization with the BCD phase backend.
    #[serde(rename = "alg1")]
    Alg1,
    /// Alternating optimization with the SDR phase backend.
    #[serde(rename = "alg1-sdr")]
    Alg1Sdr,
    #[serde(rename = "ga")]
    Ga,
    /// Random phases, matched filter at full power.
    #[serde(rename = "random")]
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Alg1, Scheme::Alg1Sdr, Scheme::Ga, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Alg1 => "alg1",
            Scheme::Alg1Sdr => "alg1-sdr",
            Scheme::Ga => "ga",
            Scheme::Random => "random",
        }
    }

    /// Seed stream of the scheme within a trial.
    pub fn stream(self) -> u64 {
        match self {
            Scheme::Alg1 | Scheme::Alg1Sdr => 1,
            Scheme::Ga => 2,
            Scheme::Random => 3,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scheme {s:?}, expected one of alg1, alg1-sdr, ga, random"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed of the channel draw.
    pub seed: u64,
    pub scheme: Scheme,
    /// bit/Joule; zero when the scheme failed.
    pub ee: f64,
    /// bit/s/Hz.
    pub rates: Vec<f64>,
    pub feasible: bool,
    pub rates_ok: bool,
    pub power_ok: bool,
    pub failed: bool,
    /// Outer passes (Algorithm 1) or generations (GA).
    pub iterations: usize,
    pub converged: bool,
    /// Wall clock around the scheme call. Never written to record files.
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub scheme: Scheme,
    pub iteration: usize,
    pub ee: f64,
}

/// Distribution of EE over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub failures: usize,
    pub feasible_fraction: f64,
    /// Sorted ascending.
    pub samples: Vec<f64>,
    /// `(ee, probability)`.
    pub cdf: Vec<(f64, f64)>,
    /// 5th percentile: the EE exceeded with probability 0.95.
    pub ee_95_likely: f64,
    pub median_ee: f64,
    pub mean_ee: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_runtime_s: Option<f64>,
}

impl Summary {
    /// `feasible` and `failed` are per-sample flags aligned with `ee`.
    pub fn new(ee: &[f64], feasible: &[bool], failed: &[bool], runtime_s: Option<&[f64]>) -> Result<Self, StatsError> {
        let cdf = stats::cdf_points(ee)?;
        let n = ee.len();
        Ok(Self {
            trials: n,
            failures: failed.iter().filter(|x| **x).count(),
            feasible_fraction: feasible.iter().filter(|x| **x).count() as f64 / n as f64,
            samples: cdf.iter().map(|p| p.0).collect(),
            cdf,
            ee_95_likely: stats::percentile_95_likely(ee)?,
            median_ee: stats::median(ee)?,
            mean_ee: stats::mean(ee)?,
            mean_runtime_s: runtime_s.map(|t| t.iter().sum::<f64>() / t.len().max(1) as f64),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schemes: Vec<SchemeSummary>,
}

impl RunReport {
    pub fn scheme(&self, s: Scheme) -> Option<&Summary> {
        self.schemes.iter().find(|x| x.scheme == s).map(|x| &x.summary)
    }

    /// Aggregates records, schemes in order of first appearance.
    pub fn from_records(records: &[TrialRecord], with_runtime: bool) -> Result<Self, StatsError> {
        let mut order: Vec<Scheme> = Vec::new();
        for r in records {
            if !order.contains(&r.scheme) {
                order.push(r.scheme);
            }
        }
        let schemes = order
            .into_iter()
            .map(|scheme| {
                let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.scheme == scheme).collect();
                let ee: Vec<f64> = rs.iter().map(|r| r.ee).collect();
                let feasible: Vec<bool> = rs.iter().map(|r| r.feasible).collect();
                let failed: Vec<bool> = rs.iter().map(|r| r.failed).collect();
                let runtime: Vec<f64> = rs.iter().map(|r| r.runtime_s).collect();
                let summary = Summary::new(&ee, &feasible, &failed, with_runtime.then_some(runtime.as_slice()))?;
                Ok(SchemeSummary { scheme, summary })
            })
            .collect::<Result<Vec<_>, StatsError>>()?;
        Ok(Self { schemes })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarnessOptions {
    pub algorithm: AlgorithmOptions,
    pub ga: GaConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOutput {
    /// Ordered by trial, then by the requested scheme order.
    pub records: Vec<TrialRecord>,
    pub traces: Vec<TraceRow>,
    pub report: RunReport,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("no schemes requested")]
    NoSchemes,
    #[error(transparent)]
    Config(#[from] cfee_core::ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Random phases and a full-power matched filter.
pub fn random_baseline(channels: &ChannelSet, config: &ScenarioConfig, seed: u64) -> Solution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = PhaseVector::random(channels.num_elements(), &mut rng);
    let w = matched_filter(&channels.effective(&v), config.p_max);
    Solution::evaluate(channels, w, v, config)
}

/// GA with the population scored in parallel.
pub fn run_ga_parallel(channels: &ChannelSet, config: &ScenarioConfig, ga: &GaConfig) -> Result<cfee_core::ga::GaOutcome, cfee_core::ga::GaConfigError> {
    let layout = GenomeLayout::of(channels);
    run_ga_detailed(channels, config, ga, None, &mut |genomes: &[Vec<f64>]| {
        genomes.par_iter().map(|g| fitness(channels, config, &layout, g)).collect()
    })
}

/// Runs one scheme; `seed` drives its random choices.
pub fn run_scheme(scheme: Scheme, channels: &ChannelSet, config: &ScenarioConfig, opts: &HarnessOptions, seed: u64) -> Result<Solution, String> {
    match scheme {
        Scheme::Alg1 | Scheme::Alg1Sdr => {
            let mut a = opts.algorithm.clone();
            a.backend = if scheme == Scheme::Alg1 { PhaseBackend::Bcd } else { PhaseBackend::Sdr };
            Ok(run_algorithm1(channels, config, &a, seed))
        }
        Scheme::Ga => {
            let ga = GaConfig { seed, ..opts.ga.clone() };
            run_ga_parallel(channels, config, &ga).map(|o| o.solution).map_err(|e| e.to_string())
        }
        Scheme::Random => Ok(random_baseline(channels, config, seed)),
    }
}

fn failed_record(trial: usize, seed: u64, scheme: Scheme, k: usize, runtime_s: f64) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        scheme,
        ee: 0.0,
        rates: vec![0.0; k],
        feasible: false,
        rates_ok: false,
        power_ok: false,
        failed: true,
        iterations: 0,
        converged: false,
        runtime_s,
    }
}

fn run_trial(config: &ScenarioConfig, schemes: &[Scheme], trial: usize, master: u64, opts: &HarnessOptions) -> (Vec<TrialRecord>, Vec<TraceRow>) {
    let seed = derive_seed(master, trial as u64);
    let channels = sample_scenario(config, seed).expect("config validated before the sweep");
    let mut records = Vec::with_capacity(schemes.len());
    let mut traces = Vec::new();
    for &scheme in schemes {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            run_scheme(scheme, &channels, config, opts, derive_seed(seed, scheme.stream()))
        }));
        let runtime_s = start.elapsed().as_secs_f64();
        let record = match outcome {
            Ok(Ok(sol)) if sol.ee.is_finite() && sol.ee >= 0.0 => {
                traces.extend(sol.trace.iter().enumerate().map(|(i, &ee)| TraceRow {
                    trial,
                    scheme,
                    iteration: i,
                    ee,
                }));
                TrialRecord {
                    trial,
                    seed,
                    scheme,
                    ee: sol.ee,
                    rates_ok: sol.report.rates_ok(),
                    power_ok: sol.report.power_ok(),
                    feasible: sol.report.feasible,
                    rates: sol.rates,
                    failed: false,
                    iterations: sol.flags.outer_iterations,
                    converged: sol.flags.converged,
                    runtime_s,
                }
            }
            _ => failed_record(trial, seed, scheme, config.num_users, runtime_s),
        };
        records.push(record);
    }
    (records, traces)
}

/// Runs `trials` independent realizations. Trials execute in parallel; the
/// output is ordered by trial index and independent of scheduling.
pub fn run_monte_carlo(
    config: &ScenarioConfig,
    schemes: &[Scheme],
    trials: usize,
    seed: u64,
    opts: &HarnessOptions,
) -> Result<MonteCarloOutput, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    if schemes.is_empty() {
        return Err(HarnessError::NoSchemes);
    }
    config.validate()?;
    let per_trial: Vec<(Vec<TrialRecord>, Vec<TraceRow>)> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(config, schemes, t, seed, opts))
        .collect();
    let mut records = Vec::with_capacity(trials * schemes.len());
    let mut traces = Vec::new();
    for (r, t) in per_trial {
        records.extend(r);
        traces.extend(t);
    }
    let report = RunReport::from_records(&records, true)?;
    Ok(MonteCarloOutput { records, traces, report })
}
