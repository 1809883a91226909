use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cfee::config_file::ConfigFile;
use cfee::dataset::{export_dataset, read_dataset};
use cfee::harness::{run_ga_parallel, run_monte_carlo, run_scheme, HarnessOptions, RunReport, Scheme};
use cfee::predictions::{evaluate_predictions, read_predictions, save_predictions, PredictionRecord};
use cfee::records::{self, SolutionFile};
use cfee::seeds::derive_seed;
use cfee_core::{sample_scenario, GaConfig, PhaseBackend, ScenarioConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "cfee", version, about = "Energy-efficiency optimization for IRS-aided cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the desk preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Bcd,
    Sdr,
}

impl From<Backend> for PhaseBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Bcd => PhaseBackend::Bcd,
            Backend::Sdr => PhaseBackend::Sdr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep over independent channel draws.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Comma-separated list of alg1, alg1-sdr, ga, random.
        #[arg(long, value_delimiter = ',', default_value = "alg1,ga,random")]
        scheme: Vec<Scheme>,
        /// Phase backend used by `alg1`.
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Algorithm 1 on one channel draw, or on every sample of a dataset.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        /// Optimize every sample of this dataset and write predictions.jsonl.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Genetic-algorithm baseline on one channel draw.
    Ga {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a channel dataset for external learners.
    ExportDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores predicted (W, theta) pairs against a dataset.
    EvalPredictions {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Overrides the configuration echoed in the dataset header.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recomputes CDF points and percentiles from a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        timing: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &Option<PathBuf>) -> Result<ConfigFile> {
    Ok(match config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    })
}

fn harness_options(file: &ConfigFile, backend: Option<Backend>) -> Result<HarnessOptions> {
    let mut algorithm = file.algorithm_options()?;
    if let Some(b) = backend {
        algorithm.backend = b.into();
    }
    Ok(HarnessOptions {
        algorithm,
        ga: file.ga_config(),
    })
}

/// Seeds used for trial 0 of `simulate`, so a single run reproduces it.
fn single_instance_seeds(master: u64, scheme_stream: u64) -> (u64, u64) {
    let channel = derive_seed(master, 0);
    (channel, derive_seed(channel, scheme_stream))
}

fn simulate(common: Common, trials: usize, schemes: Vec<Scheme>, backend: Option<Backend>, out: PathBuf) -> Result<()> {
    let file = load(&common.config)?;
    let config = file.scenario()?;
    let opts = harness_options(&file, backend)?;
    let mut list: Vec<Scheme> = Vec::new();
    for s in schemes {
        let s = match (s, opts.algorithm.backend) {
            (Scheme::Alg1, PhaseBackend::Sdr) => Scheme::Alg1Sdr,
            (s, _) => s,
        };
        if !list.contains(&s) {
            list.push(s);
        }
    }
    let result = run_monte_carlo(&config, &list, trials, common.seed, &opts)?;
    let dir = records::out_dir(&out)?;
    records::write_records(records::create(&dir.join("records.csv"))?, &result.records)?;
    records::write_traces(records::create(&dir.join("traces.csv"))?, &result.traces)?;
    records::write_cdf(records::create(&dir.join("cdf.csv"))?, &result.report)?;
    records::write_timing(records::create(&dir.join("timing.csv"))?, &result.records)?;
    records::write_json(&dir.join("report.json"), &result.report)?;
    print_report(&result.report);
    Ok(())
}

fn print_report(report: &RunReport) {
    for s in &report.schemes {
        let r = &s.summary;
        println!(
            "{:<9} trials {:>4}  median {:.4e}  95%-likely {:.4e}  mean {:.4e}  feasible {:.2}  failures {}",
            s.scheme.name(),
            r.trials,
            r.median_ee,
            r.ee_95_likely,
            r.mean_ee,
            r.feasible_fraction,
            r.failures
        );
    }
}

fn optimize(common: Common, backend: Option<Backend>, dataset: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let file = load(&common.config)?;
    let opts = harness_options(&file, backend)?;
    let scheme = match opts.algorithm.backend {
        PhaseBackend::Bcd => Scheme::Alg1,
        PhaseBackend::Sdr => Scheme::Alg1Sdr,
    };
    let dir = records::out_dir(&out)?;
    if let Some(path) = dataset {
        let data = read_dataset(&path)?;
        let config = match &common.config {
            Some(_) => file.scenario()?,
            None => data.scenario()?,
        };
        let solutions: Vec<_> = data
            .samples
            .par_iter()
            .enumerate()
            .map(|(i, ch)| run_scheme(scheme, ch, &config, &opts, derive_seed(common.seed, i as u64)))
            .collect::<std::result::Result<_, _>>()
            .map_err(anyhow::Error::msg)?;
        let preds: Vec<PredictionRecord> = solutions.iter().enumerate().map(|(i, s)| PredictionRecord::new(i, &s.w, &s.v)).collect();
        save_predictions(&dir.join("predictions.jsonl"), &preds)?;
        let mut w = csv::Writer::from_writer(records::create(&dir.join("solutions.csv"))?);
        w.write_record(["sample_index", "ee", "feasible", "iterations", "converged"])?;
        for (i, s) in solutions.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.ee.to_string(),
                s.report.feasible.to_string(),
                s.flags.outer_iterations.to_string(),
                s.flags.converged.to_string(),
            ])?;
        }
        w.flush()?;
        println!("optimized {} samples", solutions.len());
        return Ok(());
    }
    let config = file.scenario()?;
    let (channel_seed, scheme_seed) = single_instance_seeds(common.seed, scheme.stream());
    let channels = sample_scenario(&config, channel_seed)?;
    let start = Instant::now();
    let sol = run_scheme(scheme, &channels, &config, &opts, scheme_seed).map_err(anyhow::Error::msg)?;
    let elapsed = start.elapsed().as_secs_f64();
    records::write_json(&dir.join("solution.json"), &SolutionFile::new(scheme, channel_seed, &sol))?;
    let mut w = csv::Writer::from_writer(records::create(&dir.join("trace.csv"))?);
    w.write_record(["iteration", "ee"])?;
    for (t, ee) in sol.trace.iter().enumerate() {
        w.write_record([(t + 1).to_string(), ee.to_string()])?;
    }
    w.flush()?;
    print_solution(scheme, &sol, elapsed);
    Ok(())
}

fn print_solution(scheme: Scheme, sol: &cfee_core::Solution, elapsed: f64) {
    println!(
        "{}: ee {:.6e} bit/J  feasible {}  iterations {}  converged {}  ({elapsed:.3} s)",
        scheme.name(),
        sol.ee,
        sol.report.feasible,
        sol.flags.outer_iterations,
        sol.flags.converged
    );
    let rates: Vec<String> = sol.rates.iter().map(|r| format!("{r:.4}")).collect();
    println!("rates [{}] bit/s/Hz", rates.join(", "));
}

fn ga(common: Common, out: PathBuf) -> Result<()> {
    let file = load(&common.config)?;
    let config: ScenarioConfig = file.scenario()?;
    let (channel_seed, scheme_seed) = single_instance_seeds(common.seed, Scheme::Ga.stream());
    let channels = sample_scenario(&config, channel_seed)?;
    let params = GaConfig {
        seed: scheme_seed,
        ..file.ga_config()
    };
    let start = Instant::now();
    let outcome = run_ga_parallel(&channels, &config, &params)?;
    let elapsed = start.elapsed().as_secs_f64();
    let dir = records::out_dir(&out)?;
    records::write_json(&dir.join("solution.json"), &SolutionFile::new(Scheme::Ga, channel_seed, &outcome.solution))?;
    let mut w = csv::Writer::from_writer(records::create(&dir.join("generations.csv"))?);
    w.write_record(["generation", "best", "mean"])?;
    for g in &outcome.history {
        w.write_record([g.generation.to_string(), g.best.to_string(), g.mean.to_string()])?;
    }
    w.flush()?;
    print_solution(Scheme::Ga, &outcome.solution, elapsed);
    Ok(())
}

fn export(common: Common, count: usize, out: PathBuf) -> Result<()> {
    let config = load(&common.config)?.scenario()?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        records::out_dir(parent)?;
    }
    let header = export_dataset(&config, count, common.seed, &out)?;
    println!(
        "wrote {} samples to {} (M={}, K={}, I={}, {} features)",
        header.count,
        out.display(),
        header.num_aps,
        header.num_users,
        header.num_elements,
        header.feature_count
    );
    Ok(())
}

fn eval(dataset: PathBuf, predictions: PathBuf, config: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let data = read_dataset(&dataset)?;
    let scenario = match &config {
        Some(p) => ConfigFile::load(p)?.scenario()?,
        None => data.scenario().context("dataset header configuration")?,
    };
    let preds = read_predictions(&predictions)?;
    let report = evaluate_predictions(&data, &preds, &scenario)?;
    let dir = records::out_dir(&out)?;
    let mut w = csv::Writer::from_writer(records::create(&dir.join("scores.csv"))?);
    w.write_record(["sample_index", "ee", "feasible", "penalized", "ee_projected", "feasible_projected", "penalized_projected"])?;
    for s in &report.scores {
        w.write_record([
            s.sample_index.to_string(),
            s.raw.ee.to_string(),
            s.raw.feasible.to_string(),
            s.raw.penalized.to_string(),
            s.projected.ee.to_string(),
            s.projected.feasible.to_string(),
            s.projected.penalized.to_string(),
        ])?;
    }
    w.flush()?;
    records::write_json(&dir.join("report.json"), &report)?;
    for (name, s) in [("raw", &report.raw), ("projected", &report.projected)] {
        println!(
            "{name:<9} samples {:>5}  mean {:.4e}  median {:.4e}  95%-likely {:.4e}  feasible {:.3}",
            s.trials, s.mean_ee, s.median_ee, s.ee_95_likely, s.feasible_fraction
        );
    }
    Ok(())
}

fn report(records_path: PathBuf, timing: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let mut recs = records::read_records(records::open(&records_path)?).with_context(|| records_path.display().to_string())?;
    if recs.is_empty() {
        bail!("{} holds no records", records_path.display());
    }
    if let Some(t) = &timing {
        records::apply_timing(records::open(t)?, &mut recs).with_context(|| t.display().to_string())?;
    }
    let rep = RunReport::from_records(&recs, timing.is_some())?;
    let dir = records::out_dir(&out)?;
    records::write_json(&dir.join("report.json"), &rep)?;
    records::write_cdf(records::create(&dir.join("cdf.csv"))?, &rep)?;
    print_report(&rep);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            trials,
            scheme,
            backend,
            out,
        } => simulate(common, trials, scheme, backend, out),
        Command::Optimize {
            common,
            backend,
            dataset,
            out,
        } => optimize(common, backend, dataset, out),
        Command::Ga { common, out } => ga(common, out),
        Command::ExportDataset { common, count, out } => export(common, count, out),
        Command::EvalPredictions {
            dataset,
            predictions,
            config,
            out,
        } => eval(dataset, predictions, config, out),
        Command::Report { records, timing, out } => report(records, timing, out),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
