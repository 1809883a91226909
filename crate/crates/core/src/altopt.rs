//! Alternating optimization: beamforming for fixed phases, then phases for
//! fixed beamforming, until EE stops improving or `t_max` passes are spent.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beam::{matched_filter, optimize_beamforming, project_row_power, BeamSolverOptions};
use crate::channel::{ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::metrics::{BeamMatrix, Evaluation, SolverFlags, Solution};
use crate::phase::{optimize_phases, PhaseBackend, PhaseOptions};

/// Starting point of the outer loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitPolicy {
    /// Phases uniform in `[0, 2π)` drawn from the run seed, matched-filter `W`.
    #[default]
    RandomPhases,
    /// All phases zero, matched-filter `W`.
    ZeroPhases,
    /// Caller-supplied point; `W` is projected onto the power budget.
    Given { w: BeamMatrix, v: PhaseVector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOptions {
    /// Maximum outer iterations, at least 1.
    pub t_max: usize,
    /// Relative EE gain below which the outer loop stops.
    pub ee_tol: f64,
    pub beam: BeamSolverOptions,
    pub phase: PhaseOptions,
    pub backend: PhaseBackend,
    pub init: InitPolicy,
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        Self {
            t_max: 30,
            ee_tol: 1e-4,
            beam: BeamSolverOptions::default(),
            phase: PhaseOptions::default(),
            backend: PhaseBackend::Bcd,
            init: InitPolicy::default(),
        }
    }
}

/// Initial `(W, v)` for a policy.
pub fn initial_point(channels: &ChannelSet, config: &ScenarioConfig, init: &InitPolicy, seed: u64) -> (BeamMatrix, PhaseVector) {
    let n = channels.num_elements();
    match init {
        InitPolicy::Given { w, v } => (project_row_power(w, config.p_max), v.clone()),
        policy => {
            let v = if *policy == InitPolicy::ZeroPhases {
                PhaseVector::zeros(n)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                PhaseVector::random(n, &mut rng)
            };
            let w = matched_filter(&channels.effective(&v), config.p_max);
            (w, v)
        }
    }
}

/// Outer acceptance rule: feasible beats infeasible, otherwise higher EE.
/// Returns the relative EE gain, infinite when feasibility is first reached.
fn outer_gain(candidate: &Evaluation, incumbent: &Evaluation) -> Option<f64> {
    match (candidate.report.feasible, incumbent.report.feasible) {
        (true, false) => Some(f64::INFINITY),
        (false, true) => None,
        _ if candidate.ee > incumbent.ee => Some((candidate.ee - incumbent.ee) / candidate.ee),
        _ => None,
    }
}

/// Runs the alternating loop and returns the best iterate.
///
/// The first outer pass is always taken; later passes are kept only if they
/// improve on the incumbent (feasible first, then EE). `trace[t - 1]` is the
/// EE of the incumbent after pass `t`. Sub-solver trouble is reported through
/// the flags, never as an error.
pub fn run_algorithm1(channels: &ChannelSet, config: &ScenarioConfig, opts: &AlgorithmOptions, seed: u64) -> Solution {
    let (mut w, mut v) = initial_point(channels, config, &opts.init, seed);
    let mut best: Option<Evaluation> = None;
    let mut trace = Vec::with_capacity(opts.t_max);
    let mut flags = SolverFlags::default();

    for t in 1..=opts.t_max.max(1) {
        flags.outer_iterations = t;
        let beam = optimize_beamforming(channels, &v, &w, config, &opts.beam);
        if beam.stalled {
            flags.beam_stalls += 1;
        }
        let mut phase_opts = opts.phase.clone();
        phase_opts.seed = opts.phase.seed ^ seed.rotate_left(17) ^ t as u64;
        let phase = optimize_phases(channels, &beam.w, &v, config, opts.backend, &phase_opts);
        flags.sdr_unconverged += phase.sdr_unconverged;
        flags.sdr_rate_constraints_dropped += phase.sdr_rate_constraints_dropped;

        let gain = match &best {
            None => Some(f64::INFINITY),
            Some(incumbent) => outer_gain(&phase.eval, incumbent),
        };
        match gain {
            Some(g) => {
                w = beam.w;
                v = phase.v;
                trace.push(phase.eval.ee);
                best = Some(phase.eval);
                if g < opts.ee_tol {
                    flags.converged = true;
                    break;
                }
            }
            None => {
                trace.push(*trace.last().expect("first pass always recorded"));
                flags.converged = true;
                break;
            }
        }
    }

    let best = best.expect("at least one outer pass");
    Solution {
        w,
        v,
        rates: best.rates,
        ee: best.ee,
        report: best.report,
        trace,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_scenario;
    use crate::linalg::CMatrix;
    use crate::metrics::energy_efficiency;

    fn desk() -> ScenarioConfig {
        ScenarioConfig::desk()
    }

    #[test]
    fn single_pass_runs_one_beam_and_one_phase_update() {
        let cfg = desk();
        let ch = sample_scenario(&cfg, 3).unwrap();
        let opts = AlgorithmOptions {
            t_max: 1,
            ..AlgorithmOptions::default()
        };
        let sol = run_algorithm1(&ch, &cfg, &opts, 3);
        assert_eq!(sol.flags.outer_iterations, 1);
        assert_eq!(sol.trace.len(), 1);
    }

    #[test]
    fn reported_ee_matches_recomputation() {
        let cfg = desk();
        let ch = sample_scenario(&cfg, 11).unwrap();
        let sol = run_algorithm1(&ch, &cfg, &AlgorithmOptions::default(), 11);
        let ee = energy_efficiency(&ch, &sol.v, &sol.w, &cfg);
        assert!((ee - sol.ee).abs() <= 1e-9 * ee.abs());
        assert_eq!(*sol.trace.last().unwrap(), sol.ee);
    }

    #[test]
    fn same_seed_same_solution() {
        let cfg = desk();
        let ch = sample_scenario(&cfg, 5).unwrap();
        let a = run_algorithm1(&ch, &cfg, &AlgorithmOptions::default(), 5);
        let b = run_algorithm1(&ch, &cfg, &AlgorithmOptions::default(), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn phases_do_not_matter_without_irs_paths() {
        let cfg = desk();
        let ch = sample_scenario(&cfg, 8).unwrap();
        let zeroed = ChannelSet::from_cascaded(
            ch.direct.clone(),
            ch.cascaded.iter().map(|g| CMatrix::zeros(g.nrows(), g.ncols())).collect(),
        )
        .unwrap();
        let opts = AlgorithmOptions {
            t_max: 1,
            ..AlgorithmOptions::default()
        };
        let sol = run_algorithm1(&zeroed, &cfg, &opts, 8);
        let other = PhaseVector::zeros(sol.v.len());
        let a = energy_efficiency(&zeroed, &sol.v, &sol.w, &cfg);
        let b = energy_efficiency(&zeroed, &other, &sol.w, &cfg);
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn given_start_is_projected() {
        let cfg = desk();
        let ch = sample_scenario(&cfg, 2).unwrap();
        let w = BeamMatrix(CMatrix::from_element(cfg.num_aps, cfg.num_users, crate::linalg::C64::new(10.0, 0.0)));
        let v = PhaseVector::zeros(ch.num_elements());
        let (w0, v0) = initial_point(&ch, &cfg, &InitPolicy::Given { w, v: v.clone() }, 0);
        assert!(w0.max_row_power() <= cfg.p_max * (1.0 + 1e-12));
        assert_eq!(v0, v);
    }
}
