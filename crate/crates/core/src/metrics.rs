//! Rates, power consumption, energy efficiency and the constraint checks.
//!
//! Functions suffixed `_effective` take the K x M matrix of aggregated channels
//! (row k = `h^H_{AU,k}`) directly; the others build it from a [`ChannelSet`]
//! and a [`PhaseVector`].

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::linalg::{frobenius_sq, norm_sqr, CMatrix, C64};

/// Slack below which a constraint counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// M x K beamforming matrix; column k is `w_k`, row m is the AP-m vector `w̄_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix(pub CMatrix);

impl BeamMatrix {
    pub fn zeros(num_aps: usize, num_users: usize) -> Self {
        Self(CMatrix::zeros(num_aps, num_users))
    }

    pub fn num_aps(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `‖w̄_m‖²`.
    pub fn row_power(&self, m: usize) -> f64 {
        self.0.row(m).iter().map(|z| norm_sqr(*z)).sum()
    }

    pub fn max_row_power(&self) -> f64 {
        (0..self.num_aps()).map(|m| self.row_power(m)).fold(0.0, f64::max)
    }

    /// `Σ_k ‖w_k‖²`.
    pub fn transmit_power(&self) -> f64 {
        frobenius_sq(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real genes: `Re W` then `Im W`, both row-major.
    pub fn to_genes(&self) -> Vec<f64> {
        let (m, k) = self.0.shape();
        let mut out = Vec::with_capacity(2 * m * k);
        for part in [false, true] {
            for r in 0..m {
                for c in 0..k {
                    let z = self.0[(r, c)];
                    out.push(if part { z.im } else { z.re });
                }
            }
        }
        out
    }

    /// Inverse of [`BeamMatrix::to_genes`]; `genes` must hold at least `2 M K` values.
    pub fn from_genes(num_aps: usize, num_users: usize, genes: &[f64]) -> Self {
        let half = num_aps * num_users;
        Self(CMatrix::from_fn(num_aps, num_users, |r, c| {
            C64::new(genes[r * num_users + c], genes[half + r * num_users + c])
        }))
    }
}

/// `|h_k w_j|²` for all user pairs.
pub fn gain_matrix(h: &CMatrix, w: &BeamMatrix) -> DMatrix<f64> {
    let hw = h * &w.0;
    hw.map(norm_sqr)
}

/// SINR of every user from the gain matrix.
pub fn sinr_from_gains(gains: &DMatrix<f64>, sigma2: f64) -> Vec<f64> {
    let k = gains.nrows();
    (0..k)
        .map(|user| {
            let interference: f64 = (0..k).filter(|&j| j != user).map(|j| gains[(user, j)]).sum();
            gains[(user, user)] / (interference + sigma2)
        })
        .collect()
}

pub fn rates_effective(h: &CMatrix, w: &BeamMatrix, sigma2: f64) -> Vec<f64> {
    sinr_from_gains(&gain_matrix(h, w), sigma2)
        .into_iter()
        .map(|s| (1.0 + s).log2())
        .collect()
}

/// Achievable rate of user `k`, bit/s/Hz.
pub fn user_rate(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, sigma2: f64, k: usize) -> f64 {
    user_rates(channels, v, w, sigma2)[k]
}

pub fn user_rates(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, sigma2: f64) -> Vec<f64> {
    rates_effective(&channels.effective(v), w, sigma2)
}

/// `α Σ_k ‖w_k‖² + P_fix`, watts.
pub fn total_power(w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    config.alpha() * w.transmit_power() + config.p_fix()
}

/// Bandwidth times sum rate over total power. Returns 0 when both are zero.
pub fn ee_from_rates(rates: &[f64], w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    let sum: f64 = rates.iter().sum();
    let power = total_power(w, config);
    if sum == 0.0 {
        0.0
    } else {
        config.bandwidth * sum / power
    }
}

/// Energy efficiency in bit/Joule.
pub fn energy_efficiency(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    ee_from_rates(&user_rates(channels, v, w, config.sigma2), w, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `R_k - R_min` per user, bit/s/Hz.
    pub rate_slack: Vec<f64>,
    /// `P_max - ‖w̄_m‖²` per AP, watts.
    pub power_slack: Vec<f64>,
    /// Largest `| |p_i| - 1 |`.
    pub modulus_deviation: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn from_parts(rates: &[f64], w: &BeamMatrix, v: &PhaseVector, config: &ScenarioConfig) -> Self {
        let rate_slack: Vec<f64> = rates.iter().map(|r| r - config.r_min).collect();
        let power_slack: Vec<f64> = (0..w.num_aps()).map(|m| config.p_max - w.row_power(m)).collect();
        let modulus_deviation = v.max_modulus_deviation();
        let feasible = rate_slack.iter().chain(&power_slack).all(|&s| s >= -FEASIBILITY_TOL)
            && modulus_deviation <= FEASIBILITY_TOL;
        Self {
            rate_slack,
            power_slack,
            modulus_deviation,
            feasible,
        }
    }

    pub fn rates_ok(&self) -> bool {
        self.rate_slack.iter().all(|&s| s >= -FEASIBILITY_TOL)
    }

    pub fn power_ok(&self) -> bool {
        self.power_slack.iter().all(|&s| s >= -FEASIBILITY_TOL)
    }

    /// `Σ_k [R_min - R_k]⁺`.
    pub fn rate_shortfall(&self) -> f64 {
        self.rate_slack.iter().map(|s| (-s).max(0.0)).sum()
    }

    /// `Σ_m [‖w̄_m‖² - P_max]⁺`.
    pub fn power_excess(&self) -> f64 {
        self.power_slack.iter().map(|s| (-s).max(0.0)).sum()
    }

    /// Largest violation over all constraints, in their native units.
    pub fn max_violation(&self) -> f64 {
        self.rate_slack
            .iter()
            .chain(&self.power_slack)
            .map(|s| (-s).max(0.0))
            .fold(self.modulus_deviation, f64::max)
    }
}

pub fn check_feasibility(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, config: &ScenarioConfig) -> FeasibilityReport {
    let rates = user_rates(channels, v, w, config.sigma2);
    FeasibilityReport::from_parts(&rates, w, v, config)
}

/// `EE - β₁ Σ_k [R_min - R_k]⁺ - β₂ Σ_m [‖w̄_m‖² - P_max]⁺`.
///
/// With `penalty_includes_bandwidth` unset the EE term is divided by the
/// bandwidth (bit/Joule/Hz) so the penalties act on a comparable scale.
pub fn penalized_objective(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    let rates = user_rates(channels, v, w, config.sigma2);
    penalized_from_rates(&rates, w, config)
}

pub fn penalized_from_rates(rates: &[f64], w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    let mut ee = ee_from_rates(rates, w, config);
    if !config.penalty_includes_bandwidth && config.bandwidth > 0.0 {
        ee /= config.bandwidth;
    }
    let rate_pen: f64 = rates.iter().map(|r| (config.r_min - r).max(0.0)).sum();
    let power_pen: f64 = (0..w.num_aps()).map(|m| (w.row_power(m) - config.p_max).max(0.0)).sum();
    ee - config.beta1 * rate_pen - config.beta2 * power_pen
}

/// Rates, EE and feasibility of one `(W, v)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rates: Vec<f64>,
    pub ee: f64,
    pub report: FeasibilityReport,
}

impl Evaluation {
    pub fn new(channels: &ChannelSet, v: &PhaseVector, w: &BeamMatrix, config: &ScenarioConfig) -> Self {
        Self::from_effective(&channels.effective(v), v, w, config)
    }

    pub fn from_effective(h: &CMatrix, v: &PhaseVector, w: &BeamMatrix, config: &ScenarioConfig) -> Self {
        let rates = rates_effective(h, w, config.sigma2);
        let ee = ee_from_rates(&rates, w, config);
        let report = FeasibilityReport::from_parts(&rates, w, v, config);
        Self { rates, ee, report }
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Relative improvement of `self` over `incumbent`, or `None` if `self` is
    /// not strictly better.
    ///
    /// Feasible points beat infeasible ones; among feasible points higher EE
    /// wins, among infeasible ones smaller total constraint violation wins.
    pub fn gain_over(&self, incumbent: &Evaluation) -> Option<f64> {
        let ok_new = self.report.feasible;
        let ok_old = incumbent.report.feasible;
        match (ok_new, ok_old) {
            (true, false) => Some(f64::INFINITY),
            (false, true) => None,
            (true, true) => {
                if self.ee > incumbent.ee {
                    Some(relative_gain(self.ee, incumbent.ee))
                } else {
                    None
                }
            }
            (false, false) => {
                let new_v = self.report.rate_shortfall() + self.report.power_excess();
                let old_v = incumbent.report.rate_shortfall() + incumbent.report.power_excess();
                if new_v < old_v {
                    Some(relative_gain(old_v, new_v))
                } else if new_v == old_v && self.ee > incumbent.ee {
                    Some(relative_gain(self.ee, incumbent.ee))
                } else {
                    None
                }
            }
        }
    }
}

fn relative_gain(better: f64, worse: f64) -> f64 {
    let denom = worse.abs().max(better.abs()).max(f64::MIN_POSITIVE);
    (better - worse) / denom
}

/// Counters describing how the sub-solvers behaved during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverFlags {
    /// Outer loop stopped on the EE tolerance rather than the iteration cap.
    pub converged: bool,
    pub outer_iterations: usize,
    pub beam_stalls: usize,
    pub sdr_unconverged: usize,
    pub sdr_rate_constraints_dropped: usize,
}

/// Output of any optimization scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w: BeamMatrix,
    pub v: PhaseVector,
    pub rates: Vec<f64>,
    pub ee: f64,
    pub report: FeasibilityReport,
    /// Algorithm 1: incumbent EE after each outer pass. GA: best fitness per
    /// generation, entry 0 being the initial population.
    pub trace: Vec<f64>,
    pub flags: SolverFlags,
}

impl Solution {
    pub fn evaluate(channels: &ChannelSet, w: BeamMatrix, v: PhaseVector, config: &ScenarioConfig) -> Self {
        let eval = Evaluation::new(channels, &v, &w, config);
        Self {
            w,
            v,
            rates: eval.rates,
            ee: eval.ee,
            report: eval.report,
            trace: Vec::new(),
            flags: SolverFlags::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_scenario;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_set(h: C64) -> ChannelSet {
        ChannelSet::from_cascaded(CMatrix::from_element(1, 1, h), vec![CMatrix::zeros(1, 1)]).unwrap()
    }

    fn unit_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::with_dims(1, 1, 1, 1);
        cfg.p_ap = 0.0;
        cfg.p_user = 0.0;
        cfg.p_irs = 0.0;
        cfg.upsilon = 1.0;
        cfg.sigma2 = 1.0;
        cfg.bandwidth = 1.0;
        cfg
    }

    fn random_beams(rng: &mut ChaCha8Rng, m: usize, k: usize, scale: f64) -> BeamMatrix {
        BeamMatrix(CMatrix::from_fn(m, k, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale
        }))
    }

    #[test]
    fn unit_sinr_gives_one_bit() {
        let set = scalar_set(C64::new(1.0, 0.0));
        let w = BeamMatrix(CMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        let v = PhaseVector::zeros(1);
        assert!((user_rate(&set, &v, &w, 1.0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_beams_give_zero_rates_and_ee() {
        let cfg = ScenarioConfig::desk();
        let set = sample_scenario(&cfg, 4).unwrap();
        let v = PhaseVector::zeros(cfg.total_elements());
        let w = BeamMatrix::zeros(4, 2);
        assert!(user_rates(&set, &v, &w, cfg.sigma2).iter().all(|&r| r == 0.0));
        assert_eq!(energy_efficiency(&set, &v, &w, &cfg), 0.0);
        assert_eq!(total_power(&w, &cfg), cfg.p_fix());
    }

    #[test]
    fn total_power_examples() {
        let mut cfg = unit_config();
        cfg.p_ap = 1.0;
        let w = BeamMatrix(CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]));
        assert!((total_power(&w, &cfg) - 3.0).abs() < 1e-15);
        let mut cfg = unit_config();
        cfg.upsilon = 0.8;
        let w = BeamMatrix(CMatrix::from_element(1, 1, C64::new(0.6, 0.8)));
        assert!((total_power(&w, &cfg) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn ee_half_example() {
        let mut cfg = unit_config();
        cfg.p_ap = 1.0;
        let set = scalar_set(C64::new(1.0, 0.0));
        let w = BeamMatrix(CMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        let ee = energy_efficiency(&set, &PhaseVector::zeros(1), &w, &cfg);
        assert!((ee - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rate_from_received_signal_expansion() {
        // Oracle: r_k = h_k Σ_j w_j x_j + n_k, with unit-power symbols; signal
        // power |h_k w_k|², interference Σ_{j≠k} |h_k w_j|², computed with
        // explicit per-AP sums rather than matrix products.
        let cfg = ScenarioConfig::with_dims(3, 2, 1, 4);
        let set = sample_scenario(&cfg, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = PhaseVector::random(4, &mut rng);
        let w = random_beams(&mut rng, 3, 2, 0.5);
        let p = v.entries();
        for k in 0..2 {
            let mut h = [C64::new(0.0, 0.0); 3];
            for m in 0..3 {
                h[m] = set.direct[(k, m)];
                for i in 0..4 {
                    h[m] += p[i] * set.cascaded[k][(i, m)];
                }
            }
            let mut powers = [0.0; 2];
            for j in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..3 {
                    s += h[m] * w.0[(m, j)];
                }
                powers[j] = s.norm_sqr();
            }
            let sinr = powers[k] / (powers[1 - k] + cfg.sigma2);
            let expected = (1.0 + sinr).log2();
            let got = user_rate(&set, &v, &w, cfg.sigma2, k);
            assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn feasibility_examples() {
        let cfg = ScenarioConfig::desk();
        let set = sample_scenario(&cfg, 9).unwrap();
        let v = PhaseVector::zeros(16);
        let report = check_feasibility(&set, &v, &BeamMatrix::zeros(4, 2), &cfg);
        assert!(!report.feasible);
        assert_eq!(report.rate_slack, vec![-1.0, -1.0]);
        assert!(report.power_ok());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut w = random_beams(&mut rng, 4, 2, 1.0);
        let scale = (cfg.p_max / w.max_row_power()).sqrt();
        w.0 *= C64::new(scale, 0.0);
        let report = check_feasibility(&set, &v, &w, &cfg);
        let tightest = report.power_slack.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(tightest.abs() < 1e-12);
        assert!(report.power_ok());
    }

    #[test]
    fn penalized_objective_examples() {
        let mut cfg = ScenarioConfig::desk();
        let set = sample_scenario(&cfg, 2).unwrap();
        let v = PhaseVector::zeros(16);
        let zero = BeamMatrix::zeros(4, 2);
        assert_eq!(penalized_objective(&set, &v, &zero, &cfg), -100.0);

        // violating point: hand-assembled penalty terms
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_beams(&mut rng, 4, 2, 4.0);
        let rates = user_rates(&set, &v, &w, cfg.sigma2);
        let ee = energy_efficiency(&set, &v, &w, &cfg);
        let mut expected = ee;
        for r in &rates {
            expected -= 50.0 * (1.0 - r).max(0.0);
        }
        for m in 0..4 {
            expected -= 50.0 * (w.row_power(m) - 1.0).max(0.0);
        }
        assert!(w.max_row_power() > 1.0);
        let got = penalized_objective(&set, &v, &w, &cfg);
        assert!((got - expected).abs() <= 1e-12 * expected.abs());
        assert!(got < ee);

        // feasible point: no penalty at all
        cfg.r_min = 0.0;
        let small = BeamMatrix(w.0.map(|z| z * 0.05));
        assert_eq!(
            penalized_objective(&set, &v, &small, &cfg),
            energy_efficiency(&set, &v, &small, &cfg)
        );
    }

    #[test]
    fn genes_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = random_beams(&mut rng, 3, 2, 1.0);
        let genes = w.to_genes();
        assert_eq!(genes[1], w.0[(0, 1)].re);
        assert_eq!(genes[6 + 2], w.0[(1, 0)].im);
        assert_eq!(BeamMatrix::from_genes(3, 2, &genes), w);
    }

    #[test]
    fn feasible_beats_infeasible() {
        let base = Evaluation {
            rates: vec![0.5],
            ee: 10.0,
            report: FeasibilityReport {
                rate_slack: vec![-0.5],
                power_slack: vec![0.0],
                modulus_deviation: 0.0,
                feasible: false,
            },
        };
        let mut ok = base.clone();
        ok.ee = 1.0;
        ok.report.rate_slack = vec![0.1];
        ok.report.feasible = true;
        assert!(ok.gain_over(&base).is_some());
        assert!(base.gain_over(&ok).is_none());
        let mut better = ok.clone();
        better.ee = 1.5;
        assert!((better.gain_over(&ok).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(ok.gain_over(&ok).is_none());
    }
}
