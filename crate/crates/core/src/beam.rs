//! Beamforming update for fixed IRS phases.
//!
//! The EE ratio `Σ_k R_k / P(W)` is replaced by the concave surrogate
//!
//! ```text
//! f1(W, y, z) = -z² (α Σ‖w_k‖² + P_fix)
//!             + 2 z sqrt( Σ_k log2(1 + 2 Re{y_k* h_k w_k} - |y_k|² (Σ_{j≠k} |h_k w_j|² + σ²)) )
//! ```
//!
//! which equals the ratio when `y` and `z` take their closed-form optimal
//! values. For fixed `(y, z)` the surrogate is maximized by projected gradient
//! ascent with an exterior penalty on the second-order-cone form of the rate
//! constraint; the per-AP power budget is enforced by row-wise projection.
//!
//! The surrogate has no bandwidth factor; EE values reported by this module
//! include it (bit/Joule).

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::linalg::{frobenius_sq, inner, norm_sqr, CMatrix, C64};
use crate::metrics::{BeamMatrix, Evaluation};

/// Quadratic-transform auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamFpState {
    pub y: Vec<C64>,
    pub z: f64,
}

impl BeamFpState {
    /// Optimal auxiliaries at `w`.
    pub fn at(h: &CMatrix, w: &BeamMatrix, config: &ScenarioConfig) -> Self {
        Self {
            y: update_y(h, w, config.sigma2),
            z: update_z(h, w, config),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolverOptions {
    /// Projected-gradient iterations per subproblem.
    pub max_inner_iters: usize,
    /// Auxiliary-update passes in [`optimize_beamforming`].
    pub max_passes: usize,
    pub initial_step: f64,
    /// Sufficient-increase constant of the line search.
    pub armijo: f64,
    /// Step shrink factor on a rejected trial.
    pub backtrack: f64,
    pub min_step: f64,
    /// Initial weight of the rate-constraint penalty.
    pub penalty_weight: f64,
    /// Per-pass multiplier of the penalty weight.
    pub penalty_growth: f64,
    pub penalty_cap: f64,
    /// Relative objective change that ends a subproblem solve.
    pub tol: f64,
    /// Relative EE gain below which the auxiliary passes stop.
    pub ee_tol: f64,
    /// The penalty targets `R_min + rate_margin` (bit/s/Hz) so that the
    /// penalized optimum lands inside the true feasible set.
    pub rate_margin: f64,
}

impl Default for BeamSolverOptions {
    fn default() -> Self {
        Self {
            max_inner_iters: 300,
            max_passes: 50,
            initial_step: 1e-2,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-16,
            penalty_weight: 10.0,
            penalty_growth: 2.0,
            penalty_cap: 1e4,
            tol: 1e-10,
            ee_tol: 1e-4,
            rate_margin: 3e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("surrogate log argument for user {user} is {value}, not positive")]
pub struct SurrogateDomainError {
    pub user: usize,
    pub value: f64,
}

/// `h_k w_j` for all pairs, K x K.
fn products(h: &CMatrix, w: &BeamMatrix) -> CMatrix {
    h * &w.0
}

fn interference(hw: &CMatrix, k: usize) -> f64 {
    (0..hw.ncols()).filter(|&j| j != k).map(|j| norm_sqr(hw[(k, j)])).sum()
}

/// `y_k = h_k w_k / (Σ_{j≠k} |h_k w_j|² + σ²)`.
pub fn update_y(h: &CMatrix, w: &BeamMatrix, sigma2: f64) -> Vec<C64> {
    let hw = products(h, w);
    (0..hw.nrows())
        .map(|k| hw[(k, k)] / (interference(&hw, k) + sigma2))
        .collect()
}

/// `z = sqrt(Σ_k log2(1 + SINR_k)) / (α Σ‖w_k‖² + P_fix)`.
pub fn update_z(h: &CMatrix, w: &BeamMatrix, config: &ScenarioConfig) -> f64 {
    let hw = products(h, w);
    let sum_rate: f64 = (0..hw.nrows())
        .map(|k| (1.0 + norm_sqr(hw[(k, k)]) / (interference(&hw, k) + config.sigma2)).log2())
        .sum();
    sum_rate.sqrt() / (config.alpha() * w.transmit_power() + config.p_fix())
}

/// Per-user arguments of the surrogate logarithms.
fn log_arguments(hw: &CMatrix, y: &[C64], sigma2: f64) -> Vec<f64> {
    (0..hw.nrows())
        .map(|k| 1.0 + 2.0 * (y[k].conj() * hw[(k, k)]).re - norm_sqr(y[k]) * (interference(hw, k) + sigma2))
        .collect()
}

/// Surrogate value. The summed log term is clamped at zero before the root.
pub fn eval_f1(h: &CMatrix, w: &BeamMatrix, y: &[C64], z: f64, config: &ScenarioConfig) -> Result<f64, SurrogateDomainError> {
    let hw = products(h, w);
    let args = log_arguments(&hw, y, config.sigma2);
    let mut sum = 0.0;
    for (user, &a) in args.iter().enumerate() {
        if !(a > 0.0) {
            return Err(SurrogateDomainError { user, value: a });
        }
        sum += a.log2();
    }
    let power = config.alpha() * w.transmit_power() + config.p_fix();
    Ok(-z * z * power + 2.0 * z * sum.max(0.0).sqrt())
}

/// Gradient of `f1` in W as `2 ∂f1/∂W*`: the directional derivative along
/// `D` is `Re tr(G^H D)`. Returns `None` outside the surrogate domain.
pub fn f1_gradient(h: &CMatrix, w: &BeamMatrix, y: &[C64], z: f64, config: &ScenarioConfig) -> Option<CMatrix> {
    let hw = products(h, w);
    let args = log_arguments(&hw, y, config.sigma2);
    if args.iter().any(|a| !(*a > 0.0)) {
        return None;
    }
    let sum: f64 = args.iter().map(|a| a.log2()).sum();
    let mut grad = w.0.map(|x| x * (-2.0 * config.alpha() * z * z));
    if sum <= 0.0 {
        return Some(grad);
    }
    let outer = z / sum.sqrt();
    let k_users = hw.nrows();
    for k in 0..k_users {
        let weight = outer / (args[k] * core::f64::consts::LN_2);
        let h_conj = h.row(k).adjoint();
        let y_abs2 = norm_sqr(y[k]);
        for j in 0..k_users {
            let coeff = if j == k {
                y[k] * 2.0
            } else {
                hw[(k, j)] * (-2.0 * y_abs2)
            };
            let mut col = grad.column_mut(j);
            col += &h_conj * (coeff * weight);
        }
    }
    Some(grad)
}

/// Normalized residuals of the cone form of the rate constraint,
/// `(‖[h_k W_{-k}, σ]‖ - Re{h_k w_k} / sqrt(2^R_min - 1)) / σ`; non-positive
/// means satisfied. Empty when `R_min <= 0`.
pub fn rate_residuals(h: &CMatrix, w: &BeamMatrix, config: &ScenarioConfig) -> Vec<f64> {
    if config.r_min <= 0.0 {
        return Vec::new();
    }
    let hw = products(h, w);
    residuals_from_products(&hw, config)
}

fn residuals_from_products(hw: &CMatrix, config: &ScenarioConfig) -> Vec<f64> {
    let c = (2f64.powf(config.r_min) - 1.0).sqrt();
    let sigma = config.sigma2.sqrt();
    (0..hw.nrows())
        .map(|k| ((interference(hw, k) + config.sigma2).sqrt() - hw[(k, k)].re / c) / sigma)
        .collect()
}

/// `f1 - μ Σ_k ([r_k]⁺)²` or `-inf` outside the surrogate domain.
pub fn penalized_surrogate(h: &CMatrix, w: &BeamMatrix, state: &BeamFpState, config: &ScenarioConfig, mu: f64) -> f64 {
    let f = match eval_f1(h, w, &state.y, state.z, config) {
        Ok(f) => f,
        Err(_) => return f64::NEG_INFINITY,
    };
    let pen: f64 = rate_residuals(h, w, config).iter().map(|r| r.max(0.0).powi(2)).sum();
    f - mu * pen
}

/// Gradient of [`penalized_surrogate`], same convention as [`f1_gradient`].
pub fn penalized_gradient(h: &CMatrix, w: &BeamMatrix, state: &BeamFpState, config: &ScenarioConfig, mu: f64) -> Option<CMatrix> {
    let mut grad = f1_gradient(h, w, &state.y, state.z, config)?;
    if config.r_min <= 0.0 || mu == 0.0 {
        return Some(grad);
    }
    let hw = products(h, w);
    let residuals = residuals_from_products(&hw, config);
    let c = (2f64.powf(config.r_min) - 1.0).sqrt();
    let sigma = config.sigma2.sqrt();
    for (k, &r) in residuals.iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        let scale = 2.0 * mu * r / sigma;
        let d = (interference(&hw, k) + config.sigma2).sqrt();
        let h_conj = h.row(k).adjoint();
        for j in 0..hw.ncols() {
            let coeff = if j == k {
                C64::new(-1.0 / c, 0.0)
            } else {
                hw[(k, j)] / d
            };
            let mut col = grad.column_mut(j);
            col -= &h_conj * (coeff * scale);
        }
    }
    Some(grad)
}

/// Rescales every row with `‖w̄_m‖² > P_max` onto the budget.
pub fn project_row_power(w: &BeamMatrix, p_max: f64) -> BeamMatrix {
    let mut out = w.clone();
    for m in 0..out.num_aps() {
        let power = out.row_power(m);
        if power > p_max {
            let scale = (p_max / power).sqrt();
            let mut row = out.0.row_mut(m);
            row *= C64::new(scale, 0.0);
        }
    }
    out
}

/// Rotates each column so that `h_k w_k` is real and non-negative. Rates,
/// power and EE are unchanged.
pub fn align_column_phases(h: &CMatrix, w: &BeamMatrix) -> BeamMatrix {
    let mut out = w.clone();
    for k in 0..out.num_users() {
        let s: C64 = h.row(k).iter().zip(out.0.column(k).iter()).map(|(a, b)| a * b).sum();
        let mag = s.norm();
        if mag > 0.0 {
            let rot = s.conj() / mag;
            let mut col = out.0.column_mut(k);
            col *= rot;
        }
    }
    out
}

/// Matched filter: `w_k ∝ h_k^H`, unit-norm columns, then a common scale so the
/// loudest AP transmits exactly `P_max`.
pub fn matched_filter(h: &CMatrix, p_max: f64) -> BeamMatrix {
    let (k_users, m) = h.shape();
    let mut w = BeamMatrix::zeros(m, k_users);
    for k in 0..k_users {
        let col = h.row(k).adjoint();
        let norm = col.norm();
        if norm > 0.0 {
            w.0.set_column(k, &(col / C64::new(norm, 0.0)));
        }
    }
    let loudest = w.max_row_power();
    if loudest > 0.0 {
        w.0 *= C64::new((p_max / loudest).sqrt(), 0.0);
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub w: BeamMatrix,
    pub objective: f64,
    pub iterations: usize,
    /// The line search could not find an ascent step before convergence.
    pub stalled: bool,
}

fn max_positive(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, &r| acc.max(r))
}

/// Maximizes `f1 - μ·penalty` over the per-AP power box for fixed `(y, z)`.
///
/// Projected gradient ascent with backtracking; every accepted step satisfies
/// the sufficient-increase test, so the penalized objective never decreases.
/// When `w_init` already satisfies the rate constraints, trial points that
/// would violate them are rejected as well, keeping the iterates feasible.
pub fn solve_beam_subproblem(
    h: &CMatrix,
    w_init: &BeamMatrix,
    state: &BeamFpState,
    config: &ScenarioConfig,
    opts: &BeamSolverOptions,
    mu: f64,
) -> SubproblemOutcome {
    let tightened;
    let target = if config.r_min > 0.0 && opts.rate_margin > 0.0 {
        tightened = ScenarioConfig {
            r_min: config.r_min + opts.rate_margin,
            ..config.clone()
        };
        &tightened
    } else {
        config
    };
    let mut w = project_row_power(w_init, config.p_max);
    let mut value = penalized_surrogate(h, &w, state, target, mu);
    let keep_feasible = config.r_min > 0.0 && max_positive(&rate_residuals(h, &w, config)) == 0.0;
    let mut step = opts.initial_step;
    let mut stalled = false;
    let mut iterations = 0;

    if !value.is_finite() {
        return SubproblemOutcome {
            w,
            objective: value,
            iterations,
            stalled: true,
        };
    }

    while iterations < opts.max_inner_iters {
        iterations += 1;
        let grad = match penalized_gradient(h, &w, state, target, mu) {
            Some(g) => g,
            None => {
                stalled = true;
                break;
            }
        };
        let mut accepted = None;
        loop {
            let trial = project_row_power(&BeamMatrix(&w.0 + grad.map(|g| g * step)), config.p_max);
            let delta = &trial.0 - &w.0;
            let moved = frobenius_sq(&delta);
            if moved <= f64::EPSILON * f64::EPSILON * frobenius_sq(&w.0).max(f64::MIN_POSITIVE) {
                // projected gradient vanishes: stationary
                break;
            }
            let candidate = penalized_surrogate(h, &trial, state, target, mu);
            let feasible_ok = !keep_feasible || max_positive(&rate_residuals(h, &trial, config)) == 0.0;
            let predicted = inner(&grad, &delta);
            if feasible_ok && candidate.is_finite() && candidate >= value + opts.armijo * predicted.min(moved / step) {
                accepted = Some((trial, candidate));
                break;
            }
            step *= opts.backtrack;
            if step < opts.min_step {
                stalled = true;
                break;
            }
        }
        match accepted {
            Some((trial, candidate)) => {
                let gain = candidate - value;
                w = trial;
                value = candidate;
                step = (step * 2.0).min(1e12);
                if gain <= opts.tol * value.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            None => break,
        }
    }
    SubproblemOutcome {
        w,
        objective: value,
        iterations,
        stalled,
    }
}

/// One row of a beamforming trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamTraceRow {
    pub iteration: usize,
    /// Surrogate value at the optimal auxiliaries (sum rate over power).
    pub f1: f64,
    /// Energy efficiency, bit/Joule.
    pub ee: f64,
    /// Largest constraint violation (rate in bit/s/Hz, power in W).
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutcome {
    pub w: BeamMatrix,
    pub eval: Evaluation,
    pub trace: Vec<BeamTraceRow>,
    pub stalled: bool,
}

fn trace_row(iteration: usize, h: &CMatrix, w: &BeamMatrix, eval: &Evaluation, config: &ScenarioConfig) -> BeamTraceRow {
    let state = BeamFpState::at(h, w, config);
    BeamTraceRow {
        iteration,
        f1: eval_f1(h, w, &state.y, state.z, config).unwrap_or(f64::NAN),
        ee: eval.ee,
        max_violation: eval.report.max_violation(),
    }
}

/// Alternates the auxiliary updates and the subproblem solve for fixed `v`.
///
/// Stops when a pass fails to improve (feasibility first, then EE) or improves
/// by less than `opts.ee_tol` relative, and returns the best iterate.
pub fn optimize_beamforming(
    channels: &ChannelSet,
    v: &PhaseVector,
    w_init: &BeamMatrix,
    config: &ScenarioConfig,
    opts: &BeamSolverOptions,
) -> BeamOutcome {
    let h = channels.effective(v);
    optimize_beamforming_effective(&h, v, w_init, config, opts)
}

pub fn optimize_beamforming_effective(
    h: &CMatrix,
    v: &PhaseVector,
    w_init: &BeamMatrix,
    config: &ScenarioConfig,
    opts: &BeamSolverOptions,
) -> BeamOutcome {
    let mut w = align_column_phases(h, &project_row_power(w_init, config.p_max));
    let mut best = Evaluation::from_effective(h, v, &w, config);
    let mut trace = alloc::vec![trace_row(0, h, &w, &best, config)];
    let mut mu = opts.penalty_weight;
    let mut stalled = false;

    for pass in 1..=opts.max_passes {
        let state = BeamFpState::at(h, &w, config);
        let out = solve_beam_subproblem(h, &w, &state, config, opts, mu);
        stalled |= out.stalled;
        mu = (mu * opts.penalty_growth).min(opts.penalty_cap);
        let candidate = align_column_phases(h, &out.w);
        let eval = Evaluation::from_effective(h, v, &candidate, config);
        match eval.gain_over(&best) {
            Some(gain) => {
                w = candidate;
                best = eval;
                trace.push(trace_row(pass, h, &w, &best, config));
                if gain < opts.ee_tol {
                    break;
                }
            }
            None => break,
        }
    }
    BeamOutcome {
        w,
        eval: best,
        trace,
        stalled,
    }
}

/// `|h_k w_j|²` matrix, exposed for callers that need interference maps.
pub fn gains(h: &CMatrix, w: &BeamMatrix) -> DMatrix<f64> {
    products(h, w).map(norm_sqr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::with_dims(1, 1, 1, 1);
        cfg.p_ap = 0.0;
        cfg.p_user = 0.0;
        cfg.p_irs = 0.0;
        cfg.upsilon = 1.0;
        cfg.sigma2 = 1.0;
        cfg.bandwidth = 1.0;
        cfg.r_min = 0.0;
        cfg
    }

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, C64::new(x, 0.0))
    }

    #[test]
    fn y_examples() {
        let y = update_y(&scalar(1.0), &BeamMatrix(scalar(2.0)), 1.0);
        assert_eq!(y, vec![C64::new(2.0, 0.0)]);
        let h = CMatrix::from_element(2, 2, C64::new(1.0, 0.5));
        let mut w = BeamMatrix::zeros(2, 2);
        w.0[(0, 1)] = C64::new(1.0, 0.0);
        let y = update_y(&h, &w, 1.0);
        assert_eq!(y[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn z_example() {
        let mut cfg = unit_config();
        cfg.p_ap = 1.0;
        // |hw|² = 4, ‖w‖² = 4, P_fix = 1
        let z = update_z(&scalar(1.0), &BeamMatrix(scalar(2.0)), &cfg);
        assert!((z - 5f64.log2().sqrt() / 5.0).abs() < 1e-15);
        assert!((z - 0.30476).abs() < 1e-5);
        assert_eq!(update_z(&scalar(1.0), &BeamMatrix(scalar(0.0)), &cfg), 0.0);
    }

    #[test]
    fn f1_examples() {
        let mut cfg = unit_config();
        cfg.p_ap = 1.0;
        let h = scalar(1.0);
        let w = BeamMatrix(scalar(2.0));
        let state = BeamFpState::at(&h, &w, &cfg);
        let f = eval_f1(&h, &w, &state.y, state.z, &cfg).unwrap();
        // sum rate log2(5) over power 5
        assert!((f - 5f64.log2() / 5.0).abs() < 1e-15);
        assert!((f - 0.46439).abs() < 1e-5);
        assert_eq!(eval_f1(&h, &w, &state.y, 0.0, &cfg).unwrap(), 0.0);
        let f0 = eval_f1(&h, &w, &[C64::new(0.0, 0.0)], 0.7, &cfg).unwrap();
        assert!((f0 + 0.49 * 5.0).abs() < 1e-15);
    }

    #[test]
    fn f1_domain_violation_is_reported() {
        let cfg = unit_config();
        let err = eval_f1(&scalar(1.0), &BeamMatrix(scalar(0.0)), &[C64::new(5.0, 0.0)], 1.0, &cfg).unwrap_err();
        assert_eq!(err.user, 0);
        assert!(err.value < 0.0);
    }

    #[test]
    fn projection_examples() {
        let mut w = BeamMatrix::zeros(2, 2);
        w.0[(0, 0)] = C64::new(0.3, 0.1);
        w.0[(1, 1)] = C64::new(2.0, 0.0);
        let p = project_row_power(&w, 1.0);
        assert_eq!(p.0.row(0), w.0.row(0));
        assert!((p.0[(1, 1)].re - 1.0).abs() < 1e-15);
        assert_eq!(project_row_power(&p, 1.0), p);
        let feasible = project_row_power(&p, 4.0);
        assert_eq!(feasible, p);
    }

    #[test]
    fn matched_filter_saturates_loudest_ap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = CMatrix::from_fn(2, 4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let w = matched_filter(&h, 0.7);
        assert!((w.max_row_power() - 0.7).abs() < 1e-12);
        let hw = &h * &w.0;
        for k in 0..2 {
            assert!(hw[(k, k)].im.abs() < 1e-12 && hw[(k, k)].re > 0.0);
        }
    }

    #[test]
    fn stationary_start_is_returned_unchanged() {
        // K=1, M=1, no rate constraint: the optimum of the surrogate at fixed
        // (y, z) sits in the interior; starting there the solver must not move.
        let mut cfg = unit_config();
        cfg.p_ap = 1.0;
        cfg.p_max = 100.0;
        let h = scalar(1.0);
        let w0 = BeamMatrix(scalar(1.0));
        let state = BeamFpState::at(&h, &w0, &cfg);
        let opts = BeamSolverOptions::default();
        let first = solve_beam_subproblem(&h, &w0, &state, &cfg, &opts, 0.0);
        let again = solve_beam_subproblem(&h, &first.w, &state, &cfg, &opts, 0.0);
        assert!((again.w.0[(0, 0)] - first.w.0[(0, 0)]).norm() < 1e-6);
    }

    #[test]
    fn subproblem_is_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cfg = unit_config();
        cfg.p_ap = 0.2;
        cfg.r_min = 0.5;
        cfg.p_max = 1.0;
        let h = CMatrix::from_fn(2, 3, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 3.0);
        let w0 = matched_filter(&h, cfg.p_max);
        let state = BeamFpState::at(&h, &w0, &cfg);
        let opts = BeamSolverOptions::default();
        let start = penalized_surrogate(&h, &w0, &state, &cfg, 10.0);
        let out = solve_beam_subproblem(&h, &w0, &state, &cfg, &opts, 10.0);
        assert!(out.objective >= start);
        assert!(out.w.max_row_power() <= cfg.p_max * (1.0 + 1e-12));
    }
}
