//! IRS phase update for fixed beamforming.
//!
//! With `W` fixed, maximizing EE is the same as maximizing the sum rate. Writing
//! the received amplitudes as `x_kj = v^H a_kj + b_kj` and introducing
//! auxiliaries `γ` (moves the SINR out of the log) and `ε` (quadratic
//! transform of the resulting ratio) gives a concave quadratic in `v`:
//!
//! ```text
//! f2 = Σ_k (log2(1 + γ_k) - γ_k) - v^H Θ v + 2 Re{v^H u} + c
//! ```
//!
//! where `c` collects the terms that do not depend on `v`. The bare form
//! (without `c`) has the same maximizer. With [`PhaseVector`] holding the
//! entries `p` of `v^H`, `v^H Θ v = p^T Θ conj(p)` and `v^H u = p^T u`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::linalg::{norm_sqr, CMatrix, CVector, C64};
use crate::metrics::{BeamMatrix, Evaluation};
use crate::sdr::{build_sdr, gaussian_randomization, solve_sdr, SdrOptions};

/// `a_kj = G_{AIU,k} w_j` and `b_kj = g^H_{AU,k} w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedCoefficients {
    /// `a[k][j]`, I entries each.
    pub a: Vec<Vec<CVector>>,
    /// K x K.
    pub b: CMatrix,
}

impl CascadedCoefficients {
    pub fn num_users(&self) -> usize {
        self.b.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.a.first().and_then(|r| r.first()).map_or(0, |a| a.len())
    }

    /// `v^H a_kj + b_kj` for phase entries `p`.
    pub fn amplitude(&self, p: &CVector, k: usize, j: usize) -> C64 {
        let a = &self.a[k][j];
        let mut acc = self.b[(k, j)];
        for i in 0..a.len() {
            acc += p[i] * a[i];
        }
        acc
    }

    /// All amplitudes, K x K.
    pub fn amplitudes(&self, p: &CVector) -> CMatrix {
        let k = self.num_users();
        CMatrix::from_fn(k, k, |r, c| self.amplitude(p, r, c))
    }
}

pub fn build_coefficients(channels: &ChannelSet, w: &BeamMatrix) -> CascadedCoefficients {
    let k_users = channels.num_users();
    let a = (0..k_users)
        .map(|k| (0..k_users).map(|j| &channels.cascaded[k] * w.0.column(j)).collect())
        .collect();
    let b = &channels.direct * &w.0;
    CascadedCoefficients { a, b }
}

/// `γ_k = |x_kk|² / (Σ_{j≠k} |x_kj|² + σ²)`.
pub fn update_gamma(v: &PhaseVector, coeffs: &CascadedCoefficients, sigma2: f64) -> Vec<f64> {
    let x = coeffs.amplitudes(&v.entries());
    let k_users = coeffs.num_users();
    (0..k_users)
        .map(|k| {
            let interference: f64 = (0..k_users).filter(|&j| j != k).map(|j| norm_sqr(x[(k, j)])).sum();
            norm_sqr(x[(k, k)]) / (interference + sigma2)
        })
        .collect()
}

/// `ε_k = sqrt(1 + γ_k) x_kk / (Σ_j |x_kj|² + σ²)`.
pub fn update_epsilon(v: &PhaseVector, gamma: &[f64], coeffs: &CascadedCoefficients, sigma2: f64) -> Vec<C64> {
    let x = coeffs.amplitudes(&v.entries());
    let k_users = coeffs.num_users();
    (0..k_users)
        .map(|k| {
            let total: f64 = (0..k_users).map(|j| norm_sqr(x[(k, j)])).sum::<f64>() + sigma2;
            x[(k, k)] * ((1.0 + gamma[k]).sqrt() / total)
        })
        .collect()
}

/// `Θ = Σ_k Σ_j |ε_k|² a_kj a_kj^H` and
/// `u = Σ_k (sqrt(1+γ_k) ε_k* a_kk - |ε_k|² Σ_j b_kj* a_kj)`.
pub fn build_quadratic_form(gamma: &[f64], epsilon: &[C64], coeffs: &CascadedCoefficients) -> (CMatrix, CVector) {
    let n = coeffs.num_elements();
    let k_users = coeffs.num_users();
    let mut theta = CMatrix::zeros(n, n);
    let mut u = CVector::zeros(n);
    for k in 0..k_users {
        let e2 = norm_sqr(epsilon[k]);
        for j in 0..k_users {
            let a = &coeffs.a[k][j];
            if e2 != 0.0 {
                theta.gerc(C64::new(e2, 0.0), a, a, C64::new(1.0, 0.0));
            }
            u -= a * (coeffs.b[(k, j)].conj() * e2);
        }
        u += &coeffs.a[k][k] * (epsilon[k].conj() * (1.0 + gamma[k]).sqrt());
    }
    (theta, u)
}

/// Lagrangian-dual / quadratic-transform auxiliaries and the quadratic form
/// they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFpState {
    pub gamma: Vec<f64>,
    pub epsilon: Vec<C64>,
    pub theta: CMatrix,
    pub u: CVector,
}

impl PhaseFpState {
    /// Optimal auxiliaries at `v`.
    pub fn at(v: &PhaseVector, coeffs: &CascadedCoefficients, sigma2: f64) -> Self {
        let gamma = update_gamma(v, coeffs, sigma2);
        let epsilon = update_epsilon(v, &gamma, coeffs, sigma2);
        let (theta, u) = build_quadratic_form(&gamma, &epsilon, coeffs);
        Self {
            gamma,
            epsilon,
            theta,
            u,
        }
    }
}

/// `-v^H Θ v + 2 Re{v^H u}` with `v^H = p^T`.
pub fn f2_v_part(p: &CVector, theta: &CMatrix, u: &CVector) -> f64 {
    let pc = p.map(|z| z.conj());
    let quad = (p.transpose() * theta * &pc)[(0, 0)].re;
    let lin = p.iter().zip(u.iter()).map(|(a, b)| (a * b).re).sum::<f64>();
    -quad + 2.0 * lin
}

/// `Σ_k [2 sqrt(1+γ_k) Re{ε_k* b_kk} - |ε_k|² (Σ_j |b_kj|² + σ²)]`.
pub fn f2_constant(gamma: &[f64], epsilon: &[C64], coeffs: &CascadedCoefficients, sigma2: f64) -> f64 {
    let k_users = coeffs.num_users();
    (0..k_users)
        .map(|k| {
            let b_total: f64 = (0..k_users).map(|j| norm_sqr(coeffs.b[(k, j)])).sum();
            2.0 * (1.0 + gamma[k]).sqrt() * (epsilon[k].conj() * coeffs.b[(k, k)]).re
                - norm_sqr(epsilon[k]) * (b_total + sigma2)
        })
        .sum()
}

/// Surrogate value; `with_constant` adds the `v`-independent terms so the value
/// equals the sum rate at the optimal auxiliaries.
pub fn eval_f2(
    v: &PhaseVector,
    state: &PhaseFpState,
    with_constant: bool,
    coeffs: &CascadedCoefficients,
    sigma2: f64,
) -> f64 {
    let base: f64 = state.gamma.iter().map(|g| (1.0 + g).log2() - g).sum();
    let mut value = base + f2_v_part(&v.entries(), &state.theta, &state.u);
    if with_constant {
        value += f2_constant(&state.gamma, &state.epsilon, coeffs, sigma2);
    }
    value
}

/// Closed-form coordinate ascent on `-v^H Θ v + 2 Re{v^H u}`.
///
/// With the other entries frozen, the objective in `p_i` is
/// `2 Re{p_i c_i} + const` with `c_i = u_i - Σ_{j≠i} Θ_ij conj(p_j)`, maximized
/// by `θ_i = -arg(c_i)`. A zero coefficient leaves the angle unchanged.
pub fn bcd_phase_update(v: &PhaseVector, theta: &CMatrix, u: &CVector, passes: usize) -> PhaseVector {
    let mut out = v.clone();
    let mut p = v.entries();
    let n = p.len();
    for _ in 0..passes {
        for i in 0..n {
            let mut c = u[i];
            for j in 0..n {
                if j != i {
                    c -= theta[(i, j)] * p[j].conj();
                }
            }
            if c.norm() > 0.0 {
                out.set_angle(i, -c.arg());
                p[i] = crate::linalg::cis(out.angles()[i]);
            }
        }
    }
    out
}

/// Moves each angle a fraction `s` of the shortest arc from `from` to `to`.
pub fn interpolate_phases(from: &PhaseVector, to: &PhaseVector, s: f64) -> PhaseVector {
    PhaseVector::from_angles(from.angles().iter().zip(to.angles()).map(|(a, b)| {
        let mut d = b - a;
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        a + s * d
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseBackend {
    /// Per-element closed-form coordinate ascent.
    Bcd,
    /// Semidefinite relaxation plus Gaussian randomization.
    Sdr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptions {
    /// Auxiliary-update passes.
    pub max_passes: usize,
    /// Coordinate sweeps per pass (BCD backend).
    pub bcd_sweeps: usize,
    /// Relative EE gain below which passes stop.
    pub ee_tol: f64,
    pub sdr: SdrOptions,
    pub randomization_candidates: usize,
    /// Halvings of the arc toward a rejected candidate before a pass gives up.
    pub backtracks: usize,
    pub seed: u64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            max_passes: 50,
            bcd_sweeps: 5,
            ee_tol: 1e-4,
            sdr: SdrOptions::default(),
            randomization_candidates: 100,
            backtracks: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTraceRow {
    pub iteration: usize,
    /// Bare surrogate at the auxiliaries of the previous iterate.
    pub f2: f64,
    pub sum_rate: f64,
    pub ee: f64,
    pub modulus_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub v: PhaseVector,
    pub eval: Evaluation,
    pub trace: Vec<PhaseTraceRow>,
    pub sdr_unconverged: usize,
    pub sdr_rate_constraints_dropped: usize,
}

/// Alternates the auxiliary updates and the chosen backend for fixed `W`.
///
/// Stops when a pass does not improve (feasibility first, then EE) or gains
/// less than `opts.ee_tol`; returns the best iterate. The BCD backend ignores
/// the rate constraints inside its sweeps; both backends are judged on the
/// true rates afterwards.
pub fn optimize_phases(
    channels: &ChannelSet,
    w: &BeamMatrix,
    v_init: &PhaseVector,
    config: &ScenarioConfig,
    backend: PhaseBackend,
    opts: &PhaseOptions,
) -> PhaseOutcome {
    let coeffs = build_coefficients(channels, w);
    let mut v = v_init.clone();
    let mut best = Evaluation::new(channels, &v, w, config);
    let state0 = PhaseFpState::at(&v, &coeffs, config.sigma2);
    let mut trace = alloc::vec![PhaseTraceRow {
        iteration: 0,
        f2: eval_f2(&v, &state0, false, &coeffs, config.sigma2),
        sum_rate: best.sum_rate(),
        ee: best.ee,
        modulus_deviation: v.max_modulus_deviation(),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sdr_unconverged = 0;
    let mut sdr_rate_constraints_dropped = 0;

    if v.is_empty() {
        return PhaseOutcome {
            v,
            eval: best,
            trace,
            sdr_unconverged,
            sdr_rate_constraints_dropped,
        };
    }

    for pass in 1..=opts.max_passes {
        let state = PhaseFpState::at(&v, &coeffs, config.sigma2);
        let candidate = match backend {
            PhaseBackend::Bcd => bcd_phase_update(&v, &state.theta, &state.u, opts.bcd_sweeps),
            PhaseBackend::Sdr => {
                let problem = build_sdr(&state.theta, &state.u, &coeffs, config.sigma2, config.r_min);
                let solved = solve_sdr(&problem, &opts.sdr);
                if !solved.converged {
                    sdr_unconverged += 1;
                }
                if solved.rate_constraints_dropped {
                    sdr_rate_constraints_dropped += 1;
                }
                let evaluator = |cand: &PhaseVector| {
                    let e = Evaluation::new(channels, cand, w, config);
                    // rate-feasible candidates first, then sum rate
                    let penalty = if e.report.rates_ok() { 0.0 } else { 1e6 * (1.0 + e.report.rate_shortfall()) };
                    e.sum_rate() - penalty
                };
                gaussian_randomization(&solved.q, opts.randomization_candidates, &mut rng, evaluator)
            }
        };
        let mut candidate = candidate;
        let mut eval = Evaluation::new(channels, &candidate, w, config);
        for _ in 0..opts.backtracks {
            if eval.gain_over(&best).is_some() {
                break;
            }
            candidate = interpolate_phases(&v, &candidate, 0.5);
            eval = Evaluation::new(channels, &candidate, w, config);
        }
        match eval.gain_over(&best) {
            Some(gain) => {
                trace.push(PhaseTraceRow {
                    iteration: pass,
                    f2: eval_f2(&candidate, &state, false, &coeffs, config.sigma2),
                    sum_rate: eval.sum_rate(),
                    ee: eval.ee,
                    modulus_deviation: candidate.max_modulus_deviation(),
                });
                v = candidate;
                best = eval;
                if gain < opts.ee_tol {
                    break;
                }
            }
            None => break,
        }
    }
    PhaseOutcome {
        v,
        eval: best,
        trace,
        sdr_unconverged,
        sdr_rate_constraints_dropped,
    }
}
