//! Semidefinite relaxation of the phase subproblem.
//!
//! Lifting `q = [conj(p); 1]` (so `q = [v; 1]`) and `Q = q q^H` turns the bare
//! surrogate into `tr(Θ̄ Q)` with `Θ̄ = [-Θ, u; u^H, 0]`, and every received
//! power into `tr(C_kj Q) + |b_kj|²` with `C_kj = [a a^H, a b*; b a^H, 0]`.
//! Dropping `rank(Q) = 1` leaves a convex program: a linear objective, unit
//! diagonal, linear rate constraints and `Q ⪰ 0`.
//!
//! The program is solved by ADMM on the split `X = Z`, where `X` lives in the
//! affine/half-space set (unit diagonal plus rate constraints) and `Z` in the
//! PSD cone. Feasible unit-modulus phases are recovered by Gaussian
//! randomization.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::channel::{complex_normal, PhaseVector};
use crate::linalg::{frobenius_sq, hermitian_part, inner, norm_sqr, project_psd, psd_factor, CMatrix, CVector, C64};
use crate::phase::CascadedCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    /// (I+1) x (I+1).
    pub theta_bar: CMatrix,
    /// `c[k][j]`, (I+1) x (I+1) each.
    pub c: Vec<Vec<CMatrix>>,
    /// `|b_kj|²`.
    pub b_abs2: DMatrix<f64>,
    pub sigma2: f64,
    pub r_min: f64,
}

/// `q = [conj(p); 1]`.
pub fn lift(v: &PhaseVector) -> CVector {
    let p = v.entries();
    let n = p.len();
    CVector::from_fn(n + 1, |i, _| if i < n { p[i].conj() } else { C64::new(1.0, 0.0) })
}

fn lifted_block(a: &CVector, corner_col: &CVector, corner: C64) -> CMatrix {
    let n = a.len();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(&(a * a.adjoint()));
    for i in 0..n {
        out[(i, n)] = corner_col[i];
        out[(n, i)] = corner_col[i].conj();
    }
    out[(n, n)] = corner;
    out
}

pub fn build_sdr(theta: &CMatrix, u: &CVector, coeffs: &CascadedCoefficients, sigma2: f64, r_min: f64) -> SdrProblem {
    let n = u.len();
    let mut theta_bar = CMatrix::zeros(n + 1, n + 1);
    theta_bar.view_mut((0, 0), (n, n)).copy_from(&(-theta));
    for i in 0..n {
        theta_bar[(i, n)] = u[i];
        theta_bar[(n, i)] = u[i].conj();
    }
    let k_users = coeffs.num_users();
    let c = (0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|j| {
                    let a = &coeffs.a[k][j];
                    let col = a * coeffs.b[(k, j)].conj();
                    lifted_block(a, &col, C64::new(0.0, 0.0))
                })
                .collect()
        })
        .collect();
    let b_abs2 = coeffs.b.map(norm_sqr);
    SdrProblem {
        theta_bar,
        c,
        b_abs2,
        sigma2,
        r_min,
    }
}

impl SdrProblem {
    pub fn dim(&self) -> usize {
        self.theta_bar.nrows()
    }

    /// `Re tr(Θ̄ Q)`.
    pub fn objective(&self, q: &CMatrix) -> f64 {
        inner(&self.theta_bar, q)
    }

    /// The relaxed objective evaluated at the rank-one lift of `v`.
    pub fn rank_one_objective(&self, v: &PhaseVector) -> f64 {
        let q = lift(v);
        crate::linalg::quad_form(&self.theta_bar, &q)
    }

    /// Rate constraints as `(D_k, e_k)` meaning `Re tr(D_k Q) + e_k <= 0`.
    /// Empty when `R_min <= 0`.
    pub fn rate_constraints(&self) -> Vec<(CMatrix, f64)> {
        if self.r_min <= 0.0 {
            return Vec::new();
        }
        let tau = 2f64.powf(self.r_min) - 1.0;
        let k_users = self.c.len();
        (0..k_users)
            .map(|k| {
                let mut d = self.c[k][k].map(|z| -z / tau);
                let mut e = self.sigma2 - self.b_abs2[(k, k)] / tau;
                for j in (0..k_users).filter(|&j| j != k) {
                    d += &self.c[k][j];
                    e += self.b_abs2[(k, j)];
                }
                (d, e)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrOptions {
    pub max_iters: usize,
    /// Residual tolerance, relative to the normalized objective.
    pub tol: f64,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
    pub enforce_rates: bool,
}

impl Default for SdrOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-10,
            rho: 1.0,
            enforce_rates: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrSolution {
    /// Hermitian PSD with unit diagonal.
    pub q: CMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The rate constraints were found infeasible and dropped for this call.
    pub rate_constraints_dropped: bool,
}

/// Unit-diagonal set intersected with normalized half-spaces
/// `<D'_k, X_off> <= beta_k` acting on the off-diagonal part.
struct AffineSet {
    rows: Vec<CMatrix>,
    beta: Vec<f64>,
    gram: DMatrix<f64>,
}

impl AffineSet {
    /// `None` if some constraint cannot be met by any unit-diagonal matrix.
    fn new(n: usize, constraints: &[(CMatrix, f64)]) -> Option<Self> {
        let mut rows = Vec::new();
        let mut beta = Vec::new();
        for (d, e) in constraints {
            let diag_sum: f64 = (0..n).map(|i| d[(i, i)].re).sum();
            let mut off = hermitian_part(d);
            for i in 0..n {
                off[(i, i)] = C64::new(0.0, 0.0);
            }
            let b = -e - diag_sum;
            let norm = frobenius_sq(&off).sqrt();
            let scale = norm.max(e.abs()).max(diag_sum.abs()).max(f64::MIN_POSITIVE);
            if norm <= 1e-14 * scale {
                if b < -1e-12 * scale {
                    return None;
                }
                continue;
            }
            rows.push(off.map(|z| z / norm));
            beta.push(b / norm);
        }
        let m = rows.len();
        let gram = DMatrix::from_fn(m, m, |i, j| inner(&rows[i], &rows[j]));
        Some(Self { rows, beta, gram })
    }

    fn project(&self, y: &CMatrix) -> CMatrix {
        let n = y.nrows();
        let mut x = hermitian_part(y);
        for i in 0..n {
            x[(i, i)] = C64::new(0.0, 0.0);
        }
        let m = self.rows.len();
        if m > 0 {
            let s: Vec<f64> = (0..m).map(|k| inner(&self.rows[k], &x) - self.beta[k]).collect();
            if s.iter().any(|&v| v > 0.0) {
                let lambda = self.solve_multipliers(&s);
                for (k, l) in lambda.iter().enumerate() {
                    if *l > 0.0 {
                        x -= self.rows[k].map(|z| z * *l);
                    }
                }
            }
        }
        for i in 0..n {
            x[(i, i)] = C64::new(1.0, 0.0);
        }
        x
    }

    /// Projected Gauss-Seidel on `λ >= 0, Gλ >= s, λ ⊥ (Gλ - s)`.
    fn solve_multipliers(&self, s: &[f64]) -> Vec<f64> {
        let m = s.len();
        let mut lambda = alloc::vec![0.0; m];
        for _ in 0..10_000 {
            let mut change: f64 = 0.0;
            for k in 0..m {
                let mut r = s[k];
                for l in 0..m {
                    if l != k {
                        r -= self.gram[(k, l)] * lambda[l];
                    }
                }
                let next = (r / self.gram[(k, k)]).max(0.0);
                change = change.max((next - lambda[k]).abs());
                lambda[k] = next;
            }
            let size = lambda.iter().cloned().fold(1.0, f64::max);
            if change <= 1e-15 * size {
                break;
            }
        }
        lambda
    }
}

struct AdmmResult {
    z: CMatrix,
    iterations: usize,
    converged: bool,
}

fn admm(problem: &SdrProblem, set: &AffineSet, opts: &SdrOptions) -> AdmmResult {
    let n = problem.dim();
    let scale = frobenius_sq(&problem.theta_bar).sqrt();
    if scale == 0.0 && set.rows.is_empty() {
        return AdmmResult {
            z: CMatrix::identity(n, n),
            iterations: 0,
            converged: true,
        };
    }
    let c = problem.theta_bar.map(|z| z / scale.max(f64::MIN_POSITIVE));
    let mut rho = opts.rho;
    let mut z = CMatrix::identity(n, n);
    let mut u = CMatrix::zeros(n, n);
    let threshold = opts.tol * n as f64;
    for it in 1..=opts.max_iters {
        let x = set.project(&(&z - &u + c.map(|v| v / rho)));
        let z_prev = z;
        z = project_psd(&(&x + &u));
        let diff = &x - &z;
        u += &diff;
        let primal = frobenius_sq(&diff).sqrt();
        let dual = rho * frobenius_sq(&(&z - &z_prev)).sqrt();
        if primal <= threshold && dual <= threshold {
            return AdmmResult {
                z,
                iterations: it,
                converged: true,
            };
        }
        if it % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u = u.map(|v| v * 0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u = u.map(|v| v * 2.0);
            }
        }
    }
    AdmmResult {
        z,
        iterations: opts.max_iters,
        converged: false,
    }
}

/// `D^{-1/2} Z D^{-1/2}` with `D = diag(Z)`: unit diagonal, still PSD.
fn normalize_diagonal(z: &CMatrix) -> CMatrix {
    let n = z.nrows();
    let d: Vec<f64> = (0..n).map(|i| z[(i, i)].re.max(f64::MIN_POSITIVE).sqrt()).collect();
    CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { z[(i, j)] / (d[i] * d[j]) })
}

/// Solves the relaxed program.
///
/// When the rate constraints admit no PSD solution (ADMM fails to close the
/// primal gap), they are dropped and the problem is solved again; the
/// returned solution says so.
pub fn solve_sdr(problem: &SdrProblem, opts: &SdrOptions) -> SdrSolution {
    let n = problem.dim();
    let constraints = if opts.enforce_rates { problem.rate_constraints() } else { Vec::new() };
    let mut dropped = false;
    let mut result = None;
    if !constraints.is_empty() {
        match AffineSet::new(n, &constraints) {
            Some(set) => {
                let r = admm(problem, &set, opts);
                if r.converged {
                    result = Some(r);
                } else {
                    dropped = true;
                }
            }
            None => dropped = true,
        }
    }
    let r = match result {
        Some(r) => r,
        None => {
            let set = AffineSet::new(n, &[]).expect("empty constraint set is feasible");
            admm(problem, &set, opts)
        }
    };
    let q = normalize_diagonal(&r.z);
    SdrSolution {
        objective: problem.objective(&q),
        q,
        iterations: r.iterations,
        converged: r.converged,
        rate_constraints_dropped: dropped,
    }
}

/// Draws `num_candidates` vectors `S r` with `Q = S S^H`, `r ~ CN(0, I)`, maps
/// each to unit modulus via `θ_i = -arg(q_i / q_last)` and keeps the one with
/// the highest `evaluator` score (first found on ties).
pub fn gaussian_randomization<R, F>(q: &CMatrix, num_candidates: usize, rng: &mut R, mut evaluator: F) -> PhaseVector
where
    R: Rng + ?Sized,
    F: FnMut(&PhaseVector) -> f64,
{
    let n = q.nrows();
    let factor = psd_factor(q);
    let mut best: Option<(f64, PhaseVector)> = None;
    for _ in 0..num_candidates.max(1) {
        let mut draw = None;
        for _ in 0..64 {
            let r = CVector::from_fn(n, |_, _| complex_normal(rng));
            let sample = &factor * r;
            if sample[n - 1].norm() > 0.0 {
                draw = Some(sample);
                break;
            }
        }
        // a zero last row means Q carries no phase reference; use raw phases
        let candidate = match draw {
            Some(s) => {
                let reference = s[n - 1];
                PhaseVector::from_complex((0..n - 1).map(|i| (s[i] / reference).conj()))
            }
            None => {
                let r = CVector::from_fn(n, |_, _| complex_normal(rng));
                let s = &factor * r;
                PhaseVector::from_complex((0..n - 1).map(|i| s[i].conj()))
            }
        };
        let score = evaluator(&candidate);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, candidate));
        }
    }
    best.map(|(_, v)| v).expect("at least one candidate is drawn")
}
