//! Semidefinite relaxation of the single-beam problem and randomized rounding.
//!
//! Lifting `X = w wᴴ` and dropping the rank constraint gives the concave
//! program
//!
//! ```text
//! maximize  Σ_i α_i log(1 + γ_i h_iᴴ X h_i)   s.t.  X ⪰ 0,  X_mm ≤ 1/M
//! ```
//!
//! whose optimum bounds every feasible single beam from above.
//!
//! Three solvers are provided. [`SdrSolver::Interior`], the default, follows
//! the central path of a log-barrier formulation with damped Newton steps; the
//! objective only sees `X` through K rank-one forms and the box barrier only
//! through the diagonal, so each Newton system collapses to a dense solve of
//! size K + M. The barrier multipliers give a duality gap of `2M/t`.
//! [`SdrSolver::Factored`] writes `X = V Vᴴ` with a
//! square `V`; the diagonal box becomes a per-row norm bound on `V`, so
//! projected gradient ascent only needs the row-wise radial projection. Any
//! stationary point with full-rank `V` (or rank-deficient and second-order
//! critical) is a global optimum of the lifted program, and every returned
//! solution carries a duality-gap certificate. [`SdrSolver::Lifted`] runs
//! projected gradient ascent on `X` directly, projecting onto the intersection
//! of the PSD cone and the box with Dykstra's alternating projections; it is
//! exact but slow and mostly serves as a cross-check on small arrays.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{unit_phasor, Link};
use crate::composition::sb_sbc;
use crate::error::{HybfError, Result};
use crate::linalg::{cholesky_pd, hermitian_eigen, hermitize, project_psd, real_inner};
use crate::projection::project_in_place;
use crate::{CMatrix, CVector, C64};

/// Relative eigenvalue gap below which the relaxed solution counts as rank one.
pub const RANK_ONE_THRESHOLD: f64 = 1e-6;

const CERTIFICATE_PERIOD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdrSolver {
    #[default]
    Interior,
    Factored,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdrConfig {
    pub solver: SdrSolver,
    /// Stationarity tolerance on the unit-step projected-gradient residual.
    pub tol: f64,
    /// Largest accepted duality gap, in nats.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-increase constant.
    pub sigma: f64,
    /// Step shrink factor during backtracking.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Barrier weight growth per centering stage (interior solver).
    pub barrier_growth: f64,
    /// Inner-loop limit of the alternating projections (lifted solver).
    pub dykstra_max_iters: usize,
    /// Keep per-iteration traces in [`SolverDiagnostics`].
    pub record_trace: bool,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            solver: SdrSolver::Interior,
            tol: 1e-7,
            gap_tol: 5e-7,
            max_iters: 50_000,
            sigma: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            barrier_growth: 10.0,
            dykstra_max_iters: 5_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub projections: usize,
    pub dykstra_iterations: usize,
    pub certificates: usize,
    pub objective_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
}

/// Optimal point of the relaxed program.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub x: CMatrix,
    pub objective_nats: f64,
    /// Projected-gradient fixed-point residual for the first-order solvers,
    /// barrier complementarity `2M/t` for the interior solver.
    pub kkt_residual: f64,
    /// Certified bound on `optimum − objective_nats`.
    pub duality_gap: f64,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
    pub rank_one: bool,
    pub diagnostics: SolverDiagnostics,
}

impl RelaxedSolution {
    pub fn upper_bound_bits(&self) -> f64 {
        upper_bound_bits(self)
    }

    /// Objective plus the certified gap; never below the true optimum.
    pub fn dual_bound_bits(&self) -> f64 {
        (self.objective_nats + self.duality_gap) / LN_2
    }
}

/// `Σ α log(1 + γ hᴴ X h)` in nats.
pub fn relaxed_objective(x: &CMatrix, links: &[Link]) -> f64 {
    links
        .iter()
        .map(|l| l.weight * (l.gamma * quad(x, &l.steering)).ln_1p())
        .sum()
}

fn quad(x: &CMatrix, h: &CVector) -> f64 {
    h.dotc(&(x * h)).re
}

/// `∇f(X) = Σ α γ h hᴴ / (1 + γ hᴴ X h)`.
pub fn relaxed_gradient(x: &CMatrix, links: &[Link]) -> CMatrix {
    let m = x.nrows();
    let mut g = CMatrix::zeros(m, m);
    for l in links {
        let c = l.weight * l.gamma / (1.0 + l.gamma * quad(x, &l.steering));
        g.ger(C64::new(c, 0.0), &l.steering, &l.steering.conjugate(), C64::new(1.0, 0.0));
    }
    g
}

/// Weak-duality gap of a feasible `x` with gradient `g`.
///
/// Concavity gives `f(Y) ≤ f(X) + ⟨G, Y − X⟩`, and for any `μ ≥ 0` with
/// `Diag(μ) ⪰ G` every feasible `Y` has `⟨G, Y⟩ ≤ Σ μ_m / M`. The multipliers
/// are read off the stationarity condition and shifted until dual feasible.
pub fn duality_gap(x: &CMatrix, g: &CMatrix) -> f64 {
    let gx = g * x;
    let mu: Vec<f64> = (0..x.nrows())
        .map(|k| {
            let d = x[(k, k)].re;
            if d > 1e-300 {
                (gx[(k, k)].re / d).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    gap_with_multipliers(x, g, &mu)
}

/// Gap bound from candidate box multipliers `mu`, shifted until `Diag(μ) ⪰ G`.
pub fn gap_with_multipliers(x: &CMatrix, g: &CMatrix, mu: &[f64]) -> f64 {
    let m = x.nrows();
    let cap = 1.0 / m as f64;
    let mu: Vec<f64> = mu.iter().map(|v| v.max(0.0)).collect();
    let mut slack = g.clone();
    for k in 0..m {
        slack[(k, k)] -= C64::new(mu[k], 0.0);
    }
    let (vals, _) = hermitian_eigen(&slack);
    let shift = vals[0].max(0.0);
    let trace_gx = real_inner(g, x);
    ((mu.iter().sum::<f64>() + m as f64 * shift) * cap - trace_gx).max(0.0)
}

fn clip_diagonal(x: &mut CMatrix, cap: f64) {
    for k in 0..x.nrows() {
        let d = x[(k, k)].re;
        x[(k, k)] = C64::new(d.min(cap), 0.0);
    }
}

/// Dykstra's alternating projections of `y` onto `{X ⪰ 0} ∩ {X_mm ≤ cap}`.
///
/// Returns the final PSD iterate and the number of sweeps. Iteration stops when
/// successive iterates move less than `tol` in Frobenius norm.
pub fn project_psd_box(y: &CMatrix, cap: f64, tol: f64, max_iters: usize) -> (CMatrix, usize) {
    let n = y.nrows();
    let mut x = hermitize(y);
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    for it in 1..=max_iters {
        let mut b = &x + &p;
        clip_diagonal(&mut b, cap);
        p = &x + &p - &b;
        let next = project_psd(&(&b + &q));
        q = &b + &q - &next;
        let moved = (&next - &x).norm();
        x = next;
        if moved < tol && (it > 1 || diag_ok(&x, cap, tol)) {
            return (x, it);
        }
    }
    (x, max_iters)
}

fn diag_ok(x: &CMatrix, cap: f64, tol: f64) -> bool {
    (0..x.nrows()).all(|k| x[(k, k)].re <= cap + tol)
}

/// Congruence `S X S` with `S = diag(min(1, √(cap/X_mm)))`: keeps X PSD and
/// enforces the diagonal box exactly.
fn repair_diagonal(x: &CMatrix, cap: f64) -> CMatrix {
    let n = x.nrows();
    let s: Vec<f64> = (0..n)
        .map(|k| {
            let d = x[(k, k)].re;
            if d > cap {
                (cap / d).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    hermitize(&CMatrix::from_fn(n, n, |r, c| x[(r, c)] * (s[r] * s[c])))
}

/// Maximizes the relaxed single-beam objective for one section's hotspots.
pub fn solve_relaxed(links: &[Link], cfg: &SdrConfig) -> Result<RelaxedSolution> {
    if links.is_empty() {
        return Err(HybfError::EmptyInput("section hotspots"));
    }
    let m = links[0].steering.len();
    let cap = 1.0 / m as f64;
    let certify = |(x, residual, mut diag): (CMatrix, f64, SolverDiagnostics)| {
        let x = repair_diagonal(&x, cap);
        let gap = duality_gap(&x, &relaxed_gradient(&x, links));
        diag.certificates += 1;
        (x, residual, gap, diag)
    };
    let (x, residual, gap, diag) = match cfg.solver {
        SdrSolver::Factored => {
            let rank = thin_rank(m, links.len());
            let thin = certify(solve_factored(links, cfg, rank)?);
            if thin.2 <= cfg.gap_tol || rank == m {
                thin
            } else {
                let (x, residual, gap, mut diag) = certify(solve_factored(links, cfg, m)?);
                diag.iterations += thin.3.iterations;
                diag.projections += thin.3.projections;
                diag.certificates += thin.3.certificates;
                (x, residual, gap, diag)
            }
        }
        SdrSolver::Lifted => certify(solve_lifted(links, cfg)?),
        SdrSolver::Interior => {
            let (x, residual, gap, mut diag) = solve_interior(links, cfg)?;
            let (xp, gp, pdiag) = purify(links, cfg, &x, gap)?;
            diag.iterations += pdiag.iterations;
            diag.projections += pdiag.projections;
            diag.certificates += pdiag.certificates;
            (xp, residual, gp, diag)
        }
    };
    let objective_nats = relaxed_objective(&x, links);
    let unconverged = match cfg.solver {
        SdrSolver::Interior => gap > cfg.gap_tol,
        _ => residual > cfg.tol && gap > cfg.gap_tol,
    };
    if unconverged {
        return Err(HybfError::SolverNotConverged {
            iterations: diag.iterations,
            residual,
        });
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(&x);
    let rank_one = eigenvalues.len() < 2
        || eigenvalues[0] <= 0.0
        || eigenvalues[1].max(0.0) / eigenvalues[0] < RANK_ONE_THRESHOLD;
    Ok(RelaxedSolution {
        x,
        objective_nats,
        kkt_residual: residual,
        duality_gap: gap,
        eigenvalues,
        eigenvectors,
        rank_one,
        diagnostics: diag,
    })
}

/// Channel data packed for the factored solver.
struct Packed {
    /// Steering vectors as columns.
    h: CMatrix,
    weight: Vec<f64>,
    gamma: Vec<f64>,
}

impl Packed {
    fn new(links: &[Link]) -> Self {
        let cols: Vec<CVector> = links.iter().map(|l| l.steering.clone()).collect();
        Self {
            h: CMatrix::from_columns(&cols),
            weight: links.iter().map(|l| l.weight).collect(),
            gamma: links.iter().map(|l| l.gamma).collect(),
        }
    }

    /// Objective and `∂F/∂V* = G V` at `v`.
    fn eval(&self, v: &CMatrix, with_grad: bool) -> (f64, Option<CMatrix>) {
        let mut a = self.h.adjoint() * v;
        let mut f = 0.0;
        for i in 0..a.nrows() {
            let q: f64 = a.row(i).iter().map(|z| z.norm_sqr()).sum();
            f += self.weight[i] * (self.gamma[i] * q).ln_1p();
            let c = self.weight[i] * self.gamma[i] / (1.0 + self.gamma[i] * q);
            for z in a.row_mut(i).iter_mut() {
                *z *= c;
            }
        }
        (f, with_grad.then(|| &self.h * a))
    }
}

fn projected(v: &CMatrix, dir: &CMatrix, t: f64) -> CMatrix {
    let mut out = v + dir * C64::new(t, 0.0);
    project_in_place(&mut out);
    out
}

/// Number of factor columns tried first. An optimal `X` of rank `r` with
/// `r² ≤ M + K` always exists, so a thin factor usually suffices and converges
/// faster; the duality gap decides whether a full-width retry is needed.
fn thin_rank(m: usize, k: usize) -> usize {
    (((m + k) as f64).sqrt().ceil() as usize + 1).min(m)
}

fn solve_factored(links: &[Link], cfg: &SdrConfig, rank: usize) -> Result<(CMatrix, f64, SolverDiagnostics)> {
    let m = links[0].steering.len();
    // Mostly the conjugate beam, plus a small full-rank DFT component so that
    // no direction of the factor starts out frozen.
    let w0 = sb_sbc(links)?;
    let spread = (0.1 / (m * rank) as f64).sqrt();
    let mut v = CMatrix::from_fn(m, rank, |r, c| {
        unit_phasor(2.0 * PI * (r * c) as f64 / m as f64) * spread
    });
    for r in 0..m {
        v[(r, 0)] += w0[r] * 0.9f64.sqrt();
    }
    factored_ascent(links, cfg, v)
}

/// Projected gradient ascent on the factor `V` of `X = V Vᴴ` from `v`.
fn factored_ascent(links: &[Link], cfg: &SdrConfig, mut v: CMatrix) -> Result<(CMatrix, f64, SolverDiagnostics)> {
    let packed = Packed::new(links);
    let mut diag = SolverDiagnostics::default();
    project_in_place(&mut v);

    let (mut f, g) = packed.eval(&v, true);
    let mut g = g.unwrap();
    let mut step = 1.0;
    let mut residual = (&v - projected(&v, &g, 1.0)).norm();

    for k in 0..cfg.max_iters {
        diag.iterations = k + 1;
        if residual <= cfg.tol {
            break;
        }
        // The gap certificate costs an eigendecomposition, so it is only
        // checked periodically once the iterates have settled.
        if k % CERTIFICATE_PERIOD == 0 && residual <= cfg.tol.sqrt() {
            let x = hermitize(&(&v * v.adjoint()));
            diag.certificates += 1;
            if duality_gap(&x, &relaxed_gradient(&x, links)) <= cfg.gap_tol {
                break;
            }
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..=cfg.max_backtracks {
            let cand = projected(&v, &g, t);
            diag.projections += 1;
            let (fc, _) = packed.eval(&cand, false);
            let ascent = 2.0 * real_inner(&g, &(&cand - &v));
            if fc >= f + cfg.sigma * ascent {
                accepted = Some((cand, fc, t));
                break;
            }
            t *= cfg.shrink;
        }
        let Some((next, f_next, t_used)) = accepted else {
            break;
        };
        let (_, g_next) = packed.eval(&next, true);
        let g_next = g_next.unwrap();
        let s = &next - &v;
        let sy = real_inner(&s, &(&g_next - &g));
        step = if sy < 0.0 {
            (s.norm_squared() / -sy).clamp(1e-8, 1e8)
        } else {
            (t_used * 2.0).min(1e8)
        };
        v = next;
        f = f_next;
        g = g_next;
        residual = (&v - projected(&v, &g, 1.0)).norm();
        if cfg.record_trace {
            diag.objective_trace.push(f);
            diag.residual_trace.push(residual);
        }
    }
    Ok((hermitize(&(&v * v.adjoint())), residual, diag))
}

/// Barrier objective `t f(X) + log det X`, or `None` outside the PSD interior.
fn barrier_value(x: &CMatrix, links: &[Link], t: f64) -> Option<f64> {
    let chol = cholesky_pd(x)?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|z| 2.0 * z.re.ln()).sum();
    logdet.is_finite().then(|| t * relaxed_objective(x, links) + logdet)
}

/// Newton direction of the barrier objective restricted to `diag Δ = 0`;
/// returns the direction and the squared Newton decrement.
///
/// The negated Hessian is `Δ ↦ X⁻¹ΔX⁻¹ + Σ_i c_i ⟨h_i h_iᴴ, Δ⟩ h_i h_iᴴ`, so the
/// direction has the form `Δ = X (∇ − Σ_j u_j A_j) X` with `A_j` ranging over
/// the `h_i h_iᴴ` and the diagonal units `E_m`. The K + M coefficients solve one
/// symmetric system built from `|q_jᴴ X q_k|²`, where `Q = [H, I]`.
fn newton_direction(x: &CMatrix, links: &[Link], t: f64) -> Option<(CMatrix, f64)> {
    let m = x.nrows();
    let k = links.len();
    let n = k + m;
    let mut grad = cholesky_pd(x)?.inverse();
    let mut q = CMatrix::zeros(m, n);
    let mut inv_c = vec![0.0; n];
    for (i, l) in links.iter().enumerate() {
        q.set_column(i, &l.steering);
        let denom = 1.0 + l.gamma * l.steering.dotc(&(x * &l.steering)).re;
        grad.ger(C64::new(t * l.weight * l.gamma / denom, 0.0), &l.steering, &l.steering.conjugate(), C64::new(1.0, 0.0));
        inv_c[i] = (denom / l.gamma).powi(2) / (t * l.weight);
    }
    for j in 0..m {
        q[(j, k + j)] = C64::new(1.0, 0.0);
    }
    let grad = hermitize(&grad);
    let xq = x * &q;
    let gram = q.adjoint() * &xq;
    let xgx = hermitize(&(x * &grad * x));
    // Row scaling keeps the diagonal to one before factorization.
    let raw = nalgebra::DMatrix::<f64>::from_fn(n, n, |a, b| gram[(a, b)].norm_sqr() + if a == b { inv_c[a] } else { 0.0 });
    let scale: Vec<f64> = (0..n).map(|a| 1.0 / raw[(a, a)].sqrt()).collect();
    let system = nalgebra::DMatrix::<f64>::from_fn(n, n, |a, b| raw[(a, b)] * scale[a] * scale[b]);
    let rhs = nalgebra::DVector::<f64>::from_fn(n, |a, _| scale[a] * q.column(a).dotc(&(&xgx * q.column(a))).re);
    let u = match nalgebra::Cholesky::new(system.clone()) {
        Some(ch) => ch.solve(&rhs),
        None => nalgebra::LU::new(system).solve(&rhs)?,
    };
    let mut weighted = xq.clone();
    for j in 0..n {
        weighted.column_mut(j).scale_mut(scale[j] * u[j]);
    }
    let mut delta = hermitize(&(xgx - weighted * xq.adjoint()));
    for a in 0..m {
        delta[(a, a)] = C64::new(0.0, 0.0);
    }
    let decrement = real_inner(&grad, &delta);
    Some((delta, decrement))
}

/// Iterations of factored ascent spent polishing the interior solution.
const PURIFY_ITERS: usize = 300;

/// Drops the barrier's interior component: keeps the dominant eigenspace of
/// `x` and polishes it with factored ascent. The interior bound
/// `f(x) + gap` still caps the optimum, so it certifies the polished point too.
fn purify(links: &[Link], cfg: &SdrConfig, x: &CMatrix, gap: f64) -> Result<(CMatrix, f64, SolverDiagnostics)> {
    let bound = relaxed_objective(x, links) + gap;
    let (vals, vecs) = hermitian_eigen(x);
    let keep = vals.iter().take_while(|&&v| v > 1e-6 * vals[0]).count().max(1);
    let v = CMatrix::from_fn(x.nrows(), keep, |r, c| vecs[(r, c)] * vals[c].max(0.0).sqrt());
    let polish = SdrConfig { max_iters: PURIFY_ITERS, tol: 0.0, gap_tol: 0.0, ..*cfg };
    let (xp, _, diag) = factored_ascent(links, &polish, v)?;
    let xp = repair_diagonal(&xp, 1.0 / x.nrows() as f64);
    let fp = relaxed_objective(&xp, links);
    if fp < bound - gap {
        return Ok((x.clone(), gap, diag));
    }
    let gp = (bound - fp).max(0.0).min(duality_gap(&xp, &relaxed_gradient(&xp, links)));
    Ok((xp, gp, diag))
}

/// Newton steps allowed per centering stage.
const MAX_CENTERING_STEPS: usize = 40;

/// Squared Newton decrement at which a centering stage ends.
const CENTERING_TOL: f64 = 1e-6;

fn solve_interior(links: &[Link], cfg: &SdrConfig) -> Result<(CMatrix, f64, f64, SolverDiagnostics)> {
    let m = links[0].steering.len();
    let cap = 1.0 / m as f64;
    let nu = m as f64;
    let mut diag = SolverDiagnostics::default();
    let not_converged = |diag: &SolverDiagnostics, residual: f64| HybfError::SolverNotConverged {
        iterations: diag.iterations,
        residual,
    };

    // Raising any diagonal entry never lowers the objective, so the box can be
    // replaced by diag X = 1/M; start on it, strictly inside the PSD cone.
    let w0 = sb_sbc(links)?;
    let mut x = hermitize(&(&w0 * w0.adjoint() * C64::new(0.5, 0.0)));
    for k in 0..m {
        x[(k, k)] = C64::new(cap, 0.0);
    }
    let mut t = nu / relaxed_objective(&x, links).max(1.0);
    let mut best: Option<(CMatrix, f64, f64)> = None;
    loop {
        let mut value = barrier_value(&x, links, t).ok_or_else(|| not_converged(&diag, nu / t))?;
        for _ in 0..MAX_CENTERING_STEPS {
            if diag.iterations >= cfg.max_iters {
                return Err(not_converged(&diag, nu / t));
            }
            let Some((delta, decrement)) = newton_direction(&x, links, t) else {
                break;
            };
            // Below this the barrier value is dominated by rounding.
            if !(decrement > CENTERING_TOL) {
                break;
            }
            diag.iterations += 1;
            let mut s = 1.0;
            let mut moved = false;
            for _ in 0..=cfg.max_backtracks {
                let cand = &x + &delta * C64::new(s, 0.0);
                if let Some(v) = barrier_value(&cand, links, t) {
                    if v >= value + 0.25 * s * decrement {
                        x = cand;
                        value = v;
                        moved = true;
                        break;
                    }
                }
                s *= cfg.shrink;
            }
            if cfg.record_trace {
                diag.objective_trace.push(relaxed_objective(&x, links));
                diag.residual_trace.push(decrement);
            }
            if !moved {
                break;
            }
        }
        // Central-path multipliers: Diag(μ) = ∇f + X⁻¹/t.
        let g = relaxed_gradient(&x, links);
        let gap = match cholesky_pd(&x) {
            Some(ch) => {
                let inv = ch.inverse();
                let mu: Vec<f64> = (0..m).map(|k| g[(k, k)].re + inv[(k, k)].re / t).collect();
                gap_with_multipliers(&x, &g, &mu).min(duality_gap(&x, &g))
            }
            None => duality_gap(&x, &g),
        };
        diag.certificates += 1;
        let objective = relaxed_objective(&x, links);
        let best_gap = best.as_ref().map_or(f64::INFINITY, |b| b.2);
        if gap < best_gap {
            best = Some((x.clone(), objective, gap));
        }
        if gap <= cfg.gap_tol {
            return Ok((x, nu / t, gap, diag));
        }
        if nu / t < 1e-3 * cfg.gap_tol || gap > 10.0 * best_gap {
            // Rounding noise dominates the certificate; report the tightest one seen.
            let (bx, _, bgap) = best.take().unwrap_or((x, 0.0, gap));
            return Ok((bx, nu / t, bgap, diag));
        }
        t *= cfg.barrier_growth;
    }
}

fn solve_lifted(links: &[Link], cfg: &SdrConfig) -> Result<(CMatrix, f64, SolverDiagnostics)> {
    let m = links[0].steering.len();
    let cap = 1.0 / m as f64;
    let inner_tol = cfg.tol / 10.0;
    let mut diag = SolverDiagnostics::default();

    let project = |y: &CMatrix, diag: &mut SolverDiagnostics| {
        let (p, sweeps) = project_psd_box(y, cap, inner_tol, cfg.dykstra_max_iters);
        diag.projections += 1;
        diag.dykstra_iterations += sweeps;
        repair_diagonal(&p, cap)
    };

    let w0 = sb_sbc(links)?;
    let mut x = hermitize(&(&w0 * w0.adjoint()));
    let mut f = relaxed_objective(&x, links);
    let mut g = relaxed_gradient(&x, links);
    let mut step = 1.0;
    let mut residual = (&x - project(&(&x + &g), &mut diag)).norm();

    for k in 0..cfg.max_iters {
        diag.iterations = k + 1;
        if residual <= cfg.tol {
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..=cfg.max_backtracks {
            let cand = project(&(&x + &g * C64::new(t, 0.0)), &mut diag);
            let fc = relaxed_objective(&cand, links);
            if fc >= f + cfg.sigma * real_inner(&g, &(&cand - &x)) {
                accepted = Some((cand, fc, t));
                break;
            }
            t *= cfg.shrink;
        }
        let Some((next, f_next, t_used)) = accepted else {
            break;
        };
        let g_next = relaxed_gradient(&next, links);
        let s = &next - &x;
        let sy = real_inner(&s, &(&g_next - &g));
        step = if sy < 0.0 {
            (s.norm_squared() / -sy).clamp(1e-8, 1e8)
        } else {
            (t_used * 2.0).min(1e8)
        };
        x = next;
        f = f_next;
        g = g_next;
        residual = (&x - project(&(&x + &g), &mut diag)).norm();
        if cfg.record_trace {
            diag.objective_trace.push(f);
            diag.residual_trace.push(residual);
        }
    }
    Ok((x, residual, diag))
}

pub fn upper_bound_bits(solution: &RelaxedSolution) -> f64 {
    solution.objective_nats / LN_2
}

/// Distribution of the random combining vector `e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizationDistribution {
    /// i.i.d. entries uniform on the unit circle.
    #[default]
    UnitCircle,
    /// i.i.d. circularly-symmetric complex Gaussian entries.
    Gaussian,
}

/// How a candidate `b = V Λ^{1/2} e` is turned into a feasible beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateScaling {
    /// `b/‖b‖₂` (unit total power) followed by the per-antenna projection.
    #[default]
    UnitPowerProjected,
    /// `b/(√M ‖b‖_∞)`: the strongest antenna lands exactly on the cap.
    PeakScaled,
    /// `b/(√M ‖b‖₂)`: unit total power divided by M; always feasible but
    /// leaves most of the per-antenna budget unused.
    TotalPowerOverM,
}

impl CandidateScaling {
    pub fn apply(&self, b: &CVector) -> CVector {
        let m = b.len() as f64;
        match self {
            CandidateScaling::UnitPowerProjected => {
                let n = b.norm();
                if n == 0.0 {
                    return b.clone();
                }
                let mut mat = CMatrix::from_column_slice(b.len(), 1, (b / C64::new(n, 0.0)).as_slice());
                project_in_place(&mut mat);
                CVector::from_column_slice(mat.as_slice())
            }
            CandidateScaling::PeakScaled => {
                let peak = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if peak == 0.0 {
                    return b.clone();
                }
                b / C64::new(m.sqrt() * peak, 0.0)
            }
            CandidateScaling::TotalPowerOverM => {
                let n = b.norm();
                if n == 0.0 {
                    return b.clone();
                }
                b / C64::new(m.sqrt() * n, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingConfig {
    pub num_trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub distribution: RandomizationDistribution,
    #[serde(default)]
    pub scaling: CandidateScaling,
}

impl RoundingConfig {
    pub fn new(num_trials: usize, seed: u64) -> Self {
        Self {
            num_trials,
            seed,
            distribution: RandomizationDistribution::UnitCircle,
            scaling: CandidateScaling::UnitPowerProjected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOutcome {
    pub beam: CVector,
    pub utility: f64,
    /// 0 for the principal-eigenvector candidate, `k` for the k-th random draw.
    pub candidate_index: usize,
    pub trials_run: usize,
}

/// Principal-eigenvector beam `v₁`, scaled per `scaling`.
pub fn principal_candidate(solution: &RelaxedSolution, scaling: CandidateScaling) -> CVector {
    scaling.apply(&solution.eigenvectors.column(0).into_owned())
}

/// Randomized rounding of a relaxed solution: the principal-eigenvector
/// candidate plus `num_trials` random draws, best under `evaluator`.
pub fn randomize_round<F>(solution: &RelaxedSolution, cfg: &RoundingConfig, evaluator: F) -> RoundingOutcome
where
    F: Fn(&CVector) -> f64,
{
    randomize_round_checkpoints(solution, cfg, &[cfg.num_trials], evaluator)
        .pop()
        .expect("one checkpoint")
}

/// Like [`randomize_round`] but reports the incumbent after each checkpoint
/// number of random draws; draws are nested across checkpoints.
pub fn randomize_round_checkpoints<F>(
    solution: &RelaxedSolution,
    cfg: &RoundingConfig,
    checkpoints: &[usize],
    evaluator: F,
) -> Vec<RoundingOutcome>
where
    F: Fn(&CVector) -> f64,
{
    let m = solution.eigenvalues.len();
    // V Λ^{1/2}, with tiny negative eigenvalues treated as zero.
    let factor = CMatrix::from_fn(m, m, |r, c| {
        solution.eigenvectors[(r, c)] * solution.eigenvalues[c].max(0.0).sqrt()
    });
    let total = checkpoints.iter().copied().max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let beam = principal_candidate(solution, cfg.scaling);
    let mut best = RoundingOutcome {
        utility: evaluator(&beam),
        beam,
        candidate_index: 0,
        trials_run: 0,
    };
    let mut reports: Vec<Option<RoundingOutcome>> = checkpoints
        .iter()
        .map(|&c| (c == 0).then(|| best.clone()))
        .collect();
    let mut e = CVector::zeros(m);
    for t in 1..=total {
        match cfg.distribution {
            RandomizationDistribution::UnitCircle => {
                for z in e.iter_mut() {
                    *z = unit_phasor(rng.gen_range(0.0..2.0 * PI));
                }
            }
            RandomizationDistribution::Gaussian => {
                for z in e.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                }
            }
        }
        let cand = cfg.scaling.apply(&(&factor * &e));
        let u = evaluator(&cand);
        if u > best.utility {
            best = RoundingOutcome {
                beam: cand,
                utility: u,
                candidate_index: t,
                trials_run: t,
            };
        }
        for (slot, _) in reports.iter_mut().zip(checkpoints).filter(|(_, c)| **c == t) {
            let mut b = best.clone();
            b.trials_run = t;
            *slot = Some(b);
        }
    }
    reports.into_iter().map(|r| r.expect("checkpoint reached")).collect()
}
