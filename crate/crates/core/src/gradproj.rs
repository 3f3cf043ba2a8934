//! Gradient projection with the Armijo step-size rule.
//!
//! Each iteration moves along the utility gradient and projects back onto the
//! per-antenna power set, `W⁺ = P(W + r̃ βˡ G)`, taking the smallest `l ≥ 0` for
//! which `R(W⁺) − R(W) ≥ σ Re Tr((W⁺ − W)ᴴ G)`. Iteration stops once
//! `‖W⁺ − W‖_F ≤ ε` or after `max_iters` steps.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{HybfError, Result};
use crate::linalg::real_inner;
use crate::objective::{utility_gradient, utility_nats, BeamMatrix};
use crate::projection::{feasibility_margin, project_in_place, FEASIBILITY_TOL};
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Armijo sufficient-increase constant σ.
    pub sigma: f64,
    /// Armijo step reduction factor β.
    pub beta: f64,
    /// Base step r̃.
    pub r_tilde: f64,
    /// Stop once an update moves less than this (Frobenius norm).
    pub epsilon: f64,
    pub max_iters: usize,
    pub max_armijo_backtracks: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-4,
            beta: 0.3,
            r_tilde: 1.0,
            epsilon: 1e-4,
            max_iters: 10_000,
            max_armijo_backtracks: 60,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.sigma < 1.0
            && self.beta > 0.0
            && self.beta < 1.0
            && self.r_tilde > 0.0
            && self.epsilon >= 0.0
            && self.max_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(HybfError::InvalidInput(format!("invalid gradient-projection config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Per-iteration record of a gradient-projection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpTrace {
    pub iterations: usize,
    /// Utility in nats; entry 0 is the initial point, entry k follows iteration k.
    pub utilities: Vec<f64>,
    /// `‖W^[k+1] − W^[k]‖_F` per iteration.
    pub errors: Vec<f64>,
    /// Backtrack count `l` per iteration.
    pub backtracks: Vec<usize>,
    /// Accepted step `r̃ βˡ` per iteration.
    pub steps: Vec<f64>,
    /// Projected-gradient residual `‖P(W + G) − W‖_F` at each iterate before its update.
    pub stationarity: Vec<f64>,
    pub termination_reason: Termination,
}

impl GpTrace {
    pub fn utilities_bits(&self) -> impl Iterator<Item = f64> + '_ {
        self.utilities.iter().map(|u| u / std::f64::consts::LN_2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoStep {
    pub step: f64,
    pub next: BeamMatrix,
    pub backtracks: usize,
    /// Utility of `next`, nats.
    pub utility: f64,
}

fn projected_step(w: &CMatrix, g: &CMatrix, r: f64) -> CMatrix {
    let mut next = w + g * C64::new(r, 0.0);
    project_in_place(&mut next);
    next
}

/// Finds the first `l = 0, 1, 2, …` satisfying the Armijo condition along the
/// projection arc. `current` is `R(w)` in nats.
pub fn armijo_step(
    w: &BeamMatrix,
    grad: &CMatrix,
    current: f64,
    channels: &ChannelSet,
    config: &GpConfig,
) -> Result<ArmijoStep> {
    let mut r = config.r_tilde;
    for l in 0..=config.max_armijo_backtracks {
        let next = projected_step(w.as_matrix(), grad, r);
        let gain = real_inner(&(&next - w.as_matrix()), grad);
        let next = BeamMatrix::new(next);
        let u = utility_nats(&next, channels);
        if u - current >= config.sigma * gain {
            return Ok(ArmijoStep {
                step: r,
                next,
                backtracks: l,
                utility: u,
            });
        }
        r *= config.beta;
    }
    Err(HybfError::ArmijoExhausted {
        iteration: 0,
        backtracks: config.max_armijo_backtracks,
    })
}

/// Runs gradient projection from a feasible starting matrix.
pub fn gp_optimize(
    init: &BeamMatrix,
    channels: &ChannelSet,
    config: &GpConfig,
) -> Result<(BeamMatrix, GpTrace)> {
    config.validate()?;
    if init.num_elements() != channels.num_elements || init.num_beams() != channels.num_sections() {
        return Err(HybfError::DimensionMismatch {
            expected: format!("{}x{}", channels.num_elements, channels.num_sections()),
            got: format!("{}x{}", init.num_elements(), init.num_beams()),
        });
    }
    let margin = feasibility_margin(init);
    if margin > FEASIBILITY_TOL {
        return Err(HybfError::Infeasible { excess: margin });
    }

    let mut w = init.clone();
    let mut u = utility_nats(&w, channels);
    let mut trace = GpTrace {
        iterations: 0,
        utilities: vec![u],
        errors: Vec::new(),
        backtracks: Vec::new(),
        steps: Vec::new(),
        stationarity: Vec::new(),
        termination_reason: Termination::MaxIters,
    };
    for k in 0..config.max_iters {
        let g = utility_gradient(&w, channels);
        trace
            .stationarity
            .push((projected_step(w.as_matrix(), &g, 1.0) - w.as_matrix()).norm());
        let step = armijo_step(&w, &g, u, channels, config).map_err(|e| match e {
            HybfError::ArmijoExhausted { backtracks, .. } => HybfError::ArmijoExhausted {
                iteration: k,
                backtracks,
            },
            other => other,
        })?;
        let err = (step.next.as_matrix() - w.as_matrix()).norm();
        trace.iterations = k + 1;
        trace.utilities.push(step.utility);
        trace.errors.push(err);
        trace.backtracks.push(step.backtracks);
        trace.steps.push(step.step);
        w = step.next;
        u = step.utility;
        if err <= config.epsilon {
            trace.termination_reason = Termination::Converged;
            break;
        }
    }
    Ok((w, trace))
}

/// Writes the trace as CSV with columns `iteration,utility_bits,err,l,r`.
pub fn write_trace_csv<W: std::io::Write>(trace: &GpTrace, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["iteration", "utility_bits", "err", "l", "r"])
        .map_err(|e| HybfError::Io(e.into()))?;
    for k in 0..trace.iterations {
        wtr.write_record([
            (k + 1).to_string(),
            (trace.utilities[k + 1] / std::f64::consts::LN_2).to_string(),
            trace.errors[k].to_string(),
            trace.backtracks[k].to_string(),
            trace.steps[k].to_string(),
        ])
        .map_err(|e| HybfError::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}
