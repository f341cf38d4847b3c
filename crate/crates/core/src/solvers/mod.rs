//! Trace-producing solvers and the validators for their hypotheses.
//!
//! Every solver iterates `x_{n+1} = x_n + λ_n (T_n x_n + a_n − x_n)` for some
//! operator `T_n` of class `𝔗(W_n)` and returns the full [`IterateTrace`].

mod config;
mod control;
mod feasibility;
mod landweber;
mod proximal;

pub use crate::fejer_monitor::StopReason;
pub use config::{ErrorInjection, ErrorStream, ParamSchedule, RunConfig};
pub use control::{control_validate, ControlReport, ControlSequence};
pub use feasibility::{feasibility_solve, linear_inequalities, periodic_projections};
pub use landweber::{
    basis_prox_landweber, gamma_schedule_validate, problem_validate, prox_landweber, prox_landweber_with, DataTerm,
    GammaReport, InverseProblem, ProblemReport, StepRegime, TermReport,
};
pub use proximal::proximal_point;

use crate::error::{Error, Result};
use crate::fejer_monitor::{IterateRecord, IterateTrace, TraceHeader};
use crate::metric_ops::{schedule_validate, Direction, MetricSchedule, PROBE_LAGS};
use crate::Vector;

/// Number of leading schedule indices checked before a run starts.
pub const SCHEDULE_CHECK_LEN: usize = 1_000;

/// Rejects schedules that do not satisfy `(1+η_n)W_n ⪰ W_{n+1}` on the examined range.
pub(crate) fn require_decreasing(s: &MetricSchedule, max_iter: usize) -> Result<()> {
    if s.direction() == Direction::Increasing {
        return Err(Error::precondition("solver needs a schedule declared decreasing or both"));
    }
    if s.is_constant() {
        return Ok(());
    }
    let n = (max_iter + 1).clamp(2, SCHEDULE_CHECK_LEN);
    let cert = schedule_validate(s, n, 1e-10)?;
    if let Some(k) = cert.decreasing_violations.first() {
        return Err(Error::precondition(format!(
            "schedule violates (1+eta_n) W_n >= W_(n+1) at n = {k} (slack {:e})",
            cert.decreasing_slacks[*k]
        )));
    }
    if let Some(k) = cert.norm_violations.first() {
        return Err(Error::precondition(format!("schedule violates ||W_n|| <= mu at n = {k}")));
    }
    if let Some(k) = cert.alpha_violations.first() {
        return Err(Error::precondition(format!("schedule violates W_n >= alpha I at n = {k}")));
    }
    Ok(())
}

/// Euclidean norm computed on the rescaled vector, so tiny perturbations do
/// not underflow to a logged norm of zero.
pub(crate) fn scaled_norm(v: &Vector) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        m
    } else {
        m * (v / m).norm()
    }
}

/// Accumulates records and applies the stop rule.
///
/// The quiet window is at least the largest probe lag, so terminal Cauchy
/// probes on the finished trace only see iterates that already settled.
pub(crate) struct TraceBuilder {
    header: TraceHeader,
    records: Vec<IterateRecord>,
    tol: Option<f64>,
    window: usize,
    quiet: usize,
}

impl TraceBuilder {
    pub(crate) fn new(solver: &str, schedule: MetricSchedule, cfg: &RunConfig, window: usize) -> Self {
        TraceBuilder {
            header: TraceHeader {
                solver: solver.into(),
                dim: cfg.x0.len(),
                seed: None,
                config_hash: None,
                schedule,
                epsilon: Some(cfg.epsilon),
                threads: 1,
            },
            records: Vec::with_capacity(cfg.max_iter.min(100_000) + 1),
            tol: cfg.tol,
            window: window.max(PROBE_LAGS[PROBE_LAGS.len() - 1]),
            quiet: 0,
        }
    }

    pub(crate) fn push(&mut self, record: IterateRecord) {
        self.records.push(record);
    }

    /// Registers `‖x_{n+1} − x_n‖`; true once `window` consecutive steps were small.
    pub(crate) fn step_done(&mut self, step: f64) -> bool {
        match self.tol {
            Some(t) if step <= t => {
                self.quiet += 1;
                self.quiet >= self.window
            }
            _ => {
                self.quiet = 0;
                false
            }
        }
    }

    pub(crate) fn finish(mut self, n: usize, x: Vector, residuals: Vec<f64>, converged: bool) -> IterateTrace {
        let mut last = IterateRecord::bare(n, x);
        last.residuals = residuals;
        self.records.push(last);
        IterateTrace {
            header: self.header,
            records: self.records,
            stop_reason: if converged { StopReason::Tolerance } else { StopReason::MaxIterations },
        }
    }
}
