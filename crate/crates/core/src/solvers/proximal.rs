//! Variable-metric proximal point iteration.

use super::{require_decreasing, scaled_norm, RunConfig, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::fejer_monitor::{IterateRecord, IterateTrace};
use crate::metric_ops::{MetricCache, MetricSchedule};
use crate::operator_class::{resolvent_metric, MonotoneOperator};

/// `x_{n+1} = x_n + λ_n (J^{W_n}_{γ_n A} x_n + a_n − x_n)`.
///
/// Each record logs `‖γ_n⁻¹ W_n (x_n − y_n)‖`, an element of `A y_n` in norm.
pub fn proximal_point(a: &MonotoneOperator, sched: &MetricSchedule, cfg: &RunConfig) -> Result<IterateTrace> {
    a.validate()?;
    let dim = sched.dim();
    if let Some(n) = a.dim() {
        check_dim(dim, n)?;
    }
    cfg.validate(dim, true)?;
    require_decreasing(sched, cfg.max_iter)?;
    let gamma = cfg.gamma.as_ref().expect("validated");

    let mut cache = MetricCache::default();
    let mut trace = TraceBuilder::new("proximal_point", sched.clone(), cfg, 1);
    let mut errors = cfg.errors.stream(dim);
    let mut x = cfg.x0.clone();
    for n in 0..cfg.max_iter {
        let w = cache.get(sched, n).map_err(|e| e.at(n))?;
        let g = gamma.at(n);
        let y = resolvent_metric(a, &w, g, &x).map_err(|e| e.at(n))?;
        let v = w.apply(&(&x - &y)) / g;
        let e = errors.next_vector();
        let lambda = cfg.lambda.at(n);
        let next = &x + (y + &e - &x) * lambda;
        let mut rec = IterateRecord::bare(n, x.clone());
        rec.lambda = lambda;
        rec.gamma = Some(g);
        rec.a_norm = scaled_norm(&e);
        rec.resolvent_residual = Some(v.norm());
        trace.push(rec);
        let moved = (&next - &x).norm();
        x = next;
        if !x.iter().all(|t| t.is_finite()) {
            return Err(Error::numeric("iterate became non-finite", f64::INFINITY).at(n));
        }
        if trace.step_done(moved) {
            return Ok(trace.finish(n + 1, x, Vec::new(), true));
        }
    }
    Ok(trace.finish(cfg.max_iter, x, Vec::new(), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_ops::{Direction, MetricRule, Summable};
    use crate::operator_class::ProxFunction;
    use crate::solvers::ParamSchedule;
    use crate::{Matrix, Vector};
    use nalgebra::dvector;

    fn centered_quadratic(c: &Vector) -> MonotoneOperator {
        let n = c.len();
        MonotoneOperator::shifted_sum(
            MonotoneOperator::subdifferential(ProxFunction::SquaredNorm { weight: 0.0 }),
            Matrix::identity(n, n),
            -c,
        )
    }

    #[test]
    fn closed_form_recursion() {
        let c = dvector![1.0, -2.0];
        let a = centered_quadratic(&c);
        let cfg = RunConfig::new(dvector![5.0, 5.0]).with_gamma(ParamSchedule::Constant(0.5)).with_max_iter(4);
        let t = proximal_point(&a, &MetricSchedule::identity(2), &cfg).unwrap();
        let mut x = dvector![5.0, 5.0];
        for r in &t.records {
            assert!((&r.x - &x).norm() < 1e-14);
            x = &x + (&c - &x) * (0.5 / 1.5);
        }
    }

    #[test]
    fn converges_to_zero_of_operator() {
        let c = dvector![1.0, -2.0, 0.3];
        let a = centered_quadratic(&c);
        let sched = MetricSchedule::new(
            MetricRule::ScaledDecay { base: Matrix::identity(3, 3), c: 1.0, q: 0.5 },
            Summable::Geometric { c: 1.0, q: 0.5 },
            None,
            Direction::Both,
        )
        .unwrap();
        let cfg = RunConfig::new(dvector![4.0, 0.0, -3.0]).with_gamma(ParamSchedule::Constant(1.0));
        let t = proximal_point(&a, &sched, &cfg).unwrap();
        assert!((t.last_point().unwrap() - c).norm() < 1e-8);
    }

    #[test]
    fn needs_gamma() {
        let a = centered_quadratic(&dvector![0.0]);
        assert!(proximal_point(&a, &MetricSchedule::identity(1), &RunConfig::new(dvector![1.0])).is_err());
    }
}
