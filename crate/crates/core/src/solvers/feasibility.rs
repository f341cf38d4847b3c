//! Quasi-cyclic feasibility, periodic projections and linear inequalities.

use super::{control_validate, require_decreasing, scaled_norm, ControlSequence, RunConfig, TraceBuilder};
use crate::convex_sets::{distance, ConvexSet};
use crate::error::{Error, Result};
use crate::fejer_monitor::{IterateRecord, IterateTrace};
use crate::metric_ops::{MetricCache, MetricOperator, MetricSchedule};
use crate::operator_class::{t_class_check, TOperator};
use crate::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const STARTUP_SAMPLES: usize = 8;

fn residuals(sets: &[ConvexSet], x: &Vector) -> Result<Vec<f64>> {
    sets.iter().map(|c| distance(c, x, None)).collect()
}

fn startup_samples(x0: &Vector) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7c1a55);
    let scale = 3.0 * x0.norm().max(1.0);
    (0..STARTUP_SAMPLES)
        .map(|_| x0 + Vector::from_fn(x0.len(), |_, _| StandardNormal.sample(&mut rng)) * scale)
        .collect()
}

fn check_common(sched: &MetricSchedule, ctrl: &ControlSequence, cfg: &RunConfig) -> Result<()> {
    let dim = sched.dim();
    cfg.validate(dim, false)?;
    require_decreasing(sched, cfg.max_iter)?;
    let report = control_validate(ctrl, 2 * ctrl.period() + ctrl.max_window())?;
    if let Some((j, n)) = report.failures.first() {
        return Err(Error::precondition(format!(
            "control misses index {j} in the window starting at n = {n} (M_j = {})",
            ctrl.window(*j)
        )));
    }
    Ok(())
}

/// `x_{n+1} = x_n + λ_n (T_{i(n),n} x_n + a_n − x_n)` with `T_{i,n} ∈ 𝔗(W_n)`.
///
/// `factory(i, n, W_n)` builds `T_{i,n}`. Each `T_{i,0}` is checked against
/// its class inequality on seeded samples before the first step.
/// `residual_sets` only feeds the per-record distances.
pub fn feasibility_solve<F>(
    mut factory: F,
    residual_sets: &[ConvexSet],
    sched: &MetricSchedule,
    ctrl: &ControlSequence,
    cfg: &RunConfig,
) -> Result<IterateTrace>
where
    F: FnMut(usize, usize, &MetricOperator) -> Result<TOperator>,
{
    check_common(sched, ctrl, cfg)?;
    let mut cache = MetricCache::default();
    let w0 = cache.get(sched, 0)?;
    let samples = startup_samples(&cfg.x0);
    for i in 0..ctrl.count() {
        let t = factory(i, 0, &w0)?;
        let ys = t.witnesses(&samples)?;
        let report = t_class_check(&t, &w0, &samples, &ys)?;
        if !report.passed {
            return Err(Error::BadOperator { index: i, value: report.max_value });
        }
    }

    let mut trace = TraceBuilder::new("feasibility", sched.clone(), cfg, ctrl.max_window());
    let mut errors = cfg.errors.stream(cfg.x0.len());
    let mut x = cfg.x0.clone();
    for n in 0..cfg.max_iter {
        let step = (|| -> Result<(Vector, IterateRecord)> {
            let w = cache.get(sched, n)?;
            let i = ctrl.index(n);
            let t = factory(i, n, &w)?;
            let tx = t.apply(&x)?;
            let a = errors.next_vector();
            let lambda = cfg.lambda.at(n);
            let next = &x + (tx + &a - &x) * lambda;
            let mut rec = IterateRecord::bare(n, x.clone());
            rec.lambda = lambda;
            rec.a_norm = scaled_norm(&a);
            rec.set_index = Some(i);
            rec.residuals = residuals(residual_sets, &x)?;
            Ok((next, rec))
        })()
        .map_err(|e| e.at(n))?;
        let (next, rec) = step;
        trace.push(rec);
        let moved = (&next - &x).norm();
        x = next;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("iterate became non-finite", f64::INFINITY).at(n));
        }
        if trace.step_done(moved) {
            let res = residuals(residual_sets, &x)?;
            return Ok(trace.finish(n + 1, x, res, true));
        }
    }
    let res = residuals(residual_sets, &x)?;
    Ok(trace.finish(cfg.max_iter, x, res, false))
}

/// Periodic metric projections `T_{i,n} = P^{W_n}_{C_i}` with `i(n) = n mod m`.
pub fn periodic_projections(sets: &[ConvexSet], sched: &MetricSchedule, cfg: &RunConfig) -> Result<IterateTrace> {
    if sets.is_empty() {
        return Err(Error::invalid("periodic projections need at least one set"));
    }
    for c in sets {
        crate::error::check_dim(sched.dim(), c.dim())?;
    }
    let ctrl = ControlSequence::periodic(sets.len());
    let mut trace = feasibility_solve(
        |i, _, w| Ok(TOperator::Projection { set: sets[i].clone(), metric: w.clone() }),
        sets,
        sched,
        &ctrl,
        cfg,
    )?;
    trace.header.solver = "periodic_projections".into();
    Ok(trace)
}

/// Cyclic metric projections onto `{x : ⟨x, u_i⟩ ≤ η_i}` with the two-branch update
/// `y_n = x_n` if `⟨x_n, u⟩ ≤ η`, else `y_n = x_n + ((η − ⟨x_n, u⟩)/⟨u, W_n⁻¹u⟩) W_n⁻¹u`.
pub fn linear_inequalities(us: &[Vector], etas: &[f64], sched: &MetricSchedule, cfg: &RunConfig) -> Result<IterateTrace> {
    if us.is_empty() || us.len() != etas.len() {
        return Err(Error::invalid("need one offset per normal vector and at least one inequality"));
    }
    let sets: Vec<ConvexSet> =
        us.iter().zip(etas).map(|(u, e)| ConvexSet::half_space(u.clone(), *e)).collect::<Result<_>>()?;
    for c in &sets {
        crate::error::check_dim(sched.dim(), c.dim())?;
    }
    let ctrl = ControlSequence::periodic(us.len());
    check_common(sched, &ctrl, cfg)?;

    let mut cache = crate::metric_ops::MetricCache::default();
    let mut trace = TraceBuilder::new("linear_inequalities", sched.clone(), cfg, ctrl.max_window());
    let mut errors = cfg.errors.stream(cfg.x0.len());
    let mut x = cfg.x0.clone();
    for n in 0..cfg.max_iter {
        let w = cache.get(sched, n).map_err(|e| e.at(n))?;
        let i = ctrl.index(n);
        let (u, eta) = (&us[i], etas[i]);
        let s = x.dot(u);
        let y = if s > eta {
            let wiu = w.solve(u);
            let denom = u.dot(&wiu);
            &x + wiu * ((eta - s) / denom)
        } else {
            x.clone()
        };
        let a = errors.next_vector();
        let lambda = cfg.lambda.at(n);
        let next = &x + (y + &a - &x) * lambda;
        let mut rec = IterateRecord::bare(n, x.clone());
        rec.lambda = lambda;
        rec.a_norm = scaled_norm(&a);
        rec.set_index = Some(i);
        rec.residuals = residuals(&sets, &x)?;
        trace.push(rec);
        let moved = (&next - &x).norm();
        x = next;
        if trace.step_done(moved) {
            let res = residuals(&sets, &x)?;
            return Ok(trace.finish(n + 1, x, res, true));
        }
    }
    let res = residuals(&sets, &x)?;
    Ok(trace.finish(cfg.max_iter, x, res, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_sets::{intersection_distance, project_euclid, project_metric};
    use crate::metric_ops::{Direction, MetricRule, Summable};
    use crate::solvers::{ErrorInjection, ParamSchedule};
    use crate::Matrix;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn single_projection_then_constant() {
        let c = ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap();
        let cfg = RunConfig::new(dvector![3.0, 2.0]).with_max_iter(10);
        let t = periodic_projections(std::slice::from_ref(&c), &MetricSchedule::identity(2), &cfg).unwrap();
        assert_eq!(t.records[1].x, project_euclid(&c, &dvector![3.0, 2.0]).unwrap());
        assert!(t.records[1..].iter().all(|r| r.x == t.records[1].x));
        assert_eq!(t.stop_reason, crate::fejer_monitor::StopReason::Tolerance);
    }

    #[test]
    fn nested_balls_feasible_start_is_stationary() {
        let sets = [
            ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap(),
            ConvexSet::ball(dvector![0.0, 0.0], 2.0).unwrap(),
        ];
        let x0 = dvector![0.3, -0.2];
        let t = periodic_projections(&sets, &MetricSchedule::identity(2), &RunConfig::new(x0.clone())).unwrap();
        assert!(t.points().all(|x| *x == x0));
    }

    #[test]
    fn wedge_alternating_projections_decrease_distance() {
        let sets = [
            ConvexSet::half_space(dvector![1.0, -1.0], 0.0).unwrap(),
            ConvexSet::half_space(dvector![-1.0, -1.0], 0.0).unwrap(),
        ];
        let cfg = RunConfig::new(dvector![0.3, -5.0]).with_max_iter(2000).with_tol(Some(1e-13));
        let t = periodic_projections(&sets, &MetricSchedule::identity(2), &cfg).unwrap();
        let d: Vec<f64> = t.points().map(|x| intersection_distance(&sets, x, 1e-14).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*d.last().unwrap() <= 1e-8);
    }

    #[test]
    fn first_update_matches_closed_form() {
        let w = MetricOperator::from_matrix(Matrix::from_diagonal(&dvector![1.0, 4.0])).unwrap();
        let sched = MetricSchedule::constant(&w);
        let cfg = RunConfig::new(dvector![2.0, 0.0]).with_lambda(ParamSchedule::Constant(1.5)).with_max_iter(1);
        let t = linear_inequalities(&[dvector![1.0, 0.0]], &[1.0], &sched, &cfg).unwrap();
        let c = ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap();
        let p = project_metric(&c, &w, &dvector![2.0, 0.0]).unwrap();
        let expect = dvector![2.0, 0.0] + (p - dvector![2.0, 0.0]) * 1.5;
        assert!((&t.records[1].x - expect).norm() < 1e-15);
    }

    #[test]
    fn linear_inequalities_equal_periodic_projections_bitwise() {
        let us = vec![dvector![1.0, 0.5, 0.0], dvector![-0.3, 1.0, 0.2], dvector![0.0, -0.4, 1.0]];
        let etas = vec![0.5, 0.2, -0.1];
        let v = dvector![0.6, 0.0, 0.8];
        let sched = MetricSchedule::new(
            MetricRule::RankOneDecay { base: Matrix::identity(3, 3), v, c: 1.0, q: 0.5 },
            Summable::Geometric { c: 1.0, q: 0.5 },
            None,
            Direction::Decreasing,
        )
        .unwrap();
        let cfg = RunConfig::new(dvector![3.0, 2.0, 1.0])
            .with_lambda(ParamSchedule::Constant(1.5))
            .with_errors(ErrorInjection::Geometric { c: 0.1, q: 0.5, seed: 9 })
            .with_max_iter(200);
        let a = linear_inequalities(&us, &etas, &sched, &cfg).unwrap();
        let sets: Vec<ConvexSet> = us.iter().zip(&etas).map(|(u, e)| ConvexSet::half_space(u.clone(), *e).unwrap()).collect();
        let b = periodic_projections(&sets, &sched, &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.x, rb.x);
        }
    }

    #[test]
    fn rejects_bad_operator_and_bad_schedule() {
        let cfg = RunConfig::new(dvector![1.0, 1.0]).with_max_iter(5);
        let sched = MetricSchedule::identity(2);
        let err = feasibility_solve(
            |_, _, w| Ok(TOperator::Linear { matrix: dmatrix![2.0, 0.0; 0.0, 2.0], metric: w.clone() }),
            &[],
            &sched,
            &ControlSequence::periodic(1),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadOperator { index: 0, .. }));

        let i = Matrix::identity(2, 2);
        let growing = MetricSchedule::new(
            MetricRule::List { matrices: vec![i.clone(), &i * 2.0] },
            Summable::zero(),
            None,
            Direction::Decreasing,
        )
        .unwrap();
        let c = ConvexSet::half_space(dvector![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(periodic_projections(&[c], &growing, &cfg), Err(Error::Precondition(_))));
    }
}
