//! Runtime certificates over finished solver traces.
//!
//! For a target `z`, quasi-Fejér monotonicity relative to `(W_n)` asks that
//! `φ(‖x_{n+1} − z‖_{W_{n+1}}) ≤ (1+η_n) φ(‖x_n − z‖_{W_n}) + ε_n` with summable
//! `(η_n)` and `(ε_n)`. The monitors here evaluate the signed slack of that
//! inequality along a trace, plus the derived boundedness, convergence,
//! convex-hull and shadow-sequence diagnostics.

use crate::convex_sets::{intersection_project, project_metric, ConvexSet};
use crate::error::{check_dim, Error, Result};
use crate::metric_ops::{MetricCache, MetricSchedule, Summable, PROBE_LAGS};
use crate::serde_util;
use crate::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Consecutive steps stayed below the stop tolerance.
    Tolerance,
    MaxIterations,
    /// The trace was assembled by hand.
    External,
}

/// Run metadata stored at the top of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub solver: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// The metric family `n ↦ W_n` the iterates are measured in.
    pub schedule: MetricSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Worker threads used by the run; always 1.
    pub threads: usize,
}

/// State at iteration `n` and the parameters of the step leaving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateRecord {
    pub n: usize,
    #[serde(with = "serde_util::vector")]
    pub x: Vector,
    /// Index into the schedule: the record is measured in `W_{metric_index}`.
    pub metric_index: usize,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `‖a_n‖`; 0 on the final record.
    pub a_norm: f64,
    /// Per-set distances `d_{C_i}(x_n)`.
    #[serde(default)]
    pub residuals: Vec<f64>,
    /// Operator index `i(n)` used for the step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// `‖γ_n⁻¹ W_n (x_n − y_n)‖` for resolvent steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent_residual: Option<f64>,
}

impl IterateRecord {
    pub fn bare(n: usize, x: Vector) -> Self {
        IterateRecord {
            n,
            x,
            metric_index: n,
            lambda: 0.0,
            gamma: None,
            a_norm: 0.0,
            residuals: Vec::new(),
            set_index: None,
            objective: None,
            resolvent_residual: None,
        }
    }
}

/// A complete solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub header: TraceHeader,
    pub records: Vec<IterateRecord>,
    pub stop_reason: StopReason,
}

impl IterateTrace {
    /// Wraps a list of points, measured in `schedule` (identity if `None`).
    pub fn from_points(points: Vec<Vector>, schedule: Option<MetricSchedule>) -> Result<Self> {
        let dim = points.first().ok_or_else(|| Error::invalid("trace needs at least one point"))?.len();
        for p in &points {
            check_dim(dim, p.len())?;
        }
        let schedule = schedule.unwrap_or_else(|| MetricSchedule::identity(dim));
        check_dim(schedule.dim(), dim)?;
        Ok(IterateTrace {
            header: TraceHeader {
                solver: "external".into(),
                dim,
                seed: None,
                config_hash: None,
                schedule,
                epsilon: None,
                threads: 1,
            },
            records: points.into_iter().enumerate().map(|(n, x)| IterateRecord::bare(n, x)).collect(),
            stop_reason: StopReason::External,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn schedule(&self) -> &MetricSchedule {
        &self.header.schedule
    }

    pub fn last_point(&self) -> Option<&Vector> {
        self.records.last().map(|r| &r.x)
    }

    pub fn points(&self) -> impl Iterator<Item = &Vector> {
        self.records.iter().map(|r| &r.x)
    }

    /// Checks contiguous indices and consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        check_dim(self.header.schedule.dim(), self.header.dim)?;
        for (k, r) in self.records.iter().enumerate() {
            if r.n != k {
                return Err(Error::invalid(format!("trace record {k} carries index {}", r.n)));
            }
            check_dim(self.header.dim, r.x.len())?;
        }
        Ok(())
    }

    /// `‖x_n − z‖_{W_n}` for every record.
    pub fn metric_distances(&self, z: &Vector) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        let mut cache: Option<(usize, Matrix)> = None;
        let s = self.schedule();
        Ok(self
            .records
            .iter()
            .map(|r| {
                let w = match &cache {
                    Some((idx, m)) if *idx == r.metric_index => m,
                    _ => {
                        cache = Some((r.metric_index, s.matrix(r.metric_index)));
                        &cache.as_ref().unwrap().1
                    }
                };
                let d = &r.x - z;
                (w * &d).dot(&d).max(0.0).sqrt()
            })
            .collect())
    }

    /// The perturbation envelope `2√μ‖a_n‖` for `n < len − 1`.
    pub fn envelope_epsilon(&self) -> Vec<f64> {
        let c = 2.0 * self.schedule().mu().sqrt();
        self.records.iter().take(self.len().saturating_sub(1)).map(|r| c * r.a_norm).collect()
    }
}

/// The transform `φ` applied to metric distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Abs,
    Square,
}

impl Phi {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Phi::Abs => t,
            Phi::Square => t * t,
        }
    }
}

/// How `ε_n` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSpec {
    /// Explicit values for `n = 0, 1, …` (zero past the end).
    Given(Vec<f64>),
    Sequence(Summable),
    /// `2√μ‖a_n‖` from the logged perturbations.
    Envelope,
    /// The smallest nonnegative `ε_n` making each inequality hold, judged by envelope fitting.
    Auto,
}

/// Envelope-consistency verdict for an empirical nonnegative sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummabilityVerdict {
    Zero,
    Geometric,
    InverseSquare,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub partial_sum: f64,
    /// Least-squares fit of `log e_n ≈ log c + n log q` over positive terms.
    pub geometric_q: f64,
    pub geometric_c: f64,
    /// Max relative gap between the partial sums and `c(1 − q^{n+1})/(1 − q)`.
    pub geometric_residual: f64,
    /// `max (n+1)² e_n` over the first and second half of the sequence.
    pub inverse_square_c_head: f64,
    pub inverse_square_c_tail: f64,
    pub verdict: SummabilityVerdict,
}

impl SummabilityReport {
    pub fn consistent(&self) -> bool {
        self.verdict != SummabilityVerdict::Inconclusive
    }
}

/// Fits geometric and inverse-square envelopes to `e`.
pub fn summability_report(e: &[f64]) -> SummabilityReport {
    let partial_sum: f64 = e.iter().sum();
    let pos: Vec<(f64, f64)> = e
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(n, v)| (n as f64, v.ln()))
        .collect();
    let (mut q, mut c) = (0.0, 0.0);
    if pos.len() >= 2 {
        let k = pos.len() as f64;
        let mx = pos.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pos.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        q = slope.exp();
        c = (my - slope * mx).exp();
    } else if let Some(p) = pos.first() {
        c = p.1.exp();
    }
    let mut geometric_residual = 0.0_f64;
    if partial_sum > 0.0 && q < 1.0 {
        let mut running = 0.0;
        for (n, v) in e.iter().enumerate() {
            running += v;
            let predicted = c * (1.0 - q.powi(n as i32 + 1)) / (1.0 - q);
            geometric_residual = geometric_residual.max((running - predicted).abs() / partial_sum);
        }
    } else if partial_sum > 0.0 {
        geometric_residual = f64::INFINITY;
    }
    let half = e.len() / 2;
    let weighted = |range: std::ops::Range<usize>| {
        range.map(|n| e[n] * ((n + 1) as f64).powi(2)).fold(0.0, f64::max)
    };
    let head = weighted(0..half.max(1).min(e.len()));
    let tail = weighted(half.max(1).min(e.len())..e.len());
    let verdict = if partial_sum == 0.0 {
        SummabilityVerdict::Zero
    } else if q < 1.0 && geometric_residual <= 0.5 {
        SummabilityVerdict::Geometric
    } else if tail <= head * (1.0 + 1e-9) {
        SummabilityVerdict::InverseSquare
    } else {
        SummabilityVerdict::Inconclusive
    };
    SummabilityReport {
        partial_sum,
        geometric_q: q,
        geometric_c: c,
        geometric_residual,
        inverse_square_c_head: head,
        inverse_square_c_tail: tail,
        verdict,
    }
}

/// Slack sequences of the quasi-Fejér inequality against a set of targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FejerCertificate {
    #[serde(with = "serde_util::vectors")]
    pub targets: Vec<Vector>,
    pub phi: Phi,
    pub tol: f64,
    /// `slacks[t][n] = (1+η_n)φ(d_n) + ε_n − φ(d_{n+1})` for target `t`.
    pub slacks: Vec<Vec<f64>>,
    /// The `ε_n` used (shared by all targets).
    pub epsilon: Vec<f64>,
    /// Per target, `max(0, φ(d_{n+1}) − (1+η_n)φ(d_n))`.
    pub implied_epsilon: Vec<Vec<f64>>,
    /// `(target, n)` pairs with slack below `−tol`.
    pub violations: Vec<(usize, usize)>,
    pub min_slack: f64,
    /// One shared `ε` sequence covers every target.
    pub stationary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summability: Option<SummabilityReport>,
    pub passed: bool,
}

impl FejerCertificate {
    /// Flattens to `target,n,slack,implied_eps` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,n,slack,implied_eps\n");
        for (t, (s, e)) in self.slacks.iter().zip(&self.implied_epsilon).enumerate() {
            for (n, (sv, ev)) in s.iter().zip(e).enumerate() {
                let _ = writeln!(out, "{t},{n},{sv:e},{ev:e}");
            }
        }
        out
    }
}

fn resolve_eps(trace: &IterateTrace, eps: &EpsSpec, steps: usize) -> Vec<f64> {
    match eps {
        EpsSpec::Given(v) => (0..steps).map(|n| v.get(n).copied().unwrap_or(0.0)).collect(),
        EpsSpec::Sequence(s) => (0..steps).map(|n| s.term(n)).collect(),
        EpsSpec::Envelope => trace.envelope_epsilon(),
        EpsSpec::Auto => vec![0.0; steps],
    }
}

/// Evaluates the quasi-Fejér inequality along `trace` for every target.
pub fn check_quasi_fejer(
    trace: &IterateTrace,
    targets: &[Vector],
    eta: &Summable,
    phi: Phi,
    eps: &EpsSpec,
    tol: f64,
) -> Result<FejerCertificate> {
    if trace.len() < 2 {
        return Err(Error::precondition(format!("quasi-Fejer check needs at least 2 records, got {}", trace.len())));
    }
    if targets.is_empty() {
        return Err(Error::precondition("quasi-Fejer check needs at least one target"));
    }
    let steps = trace.len() - 1;
    let base_eps = resolve_eps(trace, eps, steps);
    let mut slacks = Vec::with_capacity(targets.len());
    let mut implied = Vec::with_capacity(targets.len());
    for z in targets {
        let d: Vec<f64> = trace.metric_distances(z)?.into_iter().map(|v| phi.eval(v)).collect();
        let mut s = Vec::with_capacity(steps);
        let mut imp = Vec::with_capacity(steps);
        for n in 0..steps {
            // the record carries its own metric index; η follows it
            let k = trace.records[n].metric_index;
            let bare = (1.0 + eta.term(k)) * d[n] - d[n + 1];
            imp.push((-bare).max(0.0));
            s.push(bare);
        }
        slacks.push(s);
        implied.push(imp);
    }
    let (epsilon, summability) = if matches!(eps, EpsSpec::Auto) {
        let shared: Vec<f64> =
            (0..steps).map(|n| implied.iter().map(|e| e[n]).fold(0.0, f64::max)).collect();
        let report = summability_report(&shared);
        (shared, Some(report))
    } else {
        (base_eps, None)
    };
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (t, s) in slacks.iter_mut().enumerate() {
        for (n, v) in s.iter_mut().enumerate() {
            *v += epsilon[n];
            min_slack = min_slack.min(*v);
            if *v < -tol {
                violations.push((t, n));
            }
        }
    }
    let passed = violations.is_empty() && summability.as_ref().is_none_or(|r| r.consistent());
    Ok(FejerCertificate {
        targets: targets.to_vec(),
        phi,
        tol,
        slacks,
        epsilon,
        implied_epsilon: implied,
        violations,
        min_slack,
        stationary: true,
        summability,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    /// `sup_n ‖x_n‖`.
    pub sup_norm: f64,
    /// `sqrt(sup_n ‖x_n − z‖²_{W_n} / α)`.
    pub metric_bound: f64,
    /// `‖z‖ + Π(1+η_k)(‖x_0 − z‖_{W_0} + Σε_k)/√α`, valid for any trace obeying
    /// the quasi-Fejér inequality with `φ = |·|`.
    pub a_priori_bound: f64,
    pub flagged: bool,
}

/// Compares the iterates' size with the bound implied by quasi-Fejér monotonicity.
pub fn boundedness_report(trace: &IterateTrace, z: &Vector, eta: &Summable, eps: &EpsSpec) -> Result<BoundednessReport> {
    if trace.is_empty() {
        return Err(Error::precondition("boundedness report needs a non-empty trace"));
    }
    let d = trace.metric_distances(z)?;
    let alpha = trace.schedule().alpha();
    let sup_norm = trace.points().map(|x| x.norm()).fold(0.0, f64::max);
    let sup_d = d.iter().copied().fold(0.0, f64::max);
    let steps = trace.len() - 1;
    let e = resolve_eps(trace, eps, steps);
    let prod: f64 = trace.records.iter().take(steps).map(|r| 1.0 + eta.term(r.metric_index)).product();
    let a_priori_bound = z.norm() + prod * (d[0] + e.iter().sum::<f64>()) / alpha.sqrt();
    Ok(BoundednessReport {
        sup_norm,
        metric_bound: sup_d / alpha.sqrt(),
        a_priori_bound,
        flagged: sup_norm > a_priori_bound * (1.0 + 1e-9) + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormConvergenceReport {
    pub window: usize,
    pub tol: f64,
    /// `max − min` of `‖x_n − z‖_{W_n}` over the last `window` records.
    pub oscillation: f64,
    pub last_value: f64,
    pub converged: bool,
}

/// Tail-oscillation test for convergence of `‖x_n − z‖_{W_n}`.
pub fn norm_convergence_report(trace: &IterateTrace, z: &Vector, window: usize, tol: f64) -> Result<NormConvergenceReport> {
    if window == 0 || window > trace.len() {
        return Err(Error::precondition(format!(
            "window {window} must be between 1 and the trace length {}",
            trace.len()
        )));
    }
    let d = trace.metric_distances(z)?;
    let tail = &d[d.len() - window..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(NormConvergenceReport {
        window,
        tol,
        oscillation: hi - lo,
        last_value: d[d.len() - 1],
        converged: hi - lo <= tol,
    })
}

/// Result of [`hull_spread_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullCertificate {
    pub vertices: Vec<FejerCertificate>,
    /// Certificate for `z = Σλ_i z_i` with `ε_n = (1+η_n)α_n − α_{n+1} + max_i ε_{i,n}`.
    pub combination: FejerCertificate,
    /// `α_n = ½ ΣΣ λ_iλ_j ‖z_i − z_j‖²_{W_n}`.
    pub alpha_terms: Vec<f64>,
    pub passed: bool,
}

/// Transfers squared-distance quasi-Fejér monotonicity from vertices to a convex combination.
pub fn hull_spread_check(
    trace: &IterateTrace,
    vertices: &[Vector],
    weights: &[f64],
    eta: &Summable,
    eps: &EpsSpec,
    tol: f64,
) -> Result<HullCertificate> {
    if vertices.is_empty() || vertices.len() != weights.len() {
        return Err(Error::precondition("need one weight per vertex and at least one vertex"));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::precondition(format!("weights must lie on the simplex (sum {total})")));
    }
    let dim = trace.dim();
    let mut z = Vector::zeros(dim);
    for (v, w) in vertices.iter().zip(weights) {
        check_dim(dim, v.len())?;
        z += v * *w;
    }
    let vertex_certs: Vec<FejerCertificate> = vertices
        .iter()
        .map(|v| check_quasi_fejer(trace, std::slice::from_ref(v), eta, Phi::Square, eps, tol))
        .collect::<Result<_>>()?;

    let s = trace.schedule();
    let alpha_terms: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            let w = s.matrix(r.metric_index);
            let mut a = 0.0;
            for (i, zi) in vertices.iter().enumerate() {
                for (j, zj) in vertices.iter().enumerate() {
                    let d = zi - zj;
                    a += weights[i] * weights[j] * (&w * &d).dot(&d);
                }
            }
            0.5 * a
        })
        .collect();
    let steps = trace.len() - 1;
    let combined_eps: Vec<f64> = (0..steps)
        .map(|n| {
            let e_max = vertex_certs.iter().map(|c| c.epsilon[n]).fold(0.0, f64::max);
            (1.0 + eta.term(trace.records[n].metric_index)) * alpha_terms[n] - alpha_terms[n + 1] + e_max
        })
        .collect();
    let combination = check_quasi_fejer(trace, &[z], eta, Phi::Square, &EpsSpec::Given(combined_eps), tol)?;
    let passed = combination.passed && vertex_certs.iter().all(|c| c.passed);
    Ok(HullCertificate { vertices: vertex_certs, combination, alpha_terms, passed })
}

/// Result of [`shadow_sequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    #[serde(with = "serde_util::vectors")]
    pub shadows: Vec<Vector>,
    /// `(k, ‖z_{N−1} − z_{N−1−k}‖)` for each probe lag that fits in the trace.
    pub increments: Vec<(usize, f64)>,
    pub max_increment: f64,
    pub tol: f64,
    pub cauchy: bool,
    /// The target set was an intersection and its projection came from Dykstra's algorithm.
    pub approximated: bool,
}

/// Cauchy tolerance of [`shadow_sequence`].
pub const SHADOW_TOL: f64 = 1e-8;

/// `z_n = P_C^{W_n} x_n` and its terminal Cauchy increments.
pub fn shadow_sequence(trace: &IterateTrace, sets: &[ConvexSet]) -> Result<ShadowReport> {
    if sets.is_empty() {
        return Err(Error::invalid("shadow sequence needs at least one set"));
    }
    if trace.is_empty() {
        return Err(Error::precondition("shadow sequence needs a non-empty trace"));
    }
    let s = trace.schedule();
    let mut cache = MetricCache::default();
    let approximated = sets.len() > 1;
    let mut shadows = Vec::with_capacity(trace.len());
    for r in &trace.records {
        let w = cache.get(s, r.metric_index)?;
        let z = if approximated {
            intersection_project(sets, &r.x, Some(&w), 1e-13)?
        } else {
            project_metric(&sets[0], &w, &r.x)?
        };
        shadows.push(z);
    }
    let last = shadows.len() - 1;
    let increments: Vec<(usize, f64)> = PROBE_LAGS
        .iter()
        .filter(|k| **k <= last)
        .map(|k| (*k, (&shadows[last] - &shadows[last - k]).norm()))
        .collect();
    let max_increment = increments.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ShadowReport {
        shadows,
        increments,
        max_increment,
        tol: SHADOW_TOL,
        cauchy: max_increment <= SHADOW_TOL,
        approximated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_ops::{Direction, MetricRule};
    use nalgebra::dvector;

    fn line_trace(points: &[[f64; 2]]) -> IterateTrace {
        IterateTrace::from_points(points.iter().map(|p| dvector![p[0], p[1]]).collect(), None).unwrap()
    }

    #[test]
    fn constant_trace_passes_with_eps_slack() {
        let z = dvector![1.0, 2.0];
        let t = IterateTrace::from_points(vec![z.clone(); 5], None).unwrap();
        let eps = EpsSpec::Given(vec![0.5; 4]);
        let cert = check_quasi_fejer(&t, std::slice::from_ref(&z), &Summable::zero(), Phi::Abs, &eps, 0.0).unwrap();
        assert!(cert.passed);
        assert!(cert.slacks[0].iter().all(|s| *s == 0.5));
        let b = boundedness_report(&t, &Vector::zeros(2), &Summable::zero(), &EpsSpec::Given(vec![])).unwrap();
        assert_eq!(b.sup_norm, z.norm());
        assert!(!b.flagged);
        let nc = norm_convergence_report(&t, &Vector::zeros(2), 5, 1e-8).unwrap();
        assert_eq!(nc.oscillation, 0.0);
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = line_trace(&[[0.0, 0.0]]);
        let e = check_quasi_fejer(&t, &[dvector![0.0, 0.0]], &Summable::zero(), Phi::Abs, &EpsSpec::Auto, 0.0);
        assert!(matches!(e, Err(Error::Precondition(_))));
        assert!(norm_convergence_report(&t, &dvector![0.0, 0.0], 2, 1e-8).is_err());
    }

    #[test]
    fn moving_away_violates_and_auto_reports_implied_eps() {
        let t = line_trace(&[[1.0, 0.0], [2.0, 0.0], [2.5, 0.0], [2.75, 0.0]]);
        let z = dvector![0.0, 0.0];
        let cert = check_quasi_fejer(&t, std::slice::from_ref(&z), &Summable::zero(), Phi::Abs, &EpsSpec::Given(vec![]), 1e-12)
            .unwrap();
        assert!(!cert.passed);
        assert_eq!(cert.violations, vec![(0, 0), (0, 1), (0, 2)]);
        let auto = check_quasi_fejer(&t, &[z], &Summable::zero(), Phi::Abs, &EpsSpec::Auto, 1e-12).unwrap();
        assert_eq!(auto.epsilon, vec![1.0, 0.5, 0.25]);
        let report = auto.summability.unwrap();
        assert_eq!(report.verdict, SummabilityVerdict::Geometric);
        assert!((report.geometric_q - 0.5).abs() < 1e-12);
        assert!(auto.passed);
    }

    #[test]
    fn growing_implied_eps_is_inconclusive() {
        let r = summability_report(&[1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(r.verdict, SummabilityVerdict::Inconclusive);
        assert_eq!(summability_report(&[0.0, 0.0]).verdict, SummabilityVerdict::Zero);
    }

    #[test]
    fn hull_single_vertex_matches_plain_check() {
        let t = line_trace(&[[4.0, 0.0], [2.0, 1.0], [1.0, 0.5], [0.5, 0.25]]);
        let v = dvector![0.0, 0.0];
        let plain = check_quasi_fejer(&t, std::slice::from_ref(&v), &Summable::zero(), Phi::Square, &EpsSpec::Given(vec![]), 1e-12)
            .unwrap();
        let hull = hull_spread_check(&t, &[v], &[1.0], &Summable::zero(), &EpsSpec::Given(vec![]), 1e-12).unwrap();
        assert_eq!(plain.slacks, hull.combination.slacks);
        assert!(hull.passed);
        assert!(hull_spread_check(&t, &[dvector![0.0, 0.0]], &[0.9], &Summable::zero(), &EpsSpec::Auto, 0.0).is_err());
    }

    #[test]
    fn hull_failure_propagates() {
        let t = line_trace(&[[0.0, 0.0], [3.0, 0.0], [6.0, 0.0]]);
        let hull = hull_spread_check(
            &t,
            &[dvector![-1.0, 0.0], dvector![-1.0, 2.0]],
            &[0.5, 0.5],
            &Summable::zero(),
            &EpsSpec::Given(vec![]),
            1e-12,
        )
        .unwrap();
        assert!(!hull.passed);
        assert!(!hull.combination.passed);
    }

    #[test]
    fn shadow_of_feasible_trace_is_the_trace() {
        let t = line_trace(&[[-1.0, 0.0], [-0.5, 0.0], [-0.25, 0.0]]);
        let c = ConvexSet::half_space(dvector![1.0, 0.0], 0.0).unwrap();
        let r = shadow_sequence(&t, std::slice::from_ref(&c)).unwrap();
        assert_eq!(r.shadows, t.points().cloned().collect::<Vec<_>>());
        assert_eq!(r.increments, vec![(1, 0.25), (2, 0.75)]);
        assert!(!r.approximated);

        let t = line_trace(&[[3.0, 1.0]; 10]);
        let r = shadow_sequence(&t, &[c]).unwrap();
        assert_eq!(r.max_increment, 0.0);
        assert!(r.cauchy);
    }

    #[test]
    fn metric_distances_follow_schedule() {
        let s = MetricSchedule::new(
            MetricRule::ScaledDecay { base: Matrix::identity(1, 1), c: 1.0, q: 0.5 },
            Summable::Geometric { c: 1.0, q: 0.5 },
            None,
            Direction::Decreasing,
        )
        .unwrap();
        let t = IterateTrace::from_points(vec![dvector![1.0]; 3], Some(s)).unwrap();
        let d = t.metric_distances(&dvector![0.0]).unwrap();
        assert_eq!(d, vec![2f64.sqrt(), 1.5f64.sqrt(), 1.25f64.sqrt()]);
        let csv = check_quasi_fejer(&t, &[dvector![0.0]], &Summable::Geometric { c: 1.0, q: 0.5 }, Phi::Square, &EpsSpec::Auto, 0.0)
            .unwrap()
            .to_csv();
        assert!(csv.starts_with("target,n,slack,implied_eps\n0,0,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
