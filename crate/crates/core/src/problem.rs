//! The JSON problem format and its dispatch to solvers and validators.

use crate::convex_sets::{intersection_project, ConvexSet};
use crate::error::{check_dim, Error, Result};
use crate::fejer_monitor::{check_quasi_fejer, EpsSpec, FejerCertificate, IterateTrace, Phi};
use crate::metric_ops::{schedule_validate, Direction, MetricSchedule, Summable};
use crate::operator_class::MonotoneOperator;
use crate::serde_util;
use crate::solvers::{
    control_validate, feasibility_solve, gamma_schedule_validate, linear_inequalities, problem_validate,
    prox_landweber_with, proximal_point, ControlSequence, ErrorInjection, InverseProblem, RunConfig, StepRegime,
    SCHEDULE_CHECK_LEN,
};
use crate::Vector;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance for run certificates.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Feasibility,
    LinearInequalities,
    ProximalPoint,
    InverseProblem,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Feasibility => "feasibility",
            ProblemKind::LinearInequalities => "linear_inequalities",
            ProblemKind::ProximalPoint => "proximal_point",
            ProblemKind::InverseProblem => "inverse_problem",
        }
    }
}

/// `⟨x, u_i⟩ ≤ η_i` for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inequalities {
    #[serde(with = "serde_util::vectors")]
    pub us: Vec<Vector>,
    pub etas: Vec<f64>,
}

/// A complete run description.
///
/// Exactly the payload fields belonging to `kind` must be present:
/// `sets` (and optionally `control`) for feasibility, `inequalities` for linear
/// inequalities, `operator` for the proximal point method, and
/// `inverse_problem` (with optional `step_eta` and `regime`) for proximal Landweber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    pub kind: ProblemKind,
    /// Replaces the seed of geometric error injection when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<ConvexSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<Inequalities>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<MonotoneOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_problem: Option<InverseProblem>,
    /// `η_n` in the step condition for `γ_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_eta: Option<Summable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<StepRegime>,
    /// Metric schedule; identity when absent. Ignored for inverse problems, whose
    /// metrics are induced by the step sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<MetricSchedule>,
    pub config: RunConfig,
    /// Points of the solution set to certify the run against.
    #[serde(default, with = "serde_util::vectors", skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Vector>,
    /// Known solution of a generated instance.
    #[serde(default, with = "serde_util::opt_vector", skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vector>,
    /// Noise added to the data of a generated inverse problem.
    #[serde(default, with = "serde_util::opt_vector", skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vector>,
}

/// Command-line replacements for file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

/// One hypothesis and whether it held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: String,
    pub passed: bool,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(hypothesis: &str, passed: bool, detail: impl Into<String>) -> Self {
        HypothesisCheck { hypothesis: hypothesis.into(), passed, detail: detail.into() }
    }

    fn from_result(hypothesis: &str, r: Result<()>) -> Self {
        match r {
            Ok(()) => HypothesisCheck::new(hypothesis, true, "ok"),
            Err(e) => HypothesisCheck::new(hypothesis, false, e.to_string()),
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| Error::invalid(format!("problem file: {e}")))?;
        p.check_shape()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn dim(&self) -> usize {
        self.config.x0.len()
    }

    /// Schema version, payload presence and dimensions.
    pub fn check_shape(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        let kind = self.kind;
        let present = [
            ("sets", self.sets.is_some(), kind == ProblemKind::Feasibility),
            ("control", self.control.is_some(), kind == ProblemKind::Feasibility),
            ("inequalities", self.inequalities.is_some(), kind == ProblemKind::LinearInequalities),
            ("operator", self.operator.is_some(), kind == ProblemKind::ProximalPoint),
            ("inverse_problem", self.inverse_problem.is_some(), kind == ProblemKind::InverseProblem),
            ("step_eta", self.step_eta.is_some(), kind == ProblemKind::InverseProblem),
            ("regime", self.regime.is_some(), kind == ProblemKind::InverseProblem),
            ("schedule", self.schedule.is_some(), kind != ProblemKind::InverseProblem),
        ];
        for (field, is_set, allowed) in present {
            if is_set && !allowed {
                return Err(Error::invalid(format!("field `{field}` does not apply to kind `{}`", kind.name())));
            }
        }
        let dim = self.dim();
        let required = match kind {
            ProblemKind::Feasibility => self.sets.as_ref().map(|s| {
                s.iter().try_for_each(|c| check_dim(dim, c.dim()))?;
                if s.is_empty() {
                    return Err(Error::invalid("feasibility needs at least one set"));
                }
                if let Some(c) = &self.control {
                    c.check_shape()?;
                    if c.count() != s.len() {
                        return Err(Error::invalid(format!(
                            "control addresses {} operators but {} sets are given",
                            c.count(),
                            s.len()
                        )));
                    }
                }
                Ok(())
            }),
            ProblemKind::LinearInequalities => self.inequalities.as_ref().map(|q| {
                if q.us.is_empty() || q.us.len() != q.etas.len() {
                    return Err(Error::invalid("need one offset per normal vector and at least one inequality"));
                }
                q.us.iter().try_for_each(|u| check_dim(dim, u.len()))
            }),
            ProblemKind::ProximalPoint => self.operator.as_ref().map(|a| {
                a.validate()?;
                a.dim().map_or(Ok(()), |n| check_dim(dim, n))
            }),
            ProblemKind::InverseProblem => self.inverse_problem.as_ref().map(|p| check_dim(dim, p.dim())),
        };
        match required {
            None => Err(Error::invalid(format!("kind `{}` is missing its payload", kind.name()))),
            Some(r) => r,
        }?;
        if let Some(s) = &self.schedule {
            check_dim(dim, s.dim())?;
        }
        for z in self.targets.iter().chain(&self.planted).chain(&self.noise) {
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("targets and logged vectors must be finite"));
            }
        }
        for z in &self.targets {
            check_dim(dim, z.len())?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(m) = o.max_iter {
            self.config.max_iter = m;
        }
        if let Some(t) = o.tol {
            self.config.tol = Some(t);
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(e) = o.epsilon {
            self.config.epsilon = e;
        }
    }

    /// The run configuration with the file seed applied to error injection.
    pub fn effective_config(&self) -> RunConfig {
        let mut cfg = self.config.clone();
        if let (Some(s), ErrorInjection::Geometric { seed, .. }) = (self.seed, &mut cfg.errors) {
            *seed = s;
        }
        cfg
    }

    pub fn schedule(&self) -> MetricSchedule {
        self.schedule.clone().unwrap_or_else(|| MetricSchedule::identity(self.dim()))
    }

    pub fn step_eta(&self) -> Summable {
        self.step_eta.clone().unwrap_or_default()
    }

    fn feasibility_sets(&self) -> Option<Vec<ConvexSet>> {
        match self.kind {
            ProblemKind::Feasibility => self.sets.clone(),
            ProblemKind::LinearInequalities => self.inequalities.as_ref().map(|q| {
                q.us.iter().zip(&q.etas).filter_map(|(u, e)| ConvexSet::half_space(u.clone(), *e).ok()).collect()
            }),
            _ => None,
        }
    }

    /// Runs every applicable hypothesis validator.
    pub fn validate_hypotheses(&self) -> Vec<HypothesisCheck> {
        let cfg = self.effective_config();
        let dim = self.dim();
        let needs_gamma = matches!(self.kind, ProblemKind::ProximalPoint | ProblemKind::InverseProblem);
        let mut out = vec![HypothesisCheck::from_result(
            "run config: eps in (0,1), eps <= lambda_n <= 2 - eps, gamma_n >= eps",
            cfg.validate(dim, needs_gamma),
        )];
        if self.kind != ProblemKind::InverseProblem {
            out.push(schedule_check(&self.schedule(), cfg.max_iter));
        }
        match self.kind {
            ProblemKind::Feasibility => {
                let sets = self.sets.as_deref().unwrap_or_default();
                let ctrl = self.control.clone().unwrap_or_else(|| ControlSequence::periodic(sets.len()));
                let n = 2 * ctrl.period() + ctrl.max_window();
                out.push(match control_validate(&ctrl, n) {
                    Ok(r) if r.valid => HypothesisCheck::new("control: every index recurs within its window", true, "ok"),
                    Ok(r) => {
                        let (j, k) = r.failures[0];
                        HypothesisCheck::new(
                            "control: every index recurs within its window",
                            false,
                            format!("index {j} missing from the window starting at n = {k}"),
                        )
                    }
                    Err(e) => HypothesisCheck::new("control: every index recurs within its window", false, e.to_string()),
                });
            }
            ProblemKind::ProximalPoint => {}
            ProblemKind::LinearInequalities => {}
            ProblemKind::InverseProblem => {
                let p = self.inverse_problem.as_ref().expect("checked shape");
                out.extend(gamma_checks(p, &self.step_eta(), self.regime.unwrap_or_default(), &cfg));
                let rep = problem_validate(p);
                let detail = match rep.verdict.as_str() {
                    "bounded_below" => format!("term {} is bounded below", rep.bounded_below.unwrap_or(0)),
                    "coercive" => "f is coercive".to_string(),
                    _ => "no bounded-below term and f not known coercive; existence not certified".to_string(),
                };
                out.push(HypothesisCheck::new("minimizers exist", true, format!("{}: {detail}", rep.verdict)));
            }
        }
        out
    }

    /// Solves the problem; the returned trace carries the file seed.
    pub fn run(&self) -> Result<IterateTrace> {
        let cfg = self.effective_config();
        let mut trace = match self.kind {
            ProblemKind::Feasibility => {
                let sets = self.sets.as_deref().unwrap_or_default();
                let ctrl = self.control.clone().unwrap_or_else(|| ControlSequence::periodic(sets.len()));
                let mut t = feasibility_solve(
                    |i, _, w| {
                        Ok(crate::operator_class::TOperator::Projection { set: sets[i].clone(), metric: w.clone() })
                    },
                    sets,
                    &self.schedule(),
                    &ctrl,
                    &cfg,
                )?;
                t.header.solver = "feasibility".into();
                t
            }
            ProblemKind::LinearInequalities => {
                let q = self.inequalities.as_ref().expect("checked shape");
                linear_inequalities(&q.us, &q.etas, &self.schedule(), &cfg)?
            }
            ProblemKind::ProximalPoint => proximal_point(self.operator.as_ref().expect("checked shape"), &self.schedule(), &cfg)?,
            ProblemKind::InverseProblem => prox_landweber_with(
                self.inverse_problem.as_ref().expect("checked shape"),
                &self.step_eta(),
                &cfg,
                self.regime.unwrap_or_default(),
            )?,
        };
        trace.header.seed = self.seed;
        Ok(trace)
    }

    /// Targets for the run certificate: the file targets, or a point of the
    /// solution set computed from the final iterate.
    pub fn certificate_targets(&self, trace: &IterateTrace) -> Result<(Vec<Vector>, &'static str)> {
        if !self.targets.is_empty() {
            return Ok((self.targets.clone(), "file"));
        }
        let last = trace.last_point().ok_or_else(|| Error::precondition("empty trace"))?;
        match self.feasibility_sets() {
            Some(sets) => Ok((vec![intersection_project(&sets, last, None, 1e-13)?], "projection_of_final_iterate")),
            None => Ok((vec![last.clone()], "final_iterate")),
        }
    }

    /// Certifies the trace with `φ = |·|` and the perturbation envelope.
    pub fn certify(&self, trace: &IterateTrace) -> Result<(FejerCertificate, &'static str)> {
        let (targets, source) = self.certificate_targets(trace)?;
        let cert = check_quasi_fejer(
            trace,
            &targets,
            trace.schedule().eta_sequence(),
            Phi::Abs,
            &EpsSpec::Envelope,
            CERTIFICATE_TOL,
        )?;
        Ok((cert, source))
    }
}

fn schedule_check(s: &MetricSchedule, max_iter: usize) -> HypothesisCheck {
    let name = "metric schedule: (1 + eta_n) W_n >= W_(n+1), alpha I <= W_n, ||W_n|| <= mu";
    let n = (max_iter + 1).clamp(2, SCHEDULE_CHECK_LEN);
    match schedule_validate(s, n, 1e-10) {
        Err(e) => HypothesisCheck::new(name, false, e.to_string()),
        Ok(c) => {
            let dec = matches!(c.direction, Direction::Decreasing | Direction::Both);
            let inc = matches!(c.direction, Direction::Increasing | Direction::Both);
            if let Some(k) = c.decreasing_violations.first().filter(|_| dec) {
                HypothesisCheck::new(name, false, format!("(1 + eta_n) W_n >= W_(n+1) fails at n = {k}"))
            } else if let Some(k) = c.increasing_violations.first().filter(|_| inc) {
                HypothesisCheck::new(name, false, format!("(1 + nu_n) W_(n+1) >= W_n fails at n = {k}"))
            } else if let Some(k) = c.alpha_violations.first() {
                HypothesisCheck::new(name, false, format!("W_n >= alpha I fails at n = {k}"))
            } else if let Some(k) = c.norm_violations.first() {
                HypothesisCheck::new(name, false, format!("||W_n|| <= mu fails at n = {k}"))
            } else if c.direction == Direction::Increasing {
                HypothesisCheck::new(name, false, "solvers need a schedule declared decreasing or both")
            } else {
                HypothesisCheck::new(name, true, format!("checked n < {}", c.checked))
            }
        }
    }
}

fn gamma_checks(p: &InverseProblem, eta: &Summable, regime: StepRegime, cfg: &RunConfig) -> Vec<HypothesisCheck> {
    let Some(gamma) = &cfg.gamma else {
        return vec![HypothesisCheck::new("step sizes", false, "no gamma schedule")];
    };
    let s = p.s_bar();
    let eps = cfg.epsilon;
    let gammas: Vec<f64> = (0..=gamma.prefix_len()).map(|n| gamma.at(n)).collect();
    match regime {
        StepRegime::VariableMetric => {
            let mut out = vec![HypothesisCheck::new(
                "eps < 1/(1 + S)",
                eps < 1.0 / (1.0 + s),
                format!("eps = {eps}, 1/(1 + S) = {:e}", 1.0 / (1.0 + s)),
            )];
            match gamma_schedule_validate(&gammas, eta, eps, s) {
                Ok(r) => {
                    out.push(match r.band_violations.first() {
                        Some(n) => HypothesisCheck::new(
                            "eps <= gamma_n <= (1 - eps)/S",
                            false,
                            format!("fails at n = {n}: gamma = {}, bound {:e}", gammas[*n], (1.0 - eps) / s),
                        ),
                        None => HypothesisCheck::new("eps <= gamma_n <= (1 - eps)/S", true, format!("S = {s:e}")),
                    });
                    out.push(match r.step_violations.first() {
                        Some(n) => HypothesisCheck::new(
                            "(1 + eta_n) gamma_n - gamma_(n+1) <= eta_n / S",
                            false,
                            format!("fails at n = {n}"),
                        ),
                        None => HypothesisCheck::new("(1 + eta_n) gamma_n - gamma_(n+1) <= eta_n / S", true, "ok"),
                    });
                }
                Err(e) => out.push(HypothesisCheck::new("step sizes", false, e.to_string())),
            }
            out
        }
        StepRegime::Classical => {
            let upper = (2.0 - eps) / s;
            let band = gammas.iter().position(|g| !(*g >= eps && *g <= upper));
            vec![
                HypothesisCheck::new(
                    "eps <= gamma_n <= (2 - eps)/S",
                    band.is_none(),
                    band.map_or_else(|| "ok".to_string(), |n| format!("fails at n = {n}")),
                ),
                HypothesisCheck::from_result("eps <= lambda_n <= 1", cfg.lambda.check_range("lambda", eps, 1.0)),
            ]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_class::ProxFunction;
    use crate::solvers::{DataTerm, ParamSchedule};
    use crate::Matrix;
    use nalgebra::dvector;

    fn halfspaces() -> ProblemFile {
        ProblemFile {
            schema: 1,
            kind: ProblemKind::Feasibility,
            seed: None,
            sets: Some(vec![
                ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap(),
                ConvexSet::half_space(dvector![0.0, 1.0], 1.0).unwrap(),
            ]),
            control: None,
            inequalities: None,
            operator: None,
            inverse_problem: None,
            step_eta: None,
            regime: None,
            schedule: None,
            config: RunConfig::new(dvector![3.0, 4.0]),
            targets: Vec::new(),
            planted: None,
            noise: None,
        }
    }

    #[test]
    fn round_trip() {
        let p = halfspaces();
        assert_eq!(ProblemFile::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn rejects_unknown_fields_and_misplaced_payloads() {
        let mut v: serde_json::Value = serde_json::from_str(&halfspaces().to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(ProblemFile::from_json(&v.to_string()).is_err());
        let mut p = halfspaces();
        p.operator = Some(MonotoneOperator::subdifferential(ProxFunction::L1 { weight: 1.0 }));
        assert!(p.check_shape().is_err());
        let mut p = halfspaces();
        p.schema = 2;
        assert!(p.check_shape().is_err());
    }

    #[test]
    fn runs_and_certifies() {
        let p = halfspaces();
        let t = p.run().unwrap();
        let x = t.last_point().unwrap();
        assert!(x[0] <= 1.0 + 1e-12 && x[1] <= 1.0 + 1e-12);
        let (cert, source) = p.certify(&t).unwrap();
        assert!(cert.passed);
        assert_eq!(source, "projection_of_final_iterate");
    }

    #[test]
    fn hypothesis_table_flags_bad_lambda_and_gamma() {
        let mut p = halfspaces();
        p.config.lambda = ParamSchedule::Constant(2.5);
        assert!(p.validate_hypotheses().iter().any(|c| !c.passed));

        let ip = InverseProblem::new(
            ProxFunction::L1 { weight: 0.1 },
            vec![DataTerm { l: Matrix::identity(2, 2), r: dvector![1.0, 0.0], mu: 1.0 }],
        )
        .unwrap();
        let mut q = halfspaces();
        q.kind = ProblemKind::InverseProblem;
        q.sets = None;
        q.inverse_problem = Some(ip);
        q.config = RunConfig::new(dvector![0.0, 0.0]).with_gamma(ParamSchedule::List(vec![0.9, 0.1]));
        q.config.epsilon = 0.05;
        let checks = q.validate_hypotheses();
        let step = checks.iter().find(|c| c.hypothesis.starts_with("(1 + eta_n)")).unwrap();
        assert!(!step.passed);
        assert!(step.detail.contains("n = 0"));
    }

    #[test]
    fn seed_overrides_error_injection() {
        let mut p = halfspaces();
        p.config.errors = ErrorInjection::Geometric { c: 1.0, q: 0.5, seed: 1 };
        p.apply_overrides(&Overrides { seed: Some(9), max_iter: Some(7), ..Default::default() });
        assert_eq!(p.effective_config().errors, ErrorInjection::Geometric { c: 1.0, q: 0.5, seed: 9 });
        assert_eq!(p.config.max_iter, 7);
    }
}
