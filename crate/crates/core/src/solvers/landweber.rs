//! Proximal Landweber for `min f(x) + ½ Σ μ_i ‖L_i x − r_i‖²`.

use super::{scaled_norm, ErrorInjection, RunConfig, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::fejer_monitor::{IterateRecord, IterateTrace};
use crate::metric_ops::{Direction, MetricRule, MetricSchedule, Summable};
use crate::operator_class::{operator_norm, ProxFunction, ScalarPiece};
use crate::serde_util;
use crate::{Matrix, Vector};
use serde::{Deserialize, Serialize};

/// Multiplicative safety margin on `Σ μ_i ‖L_i‖²`.
pub const NORM_BIAS: f64 = 1e-6;

/// One data-fit term `½ μ ‖L x − r‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataTerm {
    #[serde(with = "serde_util::matrix")]
    pub l: Matrix,
    #[serde(with = "serde_util::vector")]
    pub r: Vector,
    pub mu: f64,
}

/// A regularized least-squares problem with cached constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InverseProblemSpec", into = "InverseProblemSpec")]
pub struct InverseProblem {
    f: ProxFunction,
    terms: Vec<DataTerm>,
    norms: Vec<f64>,
    s_bar: f64,
    u_mat: Matrix,
    u_vec: Vector,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InverseProblemSpec {
    f: ProxFunction,
    terms: Vec<DataTerm>,
}

impl TryFrom<InverseProblemSpec> for InverseProblem {
    type Error = Error;

    fn try_from(s: InverseProblemSpec) -> Result<Self> {
        InverseProblem::new(s.f, s.terms)
    }
}

impl From<InverseProblem> for InverseProblemSpec {
    fn from(p: InverseProblem) -> Self {
        InverseProblemSpec { f: p.f, terms: p.terms }
    }
}

impl InverseProblem {
    pub fn new(f: ProxFunction, terms: Vec<DataTerm>) -> Result<Self> {
        f.validate()?;
        let first = terms.first().ok_or_else(|| Error::invalid("inverse problem needs at least one data term"))?;
        let n = first.l.ncols();
        if let Some(d) = f.dim() {
            check_dim(n, d)?;
        }
        let mut norms = Vec::with_capacity(terms.len());
        let mut u_mat = Matrix::zeros(n, n);
        let mut u_vec = Vector::zeros(n);
        let mut s = 0.0;
        for t in &terms {
            check_dim(n, t.l.ncols())?;
            check_dim(t.l.nrows(), t.r.len())?;
            if !(t.mu.is_finite() && t.mu > 0.0) {
                return Err(Error::invalid(format!("term weight mu must be positive, got {}", t.mu)));
            }
            if t.r.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("data vectors must be finite"));
            }
            let est = operator_norm(&t.l, 1e-12)?;
            norms.push(est.upper);
            s += t.mu * est.upper * est.upper;
            u_mat += t.l.transpose() * &t.l * t.mu;
            u_vec -= t.l.transpose() * &t.r * t.mu;
        }
        let u_mat = (&u_mat + u_mat.transpose()) * 0.5;
        Ok(InverseProblem { f, terms, norms, s_bar: (1.0 + NORM_BIAS) * s, u_mat, u_vec })
    }

    pub fn dim(&self) -> usize {
        self.u_mat.nrows()
    }

    pub fn f(&self) -> &ProxFunction {
        &self.f
    }

    pub fn terms(&self) -> &[DataTerm] {
        &self.terms
    }

    /// Certified upper estimates of `‖L_i‖`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `S̄ = (1 + 10⁻⁶) Σ μ_i ‖L_i‖²`.
    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    /// `U = Σ μ_i L_iᵀ L_i`.
    pub fn u_mat(&self) -> &Matrix {
        &self.u_mat
    }

    /// `u = −Σ μ_i L_iᵀ r_i`.
    pub fn u_vec(&self) -> &Vector {
        &self.u_vec
    }

    pub fn data_fit(&self, x: &Vector) -> f64 {
        self.terms.iter().map(|t| 0.5 * t.mu * (&t.l * x - &t.r).norm_squared()).sum()
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        self.f.value(x) + self.data_fit(x)
    }

    /// `x + γ Σ μ_i L_iᵀ (r_i − L_i x)`.
    pub fn gradient_step(&self, x: &Vector, gamma: f64) -> Vector {
        let mut g = Vector::zeros(x.len());
        for t in &self.terms {
            g += t.l.transpose() * (&t.r - &t.l * x) * t.mu;
        }
        x + g * gamma
    }
}

/// Outcome of [`gamma_schedule_validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub checked: usize,
    /// Indices with `γ_n ∉ [ε, (1 − ε)/S]`.
    pub band_violations: Vec<usize>,
    /// Indices with `(1 + η_n)γ_n − γ_{n+1} > η_n / S`.
    pub step_violations: Vec<usize>,
    pub valid: bool,
}

/// Checks `ε ≤ γ_n ≤ (1−ε)/S` and `(1+η_n)γ_n − γ_{n+1} ≤ η_n/S` on the given values.
pub fn gamma_schedule_validate(gammas: &[f64], etas: &Summable, epsilon: f64, s: f64) -> Result<GammaReport> {
    if !(s > 0.0) {
        return Err(Error::precondition(format!("need S > 0, got {s}")));
    }
    let upper = (1.0 - epsilon) / s;
    let band_violations: Vec<usize> =
        (0..gammas.len()).filter(|&n| !(gammas[n] >= epsilon && gammas[n] <= upper)).collect();
    let step_violations: Vec<usize> = (0..gammas.len().saturating_sub(1))
        .filter(|&n| {
            let eta = etas.term(n);
            (1.0 + eta) * gammas[n] - gammas[n + 1] > eta / s + 1e-15 * gammas[n]
        })
        .collect();
    Ok(GammaReport {
        checked: gammas.len(),
        valid: band_violations.is_empty() && step_violations.is_empty(),
        band_violations,
        step_violations,
    })
}

/// Which parameter hypotheses a proximal Landweber run is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRegime {
    /// `ε ≤ γ_n ≤ (1−ε)/S`, `(1+η_n)γ_n − γ_{n+1} ≤ η_n/S`, `λ_n ∈ [ε, 2−ε]`;
    /// iterates are certified in the metrics `W_n = I − γ_n U`.
    #[default]
    VariableMetric,
    /// `ε ≤ γ_n ≤ (2−ε)/S`, `λ_n ∈ [ε, 1]`; no metric certificate (identity is logged).
    Classical,
}

fn check_landweber_params(s_bar: f64, eta: &Summable, cfg: &RunConfig, regime: StepRegime) -> Result<Vec<f64>> {
    eta.validate()?;
    let gamma = cfg.gamma.as_ref().ok_or_else(|| Error::invalid("proximal Landweber needs a gamma schedule"))?;
    let eps = cfg.epsilon;
    // values up to one past the stored prefix determine every later condition
    let gammas: Vec<f64> = (0..=gamma.prefix_len()).map(|n| gamma.at(n)).collect();
    match regime {
        StepRegime::VariableMetric => {
            if !(eps < 1.0 / (1.0 + s_bar)) {
                return Err(Error::precondition(format!(
                    "epsilon = {eps} must be below 1/(1 + sum mu_i ||L_i||^2) = {:e}",
                    1.0 / (1.0 + s_bar)
                )));
            }
            let report = gamma_schedule_validate(&gammas, eta, eps, s_bar)?;
            if let Some(n) = report.band_violations.first() {
                return Err(Error::precondition(format!(
                    "step band eps <= gamma_n <= (1 - eps)/S fails at n = {n} (gamma = {}, bound {:e})",
                    gammas[*n],
                    (1.0 - eps) / s_bar
                )));
            }
            if let Some(n) = report.step_violations.first() {
                return Err(Error::precondition(format!(
                    "step condition (1 + eta_n) gamma_n - gamma_(n+1) <= eta_n / S fails at n = {n}"
                )));
            }
        }
        StepRegime::Classical => {
            let upper = (2.0 - eps) / s_bar;
            if let Some(n) = gammas.iter().position(|g| !(*g >= eps && *g <= upper)) {
                return Err(Error::precondition(format!(
                    "step band eps <= gamma_n <= (2 - eps)/S fails at n = {n}"
                )));
            }
            cfg.lambda.check_range("lambda", eps, 1.0).map_err(|e| Error::precondition(e.to_string()))?;
        }
    }
    Ok(gamma.values().to_vec())
}

fn landweber_schedule(u_mat: &Matrix, gammas: Vec<f64>, eta: &Summable, regime: StepRegime) -> Result<MetricSchedule> {
    match regime {
        StepRegime::VariableMetric => MetricSchedule::new(
            MetricRule::ShiftedIdentity { u: u_mat.clone(), gammas },
            eta.clone(),
            None,
            Direction::Decreasing,
        ),
        StepRegime::Classical => Ok(MetricSchedule::identity(u_mat.nrows())),
    }
}

/// `x_{n+1} = x_n + λ_n (prox_{γ_n f}(x_n + γ_n Σ μ_i L_iᵀ(r_i − L_i x_n)) + a_n − x_n)`.
pub fn prox_landweber(p: &InverseProblem, eta: &Summable, cfg: &RunConfig) -> Result<IterateTrace> {
    prox_landweber_with(p, eta, cfg, StepRegime::VariableMetric)
}

pub fn prox_landweber_with(p: &InverseProblem, eta: &Summable, cfg: &RunConfig, regime: StepRegime) -> Result<IterateTrace> {
    let dim = p.dim();
    cfg.validate(dim, true)?;
    let gammas = check_landweber_params(p.s_bar(), eta, cfg, regime)?;
    let sched = landweber_schedule(p.u_mat(), gammas, eta, regime)?;
    let gamma = cfg.gamma.as_ref().expect("validated");

    let mut trace = TraceBuilder::new("prox_landweber", sched, cfg, 1);
    let mut errors = cfg.errors.stream(dim);
    let mut x = cfg.x0.clone();
    for n in 0..cfg.max_iter {
        let g = gamma.at(n);
        let v = p.gradient_step(&x, g);
        let y = p.f().prox(g, &v).map_err(|e| e.at(n))?;
        let a = errors.next_vector();
        let lambda = cfg.lambda.at(n);
        let next = &x + (y + &a - &x) * lambda;
        let mut rec = IterateRecord::bare(n, x.clone());
        rec.lambda = lambda;
        rec.gamma = Some(g);
        rec.a_norm = scaled_norm(&a);
        rec.objective = Some(p.objective(&x));
        trace.push(rec);
        let moved = (&next - &x).norm();
        x = next;
        if !x.iter().all(|t| t.is_finite()) {
            return Err(Error::numeric("iterate became non-finite", f64::INFINITY).at(n));
        }
        if trace.step_done(moved) {
            return Ok(finish(trace, n + 1, x, p, true));
        }
    }
    Ok(finish(trace, cfg.max_iter, x, p, false))
}

fn finish(trace: TraceBuilder, n: usize, x: Vector, p: &InverseProblem, converged: bool) -> IterateTrace {
    let objective = p.objective(&x);
    let mut t = trace.finish(n, x, Vec::new(), converged);
    if let Some(last) = t.records.last_mut() {
        last.objective = Some(objective);
    }
    t
}

/// Proximal Landweber with `f = Σ_k φ_k(⟨·, e_k⟩)` and perturbations given as
/// basis coefficients `α_{n,k}`:
/// `x_{n+1} = x_n + λ_n (Σ_k (α_{n,k} + prox_{γ_n φ_k}⟨v_n, e_k⟩) e_k − x_n)`,
/// `v_n = x_n + γ_n Lᵀ(r − L x_n)`.
#[allow(clippy::too_many_arguments)]
pub fn basis_prox_landweber(
    q: &Matrix,
    pieces: &[ScalarPiece],
    l: &Matrix,
    r: &Vector,
    alphas: &ErrorInjection,
    eta: &Summable,
    cfg: &RunConfig,
    regime: StepRegime,
) -> Result<IterateTrace> {
    let f = ProxFunction::SeparableBasis { q: q.clone(), pieces: pieces.to_vec() };
    let p = InverseProblem::new(f, vec![DataTerm { l: l.clone(), r: r.clone(), mu: 1.0 }])?;
    let dim = p.dim();
    cfg.validate(dim, true)?;
    alphas.validate(dim)?;
    let gammas = check_landweber_params(p.s_bar(), eta, cfg, regime)?;
    let sched = landweber_schedule(p.u_mat(), gammas, eta, regime)?;
    let gamma = cfg.gamma.as_ref().expect("validated");

    let mut trace = TraceBuilder::new("basis_prox_landweber", sched, cfg, 1);
    let mut coeff_noise = alphas.stream(dim);
    let mut x = cfg.x0.clone();
    for n in 0..cfg.max_iter {
        let g = gamma.at(n);
        let v = p.gradient_step(&x, g);
        let c = q.transpose() * &v;
        let alpha = coeff_noise.next_vector();
        let coeffs = Vector::from_fn(dim, |k, _| alpha[k] + pieces[k].prox(g, c[k]));
        let lambda = cfg.lambda.at(n);
        let next = &x + (q * coeffs - &x) * lambda;
        let mut rec = IterateRecord::bare(n, x.clone());
        rec.lambda = lambda;
        rec.gamma = Some(g);
        rec.a_norm = scaled_norm(&alpha);
        rec.objective = Some(p.objective(&x));
        trace.push(rec);
        let moved = (&next - &x).norm();
        x = next;
        if !x.iter().all(|t| t.is_finite()) {
            return Err(Error::numeric("iterate became non-finite", f64::INFINITY).at(n));
        }
        if trace.step_done(moved) {
            return Ok(finish(trace, n + 1, x, &p, true));
        }
    }
    Ok(finish(trace, cfg.max_iter, x, &p, false))
}

/// Per-term solvability witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub sigma_min: f64,
    /// `β` with `‖L x‖ ≥ β‖x‖` (zero when `L` is not bounded below).
    pub beta: f64,
    /// `√μ · σ_min`, i.e. the bound for the weighted term `√μ L`.
    pub weighted_beta: f64,
    /// `μ β²`, a lower spectral bound for `U` contributed by this term.
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub terms: Vec<TermReport>,
    /// First term whose operator is bounded below.
    pub bounded_below: Option<usize>,
    /// `f` alone is coercive by the catalog.
    pub coercive: bool,
    /// `"bounded_below"`, `"coercive"` or `"unverified"`.
    pub verdict: String,
    pub s_bar: f64,
}

/// Reports bounded-below and coercivity witnesses for existence of minimizers.
pub fn problem_validate(p: &InverseProblem) -> ProblemReport {
    let terms: Vec<TermReport> = p
        .terms()
        .iter()
        .map(|t| {
            let sv = t.l.clone().svd(false, false).singular_values;
            let (lo, hi) = (sv.min(), sv.max());
            let sigma_min = if t.l.nrows() < t.l.ncols() { 0.0 } else { lo };
            let beta = if sigma_min > 1e-12 * hi { sigma_min } else { 0.0 };
            TermReport { sigma_min, beta, weighted_beta: t.mu.sqrt() * beta, modulus: t.mu * beta * beta }
        })
        .collect();
    let bounded_below = terms.iter().position(|t| t.beta > 0.0);
    let coercive = p.f().is_coercive();
    let verdict = if bounded_below.is_some() {
        "bounded_below"
    } else if coercive {
        "coercive"
    } else {
        "unverified"
    };
    ProblemReport { terms, bounded_below, coercive, verdict: verdict.into(), s_bar: p.s_bar() }
}
