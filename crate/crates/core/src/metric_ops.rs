//! SPD metrics, Loewner-order predicates and metric schedules.
//!
//! A [`MetricOperator`] is a symmetric positive definite matrix `W` together
//! with a verified lower spectral bound `alpha` (so `W ⪰ alpha·I`) and a cached
//! Cholesky factor `W = L Lᵀ`. It induces `⟨x, y⟩_W = ⟨Wx, y⟩` and
//! `‖x‖_W = sqrt(⟨Wx, x⟩)`.
//!
//! A [`MetricSchedule`] is a rule `n ↦ W_n` plus the summable sequences
//! `(η_n)` / `(ν_n)` controlling how much consecutive metrics may grow
//! (`(1+η_n) W_n ⪰ W_{n+1}`) or shrink (`(1+ν_n) W_{n+1} ⪰ W_n`).

use crate::error::{check_dim, Error, Result};
use crate::serde_util;
use crate::{Matrix, Vector};
use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Default absolute tolerance on matrix slacks.
pub const DEFAULT_TOL: f64 = 1e-10;

const SYMMETRY_RTOL: f64 = 1e-12;

pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn symmetry_defect(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Rejects non-square, non-finite or asymmetric matrices.
pub(crate) fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid(format!("{what} must be non-empty")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    let defect = symmetry_defect(m);
    if defect > SYMMETRY_RTOL * max_abs(m).max(1.0) {
        return Err(Error::invalid(format!("{what} is not symmetric (defect {defect:e})")));
    }
    Ok(())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_bounds(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// An SPD operator `W ∈ 𝒫_α(ℝⁿ)` with certified bounds and a cached factor.
#[derive(Debug, Clone)]
pub struct MetricOperator {
    matrix: Matrix,
    alpha: f64,
    norm: f64,
    chol: Cholesky<f64, Dyn>,
    scalar: Option<f64>,
}

impl MetricOperator {
    /// Builds `W` and verifies `λ_min(W) ≥ alpha − 1e−10`.
    pub fn new(matrix: Matrix, alpha: f64) -> Result<Self> {
        check_symmetric(&matrix, "metric")?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("metric lower bound alpha must be positive, got {alpha}")));
        }
        let (lo, hi) = eigen_bounds(&matrix);
        if lo < alpha - DEFAULT_TOL {
            return Err(Error::invalid(format!(
                "metric smallest eigenvalue {lo:e} is below the declared alpha {alpha:e}"
            )));
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::invalid("metric is not positive definite (Cholesky failed)"))?;
        let l = chol.l();
        let defect = (&l * l.transpose() - &matrix).norm();
        if defect > 1e-10 * matrix.norm() {
            return Err(Error::numeric("Cholesky factor does not reproduce the metric", defect));
        }
        let scalar = scalar_multiple(&matrix);
        Ok(Self { matrix, alpha, norm: hi, chol, scalar })
    }

    /// Builds `W` with `alpha` set to its smallest eigenvalue.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        check_symmetric(&matrix, "metric")?;
        let (lo, _) = eigen_bounds(&matrix);
        if lo <= 0.0 {
            return Err(Error::invalid(format!("metric is not positive definite (λ_min = {lo:e})")));
        }
        Self::new(matrix, lo)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Matrix::identity(dim, dim), 1.0).expect("identity is SPD")
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        Self::new(Matrix::identity(dim, dim) * c, c)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Certified lower spectral bound.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Spectral norm `‖W‖ = λ_max(W)`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `Some(c)` when `W = c·I` exactly.
    pub fn scalar(&self) -> Option<f64> {
        self.scalar
    }

    /// Lower-triangular factor `L` with `W = L Lᵀ`.
    pub fn factor(&self) -> Matrix {
        self.chol.l()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }

    /// `W⁻¹ x`.
    pub fn solve(&self, x: &Vector) -> Vector {
        self.chol.solve(x)
    }

    /// `W⁻¹ B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> Matrix {
        symmetrize(&self.chol.inverse())
    }

    /// Whitening map `x ↦ Lᵀx`, so that `‖x‖_W = ‖Lᵀx‖`.
    pub fn whiten(&self, x: &Vector) -> Vector {
        self.chol.l().transpose() * x
    }

    /// Inverse of [`whiten`](Self::whiten).
    pub fn unwhiten(&self, y: &Vector) -> Vector {
        let lt = self.chol.l().transpose();
        lt.solve_upper_triangular(y).expect("Cholesky factor has a non-zero diagonal")
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        (&self.matrix * x).dot(y)
    }

    pub fn norm_of(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }
}

fn scalar_multiple(m: &Matrix) -> Option<f64> {
    let c = m[(0, 0)];
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { c } else { 0.0 };
            if m[(i, j)] != expect {
                return None;
            }
        }
    }
    Some(c)
}

/// `⟨Wx, y⟩`.
pub fn metric_inner(w: &MetricOperator, x: &Vector, y: &Vector) -> Result<f64> {
    check_dim(w.dim(), x.len())?;
    check_dim(w.dim(), y.len())?;
    Ok(w.inner(x, y))
}

/// `‖x‖_W`.
pub fn metric_norm(w: &MetricOperator, x: &Vector) -> Result<f64> {
    check_dim(w.dim(), x.len())?;
    Ok(w.norm_of(x))
}

/// Signed Loewner slack `λ_min(A − B)`; non-negative iff `A ⪰ B`.
pub fn loewner_slack(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_symmetric(a, "left operand")?;
    check_symmetric(b, "right operand")?;
    check_dim(a.nrows(), b.nrows())?;
    Ok(eigen_bounds(&(a - b)).0)
}

/// `A ⪰ B` up to `tol`, decided on the smallest eigenvalue of `A − B`.
pub fn loewner_geq(a: &Matrix, b: &Matrix, tol: f64) -> Result<bool> {
    Ok(loewner_slack(a, b)? >= -tol)
}

/// Conclusions of the inverse-order lemma, each as a signed slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseOrderReport {
    /// `λ_min(α⁻¹I − B⁻¹)`.
    pub upper_slack: f64,
    /// `λ_min(B⁻¹ − A⁻¹)`.
    pub middle_slack: f64,
    /// `λ_min(A⁻¹ − μ⁻¹I)`.
    pub lower_slack: f64,
    /// Min over sampled x of `⟨A⁻¹x, x⟩ − ‖A‖⁻¹‖x‖²`.
    pub sampled_quadratic_slack: f64,
    /// `λ_min(A⁻¹) − ‖A‖⁻¹`, the sample-free version of the previous slack.
    pub quadratic_slack: f64,
    /// `α⁻¹ − ‖A⁻¹‖`.
    pub inverse_norm_slack: f64,
}

impl InverseOrderReport {
    pub fn min_slack(&self) -> f64 {
        [
            self.upper_slack,
            self.middle_slack,
            self.lower_slack,
            self.sampled_quadratic_slack,
            self.quadratic_slack,
            self.inverse_norm_slack,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

/// Checks `μI ⪰ A ⪰ B ⪰ αI` and reports the inverse-order conclusions
/// `α⁻¹I ⪰ B⁻¹ ⪰ A⁻¹ ⪰ μ⁻¹I`, `⟨A⁻¹x, x⟩ ≥ ‖A‖⁻¹‖x‖²` and `‖A⁻¹‖ ≤ α⁻¹`.
pub fn inverse_order_check(
    a: &MetricOperator,
    b: &MetricOperator,
    alpha: f64,
    mu: f64,
    tol: f64,
) -> Result<InverseOrderReport> {
    check_dim(a.dim(), b.dim())?;
    if !(alpha > 0.0 && mu >= alpha) {
        return Err(Error::invalid(format!("need 0 < alpha <= mu, got alpha={alpha}, mu={mu}")));
    }
    let n = a.dim();
    let id = Matrix::identity(n, n);
    let hypotheses = [
        ("mu*I >= A", loewner_slack(&(&id * mu), a.matrix())?),
        ("A >= B", loewner_slack(a.matrix(), b.matrix())?),
        ("B >= alpha*I", loewner_slack(b.matrix(), &(&id * alpha))?),
    ];
    for (name, slack) in hypotheses {
        if slack < -tol {
            return Err(Error::Hypothesis(format!("{name} fails with slack {slack:e}")));
        }
    }

    let a_inv = a.inverse();
    let b_inv = b.inverse();
    let (a_inv_min, a_inv_max) = eigen_bounds(&a_inv);
    let a_norm = a.norm();

    let mut rng = ChaCha8Rng::seed_from_u64(0x1e55);
    let mut sampled = f64::INFINITY;
    for _ in 0..32 {
        let x = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let s = (&a_inv * &x).dot(&x) - x.norm_squared() / a_norm;
        sampled = sampled.min(s);
    }

    Ok(InverseOrderReport {
        upper_slack: loewner_slack(&(&id / alpha), &b_inv)?,
        middle_slack: loewner_slack(&b_inv, &a_inv)?,
        lower_slack: loewner_slack(&a_inv, &(&id / mu))?,
        sampled_quadratic_slack: sampled,
        quadratic_slack: a_inv_min - 1.0 / a_norm,
        inverse_norm_slack: 1.0 / alpha - a_inv_max,
    })
}

/// A nonnegative sequence whose summability is decidable from its form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Summable {
    /// `c·qⁿ` with `0 ≤ q < 1`.
    Geometric { c: f64, q: f64 },
    /// `c/(n+1)²`.
    InverseSquare { c: f64 },
    /// Explicit finite list, zero afterwards.
    List { values: Vec<f64> },
}

impl Default for Summable {
    fn default() -> Self {
        Summable::zero()
    }
}

impl Summable {
    pub fn zero() -> Self {
        Summable::List { values: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Summable::Geometric { c, q } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::invalid(format!("geometric sequence needs c >= 0, got {c}")));
                }
                if !(*q >= 0.0 && *q < 1.0) {
                    return Err(Error::invalid(format!("geometric sequence needs 0 <= q < 1, got {q}")));
                }
            }
            Summable::InverseSquare { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::invalid(format!("inverse-square sequence needs c >= 0, got {c}")));
                }
            }
            Summable::List { values } => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::invalid(format!("summable list entries must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn term(&self, n: usize) -> f64 {
        match self {
            Summable::Geometric { c, q } => c * q.powf(n as f64),
            Summable::InverseSquare { c } => {
                let k = (n + 1) as f64;
                c / (k * k)
            }
            Summable::List { values } => values.get(n).copied().unwrap_or(0.0),
        }
    }

    /// Closed-form value of the full series.
    pub fn total(&self) -> f64 {
        match self {
            Summable::Geometric { c, q } => c / (1.0 - q),
            Summable::InverseSquare { c } => c * std::f64::consts::PI.powi(2) / 6.0,
            Summable::List { values } => values.iter().sum(),
        }
    }

    pub fn supremum(&self) -> f64 {
        match self {
            Summable::Geometric { c, .. } | Summable::InverseSquare { c } => *c,
            Summable::List { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Which Loewner monotonicity a schedule claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `(1+η_n) W_n ⪰ W_{n+1}`.
    Decreasing,
    /// `(1+ν_n) W_{n+1} ⪰ W_n`.
    Increasing,
    Both,
}

/// The family `n ↦ W_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricRule {
    Constant {
        #[serde(with = "serde_util::matrix")]
        matrix: Matrix,
    },
    /// `W_n = (1 + c·qⁿ)·base`.
    ScaledDecay {
        #[serde(with = "serde_util::matrix")]
        base: Matrix,
        c: f64,
        q: f64,
    },
    /// `W_n = base + c·qⁿ·v vᵀ`.
    RankOneDecay {
        #[serde(with = "serde_util::matrix")]
        base: Matrix,
        #[serde(with = "serde_util::vector")]
        v: Vector,
        c: f64,
        q: f64,
    },
    /// Explicit list; the last entry repeats.
    List {
        #[serde(with = "serde_util::matrices")]
        matrices: Vec<Matrix>,
    },
    /// `W_n = I − γ_n U`; the last step size repeats.
    ShiftedIdentity {
        #[serde(with = "serde_util::matrix")]
        u: Matrix,
        gammas: Vec<f64>,
    },
}

impl MetricRule {
    pub fn dim(&self) -> usize {
        match self {
            MetricRule::Constant { matrix } => matrix.nrows(),
            MetricRule::ScaledDecay { base, .. } | MetricRule::RankOneDecay { base, .. } => base.nrows(),
            MetricRule::List { matrices } => matrices.first().map_or(0, |m| m.nrows()),
            MetricRule::ShiftedIdentity { u, .. } => u.nrows(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            MetricRule::Constant { .. } => "constant",
            MetricRule::ScaledDecay { .. } => "scaled_decay",
            MetricRule::RankOneDecay { .. } => "rank_one_decay",
            MetricRule::List { .. } => "list",
            MetricRule::ShiftedIdentity { .. } => "shifted_identity",
        }
    }

    pub fn matrix(&self, n: usize) -> Matrix {
        match self {
            MetricRule::Constant { matrix } => matrix.clone(),
            MetricRule::ScaledDecay { base, c, q } => base * (1.0 + c * q.powf(n as f64)),
            MetricRule::RankOneDecay { base, v, c, q } => base + (v * v.transpose()) * (c * q.powf(n as f64)),
            MetricRule::List { matrices } => matrices[n.min(matrices.len() - 1)].clone(),
            MetricRule::ShiftedIdentity { u, gammas } => {
                let g = gammas[n.min(gammas.len() - 1)];
                Matrix::identity(u.nrows(), u.ncols()) - u * g
            }
        }
    }

    /// Certified `(alpha, mu)` with `alpha·I ⪯ W_n` and `‖W_n‖ ≤ mu` for every `n`.
    pub fn certified_bounds(&self) -> Result<(f64, f64)> {
        let (alpha, mu) = match self {
            MetricRule::Constant { matrix } => {
                check_symmetric(matrix, "constant metric")?;
                eigen_bounds(matrix)
            }
            MetricRule::ScaledDecay { base, c, q } => {
                check_symmetric(base, "base metric")?;
                check_decay(*c, *q)?;
                let (lo, hi) = eigen_bounds(base);
                (lo, (1.0 + c) * hi)
            }
            MetricRule::RankOneDecay { base, v, c, q } => {
                check_symmetric(base, "base metric")?;
                check_dim(base.nrows(), v.len())?;
                check_decay(*c, *q)?;
                let (lo, hi) = eigen_bounds(base);
                (lo, hi + c * v.norm_squared())
            }
            MetricRule::List { matrices } => {
                let first = matrices.first().ok_or_else(|| Error::invalid("metric list is empty"))?;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for m in matrices {
                    check_symmetric(m, "listed metric")?;
                    check_dim(first.nrows(), m.nrows())?;
                    let (l, h) = eigen_bounds(m);
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
                (lo, hi)
            }
            MetricRule::ShiftedIdentity { u, gammas } => {
                check_symmetric(u, "U")?;
                if gammas.is_empty() {
                    return Err(Error::invalid("shifted-identity family needs at least one step size"));
                }
                if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                    return Err(Error::invalid(format!("step sizes must be finite and >= 0, got {g}")));
                }
                let (u_lo, u_hi) = eigen_bounds(u);
                if u_lo < -DEFAULT_TOL {
                    return Err(Error::invalid(format!("U must be positive semidefinite (λ_min = {u_lo:e})")));
                }
                let g_max = gammas.iter().copied().fold(0.0, f64::max);
                let g_min = gammas.iter().copied().fold(f64::INFINITY, f64::min);
                (1.0 - g_max * u_hi, 1.0 - g_min * u_lo.max(0.0))
            }
        };
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!(
                "metric family is not uniformly positive definite (lower bound {alpha:e})"
            )));
        }
        Ok((alpha, mu))
    }
}

fn check_decay(c: f64, q: f64) -> Result<()> {
    if !(c.is_finite() && c >= 0.0 && (0.0..1.0).contains(&q)) {
        return Err(Error::invalid(format!("decay family needs c >= 0 and 0 <= q < 1, got c={c}, q={q}")));
    }
    Ok(())
}

/// A metric family with its summable tolerances and uniform bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct MetricSchedule {
    rule: MetricRule,
    eta: Summable,
    nu: Option<Summable>,
    alpha: f64,
    mu: f64,
    direction: Direction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSpec {
    rule: MetricRule,
    #[serde(default)]
    eta: Summable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<Summable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    direction: Direction,
}

impl TryFrom<ScheduleSpec> for MetricSchedule {
    type Error = Error;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        let mut s = MetricSchedule::new(spec.rule, spec.eta, spec.nu, spec.direction)?;
        if let Some(alpha) = spec.alpha {
            if !(alpha > 0.0) {
                return Err(Error::invalid(format!("declared alpha must be positive, got {alpha}")));
            }
            s.alpha = alpha;
        }
        if let Some(mu) = spec.mu {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid(format!("declared mu must be positive, got {mu}")));
            }
            s.mu = mu;
        }
        Ok(s)
    }
}

impl From<MetricSchedule> for ScheduleSpec {
    fn from(s: MetricSchedule) -> Self {
        ScheduleSpec {
            rule: s.rule,
            eta: s.eta,
            nu: s.nu,
            alpha: Some(s.alpha),
            mu: Some(s.mu),
            direction: s.direction,
        }
    }
}

impl MetricSchedule {
    /// Builds a schedule with `alpha` and `mu` certified from the family's closed form.
    pub fn new(rule: MetricRule, eta: Summable, nu: Option<Summable>, direction: Direction) -> Result<Self> {
        eta.validate()?;
        if let Some(nu) = &nu {
            nu.validate()?;
        }
        let (alpha, mu) = rule.certified_bounds()?;
        Ok(Self { rule, eta, nu, alpha, mu, direction })
    }

    pub fn constant(w: &MetricOperator) -> Self {
        Self {
            rule: MetricRule::Constant { matrix: w.matrix().clone() },
            eta: Summable::zero(),
            nu: None,
            alpha: w.alpha(),
            mu: w.norm(),
            direction: Direction::Both,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(&MetricOperator::identity(dim))
    }

    /// Overrides the certified bounds with declared ones (checked later by
    /// [`schedule_validate`] and at each metric construction).
    pub fn with_bounds(mut self, alpha: f64, mu: f64) -> Self {
        self.alpha = alpha;
        self.mu = mu;
        self
    }

    pub fn dim(&self) -> usize {
        self.rule.dim()
    }

    pub fn rule(&self) -> &MetricRule {
        &self.rule
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn eta_sequence(&self) -> &Summable {
        &self.eta
    }

    pub fn eta(&self, n: usize) -> f64 {
        self.eta.term(n)
    }

    /// `ν_n`; falls back to `η_n` when no separate sequence was given.
    pub fn nu(&self, n: usize) -> f64 {
        self.nu.as_ref().unwrap_or(&self.eta).term(n)
    }

    pub fn matrix(&self, n: usize) -> Matrix {
        self.rule.matrix(n)
    }

    pub fn metric(&self, n: usize) -> Result<MetricOperator> {
        MetricOperator::new(self.rule.matrix(n), self.alpha)
    }

    pub fn is_constant(&self) -> bool {
        match &self.rule {
            MetricRule::Constant { .. } => true,
            MetricRule::ScaledDecay { c, .. } | MetricRule::RankOneDecay { c, .. } => *c == 0.0,
            MetricRule::List { matrices } => matrices.len() == 1,
            MetricRule::ShiftedIdentity { gammas, .. } => gammas.len() == 1,
        }
    }
}

/// Reuses the previous metric when the family produces a bit-identical matrix.
#[derive(Debug, Default)]
pub(crate) struct MetricCache {
    last: Option<MetricOperator>,
}

impl MetricCache {
    pub(crate) fn get(&mut self, s: &MetricSchedule, n: usize) -> Result<MetricOperator> {
        let m = s.matrix(n);
        if let Some(w) = &self.last {
            if w.matrix() == &m {
                return Ok(w.clone());
            }
        }
        let w = MetricOperator::new(m, s.alpha())?;
        self.last = Some(w.clone());
        Ok(w)
    }
}

/// Outcome of [`schedule_validate`]; violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCertificate {
    pub checked: usize,
    pub direction: Direction,
    /// `λ_min((1+η_n)W_n − W_{n+1})` for `n < checked − 1` (empty if not checked).
    pub decreasing_slacks: Vec<f64>,
    /// `λ_min((1+ν_n)W_{n+1} − W_n)` for `n < checked − 1` (empty if not checked).
    pub increasing_slacks: Vec<f64>,
    pub decreasing_violations: Vec<usize>,
    pub increasing_violations: Vec<usize>,
    /// Indices with `‖W_n‖ > mu + tol`.
    pub norm_violations: Vec<usize>,
    /// Indices with `λ_min(W_n) < alpha − tol`.
    pub alpha_violations: Vec<usize>,
    pub max_norm: f64,
    pub min_eigenvalue: f64,
    pub tol: f64,
    pub valid: bool,
}

/// Checks the declared Loewner direction and the uniform bounds on `W_0..W_{N−1}`.
pub fn schedule_validate(s: &MetricSchedule, n_checked: usize, tol: f64) -> Result<ScheduleCertificate> {
    if n_checked < 2 {
        return Err(Error::precondition(format!("schedule validation needs N >= 2, got {n_checked}")));
    }
    let check_dec = matches!(s.direction, Direction::Decreasing | Direction::Both);
    let check_inc = matches!(s.direction, Direction::Increasing | Direction::Both);
    let mats: Vec<Matrix> = (0..n_checked).map(|n| s.matrix(n)).collect();

    let mut cert = ScheduleCertificate {
        checked: n_checked,
        direction: s.direction,
        decreasing_slacks: Vec::new(),
        increasing_slacks: Vec::new(),
        decreasing_violations: Vec::new(),
        increasing_violations: Vec::new(),
        norm_violations: Vec::new(),
        alpha_violations: Vec::new(),
        max_norm: 0.0,
        min_eigenvalue: f64::INFINITY,
        tol,
        valid: true,
    };
    for (n, m) in mats.iter().enumerate() {
        check_symmetric(m, "scheduled metric")?;
        let (lo, hi) = eigen_bounds(m);
        cert.max_norm = cert.max_norm.max(hi);
        cert.min_eigenvalue = cert.min_eigenvalue.min(lo);
        if hi > s.mu + tol {
            cert.norm_violations.push(n);
        }
        if lo < s.alpha - tol {
            cert.alpha_violations.push(n);
        }
    }
    for n in 0..n_checked - 1 {
        if check_dec {
            let slack = eigen_bounds(&(&mats[n] * (1.0 + s.eta(n)) - &mats[n + 1])).0;
            cert.decreasing_slacks.push(slack);
            if slack < -tol {
                cert.decreasing_violations.push(n);
            }
        }
        if check_inc {
            let slack = eigen_bounds(&(&mats[n + 1] * (1.0 + s.nu(n)) - &mats[n])).0;
            cert.increasing_slacks.push(slack);
            if slack < -tol {
                cert.increasing_violations.push(n);
            }
        }
    }
    cert.valid = cert.decreasing_violations.is_empty()
        && cert.increasing_violations.is_empty()
        && cert.norm_violations.is_empty()
        && cert.alpha_violations.is_empty();
    Ok(cert)
}

/// Empirical pointwise limit of `W_n x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleLimit {
    pub converged: bool,
    /// The index `N` at which the Cauchy probes first passed (or `N_max`).
    pub index: usize,
    #[serde(with = "serde_util::vector")]
    pub value: Vector,
    /// `‖W_{n+1}x − W_n x‖` for every examined `n`.
    pub decrements: Vec<f64>,
}

/// Probe lags used by the Cauchy test in [`schedule_limit`].
pub const PROBE_LAGS: [usize; 4] = [1, 2, 4, 8];

/// Finds the smallest `N ≤ N_max` with `‖W_N x − W_{N+k} x‖ ≤ tol` for every
/// probe lag `k`, and returns `W_N x`.
pub fn schedule_limit(s: &MetricSchedule, x: &Vector, tol: f64, n_max: usize) -> Result<ScheduleLimit> {
    check_dim(s.dim(), x.len())?;
    let max_lag = PROBE_LAGS[PROBE_LAGS.len() - 1];
    let mut values: Vec<Vector> = Vec::with_capacity(n_max + max_lag + 1);
    let value_at = |k: usize, values: &mut Vec<Vector>| {
        while values.len() <= k {
            let idx = values.len();
            values.push(s.matrix(idx) * x);
        }
    };
    let mut decrements = Vec::new();
    for n in 0..=n_max {
        value_at(n + max_lag, &mut values);
        decrements.push((&values[n + 1] - &values[n]).norm());
        let worst = PROBE_LAGS
            .iter()
            .map(|k| (&values[n + k] - &values[n]).norm())
            .fold(0.0, f64::max);
        if worst <= tol {
            return Ok(ScheduleLimit { converged: true, index: n, value: values[n].clone(), decrements });
        }
    }
    Ok(ScheduleLimit { converged: false, index: n_max, value: values[n_max].clone(), decrements })
}
