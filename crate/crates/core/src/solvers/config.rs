//! Run configuration: relaxation and step schedules, perturbations, stopping.

use crate::error::{check_dim, Error, Result};
use crate::serde_util;
use crate::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A parameter sequence: one constant, or an explicit list whose last entry repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSchedule {
    Constant(f64),
    List(Vec<f64>),
}

impl ParamSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            ParamSchedule::Constant(v) => *v,
            ParamSchedule::List(v) => v[n.min(v.len() - 1)],
        }
    }

    /// The distinct stored values (the list, or the constant).
    pub fn values(&self) -> &[f64] {
        match self {
            ParamSchedule::Constant(v) => std::slice::from_ref(v),
            ParamSchedule::List(v) => v,
        }
    }

    /// Number of leading indices after which the sequence is constant.
    pub fn prefix_len(&self) -> usize {
        self.values().len()
    }

    /// Checks that every value lies in `[lo, hi]`.
    pub fn check_range(&self, what: &str, lo: f64, hi: f64) -> Result<()> {
        if self.values().is_empty() {
            return Err(Error::invalid(format!("{what} schedule is empty")));
        }
        for (n, v) in self.values().iter().enumerate() {
            if !(v.is_finite() && *v >= lo && *v <= hi) {
                return Err(Error::invalid(format!("{what}[{n}] = {v} lies outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// The perturbation sequence `(a_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorInjection {
    #[default]
    Zero,
    /// `a_n = c·qⁿ·d_n` with `d_n` seeded uniformly random unit directions.
    Geometric { c: f64, q: f64, seed: u64 },
    /// Explicit vectors for `n = 0, 1, …`; zero afterwards.
    Explicit {
        #[serde(with = "serde_util::vectors")]
        vectors: Vec<Vector>,
    },
}

impl ErrorInjection {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ErrorInjection::Zero => Ok(()),
            ErrorInjection::Geometric { c, q, .. } => {
                if c.is_finite() && *c >= 0.0 && (0.0..1.0).contains(q) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("geometric perturbation needs c >= 0 and 0 <= q < 1, got c={c}, q={q}")))
                }
            }
            ErrorInjection::Explicit { vectors } => {
                for v in vectors {
                    check_dim(dim, v.len())?;
                    if v.iter().any(|t| !t.is_finite()) {
                        return Err(Error::invalid("perturbation vectors must be finite"));
                    }
                }
                Ok(())
            }
        }
    }

    /// `Σ‖a_n‖` in closed form.
    pub fn total_norm(&self) -> f64 {
        match self {
            ErrorInjection::Zero => 0.0,
            ErrorInjection::Geometric { c, q, .. } => c / (1.0 - q),
            ErrorInjection::Explicit { vectors } => vectors.iter().map(|v| v.norm()).sum(),
        }
    }

    pub fn stream(&self, dim: usize) -> ErrorStream<'_> {
        let rng = match self {
            ErrorInjection::Geometric { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        ErrorStream { spec: self, dim, n: 0, rng }
    }
}

/// Sequential generator of `a_0, a_1, …`.
pub struct ErrorStream<'a> {
    spec: &'a ErrorInjection,
    dim: usize,
    n: usize,
    rng: Option<ChaCha8Rng>,
}

impl ErrorStream<'_> {
    pub fn next_vector(&mut self) -> Vector {
        let n = self.n;
        self.n += 1;
        match self.spec {
            ErrorInjection::Zero => Vector::zeros(self.dim),
            ErrorInjection::Geometric { c, q, .. } => {
                let rng = self.rng.as_mut().expect("geometric stream owns an rng");
                let mut d = Vector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
                let nrm = d.norm();
                if nrm == 0.0 {
                    d = Vector::zeros(self.dim);
                    d[0] = 1.0;
                } else {
                    d /= nrm;
                }
                d * (c * q.powf(n as f64))
            }
            ErrorInjection::Explicit { vectors } => vectors.get(n).cloned().unwrap_or_else(|| Vector::zeros(self.dim)),
        }
    }
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_lambda() -> ParamSchedule {
    ParamSchedule::Constant(1.0)
}

fn default_max_iter() -> usize {
    100_000
}

fn default_tol() -> Option<f64> {
    Some(1e-10)
}

/// Parameters shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Band parameter `ε ∈ (0, 1)`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Relaxations `λ_n ∈ [ε, 2 − ε]`.
    #[serde(default = "default_lambda")]
    pub lambda: ParamSchedule,
    /// Step sizes `γ_n ≥ ε` for resolvent-based solvers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ParamSchedule>,
    #[serde(default)]
    pub errors: ErrorInjection,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop once consecutive steps `‖x_{n+1} − x_n‖` stay at or below this; `None` runs to `max_iter`.
    #[serde(default = "default_tol")]
    pub tol: Option<f64>,
    #[serde(with = "serde_util::vector")]
    pub x0: Vector,
}

impl RunConfig {
    pub fn new(x0: Vector) -> Self {
        RunConfig {
            epsilon: default_epsilon(),
            lambda: default_lambda(),
            gamma: None,
            errors: ErrorInjection::Zero,
            max_iter: default_max_iter(),
            tol: default_tol(),
            x0,
        }
    }

    pub fn with_lambda(mut self, lambda: ParamSchedule) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_gamma(mut self, gamma: ParamSchedule) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_errors(mut self, errors: ErrorInjection) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: Option<f64>) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Checks the band on `λ_n`, the sign of `γ_n`, perturbations and `x0`.
    pub fn validate(&self, dim: usize, needs_gamma: bool) -> Result<()> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {eps}")));
        }
        self.lambda.check_range("lambda", eps, 2.0 - eps)?;
        match (&self.gamma, needs_gamma) {
            (Some(g), true) => g.check_range("gamma", eps, f64::INFINITY)?,
            (None, true) => return Err(Error::invalid("this solver needs a gamma schedule")),
            _ => {}
        }
        self.errors.validate(dim)?;
        check_dim(dim, self.x0.len())?;
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0 must be finite"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!("tol must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}
