//! Seeded synthetic problems with known solutions.

use crate::convex_sets::ConvexSet;
use crate::error::{Error, Result};
use crate::metric_ops::{Direction, MetricRule, MetricSchedule, Summable};
use crate::operator_class::ProxFunction;
use crate::problem::{ProblemFile, ProblemKind, SCHEMA_VERSION};
use crate::solvers::{DataTerm, InverseProblem, ParamSchedule, RunConfig};
use crate::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateKind {
    /// Half-spaces around a planted interior point.
    Polyhedron,
    /// `ℓ1`-regularized least squares with data `r = L x★ + noise`.
    InverseProblem,
}

/// Standard deviation of the noise added to generated data.
pub const NOISE_LEVEL: f64 = 1e-2;

fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `m = min(5, dim)` half-spaces `⟨x, u_i⟩ ≤ ⟨p, u_i⟩ + δ_i` with unit normals
/// and margins `δ_i ∈ [0.5, 1.5]`, so the planted `p` is an interior point.
pub fn polyhedron(dim: usize, seed: u64) -> Result<ProblemFile> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = gaussian_vector(dim, &mut rng);
    let m = dim.min(5);
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let u = loop {
            let g = gaussian_vector(dim, &mut rng);
            if g.norm() > 1e-3 {
                break g.normalize();
            }
        };
        let margin = rng.random_range(0.5..1.5);
        let eta = u.dot(&planted) + margin;
        sets.push(ConvexSet::half_space(u, eta)?);
    }
    let x0 = &planted + gaussian_vector(dim, &mut rng) * 5.0;
    let schedule = MetricSchedule::new(
        MetricRule::ScaledDecay { base: Matrix::identity(dim, dim), c: 1.0, q: 0.5 },
        Summable::Geometric { c: 1.0, q: 0.5 },
        None,
        Direction::Both,
    )?;
    let mut config = RunConfig::new(x0).with_max_iter(10_000);
    config.lambda = ParamSchedule::Constant(1.5);
    Ok(ProblemFile {
        schema: SCHEMA_VERSION,
        kind: ProblemKind::Feasibility,
        seed: Some(seed),
        sets: Some(sets),
        control: None,
        inequalities: None,
        operator: None,
        inverse_problem: None,
        step_eta: None,
        regime: None,
        schedule: Some(schedule),
        config,
        targets: vec![planted.clone()],
        planted: Some(planted),
        noise: None,
    })
}

/// `L` is `⌈dim/2⌉ × dim` Gaussian, `x★` has `⌈dim/4⌉` nonzeros, and `r = L x★ + noise`.
pub fn inverse_problem(dim: usize, seed: u64) -> Result<ProblemFile> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = dim.div_ceil(2);
    let l = Matrix::from_fn(m, dim, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g / (m as f64).sqrt()
    });
    let mut planted = Vector::zeros(dim);
    for _ in 0..dim.div_ceil(4) {
        let k = rng.random_range(0..dim);
        planted[k] = StandardNormal.sample(&mut rng);
    }
    let noise = gaussian_vector(m, &mut rng) * NOISE_LEVEL;
    let r = &l * &planted + &noise;
    let p = InverseProblem::new(ProxFunction::L1 { weight: 0.05 }, vec![DataTerm { l, r, mu: 1.0 }])?;
    let s = p.s_bar();
    let epsilon = (0.5 / (1.0 + s)).min(0.05);
    let config = RunConfig::new(Vector::zeros(dim))
        .with_epsilon(epsilon)
        .with_gamma(ParamSchedule::Constant((1.0 - epsilon) / s))
        .with_max_iter(20_000);
    Ok(ProblemFile {
        schema: SCHEMA_VERSION,
        kind: ProblemKind::InverseProblem,
        seed: Some(seed),
        sets: None,
        control: None,
        inequalities: None,
        operator: None,
        inverse_problem: Some(p),
        step_eta: None,
        regime: None,
        schedule: None,
        config,
        targets: Vec::new(),
        planted: Some(planted),
        noise: Some(noise),
    })
}

pub fn generate(kind: GenerateKind, dim: usize, seed: u64) -> Result<ProblemFile> {
    match kind {
        GenerateKind::Polyhedron => polyhedron(dim, seed),
        GenerateKind::InverseProblem => inverse_problem(dim, seed),
    }
}
