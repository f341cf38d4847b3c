//! Projectable convex sets with Euclidean and metric projections.

use crate::error::{check_dim, Error, Result};
use crate::metric_ops::MetricOperator;
use crate::serde_util;
use crate::{Matrix, Vector};
use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

/// Sweep cap and tolerance of the box projection under a non-scalar metric.
pub const BOX_MAX_SWEEPS: usize = 10_000;
pub const BOX_TOL: f64 = 1e-10;

/// Sweep cap of the intersection oracle.
pub const DYKSTRA_MAX_SWEEPS: usize = 200_000;

/// A nonempty closed convex subset of ℝⁿ with a computable projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub enum ConvexSet {
    /// `{x : ⟨x, u⟩ ≤ eta}`.
    HalfSpace { u: Vector, eta: f64 },
    /// `{x : ⟨x, u⟩ = eta}`.
    Hyperplane { u: Vector, eta: f64 },
    /// `{x : lo ≤ x ≤ hi}`.
    Box { lo: Vector, hi: Vector },
    /// `{x : ‖x − center‖ ≤ radius}`.
    Ball { center: Vector, radius: f64 },
    /// `{x : A x = b}` with `A` of full row rank.
    Affine { a: Matrix, b: Vector },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SetSpec {
    HalfSpace {
        #[serde(with = "serde_util::vector")]
        u: Vector,
        eta: f64,
    },
    Hyperplane {
        #[serde(with = "serde_util::vector")]
        u: Vector,
        eta: f64,
    },
    Box {
        #[serde(with = "serde_util::vector")]
        lo: Vector,
        #[serde(with = "serde_util::vector")]
        hi: Vector,
    },
    Ball {
        #[serde(with = "serde_util::vector")]
        center: Vector,
        radius: f64,
    },
    AffineSubspace {
        #[serde(with = "serde_util::matrix")]
        a: Matrix,
        #[serde(with = "serde_util::vector")]
        b: Vector,
    },
}

impl TryFrom<SetSpec> for ConvexSet {
    type Error = Error;

    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::HalfSpace { u, eta } => ConvexSet::half_space(u, eta),
            SetSpec::Hyperplane { u, eta } => ConvexSet::hyperplane(u, eta),
            SetSpec::Box { lo, hi } => ConvexSet::boxed(lo, hi),
            SetSpec::Ball { center, radius } => ConvexSet::ball(center, radius),
            SetSpec::AffineSubspace { a, b } => ConvexSet::affine(a, b),
        }
    }
}

impl From<ConvexSet> for SetSpec {
    fn from(c: ConvexSet) -> Self {
        match c {
            ConvexSet::HalfSpace { u, eta } => SetSpec::HalfSpace { u, eta },
            ConvexSet::Hyperplane { u, eta } => SetSpec::Hyperplane { u, eta },
            ConvexSet::Box { lo, hi } => SetSpec::Box { lo, hi },
            ConvexSet::Ball { center, radius } => SetSpec::Ball { center, radius },
            ConvexSet::Affine { a, b } => SetSpec::AffineSubspace { a, b },
        }
    }
}

fn check_finite(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} must be non-empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn check_normal(u: &Vector, eta: f64) -> Result<()> {
    check_finite(u, "normal vector")?;
    if u.norm() == 0.0 {
        return Err(Error::invalid("normal vector must be nonzero"));
    }
    if !eta.is_finite() {
        return Err(Error::invalid("offset must be finite"));
    }
    Ok(())
}

impl ConvexSet {
    pub fn half_space(u: Vector, eta: f64) -> Result<Self> {
        check_normal(&u, eta)?;
        Ok(ConvexSet::HalfSpace { u, eta })
    }

    pub fn hyperplane(u: Vector, eta: f64) -> Result<Self> {
        check_normal(&u, eta)?;
        Ok(ConvexSet::Hyperplane { u, eta })
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        check_finite(&lo, "lower bound")?;
        check_finite(&hi, "upper bound")?;
        check_dim(lo.len(), hi.len())?;
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::invalid(format!("box bound {i}: lo {} > hi {}", lo[i], hi[i])));
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        check_finite(&center, "ball center")?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn affine(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("affine constraint matrix must be non-empty and finite"));
        }
        check_finite(&b, "affine right-hand side")?;
        check_dim(a.nrows(), b.len())?;
        if a.nrows() > a.ncols() {
            return Err(Error::invalid("affine constraint matrix has more rows than columns"));
        }
        let sv = a.clone().svd(false, false).singular_values;
        let (lo, hi) = (sv.min(), sv.max());
        if lo <= 1e-12 * hi {
            return Err(Error::invalid(format!("affine constraint matrix is rank deficient (σ_min = {lo:e})")));
        }
        Ok(ConvexSet::Affine { a, b })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::HalfSpace { u, .. } | ConvexSet::Hyperplane { u, .. } => u.len(),
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Affine { a, .. } => a.ncols(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConvexSet::HalfSpace { .. } => "half_space",
            ConvexSet::Hyperplane { .. } => "hyperplane",
            ConvexSet::Box { .. } => "box",
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Affine { .. } => "affine_subspace",
        }
    }

    /// Membership up to an absolute constraint violation of `tol`.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::HalfSpace { u, eta } => x.dot(u) <= eta + tol,
            ConvexSet::Hyperplane { u, eta } => (x.dot(u) - eta).abs() <= tol,
            ConvexSet::Box { lo, hi } => (0..x.len()).all(|i| x[i] >= lo[i] - tol && x[i] <= hi[i] + tol),
            ConvexSet::Ball { center, radius } => (x - center).norm() <= radius + tol,
            ConvexSet::Affine { a, b } => (a * x - b).amax() <= tol,
        }
    }
}

/// Euclidean projection `P_C x`.
pub fn project_euclid(c: &ConvexSet, x: &Vector) -> Result<Vector> {
    check_dim(c.dim(), x.len())?;
    Ok(match c {
        ConvexSet::HalfSpace { u, eta } => {
            let s = x.dot(u);
            if s > *eta {
                x - u * ((s - eta) / u.norm_squared())
            } else {
                x.clone()
            }
        }
        ConvexSet::Hyperplane { u, eta } => {
            let s = x.dot(u);
            if s == *eta {
                x.clone()
            } else {
                x - u * ((s - eta) / u.norm_squared())
            }
        }
        ConvexSet::Box { lo, hi } => Vector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i])),
        ConvexSet::Ball { center, radius } => {
            let d = x - center;
            let nd = d.norm();
            if nd <= *radius {
                x.clone()
            } else {
                center + d * (radius / nd)
            }
        }
        ConvexSet::Affine { a, b } => {
            let gram = a * a.transpose();
            let y = spd_solve(&gram, &(a * x - b))?;
            x - a.transpose() * y
        }
    })
}

fn spd_solve(m: &Matrix, rhs: &Vector) -> Result<Vector> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok(ch.solve(rhs));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::numeric("singular Gram matrix in affine projection", f64::INFINITY))
}

/// Metric projection `P_C^W x = argmin_{y∈C} ‖x − y‖_W`.
pub fn project_metric(c: &ConvexSet, w: &MetricOperator, x: &Vector) -> Result<Vector> {
    check_dim(c.dim(), x.len())?;
    check_dim(w.dim(), x.len())?;
    match c {
        ConvexSet::HalfSpace { u, eta } => {
            let s = x.dot(u);
            if s > *eta {
                Ok(halfspace_step(u, *eta, s, w, x))
            } else {
                Ok(x.clone())
            }
        }
        ConvexSet::Hyperplane { u, eta } => {
            let s = x.dot(u);
            if s == *eta {
                Ok(x.clone())
            } else {
                Ok(halfspace_step(u, *eta, s, w, x))
            }
        }
        ConvexSet::Affine { a, b } => {
            let wi_at = w.solve_matrix(&a.transpose());
            let gram = a * &wi_at;
            let y = spd_solve(&gram, &(a * x - b))?;
            Ok(x - wi_at * y)
        }
        ConvexSet::Box { .. } | ConvexSet::Ball { .. } if w.scalar().is_some() => project_euclid(c, x),
        ConvexSet::Box { lo, hi } => project_box_metric(lo, hi, w, x),
        ConvexSet::Ball { center, radius } => project_ball_metric(center, *radius, w, x),
    }
}

/// `x + ((η − s)/⟨u, W⁻¹u⟩) W⁻¹u` with `s = ⟨x, u⟩`.
pub(crate) fn halfspace_step(u: &Vector, eta: f64, s: f64, w: &MetricOperator, x: &Vector) -> Vector {
    let wiu = w.solve(u);
    let denom = u.dot(&wiu);
    x + wiu * ((eta - s) / denom)
}

/// Ball under a general metric: the KKT point `y − c = (W + tI)⁻¹ W (x − c)` with
/// `t > 0` chosen so that `‖y − c‖ = r`, found by safeguarded Newton on
/// `1/‖y(t) − c‖ − 1/r` in the eigenbasis of `W`.
fn project_ball_metric(center: &Vector, radius: f64, w: &MetricOperator, x: &Vector) -> Result<Vector> {
    let d = x - center;
    if d.norm() <= radius {
        return Ok(x.clone());
    }
    let eig = nalgebra::SymmetricEigen::new(w.matrix().clone());
    let lam = &eig.eigenvalues;
    let e = eig.eigenvectors.transpose() * &d;
    let radius_at = |t: f64| -> (f64, f64) {
        // ‖y(t) − c‖ and its derivative in t
        let mut g = 0.0;
        let mut dg = 0.0;
        for i in 0..lam.len() {
            let k = lam[i] * e[i] / (lam[i] + t);
            g += k * k;
            dg += -2.0 * k * k / (lam[i] + t);
        }
        let r = g.sqrt();
        (r, dg / (2.0 * r))
    };
    let mut lo = 0.0_f64;
    let mut hi = lam.max() * d.norm() / radius;
    let mut t = 0.5 * hi;
    let mut achieved = f64::INFINITY;
    for _ in 0..200 {
        let (r, dr) = radius_at(t);
        achieved = (r - radius).abs();
        if achieved <= 1e-15 * radius.max(1.0) {
            break;
        }
        if r > radius {
            lo = t;
        } else {
            hi = t;
        }
        // Newton on 1/r(t) − 1/radius, which is close to linear in t
        let f = 1.0 / r - 1.0 / radius;
        let df = -dr / (r * r);
        let mut next = t - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-17 * t.max(1.0) {
            break;
        }
        t = next;
    }
    let (r, _) = radius_at(t);
    achieved = achieved.min((r - radius).abs());
    if achieved > 1e-10 * radius.max(1.0) {
        return Err(Error::numeric("metric ball projection did not converge", achieved));
    }
    let scaled = Vector::from_fn(lam.len(), |i, _| lam[i] * e[i] / (lam[i] + t));
    let mut y = &eig.eigenvectors * scaled;
    let ny = y.norm();
    if ny > radius {
        y *= radius / ny;
    }
    Ok(center + y)
}

/// Box under a general metric: projected Gauss-Seidel on the box-constrained
/// quadratic, followed by an exact solve on the detected active set.
fn project_box_metric(lo: &Vector, hi: &Vector, w: &MetricOperator, x: &Vector) -> Result<Vector> {
    if (0..x.len()).all(|i| x[i] >= lo[i] && x[i] <= hi[i]) {
        return Ok(x.clone());
    }
    let wm = w.matrix();
    let n = x.len();
    let mut p = Vector::from_fn(n, |i, _| x[i].clamp(lo[i], hi[i]));
    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < BOX_MAX_SWEEPS {
        sweeps += 1;
        change = 0.0;
        for i in 0..n {
            let mut g = 0.0;
            for j in 0..n {
                if j != i {
                    g += wm[(i, j)] * (p[j] - x[j]);
                }
            }
            let next = (x[i] - g / wm[(i, i)]).clamp(lo[i], hi[i]);
            change = change.max((next - p[i]).abs());
            p[i] = next;
        }
        if change <= BOX_TOL {
            break;
        }
    }
    if let Some(polished) = polish_box(lo, hi, w, x, &p) {
        return Ok(polished);
    }
    if change > BOX_TOL {
        return Err(Error::numeric("metric box projection hit the sweep cap", change));
    }
    Ok(p)
}

fn polish_box(lo: &Vector, hi: &Vector, w: &MetricOperator, x: &Vector, p: &Vector) -> Option<Vector> {
    let n = x.len();
    let wm = w.matrix();
    let mut fixed: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if p[i] == lo[i] {
                Some(lo[i])
            } else if p[i] == hi[i] {
                Some(hi[i])
            } else {
                None
            }
        })
        .collect();
    for _ in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut q = x.clone();
        for i in 0..n {
            if let Some(v) = fixed[i] {
                q[i] = v;
            }
        }
        if !free.is_empty() {
            // W_FF (q_F − x_F) = −W_FA (q_A − x_A)
            let wff = Matrix::from_fn(free.len(), free.len(), |a, b| wm[(free[a], free[b])]);
            let rhs = Vector::from_fn(free.len(), |a, _| {
                -(0..n).filter(|j| fixed[*j].is_some()).map(|j| wm[(free[a], j)] * (q[j] - x[j])).sum::<f64>()
            });
            let delta = Cholesky::new(wff)?.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                q[i] = x[i] + delta[a];
            }
        }
        let grad = wm * (&q - x);
        let mut changed = false;
        for i in 0..n {
            match fixed[i] {
                None if q[i] < lo[i] => {
                    fixed[i] = Some(lo[i]);
                    changed = true;
                }
                None if q[i] > hi[i] => {
                    fixed[i] = Some(hi[i]);
                    changed = true;
                }
                Some(v) if v == lo[i] && v != hi[i] && grad[i] < -1e-12 => {
                    fixed[i] = None;
                    changed = true;
                }
                Some(v) if v == hi[i] && v != lo[i] && grad[i] > 1e-12 => {
                    fixed[i] = None;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Some(q);
        }
    }
    None
}

/// `d_C(x)`, Euclidean or in `‖·‖_W`.
pub fn distance(c: &ConvexSet, x: &Vector, w: Option<&MetricOperator>) -> Result<f64> {
    match w {
        None => Ok((x - project_euclid(c, x)?).norm()),
        Some(w) => Ok(w.norm_of(&(x - project_metric(c, w, x)?))),
    }
}

/// Dykstra's algorithm for the projection onto `∩ C_i`, Euclidean or under `W`.
///
/// This is a diagnostic oracle: it stops when a full sweep moves the point by
/// at most `tol` and every set is within `tol`.
pub fn intersection_project(sets: &[ConvexSet], x: &Vector, w: Option<&MetricOperator>, tol: f64) -> Result<Vector> {
    let first = sets.first().ok_or_else(|| Error::invalid("intersection of zero sets"))?;
    for c in sets {
        check_dim(first.dim(), c.dim())?;
    }
    let proj = |c: &ConvexSet, v: &Vector| match w {
        None => project_euclid(c, v),
        Some(w) => project_metric(c, w, v),
    };
    if sets.len() == 1 {
        return proj(first, x);
    }
    let mut y = x.clone();
    let mut incr: Vec<Vector> = vec![Vector::zeros(x.len()); sets.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let prev = y.clone();
        for (c, p) in sets.iter().zip(incr.iter_mut()) {
            let shifted = &y + &*p;
            let z = proj(c, &shifted)?;
            *p = shifted - &z;
            y = z;
        }
        let moved = (&y - &prev).norm();
        let worst = sets.iter().map(|c| distance(c, &y, None)).collect::<Result<Vec<_>>>()?;
        residual = moved.max(worst.into_iter().fold(0.0, f64::max));
        if residual <= tol {
            return Ok(y);
        }
    }
    Err(Error::numeric("intersection oracle hit the sweep cap", residual))
}

/// `d_{∩C_i}(x)` via [`intersection_project`].
pub fn intersection_distance(sets: &[ConvexSet], x: &Vector, tol: f64) -> Result<f64> {
    Ok((x - intersection_project(sets, x, None, tol)?).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn gauss(n: usize, rng: &mut ChaCha8Rng) -> Vector {
        Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    fn random_metric(n: usize, rng: &mut ChaCha8Rng) -> MetricOperator {
        let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        MetricOperator::from_matrix(&g * g.transpose() + Matrix::identity(n, n) * 0.2).unwrap()
    }

    /// Brute-force oracle: minimize ‖x − y‖_W² over a grid refinement in 2D.
    fn grid_oracle(c: &ConvexSet, w: &MetricOperator, x: &Vector) -> Vector {
        let mut best = x.clone();
        let mut best_val = f64::INFINITY;
        let mut center = x.clone();
        let mut span = 8.0;
        for _ in 0..40 {
            for i in -20..=20 {
                for j in -20..=20 {
                    let y = &center + dvector![i as f64, j as f64] * (span / 20.0);
                    if c.contains(&y, 0.0) {
                        let v = w.norm_of(&(x - &y));
                        if v < best_val {
                            best_val = v;
                            best = y;
                        }
                    }
                }
            }
            center = best.clone();
            span *= 0.25;
        }
        best
    }

    /// Minimizes `‖x − y‖_W` over the unit circle by refined angle scans.
    fn circle_oracle(w: &MetricOperator, x: &Vector) -> Vector {
        let at = |t: f64| dvector![t.cos(), t.sin()];
        let mut best = 0.0;
        let mut span = std::f64::consts::PI;
        for _ in 0..60 {
            let center = best;
            let mut best_val = f64::INFINITY;
            for k in -200..=200 {
                let t = center + span * k as f64 / 200.0;
                let v = w.norm_of(&(x - at(t)));
                if v < best_val {
                    best_val = v;
                    best = t;
                }
            }
            span *= 0.1;
        }
        at(best)
    }

    #[test]
    fn euclidean_examples() {
        let h = ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap();
        assert_eq!(project_euclid(&h, &dvector![2.0, 0.0]).unwrap(), dvector![1.0, 0.0]);
        let b = ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap();
        let p = project_euclid(&b, &dvector![3.0, 4.0]).unwrap();
        assert!((p - dvector![0.6, 0.8]).norm() < 1e-15);
        let bx = ConvexSet::boxed(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        assert_eq!(project_euclid(&bx, &dvector![-1.0, 0.5]).unwrap(), dvector![0.0, 0.5]);
    }

    #[test]
    fn metric_halfspace_example() {
        let h = ConvexSet::half_space(dvector![1.0, 1.0], 0.0).unwrap();
        let w = MetricOperator::from_matrix(Matrix::from_diagonal(&dvector![1.0, 4.0])).unwrap();
        let p = project_metric(&h, &w, &dvector![1.0, 1.0]).unwrap();
        assert!((&p - dvector![-0.6, 0.6]).norm() < 1e-15);
        let oracle = grid_oracle(&h, &w, &dvector![1.0, 1.0]);
        assert!((&p - oracle).norm() < 1e-6);
        let d = distance(&h, &dvector![1.0, 1.0], Some(&w)).unwrap();
        assert!((d - 3.2f64.sqrt()).abs() < 1e-14);
        assert_eq!(distance(&h, &dvector![3.0, -4.0], Some(&w)).unwrap(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let h = ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap();
        assert_eq!(distance(&h, &dvector![3.0, 0.0], None).unwrap(), 2.0);
        assert_eq!(distance(&h, &dvector![0.0, 7.0], None).unwrap(), 0.0);
    }

    #[test]
    fn feasible_points_are_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_metric(3, &mut rng);
        let sets = [
            ConvexSet::half_space(dvector![1.0, 2.0, 3.0], 1.0).unwrap(),
            ConvexSet::hyperplane(dvector![1.0, 0.0, 0.0], 0.25).unwrap(),
            ConvexSet::boxed(dvector![0.0, 0.0, 0.0], dvector![1.0, 1.0, 1.0]).unwrap(),
            ConvexSet::ball(dvector![0.2, 0.1, 0.0], 1.0).unwrap(),
            ConvexSet::affine(dmatrix![1.0, 1.0, 0.0], dvector![0.35]).unwrap(),
        ];
        let x = dvector![0.25, 0.1, 0.05];
        for c in &sets {
            assert!(c.contains(&x, 1e-15), "{c:?}");
            assert_eq!(project_metric(c, &w, &x).unwrap(), x, "{c:?}");
        }
    }

    #[test]
    fn ball_and_box_metric_match_grid_oracle() {
        let w = MetricOperator::from_matrix(dmatrix![2.0, 0.7; 0.7, 1.0]).unwrap();
        let x = dvector![2.0, -1.5];
        let ball = ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap();
        let p = project_metric(&ball, &w, &x).unwrap();
        assert!((&p - circle_oracle(&w, &x)).norm() < 1e-6);
        let bx = ConvexSet::boxed(dvector![-0.5, -0.5], dvector![0.5, 0.5]).unwrap();
        let p = project_metric(&bx, &w, &x).unwrap();
        assert!((&p - grid_oracle(&bx, &w, &x)).norm() < 1e-6);
    }

    #[test]
    fn variational_inequality_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let unit = Uniform::new(-1.0, 1.0).unwrap();
        for _ in 0..10 {
            let n = 4;
            let w = random_metric(n, &mut rng);
            let sets = [
                ConvexSet::half_space(gauss(n, &mut rng), 0.3).unwrap(),
                ConvexSet::hyperplane(gauss(n, &mut rng), -0.2).unwrap(),
                ConvexSet::boxed(Vector::from_element(n, -0.5), Vector::from_element(n, 0.7)).unwrap(),
                ConvexSet::ball(gauss(n, &mut rng) * 0.1, 0.8).unwrap(),
                ConvexSet::affine(Matrix::from_fn(2, n, |_, _| StandardNormal.sample(&mut rng)), gauss(2, &mut rng))
                    .unwrap(),
            ];
            for c in &sets {
                let x = gauss(n, &mut rng) * 3.0;
                let p = project_metric(c, &w, &x).unwrap();
                assert!(c.contains(&p, 1e-9), "{c:?}");
                for _ in 0..50 {
                    let z0 = Vector::from_fn(n, |_, _| unit.sample(&mut rng) * 2.0);
                    let z = project_euclid(c, &z0).unwrap();
                    let vi = w.inner(&(&x - &p), &(&z - &p));
                    assert!(vi <= 1e-8, "{c:?}: {vi}");
                }
            }
        }
    }

    #[test]
    fn dykstra_examples() {
        let sets = [
            ConvexSet::half_space(dvector![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::half_space(dvector![0.0, 1.0], 0.0).unwrap(),
        ];
        let d = intersection_distance(&sets, &dvector![1.0, 1.0], 1e-12).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        let single = &sets[..1];
        let d = intersection_distance(single, &dvector![3.0, 1.0], 1e-12).unwrap();
        assert!((d - distance(&sets[0], &dvector![3.0, 1.0], None).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn rejects_invalid_sets() {
        assert!(ConvexSet::half_space(dvector![0.0, 0.0], 1.0).is_err());
        assert!(ConvexSet::boxed(dvector![1.0], dvector![0.0]).is_err());
        assert!(ConvexSet::ball(dvector![0.0], 0.0).is_err());
        assert!(ConvexSet::affine(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![0.0, 0.0]).is_err());
        let h = ConvexSet::half_space(dvector![1.0, 0.0], 1.0).unwrap();
        assert!(matches!(project_euclid(&h, &dvector![1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn serde_uses_kind_tag() {
        let c: ConvexSet = serde_json::from_str(r#"{"kind":"half_space","u":[1.0,0.0],"eta":2.0}"#).unwrap();
        assert_eq!(c, ConvexSet::half_space(dvector![1.0, 0.0], 2.0).unwrap());
        let text = serde_json::to_string(&ConvexSet::affine(dmatrix![1.0, 2.0], dvector![3.0]).unwrap()).unwrap();
        assert!(text.contains("\"kind\":\"affine_subspace\""));
        assert!(serde_json::from_str::<ConvexSet>(r#"{"kind":"half_space","u":[0.0],"eta":2.0}"#).is_err());
        assert!(serde_json::from_str::<ConvexSet>(r#"{"kind":"ball","center":[0.0],"radius":1,"x":2}"#).is_err());
    }
}
