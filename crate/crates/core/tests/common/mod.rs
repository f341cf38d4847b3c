//! Independent oracles and instance builders shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// `G Gᵀ / n + floor·I` with a random `n × n` Gaussian `G`.
pub fn random_spd(n: usize, floor: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    let m = &g * g.transpose() / n as f64 + Matrix::identity(n, n) * floor;
    (&m + m.transpose()) * 0.5
}

/// Random PSD of the given rank.
pub fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian_matrix(n, rank, rng);
    let m = &g * g.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian_matrix(n, n, rng).qr().q()
}

pub fn min_eig(m: &Matrix) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min()
}

pub fn max_eig(m: &Matrix) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

/// Euclidean projection onto `{y : ⟨u_i, y⟩ ≤ η_i}` by enumerating active sets.
///
/// Every active set `S` gives the projection onto the affine set `{⟨u_i, y⟩ = η_i, i ∈ S}`;
/// the closest such point that satisfies all inequalities is the projection.
pub fn polyhedron_projection(us: &[Vector], etas: &[f64], x: &Vector) -> Vector {
    let m = us.len();
    assert!(m <= 12, "enumeration oracle is exponential in m");
    let mut best: Option<(f64, Vector)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let y = if active.is_empty() {
            x.clone()
        } else {
            let a = Matrix::from_fn(active.len(), x.len(), |r, c| us[active[r]][c]);
            let rhs = Vector::from_fn(active.len(), |r, _| us[active[r]].dot(x) - etas[active[r]]);
            let gram = &a * a.transpose();
            let Some(lam) = gram.clone().lu().solve(&rhs) else { continue };
            if (&gram * &lam - &rhs).amax() > 1e-10 * (1.0 + rhs.amax()) {
                continue;
            }
            x - a.transpose() * lam
        };
        let feasible = (0..m).all(|i| us[i].dot(&y) <= etas[i] + 1e-11 * (1.0 + etas[i].abs()));
        if feasible {
            let d = (&y - x).norm();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    }
    best.expect("nonempty polyhedron").1
}

/// `argmin_p γ‖p‖₁·w + ½pᵀHp − cᵀp` by enumerating sign patterns and checking optimality.
pub fn l1_quadratic_oracle(h: &Matrix, c: &Vector, weight: f64) -> Vector {
    let n = c.len();
    assert!(n <= 8);
    let total = 3usize.pow(n as u32);
    let mut best: Option<(f64, Vector)> = None;
    for code in 0..total {
        let mut s = vec![0i32; n];
        let mut k = code;
        for si in s.iter_mut() {
            *si = (k % 3) as i32 - 1;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|i| s[*i] != 0).collect();
        let mut p = Vector::zeros(n);
        if !free.is_empty() {
            let hff = Matrix::from_fn(free.len(), free.len(), |r, q| h[(free[r], free[q])]);
            let rhs = Vector::from_fn(free.len(), |r, _| c[free[r]] - weight * s[free[r]] as f64);
            let Some(pf) = hff.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                p[i] = pf[r];
            }
        }
        // sign consistency on the free set and the subgradient bound on the zeros
        if free.iter().any(|&i| p[i] * s[i] as f64 <= 0.0) {
            continue;
        }
        let g = c - h * &p;
        if (0..n).filter(|i| s[*i] == 0).any(|i| g[i].abs() > weight * (1.0 + 1e-12)) {
            continue;
        }
        let val = weight * p.lp_norm(1) + 0.5 * p.dot(&(h * &p)) - c.dot(&p);
        if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
            best = Some((val, p));
        }
    }
    best.expect("strongly convex problem has a minimizer").1
}

pub fn soft(t: f64, k: f64) -> f64 {
    t.signum() * (t.abs() - k).max(0.0)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
