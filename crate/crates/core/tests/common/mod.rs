//! Reference implementations used only by the tests. Each one takes a
//! different computational route from the library code it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_bandit::geometry::ActionSetGeometry;
use sparse_bandit::linalg::{gather, principal_submatrix, Matrix, Vector};
use sparse_bandit::GeometryKind;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn mask_indices(mask: u32, d: usize) -> Vec<usize> {
    (0..d).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Maximises `θᵀx` over the boundary `x = u / ‖u‖` of a 2-d unit ball in a
/// gauge `‖·‖`, sweeping `u = (cos t, sin t)` on a fine grid.
pub fn polar_grid_max(theta: (f64, f64), gauge: impl Fn(f64, f64) -> f64, steps: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 0..steps {
        let t = std::f64::consts::TAU * k as f64 / steps as f64;
        let (c, s) = (t.cos(), t.sin());
        let n = gauge(c, s);
        best = best.max((theta.0 * c + theta.1 * s) / n);
    }
    best
}

/// `‖A_S^{-1/2} θ_S‖₂` through a symmetric eigendecomposition of `A_S`.
pub fn ellipsoid_value_eigen(a: &Matrix, s: &[usize], theta: &Vector) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let sub = principal_submatrix(a, s);
    let ts = gather(theta, s);
    let eig = sub.symmetric_eigen();
    let coords = eig.eigenvectors.transpose() * ts;
    coords
        .iter()
        .zip(eig.eigenvalues.iter())
        .map(|(c, l)| c * c / l)
        .sum::<f64>()
        .sqrt()
}

/// Maximum of `θᵀx` over the vertices of a box restricted to `S`.
pub fn box_vertex_max(lo: &[f64], hi: &[f64], s: &[usize], theta: &Vector) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << s.len()) {
        let val: f64 = s
            .iter()
            .enumerate()
            .map(|(j, &i)| if mask & (1 << j) != 0 { hi[i] * theta[i] } else { lo[i] * theta[i] })
            .sum();
        best = best.max(val);
    }
    if s.is_empty() {
        0.0
    } else {
        best
    }
}

/// Value of a support by a route independent of the library closed forms,
/// where one exists; falls back to the library otherwise.
pub fn reference_value(geom: &ActionSetGeometry, s: &[usize], theta: &Vector) -> f64 {
    match geom.kind() {
        GeometryKind::EuclideanBall => geom.max_norm() * s.iter().map(|&i| theta[i] * theta[i]).sum::<f64>().sqrt(),
        GeometryKind::Ellipsoid => ellipsoid_value_eigen(geom.ellipsoid_matrix().unwrap(), s, theta),
        GeometryKind::L1Ball => geom.max_norm() * s.iter().map(|&i| theta[i].abs()).fold(0.0, f64::max),
        GeometryKind::Hypercube => {
            let (lo, hi) = geom.box_bounds().unwrap();
            box_vertex_max(lo, hi, s, theta)
        }
        GeometryKind::LpBall => {
            let (_, q) = geom.lp_exponents().unwrap();
            geom.max_norm() * s.iter().map(|&i| theta[i].abs().powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

/// Best support of size `≤ H` by bitmask enumeration; ties keep the first
/// mask in numeric order among supports of maximal value.
pub fn bitmask_optimum(geom: &ActionSetGeometry, theta: &Vector, h: usize) -> f64 {
    let d = geom.dim();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << d) {
        if (mask.count_ones() as usize) <= h {
            best = best.max(reference_value(geom, &mask_indices(mask, d), theta));
        }
    }
    best
}

/// Plain greedy: returns the selected indices in order.
pub fn naive_greedy(geom: &ActionSetGeometry, theta: &Vector, h: usize) -> Vec<usize> {
    let d = geom.dim();
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..h {
        let base = {
            let mut s = chosen.clone();
            s.sort();
            geom.value_on_indices(&s, theta).unwrap()
        };
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for cand in 0..d {
            if chosen.contains(&cand) {
                continue;
            }
            let mut s = chosen.clone();
            s.push(cand);
            s.sort();
            let gain = geom.value_on_indices(&s, theta).unwrap() - base;
            if gain > best.1 {
                best = (cand, gain);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

/// Submodularity ratio straight from the definition over all `(S, Ω)` masks.
pub fn naive_ratio(geom: &ActionSetGeometry, theta: &Vector) -> f64 {
    let d = geom.dim();
    let h = |m: u32| geom.value_on_indices(&mask_indices(m, d), theta).unwrap();
    let mut gamma: f64 = 1.0;
    for s in 0u32..(1 << d) {
        for omega in 0u32..(1 << d) {
            let w = omega & !s;
            if w == 0 {
                continue;
            }
            let base = h(s);
            let singles: f64 = mask_indices(w, d).iter().map(|&i| h(s | (1 << i)) - base).sum();
            let joint = h(s | w) - base;
            let ratio = if joint <= 1e-12 { 1.0 } else { (singles / joint).clamp(0.0, 1.0) };
            gamma = gamma.min(ratio);
        }
    }
    gamma
}

/// Uniform direction on the unit sphere.
pub fn random_direction(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    let g = gaussian(d, rng);
    let n = g.norm();
    g / n
}
