//! Action sets and the per-support value function.
//!
//! For a fixed support `S` the value `h(S; θ)` is the largest linear reward
//! `θᵀx` attainable by an action `x ∈ X` whose nonzero coordinates lie in
//! `S`. Every geometry here admits a closed form for both the value and the
//! maximiser, so nothing in this module iterates.

use nalgebra::Cholesky;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Entries of `θ(S)` with Euclidean norm below this are treated as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Slack allowed on the defining inequality of `X` by [`ActionSetGeometry::membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Tolerance used when validating an ellipsoid matrix.
pub const SPD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    EuclideanBall,
    Ellipsoid,
    LpBall,
    L1Ball,
    Hypercube,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::EuclideanBall => "euclidean-ball",
            GeometryKind::Ellipsoid => "ellipsoid",
            GeometryKind::LpBall => "lp-ball",
            GeometryKind::L1Ball => "l1-ball",
            GeometryKind::Hypercube => "hypercube",
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Ball {
        radius: f64,
    },
    Ellipsoid {
        a: Matrix,
        lambda_min: f64,
        lambda_max: f64,
    },
    Lp {
        radius: f64,
        p: f64,
        q: f64,
    },
    L1 {
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

/// A compact convex action set `X ⊂ ℝᵈ` containing the origin.
///
/// Values are immutable once constructed; all queries are pure.
#[derive(Debug, Clone)]
pub struct ActionSetGeometry {
    dim: usize,
    max_norm: f64,
    shape: Shape,
}

impl ActionSetGeometry {
    pub fn euclidean_ball(dim: usize, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        check_radius(radius)?;
        Ok(Self {
            dim,
            max_norm: radius,
            shape: Shape::Ball { radius },
        })
    }

    /// `{x : xᵀAx ≤ 1}` for a symmetric positive-definite `A` with `λ_max(A) ≤ 1`.
    pub fn ellipsoid(a: Matrix) -> Result<Self> {
        let geom = Self::ellipsoid_unscaled(a)?;
        let (_, lambda_max) = geom.ellipsoid_spectrum().expect("ellipsoid");
        if lambda_max > 1.0 + SPD_TOL {
            return Err(Error::InvalidGeometry(format!(
                "ellipsoid matrix has λ_max = {lambda_max} > 1"
            )));
        }
        Ok(geom)
    }

    /// Like [`ellipsoid`](Self::ellipsoid) without the `λ_max(A) ≤ 1`
    /// normalisation. Values and actions are unaffected; only the greedy
    /// guarantee through `λ_min(A)` assumes the normalisation.
    pub fn ellipsoid_unscaled(a: Matrix) -> Result<Self> {
        let dim = a.nrows();
        check_dim(dim)?;
        if a.ncols() != dim {
            return Err(Error::InvalidGeometry(format!(
                "ellipsoid matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry(
                "ellipsoid matrix has non-finite entries".into(),
            ));
        }
        let asym = linalg::max_asymmetry(&a);
        if asym > SPD_TOL {
            return Err(Error::InvalidGeometry(format!(
                "ellipsoid matrix is not symmetric (max |A - Aᵀ| = {asym:e})"
            )));
        }
        let (lambda_min, lambda_max) = linalg::symmetric_eigen_range(&a);
        if lambda_min <= SPD_TOL {
            return Err(Error::InvalidGeometry(format!(
                "ellipsoid matrix is not positive definite (λ_min = {lambda_min:e})"
            )));
        }
        Ok(Self {
            dim,
            max_norm: 1.0 / lambda_min.sqrt(),
            shape: Shape::Ellipsoid {
                a,
                lambda_min,
                lambda_max,
            },
        })
    }

    /// `{x : ‖x‖_p ≤ radius}` for `p ∈ (1, 2]`.
    pub fn lp_ball(dim: usize, p: f64, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        check_radius(radius)?;
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidGeometry(format!(
                "lp-ball exponent must lie in (1, 2], got {p}"
            )));
        }
        let q = p / (p - 1.0);
        // ‖x‖₂ ≤ ‖x‖_p for p ≤ 2, with equality on coordinate axes
        Ok(Self {
            dim,
            max_norm: radius,
            shape: Shape::Lp { radius, p, q },
        })
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        check_radius(radius)?;
        Ok(Self {
            dim,
            max_norm: radius,
            shape: Shape::L1 { radius },
        })
    }

    /// Axis-aligned box `∏ [lo_i, hi_i]`; each interval must contain 0 so
    /// that sparse actions stay feasible.
    pub fn hypercube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim)?;
        if hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: hi.len(),
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l > 0.0 || h < 0.0 || l >= h {
                return Err(Error::InvalidGeometry(format!(
                    "hypercube bound {i} is [{l}, {h}]; need lo ≤ 0 ≤ hi with lo < hi"
                )));
            }
        }
        let max_norm = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            dim,
            max_norm,
            shape: Shape::Box { lo, hi },
        })
    }

    pub fn unit_hypercube(dim: usize) -> Result<Self> {
        Self::hypercube(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GeometryKind {
        match self.shape {
            Shape::Ball { .. } => GeometryKind::EuclideanBall,
            Shape::Ellipsoid { .. } => GeometryKind::Ellipsoid,
            Shape::Lp { .. } => GeometryKind::LpBall,
            Shape::L1 { .. } => GeometryKind::L1Ball,
            Shape::Box { .. } => GeometryKind::Hypercube,
        }
    }

    /// `L_max = sup_{x ∈ X} ‖x‖₂`, also the Lipschitz constant of `h(S; ·)`.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn is_strongly_convex(&self) -> bool {
        matches!(
            self.shape,
            Shape::Ball { .. } | Shape::Ellipsoid { .. } | Shape::Lp { .. }
        )
    }

    pub fn ellipsoid_matrix(&self) -> Option<&Matrix> {
        match &self.shape {
            Shape::Ellipsoid { a, .. } => Some(a),
            _ => None,
        }
    }

    /// `(λ_min(A), λ_max(A))` for ellipsoids.
    pub fn ellipsoid_spectrum(&self) -> Option<(f64, f64)> {
        match &self.shape {
            Shape::Ellipsoid {
                lambda_min,
                lambda_max,
                ..
            } => Some((*lambda_min, *lambda_max)),
            _ => None,
        }
    }

    pub fn lp_exponents(&self) -> Option<(f64, f64)> {
        match &self.shape {
            Shape::Lp { p, q, .. } => Some((*p, *q)),
            _ => None,
        }
    }

    pub fn box_bounds(&self) -> Option<(&[f64], &[f64])> {
        match &self.shape {
            Shape::Box { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }

    pub fn check_vector(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn check_support(&self, s: &[usize]) -> Result<()> {
        match s.iter().find(|&&i| i >= self.dim) {
            Some(i) => Err(Error::InvalidSupport(format!(
                "index {i} out of range for dimension {}",
                self.dim
            ))),
            None => Ok(()),
        }
    }

    /// `h(S; θ)`.
    pub fn value_on_support(&self, support: &SupportSet, theta: &Vector) -> Result<f64> {
        self.value_on_indices(support.indices(), theta)
    }

    /// `x*(S; θ)`, the maximiser of `θᵀx` over `X` restricted to support `S`.
    pub fn best_action_on_support(&self, support: &SupportSet, theta: &Vector) -> Result<Vector> {
        self.best_action_on_indices(support.indices(), theta)
    }

    /// Same as [`value_on_support`](Self::value_on_support) for a sorted,
    /// duplicate-free index slice of any length.
    pub fn value_on_indices(&self, s: &[usize], theta: &Vector) -> Result<f64> {
        self.check_vector(theta)?;
        self.check_support(s)?;
        Ok(self.value_unchecked(s, theta))
    }

    pub fn best_action_on_indices(&self, s: &[usize], theta: &Vector) -> Result<Vector> {
        self.check_vector(theta)?;
        self.check_support(s)?;
        Ok(self.action_unchecked(s, theta))
    }

    pub(crate) fn value_unchecked(&self, s: &[usize], theta: &Vector) -> f64 {
        if support_norm(s, theta) < ZERO_THRESHOLD {
            return 0.0;
        }
        match &self.shape {
            Shape::Ball { radius } => radius * support_norm(s, theta),
            Shape::Ellipsoid { a, .. } => ellipsoid_solve(a, s, theta).0,
            Shape::Lp { radius, q, .. } => radius * lq_norm(s.iter().map(|&i| theta[i]), *q),
            Shape::L1 { radius } => radius * s.iter().map(|&i| theta[i].abs()).fold(0.0, f64::max),
            Shape::Box { lo, hi } => s
                .iter()
                .map(|&i| (lo[i] * theta[i]).max(hi[i] * theta[i]))
                .sum(),
        }
    }

    pub(crate) fn action_unchecked(&self, s: &[usize], theta: &Vector) -> Vector {
        let mut x = Vector::zeros(self.dim);
        let norm = support_norm(s, theta);
        if norm < ZERO_THRESHOLD {
            return x;
        }
        match &self.shape {
            Shape::Ball { radius } => {
                for &i in s {
                    x[i] = radius * theta[i] / norm;
                }
            }
            Shape::Ellipsoid { a, .. } => {
                let (value, z) = ellipsoid_solve(a, s, theta);
                for (k, &i) in s.iter().enumerate() {
                    x[i] = z[k] / value;
                }
            }
            Shape::Lp { radius, q, .. } => {
                let dual = lq_norm(s.iter().map(|&i| theta[i]), *q);
                let scale = dual.powf(q - 1.0);
                for &i in s {
                    x[i] = radius * theta[i].signum() * theta[i].abs().powf(q - 1.0) / scale;
                }
            }
            Shape::L1 { radius } => {
                // strict comparison keeps the lowest index on ties
                let mut best = s[0];
                for &i in &s[1..] {
                    if theta[i].abs() > theta[best].abs() {
                        best = i;
                    }
                }
                x[best] = radius * theta[best].signum();
            }
            Shape::Box { lo, hi } => {
                for &i in s {
                    x[i] = if theta[i] > 0.0 {
                        hi[i]
                    } else if theta[i] < 0.0 {
                        lo[i]
                    } else {
                        0.0
                    };
                }
            }
        }
        x
    }

    /// Whether `x ∈ X`, allowing [`MEMBERSHIP_TOL`] slack on the defining inequality.
    pub fn membership(&self, x: &Vector) -> Result<bool> {
        self.check_vector(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(false);
        }
        Ok(match &self.shape {
            Shape::Ball { radius } => x.norm() <= radius + MEMBERSHIP_TOL,
            Shape::Ellipsoid { a, .. } => x.dot(&(a * x)) <= 1.0 + MEMBERSHIP_TOL,
            Shape::Lp { radius, p, .. } => {
                lq_norm(x.iter().copied(), *p) <= radius + MEMBERSHIP_TOL
            }
            Shape::L1 { radius } => x.lp_norm(1) <= radius + MEMBERSHIP_TOL,
            Shape::Box { lo, hi } => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= lo[i] - MEMBERSHIP_TOL && v <= hi[i] + MEMBERSHIP_TOL),
        })
    }

    /// Largest `s ≥ 0` with `s·v ∈ X` (infinite when `v = 0`).
    pub fn boundary_scale(&self, v: &Vector) -> Result<f64> {
        self.check_vector(v)?;
        if v.norm() == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(match &self.shape {
            Shape::Ball { radius } => radius / v.norm(),
            Shape::Ellipsoid { a, .. } => 1.0 / v.dot(&(a * v)).sqrt(),
            Shape::Lp { radius, p, .. } => radius / lq_norm(v.iter().copied(), *p),
            Shape::L1 { radius } => radius / v.lp_norm(1),
            Shape::Box { lo, hi } => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(i, &c)| if c > 0.0 { hi[i] / c } else { lo[i] / c })
                .fold(f64::INFINITY, f64::min),
        })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidGeometry("dimension must be positive".into()));
    }
    Ok(())
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    Ok(())
}

fn support_norm(s: &[usize], theta: &Vector) -> f64 {
    s.iter().map(|&i| theta[i] * theta[i]).sum::<f64>().sqrt()
}

fn lq_norm(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q == 2.0 {
        return values.map(|v| v * v).sum::<f64>().sqrt();
    }
    // scale by the max entry so |v|^q cannot underflow for large q
    let vals: Vec<f64> = values.map(f64::abs).collect();
    let m = vals.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * vals
        .iter()
        .map(|v| (v / m).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Returns `(sqrt(θ_Sᵀ A_S⁻¹ θ_S), A_S⁻¹ θ_S)` via a Cholesky factor of the
/// principal submatrix `A_S`.
fn ellipsoid_solve(a: &Matrix, s: &[usize], theta: &Vector) -> (f64, Vector) {
    let sub = linalg::principal_submatrix(a, s);
    let rhs = linalg::gather(theta, s);
    // principal submatrices of an SPD matrix are SPD
    let chol = Cholesky::new(sub).expect("principal submatrix of an SPD matrix");
    let z = chol.solve(&rhs);
    let quad = rhs.dot(&z).max(0.0);
    (quad.sqrt(), z)
}

/// A set of at most `capacity` coordinates, stored in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
    capacity: usize,
}

impl SupportSet {
    /// Builds a support from arbitrary-order indices; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>, capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || capacity > dim {
            return Err(Error::InvalidSupport(format!(
                "capacity {capacity} must lie in [1, {dim}]"
            )));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSupport("duplicate index".into()));
        }
        if indices.len() > capacity {
            return Err(Error::InvalidSupport(format!(
                "{} indices exceed capacity {capacity}",
                indices.len()
            )));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidSupport(format!(
                "index {i} out of range for dimension {dim}"
            )));
        }
        Ok(Self { indices, capacity })
    }

    pub fn empty(capacity: usize) -> Self {
        Self {
            indices: Vec::new(),
            capacity,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn overlap(&self, other: &SupportSet) -> usize {
        self.indices.iter().filter(|&&i| other.contains(i)).count()
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// Number of nonzero coordinates.
pub fn support_size(x: &Vector) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}
