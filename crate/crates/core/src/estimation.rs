//! Exploration bases, the fixed-design least-squares estimator and the
//! confidence quantities derived from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{ActionSetGeometry, GeometryKind, SupportSet};
use crate::linalg::{self, EntryDistribution, Matrix, Vector};
use crate::oracles::rank_by_magnitude;

/// `λ_min(B)` must exceed this for a basis to be accepted.
pub const MIN_BASIS_EIGENVALUE: f64 = 1e-10;
/// Resampling budget for random bases.
pub const BASIS_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Standard,
    GaussianOrthogonal,
    UniformOrthogonal,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Standard => "standard",
            BasisKind::GaussianOrthogonal => "gaussian-orthogonal",
            BasisKind::UniformOrthogonal => "uniform-orthogonal",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "standard" => Ok(BasisKind::Standard),
            "gaussian-orthogonal" | "gaussian" => Ok(BasisKind::GaussianOrthogonal),
            "uniform-orthogonal" | "uniform" => Ok(BasisKind::UniformOrthogonal),
            other => Err(Error::Config(format!("unknown basis kind `{other}`"))),
        }
    }
}

/// `d` feasible H-sparse exploration actions with an invertible design matrix.
#[derive(Debug, Clone)]
pub struct ExplorationBasis {
    kind: BasisKind,
    actions: Vec<Vector>,
    gram: Matrix,
    /// `B⁻¹ [b_1 … b_d]`, so that `θ̂_c = estimator · sums / c`.
    estimator: Matrix,
    lambda0: f64,
    trace: f64,
    sigma: f64,
    h1: f64,
}

impl ExplorationBasis {
    /// Builds a basis from explicit actions, validating feasibility, sparsity
    /// and invertibility of `B = Σ b_k b_kᵀ`.
    pub fn from_actions(
        kind: BasisKind,
        geom: &ActionSetGeometry,
        h: usize,
        sigma: f64,
        actions: Vec<Vector>,
    ) -> Result<Self> {
        let d = geom.dim();
        if actions.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: actions.len(),
            });
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be finite and ≥ 0, got {sigma}"
            )));
        }
        for (k, b) in actions.iter().enumerate() {
            if !geom.membership(b)? {
                return Err(Error::InvalidArgument(format!(
                    "basis action {k} is infeasible"
                )));
            }
            let nnz = crate::geometry::support_size(b);
            if nnz > h {
                return Err(Error::InvalidArgument(format!(
                    "basis action {k} has {nnz} nonzeros > {h}"
                )));
            }
        }
        let columns = Matrix::from_columns(&actions);
        let gram = &columns * columns.transpose();
        let gram = (&gram + gram.transpose()) * 0.5;
        let (lambda0, _) = linalg::symmetric_eigen_range(&gram);
        if lambda0.is_nan() || lambda0 <= MIN_BASIS_EIGENVALUE {
            return Err(Error::SingularBasis(1));
        }
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or(Error::SingularBasis(1))?
            .inverse();
        let estimator = gram_inv * &columns;
        let trace = gram.trace();
        let h1 = 2.0 * sigma * sigma * trace / (lambda0 * lambda0);
        Ok(Self {
            kind,
            actions,
            gram,
            estimator,
            lambda0,
            trace,
            sigma,
            h1,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn actions(&self) -> &[Vector] {
        &self.actions
    }

    pub fn dim(&self) -> usize {
        self.actions.len()
    }

    /// `B = Σ b_k b_kᵀ`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `h1 = 2σ²·Tr(B)/λ0²`.
    pub fn h1(&self) -> f64 {
        self.h1
    }

    /// `ε_c` for this basis, see [`error_radius`].
    pub fn error_radius(&self, cycle: u64, delta: f64) -> f64 {
        error_radius(self.h1, cycle, self.dim(), delta)
    }
}

/// Builds an exploration basis of the requested kind.
///
/// The standard basis scales each coordinate axis to the boundary of `X`.
/// The orthogonal kinds take the columns of a random orthogonal matrix, keep
/// the `H` largest-magnitude coordinates when `H < d`, and scale each column
/// onto the boundary of `X`. Random bases are resampled until `B` is
/// invertible.
pub fn make_basis(
    kind: BasisKind,
    geom: &ActionSetGeometry,
    h: usize,
    sigma: f64,
    seed: u64,
) -> Result<ExplorationBasis> {
    let d = geom.dim();
    if h == 0 || h > d {
        return Err(Error::InvalidArgument(format!(
            "sparsity {h} must lie in [1, {d}]"
        )));
    }
    let dist = match kind {
        BasisKind::Standard => {
            let actions = (0..d)
                .map(|k| standard_action(geom, k))
                .collect::<Result<Vec<_>>>()?;
            return ExplorationBasis::from_actions(kind, geom, h, sigma, actions);
        }
        BasisKind::GaussianOrthogonal => EntryDistribution::Gaussian,
        BasisKind::UniformOrthogonal => EntryDistribution::Uniform,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..BASIS_RETRIES {
        let q = linalg::random_orthogonal(d, dist, &mut rng);
        let actions = q
            .column_iter()
            .map(|col| sparse_boundary_action(geom, col.into_owned(), h))
            .collect::<Result<Vec<_>>>()?;
        match ExplorationBasis::from_actions(kind, geom, h, sigma, actions) {
            Ok(basis) => return Ok(basis),
            Err(Error::SingularBasis(_)) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(Error::SingularBasis(BASIS_RETRIES))
}

fn standard_action(geom: &ActionSetGeometry, k: usize) -> Result<Vector> {
    let d = geom.dim();
    let mut dir = Vector::zeros(d);
    dir[k] = 1.0;
    if let Some((lo, hi)) = geom.box_bounds() {
        if -lo[k] > hi[k] {
            dir[k] = -1.0;
        }
    }
    let scale = geom.boundary_scale(&dir)?;
    Ok(dir * scale)
}

fn sparse_boundary_action(geom: &ActionSetGeometry, mut v: Vector, h: usize) -> Result<Vector> {
    let d = geom.dim();
    if h < d {
        for &i in &rank_by_magnitude(&v)[h..] {
            v[i] = 0.0;
        }
    }
    // a box with a zero bound admits only one sign on that coordinate
    if geom.kind() == GeometryKind::Hypercube {
        let (lo, hi) = geom.box_bounds().expect("hypercube bounds");
        for i in 0..d {
            if (v[i] > 0.0 && hi[i] == 0.0) || (v[i] < 0.0 && lo[i] == 0.0) {
                v[i] = -v[i];
            }
        }
    }
    let scale = geom.boundary_scale(&v)?;
    Ok(v * scale)
}

/// `ε_c = sqrt(h1·ln(2dc²/δ)/c)`; zero when `h1 = 0`, infinite before the
/// first cycle.
pub fn error_radius(h1: f64, cycle: u64, d: usize, delta: f64) -> f64 {
    if cycle == 0 {
        return f64::INFINITY;
    }
    if h1 == 0.0 {
        return 0.0;
    }
    let c = cycle as f64;
    (h1 * (2.0 * d as f64 * c * c / delta).ln() / c).sqrt()
}

/// Gap between the H-th and (H+1)-th largest `|θ̂_i|`, and the top-H support.
pub fn empirical_sort_gap(theta_hat: &Vector, h: usize) -> Result<(f64, SupportSet)> {
    let d = theta_hat.len();
    if h == 0 || h >= d {
        return Err(Error::InvalidArgument(format!(
            "empirical gap needs 1 ≤ H < d, got H = {h}, d = {d}"
        )));
    }
    let order = rank_by_magnitude(theta_hat);
    let gap = theta_hat[order[h - 1]].abs() - theta_hat[order[h]].abs();
    let support = SupportSet::new(order[..h].to_vec(), h, d)?;
    Ok((gap, support))
}

/// Warm-up duration bound
/// `C0 = (32h1/Δ²)·ln(2d/δ) + (128h1/Δ²)·ln(64h1/Δ²)`, defined as 0 when `h1 = 0`.
pub fn warmup_bound_c0(h1: f64, delta_min: f64, d: usize, delta: f64) -> Result<f64> {
    if delta_min.is_nan() || delta_min <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "signal gap must be positive, got {delta_min}"
        )));
    }
    if h1.is_nan() || h1 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "h1 must be non-negative, got {h1}"
        )));
    }
    if h1 == 0.0 {
        return Ok(0.0);
    }
    let scale = h1 / (delta_min * delta_min);
    Ok(32.0 * scale * (2.0 * d as f64 / delta).ln() + 128.0 * scale * (64.0 * scale).ln())
}

/// Running least-squares state over completed exploration cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsState {
    cycle: u64,
    reward_sums: Vector,
    theta_hat: Option<Vector>,
}

impl OlsState {
    pub fn new(d: usize) -> Self {
        Self {
            cycle: 0,
            reward_sums: Vector::zeros(d),
            theta_hat: None,
        }
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn reward_sums(&self) -> &Vector {
        &self.reward_sums
    }

    /// `θ̂_c`, or `None` before the first completed cycle.
    pub fn theta_hat(&self) -> Option<&Vector> {
        self.theta_hat.as_ref()
    }

    /// Folds one cycle of rewards (`rewards[k]` observed for `b_k`) and
    /// recomputes `θ̂_c = (cB)⁻¹ Σ_k b_k·Σ_s Y_k(s)`.
    pub fn update(&mut self, basis: &ExplorationBasis, rewards: &[f64]) -> Result<()> {
        let d = self.reward_sums.len();
        if rewards.len() != d || basis.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rewards.len(),
            });
        }
        for (sum, r) in self.reward_sums.iter_mut().zip(rewards) {
            *sum += r;
        }
        self.cycle += 1;
        self.theta_hat = Some(&basis.estimator * &self.reward_sums / self.cycle as f64);
        Ok(())
    }
}

/// Functional form of [`OlsState::update`].
pub fn ols_update(state: &OlsState, basis: &ExplorationBasis, rewards: &[f64]) -> Result<OlsState> {
    let mut next = state.clone();
    next.update(basis, rewards)?;
    Ok(next)
}
