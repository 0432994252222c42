//! Unknown-parameter generators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;

use super::config::GapStyle;
use crate::error::{Error, Result};
use crate::estimation::empirical_sort_gap;
use crate::linalg::Vector;

/// Spacing between consecutive top-H magnitudes in the adversarial style.
pub const ADVERSARIAL_SPACING: f64 = 1e-7;
/// Allowed deviation between the realised and requested rank-H gap.
pub const GAP_TOLERANCE: f64 = 1e-9;

pub fn uniform_theta(d: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    Vector::from_iterator(d, (0..d).map(|_| rng.sample(dist)))
}

/// Random-sign parameter whose `H`-th and `(H+1)`-th largest magnitudes
/// differ by exactly `gap`.
///
/// Magnitudes below rank `H` decrease linearly from `gap` towards zero. The
/// `H`-th magnitude is `2·gap`; above it the standard style climbs in steps
/// of `2·gap` and the adversarial style in steps of `1e-7`. Coordinates are
/// randomly permuted. Fails if the largest magnitude would exceed `budget`.
pub fn make_gap_controlled_theta(
    d: usize,
    h: usize,
    gap: f64,
    style: GapStyle,
    budget: f64,
    seed: u64,
) -> Result<Vector> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target gap must be positive, got {gap}"
        )));
    }
    if h == 0 || h >= d {
        return Err(Error::InvalidArgument(format!(
            "gap-controlled parameters need 1 ≤ H < d, got H = {h}, d = {d}"
        )));
    }
    let tail = d - h;
    let anchor = 2.0 * gap;
    let step = match style {
        GapStyle::Standard => 2.0 * gap,
        GapStyle::Adversarial => ADVERSARIAL_SPACING,
    };
    let top = anchor + step * (h - 1) as f64;
    if top > budget {
        return Err(Error::InvalidArgument(format!(
            "{} spacing needs a largest magnitude of {top}, above the budget {budget}",
            style.name()
        )));
    }

    let mut magnitudes: Vec<f64> = (0..h).map(|i| anchor + step * (h - 1 - i) as f64).collect();
    magnitudes.extend((0..tail).map(|j| gap * (tail - j) as f64 / tail as f64));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut theta = Vector::zeros(d);
    for (rank, &coord) in order.iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        theta[coord] = sign * magnitudes[rank];
    }

    let (realised, _) = empirical_sort_gap(&theta, h)?;
    if (realised - gap).abs() > GAP_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "realised gap {realised} misses the target {gap}"
        )));
    }
    Ok(theta)
}
