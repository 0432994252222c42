//! Sparse-action selection for a known parameter vector.
//!
//! [`exact_top_h`] is exact on Euclidean balls, [`greedy_select`] works on any
//! geometry and records the step-wise gaps used by the greedy stopping test,
//! [`brute_force`] enumerates supports and serves as the benchmark, and
//! [`submodularity_ratio`] certifies the greedy approximation factor.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ActionSetGeometry, GeometryKind, SupportSet};
use crate::linalg::Vector;

/// Upper limit on the number of supports [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;
/// Largest dimension accepted by exhaustive ratio certification.
pub const EXHAUSTIVE_RATIO_MAX_DIM: usize = 10;
/// Denominators below this are treated as zero in the ratio (0/0 := 1).
const RATIO_DENOM_TOL: f64 = 1e-12;

/// A support together with its maximising action and value.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub support: SupportSet,
    pub action: Vector,
    pub value: f64,
}

/// Indices sorted by decreasing `|θ_i|`, ties broken by lower index.
pub fn rank_by_magnitude(theta: &Vector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    order
}

fn check_sparsity(h: usize, d: usize) -> Result<()> {
    if h == 0 || h > d {
        return Err(Error::InvalidArgument(format!(
            "sparsity {h} must lie in [1, {d}]"
        )));
    }
    Ok(())
}

/// Exact H-sparse maximiser on a Euclidean ball: keep the `H` largest
/// magnitudes of `θ` and normalise.
pub fn exact_top_h(geom: &ActionSetGeometry, theta: &Vector, h: usize) -> Result<SparseSolution> {
    if geom.kind() != GeometryKind::EuclideanBall {
        return Err(Error::UnsupportedGeometry {
            op: "exact_top_h",
            kind: geom.kind().name(),
        });
    }
    geom.check_vector(theta)?;
    check_sparsity(h, geom.dim())?;
    let mut top = rank_by_magnitude(theta);
    top.truncate(h);
    let support = SupportSet::new(top, h, geom.dim())?;
    let action = geom.action_unchecked(support.indices(), theta);
    let value = geom.value_unchecked(support.indices(), theta);
    Ok(SparseSolution {
        support,
        action,
        value,
    })
}

/// Record of one greedy run.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    /// `g_1, …, g_H` in selection order.
    pub selected: Vec<usize>,
    /// `h(G_k) − h(G_{k−1})` per step.
    pub marginal_gains: Vec<f64>,
    /// Best minus second-best marginal gain per step (`∞` with one candidate left).
    pub step_gaps: Vec<f64>,
    pub min_gap: f64,
    /// `h(G_H)`.
    pub value: f64,
}

impl GreedyTrace {
    pub fn support(&self, dim: usize) -> Result<SupportSet> {
        SupportSet::new(self.selected.clone(), self.selected.len().max(1), dim)
    }
}

fn insert_sorted(set: &[usize], v: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(set.len() + 1);
    let pos = set.partition_point(|&x| x < v);
    out.extend_from_slice(&set[..pos]);
    out.push(v);
    out.extend_from_slice(&set[pos..]);
    out
}

/// Greedy construction of an H-sparse support by largest marginal gain.
///
/// Always selects exactly `H` coordinates; ties go to the lower index.
pub fn greedy_select(geom: &ActionSetGeometry, theta: &Vector, h: usize) -> Result<GreedyTrace> {
    geom.check_vector(theta)?;
    let d = geom.dim();
    check_sparsity(h, d)?;

    let mut chosen: Vec<usize> = Vec::with_capacity(h);
    let mut in_set = vec![false; d];
    let mut current = 0.0;
    let mut trace = GreedyTrace {
        selected: Vec::with_capacity(h),
        marginal_gains: Vec::with_capacity(h),
        step_gaps: Vec::with_capacity(h),
        min_gap: f64::INFINITY,
        value: 0.0,
    };

    for _ in 0..h {
        let mut best: Option<(usize, f64, f64)> = None; // (index, gain, value)
        let mut second = f64::NEG_INFINITY;
        for v in (0..d).filter(|&v| !in_set[v]) {
            let value = geom.value_unchecked(&insert_sorted(&chosen, v), theta);
            let gain = value - current;
            match best {
                Some((_, best_gain, _)) if gain <= best_gain => second = second.max(gain),
                Some((_, best_gain, _)) => {
                    second = second.max(best_gain);
                    best = Some((v, gain, value));
                }
                None => best = Some((v, gain, value)),
            }
        }
        let (g, gain, value) = best.expect("at least one candidate remains while k ≤ d");
        let gap = if second == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            gain - second
        };
        trace.selected.push(g);
        trace.marginal_gains.push(gain);
        trace.step_gaps.push(gap);
        trace.min_gap = trace.min_gap.min(gap);
        in_set[g] = true;
        chosen = insert_sorted(&chosen, g);
        current = value;
    }
    trace.value = current;
    Ok(trace)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Advances `comb` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Enumerates every support of size exactly `H` and returns the best one.
///
/// For geometries containing the origin `h(·; θ)` is monotone, so this also
/// solves the `|S| ≤ H` problem. Ties resolve to the lexicographically
/// smallest support.
pub fn brute_force(geom: &ActionSetGeometry, theta: &Vector, h: usize) -> Result<SparseSolution> {
    geom.check_vector(theta)?;
    let d = geom.dim();
    check_sparsity(h, d)?;
    let count = binomial(d, h);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::BudgetExceeded {
            required: count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut comb: Vec<usize> = (0..h).collect();
    let mut best_support = comb.clone();
    let mut best_value = geom.value_unchecked(&comb, theta);
    while next_combination(&mut comb, d) {
        let value = geom.value_unchecked(&comb, theta);
        if value > best_value {
            best_value = value;
            best_support.copy_from_slice(&comb);
        }
    }
    let action = geom.action_unchecked(&best_support, theta);
    Ok(SparseSolution {
        support: SupportSet::new(best_support, h, d)?,
        action,
        value: best_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// Every pair `(S, Ω)` of subsets of `[d]`; requires `d ≤ 10`.
    Exhaustive,
    /// `pairs` random pairs drawn from a seeded stream.
    Sampled { pairs: usize, seed: u64 },
}

/// Submodularity ratio `γ` of `S ↦ h(S; θ)` and the greedy factor `α = 1 − e^{−γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCertificate {
    pub gamma: f64,
    pub alpha: f64,
    /// Number of `(S, Ω)` pairs evaluated.
    pub instance_count: u64,
    /// `false` for sampled estimates, which only bound `γ` from above.
    pub exhaustive: bool,
}

impl RatioCertificate {
    fn from_gamma(gamma: f64, instance_count: u64, exhaustive: bool) -> Self {
        Self {
            gamma,
            alpha: greedy_factor(gamma),
            instance_count,
            exhaustive,
        }
    }
}

/// `1 − e^{−γ}`.
pub fn greedy_factor(gamma: f64) -> f64 {
    1.0 - (-gamma).exp()
}

/// Ratio term for one pair, with `0/0 := 1` and clamping into `[0, 1]`.
fn pair_ratio(singleton_sum: f64, joint_gain: f64) -> f64 {
    if joint_gain <= RATIO_DENOM_TOL {
        return 1.0;
    }
    (singleton_sum / joint_gain).clamp(0.0, 1.0)
}

fn mask_to_indices(mask: u32, d: usize) -> Vec<usize> {
    (0..d).filter(|&i| mask & (1 << i) != 0).collect()
}

pub fn submodularity_ratio(
    geom: &ActionSetGeometry,
    theta: &Vector,
    mode: RatioMode,
) -> Result<RatioCertificate> {
    geom.check_vector(theta)?;
    let d = geom.dim();
    match mode {
        RatioMode::Exhaustive => {
            if d > EXHAUSTIVE_RATIO_MAX_DIM {
                return Err(Error::BudgetExceeded {
                    required: 3u128.pow(d as u32),
                    limit: 3u128.pow(EXHAUSTIVE_RATIO_MAX_DIM as u32),
                });
            }
            let full: u32 = (1u32 << d) - 1;
            let values: Vec<f64> = (0..=full)
                .map(|m| geom.value_unchecked(&mask_to_indices(m, d), theta))
                .collect();
            let mut gamma: f64 = 1.0;
            let mut pairs: u64 = 0;
            // only Ω∖S enters the definition, so enumerate S and nonempty W ⊆ [d]∖S
            for s in 0..=full {
                let base = values[s as usize];
                let comp = full & !s;
                let mut w = comp;
                while w != 0 {
                    let singles: f64 = (0..d)
                        .filter(|&i| w & (1 << i) != 0)
                        .map(|i| values[(s | (1 << i)) as usize] - base)
                        .sum();
                    let joint = values[(s | w) as usize] - base;
                    gamma = gamma.min(pair_ratio(singles, joint));
                    pairs += 1;
                    w = (w - 1) & comp;
                }
            }
            Ok(RatioCertificate::from_gamma(gamma, pairs, true))
        }
        RatioMode::Sampled { pairs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gamma: f64 = 1.0;
            for _ in 0..pairs {
                let s_len = rng.random_range(0..d);
                let mut perm = index::sample(&mut rng, d, d).into_vec();
                let (s_part, rest) = perm.split_at_mut(s_len);
                let w_len = rng.random_range(1..=rest.len());
                let mut s: Vec<usize> = s_part.to_vec();
                s.sort_unstable();
                let w: Vec<usize> = rest[..w_len].to_vec();
                let base = geom.value_unchecked(&s, theta);
                let singles: f64 = w
                    .iter()
                    .map(|&i| geom.value_unchecked(&insert_sorted(&s, i), theta) - base)
                    .sum();
                let mut union = s.clone();
                union.extend_from_slice(&w);
                union.sort_unstable();
                let joint = geom.value_unchecked(&union, theta) - base;
                gamma = gamma.min(pair_ratio(singles, joint));
            }
            Ok(RatioCertificate::from_gamma(gamma, pairs as u64, false))
        }
    }
}

/// Spot check of convex-hull regularity: random convex combinations of
/// per-support maximisers `x*(S)` with `|S| ≤ H` must stay inside `X`.
///
/// Returns the number of sampled combinations that fell outside `X`.
pub fn convex_hull_spot_check(
    geom: &ActionSetGeometry,
    theta: &Vector,
    h: usize,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    geom.check_vector(theta)?;
    let d = geom.dim();
    check_sparsity(h, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..samples {
        let terms = rng.random_range(2..=4);
        let mut weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut x = Vector::zeros(d);
        for w in weights {
            let size = rng.random_range(1..=h);
            let mut s = index::sample(&mut rng, d, size).into_vec();
            s.sort_unstable();
            x += geom.action_unchecked(&s, theta) * w;
        }
        if !geom.membership(&x)? {
            violations += 1;
        }
    }
    Ok(violations)
}
