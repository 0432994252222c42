mod common;

use common::*;
use proptest::prelude::*;
use sparse_bandit::estimation::{error_radius, make_basis, BasisKind, OlsState};
use sparse_bandit::geometry::{support_size, ActionSetGeometry, SupportSet};
use sparse_bandit::harness::{make_gap_controlled_theta, GapStyle};
use sparse_bandit::linalg::{random_spd, Matrix, Vector};
use sparse_bandit::oracles::{
    brute_force, exact_top_h, greedy_factor, greedy_select, submodularity_ratio, RatioMode,
};

const D: usize = 6;

fn geometry(kind: usize, seed: u64) -> ActionSetGeometry {
    match kind {
        0 => ActionSetGeometry::euclidean_ball(D, 1.5).unwrap(),
        1 => ActionSetGeometry::ellipsoid(random_spd(D, 0.15, &mut rng(seed))).unwrap(),
        2 => ActionSetGeometry::lp_ball(D, 1.4, 1.0).unwrap(),
        3 => ActionSetGeometry::l1_ball(D, 2.0).unwrap(),
        _ => ActionSetGeometry::hypercube(vec![-0.5; D], vec![1.0; D]).unwrap(),
    }
}

fn theta() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0f64..3.0, D).prop_map(Vector::from_vec)
}

fn support() -> impl Strategy<Value = Vec<usize>> {
    (0u32..(1 << D)).prop_map(|m| mask_indices(m, D))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn value_is_lipschitz(kind in 0usize..5, seed in 0u64..50, a in theta(), b in theta(), s in support()) {
        let g = geometry(kind, seed);
        let lhs = (g.value_on_indices(&s, &a).unwrap() - g.value_on_indices(&s, &b).unwrap()).abs();
        prop_assert!(lhs <= g.max_norm() * (&a - &b).norm() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn value_is_monotone(kind in 0usize..5, seed in 0u64..50, t in theta(), small in 0u32..(1 << D), extra in 0u32..(1 << D)) {
        let g = geometry(kind, seed);
        let s1 = mask_indices(small, D);
        let s2 = mask_indices(small | extra, D);
        prop_assert!(g.value_on_indices(&s1, &t).unwrap() <= g.value_on_indices(&s2, &t).unwrap() + 1e-12);
    }

    #[test]
    fn best_action_certifies_value(kind in 0usize..5, seed in 0u64..50, t in theta(), s in support()) {
        let g = geometry(kind, seed);
        let x = g.best_action_on_indices(&s, &t).unwrap();
        let value = g.value_on_indices(&s, &t).unwrap();
        prop_assert!((t.dot(&x) - value).abs() <= 1e-10);
        prop_assert!(g.membership(&x).unwrap());
        prop_assert!((0..D).all(|i| x[i] == 0.0 || s.contains(&i)));
        prop_assert!((value - reference_value(&g, &s, &t)).abs() <= 1e-10);
    }

    #[test]
    fn ball_action_is_stable(a in theta(), b in theta(), s in support()) {
        let g = ActionSetGeometry::euclidean_ball(D, 1.5).unwrap();
        let norm_b: f64 = s.iter().map(|&i| b[i] * b[i]).sum::<f64>().sqrt();
        prop_assume!(norm_b >= 0.1);
        let xa = g.best_action_on_indices(&s, &a).unwrap();
        let xb = g.best_action_on_indices(&s, &b).unwrap();
        prop_assert!((&xa - &xb).norm() <= 2.0 * g.max_norm() * (&a - &b).norm() / norm_b + 1e-12);
    }

    #[test]
    fn scaled_identity_ellipsoid_is_a_ball(radius in 0.2f64..1.0, t in theta(), s in support()) {
        // λ_max ≤ 1 needs radius ≥ 1; smaller radii go through the unscaled constructor
        let ball = ActionSetGeometry::euclidean_ball(D, 1.0 / radius).unwrap();
        let ell = ActionSetGeometry::ellipsoid(Matrix::identity(D, D) * (radius * radius)).unwrap();
        prop_assert!((ball.value_on_indices(&s, &t).unwrap() - ell.value_on_indices(&s, &t).unwrap()).abs() <= 1e-10);
        let small = ActionSetGeometry::euclidean_ball(D, radius).unwrap();
        let tight = ActionSetGeometry::ellipsoid_unscaled(Matrix::identity(D, D) / (radius * radius)).unwrap();
        prop_assert!((small.value_on_indices(&s, &t).unwrap() - tight.value_on_indices(&s, &t).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn max_norm_dominates_feasible_points(kind in 0usize..5, seed in 0u64..50, dir_seed in 0u64..10_000) {
        let g = geometry(kind, seed);
        let dir = random_direction(D, &mut rng(dir_seed));
        let x = &dir * g.boundary_scale(&dir).unwrap();
        prop_assert!(g.membership(&x).unwrap());
        prop_assert!(x.norm() <= g.max_norm() + 1e-9);
    }

    #[test]
    fn support_set_is_canonical(raw in prop::collection::vec(0usize..D, 0..=D)) {
        let mut dedup = raw.clone();
        dedup.sort();
        dedup.dedup();
        let h = dedup.len().max(1);
        match SupportSet::new(raw.clone(), h, D) {
            Ok(s) => {
                prop_assert_eq!(s.indices(), &dedup[..]);
                prop_assert!(s.len() <= s.capacity());
                let mut rev = raw.clone();
                rev.reverse();
                prop_assert_eq!(SupportSet::new(rev, h, D).unwrap(), s);
            }
            Err(_) => prop_assert!(dedup.len() != raw.len()),
        }
    }

    #[test]
    fn greedy_trace_is_consistent(kind in 0usize..5, seed in 0u64..50, t in theta(), h in 1usize..=D) {
        let g = geometry(kind, seed);
        let tr = greedy_select(&g, &t, h).unwrap();
        prop_assert_eq!(tr.selected.len(), h);
        let mut prefix: Vec<usize> = Vec::new();
        let mut prev = 0.0;
        for (k, &i) in tr.selected.iter().enumerate() {
            prop_assert!(!prefix.contains(&i));
            prefix.push(i);
            let mut sorted = prefix.clone();
            sorted.sort();
            let val = g.value_on_indices(&sorted, &t).unwrap();
            prop_assert!((tr.marginal_gains[k] - (val - prev)).abs() <= 1e-10);
            prop_assert!(tr.step_gaps[k] >= 0.0);
            prev = val;
        }
        prop_assert!((tr.value - prev).abs() <= 1e-12);
        let min = tr.step_gaps.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(tr.min_gap, min);
        prop_assert_eq!(greedy_select(&g, &t, h).unwrap(), tr);
    }

    #[test]
    fn top_h_equals_brute_force(t in theta(), h in 1usize..=D) {
        let g = ActionSetGeometry::euclidean_ball(D, 1.0).unwrap();
        let top = exact_top_h(&g, &t, h).unwrap();
        let bf = brute_force(&g, &t, h).unwrap();
        prop_assert!((top.value - bf.value).abs() <= 1e-12);
        prop_assert!((bf.value - bitmask_optimum(&g, &t, h)).abs() <= 1e-12);
    }

    #[test]
    fn greedy_is_exact_on_boxes(t in theta(), h in 1usize..=D, lo in -1.0f64..0.0, hi in 0.0f64..2.0) {
        let g = ActionSetGeometry::hypercube(vec![lo; D], vec![hi; D]).unwrap();
        let greedy = greedy_select(&g, &t, h).unwrap().value;
        prop_assert!((greedy - brute_force(&g, &t, h).unwrap().value).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn greedy_meets_ratio_guarantee(kind in 0usize..5, seed in 0u64..1000, t in theta(), h in 1usize..=3) {
        let g = geometry(kind, seed);
        let cert = submodularity_ratio(&g, &t, RatioMode::Exhaustive).unwrap();
        prop_assert!((0.0..=1.0).contains(&cert.gamma));
        prop_assert!(cert.alpha <= 1.0 - (-1.0f64).exp() + 1e-15);
        if cert.gamma > 0.0 {
            prop_assert!(cert.alpha > 0.0);
        }
        let opt = brute_force(&g, &t, h).unwrap().value;
        let greedy = greedy_select(&g, &t, h).unwrap().value;
        prop_assert!(greedy >= greedy_factor(cert.gamma) * opt - 1e-9);
    }

    #[test]
    fn ols_estimate_is_recomputable(kind in 0usize..5, seed in 0u64..50, basis_kind in 0usize..3, cycles in 1usize..6, noise_seed in 0u64..1000) {
        let g = geometry(kind, seed);
        let bk = [BasisKind::Standard, BasisKind::GaussianOrthogonal, BasisKind::UniformOrthogonal][basis_kind];
        let basis = make_basis(bk, &g, 3, 0.5, seed).unwrap();
        for b in basis.actions() {
            prop_assert!(g.membership(b).unwrap());
            prop_assert!(support_size(b) <= 3);
        }
        let mut r = rng(noise_seed);
        let mut ols = OlsState::new(D);
        for _ in 0..cycles {
            let rewards: Vec<f64> = gaussian(D, &mut r).iter().copied().collect();
            ols.update(&basis, &rewards).unwrap();
        }
        // θ̂ = (cB)⁻¹ Σ_k b_k·sums_k, solved by LU instead of the cached estimator
        let c = ols.cycle() as f64;
        let mut rhs = Vector::zeros(D);
        for (k, b) in basis.actions().iter().enumerate() {
            rhs += b * ols.reward_sums()[k];
        }
        let expected = (basis.gram() * c).lu().solve(&rhs).unwrap();
        let got = ols.theta_hat().unwrap();
        prop_assert!((got - &expected).amax() <= 1e-12 * (1.0 + expected.amax()));
    }

    #[test]
    fn gap_controlled_theta_realises_gap(d in 3usize..30, h_frac in 0.0f64..1.0, gap in 0.01f64..0.2, adversarial in any::<bool>(), seed in any::<u64>()) {
        let h = 1 + ((d - 2) as f64 * h_frac) as usize;
        let style = if adversarial { GapStyle::Adversarial } else { GapStyle::Standard };
        match make_gap_controlled_theta(d, h, gap, style, 10.0, seed) {
            Ok(t) => {
                let mut mags: Vec<f64> = t.iter().map(|x| x.abs()).collect();
                mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
                prop_assert!((mags[h - 1] - mags[h] - gap).abs() <= 1e-9);
            }
            Err(_) => prop_assert!(!adversarial && 2.0 * gap * h as f64 > 10.0),
        }
    }
}

proptest! {
    #[test]
    fn error_radius_decreases(h1 in 1e-3f64..100.0, d in 1usize..64, delta in 0.01f64..0.99, c in 3u64..100_000) {
        prop_assert!(error_radius(h1, c + 1, d, delta) < error_radius(h1, c, d, delta));
    }

    #[test]
    fn error_radius_shrinks_with_confidence(h1 in 1e-3f64..100.0, d in 1usize..64, lo in 0.01f64..0.5, c in 1u64..100_000) {
        let hi = lo + 0.4;
        prop_assert!(error_radius(h1, c, d, hi) < error_radius(h1, c, d, lo));
    }
}
