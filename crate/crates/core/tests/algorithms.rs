mod common;

use std::sync::Arc;

use common::*;
use sparse_bandit::algorithms::{run_algorithm, ActionSource, Algorithm, AlgorithmState, Environment, Phase, RunTrace};
use sparse_bandit::estimation::{empirical_sort_gap, make_basis, warmup_bound_c0, BasisKind};
use sparse_bandit::geometry::{support_size, ActionSetGeometry};
use sparse_bandit::harness::{make_gap_controlled_theta, GapStyle};
use sparse_bandit::linalg::{random_spd, Vector};
use sparse_bandit::oracles::{brute_force, exact_top_h, greedy_select};
use sparse_bandit::Policy;

struct Run {
    state: AlgorithmState,
    trace: RunTrace,
}

fn run(mode: Algorithm, geom: ActionSetGeometry, theta: &Vector, h: usize, sigma: f64, horizon: u64, seed: u64) -> Run {
    run_with(BasisKind::GaussianOrthogonal, mode, geom, theta, h, sigma, horizon, seed)
}

#[allow(clippy::too_many_arguments)]
fn run_with(
    kind: BasisKind,
    mode: Algorithm,
    geom: ActionSetGeometry,
    theta: &Vector,
    h: usize,
    sigma: f64,
    horizon: u64,
    seed: u64,
) -> Run {
    let geom = Arc::new(geom);
    let basis = Arc::new(make_basis(kind, &geom, h, sigma, seed).unwrap());
    let mut state = AlgorithmState::new(mode, geom.clone(), basis, h, 0.1).unwrap();
    let mut env = Environment::new(theta.clone(), sigma, geom, seed + 1).unwrap();
    let trace = run_algorithm(&mut env, &mut state, horizon).unwrap();
    Run { state, trace }
}

fn geometries(d: usize, seed: u64) -> Vec<ActionSetGeometry> {
    vec![
        ActionSetGeometry::euclidean_ball(d, 1.0).unwrap(),
        ActionSetGeometry::ellipsoid(random_spd(d, 0.3, &mut rng(seed))).unwrap(),
        ActionSetGeometry::lp_ball(d, 1.5, 1.0).unwrap(),
        ActionSetGeometry::l1_ball(d, 1.0).unwrap(),
        ActionSetGeometry::unit_hypercube(d).unwrap(),
    ]
}

const MODES: [Algorithm; 3] = [Algorithm::Apsee, Algorithm::ApseeG, Algorithm::ApseeGCompact];

#[test]
fn schedule_reconciles_with_time() {
    let d = 6;
    for mode in MODES {
        for (gi, g) in geometries(d, 1).into_iter().enumerate() {
            let theta = gaussian(d, &mut rng(gi as u64));
            let r = run(mode, g, &theta, 2, 0.05, 3_000, 7);
            let steps = &r.trace.steps;
            let mut t = 0u64;
            for rec in &r.trace.cycles {
                let explore = steps.iter().filter(|s| s.cycle == rec.cycle && s.phase == Phase::Explore).count();
                let exploit = steps.iter().filter(|s| s.cycle == rec.cycle && s.phase == Phase::Exploit).count() as u64;
                assert_eq!(explore, d);
                let planned = if rec.locked { AlgorithmState::exploit_schedule(mode, rec.cycle) } else { 0 };
                assert_eq!(rec.exploit_len, planned);
                t += d as u64 + planned;
                if t <= r.trace.horizon() {
                    assert_eq!(exploit, planned, "{mode:?} cycle {}", rec.cycle);
                    assert_eq!(steps[t as usize - 1].cycle, rec.cycle);
                } else {
                    assert!(exploit < planned);
                }
            }
            assert!(t + d as u64 > r.trace.horizon());
            assert!(steps.iter().zip(1..).all(|(s, k)| s.t == k));
        }
    }
}

#[test]
fn exploitation_requires_a_lock() {
    let d = 8;
    let theta = gaussian(d, &mut rng(3));
    for mode in [Algorithm::Apsee, Algorithm::ApseeG] {
        for sigma in [0.0, 0.02, 1.0] {
            let r = run(mode, ActionSetGeometry::euclidean_ball(d, 1.0).unwrap(), &theta, 3, sigma, 4_000, 11);
            let lock = r.trace.lock_cycle();
            for s in &r.trace.steps {
                if lock.is_none_or(|l| s.cycle <= l && s.phase == Phase::Explore) {
                    assert!(matches!(s.source, ActionSource::Basis(_)));
                }
                if s.phase == Phase::Exploit {
                    assert!(lock.is_some_and(|l| s.cycle >= l));
                    assert_eq!(s.source, ActionSource::Exploit(s.cycle));
                }
            }
            assert_eq!(r.state.support_found(), lock.is_some());
            assert_eq!(r.state.lock_cycle(), lock);
            assert_eq!(r.trace.cycles.iter().filter(|c| c.lock_event).count(), lock.is_some() as usize);
        }
    }
    // σ = 1 with a d = 8 basis stays far from locking within 4000 steps
    let r = run(Algorithm::Apsee, ActionSetGeometry::euclidean_ball(d, 1.0).unwrap(), &theta, 3, 1.0, 4_000, 11);
    assert!(r.trace.steps.iter().all(|s| s.phase == Phase::Explore));
}

#[test]
fn lock_replays_from_cycle_records() {
    let d = 10;
    let theta = make_gap_controlled_theta(d, 3, 0.3, GapStyle::Standard, 2.0, 4).unwrap();
    for seed in 0..10 {
        let ball = ActionSetGeometry::euclidean_ball(d, 1.0).unwrap();
        let r = run_with(BasisKind::Standard, Algorithm::Apsee, ball, &theta, 3, 0.05, 20_000, seed);
        let lock = r.trace.lock_cycle().expect("low noise locks");
        for rec in &r.trace.cycles {
            let (gap, support) = empirical_sort_gap(&rec.theta_hat, 3).unwrap();
            assert_eq!(gap, rec.gap);
            if rec.cycle < lock {
                assert!(gap <= 2.0 * rec.eps);
                assert!(!rec.locked);
            } else if rec.cycle == lock {
                assert!(gap > 2.0 * rec.eps);
                assert_eq!(&support, r.state.estimated_support().unwrap());
            }
            if rec.cycle >= lock {
                assert_eq!(&rec.estimate, r.state.estimated_support().unwrap());
                let x = r.state.estimated_support().map(|s| ActionSetGeometry::euclidean_ball(d, 1.0).unwrap().best_action_on_support(s, &rec.theta_hat).unwrap());
                assert_eq!(rec.exploit_action, x);
            }
        }
        assert_eq!(r.state.estimated_support().unwrap(), &exact_top_h(&ActionSetGeometry::euclidean_ball(d, 1.0).unwrap(), &theta, 3).unwrap().support);
    }
}

#[test]
fn greedy_lock_matches_greedy_on_truth() {
    let d = 8;
    let mut locked = 0;
    for seed in 0..8 {
        let g = ActionSetGeometry::ellipsoid(random_spd(d, 0.5, &mut rng(100 + seed))).unwrap();
        let theta = gaussian(d, &mut rng(200 + seed));
        let truth = greedy_select(&g, &theta, 3).unwrap().support(d).unwrap();
        let l = g.max_norm();
        let r = run(Algorithm::ApseeG, g, &theta, 3, 0.005, 30_000, seed);
        if let Some(lock) = r.trace.lock_cycle() {
            let rec = r.trace.cycle_record(lock).unwrap();
            assert!(rec.gap > 2.0 * l * rec.eps);
            assert_eq!(r.state.estimated_support().unwrap(), &truth, "seed {seed}");
            locked += 1;
        }
    }
    println!("{locked}/8 greedy runs locked");
    assert!(locked > 0);
}

#[test]
fn zero_noise_hypercube_greedy_locks_immediately() {
    let d = 8;
    let g = ActionSetGeometry::unit_hypercube(d).unwrap();
    let theta = Vector::from_row_slice(&[0.3, -0.2, 0.8, 0.1, -0.6, 0.45, 0.05, 0.7]);
    let r = run(Algorithm::ApseeG, g.clone(), &theta, 3, 0.0, 500, 0);
    assert_eq!(r.trace.lock_cycle(), Some(1));
    let opt = brute_force(&g, &theta, 3).unwrap();
    assert_eq!(r.state.estimated_support().unwrap(), &opt.support);
    for s in r.trace.steps.iter().filter(|s| s.phase == Phase::Exploit) {
        assert!((s.mean_reward - opt.value).abs() <= 1e-12);
    }
}

#[test]
fn zero_noise_ball_plays_the_optimum() {
    let d = 10;
    let g = ActionSetGeometry::euclidean_ball(d, 1.0).unwrap();
    for seed in 0..5 {
        let theta = gaussian(d, &mut rng(seed));
        let opt = brute_force(&g, &theta, 4).unwrap();
        let r = run(Algorithm::Apsee, g.clone(), &theta, 4, 0.0, 2_000, seed);
        assert_eq!(r.trace.lock_cycle(), Some(1));
        assert_eq!(r.state.estimated_support().unwrap(), &opt.support);
        let exploit: Vec<_> = r.trace.steps.iter().filter(|s| s.phase == Phase::Exploit).collect();
        assert!(!exploit.is_empty());
        assert!(exploit.iter().all(|s| (opt.value - s.mean_reward).abs() <= 1e-12));
    }
}

#[test]
fn played_actions_are_feasible_and_sparse() {
    let d = 7;
    for mode in MODES {
        for (gi, g) in geometries(d, 2).into_iter().enumerate() {
            let theta = gaussian(d, &mut rng(50 + gi as u64));
            let r = run(mode, g.clone(), &theta, 3, 0.1, 2_500, 5);
            for t in 1..=r.trace.horizon() {
                let x = r.trace.action(t).unwrap();
                assert!(g.membership(&x).unwrap());
                assert!(support_size(&x) <= 3);
                assert!((theta.dot(&x) - r.trace.steps[t as usize - 1].mean_reward).abs() <= 1e-12);
                let s = r.trace.support(t).unwrap();
                assert!(s.len() <= 3);
                assert!((0..d).all(|i| x[i] == 0.0 || s.contains(&i)));
            }
        }
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let d = 6;
    for mode in MODES {
        let theta = gaussian(d, &mut rng(9));
        let a = run(mode, ActionSetGeometry::l1_ball(d, 1.0).unwrap(), &theta, 2, 0.3, 1_500, 4);
        let b = run(mode, ActionSetGeometry::l1_ball(d, 1.0).unwrap(), &theta, 2, 0.3, 1_500, 4);
        let c = run(mode, ActionSetGeometry::l1_ball(d, 1.0).unwrap(), &theta, 2, 0.3, 1_500, 5);
        assert_eq!(a.trace, b.trace);
        assert_ne!(a.trace, c.trace);
    }
}

#[test]
fn truncation_stops_mid_cycle() {
    let d = 5;
    let theta = gaussian(d, &mut rng(1));
    for horizon in [1, 3, 5, 7, 12] {
        let r = run(Algorithm::Apsee, ActionSetGeometry::euclidean_ball(d, 1.0).unwrap(), &theta, 2, 0.5, horizon, 0);
        assert_eq!(r.trace.horizon(), horizon);
        assert_eq!(r.trace.cycles.len() as u64, horizon / d as u64);
        assert_eq!(r.state.ols().cycle(), horizon / d as u64);
    }
}

#[test]
fn compact_exploits_every_cycle() {
    let d = 6;
    let g = ActionSetGeometry::unit_hypercube(d).unwrap();
    let theta = gaussian(d, &mut rng(2));
    let r = run(Algorithm::ApseeGCompact, g.clone(), &theta, 2, 0.5, 5_000, 3);
    assert_eq!(r.trace.lock_cycle(), None);
    for rec in &r.trace.cycles {
        assert!(rec.locked);
        assert_eq!(rec.exploit_len, rec.cycle.isqrt());
        let greedy = greedy_select(&g, &rec.theta_hat, 2).unwrap().support(d).unwrap();
        assert_eq!(rec.exploit_support.as_ref(), Some(&greedy));
    }
}

#[test]
fn lock_cycle_within_warmup_bound() {
    let (d, h, sigma, delta_min) = (10, 3, 0.1, 0.3);
    let g = ActionSetGeometry::euclidean_ball(d, 1.0).unwrap();
    let mut locks = Vec::new();
    let mut h1 = 0.0;
    for seed in 0..20 {
        let theta = make_gap_controlled_theta(d, h, delta_min, GapStyle::Standard, 2.0, 300 + seed).unwrap();
        let r = run_with(BasisKind::Standard, Algorithm::Apsee, g.clone(), &theta, h, sigma, 100_000, seed);
        h1 = r.state.basis().h1();
        let lock = r.trace.lock_cycle().expect("locks within the horizon");
        assert_eq!(r.state.estimated_support().unwrap(), &exact_top_h(&g, &theta, h).unwrap().support);
        locks.push(lock as f64);
    }
    let c0 = warmup_bound_c0(h1, delta_min, d, 0.1).unwrap();
    let mean = locks.iter().sum::<f64>() / locks.len() as f64;
    println!("mean lock cycle {mean}, C0 {c0}");
    assert!(mean <= c0);
    assert!(locks.iter().all(|&l| l <= c0));
}

#[test]
fn stale_selection_is_rejected() {
    let d = 4;
    let geom = Arc::new(ActionSetGeometry::euclidean_ball(d, 1.0).unwrap());
    let basis = Arc::new(make_basis(BasisKind::Standard, &geom, 2, 0.1, 0).unwrap());
    let mut state = AlgorithmState::new(Algorithm::Apsee, geom, basis, 2, 0.1).unwrap();
    let first = state.select_action();
    state.observe(&first, 0.0).unwrap();
    assert!(state.observe(&first, 0.0).is_err());
}
