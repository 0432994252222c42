//! Fast self-checks of the oracles and the algorithm plumbing, shared by the
//! `verify` subcommand.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algorithms::{run_algorithm, Algorithm, AlgorithmState, Environment};
use crate::error::Result;
use crate::estimation::{make_basis, BasisKind, OlsState};
use crate::geometry::{ActionSetGeometry, SupportSet};
use crate::linalg::{random_spd, Matrix, Vector};
use crate::oracles::{brute_force, exact_top_h, greedy_factor, greedy_select, rank_by_magnitude};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn random_support(d: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = rng.random_range(1..=d);
    let mut idx: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    idx.truncate(k);
    idx
}

fn top_h_matches_brute_force() -> Result<Check> {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ActionSetGeometry::euclidean_ball(8, 1.0)?;
        let theta = gaussian(8, &mut rng);
        let a = exact_top_h(&g, &theta, 3)?.value;
        let b = brute_force(&g, &theta, 3)?.value;
        worst = worst.max((a - b).abs());
    }
    Ok(Check {
        name: "top-H equals brute force on the ball",
        passed: worst <= 1e-12,
        detail: format!("max diff {worst:e}"),
    })
}

fn ellipsoid_reduces_to_ball() -> Result<Check> {
    let mut worst = 0.0f64;
    let radius = 1.7;
    let ball = ActionSetGeometry::euclidean_ball(6, radius)?;
    let ell = ActionSetGeometry::ellipsoid(Matrix::identity(6, 6) / (radius * radius))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let theta = gaussian(6, &mut rng);
        let s = random_support(6, &mut rng);
        worst = worst
            .max((ball.value_on_indices(&s, &theta)? - ell.value_on_indices(&s, &theta)?).abs());
    }
    Ok(Check {
        name: "scaled-identity ellipsoid equals ball",
        passed: worst <= 1e-10,
        detail: format!("max diff {worst:e}"),
    })
}

fn greedy_guarantee_on_ellipsoids() -> Result<Check> {
    let mut worst = f64::INFINITY;
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let a = random_spd(6, 0.2, &mut rng);
        let g = ActionSetGeometry::ellipsoid(a)?;
        let (lmin, _) = g.ellipsoid_spectrum().expect("ellipsoid spectrum");
        let theta = gaussian(6, &mut rng);
        let opt = brute_force(&g, &theta, 3)?.value;
        let greedy = greedy_select(&g, &theta, 3)?.value;
        worst = worst.min(greedy - greedy_factor(lmin) * opt);
    }
    Ok(Check {
        name: "greedy meets the (1 - e^-lambda_min) guarantee",
        passed: worst >= -1e-9,
        detail: format!("min slack {worst:e}"),
    })
}

fn greedy_exact_on_hypercube() -> Result<Check> {
    let mut worst = 0.0f64;
    let g = ActionSetGeometry::unit_hypercube(8)?;
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let theta = gaussian(8, &mut rng);
        worst = worst
            .max((greedy_select(&g, &theta, 3)?.value - brute_force(&g, &theta, 3)?.value).abs());
    }
    Ok(Check {
        name: "greedy is exact on the hypercube",
        passed: worst <= 1e-12,
        detail: format!("max diff {worst:e}"),
    })
}

fn value_is_lipschitz() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let geoms = [
        ActionSetGeometry::euclidean_ball(5, 2.0)?,
        ActionSetGeometry::ellipsoid(random_spd(5, 0.3, &mut rng))?,
        ActionSetGeometry::lp_ball(5, 1.5, 1.0)?,
        ActionSetGeometry::l1_ball(5, 1.0)?,
        ActionSetGeometry::unit_hypercube(5)?,
    ];
    let mut worst = f64::NEG_INFINITY;
    for g in &geoms {
        for _ in 0..40 {
            let s = random_support(5, &mut rng);
            let (a, b) = (gaussian(5, &mut rng), gaussian(5, &mut rng));
            let lhs = (g.value_on_indices(&s, &a)? - g.value_on_indices(&s, &b)?).abs();
            worst = worst.max(lhs - g.max_norm() * (&a - &b).norm());
        }
    }
    Ok(Check {
        name: "value function is L_max-Lipschitz",
        passed: worst <= 1e-9,
        detail: format!("max excess {worst:e}"),
    })
}

fn best_actions_feasible() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let geoms = [
        ActionSetGeometry::euclidean_ball(6, 1.0)?,
        ActionSetGeometry::ellipsoid(random_spd(6, 0.2, &mut rng))?,
        ActionSetGeometry::lp_ball(6, 1.3, 1.0)?,
        ActionSetGeometry::l1_ball(6, 1.0)?,
        ActionSetGeometry::hypercube(vec![-0.5; 6], vec![2.0; 6])?,
    ];
    let mut failures = 0;
    let mut worst = 0.0f64;
    for g in &geoms {
        for _ in 0..40 {
            let s = random_support(6, &mut rng);
            let theta = gaussian(6, &mut rng);
            let x = g.best_action_on_indices(&s, &theta)?;
            if !g.membership(&x)? || (0..6).any(|i| x[i] != 0.0 && !s.contains(&i)) {
                failures += 1;
            }
            worst = worst.max((theta.dot(&x) - g.value_on_indices(&s, &theta)?).abs());
        }
    }
    Ok(Check {
        name: "best actions are feasible and attain the value",
        passed: failures == 0 && worst <= 1e-9,
        detail: format!("{failures} infeasible, max value gap {worst:e}"),
    })
}

fn noiseless_ols_is_exact() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = ActionSetGeometry::ellipsoid(random_spd(6, 0.3, &mut rng))?;
    let theta = gaussian(6, &mut rng);
    let mut worst = 0.0f64;
    for kind in [
        BasisKind::Standard,
        BasisKind::GaussianOrthogonal,
        BasisKind::UniformOrthogonal,
    ] {
        let basis = make_basis(kind, &g, 3, 0.0, 9)?;
        let rewards: Vec<f64> = basis.actions().iter().map(|b| theta.dot(b)).collect();
        let mut ols = OlsState::new(6);
        ols.update(&basis, &rewards)?;
        worst = worst.max((ols.theta_hat().expect("estimate") - &theta).amax());
    }
    Ok(Check {
        name: "noiseless least squares recovers theta",
        passed: worst <= 1e-9,
        detail: format!("max error {worst:e}"),
    })
}

fn zero_noise_locks_first_cycle() -> Result<Check> {
    let g = Arc::new(ActionSetGeometry::euclidean_ball(8, 1.0)?);
    let theta = Vector::from_row_slice(&[0.1, -0.7, 0.05, 0.5, -0.3, 0.0, 0.9, 0.2]);
    let basis = Arc::new(make_basis(BasisKind::Standard, &g, 3, 0.0, 0)?);
    let mut state = AlgorithmState::new(Algorithm::Apsee, g.clone(), basis, 3, 0.1)?;
    let mut env = Environment::new(theta.clone(), 0.0, g, 0)?;
    let trace = run_algorithm(&mut env, &mut state, 100)?;
    let mut top = rank_by_magnitude(&theta);
    top.truncate(3);
    let expected = SupportSet::new(top, 3, 8)?;
    let passed = trace.lock_cycle() == Some(1) && state.estimated_support() == Some(&expected);
    Ok(Check {
        name: "zero noise locks the true support in cycle 1",
        passed,
        detail: format!("lock cycle {:?}", trace.lock_cycle()),
    })
}

fn runs_are_deterministic() -> Result<Check> {
    let run = || -> Result<_> {
        let g = Arc::new(ActionSetGeometry::unit_hypercube(6)?);
        let theta = Vector::from_row_slice(&[0.3, -0.2, 0.8, 0.1, -0.6, 0.4]);
        let basis = Arc::new(make_basis(BasisKind::GaussianOrthogonal, &g, 2, 0.5, 3)?);
        let mut state = AlgorithmState::new(Algorithm::ApseeGCompact, g.clone(), basis, 2, 0.1)?;
        let mut env = Environment::new(theta, 0.5, g, 11)?;
        run_algorithm(&mut env, &mut state, 500)
    };
    let (a, b) = (run()?, run()?);
    Ok(Check {
        name: "fixed seed gives an identical trace",
        passed: a == b,
        detail: format!("{} steps", a.steps.len()),
    })
}

/// Runs every check; an `Err` means a check could not be evaluated at all.
pub fn run_checks() -> Result<Vec<Check>> {
    let checks: [fn() -> Result<Check>; 9] = [
        top_h_matches_brute_force,
        ellipsoid_reduces_to_ball,
        greedy_guarantee_on_ellipsoids,
        greedy_exact_on_hypercube,
        value_is_lipschitz,
        best_actions_feasible,
        noiseless_ols_is_exact,
        zero_noise_locks_first_cycle,
        runs_are_deterministic,
    ];
    checks.iter().map(|f| f()).collect()
}
