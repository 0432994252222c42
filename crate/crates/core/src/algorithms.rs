//! Simulated bandit environment and the phased exploration/exploitation
//! algorithms, written as resumable state machines.
//!
//! Every cycle `c` starts with `d` exploration steps that play the basis
//! actions in order. The least-squares estimate is refreshed at the end of
//! that block; the support test then decides whether the estimated support
//! can be locked. Once a support is available the cycle continues with an
//! exploitation block of `m_c` steps:
//!
//! | mode            | support test                          | `m_c`     |
//! |-----------------|---------------------------------------|-----------|
//! | `Apsee`         | sorted gap `Δ′_c > 2ε_c`              | `c`       |
//! | `ApseeG`        | greedy gap `Δ_c^G > 2·L_X·ε_c`        | `c`       |
//! | `ApseeGCompact` | none, greedy support every cycle      | `⌊√c⌋`    |
//!
//! Exploration never stops, and after locking the exploit action is still
//! recomputed every cycle from the newest estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimation::{empirical_sort_gap, ExplorationBasis, OlsState};
use crate::geometry::{ActionSetGeometry, SupportSet};
use crate::linalg::Vector;
use crate::oracles::greedy_select;

/// Linear reward environment `Y = θ*ᵀx + η`, `η ~ N(0, σ²)`.
///
/// Noise comes from a ChaCha8 stream seeded with the trial seed, so a seed
/// fixes the whole reward sequence on every platform.
#[derive(Debug, Clone)]
pub struct Environment {
    theta_star: Vector,
    sigma: f64,
    geom: Arc<ActionSetGeometry>,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(
        theta_star: Vector,
        sigma: f64,
        geom: Arc<ActionSetGeometry>,
        seed: u64,
    ) -> Result<Self> {
        geom.check_vector(&theta_star)?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be finite and ≥ 0, got {sigma}"
            )));
        }
        Ok(Self {
            theta_star,
            sigma,
            geom,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn geometry(&self) -> &ActionSetGeometry {
        &self.geom
    }

    pub fn mean_reward(&self, x: &Vector) -> f64 {
        self.theta_star.dot(x)
    }

    /// Plays `x` and returns a noisy reward. One normal draw is consumed
    /// per call even when `σ = 0`.
    pub fn pull(&mut self, x: &Vector) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.mean_reward(x) + self.sigma * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Apsee,
    ApseeG,
    ApseeGCompact,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Apsee => "apsee",
            Algorithm::ApseeG => "apsee-g",
            Algorithm::ApseeGCompact => "apsee-g-compact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "apsee" => Ok(Algorithm::Apsee),
            "apsee-g" => Ok(Algorithm::ApseeG),
            "apsee-g-compact" | "compact" => Ok(Algorithm::ApseeGCompact),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Explore,
    Exploit,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
        }
    }
}

/// Where a played action came from; resolved against a [`RunTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSource {
    /// Basis action `b_k`.
    Basis(usize),
    /// Exploit action of the given cycle.
    Exploit(u64),
    /// The fixed action of a non-adaptive policy.
    Fixed,
}

/// An action handed out by a policy, to be echoed back to [`Policy::observe`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub cycle: u64,
    pub phase: Phase,
    /// Basis index during exploration, exploit step during exploitation.
    pub slot: u64,
    pub source: ActionSource,
    pub action: Vector,
    pub support: SupportSet,
}

/// What happened at the end of one exploration block.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub theta_hat: Vector,
    pub eps: f64,
    /// `Δ′_c` for APSEE, `Δ_c^G` for the greedy modes.
    pub gap: f64,
    /// Support locked after this cycle's test (always `true` in compact mode).
    pub locked: bool,
    /// The lock happened in this cycle.
    pub lock_event: bool,
    /// Locked support, or the current empirical support before locking.
    pub estimate: SupportSet,
    pub exploit_support: Option<SupportSet>,
    pub exploit_action: Option<Vector>,
    pub exploit_len: u64,
}

/// A sequential decision rule driven by [`run_horizon`].
pub trait Policy {
    fn select_action(&self) -> Selection;

    /// Feeds back the reward for `selection`; returns the cycle summary
    /// when an exploration block completes.
    fn observe(&mut self, selection: &Selection, reward: f64) -> Result<Option<CycleRecord>>;
}

/// Per-run state of APSEE, APSEE-G or the compact variant.
#[derive(Debug, Clone)]
pub struct AlgorithmState {
    mode: Algorithm,
    geom: Arc<ActionSetGeometry>,
    basis: Arc<ExplorationBasis>,
    sparsity: usize,
    delta: f64,
    lipschitz: f64,
    cycle: u64,
    phase: Phase,
    explore_step: usize,
    exploit_step: u64,
    exploit_len: u64,
    ols: OlsState,
    cycle_rewards: Vec<f64>,
    support_found: bool,
    s_est: Option<SupportSet>,
    exploit_action: Option<Vector>,
    exploit_support: Option<SupportSet>,
    lock_cycle: Option<u64>,
    basis_supports: Vec<SupportSet>,
}

impl AlgorithmState {
    pub fn new(
        mode: Algorithm,
        geom: Arc<ActionSetGeometry>,
        basis: Arc<ExplorationBasis>,
        sparsity: usize,
        delta: f64,
    ) -> Result<Self> {
        let d = geom.dim();
        if basis.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: basis.dim(),
            });
        }
        if sparsity == 0 || sparsity > d {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sparsity} must lie in [1, {d}]"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence δ must lie in (0, 1), got {delta}"
            )));
        }
        let basis_supports = basis
            .actions()
            .iter()
            .map(|b| {
                let idx: Vec<usize> = (0..d).filter(|&i| b[i] != 0.0).collect();
                SupportSet::new(idx, sparsity, d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode,
            lipschitz: geom.max_norm(),
            geom,
            basis,
            sparsity,
            delta,
            cycle: 1,
            phase: Phase::Explore,
            explore_step: 0,
            exploit_step: 0,
            exploit_len: 0,
            ols: OlsState::new(d),
            cycle_rewards: vec![0.0; d],
            support_found: false,
            s_est: None,
            exploit_action: None,
            exploit_support: None,
            lock_cycle: None,
            basis_supports,
        })
    }

    pub fn mode(&self) -> Algorithm {
        self.mode
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn ols(&self) -> &OlsState {
        &self.ols
    }

    pub fn basis(&self) -> &ExplorationBasis {
        &self.basis
    }

    pub fn support_found(&self) -> bool {
        self.support_found
    }

    pub fn estimated_support(&self) -> Option<&SupportSet> {
        self.s_est.as_ref()
    }

    pub fn lock_cycle(&self) -> Option<u64> {
        self.lock_cycle
    }

    /// `L_X` used by the greedy stopping test.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Exploitation length `m_c` for cycle `c` once exploitation is active.
    pub fn exploit_schedule(mode: Algorithm, cycle: u64) -> u64 {
        match mode {
            Algorithm::Apsee | Algorithm::ApseeG => cycle,
            Algorithm::ApseeGCompact => cycle.isqrt(),
        }
    }

    fn current_slot(&self) -> u64 {
        match self.phase {
            Phase::Explore => self.explore_step as u64,
            Phase::Exploit => self.exploit_step,
        }
    }

    fn finish_exploration(&mut self) -> Result<CycleRecord> {
        self.ols.update(&self.basis, &self.cycle_rewards)?;
        let c = self.cycle;
        let d = self.geom.dim();
        let theta_hat = self.ols.theta_hat().expect("estimate after update").clone();
        let eps = self.basis.error_radius(c, self.delta);

        let (gap, candidate) = match self.mode {
            Algorithm::Apsee => {
                if self.sparsity < d {
                    empirical_sort_gap(&theta_hat, self.sparsity)?
                } else {
                    (f64::INFINITY, SupportSet::new((0..d).collect(), d, d)?)
                }
            }
            Algorithm::ApseeG | Algorithm::ApseeGCompact => {
                let trace = greedy_select(&self.geom, &theta_hat, self.sparsity)?;
                let support = SupportSet::new(trace.selected, self.sparsity, d)?;
                (trace.min_gap, support)
            }
        };

        let mut lock_event = false;
        match self.mode {
            Algorithm::Apsee | Algorithm::ApseeG if !self.support_found => {
                let threshold = match self.mode {
                    Algorithm::Apsee => 2.0 * eps,
                    _ => 2.0 * self.lipschitz * eps,
                };
                if gap > threshold {
                    self.support_found = true;
                    self.s_est = Some(candidate.clone());
                    self.lock_cycle = Some(c);
                    lock_event = true;
                }
            }
            Algorithm::ApseeGCompact => {
                self.s_est = Some(candidate.clone());
            }
            _ => {}
        }

        let exploiting = self.mode == Algorithm::ApseeGCompact || self.support_found;
        if exploiting {
            let support = self
                .s_est
                .clone()
                .expect("support available when exploiting");
            self.exploit_action = Some(self.geom.best_action_on_support(&support, &theta_hat)?);
            self.exploit_support = Some(support);
            self.exploit_len = Self::exploit_schedule(self.mode, c);
        } else {
            self.exploit_action = None;
            self.exploit_support = None;
            self.exploit_len = 0;
        }

        let estimate = if self.support_found {
            self.s_est.clone().expect("locked support")
        } else {
            candidate
        };
        Ok(CycleRecord {
            cycle: c,
            theta_hat,
            eps,
            gap,
            locked: self.support_found || self.mode == Algorithm::ApseeGCompact,
            lock_event,
            estimate,
            exploit_support: self.exploit_support.clone(),
            exploit_action: self.exploit_action.clone(),
            exploit_len: self.exploit_len,
        })
    }

    fn next_cycle(&mut self) {
        self.cycle += 1;
        self.phase = Phase::Explore;
        self.explore_step = 0;
        self.exploit_step = 0;
    }
}

impl Policy for AlgorithmState {
    fn select_action(&self) -> Selection {
        match self.phase {
            Phase::Explore => {
                let k = self.explore_step;
                Selection {
                    cycle: self.cycle,
                    phase: Phase::Explore,
                    slot: k as u64,
                    source: ActionSource::Basis(k),
                    action: self.basis.actions()[k].clone(),
                    support: self.basis_supports[k].clone(),
                }
            }
            Phase::Exploit => Selection {
                cycle: self.cycle,
                phase: Phase::Exploit,
                slot: self.exploit_step,
                source: ActionSource::Exploit(self.cycle),
                action: self
                    .exploit_action
                    .clone()
                    .expect("exploit action while exploiting"),
                support: self
                    .exploit_support
                    .clone()
                    .expect("exploit support while exploiting"),
            },
        }
    }

    fn observe(&mut self, selection: &Selection, reward: f64) -> Result<Option<CycleRecord>> {
        if selection.cycle != self.cycle
            || selection.phase != self.phase
            || selection.slot != self.current_slot()
        {
            return Err(Error::NoPendingAction);
        }
        match self.phase {
            Phase::Explore => {
                self.cycle_rewards[self.explore_step] = reward;
                self.explore_step += 1;
                if self.explore_step < self.geom.dim() {
                    return Ok(None);
                }
                let record = self.finish_exploration()?;
                if self.exploit_len > 0 {
                    self.phase = Phase::Exploit;
                    self.exploit_step = 0;
                } else {
                    self.next_cycle();
                }
                Ok(Some(record))
            }
            Phase::Exploit => {
                self.exploit_step += 1;
                if self.exploit_step >= self.exploit_len {
                    self.next_cycle();
                }
                Ok(None)
            }
        }
    }
}

/// One played round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based time index.
    pub t: u64,
    pub cycle: u64,
    pub phase: Phase,
    pub source: ActionSource,
    /// `θ*ᵀx_t`.
    pub mean_reward: f64,
    pub reward: f64,
}

/// Full record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub steps: Vec<StepRecord>,
    pub cycles: Vec<CycleRecord>,
    pub basis_actions: Vec<Vector>,
    pub fixed_action: Option<Vector>,
}

impl RunTrace {
    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    /// First cycle at which the support was locked.
    pub fn lock_cycle(&self) -> Option<u64> {
        self.cycles.iter().find(|c| c.lock_event).map(|c| c.cycle)
    }

    pub fn cycle_record(&self, cycle: u64) -> Option<&CycleRecord> {
        // cycles are stored in order starting at 1
        let idx = cycle.checked_sub(1)? as usize;
        self.cycles.get(idx).filter(|r| r.cycle == cycle)
    }

    /// The action played at step `t` (1-based).
    pub fn action(&self, t: u64) -> Option<Vector> {
        let step = self.steps.get(t.checked_sub(1)? as usize)?;
        match step.source {
            ActionSource::Basis(k) => self.basis_actions.get(k).cloned(),
            ActionSource::Exploit(c) => self.cycle_record(c)?.exploit_action.clone(),
            ActionSource::Fixed => self.fixed_action.clone(),
        }
    }

    /// Support of the action played at step `t`.
    pub fn support(&self, t: u64) -> Option<Vec<usize>> {
        let step = self.steps.get(t.checked_sub(1)? as usize)?;
        match step.source {
            ActionSource::Exploit(c) => Some(
                self.cycle_record(c)?
                    .exploit_support
                    .as_ref()?
                    .indices()
                    .to_vec(),
            ),
            _ => {
                let x = self.action(t)?;
                Some((0..x.len()).filter(|&i| x[i] != 0.0).collect())
            }
        }
    }
}

/// Runs exactly `horizon` select/observe rounds; a cycle may be cut short.
pub fn run_horizon<P: Policy>(
    env: &mut Environment,
    policy: &mut P,
    basis_actions: Vec<Vector>,
    horizon: u64,
) -> Result<RunTrace> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut steps = Vec::with_capacity(horizon as usize);
    let mut cycles = Vec::new();
    let mut fixed_action = None;
    for t in 1..=horizon {
        let sel = policy.select_action();
        let reward = env.pull(&sel.action);
        let mean_reward = env.mean_reward(&sel.action);
        if sel.source == ActionSource::Fixed && fixed_action.is_none() {
            fixed_action = Some(sel.action.clone());
        }
        steps.push(StepRecord {
            t,
            cycle: sel.cycle,
            phase: sel.phase,
            source: sel.source,
            mean_reward,
            reward,
        });
        if let Some(record) = policy.observe(&sel, reward)? {
            cycles.push(record);
        }
    }
    Ok(RunTrace {
        steps,
        cycles,
        basis_actions,
        fixed_action,
    })
}

/// Convenience wrapper for an [`AlgorithmState`].
pub fn run_algorithm(
    env: &mut Environment,
    state: &mut AlgorithmState,
    horizon: u64,
) -> Result<RunTrace> {
    let basis_actions = state.basis().actions().to_vec();
    run_horizon(env, state, basis_actions, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{make_basis, BasisKind};

    fn setup(mode: Algorithm, geom: ActionSetGeometry, h: usize, sigma: f64) -> AlgorithmState {
        let geom = Arc::new(geom);
        let basis = Arc::new(make_basis(BasisKind::Standard, &geom, h, sigma, 0).unwrap());
        AlgorithmState::new(mode, geom, basis, h, 0.1).unwrap()
    }

    #[test]
    fn first_selection_is_first_basis_action() {
        let st = setup(
            Algorithm::Apsee,
            ActionSetGeometry::euclidean_ball(3, 1.0).unwrap(),
            1,
            0.5,
        );
        let sel = st.select_action();
        assert_eq!(sel.cycle, 1);
        assert_eq!(sel.slot, 0);
        assert_eq!(sel.source, ActionSource::Basis(0));
        assert_eq!(sel.action, Vector::from_row_slice(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn stale_selection_rejected() {
        let mut st = setup(
            Algorithm::Apsee,
            ActionSetGeometry::euclidean_ball(3, 1.0).unwrap(),
            1,
            0.5,
        );
        let sel = st.select_action();
        st.observe(&sel, 0.1).unwrap();
        assert_eq!(st.observe(&sel, 0.1), Err(Error::NoPendingAction));
    }

    #[test]
    fn compact_schedule() {
        let d = 4;
        let geom = ActionSetGeometry::unit_hypercube(d).unwrap();
        let mut st = setup(Algorithm::ApseeGCompact, geom.clone(), 2, 0.0);
        let mut env = Environment::new(
            Vector::from_row_slice(&[0.4, -0.1, 0.9, 0.2]),
            0.0,
            Arc::new(geom),
            1,
        )
        .unwrap();
        // cycles 1..=4 have m_c = 1, 1, 1, 2
        let total: u64 = (1..=4u64).map(|c| d as u64 + c.isqrt()).sum();
        let trace = run_algorithm(&mut env, &mut st, total).unwrap();
        let phases: Vec<(u64, Phase)> = trace.steps.iter().map(|s| (s.cycle, s.phase)).collect();
        let cycle4: Vec<Phase> = phases
            .iter()
            .filter(|(c, _)| *c == 4)
            .map(|(_, p)| *p)
            .collect();
        assert_eq!(
            cycle4,
            vec![Phase::Explore; 4]
                .into_iter()
                .chain([Phase::Exploit; 2])
                .collect::<Vec<_>>()
        );
        assert_eq!(st.cycle(), 5);
        assert_eq!(trace.cycles.len(), 4);
    }

    #[test]
    fn apsee_without_lock_only_explores() {
        // near-tied magnitudes with heavy noise: no lock in a short run
        let geom = ActionSetGeometry::euclidean_ball(5, 1.0).unwrap();
        let mut st = setup(Algorithm::Apsee, geom.clone(), 2, 1.0);
        let theta = Vector::from_row_slice(&[0.5, 0.49, 0.48, 0.1, 0.0]);
        let mut env = Environment::new(theta, 1.0, Arc::new(geom), 3).unwrap();
        let trace = run_algorithm(&mut env, &mut st, 200).unwrap();
        assert!(trace.lock_cycle().is_none());
        assert!(trace
            .steps
            .iter()
            .all(|s| matches!(s.source, ActionSource::Basis(_))));
    }

    #[test]
    fn noiseless_apsee_locks_immediately() {
        let geom = ActionSetGeometry::euclidean_ball(5, 1.0).unwrap();
        let mut st = setup(Algorithm::Apsee, geom.clone(), 2, 0.0);
        let theta = Vector::from_row_slice(&[0.1, -0.8, 0.05, 0.6, 0.3]);
        let mut env = Environment::new(theta, 0.0, Arc::new(geom), 3).unwrap();
        let trace = run_algorithm(&mut env, &mut st, 20).unwrap();
        assert_eq!(trace.lock_cycle(), Some(1));
        assert_eq!(st.estimated_support().unwrap().indices(), &[1, 3]);
        // cycle 1: 5 explore + 1 exploit, cycle 2: 5 explore + 2 exploit, ...
        assert_eq!(trace.steps[5].phase, Phase::Exploit);
        assert_eq!(trace.steps[6].cycle, 2);
    }

    #[test]
    fn truncated_horizon() {
        let geom = ActionSetGeometry::euclidean_ball(6, 1.0).unwrap();
        let mut st = setup(Algorithm::Apsee, geom.clone(), 2, 0.5);
        let mut env =
            Environment::new(Vector::from_element(6, 0.3), 0.5, Arc::new(geom), 3).unwrap();
        let trace = run_algorithm(&mut env, &mut st, 4).unwrap();
        assert_eq!(trace.steps.len(), 4);
        assert!(trace.cycles.is_empty());
        assert!(run_algorithm(&mut env, &mut st, 0).is_err());
    }

    #[test]
    fn trace_resolves_actions() {
        let geom = ActionSetGeometry::euclidean_ball(3, 1.0).unwrap();
        let mut st = setup(Algorithm::Apsee, geom.clone(), 1, 0.0);
        let theta = Vector::from_row_slice(&[0.2, -0.9, 0.1]);
        let mut env = Environment::new(theta, 0.0, Arc::new(geom), 0).unwrap();
        let trace = run_algorithm(&mut env, &mut st, 10).unwrap();
        assert_eq!(
            trace.action(1).unwrap(),
            Vector::from_row_slice(&[1.0, 0.0, 0.0])
        );
        assert_eq!(
            trace.action(4).unwrap(),
            Vector::from_row_slice(&[0.0, -1.0, 0.0])
        );
        assert_eq!(trace.support(4).unwrap(), vec![1]);
        assert!(trace.action(11).is_none());
    }

    #[test]
    fn parse_modes() {
        assert_eq!("APSEE_G".parse::<Algorithm>().unwrap(), Algorithm::ApseeG);
        assert_eq!(
            "apsee-g-compact".parse::<Algorithm>().unwrap(),
            Algorithm::ApseeGCompact
        );
        assert!("ucb".parse::<Algorithm>().is_err());
    }
}
