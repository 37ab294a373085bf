//! The learner side: reward environment, per-arm estimates, and the two
//! policies (epsilon-greedy over the action-set graph, and a confidence
//! -bound baseline).
//!
//! Rewards are expected shifts `d · delta` plus Gaussian noise, observed per
//! arm. The degree vector stays inside [`RewardEnv`]; policies only ever see
//! their own estimates. Lower reward is better throughout: the learner tries
//! to move mass away from high-degree targets, so selection rules pick
//! minima and stop at the first non-negative candidate.

use std::fmt;
use std::io::Write;

use rand::rngs::StdRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};

use crate::action::{is_valid, BaseAction, SuperAction};
use crate::asg::ActionSetGraph;
use crate::bounds::alpha_regret;
use crate::scalar::Scalar;

/// Owns the hidden degree vector and the noise stream. Policies interact
/// with it only through noisy per-arm observations.
#[derive(Debug, Clone)]
pub struct RewardEnv<F: Scalar> {
    degrees: Vec<F>,
    sigma: F,
    rng: StdRng,
}

impl<F: Scalar> RewardEnv<F> {
    pub fn new(degrees: Vec<F>, sigma: F, seed: u64) -> Self {
        assert!(sigma >= F::zero(), "noise scale must be non-negative");
        RewardEnv {
            degrees,
            sigma,
            rng: StdRng::seed_from_u64(seed),
        }
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn component_count(&self) -> usize {
        self.degrees.len()
    }

    /// Noise-free expected reward of a combination. Environment-side
    /// bookkeeping for traces; not visible to policies.
    pub fn true_reward(&self, sa: &SuperAction<F>) -> F {
        sa.dot(&self.degrees)
    }

    pub(crate) fn arm_mean(&self, arm: &BaseAction<F>) -> F {
        arm.dot(&self.degrees)
    }

    /// One noisy reward per member arm, in ascending arm-id order (the
    /// order `sa.arm_ids` is kept in). Noise is independent per arm; each
    /// arm appears once, so it is observed at most once per round. Joint
    /// validity of `sa` is the caller's contract (the run loops assert it).
    pub fn observe(&mut self, sa: &SuperAction<F>, arms: &[BaseAction<F>]) -> Vec<(u32, F)> {
        sa.arm_ids
            .iter()
            .map(|&i| {
                let noise = self.sigma * F::standard_normal(&mut self.rng);
                (i, self.arm_mean(&arms[i as usize]) + noise)
            })
            .collect()
    }

    /// One noisy sample of each arm's true mean, for seeding estimators
    /// with an imperfect prior.
    pub fn noisy_means(&mut self, arms: &[BaseAction<F>], prior_sigma: F) -> Vec<F> {
        arms.iter()
            .map(|a| self.arm_mean(a) + prior_sigma * F::standard_normal(&mut self.rng))
            .collect()
    }
}

/// How a new observation folds into the running estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Divide by the arm's own pull count: the plain sample mean. Default.
    ArmMean,
    /// Divide by the global round index instead. Biased towards zero for
    /// rarely pulled arms; kept for fidelity experiments.
    LiteralRound,
}

/// Per-arm reward estimates and pull counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState<F: Scalar> {
    mu: Vec<F>,
    pulls: Vec<u32>,
}

impl<F: Scalar> EstimatorState<F> {
    /// Fresh state: every estimate 0, nothing pulled.
    pub fn new(arm_count: usize) -> Self {
        EstimatorState {
            mu: vec![F::zero(); arm_count],
            pulls: vec![0; arm_count],
        }
    }

    /// Start from externally supplied estimates (still zero pulls); the
    /// first real observation of an arm replaces its prior.
    pub fn from_prior(mu: Vec<F>) -> Self {
        let pulls = vec![0; mu.len()];
        EstimatorState { mu, pulls }
    }

    pub fn arm_count(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, arm: u32) -> F {
        self.mu[arm as usize]
    }

    pub fn pulls(&self, arm: u32) -> u32 {
        self.pulls[arm as usize]
    }

    /// Folds one round's observations in. `round` is the 1-based round
    /// index, used only by [`UpdateRule::LiteralRound`].
    pub fn update(&mut self, rewards: &[(u32, F)], round: usize, rule: UpdateRule) {
        debug_assert!(round >= 1);
        for &(arm, reward) in rewards {
            let i = arm as usize;
            self.pulls[i] += 1;
            let n = match rule {
                UpdateRule::ArmMean => F::from_u32(self.pulls[i]).unwrap(),
                UpdateRule::LiteralRound => F::from_usize(round).unwrap(),
            };
            self.mu[i] = ((n - F::one()) * self.mu[i] + reward) / n;
        }
    }
}

/// Exploration probability at round `t` (1-based): `min(1, epsilon0/sqrt(t))`.
pub fn epsilon_schedule<F: Scalar>(t: usize, epsilon0: F) -> F {
    assert!(t >= 1, "rounds are 1-based");
    (epsilon0 / F::from_usize(t).unwrap().sqrt()).min(F::one())
}

/// Exploration move: one uniformly random arm, extended greedily by its
/// first `m` graph neighbors (scan order), keeping only arms that leave the
/// accumulated combination admissible. Work per call is O(m) neighbor
/// checks.
pub fn explore<F: Scalar>(asg: &ActionSetGraph<F>, rng: &mut StdRng) -> SuperAction<F> {
    let m = asg.component_count();
    let u = rng.gen_range(0..asg.arm_count() as u32);
    let mut sa = SuperAction::empty(m);
    sa.add(asg.arm(u));
    for &v in &asg.neighbors_upto(u, m) {
        let arm = asg.arm(v);
        if sa.can_add(asg.beta0(), arm) {
            sa.add(arm);
        }
    }
    sa
}

/// Number of arms the greedy policies consider per round.
pub fn pool_size(component_count: usize, arm_count: usize) -> usize {
    component_count.isqrt().min(arm_count)
}

/// Exploitation move: draw a pool of `floor(sqrt(m))` distinct arms, then
/// greedily take estimated-reward minima (ties to the smaller id) while
/// they are non-positive and keep the combination admissible. Stops at the
/// first positive estimate: everything after it would raise the reward.
/// May return the empty combination.
pub fn exploit<F: Scalar>(
    asg: &ActionSetGraph<F>,
    est: &EstimatorState<F>,
    rng: &mut StdRng,
) -> SuperAction<F> {
    let m = asg.component_count();
    let picked = index::sample(rng, asg.arm_count(), pool_size(m, asg.arm_count()));
    let mut pool: Vec<u32> = picked.iter().map(|i| i as u32).collect();
    pool.sort_by(|&a, &b| {
        est.mu(a)
            .partial_cmp(&est.mu(b))
            .expect("estimates are finite")
            .then(a.cmp(&b))
    });
    let mut sa = SuperAction::empty(m);
    for &i in &pool {
        if est.mu(i) > F::zero() {
            break;
        }
        let arm = asg.arm(i);
        if sa.can_add(asg.beta0(), arm) {
            sa.add(arm);
        }
    }
    sa
}

/// Which side of an epsilon-greedy round produced a combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Explore,
    Exploit,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Explore => write!(f, "explore"),
            PolicyKind::Exploit => write!(f, "exploit"),
        }
    }
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<F: Scalar> {
    /// 1-based round index.
    pub round: usize,
    pub policy: PolicyKind,
    /// Ascending member ids; empty rounds are legal.
    pub arm_ids: Vec<u32>,
    /// Noisy observations aligned with `arm_ids`.
    pub per_arm_rewards: Vec<F>,
    /// Sum of the noisy per-arm observations.
    pub noisy_reward: F,
    /// Noise-free combination reward, recorded environment-side.
    pub true_reward: F,
}

/// Full run history. Cumulative series are recomputed from the per-round
/// records on demand, so they can never drift from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace<F: Scalar> {
    records: Vec<RoundRecord<F>>,
}

impl<F: Scalar> RegretTrace<F> {
    pub fn records(&self) -> &[RoundRecord<F>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn true_rewards(&self) -> Vec<F> {
        self.records.iter().map(|r| r.true_reward).collect()
    }

    pub fn cumulative_true_reward(&self) -> Vec<F> {
        let mut acc = F::zero();
        self.records
            .iter()
            .map(|r| {
                acc += r.true_reward;
                acc
            })
            .collect()
    }

    pub fn final_cumulative_true_reward(&self) -> F {
        self.true_rewards().into_iter().sum()
    }

    /// Cumulative gap to `alpha` times a reference optimum, per round.
    pub fn alpha_regret(&self, optimum_value: F, alpha: F) -> Vec<F> {
        alpha_regret(&self.true_rewards(), optimum_value, alpha)
    }

    /// One row per round:
    /// `round,policy,arm_ids,noisy_reward,true_reward,cumulative_reward,cumulative_regret`
    /// with arm ids semicolon-joined and the regret column accounted
    /// against `alpha * optimum_value`.
    pub fn write_csv<W: Write>(
        &self,
        optimum_value: F,
        alpha: F,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(
            w,
            "round,policy,arm_ids,noisy_reward,true_reward,cumulative_reward,cumulative_regret"
        )?;
        let cumulative = self.cumulative_true_reward();
        let regret = self.alpha_regret(optimum_value, alpha);
        for (rec, (cum, reg)) in self.records.iter().zip(cumulative.iter().zip(&regret)) {
            let ids = rec
                .arm_ids
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";");
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                rec.round, rec.policy, ids, rec.noisy_reward, rec.true_reward, cum, reg
            )?;
        }
        Ok(())
    }
}

/// Epsilon-greedy learner parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlagConfig<F: Scalar> {
    /// Initial exploration probability; the schedule decays it as 1/sqrt(t).
    pub epsilon0: F,
    pub rounds: usize,
    /// Seed of the policy decision stream (exploration coin, arm draws).
    pub seed: u64,
    pub update_rule: UpdateRule,
    /// When set, estimates start from one noisy sample of each arm's truth
    /// at this noise scale instead of zero.
    pub prior_sigma: Option<F>,
}

impl<F: Scalar> BlagConfig<F> {
    pub fn new(epsilon0: F, rounds: usize, seed: u64) -> Self {
        BlagConfig {
            epsilon0,
            rounds,
            seed,
            update_rule: UpdateRule::ArmMean,
            prior_sigma: None,
        }
    }
}

fn assert_played_set_valid<F: Scalar>(asg: &ActionSetGraph<F>, sa: &SuperAction<F>) {
    debug_assert!(
        is_valid(asg.beta0(), sa.arm_ids.iter().map(|&i| asg.arm(i))),
        "policy produced an inadmissible combination"
    );
}

/// Runs the epsilon-greedy learner for `cfg.rounds` rounds. Deterministic
/// given `cfg.seed` and the environment's seed.
pub fn blag_run<F: Scalar>(
    asg: &ActionSetGraph<F>,
    env: &mut RewardEnv<F>,
    cfg: &BlagConfig<F>,
) -> RegretTrace<F> {
    assert!(cfg.epsilon0 > F::zero(), "epsilon0 must be positive");
    assert!(cfg.rounds >= 1, "need at least one round");
    assert!(asg.arm_count() >= 1, "need at least one arm");
    let mut policy_rng = StdRng::seed_from_u64(cfg.seed);
    let mut est = match cfg.prior_sigma {
        Some(prior) => EstimatorState::from_prior(env.noisy_means(asg.arms(), prior)),
        None => EstimatorState::new(asg.arm_count()),
    };
    let mut records = Vec::with_capacity(cfg.rounds);
    for t in 1..=cfg.rounds {
        let eps = epsilon_schedule(t, cfg.epsilon0);
        let explore_now = policy_rng.gen_range(F::zero()..F::one()) < eps;
        let (policy, sa) = if explore_now {
            (PolicyKind::Explore, explore(asg, &mut policy_rng))
        } else {
            (PolicyKind::Exploit, exploit(asg, &est, &mut policy_rng))
        };
        assert_played_set_valid(asg, &sa);
        let rewards = env.observe(&sa, asg.arms());
        est.update(&rewards, t, cfg.update_rule);
        records.push(RoundRecord {
            round: t,
            policy,
            arm_ids: sa.arm_ids.clone(),
            per_arm_rewards: rewards.iter().map(|&(_, r)| r).collect(),
            noisy_reward: rewards.iter().map(|&(_, r)| r).sum(),
            true_reward: env.true_reward(&sa),
        });
    }
    RegretTrace { records }
}

/// Which arms the confidence-bound baseline ranks each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    /// The same `floor(sqrt(m))` random draw the epsilon-greedy exploit
    /// step uses; keeps the comparison structurally matched.
    SqrtTargets,
    /// Rank the whole arm set every round.
    AllArms,
}

fn cucb_select<F: Scalar>(
    asg: &ActionSetGraph<F>,
    est: &EstimatorState<F>,
    c: F,
    sigma: F,
    pool_mode: PoolMode,
    rng: &mut StdRng,
) -> SuperAction<F> {
    let m = asg.component_count();
    let mut pool: Vec<u32> = match pool_mode {
        PoolMode::SqrtTargets => {
            let picked = index::sample(rng, asg.arm_count(), pool_size(m, asg.arm_count()));
            picked.iter().map(|i| i as u32).collect()
        }
        PoolMode::AllArms => (0..asg.arm_count() as u32).collect(),
    };
    // Lower confidence bound; unpulled arms rank below everything, which
    // forces each pooled arm's first observation.
    let index_of = |i: u32| {
        if est.pulls(i) == 0 {
            F::neg_infinity()
        } else {
            est.mu(i) - c * sigma / F::from_u32(est.pulls(i)).unwrap().sqrt()
        }
    };
    pool.sort_by(|&a, &b| {
        index_of(a)
            .partial_cmp(&index_of(b))
            .expect("indexes are never NaN")
            .then(a.cmp(&b))
    });
    let mut sa = SuperAction::empty(m);
    for &i in &pool {
        if index_of(i) > F::zero() {
            break;
        }
        let arm = asg.arm(i);
        if sa.can_add(asg.beta0(), arm) {
            sa.add(arm);
        }
    }
    sa
}

/// Confidence-bound baseline: per round, ranks a pool by
/// `mu - c*sigma/sqrt(pulls)` and greedily adds non-positive candidates
/// while admissible. Observation and estimate updates match [`blag_run`]
/// with the plain sample mean.
pub fn cucb_run<F: Scalar>(
    asg: &ActionSetGraph<F>,
    env: &mut RewardEnv<F>,
    rounds: usize,
    c: F,
    pool_mode: PoolMode,
    seed: u64,
) -> RegretTrace<F> {
    assert!(c > F::zero(), "confidence scale must be positive");
    assert!(rounds >= 1, "need at least one round");
    let sigma = env.sigma();
    let mut policy_rng = StdRng::seed_from_u64(seed);
    let mut est = EstimatorState::new(asg.arm_count());
    let mut records = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let sa = cucb_select(asg, &est, c, sigma, pool_mode, &mut policy_rng);
        assert_played_set_valid(asg, &sa);
        let rewards = env.observe(&sa, asg.arms());
        est.update(&rewards, t, UpdateRule::ArmMean);
        records.push(RoundRecord {
            round: t,
            policy: PolicyKind::Exploit,
            arm_ids: sa.arm_ids.clone(),
            per_arm_rewards: rewards.iter().map(|&(_, r)| r).collect(),
            noisy_reward: rewards.iter().map(|&(_, r)| r).sum(),
            true_reward: env.true_reward(&sa),
        });
    }
    RegretTrace { records }
}
