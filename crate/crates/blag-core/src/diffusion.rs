//! Time-slot diffusion of sensitive information and the info-loss metric.
//!
//! A cascade advances in synchronized slots: every (sensitive, non-sensitive)
//! edge draws one Bernoulli at the active policy's probability, and a node
//! that collects at least `threshold` successful transmissions in a slot
//! becomes sensitive at the slot boundary. Sensitivity never reverts.
//!
//! The info-loss protocol reuses the same policies on a frozen network
//! instead: the sensitive set stays fixed, signals flow to uninformed
//! neighbors round after round, and strategies are charged for the
//! degree-weighted labeled deliveries they withhold relative to unmodified
//! transmission. All compared strategies see the same per-round, per-edge
//! uniform draws, so a strategy that matches the stored probabilities loses
//! exactly nothing.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::network::{Network, NodeState};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("network has no sensitive nodes")]
    NoSensitiveNodes,
    #[error("no (sensitive, uninformed) edges to act on")]
    NoTargetEdges,
}

/// How sensitive nodes transmit along live edges.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmissionPolicy<F: Scalar> {
    /// The probabilities stored on the network's edges, untouched.
    Original,
    /// One flat probability on every live edge.
    Spontaneous { p: F },
    /// Per sensitive node, the higher-degree half of its candidates gets 0
    /// and the rest get `p_low`; see [`policy_adaptive_degree_split`].
    AdaptiveDegreeSplit { p_low: F },
    /// `p_init / (1 + sqrt(r))` at round `r`; the per-round drop itself
    /// shrinks over time.
    MonotoneDecreasing { p_init: F },
    /// A global probability, starting at `p_base`, that loses `decrement`
    /// (floored at 0) on each round its private coin selects.
    RiposteLike {
        p_base: F,
        decrement: F,
        round_probability: F,
    },
    /// Learned per-edge probabilities keyed by the directed
    /// (sensitive, target) pair; edges not in the map fall back to the
    /// stored probability.
    BanditDriven { edge_probs: BTreeMap<(u32, u32), F> },
}

impl<F: Scalar> TransmissionPolicy<F> {
    /// Short stable name used in CSV strategy columns.
    pub fn name(&self) -> &'static str {
        match self {
            TransmissionPolicy::Original => "original",
            TransmissionPolicy::Spontaneous { .. } => "spontaneous",
            TransmissionPolicy::AdaptiveDegreeSplit { .. } => "adaptive-degree-split",
            TransmissionPolicy::MonotoneDecreasing { .. } => "monotone-decreasing",
            TransmissionPolicy::RiposteLike { .. } => "riposte-like",
            TransmissionPolicy::BanditDriven { .. } => "bandit-driven",
        }
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let unit = |name: &str, v: F| {
            if v >= F::zero() && v <= F::one() {
                Ok(())
            } else {
                Err(DiffusionError::InvalidParameters(format!(
                    "{name} must lie in [0, 1]"
                )))
            }
        };
        match self {
            TransmissionPolicy::Original => Ok(()),
            TransmissionPolicy::Spontaneous { p } => unit("p", *p),
            TransmissionPolicy::AdaptiveDegreeSplit { p_low } => unit("p_low", *p_low),
            TransmissionPolicy::MonotoneDecreasing { p_init } => unit("p_init", *p_init),
            TransmissionPolicy::RiposteLike {
                p_base,
                decrement,
                round_probability,
            } => {
                unit("p_base", *p_base)?;
                unit("decrement", *decrement)?;
                unit("round_probability", *round_probability)
            }
            TransmissionPolicy::BanditDriven { edge_probs } => {
                for (&(a, b), &p) in edge_probs {
                    unit(&format!("edge ({a}, {b})"), p)?;
                }
                Ok(())
            }
        }
    }
}

/// Degree-split probabilities for one sensitive node over an explicit
/// candidate list: candidates sorted by degree descending (degree ties give
/// the larger id the higher slot), the top `ceil(k/2)` silenced, the rest
/// at `p_low`. Returned in that sorted order.
fn degree_split<F: Scalar>(net: &Network<F>, candidates: &[u32], p_low: F) -> Vec<(u32, F)> {
    let mut order: Vec<u32> = candidates.to_vec();
    order.sort_by(|&a, &b| {
        net.degree(b)
            .cmp(&net.degree(a))
            .then(b.cmp(&a))
    });
    let zeroed = order.len().div_ceil(2);
    order
        .into_iter()
        .enumerate()
        .map(|(rank, v)| (v, if rank < zeroed { F::zero() } else { p_low }))
        .collect()
}

/// The degree-split rule over a sensitive node's current non-sensitive
/// neighbors. With `p_low` twice the flat baseline the silenced half is
/// exactly paid for: total mass across the neighborhood is conserved.
pub fn policy_adaptive_degree_split<F: Scalar>(
    net: &Network<F>,
    sensitive: u32,
    p_low: F,
) -> Vec<(u32, F)> {
    let candidates: Vec<u32> = net
        .neighbors(sensitive)
        .iter()
        .copied()
        .filter(|&v| net.state(v) != NodeState::Sensitive)
        .collect();
    degree_split(net, &candidates, p_low)
}

/// One successful sensitive transmission along a directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionEvent {
    /// 1-based slot (or round) the event happened in.
    pub slot: usize,
    pub from: u32,
    pub to: u32,
    /// Whether the event carried a labeled signal; always false in plain
    /// cascades, assigned per round by the info-loss protocol.
    pub labeled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord<F: Scalar> {
    pub slot: usize,
    pub newly_sensitive: usize,
    pub sensitive_fraction: F,
}

/// Cascade history: one record per slot (plus the slot-0 baseline) and the
/// full event log, from which the records are recomputable.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTrace<F: Scalar> {
    pub records: Vec<SlotRecord<F>>,
    pub events: Vec<TransmissionEvent>,
}

impl<F: Scalar> CascadeTrace<F> {
    pub fn fractions(&self) -> Vec<F> {
        self.records.iter().map(|r| r.sensitive_fraction).collect()
    }
}

/// One running cascade: owns its network copy, policy state, and RNG
/// streams. Slots are 1-based.
#[derive(Debug, Clone)]
pub struct CascadeSim<F: Scalar> {
    net: Network<F>,
    policy: TransmissionPolicy<F>,
    threshold: usize,
    slot: usize,
    /// Sensitive nodes in deterministic (ascending per cohort) order.
    sensitive: Vec<u32>,
    riposte_p: F,
    coin_rng: StdRng,
    edge_rng: StdRng,
}

impl<F: Scalar> CascadeSim<F> {
    pub fn new(
        net: &Network<F>,
        policy: TransmissionPolicy<F>,
        threshold: usize,
        seed: u64,
    ) -> Result<Self, DiffusionError> {
        policy.validate()?;
        if threshold < 1 {
            return Err(DiffusionError::InvalidParameters(
                "threshold must be at least 1".into(),
            ));
        }
        let sensitive: Vec<u32> = (0..net.node_count() as u32)
            .filter(|&v| net.state(v) == NodeState::Sensitive)
            .collect();
        if sensitive.is_empty() {
            return Err(DiffusionError::NoSensitiveNodes);
        }
        let riposte_p = match &policy {
            TransmissionPolicy::RiposteLike { p_base, .. } => *p_base,
            _ => F::zero(),
        };
        Ok(CascadeSim {
            net: net.clone(),
            policy,
            threshold,
            slot: 0,
            sensitive,
            riposte_p,
            coin_rng: StdRng::seed_from_u64(derive_seed(seed, 1)),
            edge_rng: StdRng::seed_from_u64(derive_seed(seed, 0)),
        })
    }

    pub fn network(&self) -> &Network<F> {
        &self.net
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn sensitive_fraction(&self) -> F {
        F::from_usize(self.sensitive.len()).unwrap() / F::from_usize(self.net.node_count()).unwrap()
    }

    fn advance_policy_state(&mut self) {
        if let TransmissionPolicy::RiposteLike {
            decrement,
            round_probability,
            ..
        } = self.policy
        {
            if self.coin_rng.gen_range(F::zero()..F::one()) < round_probability {
                self.riposte_p = (self.riposte_p - decrement).max(F::zero());
            }
        }
    }

    fn edge_probability(&self, splits: &HashMap<u32, Vec<(u32, F)>>, from: u32, to: u32) -> F {
        match &self.policy {
            TransmissionPolicy::Original => self.net.edge_probability(from, to).unwrap(),
            TransmissionPolicy::Spontaneous { p } => *p,
            TransmissionPolicy::AdaptiveDegreeSplit { .. } => splits[&from]
                .iter()
                .find(|&&(v, _)| v == to)
                .map(|&(_, p)| p)
                .unwrap(),
            TransmissionPolicy::MonotoneDecreasing { p_init } => {
                *p_init / (F::one() + F::from_usize(self.slot).unwrap().sqrt())
            }
            TransmissionPolicy::RiposteLike { .. } => self.riposte_p,
            TransmissionPolicy::BanditDriven { edge_probs } => edge_probs
                .get(&(from, to))
                .copied()
                .unwrap_or_else(|| self.net.edge_probability(from, to).unwrap()),
        }
    }

    /// Runs one slot: per-edge Bernoulli draws from the frontier, then a
    /// simultaneous threshold update. Returns this slot's successful
    /// transmissions.
    pub fn step(&mut self) -> Vec<TransmissionEvent> {
        self.slot += 1;
        self.advance_policy_state();
        let splits: HashMap<u32, Vec<(u32, F)>> = match &self.policy {
            TransmissionPolicy::AdaptiveDegreeSplit { p_low } => self
                .sensitive
                .iter()
                .map(|&s| (s, policy_adaptive_degree_split(&self.net, s, *p_low)))
                .collect(),
            _ => HashMap::new(),
        };
        let mut events = Vec::new();
        let mut hits: HashMap<u32, usize> = HashMap::new();
        for i in 0..self.sensitive.len() {
            let s = self.sensitive[i];
            for j in 0..self.net.neighbors(s).len() {
                let v = self.net.neighbors(s)[j];
                if self.net.state(v) == NodeState::Sensitive {
                    continue;
                }
                let u: F = self.edge_rng.gen_range(F::zero()..F::one());
                if u < self.edge_probability(&splits, s, v) {
                    events.push(TransmissionEvent {
                        slot: self.slot,
                        from: s,
                        to: v,
                        labeled: false,
                    });
                    *hits.entry(v).or_insert(0) += 1;
                }
            }
        }
        let mut converts: Vec<u32> = hits
            .into_iter()
            .filter(|&(_, n)| n >= self.threshold)
            .map(|(v, _)| v)
            .collect();
        converts.sort_unstable();
        for &v in &converts {
            self.net.set_state(v, NodeState::Sensitive);
        }
        self.sensitive.extend(converts);
        events
    }
}

/// Runs `slots` slots and keeps the full history, including a slot-0
/// baseline record.
pub fn run_cascade<F: Scalar>(
    net: &Network<F>,
    policy: TransmissionPolicy<F>,
    slots: usize,
    threshold: usize,
    seed: u64,
) -> Result<CascadeTrace<F>, DiffusionError> {
    let mut sim = CascadeSim::new(net, policy, threshold, seed)?;
    let mut records = vec![SlotRecord {
        slot: 0,
        newly_sensitive: 0,
        sensitive_fraction: sim.sensitive_fraction(),
    }];
    let mut events = Vec::new();
    for _ in 0..slots {
        let before = sim.sensitive.len();
        events.extend(sim.step());
        records.push(SlotRecord {
            slot: sim.slot(),
            newly_sensitive: sim.sensitive.len() - before,
            sensitive_fraction: sim.sensitive_fraction(),
        });
    }
    Ok(CascadeTrace { records, events })
}

/// First slot at which the sensitive fraction reaches `fraction`, stepping
/// at most `max_slots` without keeping any history.
pub fn first_crossing_slot<F: Scalar>(
    net: &Network<F>,
    policy: TransmissionPolicy<F>,
    threshold: usize,
    fraction: F,
    max_slots: usize,
    seed: u64,
) -> Result<Option<usize>, DiffusionError> {
    let mut sim = CascadeSim::new(net, policy, threshold, seed)?;
    if sim.sensitive_fraction() >= fraction {
        return Ok(Some(0));
    }
    for _ in 0..max_slots {
        sim.step();
        if sim.sensitive_fraction() >= fraction {
            return Ok(Some(sim.slot()));
        }
    }
    Ok(None)
}

/// Per-strategy outcome of the info-loss protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoLossSeries<F: Scalar> {
    /// Per-round loss values, normalized by the maximum across all compared
    /// strategies (so everything lies in [0, 1]).
    pub values: Vec<F>,
    /// Labeled signals this strategy delivered, per round.
    pub labeled_deliveries: Vec<usize>,
}

impl<F: Scalar> InfoLossSeries<F> {
    pub fn terminal(&self) -> F {
        self.values.last().copied().unwrap_or_else(F::zero)
    }
}

struct StrategyRun<F: Scalar> {
    policy: TransmissionPolicy<F>,
    riposte_p: F,
    coin_rng: StdRng,
    /// Static per-edge probabilities for the split policy (the sensitive
    /// set never changes here).
    split: HashMap<(u32, u32), F>,
    info: F,
    labeled: usize,
    raw: Vec<F>,
    labeled_per_round: Vec<usize>,
}

impl<F: Scalar> StrategyRun<F> {
    fn new(
        net: &Network<F>,
        candidates_by_source: &BTreeMap<u32, Vec<u32>>,
        policy: TransmissionPolicy<F>,
        seed: u64,
        tag: u64,
    ) -> Self {
        let riposte_p = match &policy {
            TransmissionPolicy::RiposteLike { p_base, .. } => *p_base,
            _ => F::zero(),
        };
        let split = match &policy {
            TransmissionPolicy::AdaptiveDegreeSplit { p_low } => candidates_by_source
                .iter()
                .flat_map(|(&s, targets)| {
                    degree_split(net, targets, *p_low)
                        .into_iter()
                        .map(move |(v, p)| ((s, v), p))
                })
                .collect(),
            _ => HashMap::new(),
        };
        StrategyRun {
            policy,
            riposte_p,
            coin_rng: StdRng::seed_from_u64(derive_seed(seed, tag)),
            split,
            info: F::zero(),
            labeled: 0,
            raw: Vec::new(),
            labeled_per_round: Vec::new(),
        }
    }

    fn begin_round(&mut self) {
        if let TransmissionPolicy::RiposteLike {
            decrement,
            round_probability,
            ..
        } = self.policy
        {
            if self.coin_rng.gen_range(F::zero()..F::one()) < round_probability {
                self.riposte_p = (self.riposte_p - decrement).max(F::zero());
            }
        }
    }

    fn probability(&self, net: &Network<F>, from: u32, to: u32, round: usize) -> F {
        match &self.policy {
            TransmissionPolicy::Original => net.edge_probability(from, to).unwrap(),
            TransmissionPolicy::Spontaneous { p } => *p,
            TransmissionPolicy::AdaptiveDegreeSplit { .. } => self.split[&(from, to)],
            TransmissionPolicy::MonotoneDecreasing { p_init } => {
                *p_init / (F::one() + F::from_usize(round).unwrap().sqrt())
            }
            TransmissionPolicy::RiposteLike { .. } => self.riposte_p,
            TransmissionPolicy::BanditDriven { edge_probs } => edge_probs
                .get(&(from, to))
                .copied()
                .unwrap_or_else(|| net.edge_probability(from, to).unwrap()),
        }
    }
}

/// Runs the label-tracking protocol: the sensitive set stays frozen, every
/// round each (sensitive, uninformed) edge gets one shared uniform draw,
/// and a per-round coin decides whether that round's signals carry labels.
/// Each strategy's loss at round `r` is the degree mass of labeled
/// deliveries it withheld relative to the stored probabilities, per labeled
/// signal it did deliver (carrying the previous value while that count is
/// still zero, and clamped at zero when a strategy out-delivers the
/// original). Series are normalized by the maximum value any compared
/// strategy ever reaches.
pub fn run_info_loss_experiment<F: Scalar>(
    net: &Network<F>,
    strategies: &[TransmissionPolicy<F>],
    rounds: usize,
    label_probability: F,
    seed: u64,
) -> Result<Vec<InfoLossSeries<F>>, DiffusionError> {
    if rounds < 1 {
        return Err(DiffusionError::InvalidParameters(
            "need at least one round".into(),
        ));
    }
    if label_probability < F::zero() || label_probability > F::one() {
        return Err(DiffusionError::InvalidParameters(
            "label_probability must lie in [0, 1]".into(),
        ));
    }
    if net.sensitive_count() == 0 {
        return Err(DiffusionError::NoSensitiveNodes);
    }
    for s in strategies {
        s.validate()?;
    }

    let mut candidates_by_source: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for v in 0..net.node_count() as u32 {
        if net.state(v) != NodeState::Sensitive {
            continue;
        }
        let targets: Vec<u32> = net
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| net.state(w) == NodeState::Uninformed)
            .collect();
        if !targets.is_empty() {
            candidates_by_source.insert(v, targets);
        }
    }
    let edges: Vec<(u32, u32)> = candidates_by_source
        .iter()
        .flat_map(|(&s, ts)| ts.iter().map(move |&t| (s, t)))
        .collect();
    if edges.is_empty() {
        return Err(DiffusionError::NoTargetEdges);
    }

    let mut original = StrategyRun::new(
        net,
        &candidates_by_source,
        TransmissionPolicy::Original,
        seed,
        1,
    );
    let mut runs: Vec<StrategyRun<F>> = strategies
        .iter()
        .enumerate()
        .map(|(i, p)| StrategyRun::new(net, &candidates_by_source, p.clone(), seed, 2 + i as u64))
        .collect();
    let mut label_rng = StdRng::seed_from_u64(derive_seed(seed, 0));

    for r in 1..=rounds {
        original.begin_round();
        for run in &mut runs {
            run.begin_round();
        }
        let labeled_round = label_rng.gen_range(F::zero()..F::one()) < label_probability;
        let mut labeled_this_round = vec![0usize; runs.len()];
        if labeled_round {
            // Unlabeled rounds move no metric, so their draws are skipped;
            // each round has its own derived stream, keeping rounds aligned
            // across strategy sets.
            let mut edge_rng = StdRng::seed_from_u64(derive_seed(seed, 1_000_000 + r as u64));
            for &(from, to) in &edges {
                let u: F = edge_rng.gen_range(F::zero()..F::one());
                let weight = F::from_u32(net.degree(to)).unwrap();
                if u < original.probability(net, from, to, r) {
                    original.info += weight;
                    original.labeled += 1;
                }
                for (run, count) in runs.iter_mut().zip(&mut labeled_this_round) {
                    if u < run.probability(net, from, to, r) {
                        run.info += weight;
                        run.labeled += 1;
                        *count += 1;
                    }
                }
            }
        }
        for (run, &count) in runs.iter_mut().zip(&labeled_this_round) {
            let value = if run.labeled > 0 {
                ((original.info - run.info) / F::from_usize(run.labeled).unwrap()).max(F::zero())
            } else {
                run.raw.last().copied().unwrap_or_else(F::zero)
            };
            run.raw.push(value);
            run.labeled_per_round.push(count);
        }
    }

    let max = runs
        .iter()
        .flat_map(|run| run.raw.iter().copied())
        .fold(F::zero(), F::max);
    let scale = if max > F::zero() { max } else { F::one() };
    Ok(runs
        .into_iter()
        .map(|run| InfoLossSeries {
            values: run.raw.into_iter().map(|v| v / scale).collect(),
            labeled_deliveries: run.labeled_per_round,
        })
        .collect())
}

/// `slot,value,strategy,seed` rows; value is the sensitive fraction.
pub fn write_cascade_csv<F: Scalar, W: Write>(
    trace: &CascadeTrace<F>,
    strategy: &str,
    seed: u64,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "slot,value,strategy,seed")?;
    for rec in &trace.records {
        writeln!(w, "{},{},{},{}", rec.slot, rec.sensitive_fraction, strategy, seed)?;
    }
    Ok(())
}

/// `round,value,strategy,seed` rows, strategies in the given order.
pub fn write_info_loss_csv<F: Scalar, W: Write>(
    series: &[(String, InfoLossSeries<F>)],
    seed: u64,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "round,value,strategy,seed")?;
    for (name, s) in series {
        for (i, v) in s.values.iter().enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, v, name, seed)?;
        }
    }
    Ok(())
}
