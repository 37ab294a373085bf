//! Base actions and their combinations.
//!
//! A base action moves `magnitude` probability mass from component
//! `idx_minus` to component `idx_plus` of the target vector: as a dense
//! m-vector it has exactly two non-zero entries, `+magnitude` and
//! `-magnitude`, so it always sums to zero. A set of actions is jointly
//! admissible when `beta0` plus the componentwise sum of the set stays in
//! `[0, 1]` everywhere (with a small tolerance for float drift).

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::scalar::{interval_tolerance, Scalar};

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("arm {arm}: no admissible magnitude after {attempts} attempts")]
    InfeasibleArm { arm: usize, attempts: usize },
    #[error("combination leaves the probability interval")]
    InvalidCombination,
    #[error("unknown arm id {0}")]
    UnknownArm(u32),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One mass transfer. `id` is the arm's index in its owning list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseAction<F: Scalar> {
    pub id: u32,
    pub idx_plus: u32,
    pub idx_minus: u32,
    pub magnitude: F,
}

impl<F: Scalar> BaseAction<F> {
    /// Value of component `j` of the dense vector view.
    pub fn component(&self, j: usize) -> F {
        if j as u32 == self.idx_plus {
            self.magnitude
        } else if j as u32 == self.idx_minus {
            -self.magnitude
        } else {
            F::zero()
        }
    }

    /// Dense m-vector view.
    pub fn dense(&self, m: usize) -> Vec<F> {
        let mut v = vec![F::zero(); m];
        v[self.idx_plus as usize] += self.magnitude;
        v[self.idx_minus as usize] -= self.magnitude;
        v
    }

    /// Dot product with a weight vector; for degree weights this is the
    /// arm's expected reward.
    pub fn dot(&self, weights: &[F]) -> F {
        self.magnitude * (weights[self.idx_plus as usize] - weights[self.idx_minus as usize])
    }
}

/// A combination of base actions, kept with its dense componentwise sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperAction<F: Scalar> {
    /// Sorted, unique arm ids.
    pub arm_ids: Vec<u32>,
    /// Dense componentwise sum of the member vectors, length m.
    pub delta: Vec<F>,
}

impl<F: Scalar> SuperAction<F> {
    pub fn empty(m: usize) -> Self {
        SuperAction {
            arm_ids: Vec::new(),
            delta: vec![F::zero(); m],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.arm_ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.arm_ids.len()
    }

    pub fn dot(&self, weights: &[F]) -> F {
        self.delta
            .iter()
            .zip(weights)
            .map(|(&d, &w)| d * w)
            .sum()
    }

    /// True when adding `arm` keeps the combination admissible. Only the two
    /// components the arm touches can change, so this is O(1) regardless of
    /// how many arms are already in the set.
    pub fn can_add(&self, beta0: &[F], arm: &BaseAction<F>) -> bool {
        let tol = interval_tolerance::<F>();
        let in_range = |j: u32, shift: F| {
            let v = beta0[j as usize] + self.delta[j as usize] + shift;
            v >= -tol && v <= F::one() + tol
        };
        in_range(arm.idx_plus, arm.magnitude) && in_range(arm.idx_minus, -arm.magnitude)
    }

    /// Adds `arm`, keeping `arm_ids` sorted. Re-adding a member is a no-op.
    pub fn add(&mut self, arm: &BaseAction<F>) {
        if let Err(pos) = self.arm_ids.binary_search(&arm.id) {
            self.arm_ids.insert(pos, arm.id);
            self.delta[arm.idx_plus as usize] += arm.magnitude;
            self.delta[arm.idx_minus as usize] -= arm.magnitude;
        }
    }
}

/// Definition-3 check: every component of `beta0` plus the summed action
/// vectors must stay in `[0, 1]`, give or take the interval tolerance.
/// The empty set is valid. Cost is linear in the touched components, not m.
pub fn is_valid<'a, F, I>(beta0: &[F], actions: I) -> bool
where
    F: Scalar,
    I: IntoIterator<Item = &'a BaseAction<F>>,
{
    let mut sums: HashMap<u32, F> = HashMap::new();
    for a in actions {
        *sums.entry(a.idx_plus).or_insert_with(F::zero) += a.magnitude;
        *sums.entry(a.idx_minus).or_insert_with(F::zero) -= a.magnitude;
    }
    let tol = interval_tolerance::<F>();
    sums.into_iter().all(|(j, s)| {
        let v = beta0[j as usize] + s;
        v >= -tol && v <= F::one() + tol
    })
}

/// Default arm-set size used by the experiments: twice the number of
/// unordered component pairs, i.e. `m * (m - 1)`.
pub fn default_arm_count(m: usize) -> usize {
    m * (m - 1)
}

/// Samples `count` base actions over `m` components. Each arm draws a
/// uniform ordered pair of distinct components and a magnitude uniform in
/// `(0, cap]` where `cap = min(1, 1 - beta0(plus), beta0(minus))`, so every
/// arm is valid on its own. Pairs whose cap is non-positive are redrawn a
/// bounded number of times.
pub fn sample_base_actions<F: Scalar>(
    m: usize,
    count: usize,
    beta0: &[F],
    seed: u64,
) -> Result<Vec<BaseAction<F>>, ActionError> {
    if m < 2 || beta0.len() != m {
        return Err(ActionError::InvalidParameters(format!(
            "need m >= 2 components and a matching beta0, got m={m}, beta0 len {}",
            beta0.len()
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut arms = Vec::with_capacity(count);
    const ATTEMPTS: usize = 10_000;
    for id in 0..count {
        let mut found = None;
        for _ in 0..ATTEMPTS {
            let idx_plus = rng.gen_range(0..m as u32);
            let mut idx_minus = rng.gen_range(0..m as u32 - 1);
            if idx_minus >= idx_plus {
                idx_minus += 1;
            }
            let cap = F::one()
                .min(F::one() - beta0[idx_plus as usize])
                .min(beta0[idx_minus as usize]);
            if cap <= F::zero() {
                continue;
            }
            // (0, cap]: 1 - u maps [0, 1) onto (0, 1].
            let u: F = rng.gen_range(F::zero()..F::one());
            let magnitude = cap * (F::one() - u);
            found = Some(BaseAction {
                id: id as u32,
                idx_plus,
                idx_minus,
                magnitude,
            });
            break;
        }
        match found {
            Some(a) => arms.push(a),
            None => {
                return Err(ActionError::InfeasibleArm {
                    arm: id,
                    attempts: ATTEMPTS,
                })
            }
        }
    }
    Ok(arms)
}

/// Combines the arms named by `arm_ids` (deduped) into a `SuperAction`,
/// verifying joint validity against `beta0`. Arms are looked up by id in
/// `arms`, which must be id-indexed (`arms[i].id == i`).
pub fn combine<F: Scalar>(
    beta0: &[F],
    arm_ids: &[u32],
    arms: &[BaseAction<F>],
) -> Result<SuperAction<F>, ActionError> {
    let ids: BTreeSet<u32> = arm_ids.iter().copied().collect();
    let mut members = Vec::with_capacity(ids.len());
    for &i in &ids {
        let arm = arms.get(i as usize).ok_or(ActionError::UnknownArm(i))?;
        debug_assert_eq!(arm.id, i, "arm list must be id-indexed");
        members.push(arm);
    }
    if !is_valid(beta0, members.iter().copied()) {
        return Err(ActionError::InvalidCombination);
    }
    let mut delta = vec![F::zero(); beta0.len()];
    for a in &members {
        delta[a.idx_plus as usize] += a.magnitude;
        delta[a.idx_minus as usize] -= a.magnitude;
    }
    Ok(SuperAction {
        arm_ids: ids.into_iter().collect(),
        delta,
    })
}

/// Writes one `id idx_plus idx_minus magnitude` line per arm.
pub fn write_arm_list<F: Scalar, W: Write>(arms: &[BaseAction<F>], mut w: W) -> std::io::Result<()> {
    for a in arms {
        writeln!(w, "{} {} {} {}", a.id, a.idx_plus, a.idx_minus, a.magnitude)?;
    }
    Ok(())
}

/// Parses the format written by [`write_arm_list`].
pub fn read_arm_list<F: Scalar, R: BufRead>(reader: R) -> Result<Vec<BaseAction<F>>, ActionError> {
    let mut arms = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ActionError::Parse {
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", fields.len())));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad id {:?}", fields[0])))?;
        let idx_plus: u32 = fields[1]
            .parse()
            .map_err(|_| err(format!("bad idx_plus {:?}", fields[1])))?;
        let idx_minus: u32 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad idx_minus {:?}", fields[2])))?;
        let magnitude: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad magnitude {:?}", fields[3])))?;
        arms.push(BaseAction {
            id,
            idx_plus,
            idx_minus,
            magnitude: F::from_f64(magnitude)
                .ok_or_else(|| err(format!("magnitude out of range: {magnitude}")))?,
        });
    }
    Ok(arms)
}
