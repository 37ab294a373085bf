//! Closed-form reward bounds and exhaustive baselines.
//!
//! Everything here is a pure function of the instance. The two mass bounds
//! come from relaxing the arm structure: any reachable target vector keeps
//! its total mass `B0` and stays in the unit box, so extremal rewards are
//! linear-programming allocations of `B0` over the sorted degree vector.
//! `bstar` is the lowest reachable expected reward shift, `bcross` the widest
//! spread between two reachable vectors. Both admit fractional `B0` via the
//! LP optimum (fill whole components, then a fractional remainder).

use rand::rngs::StdRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::action::{combine, BaseAction, SuperAction};
use crate::rng::{derive_seed, shuffle};
use crate::scalar::{interval_tolerance, lit, Scalar};

/// Exhaustive subset search is capped here; 2^20 combinations is the most
/// the test suites ever need.
pub const MAX_BRUTE_FORCE_ARMS: usize = 20;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("total mass {b0} exceeds the {m} components")]
    MassExceedsComponents { b0: f64, m: usize },
    #[error("total mass {b0} is negative")]
    NegativeMass { b0: f64 },
    #[error("{arms} arms exceed the exhaustive-search cap of {MAX_BRUTE_FORCE_ARMS}")]
    InstanceTooLarge { arms: usize },
}

/// Total probability mass of the target vector.
pub fn compute_b0<F: Scalar>(beta0: &[F]) -> F {
    beta0.iter().copied().sum()
}

fn checked_mass<F: Scalar>(beta0: &[F]) -> Result<F, BoundsError> {
    let b0 = compute_b0(beta0);
    let tol = interval_tolerance::<F>();
    let m = beta0.len();
    if b0 < -tol {
        return Err(BoundsError::NegativeMass {
            b0: b0.to_f64().unwrap_or(f64::NAN),
        });
    }
    if b0 > F::from_usize(m).unwrap() + tol {
        return Err(BoundsError::MassExceedsComponents {
            b0: b0.to_f64().unwrap_or(f64::NAN),
            m,
        });
    }
    Ok(b0.max(F::zero()).min(F::from_usize(m).unwrap()))
}

/// Minimum of `d · beta` over `beta` in the unit box with total mass `mass`:
/// fill the smallest entries of `sorted` first, then a fractional remainder.
fn bottom_mass<F: Scalar>(sorted_ascending: &[F], mass: F) -> F {
    let whole = mass.floor();
    let k = (whole.to_usize().unwrap()).min(sorted_ascending.len());
    let mut total: F = sorted_ascending[..k].iter().copied().sum();
    let frac = mass - whole;
    if frac > F::zero() && k < sorted_ascending.len() {
        total += frac * sorted_ascending[k];
    }
    total
}

/// Mirror of [`bottom_mass`]: fill the largest entries first.
fn top_mass<F: Scalar>(sorted_ascending: &[F], mass: F) -> F {
    let n = sorted_ascending.len();
    let whole = mass.floor();
    let k = (whole.to_usize().unwrap()).min(n);
    let mut total: F = sorted_ascending[n - k..].iter().copied().sum();
    let frac = mass - whole;
    if frac > F::zero() && k < n {
        total += frac * sorted_ascending[n - k - 1];
    }
    total
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn sorted_copy<F: Scalar>(degrees: &[F]) -> Vec<F> {
    let mut d = degrees.to_vec();
    d.sort_by(|a, b| a.partial_cmp(b).expect("degrees are finite"));
    d
}

/// Lowest reachable expected reward shift: the gap between the cheapest
/// allocation of the instance's mass and where the mass sits now. Never
/// positive. Degrees are sorted internally, so input order is irrelevant.
pub fn compute_bstar<F: Scalar>(degrees: &[F], beta0: &[F]) -> Result<F, BoundsError> {
    assert_eq!(degrees.len(), beta0.len());
    let b0 = checked_mass(beta0)?;
    let sorted = sorted_copy(degrees);
    Ok(bottom_mass(&sorted, b0) - dot(degrees, beta0))
}

/// Widest expected-reward spread between any two reachable target vectors:
/// costliest allocation minus cheapest. Never negative.
pub fn compute_bcross<F: Scalar>(degrees: &[F], beta0: &[F]) -> Result<F, BoundsError> {
    assert_eq!(degrees.len(), beta0.len());
    let b0 = checked_mass(beta0)?;
    let sorted = sorted_copy(degrees);
    Ok(top_mass(&sorted, b0) - bottom_mass(&sorted, b0))
}

/// Smallest confidence scale the concentration analysis supports:
/// `sqrt(2 ln(2 * bcross * M * T))`, clamped to 0 when the log argument
/// drops below 1.
pub fn min_c<F: Scalar>(arm_count: usize, rounds: usize, bcross: F) -> F {
    let arg = lit::<F>(2.0)
        * bcross
        * F::from_usize(arm_count).unwrap()
        * F::from_usize(rounds).unwrap();
    if arg <= F::one() {
        F::zero()
    } else {
        (lit::<F>(2.0) * arg.ln()).sqrt()
    }
}

/// `(learner_bound, baseline_bound)`: `2cσM√T + 2·bcross·√T + 1` and
/// `4cσM√T + 1`. For large arm counts the ratio tends to one half.
pub fn regret_bounds<F: Scalar>(
    arm_count: usize,
    rounds: usize,
    c: F,
    sigma: F,
    bcross: F,
) -> (F, F) {
    let m = F::from_usize(arm_count).unwrap();
    let sqrt_t = F::from_usize(rounds).unwrap().sqrt();
    let two = lit::<F>(2.0);
    let confidence = two * c * sigma * m * sqrt_t;
    let blag = confidence + two * bcross * sqrt_t + F::one();
    let cucb = two * confidence + F::one();
    (blag, cucb)
}

/// The closed-form quantities for one instance, bundled for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport<F: Scalar> {
    pub b0: F,
    pub bstar: F,
    pub bcross: F,
    /// Confidence scale the bounds were evaluated at; `min_c` unless
    /// overridden.
    pub c: F,
    pub blag_bound: F,
    pub cucb_bound: F,
}

impl<F: Scalar> BoundsReport<F> {
    pub fn compute(
        degrees: &[F],
        beta0: &[F],
        arm_count: usize,
        rounds: usize,
        sigma: F,
        c_override: Option<F>,
    ) -> Result<Self, BoundsError> {
        let b0 = checked_mass(beta0)?;
        let bstar = compute_bstar(degrees, beta0)?;
        let bcross = compute_bcross(degrees, beta0)?;
        let c = c_override.unwrap_or_else(|| min_c(arm_count, rounds, bcross));
        let (blag_bound, cucb_bound) = regret_bounds(arm_count, rounds, c, sigma, bcross);
        Ok(BoundsReport {
            b0,
            bstar,
            bcross,
            c,
            blag_bound,
            cucb_bound,
        })
    }
}

/// Exhaustive minimizer of `d · delta` over jointly valid arm subsets.
/// Value ties go to the lexicographically smallest sorted id set, so the
/// result is a deterministic oracle. Exponential; capped at
/// [`MAX_BRUTE_FORCE_ARMS`].
pub fn brute_force_optimum<F: Scalar>(
    degrees: &[F],
    beta0: &[F],
    arms: &[BaseAction<F>],
) -> Result<(SuperAction<F>, F), BoundsError> {
    if arms.len() > MAX_BRUTE_FORCE_ARMS {
        return Err(BoundsError::InstanceTooLarge { arms: arms.len() });
    }
    let m = beta0.len();
    let tol = interval_tolerance::<F>();
    let mut best = SuperAction::empty(m);
    let mut best_value = F::zero();
    let mut delta = vec![F::zero(); m];
    for mask in 0u32..(1u32 << arms.len()) {
        for v in delta.iter_mut() {
            *v = F::zero();
        }
        let mut ids = Vec::new();
        for (i, arm) in arms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                delta[arm.idx_plus as usize] += arm.magnitude;
                delta[arm.idx_minus as usize] -= arm.magnitude;
                ids.push(i as u32);
            }
        }
        let valid = beta0
            .iter()
            .zip(&delta)
            .all(|(&b, &d)| b + d >= -tol && b + d <= F::one() + tol);
        if !valid {
            continue;
        }
        let value = dot(degrees, &delta);
        if value < best_value || (value == best_value && ids < best.arm_ids) {
            best_value = value;
            best = SuperAction {
                arm_ids: ids,
                delta: delta.clone(),
            };
        }
    }
    Ok((best, best_value))
}

/// Cumulative gap between achieved noise-free rewards and `alpha` times the
/// optimum value, one entry per round.
pub fn alpha_regret<F: Scalar>(true_rewards: &[F], optimum_value: F, alpha: F) -> Vec<F> {
    let mut acc = F::zero();
    true_rewards
        .iter()
        .map(|&r| {
            acc += r - alpha * optimum_value;
            acc
        })
        .collect()
}

/// One random jointly valid arm subset. Tries rejection on uniform subsets
/// of random size first; if the instance is too crowded for that, falls
/// back to the longest valid prefix of a shuffled candidate order, which is
/// still a valid (possibly empty) subset.
pub fn sample_valid_combination<F: Scalar>(
    beta0: &[F],
    arms: &[BaseAction<F>],
    rng: &mut StdRng,
) -> SuperAction<F> {
    let m = beta0.len();
    let max_k = arms.len().min(2 * m);
    const REJECTION_TRIES: usize = 32;
    for _ in 0..REJECTION_TRIES {
        let k = rng.gen_range(0..=max_k);
        let picked = index::sample(rng, arms.len(), k);
        let ids: Vec<u32> = picked.iter().map(|i| i as u32).collect();
        if let Ok(sa) = combine(beta0, &ids, arms) {
            return sa;
        }
    }
    let mut order: Vec<u32> = (0..arms.len() as u32).collect();
    shuffle(&mut order, rng);
    let target = rng.gen_range(0..=max_k);
    let mut sa = SuperAction::empty(m);
    for &i in &order {
        if sa.len() >= target {
            break;
        }
        let arm = &arms[i as usize];
        if sa.can_add(beta0, arm) {
            sa.add(arm);
        }
    }
    sa
}

/// Samples valid combinations and counts how many land below the `bstar`
/// floor (beyond tolerance). Zero on a correct implementation.
pub fn reward_floor_violations<F: Scalar>(
    degrees: &[F],
    beta0: &[F],
    arms: &[BaseAction<F>],
    samples: usize,
    seed: u64,
) -> Result<usize, BoundsError> {
    let bstar = compute_bstar(degrees, beta0)?;
    let tol = interval_tolerance::<F>();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..samples {
        let sa = sample_valid_combination(beta0, arms, &mut rng);
        if sa.dot(degrees) < bstar - tol {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Samples pairs of valid combinations and counts reward spreads above the
/// `bcross` ceiling (beyond tolerance). Zero on a correct implementation.
pub fn pairwise_spread_violations<F: Scalar>(
    degrees: &[F],
    beta0: &[F],
    arms: &[BaseAction<F>],
    samples: usize,
    seed: u64,
) -> Result<usize, BoundsError> {
    let bcross = compute_bcross(degrees, beta0)?;
    let tol = interval_tolerance::<F>();
    let mut rng = StdRng::seed_from_u64(derive_seed(seed, 1));
    let mut violations = 0;
    for _ in 0..samples {
        let first = sample_valid_combination(beta0, arms, &mut rng);
        let second = sample_valid_combination(beta0, arms, &mut rng);
        if first.dot(degrees) - second.dot(degrees) > bcross + tol {
            violations += 1;
        }
    }
    Ok(violations)
}
