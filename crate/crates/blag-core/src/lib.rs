//! Constrained combinatorial bandits over an action-set graph.
//!
//! The model: a set of `m` target probabilities `beta0` (one per watched
//! network edge) can be perturbed by *base actions*, each of which moves a
//! fixed amount of probability mass from one component to another. A
//! combination of base actions is admissible only while every component stays
//! inside `[0, 1]`. Rewards are degree-weighted and noisy, and the learner
//! (BLAG, with a CUCB baseline) has to find mass movements that minimise the
//! expected degree-weighted spread.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `F64`
//! aliases below are what the CLI and most callers want.

pub mod action;
pub mod asg;
pub mod bandit;
pub mod bounds;
pub mod diffusion;
pub mod network;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

pub type NetworkF64 = network::Network<f64>;
pub type TargetSetF64 = network::TargetSet<f64>;
pub type BaseActionF64 = action::BaseAction<f64>;
pub type SuperActionF64 = action::SuperAction<f64>;
pub type ActionSetGraphF64 = asg::ActionSetGraph<f64>;
pub type EstimatorStateF64 = bandit::EstimatorState<f64>;
pub type RewardEnvF64 = bandit::RewardEnv<f64>;
pub type RegretTraceF64 = bandit::RegretTrace<f64>;
pub type BoundsReportF64 = bounds::BoundsReport<f64>;
pub type TransmissionPolicyF64 = diffusion::TransmissionPolicy<f64>;
pub type CascadeTraceF64 = diffusion::CascadeTrace<f64>;
pub type InfoLossSeriesF64 = diffusion::InfoLossSeries<f64>;

pub type NetworkF32 = network::Network<f32>;
pub type BaseActionF32 = action::BaseAction<f32>;
pub type ActionSetGraphF32 = asg::ActionSetGraph<f32>;
