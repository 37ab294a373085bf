//! Randomized invariants over the core types: structural soundness of the
//! generated graphs, admissibility of everything the policies play, and
//! agreement between incremental and from-scratch computations.

use proptest::prelude::*;

use blag_core::action::{
    combine, is_valid, read_arm_list, sample_base_actions, write_arm_list, ActionError,
    BaseAction,
};
use blag_core::asg::ActionSetGraph;
use blag_core::bandit::{
    blag_run, epsilon_schedule, BlagConfig, EstimatorState, RewardEnv, UpdateRule,
};
use blag_core::bounds::{compute_bcross, compute_bstar};
use blag_core::network::generate_ba;

fn beta0_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..0.95f64, m)
}

proptest! {
    #[test]
    fn ba_graphs_are_symmetric_with_consistent_degrees(
        n in 3usize..80,
        p in 1usize..4,
        seed in any::<u64>(),
    ) {
        prop_assume!(p < n);
        let net = generate_ba::<f64>(n, p, seed).unwrap();
        let degree_sum: u32 = (0..n as u32).map(|v| net.degree(v)).sum();
        prop_assert_eq!(degree_sum as usize, 2 * net.edge_count());
        for v in 0..n as u32 {
            let neighbors = net.neighbors(v);
            prop_assert!(neighbors.windows(2).all(|w| w[0] < w[1]));
            for &w in neighbors {
                prop_assert!(net.neighbors(w).contains(&v), "missing reverse of ({v}, {w})");
            }
        }
    }

    #[test]
    fn sampled_arms_are_singleton_valid_zero_sum(
        beta0 in (2usize..6).prop_flat_map(beta0_strategy),
        count in 1usize..25,
        seed in any::<u64>(),
    ) {
        let m = beta0.len();
        let arms = sample_base_actions(m, count, &beta0, seed).unwrap();
        prop_assert_eq!(arms.len(), count);
        for a in &arms {
            prop_assert!(is_valid(&beta0, [a]));
            let sum: f64 = a.dense(m).iter().sum();
            prop_assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn graph_edges_agree_with_the_validity_predicate(
        beta0 in beta0_strategy(4),
        count in 2usize..12,
        arm_seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let arms = sample_base_actions(4, count, &beta0, arm_seed).unwrap();
        let g = ActionSetGraph::new(beta0.clone(), arms.clone(), shuffle_seed);
        let edges = g.materialized_edges();
        for u in 0..count as u32 {
            for v in u + 1..count as u32 {
                let joint = is_valid(&beta0, [&arms[u as usize], &arms[v as usize]]);
                prop_assert_eq!(edges.contains(&(u, v)), joint, "pair ({}, {})", u, v);
            }
        }
        // Lazy neighborhoods agree with the materialization.
        for u in 0..count as u32 {
            let mut lazy = g.neighbors_upto(u, count);
            lazy.sort_unstable();
            let mut from_edges: Vec<u32> = edges
                .iter()
                .filter_map(|&(a, b)| {
                    if a == u { Some(b) } else if b == u { Some(a) } else { None }
                })
                .collect();
            from_edges.sort_unstable();
            prop_assert_eq!(lazy, from_edges);
        }
    }

    #[test]
    fn combine_matches_dense_accumulation(
        beta0 in beta0_strategy(5),
        count in 1usize..20,
        arm_seed in any::<u64>(),
        pick in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
    ) {
        let arms = sample_base_actions(5, count, &beta0, arm_seed).unwrap();
        let ids: Vec<u32> = pick.iter().map(|i| i.index(count) as u32).collect();
        let mut dense = vec![0.0f64; 5];
        let mut unique: Vec<u32> = ids.clone();
        unique.sort_unstable();
        unique.dedup();
        for &i in &unique {
            let a = &arms[i as usize];
            dense[a.idx_plus as usize] += a.magnitude;
            dense[a.idx_minus as usize] -= a.magnitude;
        }
        let members: Vec<&BaseAction<f64>> =
            unique.iter().map(|&i| &arms[i as usize]).collect();
        match combine(&beta0, &ids, &arms) {
            Ok(sa) => {
                prop_assert!(is_valid(&beta0, members.iter().copied()));
                prop_assert_eq!(sa.arm_ids, unique);
                let total: f64 = sa.delta.iter().sum();
                prop_assert!(total.abs() < 1e-12);
                for (a, b) in sa.delta.iter().zip(&dense) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
            Err(ActionError::InvalidCombination) => {
                prop_assert!(!is_valid(&beta0, members.iter().copied()));
            }
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    #[test]
    fn estimates_are_sample_means(
        observations in prop::collection::vec((0u32..4, -10.0..10.0f64), 1..60),
    ) {
        let mut est = EstimatorState::new(4);
        for (round, &(arm, reward)) in observations.iter().enumerate() {
            est.update(&[(arm, reward)], round + 1, UpdateRule::ArmMean);
        }
        for arm in 0..4u32 {
            let mine: Vec<f64> = observations
                .iter()
                .filter(|&&(a, _)| a == arm)
                .map(|&(_, r)| r)
                .collect();
            prop_assert_eq!(est.pulls(arm) as usize, mine.len());
            if !mine.is_empty() {
                let mean = mine.iter().sum::<f64>() / mine.len() as f64;
                prop_assert!((est.mu(arm) - mean).abs() < 1e-9);
            } else {
                prop_assert_eq!(est.mu(arm), 0.0);
            }
        }
    }

    #[test]
    fn schedule_is_a_probability_with_bounded_total(
        epsilon0 in 0.01..10.0f64,
        rounds in 1usize..2000,
    ) {
        let mut total = 0.0;
        for t in 1..=rounds {
            let eps = epsilon_schedule(t, epsilon0);
            prop_assert!(eps > 0.0 && eps <= 1.0);
            total += eps;
        }
        prop_assert!(total <= 2.0 * epsilon0 * (rounds as f64).sqrt());
    }

    #[test]
    fn arm_lists_round_trip(
        m in 2u32..40,
        arms_raw in prop::collection::vec((any::<u32>(), any::<u32>(), 0.0..1.0f64), 0..30),
    ) {
        let arms: Vec<BaseAction<f64>> = arms_raw
            .iter()
            .enumerate()
            .map(|(id, &(a, b, mag))| {
                let idx_plus = a % m;
                let mut idx_minus = b % (m - 1);
                if idx_minus >= idx_plus {
                    idx_minus += 1;
                }
                BaseAction { id: id as u32, idx_plus, idx_minus, magnitude: mag }
            })
            .collect();
        let mut buf = Vec::new();
        write_arm_list(&arms, &mut buf).unwrap();
        let back = read_arm_list::<f64, _>(buf.as_slice()).unwrap();
        prop_assert_eq!(arms, back);
    }

    #[test]
    fn runs_only_play_admissible_combinations(
        beta0 in beta0_strategy(4),
        count in 2usize..14,
        sigma in 0.0..1.5f64,
        rounds in 1usize..50,
        seed in any::<u64>(),
    ) {
        let arms = sample_base_actions(4, count, &beta0, seed ^ 1).unwrap();
        let g = ActionSetGraph::new(beta0.clone(), arms.clone(), seed ^ 2);
        let mut env = RewardEnv::new(vec![3.0, 1.0, 4.0, 2.0], sigma, seed ^ 3);
        let trace = blag_run(&g, &mut env, &BlagConfig::new(1.0, rounds, seed));
        prop_assert_eq!(trace.len(), rounds);
        for rec in trace.records() {
            let members: Vec<&BaseAction<f64>> =
                rec.arm_ids.iter().map(|&i| &arms[i as usize]).collect();
            prop_assert!(is_valid(&beta0, members.iter().copied()));
            prop_assert_eq!(rec.arm_ids.len(), rec.per_arm_rewards.len());
        }
    }

    #[test]
    fn mass_bounds_keep_their_signs(
        (degrees, raw_beta0) in (2usize..10).prop_flat_map(|m| {
            (
                prop::collection::vec(0.0..40.0f64, m),
                prop::collection::vec(0.0..1.0f64, m),
            )
        }),
    ) {
        prop_assert!(compute_bstar(&degrees, &raw_beta0).unwrap() <= 1e-12);
        prop_assert!(compute_bcross(&degrees, &raw_beta0).unwrap() >= -1e-12);
    }
}

/// Edges only certify pairs: three arms can be pairwise compatible yet
/// jointly inadmissible, which is why the policies re-check accumulation.
#[test]
fn pairwise_validity_does_not_imply_joint_validity() {
    let beta0 = vec![0.5, 0.5];
    let arms: Vec<BaseAction<f64>> = (0..3)
        .map(|id| BaseAction {
            id,
            idx_plus: 0,
            idx_minus: 1,
            magnitude: 0.2,
        })
        .collect();
    let g = ActionSetGraph::new(beta0.clone(), arms.clone(), 0);
    assert_eq!(g.materialized_edges().len(), 3, "all pairs are edges");
    let refs: Vec<&BaseAction<f64>> = arms.iter().collect();
    assert!(!is_valid(&beta0, refs.iter().copied()), "the triangle overdraws");
}
