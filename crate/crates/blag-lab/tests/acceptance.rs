//! Acceptance gate: every release-blocking property in one test, one
//! pass/fail line each (run with `--nocapture` to see them on success).
//!
//! The criteria fall in three groups: analytic oracles on sampled instances
//! (1-3, 6), frozen-seed experiment comparisons through the full pipeline
//! (4-5, 7-8), and engineering properties (9-10). Everything is seeded, so a
//! pass is reproducible byte-for-byte; the seed lists below are part of the
//! gate and must not drift.

use std::fs;
use std::time::Instant;

use blag_core::action::{default_arm_count, sample_base_actions, BaseAction};
use blag_core::asg::ActionSetGraph;
use blag_core::bandit::{blag_run, BlagConfig, EstimatorState, RewardEnv, UpdateRule};
use blag_core::bounds::{brute_force_optimum, pairwise_spread_violations, reward_floor_violations};
use blag_core::diffusion::{first_crossing_slot, TransmissionPolicy};
use blag_core::network::{generate_ba, write_edge_list};
use blag_core::rng::derive_seed;
use blag_lab::{run_experiment, ExperimentConfig, RunOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Degrees of `m` uniformly sampled nodes from a fresh preferential-attachment
/// graph, a matching uniform `beta0`, and an id-indexed sampled arm list.
fn sampled_instance(
    n: usize,
    p: usize,
    m: usize,
    beta_hi: f64,
    arm_count: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>, Vec<BaseAction<f64>>) {
    let net = generate_ba::<f64>(n, p, derive_seed(seed, 1)).expect("graph");
    let mut node_rng = StdRng::seed_from_u64(derive_seed(seed, 2));
    let picks = rand::seq::index::sample(&mut node_rng, n, m);
    let degrees: Vec<f64> = picks.iter().map(|v| net.degree(v as u32) as f64).collect();
    let mut beta_rng = StdRng::seed_from_u64(derive_seed(seed, 3));
    let beta0: Vec<f64> = (0..m).map(|_| beta_rng.gen_range(0.0..beta_hi)).collect();
    let arms = sample_base_actions(m, arm_count, &beta0, derive_seed(seed, 4)).expect("arms");
    (degrees, beta0, arms)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn record(&mut self, criterion: usize, pass: bool, detail: String, started: Instant) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let line = format!(
            "criterion {criterion}: {verdict} - {detail} ({:.1}s)",
            started.elapsed().as_secs_f64()
        );
        println!("{line}");
        if !pass {
            self.failures.push(line);
        }
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };

    // 1 + 2: reward floor and pairwise spread oracles. 50 instances cycling
    // m in {5, 10, 20}, 1,000 sampled combinations (or pairs) each; a single
    // violation fails the build.
    let t = Instant::now();
    let mut floor_violations = 0;
    let mut spread_violations = 0;
    for i in 0..50u64 {
        let m = [5, 10, 20][(i % 3) as usize];
        let (degrees, beta0, arms) =
            sampled_instance(500, 3, m, 1.0, default_arm_count(m), 100 + i);
        floor_violations +=
            reward_floor_violations(&degrees, &beta0, &arms, 1000, derive_seed(100 + i, 5))
                .expect("floor oracle");
        spread_violations +=
            pairwise_spread_violations(&degrees, &beta0, &arms, 1000, derive_seed(100 + i, 6))
                .expect("spread oracle");
    }
    gate.record(
        1,
        floor_violations == 0,
        format!("reward floor: {floor_violations} violations over 50 instances x 1000 samples"),
        t,
    );
    gate.record(
        2,
        spread_violations == 0,
        format!("pairwise spread: {spread_violations} violations over 50 instances x 1000 pairs"),
        t,
    );

    // 3: concentration of the per-arm running means. Replays the estimator
    // from the recorded trace and counts (arm, round) pairs outside the
    // c*sigma/sqrt(pulls) envelope; the Gaussian tail predicts ~0.0027 so the
    // 0.0222 budget has an order of magnitude of slack.
    let t = Instant::now();
    let (c, sigma) = (3.0f64, 1.0f64);
    let mut checked = 0u64;
    let mut outside = 0u64;
    for seed in 0..10u64 {
        let m = 10;
        let arm_count = default_arm_count(m);
        let (degrees, beta0, arms) = sampled_instance(500, 3, m, 0.3, arm_count, 200 + seed);
        let truths: Vec<f64> = arms.iter().map(|a| a.dot(&degrees)).collect();
        let asg = ActionSetGraph::new(beta0, arms, derive_seed(seed, 7));
        let mut env = RewardEnv::new(degrees, sigma, derive_seed(seed, 8));
        let cfg = BlagConfig::new(1.0, 2000, derive_seed(seed, 9));
        let trace = blag_run(&asg, &mut env, &cfg);
        let mut est = EstimatorState::<f64>::new(arm_count);
        for (i, rec) in trace.records().iter().enumerate() {
            let rewards: Vec<(u32, f64)> = rec
                .arm_ids
                .iter()
                .copied()
                .zip(rec.per_arm_rewards.iter().copied())
                .collect();
            est.update(&rewards, i + 1, UpdateRule::ArmMean);
            for arm in 0..arm_count as u32 {
                let pulls = est.pulls(arm);
                if pulls == 0 {
                    continue;
                }
                checked += 1;
                if (truths[arm as usize] - est.mu(arm)).abs()
                    > c * sigma / (pulls as f64).sqrt() + 1e-12
                {
                    outside += 1;
                }
            }
        }
    }
    let fraction = outside as f64 / checked as f64;
    gate.record(
        3,
        fraction <= 2.0 * (-c * c / 2.0f64).exp(),
        format!("concentration: {outside}/{checked} envelope misses (fraction {fraction:.5}, budget 0.0222)"),
        t,
    );

    // 4 + 5: the headline comparison at 200 arms, T=1000, epsilon0=1 on a
    // shared 10k-node graph, 20 seeds. The learner must land at least 5x more
    // negative than the optimism baseline (medians, both below zero); its
    // realized regret must stay under the closed-form ceiling on every
    // replicate, and the two ceilings must sit below the 0.55 ratio.
    let t = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let graph_path = dir.path().join("ba10k.edges");
    let net = generate_ba::<f64>(10_000, 5, 7).expect("graph");
    write_edge_list(&net, fs::File::create(&graph_path).expect("create")).expect("write graph");
    let seeds: Vec<String> = (1..=20).map(|s| s.to_string()).collect();
    let compare_out = dir.path().join("compare");
    let compare_cfg = ExperimentConfig::parse(&format!(
        r#"
kind = "bandit-compare"
seeds = [{seeds}]
out_dir = "{out}"

[graph]
file = "{graph}"

[bandit]
m = 36
arm_count = 200
T = 1000
epsilon0 = 1.0
sigma = 2.2
xi = 0.3
"#,
        seeds = seeds.join(", "),
        out = compare_out.display(),
        graph = graph_path.display(),
    ))
    .expect("compare config");
    let report = run_experiment(&compare_cfg, &RunOptions::default()).expect("compare run");
    let blag_med = report.aggregates["blag_normalized"].median;
    let cucb_med = report.aggregates["cucb_normalized"].median;
    gate.record(
        4,
        blag_med < 0.0 && cucb_med < 0.0 && blag_med <= 5.0 * cucb_med,
        format!(
            "reward medians: blag {blag_med:.5}, cucb {cucb_med:.5}, ratio {:.2} (need >= 5, both negative)",
            blag_med / cucb_med
        ),
        t,
    );
    let t = Instant::now();
    let regret_breaches = report
        .replicates
        .iter()
        .filter(|r| r.metrics["blag_regret_final"] > r.metrics["blag_bound"])
        .count();
    let bound_ratio = report.aggregates["bound_ratio"].median;
    gate.record(
        5,
        regret_breaches == 0 && bound_ratio < 0.55,
        format!(
            "regret ceiling: {regret_breaches}/20 breaches, bound ratio median {bound_ratio:.3} (need < 0.55)"
        ),
        t,
    );

    // 6: noise-free convergence to the brute-force optimum on a 4-component,
    // 8-arm instance. The exploit step ranks a floor(sqrt(m)) = 2 random-arm
    // pool, so per round it can cover at most two of the optimum's members;
    // the measured last-100 mean lands well short of the 5% band whenever the
    // optimum needs three or more arms. Reported honestly either way.
    let t = Instant::now();
    let mut convergence_passes = 0;
    let mut achieved: Vec<f64> = Vec::new();
    for seed in 0..10u64 {
        let (degrees, beta0, arms) = sampled_instance(300, 3, 4, 1.0, 8, 300 + seed);
        let (_, opt_value) = brute_force_optimum(&degrees, &beta0, &arms).expect("optimum");
        let asg = ActionSetGraph::new(beta0, arms, derive_seed(seed, 10));
        let mut env = RewardEnv::new(degrees, 0.0, derive_seed(seed, 11));
        let cfg = BlagConfig::new(1.0, 500, derive_seed(seed, 12));
        let trace = blag_run(&asg, &mut env, &cfg);
        let rewards = trace.true_rewards();
        let tail_mean = rewards[400..].iter().sum::<f64>() / 100.0;
        if opt_value != 0.0 {
            achieved.push(tail_mean / opt_value);
        }
        if (tail_mean - opt_value).abs() <= 0.05 * opt_value.abs() {
            convergence_passes += 1;
        }
    }
    let median_fraction = median(&mut achieved);
    gate.record(
        6,
        convergence_passes >= 9,
        format!(
            "noise-free convergence: {convergence_passes}/10 within 5% of optimum (median achieved fraction {median_fraction:.2})"
        ),
        t,
    );

    // 7: the degree-splitting policy must postpone the 10% sensitive-fraction
    // crossing relative to uniform spontaneous transmission. Runs that never
    // cross within the slot budget count as budget+1, which can only shrink
    // the true (right-censored) median, so the strict comparison stays sound.
    let t = Instant::now();
    let max_slots = 20_000;
    let mut spont: Vec<f64> = Vec::new();
    let mut adaptive: Vec<f64> = Vec::new();
    for seed in 1..=30u64 {
        let net = generate_ba::<f64>(1000, 3, derive_seed(seed, 13))
            .expect("graph")
            .assign_states(1, 0.5, derive_seed(seed, 14))
            .expect("states");
        let s = first_crossing_slot(
            &net,
            TransmissionPolicy::Spontaneous { p: 5e-5 },
            1,
            0.1,
            max_slots,
            derive_seed(seed, 15),
        )
        .expect("cascade");
        let a = first_crossing_slot(
            &net,
            TransmissionPolicy::AdaptiveDegreeSplit { p_low: 1e-4 },
            1,
            0.1,
            max_slots,
            derive_seed(seed, 16),
        )
        .expect("cascade");
        spont.push(s.unwrap_or(max_slots + 1) as f64);
        adaptive.push(a.unwrap_or(max_slots + 1) as f64);
    }
    let spont_med = median(&mut spont);
    let adaptive_med = median(&mut adaptive);
    gate.record(
        7,
        adaptive_med > spont_med,
        format!(
            "crossing postponement: median slot {adaptive_med:.0} (split) vs {spont_med:.0} (spontaneous) over 30 seeds"
        ),
        t,
    );

    // 8: terminal normalized info loss must order learner < decaying-reply <
    // monotone-decay, with the learner at most 0.7x the decaying-reply value.
    let t = Instant::now();
    let info_out = dir.path().join("info");
    let info_cfg = ExperimentConfig::parse(&format!(
        r#"
kind = "info-loss"
seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
out_dir = "{out}"

[graph]
ba = {{ n = 1000, p = 3 }}

[bandit]
T = 400
sigma = 1.0
xi = 0.1

[diffusion]
rounds = 100
label_probability = 0.5
sensitive_seeds = 10
uninformed_fraction = 0.5
"#,
        out = info_out.display(),
    ))
    .expect("info config");
    let info = run_experiment(&info_cfg, &RunOptions::default()).expect("info run");
    let bandit = info.aggregates["terminal_loss_bandit_driven"].median;
    let riposte = info.aggregates["terminal_loss_riposte_like"].median;
    let monotone = info.aggregates["terminal_loss_monotone_decreasing"].median;
    gate.record(
        8,
        bandit < riposte && riposte < monotone && bandit <= 0.7 * riposte,
        format!(
            "info loss medians: learner {bandit:.3} < decaying-reply {riposte:.3} < monotone {monotone:.3}, learner/reply {:.2} (need <= 0.7)",
            bandit / riposte
        ),
        t,
    );

    // 9: per-round cost must scale linearly in the component count: 4x the
    // components may cost at most 6x the time. Median of three runs per size
    // smooths allocator noise.
    let t = Instant::now();
    let mut per_round = Vec::new();
    for &m in &[400usize, 1600] {
        let arm_count = 4 * m;
        let (degrees, beta0, arms) = sampled_instance(10_000, 5, m, 0.3, arm_count, 400 + m as u64);
        let mut timings: Vec<f64> = (0..3)
            .map(|rep| {
                let asg = ActionSetGraph::new(beta0.clone(), arms.clone(), derive_seed(rep, 17));
                let mut env = RewardEnv::new(degrees.clone(), 1.0, derive_seed(rep, 18));
                let cfg = BlagConfig::new(1.0, 300, derive_seed(rep, 19));
                let started = Instant::now();
                let trace = blag_run(&asg, &mut env, &cfg);
                assert_eq!(trace.len(), 300);
                started.elapsed().as_secs_f64() / 300.0
            })
            .collect();
        per_round.push(median(&mut timings));
    }
    let scaling = per_round[1] / per_round[0];
    gate.record(
        9,
        scaling <= 6.0,
        format!(
            "per-round scaling: {:.3}ms at m=400, {:.3}ms at m=1600, ratio {scaling:.2} (need <= 6)",
            per_round[0] * 1e3,
            per_round[1] * 1e3
        ),
        t,
    );

    // 10: byte-identical CSV output on re-run, for every experiment kind.
    // report.json is excluded only because it echoes the output directory.
    let t = Instant::now();
    let kind_configs = [
        (
            "bandit-compare",
            "[bandit]\nm = 6\narm_count = 20\nT = 40\n",
        ),
        ("bounds-verify", "[bandit]\nm = 6\narm_count = 20\nT = 40\n"),
        (
            "info-loss",
            "[bandit]\nT = 50\nxi = 0.1\n\n[diffusion]\nrounds = 15\nsensitive_seeds = 5\n",
        ),
        (
            "cascade",
            "[diffusion]\nslots = 80\nsensitive_seeds = 2\n",
        ),
    ];
    let mut determinism_ok = true;
    let mut determinism_note = String::from("all four kinds byte-identical on re-run");
    'kinds: for (kind, extra) in kind_configs {
        let mut outputs: Vec<std::path::PathBuf> = Vec::new();
        for leg in 0..2 {
            let out = dir.path().join(format!("det_{kind}_{leg}"));
            let cfg = ExperimentConfig::parse(&format!(
                "kind = \"{kind}\"\nseeds = [5, 6]\nout_dir = \"{}\"\n\n[graph]\nba = {{ n = 300, p = 3 }}\n\n{extra}",
                out.display(),
            ))
            .expect("determinism config");
            run_experiment(&cfg, &RunOptions { workers: Some(1 + leg), allow_large: false })
                .expect("determinism run");
            outputs.push(out);
        }
        let mut names: Vec<String> = fs::read_dir(&outputs[0])
            .expect("read out dir")
            .map(|e| e.expect("entry").file_name().into_string().expect("name"))
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        if names.is_empty() {
            determinism_ok = false;
            determinism_note = format!("{kind}: no CSV output");
            break;
        }
        for name in names {
            let a = fs::read(outputs[0].join(&name)).expect("read a");
            let b = fs::read(outputs[1].join(&name)).expect("read b");
            if a != b {
                determinism_ok = false;
                determinism_note = format!("{kind}: {name} differs between runs");
                break 'kinds;
            }
        }
    }
    gate.record(10, determinism_ok, determinism_note, t);

    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}
