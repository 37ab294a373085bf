//! Replicate orchestration. Each replicate seed fully determines its
//! instance and every RNG stream through `derive_seed(seed, TAG)`, so runs
//! reproduce byte-for-byte regardless of worker count. Replicates fan out
//! on a local thread pool; report assembly happens after the join.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use blag_core::action::{combine, default_arm_count, BaseAction, SuperAction};
use blag_core::action::sample_base_actions;
use blag_core::asg::ActionSetGraph;
use blag_core::bandit::{blag_run, cucb_run, BlagConfig, RegretTrace, RewardEnv};
use blag_core::bounds::{pairwise_spread_violations, reward_floor_violations, BoundsReport};
use blag_core::diffusion::{
    run_cascade, run_info_loss_experiment, write_cascade_csv, write_info_loss_csv,
    TransmissionPolicy,
};
use blag_core::network::{generate_ba, load_edge_list, Network};
use blag_core::rng::derive_seed;

use crate::config::{CommitMode, ExperimentConfig, ExperimentKind, GraphSource};
use crate::report::{build_report, write_metrics_csv, write_report, ExperimentReport};
use crate::report::ReplicateReport;

// Stream tags for derive_seed(replicate_seed, TAG). Stable identifiers:
// renumbering them changes every emitted byte.
const TAG_GRAPH: u64 = 1;
const TAG_TARGET_NODES: u64 = 2;
const TAG_BETA0: u64 = 3;
const TAG_ARMS: u64 = 4;
const TAG_SCAN_ORDER: u64 = 5;
const TAG_BLAG_NOISE: u64 = 6;
const TAG_BLAG_POLICY: u64 = 7;
const TAG_CUCB_NOISE: u64 = 8;
const TAG_CUCB_POLICY: u64 = 9;
const TAG_ORACLE_FLOOR: u64 = 10;
const TAG_ORACLE_SPREAD: u64 = 11;
const TAG_EDGE_WEIGHTS: u64 = 20;
const TAG_STATES: u64 = 21;
const TAG_INFO_LOSS: u64 = 26;
const TAG_CASCADE_BASE: u64 = 30;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `BLAG_LAB_WORKERS` and the machine default.
    pub workers: Option<usize>,
    /// Waives the memory-budget refusal.
    pub allow_large: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    let kind = cfg.kind.expect("validated config has a kind");

    let budget = cfg.memory_budget_mb.saturating_mul(1 << 20);
    let estimate = cfg.estimated_bytes();
    if estimate > budget && !opts.allow_large {
        bail!(
            "estimated footprint {estimate} bytes exceeds memory_budget_mb = {} MiB; \
             pass --allow-large (or raise the budget) to run anyway",
            cfg.memory_budget_mb
        );
    }

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;

    // File-backed graphs load once and are shared read-only.
    let shared: Option<Network<f64>> = match cfg.graph_source() {
        GraphSource::File(path) => Some(load_graph(&path)?),
        GraphSource::Ba(_) => None,
    };

    let workers = resolve_workers(opts, cfg.seeds.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let replicates: anyhow::Result<Vec<ReplicateReport>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                run_replicate(cfg, kind, seed, shared.as_ref())
                    .with_context(|| format!("{kind} replicate, seed {seed}"))
            })
            .collect()
    });
    let replicates = replicates?;

    let report = build_report(cfg, replicates);
    write_report(&report, &cfg.out_dir)?;
    write_metrics_csv(&report.replicates, &cfg.out_dir)?;
    Ok(report)
}

fn resolve_workers(opts: &RunOptions, replicates: usize) -> usize {
    let configured = opts.workers.or_else(|| {
        std::env::var("BLAG_LAB_WORKERS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
    });
    let fallback = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    configured
        .filter(|&w| w > 0)
        .unwrap_or(fallback)
        .min(replicates.max(1))
}

fn load_graph(path: &Path) -> anyhow::Result<Network<f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_edge_list(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn run_replicate(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    seed: u64,
    shared: Option<&Network<f64>>,
) -> anyhow::Result<ReplicateReport> {
    let owned;
    let net: &Network<f64> = match shared {
        Some(net) => net,
        None => {
            let GraphSource::Ba(ba) = cfg.graph_source() else {
                unreachable!("shared graph is None only for generated graphs")
            };
            owned = generate_ba(ba.n, ba.p, derive_seed(seed, TAG_GRAPH))?;
            &owned
        }
    };
    match kind {
        ExperimentKind::BanditCompare => bandit_compare_replicate(cfg, seed, net),
        ExperimentKind::BoundsVerify => bounds_verify_replicate(cfg, seed, net),
        ExperimentKind::InfoLoss => info_loss_replicate(cfg, seed, net),
        ExperimentKind::Cascade => cascade_replicate(cfg, seed, net),
    }
}

/// Degrees of `m` uniformly sampled distinct nodes plus uniform(0, xi)
/// initial probabilities; the arm set and scan order ride on further
/// streams of the same replicate seed, so both policies see one instance.
struct Instance {
    degrees: Vec<f64>,
    asg: ActionSetGraph<f64>,
}

fn sample_instance(cfg: &ExperimentConfig, seed: u64, net: &Network<f64>) -> anyhow::Result<Instance> {
    let m = cfg.bandit.m;
    if m > net.node_count() {
        bail!("bandit.m = {m} exceeds the graph's {} nodes", net.node_count());
    }
    let mut node_rng = StdRng::seed_from_u64(derive_seed(seed, TAG_TARGET_NODES));
    let picks = rand::seq::index::sample(&mut node_rng, net.node_count(), m);
    let degrees: Vec<f64> = picks.iter().map(|v| net.degree(v as u32) as f64).collect();

    let mut beta_rng = StdRng::seed_from_u64(derive_seed(seed, TAG_BETA0));
    let beta0: Vec<f64> = (0..m).map(|_| beta_rng.gen_range(0.0..cfg.bandit.xi)).collect();

    let arms = sample_base_actions(m, cfg.arm_count(), &beta0, derive_seed(seed, TAG_ARMS))?;
    let asg = ActionSetGraph::new(beta0, arms, derive_seed(seed, TAG_SCAN_ORDER));
    Ok(Instance { degrees, asg })
}

fn write_trace(
    dir: &Path,
    name: &str,
    trace: &RegretTrace<f64>,
    optimum_proxy: f64,
    alpha: f64,
) -> anyhow::Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    trace
        .write_csv(optimum_proxy, alpha, BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

fn bandit_compare_replicate(
    cfg: &ExperimentConfig,
    seed: u64,
    net: &Network<f64>,
) -> anyhow::Result<ReplicateReport> {
    let b = &cfg.bandit;
    let inst = sample_instance(cfg, seed, net)?;
    let beta0 = inst.asg.beta0().to_vec();
    let rounds = b.rounds;

    let bounds = BoundsReport::compute(&inst.degrees, &beta0, inst.asg.arm_count(), rounds, b.sigma, b.c)?;

    let mut blag_cfg = BlagConfig::new(b.epsilon0, rounds, derive_seed(seed, TAG_BLAG_POLICY));
    blag_cfg.update_rule = b.update_rule.into();
    blag_cfg.prior_sigma = b.prior_sigma;
    let mut blag_env = RewardEnv::new(inst.degrees.clone(), b.sigma, derive_seed(seed, TAG_BLAG_NOISE));
    let blag_trace = blag_run(&inst.asg, &mut blag_env, &blag_cfg);

    let mut cucb_env = RewardEnv::new(inst.degrees.clone(), b.sigma, derive_seed(seed, TAG_CUCB_NOISE));
    let cucb_trace = cucb_run(
        &inst.asg,
        &mut cucb_env,
        rounds,
        bounds.c,
        b.pool_mode.into(),
        derive_seed(seed, TAG_CUCB_POLICY),
    );

    // The true optimum is out of exhaustive reach at experiment scale;
    // bstar is a sound stand-in (no valid combination beats it), making
    // the recorded regret an overestimate.
    let optimum_proxy = bounds.bstar;
    let max_degree = inst.degrees.iter().cloned().fold(f64::MIN, f64::max);
    let norm = rounds as f64 * max_degree;

    let blag_cum = blag_trace.final_cumulative_true_reward();
    let cucb_cum = cucb_trace.final_cumulative_true_reward();
    let blag_regret = *blag_trace
        .alpha_regret(optimum_proxy, b.alpha)
        .last()
        .expect("rounds >= 1");
    let cucb_regret = *cucb_trace
        .alpha_regret(optimum_proxy, b.alpha)
        .last()
        .expect("rounds >= 1");

    let blag_name = format!("blag_{seed}.csv");
    let cucb_name = format!("cucb_{seed}.csv");
    write_trace(&cfg.out_dir, &blag_name, &blag_trace, optimum_proxy, b.alpha)?;
    write_trace(&cfg.out_dir, &cucb_name, &cucb_trace, optimum_proxy, b.alpha)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("blag_cumulative".into(), blag_cum);
    metrics.insert("cucb_cumulative".into(), cucb_cum);
    metrics.insert("blag_normalized".into(), blag_cum / norm);
    metrics.insert("cucb_normalized".into(), cucb_cum / norm);
    metrics.insert("blag_regret_final".into(), blag_regret);
    metrics.insert("cucb_regret_final".into(), cucb_regret);
    metrics.insert("max_degree".into(), max_degree);
    insert_bounds(&mut metrics, &bounds);

    Ok(ReplicateReport {
        seed,
        trace_files: vec![blag_name, cucb_name],
        metrics,
    })
}

fn insert_bounds(metrics: &mut BTreeMap<String, f64>, bounds: &BoundsReport<f64>) {
    metrics.insert("b0".into(), bounds.b0);
    metrics.insert("bstar".into(), bounds.bstar);
    metrics.insert("bcross".into(), bounds.bcross);
    metrics.insert("c".into(), bounds.c);
    metrics.insert("blag_bound".into(), bounds.blag_bound);
    metrics.insert("cucb_bound".into(), bounds.cucb_bound);
    metrics.insert("bound_ratio".into(), bounds.blag_bound / bounds.cucb_bound);
}

const ORACLE_SAMPLES: usize = 1000;

fn bounds_verify_replicate(
    cfg: &ExperimentConfig,
    seed: u64,
    net: &Network<f64>,
) -> anyhow::Result<ReplicateReport> {
    let b = &cfg.bandit;
    let inst = sample_instance(cfg, seed, net)?;
    let beta0 = inst.asg.beta0().to_vec();
    let arms = inst.asg.arms();

    let floor = reward_floor_violations(
        &inst.degrees,
        &beta0,
        arms,
        ORACLE_SAMPLES,
        derive_seed(seed, TAG_ORACLE_FLOOR),
    )?;
    let spread = pairwise_spread_violations(
        &inst.degrees,
        &beta0,
        arms,
        ORACLE_SAMPLES,
        derive_seed(seed, TAG_ORACLE_SPREAD),
    )?;
    let bounds = BoundsReport::compute(&inst.degrees, &beta0, inst.asg.arm_count(), b.rounds, b.sigma, b.c)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("floor_violations".into(), floor as f64);
    metrics.insert("spread_violations".into(), spread as f64);
    metrics.insert("oracle_samples".into(), ORACLE_SAMPLES as f64);
    insert_bounds(&mut metrics, &bounds);

    Ok(ReplicateReport {
        seed,
        trace_files: Vec::new(),
        metrics,
    })
}

/// Pick the combination the learner commits to the diffusion policy.
fn committed_combination(
    trace: &RegretTrace<f64>,
    mode: CommitMode,
    beta0: &[f64],
    arms: &[BaseAction<f64>],
) -> anyhow::Result<SuperAction<f64>> {
    let records = trace.records();
    let rec = match mode {
        CommitMode::LastRound => records.last().expect("rounds >= 1"),
        CommitMode::BestPlayed => {
            let mut best = &records[0];
            for rec in &records[1..] {
                if rec.true_reward < best.true_reward {
                    best = rec;
                }
            }
            best
        }
    };
    Ok(combine(beta0, &rec.arm_ids, arms)?)
}

fn info_loss_replicate(
    cfg: &ExperimentConfig,
    seed: u64,
    net: &Network<f64>,
) -> anyhow::Result<ReplicateReport> {
    let b = &cfg.bandit;
    let d = &cfg.diffusion;
    let net = net.sample_edge_weights(b.xi, derive_seed(seed, TAG_EDGE_WEIGHTS))?;
    let net = net.assign_states(d.sensitive_seeds, d.uninformed_fraction, derive_seed(seed, TAG_STATES))?;
    let targets = net.extract_target_set()?;

    let m = targets.len();
    let degrees = targets.degrees_scaled();
    let beta0 = targets.beta0.clone();
    let arm_count = b.arm_count.unwrap_or_else(|| default_arm_count(m));
    let arms = sample_base_actions(m, arm_count, &beta0, derive_seed(seed, TAG_ARMS))?;
    let asg = ActionSetGraph::new(beta0.clone(), arms.clone(), derive_seed(seed, TAG_SCAN_ORDER));

    let mut blag_cfg = BlagConfig::new(b.epsilon0, b.rounds, derive_seed(seed, TAG_BLAG_POLICY));
    blag_cfg.update_rule = b.update_rule.into();
    blag_cfg.prior_sigma = b.prior_sigma;
    let mut env = RewardEnv::new(degrees.clone(), b.sigma, derive_seed(seed, TAG_BLAG_NOISE));
    let trace = blag_run(&asg, &mut env, &blag_cfg);

    let committed = committed_combination(&trace, d.commit, &beta0, &arms)?;
    let committed_reward = committed.dot(&degrees);
    let mut edge_probs = BTreeMap::new();
    for (i, &edge) in targets.target_edges.iter().enumerate() {
        let p = (beta0[i] + committed.delta[i]).clamp(0.0, 1.0);
        edge_probs.insert(edge, p);
    }

    let pc = &d.policies;
    let policies = vec![
        TransmissionPolicy::MonotoneDecreasing {
            p_init: pc.monotone_p_init,
        },
        TransmissionPolicy::RiposteLike {
            p_base: pc.riposte_p_base,
            decrement: pc.riposte_decrement,
            round_probability: pc.riposte_round_probability,
        },
        TransmissionPolicy::BanditDriven { edge_probs },
    ];
    let series = run_info_loss_experiment(
        &net,
        &policies,
        d.rounds,
        d.label_probability,
        derive_seed(seed, TAG_INFO_LOSS),
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("target_count".into(), m as f64);
    metrics.insert("committed_reward".into(), committed_reward);
    let named: Vec<(String, _)> = policies
        .iter()
        .zip(series)
        .map(|(p, s)| (p.name().to_string(), s))
        .collect();
    for (name, s) in &named {
        metrics.insert(format!("terminal_loss_{}", name.replace('-', "_")), s.terminal());
    }

    let file_name = format!("info_loss_{seed}.csv");
    let path = cfg.out_dir.join(&file_name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_info_loss_csv(&named, seed, BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))?;

    Ok(ReplicateReport {
        seed,
        trace_files: vec![file_name],
        metrics,
    })
}

fn cascade_replicate(
    cfg: &ExperimentConfig,
    seed: u64,
    net: &Network<f64>,
) -> anyhow::Result<ReplicateReport> {
    let b = &cfg.bandit;
    let d = &cfg.diffusion;
    let net = net.sample_edge_weights(b.xi, derive_seed(seed, TAG_EDGE_WEIGHTS))?;
    let net = net.assign_states(d.sensitive_seeds, d.uninformed_fraction, derive_seed(seed, TAG_STATES))?;

    let pc = &d.policies;
    let policies = [
        TransmissionPolicy::Spontaneous {
            p: pc.spontaneous_p,
        },
        TransmissionPolicy::AdaptiveDegreeSplit {
            p_low: pc.adaptive_p_low,
        },
    ];

    let mut metrics = BTreeMap::new();
    let mut trace_files = Vec::new();
    for (i, policy) in policies.iter().enumerate() {
        let trace = run_cascade(
            &net,
            policy.clone(),
            d.slots,
            d.threshold,
            derive_seed(seed, TAG_CASCADE_BASE + i as u64),
        )?;
        let fractions = trace.fractions();
        // Record index equals slot index (slot 0 is the baseline record).
        let crossing = fractions
            .iter()
            .position(|&f| f >= d.crossing_fraction)
            .unwrap_or(d.slots + 1);
        let key = policy.name().replace('-', "_");
        metrics.insert(format!("first_crossing_{key}"), crossing as f64);
        metrics.insert(
            format!("terminal_fraction_{key}"),
            *fractions.last().expect("slot-0 record always present"),
        );

        let file_name = format!("cascade_{}_{seed}.csv", policy.name());
        let path = cfg.out_dir.join(&file_name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_cascade_csv(&trace, policy.name(), seed, BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
        trace_files.push(file_name);
    }

    Ok(ReplicateReport {
        seed,
        trace_files,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    fn tiny_config(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.kind = Some(kind);
        cfg.seeds = vec![11, 12];
        cfg.out_dir = dir.to_path_buf();
        cfg.graph.ba = Some(crate::config::BaParams { n: 120, p: 3 });
        cfg.bandit.m = 5;
        cfg.bandit.arm_count = Some(12);
        cfg.bandit.rounds = 40;
        cfg.diffusion.slots = 50;
        cfg.diffusion.rounds = 20;
        cfg.diffusion.sensitive_seeds = 3;
        cfg
    }

    #[test]
    fn bandit_compare_emits_paired_traces_and_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(ExperimentKind::BanditCompare, dir.path());
        let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(report.replicates.len(), 2);
        for rep in &report.replicates {
            assert_eq!(rep.trace_files.len(), 2);
            for f in &rep.trace_files {
                assert!(dir.path().join(f).exists(), "missing {f}");
            }
            assert!(rep.metrics["bstar"] <= 1e-12);
            assert!(rep.metrics["bcross"] >= -1e-12);
            assert!(rep.metrics["blag_regret_final"] >= -1e-9);
        }
        assert!(report.bounds.contains_key("blag_bound"));
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("metrics.csv").exists());
    }

    #[test]
    fn bounds_verify_counts_zero_violations() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(ExperimentKind::BoundsVerify, dir.path());
        let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let agg = &report.aggregates;
        assert_eq!(agg["floor_violations"].median, 0.0);
        assert_eq!(agg["spread_violations"].median, 0.0);
        assert_eq!(agg["oracle_samples"].median, 1000.0);
    }

    #[test]
    fn memory_budget_refuses_without_override() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(ExperimentKind::BoundsVerify, dir.path());
        cfg.memory_budget_mb = 1;
        cfg.graph.ba = Some(crate::config::BaParams { n: 2_000_000, p: 5 });
        let err = run_experiment(&cfg, &RunOptions::default()).unwrap_err();
        assert!(err.to_string().contains("--allow-large"), "got: {err}");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg_a = tiny_config(ExperimentKind::BanditCompare, dir_a.path());
        let mut cfg_b = tiny_config(ExperimentKind::BanditCompare, dir_b.path());
        cfg_a.seeds = vec![5, 6, 7];
        cfg_b.seeds = vec![5, 6, 7];
        let rep_a = run_experiment(
            &cfg_a,
            &RunOptions {
                workers: Some(1),
                allow_large: false,
            },
        )
        .unwrap();
        let rep_b = run_experiment(
            &cfg_b,
            &RunOptions {
                workers: Some(3),
                allow_large: false,
            },
        )
        .unwrap();
        assert_eq!(rep_a.aggregates, rep_b.aggregates);
        for (a, b) in rep_a.replicates.iter().zip(&rep_b.replicates) {
            assert_eq!(a.metrics, b.metrics);
            for f in &a.trace_files {
                let bytes_a = std::fs::read(dir_a.path().join(f)).unwrap();
                let bytes_b = std::fs::read(dir_b.path().join(f)).unwrap();
                assert_eq!(bytes_a, bytes_b, "trace {f} differs across worker counts");
            }
        }
    }

    #[test]
    fn info_loss_reports_terminal_values_per_strategy() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(ExperimentKind::InfoLoss, dir.path());
        cfg.seeds = vec![3];
        cfg.bandit.arm_count = None; // size from the extracted target set
        cfg.bandit.rounds = 60;
        let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let m = &report.replicates[0].metrics;
        for key in [
            "terminal_loss_monotone_decreasing",
            "terminal_loss_riposte_like",
            "terminal_loss_bandit_driven",
        ] {
            let v = m[key];
            assert!((0.0..=1.0).contains(&v), "{key} = {v} outside [0, 1]");
        }
        assert!(m["committed_reward"] <= 1e-9, "committed set should not raise reward");
    }

    #[test]
    fn cascade_reports_crossings_with_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(ExperimentKind::Cascade, dir.path());
        cfg.seeds = vec![9];
        cfg.diffusion.sensitive_seeds = 1;
        cfg.diffusion.slots = 30;
        let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let m = &report.replicates[0].metrics;
        // 5e-5 over 30 slots cannot plausibly convert 10% of 120 nodes.
        assert_eq!(m["first_crossing_spontaneous"], 31.0);
        assert!(m["terminal_fraction_spontaneous"] >= 1.0 / 120.0);
        assert_eq!(report.replicates[0].trace_files.len(), 2);
    }
}
