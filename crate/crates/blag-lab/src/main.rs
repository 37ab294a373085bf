use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use blag_lab::config::{ConfigError, ExperimentConfig, ExperimentKind};
use blag_lab::experiment::{run_experiment, RunOptions};

#[derive(Parser)]
#[command(
    name = "blag-lab",
    version,
    about = "Seeded experiment runner for constrained combinatorial bandits and diffusion simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run BLAG and CUCB on identical instances and compare rewards.
    BanditCompare(ExperimentArgs),
    /// Monte-Carlo check of the closed-form reward floor and spread.
    BoundsVerify(ExperimentArgs),
    /// Degree-weighted info-loss comparison of transmission strategies.
    InfoLoss(ExperimentArgs),
    /// Slot-by-slot cascade traces under static and adaptive policies.
    Cascade(ExperimentArgs),
    /// Generate a preferential-attachment graph as an edge-list file.
    GenGraph(GenGraphArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the first replicate seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (also BLAG_LAB_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Run even when the estimated footprint exceeds the memory budget.
    #[arg(long)]
    allow_large: bool,
}

#[derive(Args)]
struct GenGraphArgs {
    /// Node count.
    #[arg(long)]
    n: usize,
    /// Edges attached per new node.
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output edge-list path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::BanditCompare(a) => (ExperimentKind::BanditCompare, a),
        Command::BoundsVerify(a) => (ExperimentKind::BoundsVerify, a),
        Command::InfoLoss(a) => (ExperimentKind::InfoLoss, a),
        Command::Cascade(a) => (ExperimentKind::Cascade, a),
        Command::GenGraph(a) => return gen_graph(a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(MainError::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(MainError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

enum MainError {
    Config(ConfigError),
    Run(anyhow::Error),
}

impl From<ConfigError> for MainError {
    fn from(e: ConfigError) -> Self {
        MainError::Config(e)
    }
}

impl From<anyhow::Error> for MainError {
    fn from(e: anyhow::Error) -> Self {
        MainError::Run(e)
    }
}

fn run(kind: ExperimentKind, args: ExperimentArgs) -> Result<(), MainError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(MainError::Run)?;
            ExperimentConfig::parse_unchecked(&text)?
        }
        None => ExperimentConfig::default(),
    };

    match cfg.kind {
        None => cfg.kind = Some(kind),
        Some(k) if k != kind => {
            return Err(ConfigError::Invalid(vec![blag_lab::config::Violation {
                path: "kind".into(),
                message: format!("config says {k} but the subcommand is {kind}"),
            }])
            .into());
        }
        Some(_) => {}
    }
    if let Some(seed) = args.seed {
        if cfg.seeds.is_empty() {
            cfg.seeds.push(seed);
        } else {
            cfg.seeds[0] = seed;
        }
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    cfg.validate()?;

    let opts = RunOptions {
        workers: args.workers,
        allow_large: args.allow_large,
    };
    let report = run_experiment(&cfg, &opts)?;

    println!(
        "{kind}: {} replicates -> {}",
        report.replicates.len(),
        cfg.out_dir.display()
    );
    for (metric, agg) in &report.aggregates {
        println!(
            "  {metric}: median={} q1={} q3={}",
            agg.median, agg.q1, agg.q3
        );
    }
    println!("report: {}", cfg.out_dir.join("report.json").display());
    Ok(())
}

fn gen_graph(args: GenGraphArgs) -> ExitCode {
    match try_gen_graph(&args) {
        Ok(edges) => {
            println!(
                "wrote {} nodes, {edges} edges to {}",
                args.n,
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_gen_graph(args: &GenGraphArgs) -> anyhow::Result<usize> {
    let net = blag_core::network::generate_ba::<f64>(args.n, args.p, args.seed)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    blag_core::network::write_edge_list(&net, BufWriter::new(file))
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(net.edge_count())
}
