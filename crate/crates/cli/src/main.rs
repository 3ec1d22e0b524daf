use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use metabolism::harness::{
    compute_relative_metrics, emit_outputs, read_csv, run_experiment, ExperimentConfig, Method, RunOptions,
    SweepSummary,
};

#[derive(Parser)]
#[command(name = "metabolism", version, about = "Product-lifecycle marketplace experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CTR-A warmup followed by the selected method.
    Run(RunArgs),
    /// CTR-A only, for the warmup steps.
    WarmupOnly(RunArgs),
    /// Relative change of a metrics table against a CTR-A baseline table.
    Compare {
        run: PathBuf,
        baseline: PathBuf,
    },
    /// Parse, validate, and print the resolved configuration.
    ValidateConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// ctr-a, t-perm, fpc, fpc-cnn or fpc-cnn-exp; defaults to the configured agent variant.
    #[arg(long)]
    variant: Option<Method>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check per-step invariants and stop at the first violation.
    #[arg(long)]
    audit: bool,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(args: RunArgs, warmup_only: bool) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    let method = if warmup_only {
        cfg.protocol.train_steps = 0;
        Method::CtrA
    } else {
        args.variant.unwrap_or(Method::Agent(cfg.agent.variant))
    };
    if let Some(seed) = args.seed {
        cfg.protocol.seeds = vec![seed];
    }
    if let Some(out) = args.out {
        cfg.output.directory = out;
    }
    cfg.validate()?;
    let opts = RunOptions {
        audit: args.audit,
        keep_checkpoint: cfg.output.checkpoint,
    };
    let single = cfg.protocol.seeds.len() == 1;
    let root = cfg.output.directory.clone();
    let mut runs = Vec::new();
    for &seed in &cfg.protocol.seeds {
        let result = run_experiment(&cfg, seed, method, opts).with_context(|| format!("{method} seed {seed}"))?;
        let dir = if single { root.clone() } else { root.join(format!("seed-{seed}")) };
        let files = emit_outputs(&result, &cfg, &dir).with_context(|| format!("writing {}", dir.display()))?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
        runs.push(result);
    }
    let summary = SweepSummary::from_runs(&runs)?;
    let text = serde_json::to_string_pretty(&summary)?;
    if !single {
        std::fs::write(root.join("summary.json"), format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn compare(run: &Path, baseline: &Path) -> Result<()> {
    let a = read_csv(run).with_context(|| format!("reading {}", run.display()))?;
    let b = read_csv(baseline).with_context(|| format!("reading {}", baseline.display()))?;
    let rel = compute_relative_metrics(&a, &b)?;
    println!("{}", serde_json::to_string_pretty(&rel)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args, false),
        Command::WarmupOnly(args) => run(args, true),
        Command::Compare { run, baseline } => compare(&run, &baseline),
        Command::ValidateConfig { config } => load_config(config.as_deref()).and_then(|cfg| {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
