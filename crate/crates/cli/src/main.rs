use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gradest_cli::commands::{cmd_check, cmd_lemma, cmd_solve, cmd_sweep, cmd_verify, lemma_params};
use gradest_cli::config::Loaded;
use gradest_cli::{Outcome, Resolved, ScenarioConfig, Status};

#[derive(Parser)]
#[command(
    name = "gradest",
    version,
    about = "Simulate u_t = ΔF(u) and audit its gradient estimates"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides analysis.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Admissibility conditions of the configured nonlinearity over its value range.
    Check,
    /// Matrix inequality: closed-form bound, witness and random search.
    Lemma {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Integrate the scenario and export snapshots with a manifest.
    Solve,
    /// Integrate, then evaluate the configured estimate reports on every window.
    Verify,
    /// Liouville double-cube sweep over growing windows.
    Sweep,
}

fn load(path: Option<&Path>) -> anyhow::Result<Loaded> {
    ScenarioConfig::load(path.context("this command needs --config")?)
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let loaded = match (&cli.command, &cli.config) {
        (Command::Lemma { .. }, None) => None,
        _ => Some(load(cli.config.as_deref())?),
    };
    let mut loaded = loaded;
    if let (Some(l), Some(seed)) = (loaded.as_mut(), cli.seed) {
        l.config.analysis.seed = seed;
    }
    match &cli.command {
        Command::Lemma { a, b, n, samples } => {
            let config = loaded.as_ref().map(|l| &l.config);
            let params = lemma_params(config, *a, *b, *n, *samples)?;
            let seed = cli.seed.or(config.map(|c| c.analysis.seed)).unwrap_or(0);
            cmd_lemma(params, seed, config, &cli.out)
        }
        cmd => {
            let res = Resolved::new(loaded.as_ref().expect("loaded above"))?;
            match cmd {
                Command::Check => cmd_check(&res, &cli.out),
                Command::Solve => cmd_solve(&res, &cli.out),
                Command::Verify => cmd_verify(&res, &cli.out),
                Command::Sweep => cmd_sweep(&res, &cli.out),
                Command::Lemma { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let result = pool
        .build()
        .context("starting the worker pool")
        .and_then(|pool| pool.install(|| run(&cli)));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            match outcome.status {
                Status::Pass => ExitCode::SUCCESS,
                Status::Fail => {
                    println!("checks failed");
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
