use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pgrad_cli::verify::{run_suite, Suite};
use pgrad_cli::{eval, plot, train, Checkpoint, RunConfig};

/// Actor-critic policy-gradient training, evaluation and verification.
///
/// Log verbosity follows PGRAD_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "pgrad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train until the configured step budget.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the configured checkpoint file.
        #[arg(long)]
        resume: bool,
    },
    /// Run episodes with a checkpointed policy.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        episodes: usize,
        /// Act with the distribution's mode instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Defaults to the run's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON summary path; defaults to `<ckpt>.eval.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run property suites and report each measured deviation.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Draw mean episode return against environment steps.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Moving-average window in updates.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Train { config, resume } => {
            let cfg = RunConfig::load(&config)?;
            let out = train::train(&cfg, resume)?;
            println!(
                "updates {} steps {} episodes {} mean return {} success rate {}",
                out.updates,
                out.env_steps,
                out.episodes,
                fmt_opt(out.mean_return),
                fmt_opt(out.success_rate)
            );
            Ok(true)
        }
        Command::Eval {
            ckpt,
            episodes,
            deterministic,
            seed,
            out,
        } => {
            let checkpoint = Checkpoint::load(&ckpt)?;
            let summary = eval::evaluate(&checkpoint, episodes, deterministic, seed)?;
            let out = out.unwrap_or_else(|| ckpt.with_extension("eval.json"));
            eval::write_summary(&summary, &out)?;
            println!(
                "episodes {} mean return {} sd {} success rate {}",
                summary.episodes,
                fmt_opt(summary.mean_return),
                fmt_opt(summary.sd_return),
                fmt_opt(summary.success_rate)
            );
            Ok(true)
        }
        Command::Verify { suite } => {
            let checks = run_suite(suite)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
        Command::Plot { input, out, window } => {
            plot::plot(&input, &out, window).with_context(|| format!("plotting {}", input.display()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PGRAD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
