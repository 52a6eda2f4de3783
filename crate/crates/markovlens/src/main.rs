use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use markovlens::config::parse_config;
use markovlens::pipeline::{analyze_panel, run_experiment, SweepOptions};
use markovlens::report::significant_links;

#[derive(Parser)]
#[command(
    name = "markovlens",
    version,
    about = "Trains PPO agents under observation perturbations and scores \
             Markov violations via time-lagged causal discovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep: every environment × condition × seed.
    Run {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config_path: PathBuf,
        /// Restrict the sweep to this environment.
        #[arg(long)]
        env: Option<String>,
        /// Results directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Concurrent runs.
        #[arg(long, default_value_t = 10)]
        parallelism: usize,
        /// Override the configured number of training seeds.
        #[arg(long)]
        seed_count: Option<usize>,
        /// Use the small-sample t multiplier (2.776) for the summary
        /// confidence interval instead of the normal 1.96.
        #[arg(long)]
        t_ci: bool,
    },
    /// Analyze one panel CSV: print significant links and the MVS.
    Analyze {
        /// Panel CSV (header row of variable names, one row per step).
        #[arg(long)]
        panel: PathBuf,
        /// Maximum lag tested.
        #[arg(long, default_value_t = 5)]
        tau_max: usize,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> markovlens::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config_path,
            env,
            out,
            parallelism,
            seed_count,
            t_ci,
        } => {
            let text = std::fs::read_to_string(&config_path)?;
            let config = parse_config(&text)?;
            let mut options = SweepOptions::new(out);
            options.env_filter = env;
            options.parallelism = parallelism;
            options.seed_count = seed_count;
            options.t_ci = t_ci;
            let report = run_experiment(&config, &options)?;
            let resumed = report.outcomes.iter().filter(|o| o.resumed).count();
            println!(
                "{} runs ({} resumed), {} failed",
                report.outcomes.len(),
                resumed,
                report.failed_runs
            );
            for outcome in report.outcomes.iter().filter(|o| o.failed()) {
                println!(
                    "  FAILED {}/{}/{}: {}",
                    outcome.env,
                    outcome.condition_id,
                    outcome.seed,
                    outcome.error.as_deref().unwrap_or("unknown")
                );
            }
            Ok(if report.failed_runs == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Analyze {
            panel,
            tau_max,
            alpha,
        } => {
            let (aggregated, mvs, names) = analyze_panel(&panel, tau_max, alpha)?;
            let links = significant_links(&aggregated, &names)?;
            let mut text = String::from("child,parent,lag,p_value,partial_corr\n");
            for link in &links {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    link.child, link.parent, link.lag, link.p_value, link.partial_corr
                ));
            }
            text.push_str(&format!(
                "MVS = {} ({} contributing links)\n",
                mvs.score,
                mvs.contributions.len()
            ));
            // tolerate a closed pipe (e.g. `markovlens analyze ... | head`)
            use std::io::Write;
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(ExitCode::SUCCESS),
            }
        }
    }
}
