use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use turdpo::commands::{self, GradcheckOptions};
use turdpo::dataio::{json, RunConfig};
use turdpo::stats::{bias_bound_experiment, BiasWorld, NoiseSimConfig};
use turdpo::Error;

#[derive(Debug, Parser)]
#[command(name = "turdpo", version, about = "Topology- and uncertainty-weighted preference optimization")]
struct Cli {
    /// Run configuration (JSON). Falls back to $TURDPO_CONFIG, then built-in defaults.
    #[arg(long, global = true, env = "TURDPO_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every pair of a dataset: semantic and topology scores, uncertainties, weights.
    Score {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a tabular policy and write a checkpoint plus a JSONL metrics trace.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        output: PathBuf,
        /// Metrics trace path; defaults to the checkpoint path with a `.trace.jsonl` extension.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long)]
        output: Option<PathBuf>,
        /// Random instances per operation.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, hide = true, default_value_t = 0.0)]
        corrupt_gradient: f64,
    },
    /// Label-noise robustness sweep on a synthetic preference world.
    SimulateNoise {
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated flip rates.
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Gap between weighted and unweighted estimators under label flips; writes CSV.
    BiasBound {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2")]
        eps_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.5,1")]
        w_min_grid: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// ECE, Brier score, reliability bins, and a fitted temperature for binary predictions.
    Calibrate {
        /// JSONL with one `{"logit" | "prob", "label"}` object per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn emit(output: Option<&Path>, text: &str) -> turdpo::Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_config(cli: &Cli) -> turdpo::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> turdpo::Result<ExitCode> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Score { input, output } => {
            commands::cmd_score(&input, &cfg, &output)?;
        }
        Command::Train { input, output, trace } => {
            let trace = trace.unwrap_or_else(|| output.with_extension("trace.jsonl"));
            commands::cmd_train(&input, &cfg, &output, &trace)?;
        }
        Command::Gradcheck {
            output,
            instances,
            corrupt_gradient,
        } => {
            let opts = GradcheckOptions {
                instances,
                seed: cfg.seed,
                corrupt: corrupt_gradient,
            };
            let report = commands::run_gradcheck(&cfg, &opts)?;
            for c in &report.checks {
                eprintln!(
                    "{:<16} {} instances  max rel error {:.3e}  {}",
                    c.operation,
                    c.instances,
                    c.max_rel_error,
                    if c.passed { "ok" } else { "FAIL" }
                );
            }
            emit(output.as_deref(), &json::to_string(&report)?)?;
            if !report.passed {
                return Ok(ExitCode::from(2));
            }
        }
        Command::SimulateNoise { output, eps_grid, seeds } => {
            if let Some(g) = eps_grid {
                cfg.simulation.eps_grid = g;
            }
            if let Some(s) = seeds {
                cfg.simulation.seeds = s;
            }
            let report = commands::simulate_noise(&cfg)?;
            for r in &report.rows {
                eprintln!(
                    "eps {:.2}  {:<7}  win-rate {:.4}  retention {:.4} ± {:.4}",
                    r.eps,
                    r.method,
                    r.mean_win_rate,
                    r.mean_retention,
                    r.std_error
                );
            }
            emit(output.as_deref(), &json::to_string(&report)?)?;
        }
        Command::BiasBound {
            output,
            eps_grid,
            w_min_grid,
            seeds,
        } => {
            let sim = NoiseSimConfig {
                eps_grid,
                seeds,
                base_seed: cfg.seed,
                mode: cfg.simulation.mode,
            };
            let report = bias_bound_experiment(&sim, &w_min_grid, cfg.tau_w, &BiasWorld::default())?;
            eprintln!("fitted C = {:.4}", report.fitted_c);
            emit(output.as_deref(), report.to_csv().trim_end())?;
        }
        Command::Calibrate { input, output } => {
            let preds = commands::parse_predictions(&std::fs::read_to_string(&input)?)?;
            let report = commands::calibrate_predictions(&preds, &cfg)?;
            emit(output.as_deref(), &json::to_string(&report)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Numerical { state, .. } = &e {
                eprintln!("state: {state}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
