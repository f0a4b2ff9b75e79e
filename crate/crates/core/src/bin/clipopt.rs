use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use clipopt::harness::report::write_output;
use clipopt::harness::trials::{build_problem, plan_for, run_one, trial_stream, RunPlan};
use clipopt::harness::{
    counterexample_experiment, emit_report, run_rates, run_trials, verify_clip_grid, ClipGridConfig,
    CounterexampleConfig, ExperimentConfig, Format,
};
use clipopt::optimizers::RunOptions;
use clipopt::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_HYPOTHESIS: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "clipopt", version, about = "Clipped stochastic methods under heavy-tailed noise")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial-parallel commands.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Exit with status 4 if the command's built-in acceptance check fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trial; writes the checkpoint trajectory.
    Run {
        /// Horizon (defaults to the first configured one).
        #[arg(long)]
        k: Option<usize>,
        /// Trial index within the horizon.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Many trials per horizon; writes the quantile report.
    Trials,
    /// Plain SGD against the adversarial three-point noise.
    Counterexample {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Monte-Carlo check of the clipped-estimator bounds over a grid.
    VerifyClip {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Trials over the horizon sweep plus a log-log slope fit.
    Rates {
        /// Half-width of the accepted slope window for `--check`.
        #[arg(long, default_value_t = 0.15)]
        tolerance: f64,
    },
    /// Prints the schedule (or restart plan) for a horizon.
    Schedule {
        #[arg(long)]
        k: Option<usize>,
    },
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed_base = s;
    }
    Ok(cfg)
}

fn emit(cli: &Cli, bytes: Vec<u8>) -> Result<()> {
    match &cli.out {
        Some(p) => write_output(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|source| Error::Io { path: "<stdout>".into(), source })
        }
    }
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(cli, s.into_bytes())
}

/// Returns `Ok(true)` when the command's check passed (or was not requested).
fn dispatch(cli: &Cli) -> Result<bool> {
    let format: Format = cli.format.parse()?;
    match &cli.command {
        Command::Run { k, trial } => {
            let cfg = experiment(cli)?;
            let problem = build_problem(&cfg)?;
            let k = k.or_else(|| cfg.ks.first().copied()).unwrap_or(0);
            let plan = plan_for(&cfg, &problem, k)?;
            let key = if let RunPlan::Restarted(p) = &plan { p.total_iterations() } else { k };
            let rec = run_one(&problem, &cfg.noise, &plan, &RunOptions::default(), &mut trial_stream(cfg.seed_base, key, *trial))?;
            match format {
                Format::Json => emit_json(cli, &rec)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    rec.write_csv(&mut buf)?;
                    emit(cli, buf)?;
                }
            }
            Ok(true)
        }
        Command::Trials => {
            let cfg = experiment(cli)?;
            let rep = run_trials(&cfg, cli.threads)?;
            for s in &rep.skipped {
                eprintln!("skipped K = {}: {}", s.k, s.reason);
            }
            write_report(cli, &cfg, &rep, format)?;
            if rep.rows.is_empty() && !rep.skipped.is_empty() {
                return Err(Error::Hypothesis("every horizon was skipped".into()));
            }
            Ok(true)
        }
        Command::Counterexample { trials } => {
            let mut cfg: CounterexampleConfig = match &cli.config {
                Some(p) => load_json(p)?,
                None => CounterexampleConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(n) = trials {
                cfg.trials = *n;
            }
            let rep = pool(cli)?.install(|| counterexample_experiment(&cfg))?;
            emit_json(cli, &rep)?;
            let n = rep.trials as f64;
            let p = rep.analytic_failure_prob;
            let se = (p * (1.0 - p) / n).sqrt();
            let sgd_ok = rep.gate_open && (rep.empirical_failure_freq - p).abs() <= 3.0 * se.max(0.5 / n);
            let clipped_ok = rep.clipped.as_ref().is_some_and(|c| c.failure_freq <= cfg.beta);
            Ok(sgd_ok && clipped_ok)
        }
        Command::VerifyClip { samples } => {
            let mut cfg: ClipGridConfig = match &cli.config {
                Some(p) => load_json(p)?,
                None => ClipGridConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(n) = samples {
                cfg.samples = *n;
            }
            let checks = verify_clip_grid(&cfg)?;
            emit_json(cli, &checks)?;
            Ok(checks.iter().all(|c| c.pass))
        }
        Command::Rates { tolerance } => {
            let cfg = experiment(cli)?;
            let rep = run_rates(&cfg, cli.threads)?;
            match format {
                Format::Json => emit_json(cli, &rep)?,
                Format::Csv => write_report(cli, &cfg, &rep.report, format)?,
            }
            if let Some(f) = &rep.fit {
                eprintln!("slope {:.4} +- {:.4} (reference {:.4})", f.slope, f.stderr, rep.reference_slope);
            }
            if rep.report.rows.is_empty() {
                return Err(Error::Hypothesis("every horizon was skipped".into()));
            }
            Ok(rep.fit.is_some_and(|f| (f.slope - rep.reference_slope).abs() <= *tolerance))
        }
        Command::Schedule { k } => {
            let cfg = experiment(cli)?;
            let problem = build_problem(&cfg)?;
            let k = k.or_else(|| cfg.ks.first().copied()).unwrap_or(0);
            match plan_for(&cfg, &problem, k)? {
                RunPlan::Scheduled { schedule, .. } => emit_json(cli, &schedule)?,
                RunPlan::Restarted(plan) => emit_json(cli, &plan)?,
                RunPlan::Plain { gamma, steps } => emit_json(cli, &serde_json::json!({ "gamma": gamma, "steps": steps }))?,
            }
            Ok(true)
        }
    }
}

fn pool(cli: &Cli) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn write_report(cli: &Cli, cfg: &ExperimentConfig, rep: &clipopt::harness::QuantileReport, format: Format) -> Result<()> {
    // Paths from the config are used in addition to --out.
    if let Some(p) = &cfg.output.csv {
        emit_report(rep, Format::Csv, p)?;
    }
    if let Some(p) = &cfg.output.json {
        emit_report(rep, Format::Json, p)?;
    }
    match (format, &cli.out) {
        (f, Some(p)) => emit_report(rep, f, p),
        (Format::Json, None) => emit_json(cli, rep),
        (Format::Csv, None) => {
            let mut buf = Vec::new();
            rep.write_csv(&mut buf)?;
            emit(cli, buf)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.check => {
            eprintln!("check failed");
            ExitCode::from(EXIT_CHECK)
        }
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Serde(_) | Error::Contract(_) => EXIT_CONFIG,
                Error::Hypothesis(_) | Error::AlreadySolved(_) => EXIT_HYPOTHESIS,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
