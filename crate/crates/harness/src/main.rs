use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbm_blowup::experiments::describe;
use fbm_blowup::{Experiment, HarnessError, RunConfig};

/// Simulate SDEs driven by fractional Brownian motion that explode in
/// finite time, and check the numerics against analytic oracles.
#[derive(Debug, Parser)]
#[command(name = "fbm-blowup", version)]
struct Cli {
    /// JSON run configuration; built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `scheme.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `outputs.csv_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppresses the summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run whatever experiment the configuration names.
    Run,
    /// One adaptive-scheme path with trajectory CSV and plots.
    Simulate,
    /// Many seeded paths with per-path summary and quantiles.
    Mc,
    /// Convergence test for the integral of 1/b.
    Osgood,
    /// Pointwise checks of the coefficient assumptions.
    Validate,
    /// Kernel constant calibration and covariance consistency.
    KernelCheck,
    /// Shared-noise convergence study with truncated drift.
    Convergence,
    /// Print the built-in configuration of an experiment.
    DefaultConfig {
        #[arg(value_parser = ["simulate", "mc", "osgood", "validate", "kernel-check", "convergence"])]
        experiment: String,
    },
}

fn experiment_of(command: &Command) -> Option<Experiment> {
    match command {
        Command::Simulate => Some(Experiment::Simulate),
        Command::Mc => Some(Experiment::MonteCarlo),
        Command::Osgood => Some(Experiment::Osgood),
        Command::Validate => Some(Experiment::Validate),
        Command::KernelCheck => Some(Experiment::KernelCheck),
        Command::Convergence => Some(Experiment::Convergence),
        Command::Run | Command::DefaultConfig { .. } => None,
    }
}

fn parse_experiment(name: &str) -> Experiment {
    match name {
        "simulate" => Experiment::Simulate,
        "mc" => Experiment::MonteCarlo,
        "osgood" => Experiment::Osgood,
        "validate" => Experiment::Validate,
        "kernel-check" => Experiment::KernelCheck,
        _ => Experiment::Convergence,
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let wanted = experiment_of(&cli.command);
    let mut cfg = match (&cli.config, wanted) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(e)) => RunConfig::builtin(e),
        (None, None) => return Err(HarnessError::Config("`run` needs --config".into())),
    };
    if let Some(e) = wanted {
        if cfg.experiment != e {
            return Err(HarnessError::Config(format!(
                "configuration is for experiment {:?} (subcommand `{}`), not `{}`",
                cfg.experiment,
                cfg.experiment.command(),
                e.command()
            )));
        }
    }
    if let Some(seed) = cli.seed {
        match cfg.scheme.as_mut() {
            Some(s) => s.seed = seed,
            None => log::warn!("--seed ignored: experiment {:?} draws no random numbers", cfg.experiment),
        }
    }
    if let Some(out) = &cli.out {
        cfg.outputs.csv_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
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
    if let Command::DefaultConfig { experiment } = &cli.command {
        let text = RunConfig::builtin(parse_experiment(experiment)).to_json();
        let _ = writeln!(std::io::stdout(), "{text}");
        return ExitCode::SUCCESS;
    }
    let outcome = resolve(&cli).and_then(|cfg| {
        let report = fbm_blowup::run(&cfg)?;
        Ok((cfg, report))
    });
    match outcome {
        Ok((cfg, report)) => {
            if !cli.quiet {
                let mut stdout = std::io::stdout().lock();
                let _ = write!(stdout, "{}", describe(&report));
                let _ = writeln!(stdout, "outputs written to {}", cfg.outputs.csv_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
