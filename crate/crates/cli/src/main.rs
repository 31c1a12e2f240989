use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sigfbsde_cli::cache::CacheStatus;
use sigfbsde_cli::config::{ExperimentConfig, Overrides};
use sigfbsde_cli::{commands, verify, CliError};

#[derive(Parser)]
#[command(name = "sigfbsde", version, about = "Deep signature FBSDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// Experiment file; keys left out take the problem's preset values.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset by problem name instead of a file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw coarse-grid values as network inputs instead of signatures.
    #[arg(long)]
    vanilla: bool,
    /// Log-signature features.
    #[arg(long)]
    log_sig: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and cache the forward paths.
    Simulate(RunArgs),
    /// Train and write loss.csv, summary.csv, checkpoint.bin and config.toml.
    Train(RunArgs),
    /// Score a finished run on its held-out paths.
    Evaluate {
        /// Run directory written by `train`.
        run: PathBuf,
    },
    /// Aggregate summaries from run directories (searched recursively).
    Report {
        runs: Vec<PathBuf>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-checks and print a manifest.
    Verify,
    /// Print a preset as TOML.
    ShowPreset { name: String },
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(CliError::Validation("pass --config PATH or --preset NAME".into())),
    };
    cfg.apply(&Overrides { seed: args.seed, out_dir: args.out.clone(), vanilla: args.vanilla, log_sig: args.log_sig });
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let (entry, status) = commands::simulate(&load(&args)?)?;
            let what = match status {
                CacheStatus::Hit => "cache hit",
                CacheStatus::Built => "simulated",
                CacheStatus::Rebuilt => "regenerated",
            };
            println!("{what}: {}", entry.dir.display());
        }
        Command::Train(args) => {
            let out = commands::train(&load(&args)?)?;
            let r = &out.report;
            let err = r.abs_err().map(|a| format!(", |y0 - oracle| {a:.4e}")).unwrap_or_default();
            println!(
                "y0 {:.6} after {} iterations ({:.2} ms/it){err}; wrote {}",
                r.y0,
                r.iterations,
                r.mean_wall_ms(),
                out.out_dir.display()
            );
        }
        Command::Evaluate { run } => {
            let row = commands::evaluate(&run)?;
            println!("y0 {:.6}, test loss {:.6e} on {} paths", row.y0, row.test_loss, row.n_test);
        }
        Command::Report { runs, out } => {
            let rows = commands::report(&runs)?;
            commands::write_report(&rows, out.as_deref())?;
        }
        Command::Verify => {
            let results = verify::run_all();
            for r in &results {
                println!("{} {:<24} {:>8.1} ms  {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.ms, r.detail);
            }
            let failed = results.iter().filter(|r| !r.pass).count();
            println!("{} of {} checks passed", results.len() - failed, results.len());
            if failed > 0 {
                return Err(CliError::Other(format!("{failed} checks failed")));
            }
        }
        Command::ShowPreset { name } => print!("{}", ExperimentConfig::preset(&name)?.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
