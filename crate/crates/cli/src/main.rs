use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctqw::{Backend, Error, Precision, Result};
use ctqw_cli::benchmark::{benchmark, load_plan};
use ctqw_cli::simulate::simulate;
use ctqw_cli::validate::validate;
use ctqw_cli::{load_config, Overrides};

/// Noisy many-particle continuous-time quantum walk simulator.
#[derive(Parser)]
#[command(name = "ctqw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write observables, profile and log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Sweep a benchmark plan over a template configuration.
    Benchmark {
        /// Plan file with `meshes`, `post_rates`, `R` and `repetitions`.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check the simulator's invariants on a tiny instance.
    Validate {
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Master seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides CTQW_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_with::<Precision>)]
    precision: Option<Precision>,
    #[arg(long, value_parser = parse_with::<Backend>)]
    backend: Option<Backend>,
}

fn parse_with<T: std::str::FromStr<Err = String>>(s: &str) -> std::result::Result<T, String> {
    s.parse()
}

fn env_workers() -> Result<Option<usize>> {
    match std::env::var("CTQW_WORKERS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("CTQW_WORKERS must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

impl RunFlags {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            seed: self.seed,
            workers: match self.workers {
                Some(w) => Some(w),
                None => env_workers()?,
            },
            precision: self.precision,
            backend: self.backend,
        })
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, out, flags } => {
            let mut loaded = load_config(&config)?;
            flags.overrides()?.apply(&mut loaded.run);
            loaded.run.validate()?;
            let report = simulate(&loaded, &out)?;
            let p = &report.profile;
            println!(
                "{} realizations x {} steps on {} joint states in {:.3} s (density stage {:.1}%)",
                report.realizations,
                report.steps,
                report.dim,
                p.total,
                100.0 * p.density_share()
            );
            Ok(true)
        }
        Command::Benchmark {
            plan,
            config,
            out,
            flags,
        } => {
            let plan = load_plan(&plan)?;
            let mut template = load_config(&config)?;
            flags.overrides()?.apply(&mut template.run);
            let outcome = benchmark(&plan, &template, &out)?;
            println!("{} points timed, {} failed", outcome.rows.len(), outcome.failures.len());
            for f in &outcome.failures {
                eprintln!(
                    "mesh {} post_rate {} R {} repetition {}: {}",
                    f.mesh, f.post_rate, f.realizations, f.repetition, f.message
                );
            }
            Ok(true)
        }
        Command::Validate { workers } => {
            let workers = match workers {
                Some(w) => w,
                None => env_workers()?.unwrap_or(0),
            };
            let checks = validate(workers)?;
            for c in &checks {
                println!("{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("ctqw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
