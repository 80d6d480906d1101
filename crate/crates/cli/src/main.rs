//! `aqw`: run quantum-walk billiard experiments from TOML configurations.

mod compare;
mod config;
mod pipeline;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqw_core::{Error, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{RunConfig, Stage};
use pipeline::Settings;

#[derive(Parser)]
#[command(name = "aqw", version, about = "Alternate quantum walks in rectangular and stadium billiards")]
struct Cli {
    /// Run configuration (TOML); repeat to run several configurations.
    #[arg(short, long = "config", global = true)]
    configs: Vec<PathBuf>,

    /// Root directory for run outputs; each run writes to <output>/<name>.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    /// Directory for cached eigendecompositions [default: <output>/cache].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    /// Number of configurations processed concurrently.
    #[arg(short = 'j', long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-evolve the walker and write probability snapshots.
    Evolve,
    /// Diagonalise the step operator and write the eigenphases.
    Spectrum,
    /// Unfolded spacing histogram and Brody fit.
    Stats,
    /// Participation ratios of all eigenstates.
    Pr,
    /// Scan eigenstates for periodic-orbit scars.
    Scars,
    /// Run every stage listed in each configuration.
    Run,
    /// Compare two finished runs (run directories or their configurations).
    Compare { a: PathBuf, b: PathBuf },
    /// Randomised consistency checks.
    Selftest {
        /// Random seed [default: the first configuration's seed, else 0].
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(if e.is_config() { 2 } else { 3 })
}

fn settings(cli: &Cli, cfg: Option<&RunConfig>) -> Settings {
    let output_root = cli
        .output
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("output"));
    let cache_dir = cli
        .cache_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.cache_dir.clone()))
        .unwrap_or_else(|| output_root.join("cache"));
    Settings { output_root, cache_dir }
}

fn run_configs(cli: &Cli, stages: &[Stage]) -> Result<()> {
    if cli.configs.is_empty() {
        return Err(Error::Config("no configuration given (use --config)".into()));
    }
    let configs = cli
        .configs
        .iter()
        .map(|p| RunConfig::load(p))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("run names must be distinct".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<()>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let s = settings(cli, Some(cfg));
                let (manifest, result) = pipeline::run(cfg, stages, &s);
                let cache = manifest.cache.as_deref().map_or(String::new(), |c| format!(", cache {c}"));
                match &result {
                    Ok(()) => eprintln!(
                        "{}: {} artifacts in {}{cache}",
                        cfg.name,
                        manifest.artifacts.len(),
                        s.output_root.join(&cfg.name).display()
                    ),
                    Err(e) => eprintln!("{}: failed: {e}", cfg.name),
                }
                result
            })
            .collect()
    });
    // config errors take precedence over numerical ones in the exit status
    let mut errors: Vec<Error> = results.into_iter().filter_map(|r| r.err()).collect();
    errors.sort_by_key(|e| !e.is_config());
    match errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_directory(cli: &Cli, p: &Path) -> Result<PathBuf> {
    if p.is_file() {
        let cfg = RunConfig::load(p)?;
        Ok(settings(cli, Some(&cfg)).output_root.join(&cfg.name))
    } else {
        Ok(p.to_path_buf())
    }
}

fn compare(cli: &Cli, a: &Path, b: &Path) -> Result<()> {
    let (da, db) = (run_directory(cli, a)?, run_directory(cli, b)?);
    let c = compare::compare(&da, &db)?;
    print!("{}", c.table());
    let root = settings(cli, None).output_root;
    std::fs::create_dir_all(&root)?;
    let stem = root.join(format!("compare_{}_vs_{}", c.a, c.b));
    c.write_csv(&stem.with_extension("csv"))?;
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&c)? + "\n")?;
    Ok(())
}

fn selftest(seed: u64, trials: usize) -> Result<()> {
    let checks = selftest::run(seed, trials)?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evolve => run_configs(&cli, &[Stage::Evolve]),
        Command::Spectrum => run_configs(&cli, &[Stage::Spectrum]),
        Command::Stats => run_configs(&cli, &[Stage::Stats]),
        Command::Pr => run_configs(&cli, &[Stage::Pr]),
        Command::Scars => run_configs(&cli, &[Stage::Scars]),
        Command::Run => run_configs(&cli, &[]),
        Command::Compare { a, b } => compare(&cli, a, b),
        Command::Selftest { seed, trials } => {
            let seed = match (seed, cli.configs.first()) {
                (Some(s), _) => Ok(*s),
                (None, Some(p)) => RunConfig::load(p).map(|c| c.seed),
                (None, None) => Ok(0),
            };
            seed.and_then(|s| selftest(s, *trials))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
