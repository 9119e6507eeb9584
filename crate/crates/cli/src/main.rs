use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dck_cli::{execute, resolve, write_artifacts, ConfigError, LevelRange, RunConfig, PRESETS};
use dck_core::verify::{run_suite, VerifyOptions};
use dck_core::SolverError;

const EXIT_SOLVER: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "dck", version, about = "Dirichlet boundary control with P1 finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a configured problem over a ladder of mesh levels.
    Solve {
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Inclusive level range `a..b`; level l has 2^l grid intervals.
        #[arg(long)]
        levels: Option<LevelRange>,
        /// Output directory (default `out/<preset>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `solution.vtk` for the last solve.
        #[arg(long)]
        vtk: bool,
        /// Print the report without writing files.
        #[arg(long)]
        no_files: bool,
    },
    /// Run the property suite.
    Verify {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Configuration file; only its `seed` is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the available presets.
    Presets,
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn load(path: Option<PathBuf>) -> Result<RunConfig, ConfigError> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| RunConfig::load(&p))
}

fn solve(
    config: Option<PathBuf>,
    preset: Option<String>,
    levels: Option<LevelRange>,
    out: Option<PathBuf>,
    vtk: bool,
    no_files: bool,
) -> ExitCode {
    let file = match load(config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let flags = RunConfig {
        preset,
        levels,
        out,
        vtk: vtk.then_some(true),
        ..RunConfig::default()
    };
    let exp = match resolve(file, flags) {
        Ok(e) => e,
        Err(e) => return config_error(e),
    };
    eprintln!("running {} on levels {}", exp.name, exp.levels);
    let output = execute(&exp);
    for (file, table) in &output.tables {
        println!("# {file}\n{}\n", table.to_text());
    }
    if !no_files {
        match write_artifacts(&exp, &output) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_SOLVER);
            }
        }
    }
    match output.failure {
        None => ExitCode::SUCCESS,
        Some(e @ SolverError::InvalidSpec(_)) => config_error(e),
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

fn verify(quick: bool, seed: Option<u64>, config: Option<PathBuf>) -> ExitCode {
    let file = match load(config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let mut opts = VerifyOptions {
        quick,
        ..VerifyOptions::default()
    };
    if let Some(s) = seed.or(file.seed) {
        opts.seed = s;
    }
    let start = std::time::Instant::now();
    let results = run_suite(&opts);
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {:<48} {}", r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!(
        "{} checks, {failed} failed, {:.2} s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

fn main() -> ExitCode {
    dck_core::threads_from_env();
    match Cli::parse().command {
        Command::Solve {
            config,
            preset,
            levels,
            out,
            vtk,
            no_files,
        } => solve(config, preset, levels, out, vtk, no_files),
        Command::Verify { quick, seed, config } => verify(quick, seed, config),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<16} {about}");
            }
            ExitCode::SUCCESS
        }
    }
}
