//! `bohmion-dyn`: scenario-driven runs and verification for the regularized
//! quantum hydrodynamics toolkit.
//!
//! Exit codes: 0 success; 1 verification failures; 2 configuration or
//! invocation error (with line/field diagnostics); 3 numerical abort (with a
//! last-good snapshot path).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use bohmion_cli::config::{Conventions, ScenarioConfig};
use bohmion_cli::output::{self, ConventionRecord, Manifest, RunDir};
use bohmion_cli::run::{self, CliError};
use bohmion_cli::verify;

#[derive(Parser)]
#[command(
    name = "bohmion-dyn",
    version,
    about = "Regularized quantum hydrodynamics: scenario runs and verification",
    arg_required_else_help = false
)]
struct Cli {
    /// Worker threads for data-parallel integrand evaluation
    /// (1 is the determinism contract)
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    threads: usize,
    /// Output directory (defaults: runs/<config-stem> for run, verify for verify)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the full scenario schema with every key at its default and exit
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its artifacts
    Run {
        /// Path to the scenario TOML file
        config: PathBuf,
    },
    /// Run verification checks: human table plus CSV/JSON artifacts
    Verify {
        /// Keep only checks whose module or name contains this substring
        filter: Option<String>,
        /// Test hook: replace a check's tolerance
        /// (format: module/name=VALUE or name=VALUE)
        #[arg(long, hide = true, value_name = "CHECK=TOL")]
        override_tolerance: Vec<String>,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and exit 0; usage errors are
            // configuration errors (exit 2)
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.print_defaults {
        print!("{}", ScenarioConfig::print_defaults());
        return 0;
    }
    let threads = cli.threads.max(1);
    // One scenario per process: the global pool is configured exactly once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();

    match &cli.command {
        None => {
            eprintln!(
                "error: expected a subcommand: run <config.toml> | verify [filter] \
                 (or --print-defaults)"
            );
            2
        }
        Some(Command::Run { config }) => run_command(config, cli.out.as_deref(), threads),
        Some(Command::Verify { filter, override_tolerance }) => {
            verify_command(filter.as_deref(), override_tolerance, cli.out.as_deref(), threads)
        }
    }
}

fn run_command(config_path: &Path, out: Option<&Path>, threads: usize) -> i32 {
    let bytes = match fs::read(config_path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", config_path.display());
            return 2;
        }
    };
    let text = match String::from_utf8(bytes.clone()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: {} is not UTF-8: {e}", config_path.display());
            return 2;
        }
    };
    let cfg = match ScenarioConfig::parse(&text) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error in {}: {msg}", config_path.display());
            return 2;
        }
    };
    let out_dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "scenario".to_string());
            PathBuf::from("runs").join(stem)
        }
    };
    match run::run_scenario(&cfg, &bytes, &out_dir, threads) {
        Ok(()) => {
            println!("run complete: {}", out_dir.display());
            0
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Numerical { message, last_good }) => {
            eprintln!("{message}");
            match last_good {
                Some(name) => eprintln!("last good state: {}", out_dir.join(name).display()),
                None => eprintln!("no finite state snapshot available"),
            }
            eprintln!("abort context: {}", out_dir.join("manifest.json").display());
            3
        }
        Err(CliError::VerifyFailed { failed }) => {
            eprintln!("verification failed: {failed} check(s) over tolerance");
            1
        }
    }
}

fn verify_command(
    filter: Option<&str>,
    raw_overrides: &[String],
    out: Option<&Path>,
    threads: usize,
) -> i32 {
    let overrides = match verify::parse_overrides(raw_overrides) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return 2;
        }
    };
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("verify"));
    let mut dir = match RunDir::create(&out_dir) {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return 2;
        }
    };
    let mut manifest = Manifest::new(
        "verify",
        output::sha256_hex(filter.unwrap_or("").as_bytes()),
        0,
        threads,
        ConventionRecord::from(&Conventions::default()),
        Vec::new(),
    );
    match verify::run_verify_into(filter, &overrides, &mut dir, &mut manifest) {
        Ok(summary) => {
            if let Err(msg) = dir.finish(&mut manifest) {
                eprintln!("config error: {msg}");
                return 2;
            }
            if summary.failed == 0 {
                0
            } else {
                1
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Numerical { message, .. }) => {
            eprintln!("{message}");
            3
        }
        Err(CliError::VerifyFailed { failed }) => {
            eprintln!("verification failed: {failed} check(s) over tolerance");
            1
        }
    }
}
