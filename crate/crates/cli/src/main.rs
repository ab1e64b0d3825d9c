//! Command-line harness. Exit codes: 0 success, 1 verification failure,
//! 2 configuration error, 3 numerical failure (blowup, lost contraction,
//! window collapse).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mildns_core::error::{Error, Result};
use mildns_cli::{checks, config, manifest, runner, sweep};

#[derive(Parser)]
#[command(
    name = "mildns",
    version,
    about = "Pseudo-spectral simulator for stochastic variable-density incompressible flow on the torus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one configuration and write its report bundle
    Run {
        /// Sectioned TOML configuration
        #[arg(long, conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Re-execute the exact configuration embedded in a manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override one `section.key=value` before validation (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the built-in verification suite
    Verify {
        /// Only checks whose name contains this substring
        #[arg(long)]
        filter: Option<String>,
        /// List check names without running them
        #[arg(long)]
        list: bool,
    },
    /// Expand the [sweep] table and integrate every cell
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Worker pool size (defaults to the available cores)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Summarize every run bundle found under a directory
    Report {
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::Input(_) | Error::Domain(_) => ExitCode::from(2),
        Error::Blowup { .. }
        | Error::Divergence { .. }
        | Error::WindowTooSmall { .. }
        | Error::Numerical { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn load_run_text(config: Option<PathBuf>, man: Option<PathBuf>) -> Result<String> {
    match (config, man) {
        (Some(path), None) => std::fs::read_to_string(&path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display()))),
        (None, Some(path)) => Ok(manifest::Manifest::from_path(&path)?.config_toml),
        _ => Err(Error::config(
            "exactly one of --config or --manifest is required",
        )),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            config,
            manifest: man,
            out,
            set,
        } => {
            let text = load_run_text(config, man)?;
            let cfg = config::resolve(&text, &set)?;
            let art = runner::execute(&cfg)?;
            let written = runner::write_outputs(&out, &art, cfg.canonical_toml()?)?;
            println!(
                "wrote {} file(s) under {} (march {:.2}s)",
                written.outputs.len(),
                out.display(),
                art.timings_s.get("march").copied().unwrap_or(0.0)
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { filter, list } => {
            if list {
                for name in checks::list() {
                    println!("{name}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let results = checks::run_all(filter.as_deref());
            if results.is_empty() {
                return Err(Error::config("no checks match the filter"));
            }
            let mut failed = 0usize;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] {} ({:.2}s): {}", r.name, r.seconds, r.detail);
                if !r.passed {
                    failed += 1;
                }
            }
            println!("{} checks, {failed} failed", results.len());
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Sweep {
            config,
            out,
            jobs,
            set,
        } => {
            let raw = std::fs::read_to_string(&config)
                .map_err(|e| Error::config(format!("cannot read config {}: {e}", config.display())))?;
            let text = if set.is_empty() {
                raw
            } else {
                // apply overrides to the raw table so the sweep axes stay intact
                let mut table: toml::value::Table = toml::from_str(&raw)
                    .map_err(|e| Error::config(format!("config parse error: {e}")))?;
                for s in &set {
                    let (key, value) = s.split_once('=').ok_or_else(|| {
                        Error::config(format!("override {s:?} must be KEY=VALUE"))
                    })?;
                    config::apply_override(&mut table, key.trim(), value.trim())?;
                }
                toml::to_string(&toml::Value::Table(table))
                    .map_err(|e| Error::config(format!("config serialize: {e}")))?
            };
            let jobs = jobs.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
            let (cells, _) = sweep::run_sweep(&text, &out, jobs)?;
            let mut failed = 0usize;
            for c in &cells {
                println!("cell {:03} [{}] {}: {}", c.index, c.status, c.label, c.detail);
                if c.status == "failed" {
                    failed += 1;
                }
            }
            println!(
                "{} cells ({} failed); summary at {}",
                cells.len(),
                failed,
                out.join("sweep_summary.csv").display()
            );
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Report { dir } => {
            print!("{}", manifest::render_report(&dir)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
