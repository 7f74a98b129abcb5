//! Experiment commands behind the `wfp` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use wfp_core::WfpError;

pub mod config;
pub mod converge;
pub mod geometry;
pub mod output;
pub mod simulate;
pub mod spectra;
pub mod stability;
pub mod timing;

/// Bad user input: config values, files or flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Debug, Parser)]
#[command(name = "wfp", version, about = "Time-domain scattering from point springs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Merge the config's `full` block before running.
    #[arg(long)]
    pub full: bool,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order sweeps against a manufactured solution.
    Converge(Common),
    /// Pulse scattering run with field, probe and diagnostic output.
    Simulate(Common),
    /// Median step time against spring count.
    Timing(Common),
    /// Checks on the one- and two-spring schemes.
    Stability(Common),
    /// Spectra at a probe of an earlier simulate run.
    Spectra(Common),
}

/// 2 for input errors, 3 for numerical failures, 1 for anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Invalid>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(w) = cause.downcast_ref::<WfpError>() {
            return if w.is_validation() { 2 } else { 3 };
        }
    }
    1
}

fn say(quiet: bool, msg: impl fmt::Display) {
    if !quiet {
        eprintln!("{msg}");
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge(c) => {
            let cfg: config::ConvergeConfig = config::load(&c.config, c.full)?;
            let report = converge::run(&cfg, c.seed, |r| {
                say(
                    c.quiet,
                    format_args!(
                        "p={} dt={:e} field={:.3e} density={:.3e} ({:.1}s)",
                        r.p, r.dt, r.field_error, r.density_error, r.seconds
                    ),
                )
            })?;
            for f in &report.fits {
                say(
                    c.quiet,
                    format_args!(
                        "p={} field order {:?} density order {:?}",
                        f.p, f.field_order, f.density_order
                    ),
                );
            }
            converge::write(&report, &c.out)
        }
        Command::Simulate(c) => {
            let cfg: config::SimulateConfig = config::load(&c.config, c.full)?;
            let outcome = simulate::run(&cfg, c.seed)?;
            let s = &outcome.summary;
            say(
                c.quiet,
                format_args!(
                    "{} springs, {} steps, ntyp {:.1}, median step {:.3} ms, {:.1}s",
                    s.positions.len(),
                    s.steps,
                    s.ntyp,
                    s.median_step_ms,
                    s.seconds
                ),
            );
            if let Some(d) = s.self_convergence {
                say(c.quiet, format_args!("self-convergence {d:.3e}"));
            }
            simulate::write(&outcome, &c.out)
        }
        Command::Timing(c) => {
            let cfg: config::TimingConfig = config::load(&c.config, c.full)?;
            let report = timing::run(&cfg, c.seed, |r| {
                say(
                    c.quiet,
                    format_args!(
                        "M={} ntyp={:.1} median {:.4} ms setup {:.1}s",
                        r.springs, r.ntyp, r.median_step_ms, r.setup_seconds
                    ),
                )
            })?;
            if let Some(e) = report.exponent {
                say(c.quiet, format_args!("exponent {e:.3}"));
            }
            timing::write(&report, &c.out)
        }
        Command::Stability(c) => {
            let cfg: config::StabilityConfig = config::load(&c.config, c.full)?;
            let report = stability::run(&cfg, c.seed)?;
            for s in &report.sections {
                say(c.quiet, format_args!("{}: {}/{}", s.check, s.passed, s.cases));
            }
            stability::write(&report, &c.out)
        }
        Command::Spectra(c) => {
            let cfg: config::SpectraConfig = config::load(&c.config, c.full)?;
            let outcome = spectra::run(&cfg, &config_dir(&c.config))?;
            let s = &outcome.summary;
            say(
                c.quiet,
                format_args!("transmitted fraction {:.4}", s.transmitted_fraction),
            );
            for m in &s.matches {
                say(
                    c.quiet,
                    format_args!(
                        "peak {:.4} near n={} offset {:.3}%",
                        m.omega,
                        m.multiple,
                        100.0 * m.relative_offset
                    ),
                );
            }
            spectra::write(&outcome, &c.out)
        }
    }
}
