//! JSON experiment configurations.
//!
//! Every config may carry a `full` object. With `--full` it is merged over
//! the rest of the file before parsing, which is how presets request
//! the long, full-size runs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use wfp_core::BoundaryMode;

use crate::Invalid;

pub fn load<T: DeserializeOwned>(path: &Path, full: bool) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, full).with_context(|| format!("in {}", path.display()))
}

pub fn parse<T: DeserializeOwned>(text: &str, full: bool) -> Result<T> {
    let mut v: Value =
        serde_json::from_str(text).map_err(|e| Invalid(format!("config is not JSON: {e}")))?;
    if full {
        if let Some(over) = v.get("full").cloned() {
            merge(&mut v, over);
        }
    }
    Ok(serde_json::from_value(v).map_err(|e| Invalid(format!("bad config: {e}")))?)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn default_eps() -> f64 {
    1e-12
}

fn default_gamma() -> f64 {
    0.5
}

fn default_bc() -> BoundaryMode {
    BoundaryMode::FreeSpace
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Invalid(format!("{name} must be an ordered pair, got {r:?}")).into());
    }
    Ok(())
}

/// Output grid: `nx` positions across `x_range` and `nt` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub nx: usize,
    pub nt: usize,
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        wfp_core::field::linspace(self.x_range[0], self.x_range[1], self.nx)
    }

    fn validate(&self) -> Result<()> {
        check_range("grid.x_range", self.x_range)?;
        if self.nx == 0 || self.nt == 0 {
            return Err(Invalid("grid needs nx, nt >= 1".into()).into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub mu: f64,
    pub t0: f64,
}

/// How spring positions and strengths are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpringSpec {
    Explicit {
        positions: Vec<f64>,
        strengths: Vec<f64>,
    },
    Random {
        count: usize,
        interval: [f64; 2],
        min_separation: f64,
        beta_range: [f64; 2],
    },
    Equispaced {
        count: usize,
        interval: [f64; 2],
        beta: f64,
    },
}

impl SpringSpec {
    /// Largest `|x|` a spring can have.
    pub fn reach(&self) -> f64 {
        match self {
            SpringSpec::Explicit { positions, .. } => {
                positions.iter().fold(0.0, |a, x| a.max(x.abs()))
            }
            SpringSpec::Random { interval, .. } | SpringSpec::Equispaced { interval, .. } => {
                interval[0].abs().max(interval[1].abs())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub p: usize,
    pub dts: Vec<f64>,
}

/// Manufactured-solution convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub springs: usize,
    pub interval: [f64; 2],
    pub min_separation: f64,
    pub mu_range: [f64; 2],
    pub t0_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub t_final: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub sweeps: Vec<Sweep>,
    /// Error grid; times are `t_final * i / nt` for `i = 1..=nt`.
    pub grid: GridSpec,
    /// Points within ten times this value are left out of order fits.
    #[serde(default = "default_eps")]
    pub floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Value>,
}

impl ConvergeConfig {
    pub fn validate(&self) -> Result<()> {
        for (n, r) in [
            ("interval", self.interval),
            ("mu_range", self.mu_range),
            ("t0_range", self.t0_range),
            ("beta_range", self.beta_range),
        ] {
            check_range(n, r)?;
        }
        self.grid.validate()?;
        if self.sweeps.iter().any(|s| s.dts.is_empty()) {
            return Err(Invalid("every sweep needs at least one dt".into()).into());
        }
        if !(self.t_final > 0.0) {
            return Err(Invalid(format!("t_final must be positive, got {}", self.t_final)).into());
        }
        Ok(())
    }
}

/// One simulation of an incident pulse hitting a set of springs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub springs: SpringSpec,
    pub pulse: PulseSpec,
    pub t_final: f64,
    pub dt: f64,
    pub p: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_bc")]
    pub bc: BoundaryMode,
    /// Field grid; times are `nt` points spread over `[0, t_final]`.
    pub grid: GridSpec,
    /// Positions whose time series are kept at every `probe_every` steps.
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default = "one")]
    pub probe_every: usize,
    /// Report the total field instead of the scattered one.
    #[serde(default = "yes")]
    pub total: bool,
    /// Rerun at `dt / 2` and report the uniform difference.
    #[serde(default)]
    pub self_convergence: bool,
    #[serde(default)]
    pub keep_densities: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Value>,
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.t_final > 0.0 && self.dt > 0.0) {
            return Err(Invalid("t_final and dt must be positive".into()).into());
        }
        if self.probe_every == 0 {
            return Err(Invalid("probe_every must be at least 1".into()).into());
        }
        Ok(())
    }
}

/// Per-step cost as the number of springs grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub counts: Vec<usize>,
    pub interval: [f64; 2],
    pub min_separation: f64,
    pub beta_range: [f64; 2],
    pub pulse: PulseSpec,
    /// Target mean neighbour count; sets dt for each count.
    pub ntyp: f64,
    pub p: usize,
    /// Timed steps per count (at least 50).
    pub steps: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Value>,
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("interval", self.interval)?;
        check_range("beta_range", self.beta_range)?;
        if self.steps < 50 {
            return Err(Invalid(format!("need at least 50 timed steps, got {}", self.steps)).into());
        }
        if self.counts.is_empty() || self.counts.contains(&0) {
            return Err(Invalid("counts must be nonempty and positive".into()).into());
        }
        Ok(())
    }
}

/// Two-spring convergence sweep for the stability report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConvergence {
    pub beta: f64,
    pub separation: f64,
    pub t_final: f64,
    pub dts: Vec<f64>,
    /// `(mu, t0)` of the two manufactured densities.
    pub densities: [[f64; 2]; 2],
}

/// Scope of the stability report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    /// One-spring explicit scheme: `n` values of alpha across `[lo, hi]`.
    pub alpha_grid: [f64; 2],
    pub alpha_count: usize,
    /// Extra one-spring explicit cases reported individually.
    pub alpha_extra: Vec<f64>,
    /// One-spring linear scheme.
    pub alpha_linear: Vec<f64>,
    pub impulse_steps: usize,
    /// Random root-condition cases.
    pub root_cases: usize,
    pub root_alpha: [f64; 2],
    pub root_kappa: [f64; 2],
    /// Random norm-bound trials, each with its own `(L, beta, dt)`.
    pub bound_trials: usize,
    /// Random data vectors per trial.
    pub bound_samples: usize,
    /// Boundedness after data stop, explicit scheme.
    pub bounded_cases: usize,
    pub bounded_alpha: f64,
    pub bounded_steps: usize,
    pub convergence: StabilityConvergence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Value>,
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        for (n, r) in [
            ("alpha_grid", self.alpha_grid),
            ("root_alpha", self.root_alpha),
            ("root_kappa", self.root_kappa),
        ] {
            check_range(n, r)?;
        }
        if self.impulse_steps < 20 || self.bounded_steps < 2 {
            return Err(Invalid("impulse_steps >= 20 and bounded_steps >= 2 required".into()).into());
        }
        Ok(())
    }
}

/// Spectra of a finished simulate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    /// Output directory of a `simulate` run, relative to this file.
    pub run: String,
    #[serde(default)]
    pub probe: usize,
    #[serde(default = "default_taper")]
    pub taper_fraction: f64,
    /// Taper shape parameter; larger means lower leakage but a wider main
    /// lobe.
    #[serde(default = "default_taper_b")]
    pub taper_b: f64,
    /// Zero padding factor applied before the FFT.
    #[serde(default = "one")]
    pub pad: usize,
    #[serde(default = "default_peaks")]
    pub peaks: usize,
    /// Reported peaks are at least this far apart in frequency.
    #[serde(default)]
    pub peak_separation: f64,
    /// Cavity length `L`; enables the in-band / out-of-band split around
    /// multiples of `pi / L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<f64>,
    /// Half-width of each band, as a fraction of `pi / L`.
    #[serde(default = "default_band")]
    pub band_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Value>,
}

fn default_taper() -> f64 {
    0.1
}

fn default_taper_b() -> f64 {
    1e12f64.ln()
}

fn default_peaks() -> usize {
    3
}

fn default_band() -> f64 {
    0.1
}
