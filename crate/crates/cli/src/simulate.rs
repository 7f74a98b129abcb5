//! Incident-pulse simulations with optional self-convergence.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use wfp_core::marcher::{dt_for_ntyp, simulate, Diagnostics, DomainMap, Excitation, OutputSpec};
use wfp_core::{BoundaryMode, IncidentPulse, SpaceTimeField, SpringSet, WfpConfig};

use crate::config::{PulseSpec, SimulateConfig};
use crate::geometry::{build_springs, rng};
use crate::output::{create_dir, write_field, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub positions: Vec<f64>,
    pub strengths: Vec<f64>,
    pub pulse: PulseSpec,
    pub total: bool,
    pub dt: f64,
    pub p: usize,
    pub eps: f64,
    pub bc: BoundaryMode,
    pub t_final: f64,
    pub scale: f64,
    pub steps: usize,
    pub k_max: usize,
    pub window_steps: usize,
    pub ntyp: f64,
    /// Step giving about 100 neighbours per spring, for reference.
    pub dt_for_ntyp_100: Option<f64>,
    pub projections: usize,
    pub median_step_ms: f64,
    pub seconds: f64,
    pub max_abs_field: f64,
    pub probes: Vec<f64>,
    /// Uniform field difference against the run at `dt / 2`.
    pub self_convergence: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub summary: SimulateSummary,
    /// Field on the output grid, user units.
    pub field: SpaceTimeField,
    /// Probe series, user units.
    pub probes: SpaceTimeField,
    pub diagnostics: Diagnostics,
    /// `(t, sigma)` rows in user units when densities were kept.
    pub densities: Option<Vec<(f64, Vec<f64>)>>,
}

/// Output times: `nt` points over `[0, t_final]` moved to the nearest step.
pub fn output_steps(cfg: &SimulateConfig) -> Vec<usize> {
    let nt = cfg.grid.nt;
    (0..nt)
        .map(|i| {
            let t = if nt == 1 {
                cfg.t_final
            } else {
                cfg.t_final * i as f64 / (nt - 1) as f64
            };
            (t / cfg.dt).round() as usize
        })
        .collect()
}

fn domain_map(cfg: &SimulateConfig, springs: &SpringSet) -> Result<DomainMap> {
    if cfg.bc == BoundaryMode::Periodic {
        return Ok(DomainMap::identity());
    }
    let reach = springs
        .positions()
        .iter()
        .chain(&cfg.grid.x_range)
        .chain(&cfg.probes)
        .fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(DomainMap::fit(reach.max(f64::MIN_POSITIVE), cfg.dt, cfg.eps, cfg.gamma)?)
}

struct Run {
    field: SpaceTimeField,
    probes: SpaceTimeField,
    diagnostics: Diagnostics,
    densities: Option<wfp_core::DensitySeries>,
    k_max: usize,
    window_steps: usize,
}

fn run_at(
    cfg: &SimulateConfig,
    springs: &SpringSet,
    map: &DomainMap,
    refine: usize,
    keep_densities: bool,
) -> Result<Run> {
    let dt = cfg.dt / refine as f64;
    let wcfg = WfpConfig::derive(cfg.eps, cfg.gamma, map.t(dt), cfg.p, cfg.bc)?;
    let pulse = map.pulse(&IncidentPulse::new(cfg.pulse.mu, cfg.pulse.t0)?)?;
    let out = OutputSpec {
        xs: cfg.grid.xs().iter().map(|&x| map.x(x)).collect(),
        ts: output_steps(cfg)
            .iter()
            .map(|&n| map.t((n * refine) as f64 * dt))
            .collect(),
        total: cfg.total,
        keep_densities,
        probes: cfg.probes.iter().map(|&x| map.x(x)).collect(),
        probe_every: cfg.probe_every * refine,
    };
    let r = simulate(
        &map.springs(springs)?,
        Excitation::Pulse(pulse),
        &wcfg,
        map.t(cfg.t_final),
        &out,
    )?;
    let to_user = |f: SpaceTimeField| SpaceTimeField {
        xs: f.xs.iter().map(|&x| map.x_user(x)).collect(),
        ts: f.ts.iter().map(|&t| map.t_user(t)).collect(),
        values: f.values,
    };
    Ok(Run {
        field: to_user(r.field),
        probes: to_user(r.probes),
        diagnostics: r.diagnostics,
        densities: r.densities,
        k_max: wcfg.k_max,
        window_steps: wcfg.window_steps,
    })
}

pub fn run(cfg: &SimulateConfig, seed: u64) -> Result<SimulateOutcome> {
    cfg.validate()?;
    let clock = Instant::now();
    let springs = build_springs(&cfg.springs, &mut rng(seed))?;
    let map = domain_map(cfg, &springs)?;
    let main = run_at(cfg, &springs, &map, 1, cfg.keep_densities)?;
    let self_convergence = if cfg.self_convergence {
        let fine = run_at(cfg, &springs, &map, 2, false)?;
        let diff = main
            .field
            .values
            .iter()
            .zip(&fine.field.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        Some(diff)
    } else {
        None
    };
    let positions = springs.positions();
    let dt_for_ntyp_100 = (springs.len() >= 2).then(|| {
        let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        dt_for_ntyp(springs.len(), hi - lo, 100.0, cfg.eps, cfg.gamma)
    });
    let densities = main.densities.as_ref().map(|d| {
        (0..=d.steps())
            .map(|n| {
                (
                    map.t_user(n as f64 * d.dt),
                    d.at(n).iter().map(|v| v * map.scale).collect(),
                )
            })
            .collect()
    });
    let summary = SimulateSummary {
        seed,
        positions: positions.to_vec(),
        strengths: springs.strengths().to_vec(),
        pulse: cfg.pulse,
        total: cfg.total,
        dt: cfg.dt,
        p: cfg.p,
        eps: cfg.eps,
        bc: cfg.bc,
        t_final: cfg.t_final,
        scale: map.scale,
        steps: main.diagnostics.steps,
        k_max: main.k_max,
        window_steps: main.window_steps,
        ntyp: main.diagnostics.ntyp,
        dt_for_ntyp_100,
        projections: main.diagnostics.projections,
        median_step_ms: main.diagnostics.median_step_ms(),
        seconds: clock.elapsed().as_secs_f64(),
        max_abs_field: main.field.max_abs(),
        probes: cfg.probes.clone(),
        self_convergence,
    };
    Ok(SimulateOutcome {
        summary,
        field: main.field,
        probes: main.probes,
        diagnostics: main.diagnostics,
        densities,
    })
}

pub fn write(outcome: &SimulateOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_field(&dir.join("field.csv"), &outcome.field)?;
    if !outcome.probes.xs.is_empty() {
        write_field(&dir.join("probes.csv"), &outcome.probes)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("diagnostics.jsonl"))?);
    outcome.diagnostics.write_json_lines(&mut f)?;
    f.flush()?;
    if let Some(d) = &outcome.densities {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("densities.csv"))?);
        write!(f, "t")?;
        for j in 0..outcome.summary.positions.len() {
            write!(f, ",sigma_{j}")?;
        }
        writeln!(f)?;
        for (t, row) in d {
            write!(f, "{t:.17e}")?;
            for v in row {
                write!(f, ",{v:.17e}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
    }
    write_json(&dir.join("summary.json"), &outcome.summary)
}
