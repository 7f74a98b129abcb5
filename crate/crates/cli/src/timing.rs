//! Per-step cost against the number of springs at fixed neighbour count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use wfp_core::analysis::loglog_slope;
use wfp_core::marcher::{dt_for_ntyp, DomainMap, Marcher};
use wfp_core::{BoundaryMode, IncidentPulse, SpringSet, WfpConfig};

use crate::config::TimingConfig;
use crate::geometry::{random_positions, rng, uniform};
use crate::output::{create_dir, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub springs: usize,
    pub dt: f64,
    pub ntyp: f64,
    pub k_max: usize,
    pub steps: usize,
    pub median_step_ms: f64,
    /// Spring-steps per second at the median step time.
    pub throughput: f64,
    pub setup_seconds: f64,
    pub state_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub seed: u64,
    pub rows: Vec<TimingRow>,
    /// Slope of log median step time against log spring count.
    pub exponent: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn time_count(cfg: &TimingConfig, m: usize, seed: u64) -> Result<TimingRow> {
    let clock = Instant::now();
    let mut r = rng(seed);
    let xs = random_positions(&mut r, m, cfg.interval, cfg.min_separation)?;
    let bs = (0..m).map(|_| uniform(&mut r, cfg.beta_range)).collect();
    let user = SpringSet::new(xs, bs)?;
    let span = cfg.interval[1] - cfg.interval[0];
    let dt = dt_for_ntyp(m, span, cfg.ntyp, cfg.eps, cfg.gamma);
    let reach = cfg.interval[0].abs().max(cfg.interval[1].abs());
    let map = DomainMap::fit(reach, dt, cfg.eps, cfg.gamma)?;
    let wcfg = WfpConfig::derive(cfg.eps, cfg.gamma, map.t(dt), cfg.p, BoundaryMode::FreeSpace)?;
    let springs = map.springs(&user)?;
    let pulse = map.pulse(&IncidentPulse::new(cfg.pulse.mu, cfg.pulse.t0)?)?;
    let mut marcher = Marcher::new(&springs, &wcfg)?;
    let setup_seconds = clock.elapsed().as_secs_f64();
    let mut g = vec![0.0; m];
    let mut times = Vec::with_capacity(cfg.steps);
    for n in 0..cfg.steps {
        let t = (n + 1) as f64 * wcfg.dt;
        for (gj, (&x, &b)) in g
            .iter_mut()
            .zip(springs.positions().iter().zip(springs.strengths()))
        {
            *gj = b * pulse.field(x, t);
        }
        let c = Instant::now();
        marcher.advance(&g)?;
        times.push(c.elapsed().as_secs_f64() * 1e3);
    }
    let med = median(times);
    Ok(TimingRow {
        springs: m,
        dt,
        ntyp: marcher.ntyp(),
        k_max: wcfg.k_max,
        steps: cfg.steps,
        median_step_ms: med,
        throughput: m as f64 / (med * 1e-3),
        setup_seconds,
        state_len: marcher.state_len(),
    })
}

pub fn run(cfg: &TimingConfig, seed: u64, mut progress: impl FnMut(&TimingRow)) -> Result<TimingReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &m in &cfg.counts {
        let row = time_count(cfg, m, seed)?;
        progress(&row);
        rows.push(row);
    }
    let exponent = if rows.len() >= 2 {
        let ms: Vec<f64> = rows.iter().map(|r| r.springs as f64).collect();
        let ts: Vec<f64> = rows.iter().map(|r| r.median_step_ms).collect();
        Some(loglog_slope(&ms, &ts)?)
    } else {
        None
    };
    Ok(TimingReport {
        seed,
        rows,
        exponent,
    })
}

pub fn write(report: &TimingReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("timing.csv"))?);
    writeln!(f, "springs,dt,ntyp,k_max,steps,median_step_ms,throughput,setup_seconds,state_len")?;
    for r in &report.rows {
        writeln!(
            f,
            "{},{:e},{:.3},{},{},{:.6},{:.1},{:.3},{}",
            r.springs,
            r.dt,
            r.ntyp,
            r.k_max,
            r.steps,
            r.median_step_ms,
            r.throughput,
            r.setup_seconds,
            r.state_len
        )?;
    }
    f.flush()?;
    write_json(&dir.join("summary.json"), report)
}
