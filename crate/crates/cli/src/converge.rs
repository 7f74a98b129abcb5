//! Manufactured-solution convergence sweeps.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use wfp_core::analysis::estimate_order_above;
use wfp_core::marcher::{simulate, DomainMap, Excitation, OutputSpec};
use wfp_core::potential::{GaussianDensity, ManufacturedProblem};
use wfp_core::{BoundaryMode, SpringSet, WfpConfig, WfpError};

use crate::config::ConvergeConfig;
use crate::geometry::{random_positions, rng, uniform};
use crate::output::{create_dir, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub p: usize,
    pub dt: f64,
    /// Max field error over the space-time grid.
    pub field_error: f64,
    /// Max density error over all steps and springs.
    pub density_error: f64,
    pub steps: usize,
    pub k_max: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub p: usize,
    pub field_order: Option<f64>,
    pub density_order: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub seed: u64,
    pub eps: f64,
    pub floor: f64,
    pub positions: Vec<f64>,
    pub strengths: Vec<f64>,
    pub densities: Vec<GaussianDensity>,
    pub rows: Vec<ConvergeRow>,
    pub fits: Vec<OrderFit>,
}

/// Random springs and Gaussian densities; draws positions, then strengths,
/// then `(mu, t0)` pairs.
pub fn manufactured(cfg: &ConvergeConfig, seed: u64) -> Result<ManufacturedProblem> {
    let mut r = rng(seed);
    let xs = random_positions(&mut r, cfg.springs, cfg.interval, cfg.min_separation)?;
    let bs: Vec<f64> = (0..cfg.springs).map(|_| uniform(&mut r, cfg.beta_range)).collect();
    let dens = (0..cfg.springs)
        .map(|_| {
            let mu = uniform(&mut r, cfg.mu_range);
            GaussianDensity::new(mu, uniform(&mut r, cfg.t0_range))
        })
        .collect::<wfp_core::Result<Vec<_>>>()?;
    Ok(ManufacturedProblem::new(
        SpringSet::new(xs, bs)?,
        dens,
        BoundaryMode::FreeSpace,
    )?)
}

/// Scale used for every step of one sweep: fits springs and grid for the
/// coarsest step.
pub fn sweep_map(cfg: &ConvergeConfig, coarsest: f64) -> Result<DomainMap> {
    let reach = [cfg.interval, cfg.grid.x_range]
        .iter()
        .flatten()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(DomainMap::fit(reach, coarsest, cfg.eps, cfg.gamma)?)
}

/// One WFP run against the manufactured solution.
pub fn run_point(
    prob: &ManufacturedProblem,
    cfg: &ConvergeConfig,
    map: &DomainMap,
    p: usize,
    dt: f64,
) -> Result<ConvergeRow> {
    let clock = Instant::now();
    let c = map.scale;
    let wcfg = WfpConfig::derive(cfg.eps, cfg.gamma, map.t(dt), p, BoundaryMode::FreeSpace)?;
    let springs = map.springs(&prob.springs)?;
    let data = |t: f64, out: &mut [f64]| {
        wfp_core::DataSource::eval(prob, t / c, out);
        out.iter_mut().for_each(|v| *v /= c);
    };
    let xs = cfg.grid.xs();
    let nt = cfg.grid.nt;
    let out = OutputSpec {
        xs: xs.iter().map(|&x| map.x(x)).collect(),
        ts: (1..=nt)
            .map(|i| map.t(cfg.t_final * i as f64 / nt as f64))
            .collect(),
        keep_densities: true,
        ..OutputSpec::default()
    };
    let r = simulate(
        &springs,
        Excitation::Data(&data),
        &wcfg,
        map.t(cfg.t_final),
        &out,
    )?;
    let mut field_error: f64 = 0.0;
    for (it, &t) in r.field.ts.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let e = r.field.get(it, ix) - prob.exact_field(x, map.t_user(t));
            field_error = field_error.max(e.abs());
        }
    }
    let d = r.densities.as_ref().expect("densities were requested");
    let mut density_error: f64 = 0.0;
    for n in 0..=d.steps() {
        let exact = prob.exact_density(map.t_user(n as f64 * d.dt));
        for (v, e) in d.at(n).iter().zip(exact) {
            density_error = density_error.max((v * c - e).abs());
        }
    }
    if !(field_error.is_finite() && density_error.is_finite()) {
        return Err(WfpError::NonFinite { step: d.steps() }.into());
    }
    Ok(ConvergeRow {
        p,
        dt,
        field_error,
        density_error,
        steps: r.diagnostics.steps,
        k_max: wcfg.k_max,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn fit(errors: &[f64], dts: &[f64], floor: f64) -> (Option<f64>, Option<String>) {
    match estimate_order_above(errors, dts, floor) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

/// Runs every `(p, dt)` cell, up to one per available core; rows come back
/// in cell order.
fn run_cells(
    prob: &ManufacturedProblem,
    cfg: &ConvergeConfig,
    cells: &[(usize, f64, DomainMap)],
    progress: &mut dyn FnMut(&ConvergeRow),
) -> Result<Vec<ConvergeRow>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(cells.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((p, dt, map)) = cells.get(i) else {
                    break;
                };
                if tx.send((i, run_point(prob, cfg, map, *p, *dt))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut rows: Vec<Option<ConvergeRow>> = vec![None; cells.len()];
        for (i, row) in rx {
            let row = row?;
            progress(&row);
            rows[i] = Some(row);
        }
        Ok(rows.into_iter().flatten().collect())
    })
}

pub fn run(cfg: &ConvergeConfig, seed: u64, mut progress: impl FnMut(&ConvergeRow)) -> Result<ConvergeReport> {
    cfg.validate()?;
    let prob = manufactured(cfg, seed)?;
    let mut cells = Vec::new();
    for sweep in &cfg.sweeps {
        let map = sweep_map(cfg, sweep.dts.iter().fold(0.0, |a: f64, &d| a.max(d)))?;
        cells.extend(sweep.dts.iter().map(|&dt| (sweep.p, dt, map)));
    }
    let rows = run_cells(&prob, cfg, &cells, &mut progress)?;
    let mut fits = Vec::new();
    let mut start = 0;
    for sweep in &cfg.sweeps {
        let mine = &rows[start..start + sweep.dts.len()];
        start += sweep.dts.len();
        let dts: Vec<f64> = mine.iter().map(|r| r.dt).collect();
        let fe: Vec<f64> = mine.iter().map(|r| r.field_error).collect();
        let de: Vec<f64> = mine.iter().map(|r| r.density_error).collect();
        let (field_order, note) = if dts.len() < 2 {
            (None, Some("single step size; no fit".to_string()))
        } else {
            fit(&fe, &dts, cfg.floor)
        };
        let density_order = if dts.len() < 2 {
            None
        } else {
            fit(&de, &dts, cfg.floor).0
        };
        fits.push(OrderFit {
            p: sweep.p,
            field_order,
            density_order,
            note,
        });
    }
    Ok(ConvergeReport {
        seed,
        eps: cfg.eps,
        floor: cfg.floor,
        positions: prob.springs.positions().to_vec(),
        strengths: prob.springs.strengths().to_vec(),
        densities: prob.densities.clone(),
        rows,
        fits,
    })
}

pub fn write(report: &ConvergeReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("convergence.csv"))?);
    writeln!(f, "p,dt,field_error,density_error,steps,k_max,seconds")?;
    for r in &report.rows {
        writeln!(
            f,
            "{},{:e},{:e},{:e},{},{},{:.3}",
            r.p, r.dt, r.field_error, r.density_error, r.steps, r.k_max, r.seconds
        )?;
    }
    f.flush()?;
    write_json(&dir.join("summary.json"), report)
}
