//! WFP time marching: the per-step solve, radiation-condition projection,
//! restartable state and end-to-end simulation.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::time::Instant;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::{validate_geometry, window_steps_for, BoundaryMode, WfpConfig};
use crate::error::{Result, WfpError};
use crate::field::SpaceTimeField;
use crate::history::{eval_history, HistoryEngine, HistoryState};
use crate::local::{DensityHistory, LocalOperators, TargetEvaluator};
use crate::nufft::{ModeVector, NufftPlan};
use crate::potential::{DataSource, DensitySeries, GaussianDensity, IncidentPulse, SpringSet};
use crate::window::Window;

/// Time marcher for one spring configuration. Densities enter and leave in
/// the caller's spring order; internally springs are position-sorted.
#[derive(Debug)]
pub struct Marcher {
    cfg: WfpConfig,
    window: Window,
    ops: LocalOperators,
    engine: HistoryEngine,
    hist: DensityHistory,
    state: HistoryState,
    beta: Vec<f64>,
    sigma: Vec<f64>,
    rhs: Vec<f64>,
    expl: Vec<f64>,
    g_sorted: Vec<f64>,
}

impl Marcher {
    pub fn new(springs: &SpringSet, cfg: &WfpConfig) -> Result<Self> {
        validate_geometry(springs, cfg)?;
        let window = Window::new(cfg.delta, cfg.b);
        let ops = LocalOperators::build(springs, cfg, &window)?;
        let engine = HistoryEngine::new(&window, cfg, &ops.order.positions);
        let m = springs.len();
        let beta = ops.order.strengths.clone();
        Ok(Marcher {
            cfg: cfg.clone(),
            hist: DensityHistory::new(m, cfg.m_max + 1),
            state: engine.new_state(),
            beta,
            window,
            ops,
            engine,
            sigma: vec![0.0; m],
            rhs: vec![0.0; m],
            expl: vec![0.0; m],
            g_sorted: vec![0.0; m],
        })
    }

    pub fn config(&self) -> &WfpConfig {
        &self.cfg
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn operators(&self) -> &LocalOperators {
        &self.ops
    }

    pub fn history_state(&self) -> &HistoryState {
        &self.state
    }

    pub fn history_state_mut(&mut self) -> &mut HistoryState {
        &mut self.state
    }

    pub fn density_history(&self) -> &DensityHistory {
        &self.hist
    }

    pub fn step_index(&self) -> usize {
        self.hist.n
    }

    pub fn time(&self) -> f64 {
        self.hist.n as f64 * self.cfg.dt
    }

    pub fn springs(&self) -> usize {
        self.ops.len()
    }

    /// Current density `σ^n`, caller order.
    pub fn density(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.springs()];
        self.ops.order.to_caller(&self.hist.newest(), &mut out);
        out
    }

    /// Mean number of other springs within `δ` of a spring.
    pub fn ntyp(&self) -> f64 {
        self.ops.neighbor_mean()
    }

    /// Numbers held by the time-dependent state (density ring plus Fourier
    /// state, complex counted twice).
    pub fn state_len(&self) -> usize {
        self.hist.storage_len() + 2 * self.state.storage_len()
    }

    /// Advance `t_n -> t_{n+1}` with data `g^{n+1}` in caller order.
    pub fn step(&mut self, g_next: &[f64]) -> Result<()> {
        let m = self.springs();
        if g_next.len() != m {
            return Err(WfpError::InvalidParameter(format!(
                "{} data values for {m} springs",
                g_next.len()
            )));
        }
        let n1 = self.hist.n + 1;
        // S_k(t_n) from σ^n, then α^{n+1}.
        for (l, s) in self.sigma.iter_mut().enumerate() {
            *s = self.hist.slots(l)[0];
        }
        self.engine.step(&mut self.state, &self.sigma);
        let uh = if m > 0 {
            self.engine.spring_plan.type2(&self.state.alpha)
        } else {
            Vec::new()
        };
        self.ops.apply_explicit(&self.hist, &mut self.expl);
        self.ops.order.to_sorted(g_next, &mut self.g_sorted);
        for j in 0..m {
            self.rhs[j] = -(self.g_sorted[j] + self.expl[j] + self.beta[j] * uh[j].re);
        }
        self.ops.solve(&mut self.rhs);
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return Err(WfpError::NonFinite { step: n1 });
        }
        self.hist.push(&self.rhs);
        Ok(())
    }

    /// Whether the radiation condition is due after the current step.
    pub fn projection_due(&self) -> bool {
        self.cfg.bc == BoundaryMode::FreeSpace
            && self.hist.n > 0
            && self.hist.n % self.cfg.proj_period == 0
    }

    /// Project now (free-space mode only).
    pub fn project(&mut self) -> Result<()> {
        rbc_project(&mut self.state, &self.window, &self.cfg)
    }

    /// `step` followed by the scheduled projection.
    pub fn advance(&mut self, g_next: &[f64]) -> Result<()> {
        self.step(g_next)?;
        if self.projection_due() {
            self.project()?;
        }
        Ok(())
    }

    /// Little-endian snapshot of the time-dependent state.
    pub fn write_snapshot(&self, out: &mut impl Write) -> Result<()> {
        self.hist.write_to(out)?;
        self.state.write_to(out)
    }

    /// Restore a snapshot taken from a marcher with the same springs and
    /// configuration.
    pub fn read_snapshot(&mut self, input: &mut impl Read) -> Result<()> {
        let hist = DensityHistory::read_from(input)?;
        let state = HistoryState::read_from(input)?;
        if hist.springs() != self.springs()
            || hist.depth() != self.hist.depth()
            || state.k_max() != self.state.k_max()
            || state.depth() != self.state.depth()
        {
            return Err(WfpError::Format(
                "snapshot does not match this marcher".into(),
            ));
        }
        self.hist = hist;
        self.state = state;
        Ok(())
    }

    /// Field evaluator for fixed targets.
    pub fn probe(&self, targets: &[f64]) -> Result<FieldProbe> {
        if self.cfg.bc == BoundaryMode::FreeSpace {
            let lim = PI - 2.0 * self.cfg.delta;
            if let Some(x) = targets.iter().find(|x| x.abs() > lim) {
                return Err(WfpError::InvalidParameter(format!(
                    "target {x} lies in the roll-off region |x| > {lim}"
                )));
            }
        }
        Ok(FieldProbe {
            local: TargetEvaluator::new(&self.ops.order, targets, &self.cfg, &self.window),
            plan: NufftPlan::new(targets, self.cfg.k_max, self.cfg.eps),
        })
    }
}

/// Evaluates `u_L + u_H` at a fixed set of targets.
#[derive(Debug)]
pub struct FieldProbe {
    local: TargetEvaluator,
    plan: NufftPlan,
}

impl FieldProbe {
    /// Scattered field at the marcher's current time.
    pub fn eval(&self, marcher: &Marcher, out: &mut [f64]) {
        self.local.eval(&marcher.hist, out);
        if self.plan.points().is_empty() {
            return;
        }
        for (o, h) in out.iter_mut().zip(eval_history(&self.plan, &marcher.state)) {
            *o += h;
        }
    }

    pub fn eval_parts(&self, marcher: &Marcher) -> (Vec<f64>, Vec<f64>) {
        let mut local = vec![0.0; self.local.len()];
        self.local.eval(&marcher.hist, &mut local);
        (local, eval_history(&self.plan, &marcher.state))
    }
}

/// Roll the history field off to zero near `x = ±π` with outgoing phase.
/// The `k = K` mode is discarded.
pub fn rbc_project(state: &mut HistoryState, window: &Window, cfg: &WfpConfig) -> Result<()> {
    if cfg.bc != BoundaryMode::FreeSpace {
        return Err(WfpError::WrongMode(
            "radiation projection applies only in free-space mode".into(),
        ));
    }
    let kk = state.k_max();
    let n = 2 * kk;
    let h = 2.0 * PI / n as f64;
    let delta = window.delta();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    // u_i = sum_{k=-K}^{K-1} alpha_k e^{-i k x_i}: forward DFT of alpha_k
    // stored at index k mod n.
    let to_grid = |modes: &ModeVector| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for k in -(kk as i64)..kk as i64 {
            buf[k.rem_euclid(n as i64) as usize] = modes.get(k);
        }
        fwd.process(&mut buf);
        buf
    };
    let mut u = to_grid(&state.alpha);
    let mut v = to_grid(&state.alpha_prime);
    for i in 0..n {
        // Grid point i sits at x = i h for i < K and x = (i - n) h above.
        let x = if i < kk {
            i as f64 * h
        } else {
            (i as f64 - n as f64) * h
        };
        if x >= PI - 2.0 * delta {
            let s = PI - delta - x;
            let (f, fp) = (window.phi(s), window.phi_prime(s));
            let ui = u[i];
            u[i] = f * ui;
            v[i] = fp * ui + f * v[i];
        } else if x < -PI + 2.0 * delta {
            let s = x + PI - delta;
            let (f, fp) = (window.phi(s), window.phi_prime(s));
            let ui = u[i];
            u[i] = f * ui;
            v[i] = fp * ui + f * v[i];
        }
    }
    let scale = 1.0 / n as f64;
    let back = |grid: &mut Vec<Complex64>, modes: &mut ModeVector| {
        inv.process(grid);
        for k in -(kk as i64)..kk as i64 {
            modes.set(k, grid[k.rem_euclid(n as i64) as usize] * scale);
        }
        modes.set(kk as i64, Complex64::new(0.0, 0.0));
    };
    back(&mut u, &mut state.alpha);
    back(&mut v, &mut state.alpha_prime);
    Ok(())
}

/// Step size giving about `ntyp` neighbours per spring for `m` springs
/// spread uniformly over a length `span`, with window width `W(eps, gamma)`.
pub fn dt_for_ntyp(m: usize, span: f64, ntyp: f64, eps: f64, gamma: f64) -> f64 {
    let delta = ntyp * span / (2.0 * m as f64);
    delta / window_steps_for(eps, gamma) as f64
}

/// Affine map `solver = scale * user` for space and time, preserving unit
/// wave speed. Strengths and data scale by `1/scale`, densities by
/// `1/scale`, frequencies by `1/scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    pub scale: f64,
}

impl DomainMap {
    pub fn identity() -> Self {
        DomainMap { scale: 1.0 }
    }

    /// Fit user positions in `[-half_width, half_width]` into the
    /// free-space domain `[-π + 3δ, π - 3δ]` for user step `dt_user`.
    pub fn fit(half_width: f64, dt_user: f64, eps: f64, gamma: f64) -> Result<Self> {
        if !(half_width > 0.0 && dt_user > 0.0) {
            return Err(WfpError::InvalidParameter(format!(
                "need positive half width and dt, got {half_width}, {dt_user}"
            )));
        }
        let w = window_steps_for(eps, gamma) as f64;
        Ok(DomainMap {
            scale: PI / (half_width + 3.0 * w * dt_user),
        })
    }

    pub fn x(&self, x_user: f64) -> f64 {
        self.scale * x_user
    }

    pub fn t(&self, t_user: f64) -> f64 {
        self.scale * t_user
    }

    pub fn x_user(&self, x: f64) -> f64 {
        x / self.scale
    }

    pub fn t_user(&self, t: f64) -> f64 {
        t / self.scale
    }

    pub fn springs(&self, springs: &SpringSet) -> Result<SpringSet> {
        SpringSet::new(
            springs.positions().iter().map(|&x| self.x(x)).collect(),
            springs
                .strengths()
                .iter()
                .map(|&b| b / self.scale)
                .collect(),
        )
    }

    pub fn pulse(&self, pulse: &IncidentPulse) -> Result<IncidentPulse> {
        IncidentPulse::new(pulse.mu / (self.scale * self.scale), pulse.t0 * self.scale)
    }

    /// Gaussian density in solver units (amplitude divided by the scale is
    /// left to the caller).
    pub fn gaussian(&self, d: &GaussianDensity) -> Result<GaussianDensity> {
        GaussianDensity::new(d.mu / (self.scale * self.scale), d.t0 * self.scale)
    }

    pub fn omega_user(&self, omega: f64) -> f64 {
        omega * self.scale
    }
}

/// What drives the springs.
pub enum Excitation<'a> {
    Pulse(IncidentPulse),
    Data(&'a dyn DataSource),
}

/// Output selection for [`simulate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub xs: Vec<f64>,
    /// Requested output times; each is served at the nearest step.
    pub ts: Vec<f64>,
    /// Add the incident field (pulse excitation only).
    #[serde(default)]
    pub total: bool,
    #[serde(default)]
    pub keep_densities: bool,
    /// Positions sampled every `probe_every` steps from `t = 0`.
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default = "one")]
    pub probe_every: usize,
}

fn one() -> usize {
    1
}

/// Run diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub step_ms: Vec<f64>,
    pub max_sigma: Vec<f64>,
    pub ntyp: f64,
    pub k_max: usize,
    pub window_steps: usize,
    pub projections: usize,
    pub state_len: usize,
}

impl Diagnostics {
    pub fn median_step_ms(&self) -> f64 {
        if self.step_ms.is_empty() {
            return 0.0;
        }
        let mut v = self.step_ms.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    /// One JSON object per step.
    pub fn write_json_lines(&self, out: &mut impl Write) -> Result<()> {
        for (i, (ms, s)) in self.step_ms.iter().zip(&self.max_sigma).enumerate() {
            writeln!(
                out,
                "{}",
                serde_json::json!({"step": i + 1, "wall_ms": ms, "max_abs_sigma": s})
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub densities: Option<DensitySeries>,
    pub field: SpaceTimeField,
    /// Probe time series; empty when no probes were requested.
    pub probes: SpaceTimeField,
    pub diagnostics: Diagnostics,
}

/// March to `t_final` and sample the field at the requested outputs.
pub fn simulate(
    springs: &SpringSet,
    excitation: Excitation<'_>,
    cfg: &WfpConfig,
    t_final: f64,
    output: &OutputSpec,
) -> Result<SimulationResult> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(WfpError::InvalidParameter(format!(
            "bad final time {t_final}"
        )));
    }
    if let Excitation::Pulse(p) = &excitation {
        if !p.clear_of(springs, cfg.eps) {
            return Err(WfpError::InvalidParameter(
                "incident pulse overlaps the springs at t = 0".into(),
            ));
        }
    }
    if output.total && !matches!(excitation, Excitation::Pulse(_)) {
        return Err(WfpError::InvalidParameter(
            "total field needs an incident pulse".into(),
        ));
    }
    let steps = (t_final / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let out_steps: Vec<usize> = output
        .ts
        .iter()
        .map(|&t| ((t / cfg.dt).round().max(0.0) as usize).min(steps))
        .collect();
    let ts: Vec<f64> = out_steps.iter().map(|&n| n as f64 * cfg.dt).collect();
    let mut marcher = Marcher::new(springs, cfg)?;
    let probe = marcher.probe(&output.xs)?;
    let mut field = SpaceTimeField::zeros(output.xs.clone(), ts.clone());
    let every = output.probe_every.max(1);
    let side = marcher.probe(&output.probes)?;
    let side_ts: Vec<f64> = if output.probes.is_empty() {
        Vec::new()
    } else {
        (0..=steps / every).map(|i| (i * every) as f64 * cfg.dt).collect()
    };
    let mut probes = SpaceTimeField::zeros(output.probes.clone(), side_ts);
    let mut side_row = vec![0.0; output.probes.len()];
    let mut densities = output
        .keep_densities
        .then(|| DensitySeries::zeros(cfg.dt, springs.len(), steps));
    let m = springs.len();
    let mut g = vec![0.0; m];
    let mut row = vec![0.0; output.xs.len()];
    let mut diag = Diagnostics {
        steps,
        ntyp: marcher.ntyp(),
        k_max: cfg.k_max,
        window_steps: cfg.window_steps,
        state_len: marcher.state_len(),
        ..Diagnostics::default()
    };
    let add_incident = |xs: &[f64], row: &mut [f64], n: usize| {
        if output.total {
            if let Excitation::Pulse(p) = &excitation {
                for (v, &x) in row.iter_mut().zip(xs) {
                    *v += p.field(x, n as f64 * cfg.dt);
                }
            }
        }
    };
    let mut emit = |n: usize, marcher: &Marcher| {
        for (it, &ns) in out_steps.iter().enumerate() {
            if ns != n {
                continue;
            }
            probe.eval(marcher, &mut row);
            add_incident(&output.xs, &mut row, n);
            field.row_mut(it).copy_from_slice(&row);
        }
        if !output.probes.is_empty() && n % every == 0 {
            side.eval(marcher, &mut side_row);
            add_incident(&output.probes, &mut side_row, n);
            probes.row_mut(n / every).copy_from_slice(&side_row);
        }
    };
    emit(0, &marcher);
    for n in 0..steps {
        let t = (n + 1) as f64 * cfg.dt;
        match &excitation {
            Excitation::Pulse(p) => {
                for (gj, (&x, &b)) in g
                    .iter_mut()
                    .zip(springs.positions().iter().zip(springs.strengths()))
                {
                    *gj = b * p.field(x, t);
                }
            }
            Excitation::Data(d) => d.eval(t, &mut g),
        }
        let clock = Instant::now();
        marcher.step(&g)?;
        diag.step_ms.push(clock.elapsed().as_secs_f64() * 1e3);
        let sigma = marcher.density();
        diag.max_sigma
            .push(sigma.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        if let Some(d) = densities.as_mut() {
            d.at_mut(n + 1).copy_from_slice(&sigma);
        }
        emit(n + 1, &marcher);
        if marcher.projection_due() {
            marcher.project()?;
            diag.projections += 1;
        }
    }
    Ok(SimulationResult {
        densities,
        field,
        probes,
        diagnostics: diag,
    })
}
