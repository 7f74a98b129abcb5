//! Discretization parameters derived from the user-level inputs
//! (window tolerance, Nyquist fraction, time step, interpolation order).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WfpError};
use crate::potential::SpringSet;

/// Boundary condition of the scattered field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    Periodic,
    FreeSpace,
}

/// Gauss-Legendre nodes used for the one-step influence kernel precompute.
pub const DEFAULT_KERNEL_NODES: usize = 16;

/// Every parameter of the scheme. Immutable once derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfpConfig {
    pub dt: f64,
    pub eps: f64,
    pub gamma: f64,
    /// Window shape parameter, `ln(1/eps)`.
    pub b: f64,
    /// Window timescale, `window_steps * dt`.
    pub delta: f64,
    /// Window width in time steps (W).
    pub window_steps: usize,
    /// Highest retained Fourier mode (K).
    pub k_max: usize,
    /// Interpolation node count (even).
    pub p: usize,
    /// Depth of the recent-density stack.
    pub m_max: usize,
    /// Gauss-Legendre nodes per time step of each local integral.
    pub local_nodes: usize,
    /// Gauss-Legendre nodes for the influence kernel precompute.
    pub kernel_nodes: usize,
    /// Steps between radiation-condition projections.
    pub proj_period: usize,
    pub bc: BoundaryMode,
}

impl WfpConfig {
    /// Derive all parameters from `(eps, gamma, dt, p, bc)`.
    pub fn derive(eps: f64, gamma: f64, dt: f64, p: usize, bc: BoundaryMode) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(WfpError::InvalidParameter(format!(
                "eps must lie in (0,1), got {eps}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(WfpError::InvalidParameter(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(WfpError::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if p < 2 || p > 16 || p % 2 != 0 {
            return Err(WfpError::InvalidParameter(format!(
                "p must be even and in [2,16], got {p}"
            )));
        }
        Self::assemble(eps, gamma, dt, p, bc, window_steps_for(eps, gamma))
    }

    /// Same as [`WfpConfig::derive`] but with the window width forced to
    /// `window_steps` time steps.
    pub fn with_window_steps(
        eps: f64,
        gamma: f64,
        dt: f64,
        p: usize,
        bc: BoundaryMode,
        window_steps: usize,
    ) -> Result<Self> {
        let base = Self::derive(eps, gamma, dt, p, bc)?;
        if window_steps == 0 {
            return Err(WfpError::InvalidParameter(
                "window_steps must be >= 1".into(),
            ));
        }
        Self::assemble(base.eps, base.gamma, base.dt, base.p, base.bc, window_steps)
    }

    fn assemble(
        eps: f64,
        gamma: f64,
        dt: f64,
        p: usize,
        bc: BoundaryMode,
        window_steps: usize,
    ) -> Result<Self> {
        let b = (1.0 / eps).ln();
        let delta = window_steps as f64 * dt;
        if delta >= PI {
            return Err(WfpError::InvalidParameter(format!(
                "window timescale delta = {delta} must be below pi"
            )));
        }
        // Guard against pi/dt landing a hair above an integer through rounding.
        let ratio = PI / dt;
        let k_max = if (ratio - ratio.round()).abs() < 1e-9 * ratio {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(WfpConfig {
            dt,
            eps,
            gamma,
            b,
            delta,
            window_steps,
            k_max,
            p,
            m_max: window_steps + p / 2,
            local_nodes: p / 2 + 6,
            kernel_nodes: DEFAULT_KERNEL_NODES,
            proj_period: (1.5 * window_steps as f64).floor().max(1.0) as usize,
            bc,
        })
    }

    pub fn with_kernel_nodes(mut self, n: usize) -> Self {
        self.kernel_nodes = n.max(1);
        self
    }

    pub fn with_local_nodes(mut self, n: usize) -> Self {
        self.local_nodes = n.max(1);
        self
    }

    /// Total mode count `2K + 1`.
    pub fn mode_count(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Cutoff frequency of the window, `2b/delta`.
    pub fn window_bandlimit(&self) -> f64 {
        2.0 * self.b / self.delta
    }

    /// Bounds of the computational domain in free-space mode.
    pub fn free_space_domain(&self) -> (f64, f64) {
        (-PI + 3.0 * self.delta, PI - 3.0 * self.delta)
    }

    /// Re-derive from this config's own user-level inputs.
    pub fn rederive(&self) -> Result<Self> {
        let mut c = Self::assemble(
            self.eps,
            self.gamma,
            self.dt,
            self.p,
            self.bc,
            self.window_steps,
        )?;
        c.kernel_nodes = self.kernel_nodes;
        c.local_nodes = self.local_nodes;
        Ok(c)
    }
}

/// Window width in steps, `round(2 ln(1/eps) / (pi gamma))`, at least 1.
pub fn window_steps_for(eps: f64, gamma: f64) -> usize {
    ((2.0 / (PI * gamma)) * (1.0 / eps).ln()).round().max(1.0) as usize
}

/// Time step whose Nyquist bandlimit holds a signal of bandlimit `k0` plus
/// the window broadening, `dt = pi / ceil(k0 / (1 - gamma))`.
pub fn suggest_dt(k0: f64, gamma: f64) -> f64 {
    PI / (k0 / (1.0 - gamma)).ceil()
}

/// eps-bandlimit of the Gaussian `exp(-mu t^2)`: the frequency where its
/// transform `exp(-w^2 / 4mu)` falls to `eps`.
pub fn gaussian_bandlimit(mu: f64, eps: f64) -> f64 {
    2.0 * (mu * (1.0 / eps).ln()).sqrt()
}

/// Check that the springs are compatible with the boundary mode.
pub fn validate_geometry(springs: &SpringSet, cfg: &WfpConfig) -> Result<()> {
    if cfg.bc == BoundaryMode::Periodic {
        return Ok(());
    }
    let (lo, hi) = cfg.free_space_domain();
    let indices: Vec<usize> = springs
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x < lo || x > hi)
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        Ok(())
    } else {
        Err(WfpError::Geometry { indices, lo, hi })
    }
}

fn default_eps() -> f64 {
    1e-12
}

fn default_gamma() -> f64 {
    0.5
}

fn default_p() -> usize {
    6
}

fn default_bc() -> BoundaryMode {
    BoundaryMode::FreeSpace
}

/// User-level settings as stored in a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub dt: f64,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_bc")]
    pub bc: BoundaryMode,
}

impl SolverSettings {
    pub fn new(dt: f64) -> Self {
        SolverSettings {
            eps: default_eps(),
            gamma: default_gamma(),
            dt,
            p: default_p(),
            bc: default_bc(),
        }
    }

    pub fn derive(&self) -> Result<WfpConfig> {
        WfpConfig::derive(self.eps, self.gamma, self.dt, self.p, self.bc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| WfpError::Format(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
