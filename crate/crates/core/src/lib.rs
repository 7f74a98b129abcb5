//! Windowed Fourier projection solver for 1D wave scattering from point
//! springs, with reference solvers and a stability laboratory.

pub mod analysis;
pub mod config;
pub mod error;
pub mod field;
pub mod history;
pub mod local;
pub mod marcher;
pub mod nufft;
pub mod potential;
pub mod quadrature;
pub mod special;
pub mod stability;
pub mod window;

pub use config::{BoundaryMode, SolverSettings, WfpConfig};
pub use error::{Result, WfpError};
pub use field::SpaceTimeField;
pub use history::{HistoryEngine, HistoryState};
pub use local::{DensityHistory, LocalOperators};
pub use marcher::{simulate, DomainMap, Excitation, Marcher, OutputSpec, SimulationResult};
pub use nufft::{ModeVector, NufftPlan};
pub use potential::{DataSource, DensitySeries, GaussianDensity, IncidentPulse, SpringSet};
pub use window::Window;
