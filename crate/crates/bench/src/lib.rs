//! Fixtures shared by the benchmarks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfp_core::marcher::{dt_for_ntyp, DomainMap};
use wfp_core::{BoundaryMode, IncidentPulse, Marcher, SpringSet, WfpConfig};

pub fn points(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

pub fn strengths(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// A free-space marcher for `m` random springs in `[-2, 2]` at about
/// `ntyp` neighbours each, plus the mapped pulse that drives it.
pub struct Scene {
    pub marcher: Marcher,
    pub springs: SpringSet,
    pub pulse: IncidentPulse,
    pub dt: f64,
}

impl Scene {
    pub fn new(m: usize, ntyp: f64, p: usize) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let mut xs: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let bs = (0..xs.len()).map(|_| rng.random_range(0.1..3.0)).collect();
        let user = SpringSet::new(xs, bs).expect("valid springs");
        let dt_user = dt_for_ntyp(m, 4.0, ntyp, 1e-12, 0.5);
        let map = DomainMap::fit(2.0, dt_user, 1e-12, 0.5).expect("map");
        let cfg = WfpConfig::derive(1e-12, 0.5, map.t(dt_user), p, BoundaryMode::FreeSpace)
            .expect("config");
        let springs = map.springs(&user).expect("mapped springs");
        let pulse = map
            .pulse(&IncidentPulse::new(30.0, -3.0).expect("pulse"))
            .expect("mapped pulse");
        Scene {
            marcher: Marcher::new(&springs, &cfg).expect("marcher"),
            springs,
            pulse,
            dt: cfg.dt,
        }
    }

    /// Incident data for step `n + 1`.
    pub fn data(&self, n: usize) -> Vec<f64> {
        let t = (n + 1) as f64 * self.dt;
        self.springs
            .positions()
            .iter()
            .zip(self.springs.strengths())
            .map(|(&x, &b)| b * self.pulse.field(x, t))
            .collect()
    }
}
