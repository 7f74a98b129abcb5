//! Green's functions, closed-form potentials, manufactured data and the
//! direct reference marchers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::BoundaryMode;
use crate::field::SpaceTimeField;
use crate::quadrature::GaussRule;
use crate::special::erf;

use crate::error::{Result, WfpError};

/// Scatterer positions and spring constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringSet {
    positions: Vec<f64>,
    strengths: Vec<f64>,
}

impl SpringSet {
    pub fn new(positions: Vec<f64>, strengths: Vec<f64>) -> Result<Self> {
        if positions.len() != strengths.len() {
            return Err(WfpError::InvalidParameter(format!(
                "{} positions but {} strengths",
                positions.len(),
                strengths.len()
            )));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(WfpError::InvalidParameter(format!(
                "position {i} is not finite"
            )));
        }
        if let Some(i) = strengths.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(WfpError::InvalidParameter(format!(
                "strength {i} must be positive, got {}",
                strengths[i]
            )));
        }
        let mut sorted = positions.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(WfpError::InvalidParameter(
                "coincident spring positions".into(),
            ));
        }
        Ok(SpringSet {
            positions,
            strengths,
        })
    }

    /// Like [`SpringSet::new`] but allowing zero strengths (oracle use).
    pub fn new_allow_zero(positions: Vec<f64>, strengths: Vec<f64>) -> Result<Self> {
        let probe: Vec<f64> = strengths
            .iter()
            .map(|&b| if b == 0.0 { 1.0 } else { b })
            .collect();
        Self::new(positions.clone(), probe)?;
        Ok(SpringSet {
            positions,
            strengths,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }
}

/// Free-space Green's function `H(t - |x|) / 2` with `H(0) = 1`.
pub fn greens_free(x: f64, t: f64) -> f64 {
    if t >= x.abs() {
        0.5
    } else {
        0.0
    }
}

/// `e^{-mu (t - t0)^2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDensity {
    pub mu: f64,
    pub t0: f64,
}

impl GaussianDensity {
    pub fn new(mu: f64, t0: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && t0.is_finite()) {
            return Err(WfpError::InvalidParameter(format!(
                "gaussian density needs mu > 0, got mu={mu}, t0={t0}"
            )));
        }
        Ok(GaussianDensity { mu, t0 })
    }

    pub fn value(&self, t: f64) -> f64 {
        (-self.mu * (t - self.t0).powi(2)).exp()
    }

    /// `∫_0^s` of the density, zero for `s <= 0`.
    pub fn integral_to(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let r = self.mu.sqrt();
        0.5 * (PI / self.mu).sqrt() * (erf(r * (s - self.t0)) - erf(-r * self.t0))
    }

    /// L2(R) norm.
    pub fn l2_norm(&self) -> f64 {
        (PI / (2.0 * self.mu)).powf(0.25)
    }
}

/// Right-moving pulse `u_inc(x, t) = f(x - t)` with
/// `f(s) = e^{-mu (s - t0)^2}`; `t0` is the pulse centre at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentPulse {
    pub mu: f64,
    pub t0: f64,
}

impl IncidentPulse {
    pub fn new(mu: f64, t0: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && t0.is_finite()) {
            return Err(WfpError::InvalidParameter(format!(
                "incident pulse needs mu > 0, got mu={mu}, t0={t0}"
            )));
        }
        Ok(IncidentPulse { mu, t0 })
    }

    pub fn profile(&self, s: f64) -> f64 {
        (-self.mu * (s - self.t0).powi(2)).exp()
    }

    pub fn field(&self, x: f64, t: f64) -> f64 {
        self.profile(x - t)
    }

    /// Time at which the peak reaches `x`.
    pub fn arrival(&self, x: f64) -> f64 {
        x - self.t0
    }

    /// Whether the pulse is below `tol` at every spring at `t = 0` and is
    /// still approaching all of them.
    pub fn clear_of(&self, springs: &SpringSet, tol: f64) -> bool {
        springs
            .positions()
            .iter()
            .all(|&x| x > self.t0 && self.profile(x) <= tol)
    }
}

/// Closed-form free-space single-layer potential of Gaussian densities.
pub fn slp_gaussian_exact(
    springs: &SpringSet,
    densities: &[GaussianDensity],
    x: f64,
    t: f64,
) -> f64 {
    assert_eq!(springs.len(), densities.len(), "one density per spring");
    springs
        .positions()
        .iter()
        .zip(densities)
        .map(|(&xj, d)| 0.5 * d.integral_to(t - (x - xj).abs()))
        .sum()
}

/// Periodic version: sum over all causal images `|x - x_j - 2πm| < t`.
pub fn slp_gaussian_periodic(
    springs: &SpringSet,
    densities: &[GaussianDensity],
    x: f64,
    t: f64,
) -> f64 {
    assert_eq!(springs.len(), densities.len(), "one density per spring");
    let mut total = 0.0;
    for (&xj, d) in springs.positions().iter().zip(densities) {
        for dist in image_distances(x - xj, t) {
            total += 0.5 * d.integral_to(t - dist);
        }
    }
    total
}

/// Distances `|r - 2πm|` strictly below `reach`.
pub fn image_distances(r: f64, reach: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if reach <= 0.0 {
        return out;
    }
    let m0 = (r / (2.0 * PI)).round() as i64;
    let span = (reach / (2.0 * PI)).ceil() as i64 + 1;
    for m in m0 - span..=m0 + span {
        let d = (r - 2.0 * PI * m as f64).abs();
        if d < reach {
            out.push(d);
        }
    }
    out
}

/// `g_j(t) = -σ_j(t) - β_j u_ex(x_j, t)` (free space).
pub fn manufactured_data(springs: &SpringSet, densities: &[GaussianDensity], t: f64) -> Vec<f64> {
    ManufacturedProblem::new(springs.clone(), densities.to_vec(), BoundaryMode::FreeSpace)
        .expect("one density per spring")
        .data_at(t)
}

/// Boundary data `g_j(t)` for every spring.
pub trait DataSource {
    fn eval(&self, t: f64, out: &mut [f64]);
}

impl<F: Fn(f64, &mut [f64])> DataSource for F {
    fn eval(&self, t: f64, out: &mut [f64]) {
        self(t, out)
    }
}

/// Gaussian densities prescribed on each spring together with the data
/// that makes them the exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem {
    pub springs: SpringSet,
    pub densities: Vec<GaussianDensity>,
    pub bc: BoundaryMode,
}

impl ManufacturedProblem {
    pub fn new(
        springs: SpringSet,
        densities: Vec<GaussianDensity>,
        bc: BoundaryMode,
    ) -> Result<Self> {
        if springs.len() != densities.len() {
            return Err(WfpError::InvalidParameter(format!(
                "{} springs but {} densities",
                springs.len(),
                densities.len()
            )));
        }
        Ok(ManufacturedProblem {
            springs,
            densities,
            bc,
        })
    }

    pub fn exact_field(&self, x: f64, t: f64) -> f64 {
        match self.bc {
            BoundaryMode::FreeSpace => slp_gaussian_exact(&self.springs, &self.densities, x, t),
            BoundaryMode::Periodic => slp_gaussian_periodic(&self.springs, &self.densities, x, t),
        }
    }

    pub fn exact_density(&self, t: f64) -> Vec<f64> {
        self.densities.iter().map(|d| d.value(t)).collect()
    }

    pub fn data_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.springs.len()];
        self.eval(t, &mut out);
        out
    }

    /// Largest L2 norm among the densities.
    pub fn density_bound(&self) -> f64 {
        self.densities
            .iter()
            .map(|d| d.l2_norm())
            .fold(0.0, f64::max)
    }
}

impl DataSource for ManufacturedProblem {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let xs = self.springs.positions();
        let betas = self.springs.strengths();
        for j in 0..xs.len() {
            out[j] = -self.densities[j].value(t) - betas[j] * self.exact_field(xs[j], t);
        }
    }
}

/// Data `g_j(t) = β_j f(x_j - t)` generated by a smooth incident pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentData {
    pub springs: SpringSet,
    pub pulse: IncidentPulse,
}

impl DataSource for IncidentData {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let xs = self.springs.positions();
        let betas = self.springs.strengths();
        for j in 0..xs.len() {
            out[j] = betas[j] * self.pulse.field(xs[j], t);
        }
    }
}

/// Densities on the uniform grid `t_n = n dt`, `n = 0..=steps`, row-major
/// in time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySeries {
    pub dt: f64,
    pub springs: usize,
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DensitySeries {
    pub fn zeros(dt: f64, springs: usize, steps: usize) -> Self {
        DensitySeries {
            dt,
            springs,
            values: vec![0.0; springs * (steps + 1)],
            warnings: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.springs.max(1) - 1
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.values[n * self.springs..(n + 1) * self.springs]
    }

    pub fn at_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.springs;
        &mut self.values[n * m..(n + 1) * m]
    }

    pub fn spring(&self, j: usize) -> Vec<f64> {
        (0..=self.steps()).map(|n| self.at(n)[j]).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    /// Max over grid times and springs of `|σ - exact|`.
    pub fn max_error(&self, exact: impl Fn(f64) -> Vec<f64>) -> f64 {
        let mut err: f64 = 0.0;
        for n in 0..=self.steps() {
            let e = exact(n as f64 * self.dt);
            for (a, b) in self.at(n).iter().zip(&e) {
                err = err.max((a - b).abs());
            }
        }
        err
    }
}

/// Exact integration of the piecewise degree-`p-1` interpolant of a
/// sampled density. Interval `i` is `[t_i, t_{i+1}]`; its stencil is the
/// `p` nodes nearest the interval (start node for `p = 1`), pulled back
/// so it never reaches past the newest usable node.
#[derive(Debug, Clone)]
pub struct InterpIntegrator {
    p: usize,
    dt: f64,
    bary: Vec<f64>,
    rule: GaussRule,
}

impl InterpIntegrator {
    pub fn new(p: usize, dt: f64) -> Result<Self> {
        if !(p == 1 || (p % 2 == 0 && p <= 16)) {
            return Err(WfpError::InvalidParameter(format!(
                "interpolation order must be 1 or even in 2..=16, got {p}"
            )));
        }
        Ok(InterpIntegrator {
            p,
            dt,
            bary: crate::quadrature::equispaced_bary(p),
            rule: GaussRule::reference(p / 2 + 2),
        })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Stencil start for interval `i` when nodes up to `top` may be used.
    pub fn stencil_start(&self, i: i64, top: i64) -> i64 {
        let centered = if self.p == 1 {
            i
        } else {
            i - (self.p / 2) as i64 + 1
        };
        centered.min(top - self.p as i64 + 1)
    }

    /// Highest interval whose unclamped stencil fits below `top`.
    fn last_centered(&self, top: i64) -> i64 {
        if self.p == 1 {
            top
        } else {
            top - (self.p / 2) as i64
        }
    }

    /// Weights of `∫_{t_i}^{t_i + f dt}` against nodes `first..first+p`.
    pub fn interval_weights(&self, i: i64, frac: f64, first: i64, out: &mut [f64]) {
        out.iter_mut().for_each(|w| *w = 0.0);
        let mut basis = vec![0.0; self.p];
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let u = i as f64 + 0.5 * frac * (1.0 + x);
            crate::quadrature::lagrange_weights_at(u, first, &self.bary, &mut basis);
            let scale = 0.5 * frac * w * self.dt;
            for (o, b) in out.iter_mut().zip(&basis) {
                *o += scale * b;
            }
        }
    }

    /// Cumulative integrals `C[ν] = ∫_0^{t_ν}` over intervals whose
    /// centered stencils lie within `samples`.
    pub fn extend_cumulative(&self, samples: &[f64], cum: &mut Vec<f64>) {
        if cum.is_empty() {
            cum.push(0.0);
        }
        let known = samples.len() as i64 - 1;
        let last = self.last_centered(known);
        let mut w = vec![0.0; self.p];
        while (cum.len() as i64 - 1) <= last {
            let i = cum.len() as i64 - 1;
            let first = self.stencil_start(i, i64::MAX / 2);
            self.interval_weights(i, 1.0, first, &mut w);
            let inc = dot_samples(&w, first, samples);
            let next = cum[i as usize] + inc;
            cum.push(next);
        }
    }

    /// `∫_0^{u dt}` with nodes up to `top` allowed. Samples are known up to
    /// index `samples.len() - 1`; a node at `top` beyond that contributes to
    /// the returned coefficient instead of the known part.
    pub fn integral(&self, samples: &[f64], cum: &[f64], u: f64, top: i64) -> (f64, f64) {
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        let mut i_s = u.floor() as i64;
        let mut frac = u - i_s as f64;
        if frac < 1e-13 && i_s > 0 {
            i_s -= 1;
            frac = 1.0;
        }
        let start = i_s.min(cum.len() as i64 - 1).max(0);
        let mut known = cum[start as usize];
        let mut coef = 0.0;
        let known_top = samples.len() as i64 - 1;
        let mut w = vec![0.0; self.p];
        for i in start..=i_s {
            let f = if i == i_s { frac } else { 1.0 };
            let first = self.stencil_start(i, top);
            self.interval_weights(i, f, first, &mut w);
            for (r, &wr) in w.iter().enumerate() {
                let node = first + r as i64;
                if node < 0 {
                    continue;
                } else if node <= known_top {
                    known += wr * samples[node as usize];
                } else {
                    debug_assert_eq!(node, known_top + 1);
                    coef += wr;
                }
            }
        }
        (known, coef)
    }
}

fn dot_samples(w: &[f64], first: i64, samples: &[f64]) -> f64 {
    w.iter()
        .enumerate()
        .filter_map(|(r, wr)| {
            let node = first + r as i64;
            (node >= 0).then(|| wr * samples[node as usize])
        })
        .sum()
}

/// One source-target coupling at a fixed image distance.
#[derive(Debug, Clone, Copy)]
struct Link {
    target: usize,
    source: usize,
    dist: f64,
}

fn free_links(springs: &SpringSet, reach: f64) -> Vec<Link> {
    let xs = springs.positions();
    let mut links = Vec::new();
    for (j, &xj) in xs.iter().enumerate() {
        for (l, &xl) in xs.iter().enumerate() {
            let dist = (xj - xl).abs();
            if dist < reach {
                links.push(Link {
                    target: j,
                    source: l,
                    dist,
                });
            }
        }
    }
    links
}

fn periodic_links(springs: &SpringSet, reach: f64, image_count: usize) -> Vec<Link> {
    let xs = springs.positions();
    let mut links = Vec::new();
    for (j, &xj) in xs.iter().enumerate() {
        for (l, &xl) in xs.iter().enumerate() {
            let r = xj - xl;
            let m0 = (r / (2.0 * PI)).round() as i64;
            let mc = image_count as i64;
            for m in m0 - mc..=m0 + mc {
                let dist = (r - 2.0 * PI * m as f64).abs();
                if dist < reach {
                    links.push(Link {
                        target: j,
                        source: l,
                        dist,
                    });
                }
            }
        }
    }
    links
}

fn march(
    springs: &SpringSet,
    data: &dyn DataSource,
    links: &[Link],
    p: usize,
    dt: f64,
    t_final: f64,
) -> Result<DensitySeries> {
    if !(dt > 0.0 && dt.is_finite() && t_final >= 0.0) {
        return Err(WfpError::InvalidParameter(format!(
            "need dt > 0 and T >= 0, got dt={dt}, T={t_final}"
        )));
    }
    let integ = InterpIntegrator::new(p, dt)?;
    let m = springs.len();
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let betas = springs.strengths();
    let mut series = DensitySeries::zeros(dt, m, steps);
    let mut hist: Vec<Vec<f64>> = vec![vec![0.0]; m];
    let mut cum: Vec<Vec<f64>> = vec![vec![0.0]; m];
    let lags: Vec<f64> = links.iter().map(|lk| lk.dist / dt).collect();
    let mut g = vec![0.0; m];
    for n in 0..steps {
        let t = (n + 1) as f64 * dt;
        data.eval(t, &mut g);
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
        for (lk, &lag) in links.iter().zip(&lags) {
            let u = (n + 1) as f64 - lag;
            if u <= 0.0 {
                continue;
            }
            let top = if lk.dist < dt { n as i64 + 1 } else { n as i64 };
            let (known, coef) = integ.integral(&hist[lk.source], &cum[lk.source], u, top);
            let half = 0.5 * betas[lk.target];
            rhs[lk.target] -= half * known;
            a[(lk.target, lk.source)] += half * coef;
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| WfpError::Singular(format!("reference system at step {}", n + 1)))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(WfpError::NonFinite { step: n + 1 });
        }
        for l in 0..m {
            hist[l].push(sol[l]);
            integ.extend_cumulative(&hist[l], &mut cum[l]);
        }
        series.at_mut(n + 1).copy_from_slice(sol.as_slice());
    }
    Ok(series)
}

/// Direct march of the free-space Volterra system, `O(M^2 N_t)`.
pub fn reference_march_free(
    springs: &SpringSet,
    data: &dyn DataSource,
    p: usize,
    dt: f64,
    t_final: f64,
) -> Result<DensitySeries> {
    let links = free_links(springs, t_final + dt);
    march(springs, data, &links, p, dt, t_final)
}

/// Smallest image count that reaches every causal image before `t_final`.
pub fn required_images(t_final: f64) -> usize {
    (t_final / (2.0 * PI)).ceil() as usize + 1
}

/// Direct march of the periodic system, images `|m - m_0| <= image_count`.
pub fn reference_march_periodic(
    springs: &SpringSet,
    data: &dyn DataSource,
    p: usize,
    dt: f64,
    t_final: f64,
    image_count: usize,
) -> Result<DensitySeries> {
    let links = periodic_links(springs, t_final + dt, image_count);
    let mut series = march(springs, data, &links, p, dt, t_final)?;
    let need = required_images(t_final);
    if image_count < need {
        series.warnings.push(format!(
            "image count {image_count} is below the {need} needed to reach T = {t_final}"
        ));
    }
    Ok(series)
}

/// Single-layer potential of a sampled density series at arbitrary
/// space-time targets, using the same interpolant as the reference march.
pub fn eval_scattered_field(
    series: &DensitySeries,
    springs: &SpringSet,
    xs: &[f64],
    ts: &[f64],
    bc: BoundaryMode,
    p: usize,
) -> Result<SpaceTimeField> {
    if series.springs != springs.len() {
        return Err(WfpError::GridMismatch(format!(
            "{} density columns for {} springs",
            series.springs,
            springs.len()
        )));
    }
    let integ = InterpIntegrator::new(p, series.dt)?;
    let top = series.steps() as i64;
    let t_end = series.final_time();
    if let Some(t) = ts.iter().find(|&&t| t > t_end * (1.0 + 1e-12)) {
        return Err(WfpError::GridMismatch(format!(
            "target time {t} beyond densities ending at {t_end}"
        )));
    }
    let samples: Vec<Vec<f64>> = (0..springs.len()).map(|j| series.spring(j)).collect();
    let cums: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut c = vec![0.0];
            integ.extend_cumulative(s, &mut c);
            c
        })
        .collect();
    let mut field = SpaceTimeField::zeros(xs.to_vec(), ts.to_vec());
    for (it, &t) in ts.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let mut total = 0.0;
            for (j, &xj) in springs.positions().iter().enumerate() {
                let dists = match bc {
                    BoundaryMode::FreeSpace => {
                        let d = (x - xj).abs();
                        if d < t {
                            vec![d]
                        } else {
                            vec![]
                        }
                    }
                    BoundaryMode::Periodic => image_distances(x - xj, t),
                };
                for d in dists {
                    let (v, _) = integ.integral(&samples[j], &cums[j], (t - d) / series.dt, top);
                    total += 0.5 * v;
                }
            }
            field.set(it, ix, total);
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite;

    fn springs2() -> SpringSet {
        SpringSet::new(vec![-0.4, 0.3], vec![1.5, 0.7]).unwrap()
    }

    fn dens2() -> Vec<GaussianDensity> {
        vec![
            GaussianDensity::new(40.0, 2.0).unwrap(),
            GaussianDensity::new(45.0, 1.5).unwrap(),
        ]
    }

    #[test]
    fn green_values() {
        assert_eq!(greens_free(0.0, 1.0), 0.5);
        assert_eq!(greens_free(2.0, 1.0), 0.0);
        assert_eq!(greens_free(1.0, 1.0), 0.5);
        assert_eq!(greens_free(-1.0, 1.0), 0.5);
    }

    #[test]
    fn spring_set_validation() {
        assert!(SpringSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SpringSet::new(vec![0.0], vec![0.0]).is_err());
        assert!(SpringSet::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(SpringSet::new_allow_zero(vec![0.0], vec![0.0]).is_ok());
        assert!(GaussianDensity::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_integral_matches_quadrature() {
        let d = GaussianDensity::new(40.0, 2.0).unwrap();
        for s in [0.5, 1.9, 2.0, 2.3, 10.0] {
            let q = composite(|t| d.value(t), 0.0, s, 200, 10);
            assert!((d.integral_to(s) - q).abs() < 1e-14, "{s}");
        }
        assert_eq!(d.integral_to(-1.0), 0.0);
        let springs = SpringSet::new(vec![0.0], vec![1.0]).unwrap();
        let v = slp_gaussian_exact(&springs, &[d], 0.0, 10.0);
        assert!((v - 0.5 * (PI / 40.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn slp_causality() {
        let s = springs2();
        let d = dens2();
        assert_eq!(slp_gaussian_exact(&s, &d, 0.0, 0.0), 0.0);
        // Between arrivals from x=0.3 (0.2) and x=-0.4 (0.9).
        let x = 0.5;
        let t = 0.6;
        let only_near = 0.5 * d[1].integral_to(t - 0.2);
        assert_eq!(slp_gaussian_exact(&s, &d, x, t), only_near);
    }

    #[test]
    fn periodic_slp_adds_images() {
        let s = SpringSet::new(vec![0.0], vec![1.0]).unwrap();
        let d = [GaussianDensity::new(40.0, 1.0).unwrap()];
        let t = 2.0 * PI + 1.5;
        let direct: f64 = [0.0, 2.0 * PI, 2.0 * PI]
            .iter()
            .map(|&r| 0.5 * d[0].integral_to(t - r))
            .sum();
        assert!((slp_gaussian_periodic(&s, &d, 0.0, t) - direct).abs() < 1e-15);
        assert_eq!(image_distances(0.0, 2.0 * PI).len(), 1);
    }

    #[test]
    fn manufactured_data_limits() {
        let s = springs2();
        let d = dens2();
        for g in manufactured_data(&s, &d, 0.1) {
            assert!(g.abs() < 1e-10);
        }
        let s0 = SpringSet::new_allow_zero(vec![0.0], vec![0.0]).unwrap();
        let d0 = [GaussianDensity::new(40.0, 2.0).unwrap()];
        let g = manufactured_data(&s0, &d0, 1.8);
        assert_eq!(g[0], -d0[0].value(1.8));
    }

    #[test]
    fn pulse_convention() {
        let pulse = IncidentPulse::new(5.0, -3.0).unwrap();
        assert_eq!(pulse.field(-3.0, 0.0), 1.0);
        assert_eq!(pulse.field(0.5, pulse.arrival(0.5)), 1.0);
        let s = SpringSet::new(vec![0.0, 1.0], vec![100.0, 100.0]).unwrap();
        assert!(pulse.clear_of(&s, 1e-16));
        assert!(!IncidentPulse::new(5.0, 0.5).unwrap().clear_of(&s, 1e-16));
        let data = IncidentData { springs: s, pulse };
        let mut g = [0.0; 2];
        data.eval(4.0, &mut g);
        assert!((g[1] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn integrator_is_exact_on_polynomials() {
        let dt = 0.1;
        for p in [1usize, 2, 4, 6, 8] {
            let integ = InterpIntegrator::new(p, dt).unwrap();
            let deg = p as i32 - 1;
            let f = |t: f64| (t - 0.3).powi(deg) + 0.5;
            let samples: Vec<f64> = (0..40).map(|n| f(n as f64 * dt)).collect();
            let mut cum = vec![0.0];
            integ.extend_cumulative(&samples, &mut cum);
            let top = 39;
            let a = 1.0;
            let u0 = 5.37;
            let u1 = 37.81;
            let (i1, c1) = integ.integral(&samples, &cum, u1, top);
            let (i0, _) = integ.integral(&samples, &cum, u0, top);
            assert_eq!(c1, 0.0);
            let exact = {
                let big = |t: f64| (t - 0.3).powi(deg + 1) / (deg + 1) as f64 + 0.5 * t;
                big(u1 * dt) - big(u0 * dt)
            };
            assert!(
                ((i1 - i0) - exact).abs() < 1e-11 * a,
                "p={p}: {} vs {exact}",
                i1 - i0
            );
        }
        assert!(InterpIntegrator::new(3, 0.1).is_err());
    }

    #[test]
    fn zero_data_gives_zero_density() {
        let s = springs2();
        let zero = |_t: f64, out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let r = reference_march_free(&s, &zero, 4, 0.05, 2.0).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        let r = reference_march_periodic(&s, &zero, 2, 0.05, 2.0, 2).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn single_spring_first_order_recurrence() {
        let beta = 1.7;
        let dt = 0.02;
        let s = SpringSet::new(vec![0.0], vec![beta]).unwrap();
        let d = [GaussianDensity::new(40.0, 1.0).unwrap()];
        let prob =
            ManufacturedProblem::new(s.clone(), d.to_vec(), BoundaryMode::FreeSpace).unwrap();
        let r = reference_march_free(&s, &prob, 1, dt, 2.0).unwrap();
        let alpha = beta * dt / 2.0;
        let sig = r.spring(0);
        for n in 1..sig.len() - 1 {
            let dg = prob.data_at((n + 1) as f64 * dt)[0] - prob.data_at(n as f64 * dt)[0];
            let lhs = sig[n + 1] + (alpha - 1.0) * sig[n];
            assert!((lhs + dg).abs() < 1e-13, "n={n}: {lhs} vs {}", -dg);
        }
    }

    fn order_sweep(p: usize, bc: BoundaryMode) -> Vec<f64> {
        let s = springs2();
        let prob = ManufacturedProblem::new(s.clone(), dens2(), bc).unwrap();
        [0.04, 0.02, 0.01]
            .iter()
            .map(|&dt| {
                let r = match bc {
                    BoundaryMode::FreeSpace => reference_march_free(&s, &prob, p, dt, 4.0),
                    BoundaryMode::Periodic => reference_march_periodic(&s, &prob, p, dt, 4.0, 2),
                }
                .unwrap();
                r.max_error(|t| prob.exact_density(t))
            })
            .collect()
    }

    #[test]
    fn full_history_interpolation_converges_at_order_p() {
        let e = order_sweep(2, BoundaryMode::FreeSpace);
        for w in e.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.3, "{e:?}");
        }
        let e = order_sweep(4, BoundaryMode::Periodic);
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() > 3.7, "{e:?}");
        }
    }

    #[test]
    fn high_order_reference_is_accurate() {
        let e = order_sweep(6, BoundaryMode::Periodic);
        assert!(e[2] < 1e-6, "{e:?}");
        assert!(e[1] / e[2] > 20.0, "{e:?}");
    }

    #[test]
    fn periodic_matches_free_before_images_arrive() {
        let s = springs2();
        let prob = ManufacturedProblem::new(s.clone(), dens2(), BoundaryMode::FreeSpace).unwrap();
        let t = 2.0 * PI - 0.8;
        let a = reference_march_free(&s, &prob, 4, 0.02, t).unwrap();
        let b = reference_march_periodic(&s, &prob, 4, 0.02, t, 2).unwrap();
        assert_eq!(a.values, b.values);
        let c = reference_march_periodic(&s, &prob, 4, 0.02, 3.0 * PI, 0).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn mirror_symmetric_pair_has_equal_densities() {
        let s = SpringSet::new(vec![-0.7, 0.7], vec![2.0, 2.0]).unwrap();
        let pulse = |t: f64, out: &mut [f64]| {
            let v = (-30.0 * (t - 1.5).powi(2)).exp();
            out.iter_mut().for_each(|o| *o = v);
        };
        let r = reference_march_periodic(&s, &pulse, 4, 0.01, 12.0, 3).unwrap();
        for n in 0..=r.steps() {
            let row = r.at(n);
            assert!((row[0] - row[1]).abs() <= 1e-14 * (1.0 + row[0].abs()));
        }
    }

    #[test]
    fn field_of_gaussian_matches_closed_form() {
        let s = springs2();
        let d = dens2();
        let dt = 0.01;
        let steps = 400;
        let mut series = DensitySeries::zeros(dt, 2, steps);
        for n in 0..=steps {
            for j in 0..2 {
                series.at_mut(n)[j] = d[j].value(n as f64 * dt);
            }
        }
        let xs = crate::field::linspace(-1.5, 1.5, 13);
        let ts = crate::field::linspace(0.0, 4.0, 9);
        let f = eval_scattered_field(&series, &s, &xs, &ts, BoundaryMode::FreeSpace, 8).unwrap();
        let mut err: f64 = 0.0;
        for (it, &t) in ts.iter().enumerate() {
            for (ix, &x) in xs.iter().enumerate() {
                err = err.max((f.get(it, ix) - slp_gaussian_exact(&s, &d, x, t)).abs());
                if t < (x - s.positions()[0])
                    .abs()
                    .min((x - s.positions()[1]).abs())
                {
                    assert_eq!(f.get(it, ix), 0.0);
                }
            }
        }
        assert!(err < 1e-9, "{err}");
        let fp = eval_scattered_field(&series, &s, &xs, &[4.0], BoundaryMode::Periodic, 8).unwrap();
        assert_eq!(fp.row(0), f.row(8));
        assert!(
            eval_scattered_field(&series, &s, &xs, &[5.0], BoundaryMode::FreeSpace, 8).is_err()
        );
    }

    #[test]
    fn jump_relation_and_continuity() {
        // Solve a genuine scattering problem, then probe the field near x_1.
        let s = springs2();
        let pulse = IncidentPulse::new(30.0, -1.5).unwrap();
        let data = IncidentData {
            springs: s.clone(),
            pulse,
        };
        let dt = 0.005;
        let r = reference_march_free(&s, &data, 6, dt, 3.0).unwrap();
        let h = 1e-4;
        let x1 = s.positions()[1];
        let xs = [x1 - 2.0 * h, x1 - h, x1, x1 + h, x1 + 2.0 * h];
        let ts: Vec<f64> = (1..=5).map(|k| 0.4 * k as f64 + 0.3).collect();
        let f = eval_scattered_field(&r, &s, &xs, &ts, BoundaryMode::FreeSpace, 6).unwrap();
        let peak = r.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (it, &t) in ts.iter().enumerate() {
            let row = f.row(it);
            // One-sided second-order differences on each side.
            let right = (-3.0 * row[2] + 4.0 * row[3] - row[4]) / (2.0 * h);
            let left = (3.0 * row[2] - 4.0 * row[1] + row[0]) / (2.0 * h);
            let n = (t / dt).round() as usize;
            let sigma = r.at(n)[1];
            assert!(
                ((right - left) + sigma).abs() < 1e-3 * peak,
                "t={t}: {} vs {sigma}",
                right - left
            );
            // Linear extrapolation from either side lands on the value.
            let from_right = (2.0 * row[3] - row[4] - row[2]).abs();
            let from_left = (2.0 * row[1] - row[0] - row[2]).abs();
            assert!(from_right.max(from_left) < 1e-6 * peak, "t={t}");
        }
    }
}
