//! Discrete Volterra schemes for one and two springs at interpolation
//! orders 1 and 2, their characteristic roots, and numerical checks of the
//! stability and convergence statements for them.
//!
//! Data and densities are indexed from step 1: `g[i]` is `g^{i+1}` and the
//! densities vanish at `t = 0`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::loglog_slope;
use crate::config::BoundaryMode;
use crate::error::{Result, WfpError};
use crate::potential::{GaussianDensity, ManufacturedProblem, SpringSet};

/// Which two-spring discretization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Piecewise-constant interpolant, any separation.
    Constant,
    /// Linear interpolant, springs closer than one step (`κ < 1`).
    LinearNear,
    /// Linear interpolant, springs at least one step apart (`κ ≥ 1`).
    LinearFar,
}

impl Regime {
    pub fn for_order(p: usize, kappa: f64) -> Result<Self> {
        match p {
            1 => Ok(Regime::Constant),
            2 if kappa < 1.0 => Ok(Regime::LinearNear),
            2 => Ok(Regime::LinearFar),
            _ => Err(WfpError::InvalidParameter(format!(
                "stability schemes exist for p = 1, 2, not {p}"
            ))),
        }
    }
}

/// Scaled parameters of a two-spring scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// `β Δt / 2`
    pub alpha: f64,
    /// `L / Δt`
    pub kappa: f64,
    /// `⌊κ⌋`
    pub s: usize,
    /// `(s + 1 - κ) α`
    pub alpha_tilde: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub regime: Regime,
}

impl SchemeParams {
    pub fn new(p: usize, alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && kappa >= 0.0 && kappa.is_finite()) {
            return Err(WfpError::InvalidParameter(format!(
                "scheme needs alpha > 0 and kappa >= 0, got {alpha}, {kappa}"
            )));
        }
        let regime = Regime::for_order(p, kappa)?;
        let s = kappa.floor() as usize;
        let r = s as f64 + 1.0 - kappa;
        let (xi1, xi2) = match regime {
            Regime::LinearNear => (
                alpha * (2.0 - kappa * kappa) / 2.0,
                alpha * (1.0 - kappa).powi(2) / 2.0,
            ),
            _ => (alpha / 2.0 * (r * (2.0 - r) + 1.0), alpha / 2.0 * r * r),
        };
        Ok(SchemeParams {
            alpha,
            kappa,
            s,
            alpha_tilde: r * alpha,
            xi1,
            xi2,
            regime,
        })
    }

    /// From physical spring constant, separation and step.
    pub fn physical(p: usize, beta: f64, separation: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(WfpError::InvalidParameter(format!("bad step {dt}")));
        }
        Self::new(p, beta * dt / 2.0, separation / dt)
    }
}

/// One spring: `σ^{n+1} + α Σ_{ν≤n} σ^ν = -g^{n+1}` (p = 1) or
/// `(1 + α/2) σ^{n+1} + α Σ_{ν≤n} σ^ν = -g^{n+1}` (p = 2).
pub fn march_m1(p: usize, alpha: f64, g: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(WfpError::InvalidParameter(format!("alpha {alpha} must be positive")));
    }
    let diag = match p {
        1 => 1.0,
        2 => 1.0 + alpha / 2.0,
        _ => {
            return Err(WfpError::InvalidParameter(format!(
                "one-spring schemes exist for p = 1, 2, not {p}"
            )))
        }
    };
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(g.len());
    for &gn in g {
        let s = (-gn - alpha * sum) / diag;
        out.push(s);
        sum += s;
    }
    Ok(out)
}

/// Value at step `n` (1-based) of a sequence stored from step 1; zero for
/// `n ≤ 0`.
fn at(seq: &[f64], n: i64) -> f64 {
    if n >= 1 {
        seq[(n - 1) as usize]
    } else {
        0.0
    }
}

/// Running sums `Σ_{1≤ν≤n} σ^ν`, with `sums[n]` for `n = 0..`.
fn prefix(sums: &[f64], n: i64) -> f64 {
    if n >= 1 {
        sums[n as usize]
    } else {
        0.0
    }
}

/// Two springs, each equation the label swap of the other.
pub fn march_m2(
    p: usize,
    params: &SchemeParams,
    g1: &[f64],
    g2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if g1.len() != g2.len() {
        return Err(WfpError::InvalidParameter(format!(
            "data lengths {} and {} differ",
            g1.len(),
            g2.len()
        )));
    }
    let expected = Regime::for_order(p, params.kappa)?;
    if expected != params.regime {
        return Err(WfpError::InvalidParameter(format!(
            "regime {:?} does not match p = {p}, kappa = {}",
            params.regime, params.kappa
        )));
    }
    let SchemeParams {
        alpha: a,
        alpha_tilde: at_,
        xi1,
        xi2,
        ..
    } = *params;
    let s = params.s as i64;
    let nt = g1.len();
    let (mut s1, mut s2) = (Vec::with_capacity(nt), Vec::with_capacity(nt));
    let (mut c1, mut c2) = (vec![0.0], vec![0.0]);
    for i in 0..nt {
        let n = i as i64; // solving for step n + 1
        let (x1, x2) = match params.regime {
            Regime::Constant => {
                let cross = |other: &[f64], sums: &[f64]| {
                    at_ * at(other, n - s) + a * prefix(sums, n - s - 1)
                };
                (
                    -g1[i] - a * prefix(&c1, n) - cross(&s2, &c2),
                    -g2[i] - a * prefix(&c2, n) - cross(&s1, &c1),
                )
            }
            Regime::LinearNear => {
                let d = 1.0 + a / 2.0;
                let r1 = -g1[i] - a * prefix(&c1, n) - a * prefix(&c2, n - 1) - xi1 * at(&s2, n);
                let r2 = -g2[i] - a * prefix(&c2, n) - a * prefix(&c1, n - 1) - xi1 * at(&s1, n);
                let det = d * d - xi2 * xi2;
                if det.abs() < 1e-300 {
                    return Err(WfpError::Singular("two-spring block".into()));
                }
                ((d * r1 - xi2 * r2) / det, (d * r2 - xi2 * r1) / det)
            }
            Regime::LinearFar => {
                let d = 1.0 + a / 2.0;
                let cross = |other: &[f64], sums: &[f64]| {
                    a * prefix(sums, n - s - 1) + xi1 * at(other, n - s) + xi2 * at(other, n + 1 - s)
                };
                (
                    (-g1[i] - a * prefix(&c1, n) - cross(&s2, &c2)) / d,
                    (-g2[i] - a * prefix(&c2, n) - cross(&s1, &c1)) / d,
                )
            }
        };
        s1.push(x1);
        s2.push(x2);
        c1.push(c1[i] + x1);
        c2.push(c2[i] + x2);
    }
    Ok((s1, s2))
}

/// Roots of `p_±(z) = z^{s+2} + (α-1) z^{s+1} ± (α̃ z + α - α̃)`.
#[derive(Debug, Clone)]
pub struct CharRoots {
    pub alpha: f64,
    pub kappa: f64,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    /// `p_-(1)` in exact rational arithmetic.
    pub minus_at_one_exact_zero: bool,
    /// Zeros of `p_+` and of `p_-/(z-1)` inside `|z| < radius` by winding
    /// number, and that radius.
    pub winding_plus: usize,
    pub winding_deflated: usize,
    pub winding_radius: f64,
}

impl CharRoots {
    /// Distance of the root nearest `z = 1` among the roots of `p_-`.
    pub fn unit_root_error(&self) -> f64 {
        self.minus
            .iter()
            .map(|z| (z - 1.0).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest modulus over all roots except the one nearest 1 in `p_-`.
    pub fn max_other_modulus(&self) -> f64 {
        let skip = self
            .minus
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
            .map(|(i, _)| i);
        self.plus
            .iter()
            .map(|z| z.norm())
            .chain(
                self.minus
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != skip)
                    .map(|(_, z)| z.norm()),
            )
            .fold(0.0, f64::max)
    }

    /// Total number of roots, `2s + 4`.
    pub fn count(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    /// Root condition: simple root at 1 and every other root inside `|z| < radius`,
    /// confirmed by eigenvalues and by the winding counts.
    pub fn stable_within(&self, radius: f64) -> bool {
        let s = self.plus.len() - 2;
        self.minus_at_one_exact_zero
            && self.unit_root_error() < 1e-8
            && self.max_other_modulus() < radius
            && self.winding_radius <= radius
            && self.winding_plus == s + 2
            && self.winding_deflated == s + 1
    }
}

/// Monic polynomial roots by companion-matrix eigenvalues; `c` holds the
/// coefficients of `z^0..z^{d-1}`.
fn monic_roots(c: &[f64]) -> Vec<Complex64> {
    let d = c.len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for (i, &ci) in c.iter().enumerate() {
        m[(i, d - 1)] = -ci;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
}

/// Zeros inside `|z| < r` of the polynomial with coefficients `c`
/// (ascending, leading included) from the change in argument around the circle.
fn winding_count(c: &[f64], r: f64, samples: usize) -> usize {
    let mut total = 0.0;
    let mut prev = poly_eval(c, Complex64::new(r, 0.0)).arg();
    for i in 1..=samples {
        let th = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let a = poly_eval(c, Complex64::from_polar(r, th)).arg();
        let mut d = a - prev;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
        prev = a;
    }
    (total / (2.0 * std::f64::consts::PI)).round().max(0.0) as usize
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Characteristic roots of the explicit two-spring scheme.
pub fn char_roots_m2_p1(alpha: f64, kappa: f64) -> Result<CharRoots> {
    char_roots_m2_p1_at(alpha, kappa, 1.0 - 1e-8)
}

/// As [`char_roots_m2_p1`], counting zeros inside `|z| < radius`.
pub fn char_roots_m2_p1_at(alpha: f64, kappa: f64, radius: f64) -> Result<CharRoots> {
    let params = SchemeParams::new(1, alpha, kappa)?;
    let s = params.s;
    let at_ = params.alpha_tilde;
    // z^0 .. z^{s+1}; z^{s+2} is the leading 1
    let mut base = vec![0.0; s + 2];
    base[s + 1] = alpha - 1.0;
    let mut plus = base.clone();
    plus[0] += alpha - at_;
    plus[1] += at_;
    let mut minus = base;
    minus[0] -= alpha - at_;
    minus[1] -= at_;

    // p_-(1) exactly: coefficients rebuilt from the exact binary values of α, κ.
    let (ae, ke) = (exact(alpha), exact(kappa));
    let one = BigRational::from_integer(BigInt::from(1));
    let ate = (BigRational::from_integer(BigInt::from(s as i64 + 1)) - ke) * ae.clone();
    let at_one = one.clone() + (ae.clone() - one) - (ate.clone() + ae - ate);
    let zero_exact = at_one == BigRational::from_integer(BigInt::from(0));

    // p_-(z)/(z-1) = z^{s+1} + α z^s + ... + α z + (α - α̃)
    let mut deflated = vec![alpha; s + 2];
    deflated[0] = alpha - at_;
    deflated[s + 1] = 1.0;
    let mut plus_full = plus.clone();
    plus_full.push(1.0);
    let samples = 4096 * (s + 2);

    Ok(CharRoots {
        alpha,
        kappa,
        plus: monic_roots(&plus),
        minus: monic_roots(&minus),
        minus_at_one_exact_zero: zero_exact,
        winding_plus: winding_count(&plus_full, radius, samples),
        winding_deflated: winding_count(&deflated, radius, samples),
        winding_radius: radius,
    })
}

/// Whether an impulse response has decayed: the last tenth stays below
/// `1e-3` of the first tenth.
pub fn decays(seq: &[f64]) -> bool {
    let n = seq.len();
    let w = (n / 10).max(1);
    let head = seq[..w].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tail = seq[n - w..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    seq.iter().all(|v| v.is_finite()) && tail < 1e-3 * head
}

/// Impulse response `g = (1, 0, 0, ...)` of the one-spring scheme.
pub fn impulse_m1(p: usize, alpha: f64, steps: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; steps];
    g[0] = 1.0;
    march_m1(p, alpha, &g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub separation: f64,
    pub beta: f64,
    pub dt: f64,
    pub bound: f64,
    pub max_ratio: f64,
    pub trials: usize,
    pub holds: bool,
}

/// Runs the near-spring implicit scheme on random data over 500 steps and
/// compares `‖σ‖₂ / ‖g‖₂` with `1 / (1 - Lβ/2)`.
pub fn verify_stability_bound(
    separation: f64,
    beta: f64,
    dt: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundCheck> {
    if !(separation * beta < 2.0 && dt > separation && separation > 0.0) {
        return Err(WfpError::InvalidParameter(format!(
            "bound needs 0 < L < 2/beta and dt > L, got L={separation}, beta={beta}, dt={dt}"
        )));
    }
    const STEPS: usize = 500;
    let params = SchemeParams::physical(2, beta, separation, dt)?;
    let bound = 1.0 / (1.0 - separation * beta / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let g1: Vec<f64> = (0..STEPS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g2: Vec<f64> = (0..STEPS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (s1, s2) = march_m2(2, &params, &g1, &g2)?;
        let norm = |a: &[f64], b: &[f64]| a.iter().chain(b).map(|v| v * v).sum::<f64>().sqrt();
        max_ratio = max_ratio.max(norm(&s1, &s2) / norm(&g1, &g2));
    }
    Ok(BoundCheck {
        separation,
        beta,
        dt,
        bound,
        max_ratio,
        trials,
        holds: max_ratio <= bound,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub p: usize,
    pub dts: Vec<f64>,
    /// `max_n ‖e^n‖₁` per step size.
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Two-spring manufactured test: Gaussian densities `e^{-μ(t-t0)^2}` at
/// `x = 0` and `x = L`, data from the closed-form potential.
#[derive(Debug, Clone)]
pub struct TwoSpringProblem {
    problem: ManufacturedProblem,
    beta: f64,
    separation: f64,
}

impl TwoSpringProblem {
    pub fn new(beta: f64, separation: f64, densities: [GaussianDensity; 2]) -> Result<Self> {
        let springs = SpringSet::new(vec![0.0, separation], vec![beta, beta])?;
        Ok(TwoSpringProblem {
            problem: ManufacturedProblem::new(springs, densities.to_vec(), BoundaryMode::FreeSpace)?,
            beta,
            separation,
        })
    }

    /// `max_n ‖σ(t_n) - σ^n‖₁` for one step size.
    pub fn error(&self, p: usize, dt: f64, t_final: f64) -> Result<f64> {
        let steps = (t_final / dt).round() as usize;
        let (mut g1, mut g2) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
        for n in 1..=steps {
            let g = self.problem.data_at(n as f64 * dt);
            g1.push(g[0]);
            g2.push(g[1]);
        }
        let params = SchemeParams::physical(p, self.beta, self.separation, dt)?;
        let (s1, s2) = march_m2(p, &params, &g1, &g2)?;
        let mut worst: f64 = 0.0;
        for n in 1..=steps {
            let ex = self.problem.exact_density(n as f64 * dt);
            worst = worst.max((ex[0] - s1[n - 1]).abs() + (ex[1] - s2[n - 1]).abs());
        }
        Ok(worst)
    }
}

/// Observed order of the two-spring scheme over a step sweep; every step
/// must satisfy `dt < min(2/β, L)`.
pub fn measure_convergence_m2(
    p: usize,
    beta: f64,
    separation: f64,
    t_final: f64,
    dts: &[f64],
    densities: [GaussianDensity; 2],
) -> Result<ConvergenceReport> {
    if let Some(dt) = dts.iter().find(|&&d| !(d > 0.0 && d < (2.0 / beta).min(separation))) {
        return Err(WfpError::InvalidParameter(format!(
            "step {dt} is not below min(2/beta, L) = {}",
            (2.0 / beta).min(separation)
        )));
    }
    let prob = TwoSpringProblem::new(beta, separation, densities)?;
    let errors = dts
        .iter()
        .map(|&dt| prob.error(p, dt, t_final))
        .collect::<Result<Vec<f64>>>()?;
    let order = if errors.iter().all(|&e| e == 0.0) {
        f64::NAN
    } else {
        loglog_slope(dts, &errors)?
    };
    Ok(ConvergenceReport {
        p,
        dts: dts.to_vec(),
        errors,
        order,
    })
}

/// Outcome of marching zero data after a burst of random data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Boundedness {
    pub kappa: f64,
    /// Max `|σ|` while data are on, and after they stop.
    pub data_max: f64,
    pub after_max: f64,
    /// Mean of the final densities: the amplitude left in the neutral `z = 1` mode.
    pub neutral_amplitude: f64,
}

impl Boundedness {
    pub fn bounded(&self) -> bool {
        self.after_max <= 2.0 * self.data_max
    }
}

/// Explicit two-spring scheme with random data for `data_steps` steps and
/// zero data for the remaining `steps - data_steps`.
pub fn bounded_after_data(
    alpha: f64,
    kappa: f64,
    data_steps: usize,
    steps: usize,
    seed: u64,
) -> Result<Boundedness> {
    let params = SchemeParams::new(1, alpha, kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = |n: usize| {
        if n < data_steps {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    };
    let (mut g1, mut g2) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    for n in 0..steps {
        g1.push(gen(n));
        g2.push(gen(n));
    }
    let (s1, s2) = march_m2(1, &params, &g1, &g2)?;
    let peak = |r: std::ops::Range<usize>| {
        s1[r.clone()]
            .iter()
            .chain(&s2[r])
            .fold(0.0f64, |a, v| a.max(v.abs()))
    };
    Ok(Boundedness {
        kappa,
        data_max: peak(0..data_steps),
        after_max: peak(data_steps..steps),
        neutral_amplitude: 0.5 * (s1[steps - 1] + s2[steps - 1]),
    })
}
