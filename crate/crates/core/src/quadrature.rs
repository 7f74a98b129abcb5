//! Gauss-Legendre rules, barycentric Lagrange weights on equispaced nodes,
//! and the local quadrature weights `Q_m`.

use std::f64::consts::PI;

use crate::config::WfpConfig;
use crate::error::{Result, WfpError};
use crate::window::Window;

/// Gauss-Legendre nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// The `n`-node rule on `[-1, 1]`.
    pub fn reference(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Affine image of this rule (assumed on `[-1,1]`) on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-node Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(WfpError::InvalidParameter("rule needs n >= 1".into()));
    }
    if !(a < b) {
        return Err(WfpError::InvalidParameter(format!(
            "empty interval [{a}, {b}]"
        )));
    }
    Ok(GaussRule::reference(n).mapped(a, b))
}

/// Composite Gauss-Legendre integral with `panels` equal panels.
pub fn composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let rule = GaussRule::reference(n);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            rule.mapped(lo, lo + h).integrate(&f)
        })
        .sum()
}

/// Barycentric weights for `p` equispaced unit-spaced nodes:
/// `(-1)^i C(p-1, i)`.
pub fn equispaced_bary(p: usize) -> Vec<f64> {
    let mut w = vec![0.0; p];
    let mut c = 1.0;
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i % 2 == 0 { c } else { -c };
        c = c * (p - 1 - i) as f64 / (i + 1) as f64;
    }
    w
}

/// Lagrange weights at `x` for nodes `start, start+1, ..., start+p-1`,
/// written into `out` (length `p`). Exact hits return a unit vector.
pub fn lagrange_weights_at(x: f64, start: i64, bary: &[f64], out: &mut [f64]) {
    let p = bary.len();
    for i in 0..p {
        if x == (start + i as i64) as f64 {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[i] = 1.0;
            return;
        }
    }
    let mut den = 0.0;
    for i in 0..p {
        let t = bary[i] / (x - (start + i as i64) as f64);
        out[i] = t;
        den += t;
    }
    for v in out.iter_mut() {
        *v /= den;
    }
}

/// First node of the `p` nearest nodes to `u` (index coordinates), ties
/// going to the larger index, clamped to `[lo, hi - p + 1]`. For `p = 1`
/// the node at the start of the enclosing step is used instead.
pub fn nearest_stencil_start(u: f64, p: usize, lo: i64, hi: i64) -> i64 {
    let s = if p == 1 {
        u.floor() as i64
    } else if p % 2 == 0 {
        u.floor() as i64 - (p / 2) as i64 + 1
    } else {
        (u + 0.5).floor() as i64 - (p / 2) as i64
    };
    s.clamp(lo, hi - p as i64 + 1)
}

/// Uniform grid `start + i*step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

/// Interpolation stencil: first grid index and the `p` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub first: usize,
    pub weights: Vec<f64>,
}

/// Lagrange weights interpolating at `xi` from the `p` nearest points of
/// `grid`.
pub fn interp_weights(xi: f64, grid: &UniformGrid, p: usize) -> Result<Stencil> {
    if p == 0 || p > grid.len {
        return Err(WfpError::InvalidParameter(format!(
            "need 1 <= p <= {} grid points, got p = {p}",
            grid.len
        )));
    }
    let u = (xi - grid.start) / grid.step;
    if !(u >= -0.5 && u <= grid.len as f64 - 0.5) {
        return Err(WfpError::InvalidParameter(format!(
            "evaluation point {xi} outside the grid hull"
        )));
    }
    let first = nearest_stencil_start(u, p, 0, grid.len as i64 - 1);
    let bary = equispaced_bary(p);
    let mut weights = vec![0.0; p];
    lagrange_weights_at(u, first, &bary, &mut weights);
    Ok(Stencil {
        first: first as usize,
        weights,
    })
}

/// Weights `Q_m`, `m = m_min..=m_max`, mapping the recent density samples
/// `sigma(t_{n+1-m})` to the local integral of `(1 - phi) sigma` from a
/// source at distance `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeightTable {
    pub d: f64,
    pub m_min: usize,
    pub weights: Vec<f64>,
}

impl LocalWeightTable {
    pub fn m_max(&self) -> usize {
        self.m_min + self.weights.len() - 1
    }

    pub fn q(&self, m: usize) -> f64 {
        if m < self.m_min {
            return 0.0;
        }
        self.weights.get(m - self.m_min).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// Index range `[first, last]` of the nonzero weights.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.weights.iter().position(|&w| w != 0.0)?;
        let last = self.weights.iter().rposition(|&w| w != 0.0)?;
        Some((self.m_min + first, self.m_min + last))
    }
}

/// Precomputed pieces shared by every `local_weights` call for one config.
#[derive(Debug, Clone)]
pub struct LocalQuadrature {
    rule: GaussRule,
    bary: Vec<f64>,
    window: Window,
    dt: f64,
    delta: f64,
    p: usize,
    m_max: usize,
}

impl LocalQuadrature {
    pub fn new(cfg: &WfpConfig, window: &Window) -> Self {
        LocalQuadrature {
            rule: GaussRule::reference(cfg.local_nodes),
            bary: equispaced_bary(cfg.p),
            window: window.clone(),
            dt: cfg.dt,
            delta: cfg.delta,
            p: cfg.p,
            m_max: cfg.m_max,
        }
    }

    /// The weight table for distance `d`. Computed in lag coordinates
    /// `theta = t_{n+1} - tau`, so it does not depend on the step index.
    /// Each grid step (half step for odd `p`) is its own Gauss-Legendre
    /// panel, so the piecewise interpolant times `1 - phi` is integrated
    /// without crossing a stencil switch.
    pub fn weights(&self, d: f64) -> LocalWeightTable {
        let m_min = if d < self.dt { 0 } else { 1 };
        let mut weights = vec![0.0; self.m_max - m_min + 1];
        let len = self.delta - d;
        if d >= self.delta || len < 1e-14 * self.dt {
            return LocalWeightTable { d, m_min, weights };
        }
        let lam_lo = d / self.dt;
        let lam_hi = self.delta / self.dt;
        let split = if self.p % 2 == 0 || self.p == 1 {
            1.0
        } else {
            0.5
        };
        let mut v = vec![0.0; self.p];
        let mut a = lam_lo;
        while a < lam_hi {
            let mut b = ((a / split).floor() + 1.0) * split;
            if b > lam_hi || lam_hi - b < 1e-12 {
                b = lam_hi;
            }
            if b - a > 1e-14 {
                let lo = nearest_lag_start(0.5 * (a + b), self.p, m_min as i64, self.m_max as i64);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                    let lam = mid + half * x;
                    let wt = half * w * self.dt * (1.0 - self.window.phi(lam * self.dt));
                    lagrange_weights_at(lam, lo, &self.bary, &mut v);
                    for (i, vi) in v.iter().enumerate() {
                        weights[(lo as usize) + i - m_min] += wt * vi;
                    }
                }
            }
            a = b;
        }
        LocalWeightTable { d, m_min, weights }
    }
}

/// Stencil start in lag coordinates (larger lag = earlier time). Ties go to
/// the later time, i.e. the smaller lag.
pub fn nearest_lag_start(lam: f64, p: usize, lo: i64, hi: i64) -> i64 {
    let s = if p == 1 {
        lam.ceil() as i64
    } else if p % 2 == 0 {
        lam.ceil() as i64 - (p / 2) as i64
    } else {
        (lam - 0.5).ceil() as i64 - (p / 2) as i64
    };
    s.clamp(lo, hi - p as i64 + 1)
}

/// Convenience wrapper building the shared pieces on every call.
pub fn local_weights(d: f64, cfg: &WfpConfig) -> LocalWeightTable {
    let window = Window::new(cfg.delta, cfg.b);
    LocalQuadrature::new(cfg, &window).weights(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BoundaryMode;

    #[test]
    fn midpoint_rule() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn monomials_exact() {
        let r = GaussRule::reference(5);
        assert!((r.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-15);
        for n in 1..40 {
            let r = GaussRule::reference(n);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                let got = r.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn window_normalization_by_gauss() {
        let w = Window::new(0.35, (1e12f64).ln());
        let r = gauss_legendre(30, 0.0, 0.35).unwrap();
        assert!((r.integrate(|t| w.phi_prime(t)) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interpolation_on_grid_point() {
        let g = UniformGrid {
            start: 0.0,
            step: 0.1,
            len: 10,
        };
        let s = interp_weights(0.5, &g, 4).unwrap();
        let idx = 5 - s.first;
        for (i, w) in s.weights.iter().enumerate() {
            assert_eq!(*w, if i == idx { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn interpolation_reproduces_cubic() {
        let g = UniformGrid {
            start: 1.0,
            step: 0.25,
            len: 12,
        };
        for &xi in &[1.1, 1.37, 2.01, 3.6, 3.74] {
            let s = interp_weights(xi, &g, 4).unwrap();
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let val: f64 = s
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let t = g.start + (s.first + i) as f64 * g.step;
                    w * t * t * t
                })
                .sum();
            assert!((val - xi * xi * xi).abs() < 1e-12);
        }
        assert!(interp_weights(4.0, &g, 4).is_err());
    }

    #[test]
    fn tie_prefers_later_point() {
        let g = UniformGrid {
            start: 0.0,
            step: 1.0,
            len: 10,
        };
        let s = interp_weights(4.5, &g, 1).unwrap();
        assert_eq!(s.first, 4);
        let s2 = interp_weights(4.5, &g, 2).unwrap();
        assert_eq!(s2.first, 4);
        // p = 3 at a midpoint: nodes 4,5,6 vs 3,4,5 equidistant, take later
        let s3 = interp_weights(4.5, &g, 3).unwrap();
        assert_eq!(s3.first, 4);
        assert_eq!(interp_weights(4.7, &g, 3).unwrap().first, 4);
        assert_eq!(interp_weights(4.2, &g, 3).unwrap().first, 3);
        assert_eq!(nearest_lag_start(1.5, 3, 0, 20), 0);
        assert_eq!(nearest_lag_start(1.5, 2, 0, 20), 1);
        assert_eq!(nearest_lag_start(1.5, 1, 0, 20), 2);
    }

    fn cfg() -> WfpConfig {
        WfpConfig::derive(1e-12, 0.5, 0.02, 4, BoundaryMode::Periodic).unwrap()
    }

    fn adaptive_local(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        composite(f, a, b, 64, 24)
    }

    #[test]
    fn beyond_window_is_zero() {
        let c = cfg();
        let t = local_weights(c.delta, &c);
        assert!(t.is_zero());
        assert_eq!(t.m_min, 1);
        assert!(local_weights(c.delta * 2.0, &c).is_zero());
    }

    #[test]
    fn constant_density_self_term() {
        let c = cfg();
        let w = Window::new(c.delta, c.b);
        let t = local_weights(0.0, &c);
        assert_eq!(t.m_min, 0);
        assert_eq!(t.m_max(), c.m_max);
        let sum: f64 = t.weights.iter().sum();
        let oracle = adaptive_local(|s| 1.0 - w.phi(s), 0.0, c.delta);
        assert!((sum - oracle).abs() < 1e-12, "{sum} {oracle}");
    }

    #[test]
    fn polynomial_density_reproduced() {
        let c = cfg();
        let w = Window::new(c.delta, c.b);
        let d = 1.5 * c.dt;
        let t = local_weights(d, &c);
        assert_eq!(t.m_min, 1);
        let tn1 = 3.0;
        let sigma = |tau: f64| 0.3 + 0.2 * tau - 0.1 * tau * tau + 0.05 * tau * tau * tau;
        let got: f64 = (t.m_min..=t.m_max())
            .map(|m| t.q(m) * sigma(tn1 - m as f64 * c.dt))
            .sum();
        let oracle = adaptive_local(
            |theta| (1.0 - w.phi(theta)) * sigma(tn1 - theta),
            d,
            c.delta,
        );
        assert!((got - oracle).abs() < 1e-12, "{got} {oracle}");
    }

    #[test]
    fn nearby_split() {
        let c = cfg();
        assert_eq!(local_weights(0.999 * c.dt, &c).m_min, 0);
        assert_eq!(local_weights(c.dt, &c).m_min, 1);
        // tiny interval
        assert!(local_weights(c.delta - 1e-17, &c).is_zero());
    }

    #[test]
    fn table_is_translation_free() {
        let c = cfg();
        let a = local_weights(0.37 * c.dt, &c);
        let b = local_weights(0.37 * c.dt, &c);
        assert_eq!(a, b);
    }
}
