//! The Kaiser-Bessel blending function `phi`, its derivatives, the influence
//! kernels `Psi_k` and their Fourier transforms.

use num_complex::Complex64;

use crate::error::{Result, WfpError};
use crate::quadrature::GaussRule;
use crate::special::{i0e, i1e_over_x};

const PANELS: usize = 16;
const CHEB_NODES: usize = 26;

/// Blending ramp from 0 at `t = 0` to 1 at `t = delta`.
#[derive(Debug, Clone)]
pub struct Window {
    delta: f64,
    b: f64,
    /// `b / (delta sinh b)`
    normalization: f64,
    /// `1 / (1 - e^{-2b})`, so that `e^z / sinh b = 2 e^{z-b} * inv_tail`.
    inv_tail: f64,
    /// Chebyshev coefficients of `phi` per panel.
    cheb: Vec<[f64; CHEB_NODES]>,
}

impl Window {
    pub fn new(delta: f64, b: f64) -> Self {
        assert!(delta > 0.0 && b > 0.0, "window needs delta > 0 and b > 0");
        let inv_tail = 1.0 / (-(-2.0 * b).exp_m1());
        let mut w = Window {
            delta,
            b,
            normalization: b / (delta * b.sinh()),
            inv_tail,
            cheb: Vec::new(),
        };
        w.cheb = w.build_table();
        w
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    fn build_table(&self) -> Vec<[f64; CHEB_NODES]> {
        let rule = GaussRule::reference(40);
        let h = self.delta / PANELS as f64;
        let n = CHEB_NODES;
        let theta: Vec<f64> = (0..n)
            .map(|i| std::f64::consts::PI * (i as f64 + 0.5) / n as f64)
            .collect();
        let mut out = Vec::with_capacity(PANELS);
        let mut base = 0.0;
        for p in 0..PANELS {
            let a = p as f64 * h;
            let mut vals = [0.0; CHEB_NODES];
            for (i, th) in theta.iter().enumerate() {
                // Chebyshev points ordered from right to left.
                let t = a + 0.5 * h * (1.0 + th.cos());
                vals[i] = base + rule.mapped(a, t).integrate(|s| self.phi_prime(s));
            }
            let mut coef = [0.0; CHEB_NODES];
            for (j, c) in coef.iter_mut().enumerate() {
                let s: f64 = vals
                    .iter()
                    .zip(&theta)
                    .map(|(v, th)| v * (j as f64 * th).cos())
                    .sum();
                *c = 2.0 * s / n as f64;
            }
            coef[0] *= 0.5;
            out.push(coef);
            base += rule.mapped(a, a + h).integrate(|s| self.phi_prime(s));
        }
        out
    }

    /// `phi(t)`, exactly 0 for `t <= 0` and exactly 1 for `t >= delta`.
    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.delta {
            return 1.0;
        }
        let h = self.delta / PANELS as f64;
        let p = ((t / h) as usize).min(PANELS - 1);
        let a = p as f64 * h;
        let x = 2.0 * (t - a) / h - 1.0;
        let c = &self.cheb[p];
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        (x * b1 - b2 + c[0]).clamp(0.0, 1.0)
    }

    /// `phi(t)` by direct `n`-node Gauss-Legendre quadrature of `phi'`.
    pub fn phi_by_quadrature(&self, t: f64, n: usize) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.delta {
            return 1.0;
        }
        GaussRule::reference(n)
            .mapped(0.0, t)
            .integrate(|s| self.phi_prime(s))
            .clamp(0.0, 1.0)
    }

    fn scaled_arg(&self, t: f64) -> (f64, f64) {
        let s = 2.0 * t / self.delta - 1.0;
        let r = (1.0 - s * s).max(0.0);
        (s, self.b * r.sqrt())
    }

    /// `e^z / sinh b` without overflow.
    fn growth(&self, z: f64) -> f64 {
        2.0 * (z - self.b).exp() * self.inv_tail
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        if !(0.0..=self.delta).contains(&t) {
            return 0.0;
        }
        let (_, z) = self.scaled_arg(t);
        (self.b / self.delta) * i0e(z) * self.growth(z)
    }

    pub fn phi_dprime(&self, t: f64) -> f64 {
        if !(0.0..=self.delta).contains(&t) {
            return 0.0;
        }
        let (s, z) = self.scaled_arg(t);
        let b = self.b;
        (b / self.delta) * self.growth(z) * i1e_over_x(z) * (-2.0 * b * b * s / self.delta)
    }

    /// Fourier transform `int phi'(t) e^{-i w t} dt`.
    pub fn hat_phi_prime(&self, omega: f64) -> Complex64 {
        let a = 0.5 * self.delta * omega;
        let phase = Complex64::from_polar(1.0, -a);
        phase * self.sinc_ratio(a)
    }

    /// `(b / sinh b) * sinc(sqrt(a^2 - b^2))` with the `sinh` continuation.
    fn sinc_ratio(&self, a: f64) -> f64 {
        let b = self.b;
        let q = a * a - b * b;
        if q > 0.0 {
            let r = q.sqrt();
            (b / b.sinh()) * r.sin() / r
        } else {
            let r = (-q).sqrt();
            if r < 1e-8 {
                return b / b.sinh();
            }
            // (b/r) sinh(r)/sinh(b), scaled to avoid overflow
            let num = -(-2.0 * r).exp_m1();
            (b / r) * (r - b).exp() * num * self.inv_tail
        }
    }

    /// Influence kernel `Psi_k(tau) = 2 cos(k tau) phi'(tau) + sin(k tau)/k phi''(tau)`.
    pub fn influence_kernel(&self, k: f64, tau: f64) -> f64 {
        if !(0.0..=self.delta).contains(&tau) {
            return 0.0;
        }
        2.0 * (k * tau).cos() * self.phi_prime(tau) + sin_over_k(k, tau) * self.phi_dprime(tau)
    }

    /// Fourier transform of `Psi_k`.
    pub fn hat_influence_kernel(&self, k: f64, omega: f64) -> Result<Complex64> {
        if k == 0.0 {
            return Err(WfpError::InvalidParameter(
                "transformed influence kernel needs k != 0".into(),
            ));
        }
        let r = omega / k;
        Ok(self.hat_phi_prime(omega + k) * (0.5 * (1.0 - r))
            + self.hat_phi_prime(omega - k) * (0.5 * (1.0 + r)))
    }

    /// Upper bound on `|hat Psi_k(omega)|` valid when `|k| - |omega| > 2b/delta`.
    pub fn hat_influence_bound(&self, k: f64, omega: f64) -> Option<f64> {
        let gap = k.abs() - omega.abs();
        let a = 0.5 * self.delta * gap;
        if a <= self.b {
            return None;
        }
        Some(3.0 * self.b / (self.b.sinh() * (a * a - self.b * self.b).sqrt()))
    }
}

/// `sin(k x) / k`, equal to `x` at `k = 0`, with a series for small `k x`.
pub fn sin_over_k(k: f64, x: f64) -> f64 {
    let kx = k * x;
    if kx.abs() < 1e-4 {
        let y = kx * kx;
        x * (1.0 - y / 6.0 * (1.0 - y / 20.0))
    } else {
        kx.sin() / k
    }
}
