//! Error measurement, order fits, tapered spectra and the homogenized
//! cutoff frequency.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WfpError};
use crate::field::SpaceTimeField;
use crate::window::Window;

/// Errors this close to the window tolerance are excluded from order fits.
pub const DEFAULT_FLOOR: f64 = 1e-12;

pub fn max_grid_error(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(WfpError::GridMismatch(format!(
            "{}x{} grid against {}x{}",
            a.nt(),
            a.nx(),
            b.nt(),
            b.nx()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(WfpError::TooFewPoints {
            usable: xs.len().min(ys.len()),
            needed: 2,
        });
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(WfpError::InvalidParameter(
            "log-log fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(WfpError::InvalidParameter("all step sizes equal".into()));
    }
    Ok(sxy / sxx)
}

/// Observed order from an error sweep, ignoring errors within 10x of
/// [`DEFAULT_FLOOR`].
pub fn estimate_order(errors: &[f64], dts: &[f64]) -> Result<f64> {
    estimate_order_above(errors, dts, DEFAULT_FLOOR)
}

/// As [`estimate_order`] with an explicit floor; at least 3 points must lie
/// above `10 * floor`.
pub fn estimate_order_above(errors: &[f64], dts: &[f64], floor: f64) -> Result<f64> {
    if errors.len() != dts.len() {
        return Err(WfpError::InvalidParameter(format!(
            "{} errors for {} step sizes",
            errors.len(),
            dts.len()
        )));
    }
    let (d, e): (Vec<f64>, Vec<f64>) = dts
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e.is_finite() && e >= 10.0 * floor)
        .map(|(&d, &e)| (d, e))
        .unzip();
    if d.len() < 3 {
        return Err(WfpError::TooFewPoints {
            usable: d.len(),
            needed: 3,
        });
    }
    loglog_slope(&d, &e)
}

/// One-sided magnitude spectrum at angular frequencies `2πm/(N dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `∫ |û|² dω` over `[lo, hi]` by the trapezoid rule on the bins.
    pub fn energy_between(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for i in 1..self.omega.len() {
            let (a, b) = (self.omega[i - 1], self.omega[i]);
            if b <= lo || a >= hi {
                continue;
            }
            total += 0.5 * (b - a) * (self.magnitude[i - 1].powi(2) + self.magnitude[i].powi(2));
        }
        total
    }

    pub fn energy(&self) -> f64 {
        self.energy_between(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Interior local maxima, largest first.
    pub fn peaks(&self, count: usize) -> Vec<(f64, f64)> {
        let m = &self.magnitude;
        let mut found: Vec<(f64, f64)> = (1..m.len().saturating_sub(1))
            .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1])
            .map(|i| (self.omega[i], m[i]))
            .collect();
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found.truncate(count);
        found
    }

    /// As [`Spectrum::peaks`], with each location refined by a parabola
    /// through the three bins around it.
    pub fn refined_peaks(&self, count: usize) -> Vec<(f64, f64)> {
        self.separated_peaks(count, 0.0)
    }

    /// Largest refined maxima, skipping any within `min_gap` of a larger one
    /// already taken. Suppresses truncation sidelobes of unresolved lines.
    pub fn separated_peaks(&self, count: usize, min_gap: f64) -> Vec<(f64, f64)> {
        let mut taken: Vec<(f64, f64)> = Vec::new();
        for (w, m) in self.all_refined_peaks() {
            if taken.len() == count {
                break;
            }
            if taken.iter().all(|&(v, _)| (v - w).abs() >= min_gap) {
                taken.push((w, m));
            }
        }
        taken
    }

    fn all_refined_peaks(&self) -> Vec<(f64, f64)> {
        let m = &self.magnitude;
        let mut found: Vec<(f64, f64)> = (1..m.len().saturating_sub(1))
            .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1])
            .map(|i| {
                let (a, b, c) = (m[i - 1], m[i], m[i + 1]);
                let den = a - 2.0 * b + c;
                let shift = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
                let h = self.omega[i + 1] - self.omega[i];
                (self.omega[i] + shift * h, b - 0.25 * (a - c) * shift)
            })
            .collect();
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found
    }

    /// Copy scaled so that `reference` peaks at 1.
    pub fn normalized_by(&self, reference: &Spectrum) -> Spectrum {
        let peak = reference.magnitude.iter().fold(0.0f64, |a, &b| a.max(b));
        let s = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        Spectrum {
            omega: self.omega.clone(),
            magnitude: self.magnitude.iter().map(|v| v * s).collect(),
        }
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "omega,magnitude")?;
        for (w, m) in self.omega.iter().zip(&self.magnitude) {
            writeln!(out, "{w:.17e},{m:.17e}")?;
        }
        Ok(())
    }
}

/// Taper used by [`windowed_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taper {
    /// Ramp width as a fraction of the record length, per end.
    pub fraction: f64,
    /// Window shape parameter.
    pub b: f64,
}

impl Default for Taper {
    fn default() -> Self {
        Taper {
            fraction: 0.1,
            b: 1e12f64.ln(),
        }
    }
}

impl Taper {
    /// Taper weights for `n` samples spaced `dt`.
    pub fn weights(&self, n: usize, dt: f64) -> Vec<f64> {
        let record = n.saturating_sub(1) as f64 * dt;
        let width = self.fraction * record;
        if width <= 0.0 {
            return vec![1.0; n];
        }
        let w = Window::new(width, self.b);
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                w.phi(t) * w.phi(record - t)
            })
            .collect()
    }
}

/// Tapered FFT of a uniformly sampled real signal, scaled by `dt` so that
/// magnitudes approximate `|∫ u(t) e^{-iωt} dt|`.
pub fn windowed_spectrum(signal: &[f64], dt: f64, taper: &Taper) -> Spectrum {
    windowed_spectrum_padded(signal, dt, taper, 1)
}

/// As [`windowed_spectrum`], zero-padding the tapered record to `pad` times
/// its length first (a finer frequency sampling, same resolution).
pub fn windowed_spectrum_padded(signal: &[f64], dt: f64, taper: &Taper, pad: usize) -> Spectrum {
    let len = signal.len();
    let n = len * pad.max(1);
    if n == 0 {
        return Spectrum {
            omega: vec![],
            magnitude: vec![],
        };
    }
    let w = taper.weights(len, dt);
    let mut buf: Vec<Complex64> = signal
        .iter()
        .zip(&w)
        .map(|(s, w)| Complex64::new(s * w, 0.0))
        .collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    Spectrum {
        omega: (0..=half)
            .map(|m| 2.0 * std::f64::consts::PI * m as f64 / (n as f64 * dt))
            .collect(),
        magnitude: buf[..=half].iter().map(|c| c.norm() * dt).collect(),
    }
}

/// Cutoff `ω₀ = sqrt(β̄ / Δx)` of the homogenized Klein-Gordon medium.
pub fn klein_gordon_cutoff(mean_beta: f64, mean_spacing: f64) -> Result<f64> {
    if !(mean_beta > 0.0 && mean_spacing > 0.0) {
        return Err(WfpError::InvalidParameter(format!(
            "cutoff needs positive inputs, got {mean_beta} and {mean_spacing}"
        )));
    }
    Ok((mean_beta / mean_spacing).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn field(vals: Vec<f64>) -> SpaceTimeField {
        let mut f = SpaceTimeField::zeros(vec![0.0, 1.0], vec![0.0, 0.5, 1.0]);
        f.values = vals;
        f
    }

    #[test]
    fn grid_error() {
        let a = field(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(max_grid_error(&a, &a).unwrap(), 0.0);
        let b = field(a.values.iter().map(|v| v + 1e-8).collect());
        assert!((max_grid_error(&a, &b).unwrap() - 1e-8).abs() < 1e-15);
        let c = SpaceTimeField::zeros(vec![0.0], vec![0.0]);
        assert!(max_grid_error(&a, &c).is_err());
    }

    #[test]
    fn synthetic_orders() {
        let dts = [0.1, 0.05, 0.025, 0.0125];
        for q in [1.0, 3.0, 4.5, 7.0] {
            let errs: Vec<f64> = dts.iter().map(|d: &f64| 2.0 * d.powf(q)).collect();
            assert!((estimate_order(&errs, &dts).unwrap() - q).abs() < 1e-10);
        }
        let floor = [1e-12; 4];
        assert!(matches!(
            estimate_order(&floor, &dts),
            Err(WfpError::TooFewPoints { usable: 0, .. })
        ));
        // floor points are dropped rather than flattening the fit
        let mixed = [1e-3, 1.25e-4, 1.5625e-5, 2e-12];
        assert!((estimate_order(&mixed, &dts).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn sinusoid_on_a_bin() {
        let n = 4096;
        let dt = 0.01;
        let bin = 200;
        let w0 = 2.0 * PI * bin as f64 / (n as f64 * dt);
        let sig: Vec<f64> = (0..n).map(|i| (w0 * i as f64 * dt).sin()).collect();
        let s = windowed_spectrum(&sig, dt, &Taper::default());
        let (wp, mp) = s.peaks(1)[0];
        assert!((wp - w0).abs() < 1e-12);
        // outside the taper's own bandwidth 2b/width
        let taper = Taper::default();
        let lobe = 2.0 * taper.b / (taper.fraction * (n - 1) as f64 * dt);
        let mut checked = 0;
        for (&w, m) in s.omega.iter().zip(&s.magnitude) {
            if (w - w0).abs() > lobe {
                assert!(m / mp <= 1e-6, "omega {w}: {}", m / mp);
                checked += 1;
            }
        }
        assert!(checked > n / 4);
    }

    #[test]
    fn matches_direct_tapered_dft() {
        let n = 301;
        let dt = 0.037;
        let sig: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                (-(t - 5.0).powi(2)).exp() * (3.0 * t).cos() + 0.1 * (7.0 * t).sin()
            })
            .collect();
        let taper = Taper::default();
        let w = taper.weights(n, dt);
        let s = windowed_spectrum(&sig, dt, &taper);
        let mut parseval = 0.0;
        for (m, (&om, &mag)) in s.omega.iter().zip(&s.magnitude).enumerate() {
            let direct: Complex64 = (0..n)
                .map(|i| {
                    Complex64::from_polar(sig[i] * w[i], -2.0 * PI * (m * i) as f64 / n as f64)
                })
                .sum();
            assert!((direct.norm() * dt - mag).abs() < 1e-10);
            assert!((om - 2.0 * PI * m as f64 / (n as f64 * dt)).abs() < 1e-12);
            let mult = if m == 0 { 1.0 } else { 2.0 };
            parseval += mult * (mag / dt).powi(2);
        }
        let time: f64 = sig.iter().zip(&w).map(|(s, w)| (s * w).powi(2)).sum();
        assert!((parseval / n as f64 - time).abs() < 1e-10 * time);
    }

    #[test]
    fn zero_and_gaussian_spectra() {
        let z = windowed_spectrum(&[0.0; 64], 0.1, &Taper::default());
        assert!(z.magnitude.iter().all(|&m| m == 0.0));

        // f(t) = e^{-μ (t - c)^2}, |f̂(ω)| = sqrt(π/μ) e^{-ω²/(4μ)}
        let mu = 5.0;
        let dt = 0.01;
        let n = 4000;
        let sig: Vec<f64> = (0..n)
            .map(|i| (-mu * (i as f64 * dt - 20.0).powi(2)).exp())
            .collect();
        let s = windowed_spectrum(&sig, dt, &Taper::default());
        assert_eq!(s.magnitude.iter().cloned().fold(0.0, f64::max), s.magnitude[0]);
        for (&w, &m) in s.omega.iter().zip(&s.magnitude).take_while(|(w, _)| **w < 12.0) {
            let exact = (PI / mu).sqrt() * (-w * w / (4.0 * mu)).exp();
            assert!((m - exact).abs() < 1e-9, "omega {w}: {m} vs {exact}");
        }
    }

    #[test]
    fn padding_refines_sampling_not_content() {
        let dt = 0.01;
        let sig: Vec<f64> = (0..4000)
            .map(|i| (7.3 * i as f64 * dt).sin())
            .collect();
        let tp = Taper::default();
        let plain = windowed_spectrum(&sig, dt, &tp);
        let fine = windowed_spectrum_padded(&sig, dt, &tp, 8);
        assert_eq!(fine.len(), 8 * 4000 / 2 + 1);
        for (i, m) in plain.magnitude.iter().enumerate() {
            assert!((fine.magnitude[8 * i] - m).abs() < 1e-12);
        }
        let (w, _) = fine.refined_peaks(1)[0];
        assert!((w - 7.3).abs() < 2e-3, "{w}");
    }

    #[test]
    fn separation_skips_shoulders() {
        let s = Spectrum {
            omega: (0..8).map(|i| i as f64).collect(),
            magnitude: vec![0.0, 5.0, 0.0, 4.0, 0.0, 0.0, 1.0, 0.0],
        };
        assert_eq!(s.separated_peaks(2, 0.0), vec![(1.0, 5.0), (3.0, 4.0)]);
        assert_eq!(s.separated_peaks(2, 2.5), vec![(1.0, 5.0), (6.0, 1.0)]);
    }

    #[test]
    fn energy_and_peaks() {
        let s = Spectrum {
            omega: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            magnitude: vec![0.0, 2.0, 1.0, 3.0, 0.0],
        };
        assert_eq!(s.peaks(5), vec![(3.0, 3.0), (1.0, 2.0)]);
        assert!((s.energy() - (2.0 + 2.5 + 5.0 + 4.5)).abs() < 1e-14);
        assert!((s.energy_between(2.5, 10.0) - 9.5).abs() < 1e-14);
    }

    #[test]
    fn cutoff_values() {
        let dx = 4.0 / 150.0;
        assert!((klein_gordon_cutoff(1.55, dx).unwrap() - 7.6).abs() < 0.05);
        assert!((klein_gordon_cutoff(5.05, dx).unwrap() - 13.8).abs() < 0.05);
        assert_eq!(klein_gordon_cutoff(1.0, 1.0).unwrap(), 1.0);
        assert!(klein_gordon_cutoff(0.0, 1.0).is_err());
    }
}
