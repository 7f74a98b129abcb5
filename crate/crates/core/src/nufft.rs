//! Type-1 and type-2 nonuniform discrete Fourier transforms on `[-pi, pi)`.
//!
//! Type 1: `S_k = sum_j c_j e^{i k x_j}`. Type 2: `u(x) = sum_k c_k e^{-i k x}`.
//! The fast path spreads onto a 2x oversampled grid with a Kaiser-Bessel
//! kernel, runs one FFT and divides by the kernel's Fourier transform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::special::i0e;

/// Below this `M * K` the transforms are summed directly.
pub const DIRECT_THRESHOLD: usize = 4096;

const OVERSAMPLING: f64 = 2.0;

/// Fourier coefficients `c_k`, `k = -K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn zeros(k_max: usize) -> Self {
        ModeVector {
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1],
        }
    }

    pub fn from_vec(k_max: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(
            coeffs.len(),
            2 * k_max + 1,
            "mode vector length must be 2K+1"
        );
        ModeVector { k_max, coeffs }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.coeffs[(k + self.k_max as i64) as usize]
    }

    pub fn set(&mut self, k: i64, v: Complex64) {
        let i = (k + self.k_max as i64) as usize;
        self.coeffs[i] = v;
    }

    /// Coefficients ordered from `k = -K` to `k = K`.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Direct type-1 sum.
pub fn nudft1_direct(points: &[f64], strengths: &[Complex64], k_max: usize) -> ModeVector {
    assert_eq!(points.len(), strengths.len());
    let mut out = ModeVector::zeros(k_max);
    for (&x, &c) in points.iter().zip(strengths) {
        for k in -(k_max as i64)..=(k_max as i64) {
            let (s, co) = (k as f64 * x).sin_cos();
            let i = (k + k_max as i64) as usize;
            out.coeffs[i] += c * Complex64::new(co, s);
        }
    }
    out
}

/// Direct type-2 sum.
pub fn nudft2_direct(targets: &[f64], modes: &ModeVector) -> Vec<Complex64> {
    let kk = modes.k_max as i64;
    targets
        .iter()
        .map(|&x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in -kk..=kk {
                let (s, co) = (k as f64 * x).sin_cos();
                acc += modes.get(k) * Complex64::new(co, -s);
            }
            acc
        })
        .collect()
}

/// Fast type-1 transform to relative accuracy ~`eps`.
pub fn nufft1(points: &[f64], strengths: &[Complex64], k_max: usize, eps: f64) -> ModeVector {
    NufftPlan::new(points, k_max, eps).type1(strengths)
}

/// Fast type-2 transform to relative accuracy ~`eps`.
pub fn nufft2(targets: &[f64], modes: &ModeVector, eps: f64) -> Vec<Complex64> {
    NufftPlan::new(targets, modes.k_max, eps).type2(modes)
}

/// Smallest `n >= target` of the form `2^a 3^b 5^c`.
pub fn next_smooth(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut m = n;
        for f in [2, 3, 5] {
            while m % f == 0 {
                m /= f;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

struct Gridded {
    n_grid: usize,
    width: usize,
    /// First grid index touched by each point (mod n_grid).
    offsets: Vec<usize>,
    /// `width` kernel values per point.
    kernel: Vec<f64>,
    /// `1 / psi_hat(k h)` for `k = -K..=K`.
    deconv: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Precomputed transform for a fixed point set and mode range.
pub struct NufftPlan {
    points: Vec<f64>,
    k_max: usize,
    gridded: Option<Gridded>,
}

impl std::fmt::Debug for NufftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NufftPlan")
            .field("points", &self.points.len())
            .field("k_max", &self.k_max)
            .field(
                "gridded",
                &self.gridded.as_ref().map(|g| (g.n_grid, g.width)),
            )
            .finish()
    }
}

impl NufftPlan {
    pub fn new(points: &[f64], k_max: usize, eps: f64) -> Self {
        let direct = points.len() * k_max.max(1) <= DIRECT_THRESHOLD;
        let gridded = (!direct).then(|| Gridded::new(points, k_max, eps));
        NufftPlan {
            points: points.to_vec(),
            k_max,
            gridded,
        }
    }

    /// Plan that always sums directly.
    pub fn direct(points: &[f64], k_max: usize) -> Self {
        NufftPlan {
            points: points.to_vec(),
            k_max,
            gridded: None,
        }
    }

    pub fn is_direct(&self) -> bool {
        self.gridded.is_none()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn type1(&self, strengths: &[Complex64]) -> ModeVector {
        assert_eq!(strengths.len(), self.points.len(), "one strength per point");
        match &self.gridded {
            None => nudft1_direct(&self.points, strengths, self.k_max),
            Some(g) => g.type1(strengths, self.k_max),
        }
    }

    pub fn type1_real(&self, strengths: &[f64]) -> ModeVector {
        let c: Vec<Complex64> = strengths.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.type1(&c)
    }

    pub fn type2(&self, modes: &ModeVector) -> Vec<Complex64> {
        assert_eq!(modes.k_max, self.k_max, "mode range mismatch");
        match &self.gridded {
            None => nudft2_direct(&self.points, modes),
            Some(g) => g.type2(modes, self.points.len()),
        }
    }
}

impl Gridded {
    fn new(points: &[f64], k_max: usize, eps: f64) -> Self {
        let half = (1.0 / eps).log10().ceil().max(1.0) as usize + 2;
        let width = 2 * half;
        let nf = 2 * k_max + 1;
        let n_grid = next_smooth(((OVERSAMPLING * nf as f64).ceil() as usize).max(2 * width));
        let wf = width as f64;
        let beta = PI * ((wf / OVERSAMPLING).powi(2) * (OVERSAMPLING - 0.5).powi(2) - 0.8).sqrt();
        let h = 2.0 * PI / n_grid as f64;

        // psi(z) = e^{-beta} I0(beta sqrt(1 - (2z/w)^2)), |z| <= w/2
        let psi = |z: f64| -> f64 {
            let r = 1.0 - (2.0 * z / wf).powi(2);
            if r < 0.0 {
                return 0.0;
            }
            let a = beta * r.sqrt();
            i0e(a) * (a - beta).exp()
        };
        let mut offsets = Vec::with_capacity(points.len());
        let mut kernel = Vec::with_capacity(points.len() * width);
        for &x in points {
            let u = x.rem_euclid(2.0 * PI) / h;
            let l0 = (u - 0.5 * wf).floor() as i64 + 1;
            offsets.push(l0.rem_euclid(n_grid as i64) as usize);
            for i in 0..width {
                kernel.push(psi((l0 + i as i64) as f64 - u));
            }
        }
        // psi_hat(xi) = w e^{-beta} sinh(sqrt(beta^2 - (w xi/2)^2)) / sqrt(...)
        let deconv = (-(k_max as i64)..=k_max as i64)
            .map(|k| {
                let a = 0.5 * wf * k as f64 * h;
                let r = (beta * beta - a * a).sqrt();
                let shat = if r < 1e-8 {
                    wf * (-beta).exp()
                } else {
                    wf * 0.5 * ((r - beta).exp() - (-r - beta).exp()) / r
                };
                1.0 / shat
            })
            .collect();
        let mut planner = FftPlanner::new();
        Gridded {
            n_grid,
            width,
            offsets,
            kernel,
            deconv,
            fwd: planner.plan_fft_forward(n_grid),
            inv: planner.plan_fft_inverse(n_grid),
        }
    }

    fn type1(&self, strengths: &[Complex64], k_max: usize) -> ModeVector {
        let n = self.n_grid;
        let mut grid = vec![Complex64::new(0.0, 0.0); n];
        for (j, &c) in strengths.iter().enumerate() {
            let ker = &self.kernel[j * self.width..(j + 1) * self.width];
            let off = self.offsets[j];
            if off + self.width <= n {
                for (g, &kv) in grid[off..off + self.width].iter_mut().zip(ker) {
                    *g += c * kv;
                }
            } else {
                for (i, &kv) in ker.iter().enumerate() {
                    grid[(off + i) % n] += c * kv;
                }
            }
        }
        // inverse FFT computes sum_l b_l e^{+2 pi i k l / n}
        self.inv.process(&mut grid);
        let kk = k_max as i64;
        let coeffs = (-kk..=kk)
            .enumerate()
            .map(|(i, k)| grid[k.rem_euclid(n as i64) as usize] * self.deconv[i])
            .collect();
        ModeVector::from_vec(k_max, coeffs)
    }

    fn type2(&self, modes: &ModeVector, m: usize) -> Vec<Complex64> {
        let n = self.n_grid;
        let mut grid = vec![Complex64::new(0.0, 0.0); n];
        let kk = modes.k_max as i64;
        for (i, k) in (-kk..=kk).enumerate() {
            grid[k.rem_euclid(n as i64) as usize] = modes.coeffs[i] * self.deconv[i];
        }
        // forward FFT computes sum_k a_k e^{-2 pi i k l / n}
        self.fwd.process(&mut grid);
        (0..m)
            .map(|j| {
                let ker = &self.kernel[j * self.width..(j + 1) * self.width];
                let off = self.offsets[j];
                let mut acc = Complex64::new(0.0, 0.0);
                if off + self.width <= n {
                    for (g, &kv) in grid[off..off + self.width].iter().zip(ker) {
                        acc += g * kv;
                    }
                } else {
                    for (i, &kv) in ker.iter().enumerate() {
                        acc += grid[(off + i) % n] * kv;
                    }
                }
                acc
            })
            .collect()
    }
}
