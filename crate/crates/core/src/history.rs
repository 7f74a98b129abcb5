//! The history part: density Fourier coefficients `S_k`, one-step kernels
//! `p_k`, `q_k`, the exact recurrence for `(alpha_k, alpha'_k)`, and the
//! Fourier truncation checker.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::config::WfpConfig;
use crate::error::{Result, WfpError};
use crate::nufft::{ModeVector, NufftPlan};
use crate::quadrature::GaussRule;
use crate::window::{sin_over_k, Window};

/// `S_k = (1/2pi) sum_j sigma_j e^{i k x_j}` through a plan on the springs.
pub fn compute_sk(plan: &NufftPlan, sigma: &[f64]) -> ModeVector {
    let mut s = plan.type1_real(sigma);
    s.scale(1.0 / (2.0 * PI));
    s
}

/// `p_k(m dt)` and `q_k(m dt)` for `k = 0..=K`, `m = 0..W`.
#[derive(Debug, Clone)]
pub struct StepKernels {
    k_max: usize,
    window_steps: usize,
    dt: f64,
    /// Row-major `[m][k]`.
    p: Vec<f64>,
    q: Vec<f64>,
}

impl StepKernels {
    pub fn p(&self, k: i64, m: usize) -> f64 {
        self.p[m * (self.k_max + 1) + k.unsigned_abs() as usize]
    }

    pub fn q(&self, k: i64, m: usize) -> f64 {
        self.q[m * (self.k_max + 1) + k.unsigned_abs() as usize]
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn window_steps(&self) -> usize {
        self.window_steps
    }

    /// Evaluate `p_k(tau)`, `q_k(tau)` at an arbitrary lag with an
    /// `n`-node rule.
    pub fn evaluate(window: &Window, dt: f64, k: f64, tau: f64, n: usize) -> (f64, f64) {
        let rule = GaussRule::reference(n).mapped(0.0, dt);
        let mut p = 0.0;
        let mut q = 0.0;
        for (&mu, &w) in rule.nodes.iter().zip(&rule.weights) {
            let psi = window.influence_kernel(k, tau + mu);
            p += w * sin_over_k(k, dt - mu) * psi;
            q += w * (k * (dt - mu)).cos() * psi;
        }
        (p, q)
    }
}

/// Tabulate the one-step kernels with `cfg.kernel_nodes` Gauss-Legendre nodes.
pub fn precompute_kernels(window: &Window, cfg: &WfpConfig) -> StepKernels {
    let kk = cfg.k_max;
    let w = cfg.window_steps;
    let dt = cfg.dt;
    let rule = GaussRule::reference(cfg.kernel_nodes).mapped(0.0, dt);
    let ng = rule.len();
    let mut p = vec![0.0; w * (kk + 1)];
    let mut q = vec![0.0; w * (kk + 1)];
    // Per node: phi', phi'' at tau = m dt + mu, reused for every k.
    let mut d1 = vec![0.0; ng];
    let mut d2 = vec![0.0; ng];
    let mut taus = vec![0.0; ng];
    for m in 0..w {
        for g in 0..ng {
            let tau = m as f64 * dt + rule.nodes[g];
            taus[g] = tau;
            d1[g] = window.phi_prime(tau);
            d2[g] = window.phi_dprime(tau);
        }
        for k in 0..=kk {
            let kf = k as f64;
            let mut ps = 0.0;
            let mut qs = 0.0;
            for g in 0..ng {
                let tau = taus[g];
                let psi = 2.0 * (kf * tau).cos() * d1[g] + sin_over_k(kf, tau) * d2[g];
                let wpsi = rule.weights[g] * psi;
                let lag = dt - rule.nodes[g];
                ps += wpsi * sin_over_k(kf, lag);
                qs += wpsi * (kf * lag).cos();
            }
            p[m * (kk + 1) + k] = ps;
            q[m * (kk + 1) + k] = qs;
        }
    }
    StepKernels {
        k_max: kk,
        window_steps: w,
        dt,
        p,
        q,
    }
}

/// Per-mode coefficients of the homogeneous propagator over one step.
#[derive(Debug, Clone)]
pub struct Rotation {
    cos: Vec<f64>,
    /// `sin(k dt) / k`
    sinc: Vec<f64>,
    /// `k sin(k dt)`
    ksin: Vec<f64>,
}

impl Rotation {
    pub fn new(k_max: usize, dt: f64) -> Self {
        let mut cos = Vec::with_capacity(k_max + 1);
        let mut sinc = Vec::with_capacity(k_max + 1);
        let mut ksin = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let kf = k as f64;
            let (c, sc, ks) = if k == 0 {
                (1.0, dt, 0.0)
            } else {
                unit_determinant((kf * dt).cos(), sin_over_k(kf, dt), kf * (kf * dt).sin())
            };
            cos.push(c);
            sinc.push(sc);
            ksin.push(ks);
        }
        Rotation { cos, sinc, ksin }
    }
}

/// Among the neighbours (within one ulp) of the rounded propagator entries,
/// pick the triple whose determinant `c^2 + sc*ks` is closest to 1, so that
/// the rounded map does not drift in amplitude over many steps.
fn unit_determinant(c: f64, sc: f64, ks: f64) -> (f64, f64, f64) {
    let around = |x: f64| [x.next_down(), x, x.next_up()];
    let det_err = |c: f64, a: f64, b: f64| {
        let p = c * c;
        let ep = c.mul_add(c, -p);
        let q = a * b;
        let eq = a.mul_add(b, -q);
        (((p - 1.0) + q) + (ep + eq)).abs()
    };
    let mut best = (c, sc, ks);
    let mut best_err = det_err(c, sc, ks);
    for cc in around(c) {
        for a in around(sc) {
            for b in around(ks) {
                let e = det_err(cc, a, b);
                if e < best_err {
                    best_err = e;
                    best = (cc, a, b);
                }
            }
        }
    }
    best
}

/// Fourier state of the history part plus the last `W` values of `S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryState {
    pub alpha: ModeVector,
    pub alpha_prime: ModeVector,
    k_max: usize,
    depth: usize,
    /// `depth` mode vectors of length `2K+1`, ring-indexed.
    stack: Vec<Complex64>,
    head: usize,
    /// Number of `S_k` pushes so far.
    pub n: usize,
}

impl HistoryState {
    pub fn new(k_max: usize, depth: usize) -> Self {
        let nf = 2 * k_max + 1;
        HistoryState {
            alpha: ModeVector::zeros(k_max),
            alpha_prime: ModeVector::zeros(k_max),
            k_max,
            depth,
            stack: vec![Complex64::new(0.0, 0.0); depth * nf],
            head: depth - 1,
            n: 0,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Push `S_k(t_n)`; it becomes lag 0.
    pub fn push_sk(&mut self, sk: &ModeVector) {
        assert_eq!(sk.k_max(), self.k_max, "mode range mismatch");
        let nf = 2 * self.k_max + 1;
        self.head = (self.head + 1) % self.depth;
        self.stack[self.head * nf..(self.head + 1) * nf].copy_from_slice(sk.as_slice());
        self.n += 1;
    }

    /// `S_k(t_{n-m})` for the most recent push `n`.
    pub fn sk_at_lag(&self, m: usize) -> &[Complex64] {
        let nf = 2 * self.k_max + 1;
        let slot = (self.head + self.depth - m % self.depth) % self.depth;
        &self.stack[slot * nf..(slot + 1) * nf]
    }

    /// Number of stored complex values.
    pub fn storage_len(&self) -> usize {
        self.stack.len() + self.alpha.len() + self.alpha_prime.len()
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        for v in [self.k_max, self.depth, self.head, self.n] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        let all = self
            .alpha
            .as_slice()
            .iter()
            .chain(self.alpha_prime.as_slice())
            .chain(&self.stack);
        for c in all {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next_u = |r: &mut dyn Read| -> Result<usize> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word) as usize)
        };
        let k_max = next_u(input)?;
        let depth = next_u(input)?;
        let head = next_u(input)?;
        let n = next_u(input)?;
        if depth == 0 || head >= depth {
            return Err(WfpError::Format("corrupt history snapshot header".into()));
        }
        let nf = 2 * k_max + 1;
        let mut read_c = |count: usize| -> Result<Vec<Complex64>> {
            let mut buf = vec![0u8; 16 * count];
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect())
        };
        let alpha = ModeVector::from_vec(k_max, read_c(nf)?);
        let alpha_prime = ModeVector::from_vec(k_max, read_c(nf)?);
        let stack = read_c(nf * depth)?;
        Ok(HistoryState {
            alpha,
            alpha_prime,
            k_max,
            depth,
            stack,
            head,
            n,
        })
    }
}

/// `h_k = dt sum_m p_k(m dt) S_k(t_{n-m})`, same for `g` with `q`.
/// The stack must be Hermitian in `k`.
pub fn step_hg(kernels: &StepKernels, state: &HistoryState) -> Result<(ModeVector, ModeVector)> {
    if state.depth != kernels.window_steps {
        return Err(WfpError::InvalidParameter(format!(
            "stack depth {} differs from window width {}",
            state.depth, kernels.window_steps
        )));
    }
    let kk = kernels.k_max;
    let nf = 2 * kk + 1;
    let mut h = vec![Complex64::new(0.0, 0.0); nf];
    let mut g = vec![Complex64::new(0.0, 0.0); nf];
    // densities are real, so S_{-k} = conj(S_k); only k >= 0 is summed
    for m in 0..kernels.window_steps {
        let s = &state.sk_at_lag(m)[kk..];
        let prow = &kernels.p[m * (kk + 1)..(m + 1) * (kk + 1)];
        let qrow = &kernels.q[m * (kk + 1)..(m + 1) * (kk + 1)];
        for ((((hv, gv), &sv), &pv), &qv) in h[kk..]
            .iter_mut()
            .zip(g[kk..].iter_mut())
            .zip(s)
            .zip(prow)
            .zip(qrow)
        {
            *hv += sv * pv;
            *gv += sv * qv;
        }
    }
    let dt = kernels.dt;
    for i in 0..kk {
        h[i] = (h[nf - 1 - i] * dt).conj();
        g[i] = (g[nf - 1 - i] * dt).conj();
    }
    h[kk..]
        .iter_mut()
        .chain(g[kk..].iter_mut())
        .for_each(|v| *v *= dt);
    Ok((ModeVector::from_vec(kk, h), ModeVector::from_vec(kk, g)))
}

/// Exact one-step propagation of `(alpha, alpha')` plus the driving terms.
pub fn advance_alpha(state: &mut HistoryState, rot: &Rotation, h: &ModeVector, g: &ModeVector) {
    let kk = state.k_max;
    let a = state.alpha.as_mut_slice();
    let ap = state.alpha_prime.as_mut_slice();
    for i in 0..2 * kk + 1 {
        let ka = i.abs_diff(kk);
        let (c, sc, ks) = (rot.cos[ka], rot.sinc[ka], rot.ksin[ka]);
        let a0 = a[i];
        let ap0 = ap[i];
        a[i] = a0 * c + ap0 * sc + h.as_slice()[i];
        ap[i] = -a0 * ks + ap0 * c + g.as_slice()[i];
    }
}

/// `u_H(x) = sum_k alpha_k e^{-i k x}` at the plan's points (real part).
pub fn eval_history(plan: &NufftPlan, state: &HistoryState) -> Vec<f64> {
    plan.type2(&state.alpha).into_iter().map(|c| c.re).collect()
}

/// Everything needed to advance the history part by one step.
#[derive(Debug)]
pub struct HistoryEngine {
    pub kernels: StepKernels,
    pub rotation: Rotation,
    pub spring_plan: NufftPlan,
}

impl HistoryEngine {
    pub fn new(window: &Window, cfg: &WfpConfig, positions: &[f64]) -> Self {
        HistoryEngine {
            kernels: precompute_kernels(window, cfg),
            rotation: Rotation::new(cfg.k_max, cfg.dt),
            spring_plan: NufftPlan::new(positions, cfg.k_max, cfg.eps),
        }
    }

    pub fn new_state(&self) -> HistoryState {
        HistoryState::new(self.kernels.k_max, self.kernels.window_steps)
    }

    /// Advance from `t_n` to `t_{n+1}` given `sigma^n`.
    pub fn step(&self, state: &mut HistoryState, sigma_n: &[f64]) {
        let sk = compute_sk(&self.spring_plan, sigma_n);
        state.push_sk(&sk);
        let (h, g) = step_hg(&self.kernels, state).expect("engine kernels match state depth");
        advance_alpha(state, &self.rotation, &h, &g);
    }
}

/// Collects what the truncation checker needs while a run proceeds.
#[derive(Debug, Clone)]
pub struct TailRecorder {
    k_trunc: usize,
    modes: Vec<i64>,
    dt: f64,
    /// `sum_{K<|k|<=K_big} |alpha_k|` per recorded step.
    tail: Vec<f64>,
    /// `|alpha_k|^2` per recorded step for each tracked mode.
    per_mode: Vec<Vec<f64>>,
}

impl TailRecorder {
    pub fn new(k_trunc: usize, modes: Vec<i64>, dt: f64) -> Self {
        let per_mode = vec![Vec::new(); modes.len()];
        TailRecorder {
            k_trunc,
            modes,
            dt,
            tail: vec![0.0],
            per_mode: per_mode
                .into_iter()
                .map(|mut v: Vec<f64>| {
                    v.push(0.0);
                    v
                })
                .collect(),
        }
    }

    pub fn record(&mut self, state: &HistoryState) {
        let kb = state.k_max as i64;
        let kt = self.k_trunc as i64;
        let s: f64 = (-kb..=kb)
            .filter(|k| k.abs() > kt)
            .map(|k| state.alpha.get(k).norm())
            .sum();
        self.tail.push(s);
        for (i, &k) in self.modes.iter().enumerate() {
            self.per_mode[i].push(state.alpha.get(k).norm_sqr());
        }
    }

    pub fn final_time(&self) -> f64 {
        (self.tail.len() - 1) as f64 * self.dt
    }
}

/// Outcome of a truncation check.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub measured: f64,
    pub bound: f64,
    /// `(k, measured ||alpha_k||, bound)` per tracked mode.
    pub per_mode: Vec<(i64, f64, f64)>,
}

impl TailReport {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound && self.per_mode.iter().all(|(_, m, b)| m <= b)
    }
}

fn trapezoid_l2(samples: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let v: Vec<f64> = samples.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    (dt * (inner + 0.5 * (v[0] + v[v.len() - 1]))).sqrt()
}

/// Compare the recorded tail against the truncation bounds
/// `2 pi^2 T M C b / (delta sinh b)` (summed) and
/// `(b/sinh b) 3 M C T / (k sqrt((delta(|k|-K0)/2)^2 - b^2))` (per mode).
/// `c_bound` bounds the L2 norm of every density.
pub fn truncation_tail(
    rec: &TailRecorder,
    k0: f64,
    c_bound: f64,
    m: usize,
    window: &Window,
) -> Result<TailReport> {
    let (b, delta) = (window.b(), window.delta());
    let required = k0 + 2.0 * b / delta;
    if (rec.k_trunc as f64) < required {
        return Err(WfpError::Hypothesis {
            k: rec.k_trunc,
            required,
        });
    }
    let t = rec.final_time();
    let mf = m as f64;
    let measured = trapezoid_l2(rec.tail.iter().map(|s| s * s), rec.dt);
    let bound = 2.0 * PI * PI * t * mf * c_bound * b / (delta * b.sinh());
    let per_mode = rec
        .modes
        .iter()
        .zip(&rec.per_mode)
        .map(|(&k, sq)| {
            let ka = k.unsigned_abs() as f64;
            let a = 0.5 * delta * (ka - k0);
            let bnd = (b / b.sinh()) * 3.0 * mf * c_bound * t / (ka * (a * a - b * b).sqrt());
            (k, trapezoid_l2(sq.iter().copied(), rec.dt), bnd)
        })
        .collect();
    Ok(TailReport {
        measured,
        bound,
        per_mode,
    })
}

/// Drive a history engine with prescribed densities `sigma(t)` over
/// `steps` steps, recording the modes above `k_trunc`.
pub fn record_prescribed(
    engine: &HistoryEngine,
    k_trunc: usize,
    modes: Vec<i64>,
    dt: f64,
    steps: usize,
    mut sigma: impl FnMut(f64, &mut [f64]),
) -> TailRecorder {
    let m = engine.spring_plan.points().len();
    let mut rec = TailRecorder::new(k_trunc, modes, dt);
    let mut state = engine.new_state();
    let mut s = vec![0.0; m];
    for n in 0..steps {
        sigma(n as f64 * dt, &mut s);
        engine.step(&mut state, &s);
        rec.record(&state);
    }
    rec
}
