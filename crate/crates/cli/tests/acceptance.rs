//! One PASS/FAIL line per acceptance criterion.
//!
//! Verdicts are printed, not asserted: the process fails only when a check
//! cannot run at all. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --test acceptance -- 5 7`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{ensure, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfp_cli::config::{self, ConvergeConfig, SimulateConfig, SpectraConfig, StabilityConfig, TimingConfig};
use wfp_cli::{converge, simulate, spectra, stability, timing};
use wfp_core::analysis::klein_gordon_cutoff;
use wfp_core::config::gaussian_bandlimit;
use wfp_core::history::{
    advance_alpha, eval_history, record_prescribed, truncation_tail, Rotation,
};
use wfp_core::local::{periodic_dist, SpringOrder, TargetEvaluator};
use wfp_core::marcher::{simulate as march, Excitation};
use wfp_core::nufft::{nudft1_direct, nudft2_direct, nufft1, nufft2};
use wfp_core::potential::{
    eval_scattered_field, reference_march_free, reference_march_periodic, required_images,
    slp_gaussian_periodic, IncidentData, ManufacturedProblem,
};
use wfp_core::quadrature::LocalQuadrature;
use wfp_core::{
    BoundaryMode, DensityHistory, DomainMap, GaussianDensity, HistoryEngine, HistoryState,
    IncidentPulse, LocalOperators, ModeVector, NufftPlan, OutputSpec, SpringSet, WfpConfig,
    Window,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

fn within_budget(start: Instant, seconds: f64) -> (bool, String) {
    let used = start.elapsed().as_secs_f64();
    (used <= seconds, format!("runtime {used:.0}s (limit {seconds:.0}s)"))
}

fn random_positions(rng: &mut ChaCha8Rng, m: usize, sep: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < m {
        let x = rng.random_range(-1.0..1.0);
        if xs.iter().all(|&y| (x - y).abs() > sep) {
            xs.push(x);
        }
    }
    xs
}

/// Manufactured sweeps: fitted field order `p + 1 +- 0.5`, and errors at or
/// below 1e-10 once `dt^(p+1) < 1e-12`.
fn criterion_1() -> Result<Verdict> {
    let start = Instant::now();
    let orders: ConvergeConfig = config::load(&presets().join("converge.json"), true)?;
    let report = converge::run(&orders, 1, |_| {})?;
    let mut pass = true;
    let mut parts = Vec::new();
    for f in &report.fits {
        let target = f.p as f64 + 1.0;
        let ok = f.field_order.is_some_and(|o| (o - target).abs() <= 0.5);
        pass &= ok;
        parts.push(format!(
            "p={} order {} (target {target}, density {})",
            f.p,
            f.field_order.map_or("none".into(), |o| format!("{o:.2}")),
            f.density_order.map_or("none".into(), |o| format!("{o:.2}")),
        ));
    }
    let plateau: ConvergeConfig = config::load(&presets().join("converge_plateau.json"), true)?;
    let flat = converge::run(&plateau, 1, |_| {})?;
    for r in &flat.rows {
        let ok = r.field_error <= 1e-10;
        pass &= ok;
        parts.push(format!("p={} dt={} error {:.2e}", r.p, r.dt, r.field_error));
    }
    let (fast, t) = within_budget(start, 600.0);
    parts.push(t);
    verdict(pass && fast, parts.join("; "))
}

/// Periodic WFP against the direct periodic march, 500 steps, p = 6.
fn criterion_2() -> Result<Verdict> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for m in [1usize, 3, 10] {
        let mut rng = ChaCha8Rng::seed_from_u64(7 + m as u64);
        let xs = random_positions(&mut rng, m, 1e-4);
        let bs = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
        let dens = (0..m)
            .map(|_| GaussianDensity::new(rng.random_range(4.0..6.0), rng.random_range(3.0..5.0)))
            .collect::<wfp_core::Result<Vec<_>>>()?;
        let prob = ManufacturedProblem::new(SpringSet::new(xs, bs)?, dens, BoundaryMode::Periodic)?;
        let dt = PI / 240.0;
        let t_final = 500.0 * dt;
        let cfg = WfpConfig::derive(1e-12, 0.5, dt, 6, BoundaryMode::Periodic)?;
        let out = OutputSpec {
            keep_densities: true,
            ..OutputSpec::default()
        };
        let res = march(&prob.springs, Excitation::Data(&prob), &cfg, t_final, &out)?;
        let wfp = res.densities.expect("densities kept");
        ensure!(wfp.steps() == 500, "ran {} steps", wfp.steps());
        let reference =
            reference_march_periodic(&prob.springs, &prob, 6, dt, t_final, required_images(t_final))?;
        let diff = wfp
            .values
            .iter()
            .zip(&reference.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst = worst.max(diff);
        parts.push(format!("M={m} {diff:.2e}"));
    }
    let (fast, t) = within_budget(start, 60.0);
    parts.push(t);
    verdict(worst <= 1e-9 && fast, format!("max density difference <= 1e-9: {}", parts.join(", ")))
}

/// Free-space projected march against the direct free-space march.
fn criterion_3() -> Result<Verdict> {
    let start = Instant::now();
    let (dt, p, t_final) = (0.01, 8, 4.0 * PI);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs = random_positions(&mut rng, 5, 0.05);
    let bs = (0..5).map(|_| rng.random_range(0.1..3.0)).collect();
    let user = SpringSet::new(xs, bs)?;
    let pulse = IncidentPulse::new(30.0, -2.0)?;
    let targets: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let times: Vec<f64> = (1..=40).map(|i| t_final * i as f64 / 40.0).collect();
    let map = DomainMap::fit(1.0, dt, 1e-12, 0.5)?;
    let cfg = WfpConfig::derive(1e-12, 0.5, map.t(dt), p, BoundaryMode::FreeSpace)?;
    let out = OutputSpec {
        xs: targets.iter().map(|&x| map.x(x)).collect(),
        ts: times.iter().map(|&t| map.t(t)).collect(),
        ..OutputSpec::default()
    };
    let res = march(
        &map.springs(&user)?,
        Excitation::Pulse(map.pulse(&pulse)?),
        &cfg,
        map.t(t_final),
        &out,
    )?;
    let data = IncidentData {
        springs: user.clone(),
        pulse,
    };
    let series = reference_march_free(&user, &data, p, dt, t_final)?;
    let snapped: Vec<f64> = res.field.ts.iter().map(|&t| map.t_user(t)).collect();
    let reference = eval_scattered_field(&series, &user, &targets, &snapped, BoundaryMode::FreeSpace, p)?;
    let diff = res
        .field
        .values
        .iter()
        .zip(&reference.values)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let (fast, t) = within_budget(start, 120.0);
    verdict(
        diff <= 1e-10 && reference.max_abs() > 0.05 && fast,
        format!(
            "M=5 field difference {diff:.2e} <= 1e-10 (field peak {:.2}); {t}",
            reference.max_abs()
        ),
    )
}

/// Truncation bounds on 10 random bandlimited instances, 5 tracked modes.
fn criterion_4() -> Result<Verdict> {
    let start = Instant::now();
    let eps = 1e-12;
    let mut pass = true;
    let mut slack = f64::INFINITY;
    let mut mode_slack = f64::INFINITY;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=8usize);
        let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dens = (0..m)
            .map(|_| GaussianDensity::new(rng.random_range(40.0..50.0), rng.random_range(1.0..2.0)))
            .collect::<wfp_core::Result<Vec<_>>>()?;
        let k0 = dens.iter().map(|d| gaussian_bandlimit(d.mu, eps)).fold(0.0, f64::max);
        let c = dens.iter().map(|d| d.l2_norm()).fold(0.0, f64::max);
        let k_big = 400;
        let cfg = WfpConfig::derive(eps, 0.25, PI / k_big as f64, 4, BoundaryMode::Periodic)?;
        let window = Window::new(cfg.delta, cfg.b);
        let engine = HistoryEngine::new(&window, &cfg, &xs);
        let k = k_big / 2;
        let modes: Vec<i64> = (0..5).map(|i| (k + 20 + 40 * i) as i64).collect();
        let steps = (3.5 / cfg.dt).ceil() as usize;
        let rec = record_prescribed(&engine, k, modes, cfg.dt, steps, |t, out| {
            for (o, d) in out.iter_mut().zip(&dens) {
                *o = d.value(t);
            }
        });
        let r = truncation_tail(&rec, k0, c, m, &window)?;
        pass &= r.holds() && r.per_mode.len() == 5;
        slack = slack.min(r.bound / r.measured.max(f64::MIN_POSITIVE));
        for (_, got, bound) in &r.per_mode {
            mode_slack = mode_slack.min(bound / got.max(f64::MIN_POSITIVE));
        }
    }
    let (fast, t) = within_budget(start, 120.0);
    verdict(
        pass && fast,
        format!("10 instances, K_big = 2K; smallest bound/measured {slack:.1e} summed, {mode_slack:.1e} per mode; {t}"),
    )
}

fn criterion_5() -> Result<Verdict> {
    let start = Instant::now();
    let cfg: StabilityConfig = config::load(&presets().join("stability.json"), false)?;
    let report = stability::run(&cfg, 1)?;
    let want = [
        ("m1_p1_decay", 50),
        ("m1_p2_decay", 4),
        ("m2_p1_roots", 20),
        ("m2_p2_bound", 100),
        ("m2_p2_order", 1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (check, cases) in want {
        let s = report.section(check);
        let ok = s.is_some_and(|s| s.cases == cases && s.passed == cases);
        pass &= ok;
        parts.push(format!(
            "{check} {}/{cases}",
            s.map_or(0, |s| s.passed)
        ));
    }
    let order = report
        .rows
        .iter()
        .find(|r| r.check == "m2_p2_order")
        .and_then(|r| r.observed_order);
    if let Some(o) = order {
        parts.push(format!("order {o:.3}"));
    }
    let (fast, t) = within_budget(start, 180.0);
    parts.push(t);
    verdict(pass && fast, parts.join(", "))
}

fn criterion_6() -> Result<Verdict> {
    let start = Instant::now();
    let cfg: TimingConfig = config::load(&presets().join("timing.json"), true)?;
    ensure!(cfg.counts == [1000, 10000, 100000], "timing preset counts {:?}", cfg.counts);
    let report = timing::run(&cfg, 1, |_| {})?;
    let e = report.exponent.unwrap_or(f64::NAN);
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "M={} ntyp {:.0} {:.2} ms ({:.0} spring-steps/s)",
                r.springs, r.ntyp, r.median_step_ms, r.throughput
            )
        })
        .collect();
    let (fast, t) = within_budget(start, 900.0);
    verdict(
        (0.9..=1.25).contains(&e) && fast,
        format!("exponent {e:.3} in [0.9, 1.25]; {}; {t}", rows.join(", ")),
    )
}

fn simulate_preset(name: &str, out: &Path) -> Result<()> {
    let cfg: SimulateConfig = config::load(&presets().join(name), false)?;
    simulate::write(&simulate::run(&cfg, 1)?, out)
}

fn spectra_of(run: &Path, text: serde_json::Value) -> Result<spectra::SpectraOutcome> {
    let mut v = text;
    v["run"] = run.to_string_lossy().into_owned().into();
    let cfg: SpectraConfig = config::parse(&v.to_string(), false)?;
    spectra::run(&cfg, Path::new("."))
}

fn preset_json(name: &str) -> Result<serde_json::Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(presets().join(name))?)?)
}

fn criterion_7() -> Result<Verdict> {
    let start = Instant::now();
    let tmp = tempfile::tempdir()?;
    simulate_preset("simulate_fabry_perot.json", tmp.path())?;
    let s = spectra_of(tmp.path(), preset_json("spectra_fabry_perot.json")?)?.summary;
    let mut multiples: Vec<usize> = s.matches.iter().map(|m| m.multiple).collect();
    multiples.sort();
    let close = s.matches.iter().all(|m| m.relative_offset <= 0.02);
    let oob = s.out_of_band_fraction.unwrap_or(f64::NAN);
    let offsets: Vec<String> = s
        .matches
        .iter()
        .map(|m| format!("{:.4} ({:.3}% from {} pi)", m.omega, 100.0 * m.relative_offset, m.multiple))
        .collect();
    let (fast, t) = within_budget(start, 60.0);
    verdict(
        multiples == [1, 2, 3] && close && oob <= 0.1 && fast,
        format!(
            "peaks {}; out-of-band {oob:.2e} of incident (<= 0.1); {t}",
            offsets.join(", ")
        ),
    )
}

fn two_figures(x: f64) -> f64 {
    let scale = 10f64.powf(x.abs().log10().floor() - 1.0);
    (x / scale).round() * scale
}

fn criterion_8() -> Result<Verdict> {
    let start = Instant::now();
    let dx = 4.0 / 150.0;
    let low = klein_gordon_cutoff((0.1 + 3.0) / 2.0, dx)?;
    let high = klein_gordon_cutoff((0.1 + 10.0) / 2.0, dx)?;
    let cutoffs = two_figures(low) == two_figures(7.6) && two_figures(high) == two_figures(13.8);
    let tmp = tempfile::tempdir()?;
    simulate_preset("simulate_kg_m150.json", tmp.path())?;
    let s = spectra_of(tmp.path(), preset_json("spectra_kg_m150.json")?)?.summary;
    let (fast, t) = within_budget(start, 300.0);
    verdict(
        cutoffs && s.transmitted_fraction <= 0.15 && fast,
        format!(
            "cutoffs {low:.2} and {high:.2} (7.6, 13.8); M=150 transmits {:.2e} of incident energy (<= 0.15); {t}",
            s.transmitted_fraction
        ),
    )
}

fn split_reconstruction() -> Result<f64> {
    let springs = SpringSet::new(vec![0.7, -2.9, -0.4, -0.35, 2.2], vec![1.0; 5])?;
    let dens = [(4.0, 3.2), (5.5, 4.1), (6.0, 3.6), (4.5, 4.8), (5.0, 3.0)]
        .iter()
        .map(|&(mu, t0)| GaussianDensity::new(mu, t0))
        .collect::<wfp_core::Result<Vec<_>>>()?;
    let cfg = WfpConfig::derive(1e-14, 0.5, PI / 400.0, 8, BoundaryMode::Periodic)?;
    let window = Window::new(cfg.delta, cfg.b);
    let order = SpringOrder::new(&springs);
    let engine = HistoryEngine::new(&window, &cfg, &order.positions);
    let mut state = engine.new_state();
    let mut hist = DensityHistory::new(springs.len(), cfg.m_max + 1);
    let targets = vec![0.7, -0.4, -0.37, 0.7 + 0.3 * cfg.delta, 1.5, 3.1, -3.1];
    let local = TargetEvaluator::new(&order, &targets, &cfg, &window);
    let plan = NufftPlan::new(&targets, cfg.k_max, cfg.eps);
    let sample = |t: f64| -> Vec<f64> {
        let caller: Vec<f64> = dens.iter().map(|d| d.value(t)).collect();
        let mut sorted = vec![0.0; caller.len()];
        order.to_sorted(&caller, &mut sorted);
        sorted
    };
    let mut worst: f64 = 0.0;
    let mut out = vec![0.0; targets.len()];
    for n in 0..1070 {
        engine.step(&mut state, &sample(n as f64 * cfg.dt));
        let t = (n + 1) as f64 * cfg.dt;
        hist.push(&sample(t));
        if (n + 1) % 107 != 0 {
            continue;
        }
        local.eval(&hist, &mut out);
        for ((&x, &ul), uh) in targets.iter().zip(&out).zip(eval_history(&plan, &state)) {
            worst = worst.max((ul + uh - slp_gaussian_periodic(&springs, &dens, x, t)).abs());
        }
    }
    Ok(worst)
}

fn criterion_9() -> Result<Verdict> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = 1e-12;
    let k_max = 200;
    let pts: Vec<f64> = (0..300).map(|_| rng.random_range(-PI..PI)).collect();
    let c: Vec<Complex64> = (0..300)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let fast1 = nufft1(&pts, &c, k_max, eps);
    let slow1 = nudft1_direct(&pts, &c, k_max);
    let norm1: f64 = c.iter().map(|v| v.norm()).sum();
    let e1 = fast1
        .as_slice()
        .iter()
        .zip(slow1.as_slice())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()))
        / norm1;
    let modes = ModeVector::from_vec(
        k_max,
        (0..2 * k_max + 1)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    );
    let fast2 = nufft2(&pts, &modes, eps);
    let slow2 = nudft2_direct(&pts, &modes);
    let norm2: f64 = modes.as_slice().iter().map(|v| v.norm()).sum();
    let e2 = fast2
        .iter()
        .zip(&slow2)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()))
        / norm2;
    let nufft_ok = e1 <= 10.0 * eps && e2 <= 10.0 * eps;

    // <type1 c, a> = <c, type2 a> with the matching sign conventions
    let lhs: Complex64 = fast1
        .as_slice()
        .iter()
        .zip(modes.as_slice())
        .map(|(f, a)| f * a.conj())
        .sum();
    let rhs: Complex64 = c.iter().zip(&fast2).map(|(ci, u)| ci * u.conj()).sum();
    let adjoint = (lhs - rhs).norm() / lhs.norm().max(rhs.norm());
    let adjoint_ok = adjoint <= 1e-10;

    let w = Window::new(0.3, (1.0 / eps).ln());
    let hat0 = w.hat_phi_prime(0.0);
    let window_ok = (hat0 - Complex64::new(1.0, 0.0)).norm() <= 1e-13;

    let kk = 64usize;
    let dt = PI / 64.0;
    let rot = Rotation::new(kk, dt);
    let mut st = HistoryState::new(kk, 4);
    for k in -(kk as i64)..=kk as i64 {
        st.alpha.set(k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        st.alpha_prime.set(k, Complex64::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)));
    }
    let energy = |s: &HistoryState, k: i64| {
        s.alpha.get(k).norm_sqr() + s.alpha_prime.get(k).norm_sqr() / (k * k) as f64
    };
    let e0: Vec<f64> = (1..=kk as i64).map(|k| energy(&st, k)).collect();
    let zero = ModeVector::zeros(kk);
    for _ in 0..1000 {
        advance_alpha(&mut st, &rot, &zero, &zero);
    }
    let drift = (1..=kk as i64)
        .map(|k| (energy(&st, k) - e0[k as usize - 1]).abs() / e0[k as usize - 1])
        .fold(0.0, f64::max);
    let rotation_ok = drift <= 1e-13;

    let cfg = WfpConfig::derive(1e-12, 0.5, 0.006, 6, BoundaryMode::Periodic)?;
    let win = Window::new(cfg.delta, cfg.b);
    let xs = random_positions(&mut rng, 20, 1e-4).iter().map(|x| 0.3 * x).collect();
    let bs = (0..20).map(|_| rng.random_range(0.1..3.0)).collect();
    let springs = SpringSet::new(xs, bs)?;
    let ops = LocalOperators::build(&springs, &cfg, &win)?;
    let mut hist = DensityHistory::new(20, cfg.m_max + 1);
    for _ in 0..=cfg.m_max {
        let v: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        hist.push(&v);
    }
    let mut fast = vec![0.0; 20];
    ops.apply_explicit(&hist, &mut fast);
    let quad = LocalQuadrature::new(&cfg, &win);
    let o = &ops.order;
    let mut local_gap: f64 = 0.0;
    for j in 0..20 {
        let mut slow = 0.0;
        for l in 0..20 {
            let table = quad.weights(periodic_dist(o.positions[j], o.positions[l]));
            for m in 1..=cfg.m_max {
                slow += 0.5 * o.strengths[j] * table.q(m) * hist.slots(l)[m - 1];
            }
        }
        local_gap = local_gap.max((fast[j] - slow).abs());
    }
    let local_ok = local_gap <= 1e-13;

    let split = split_reconstruction()?;
    let split_ok = split <= 1e-10;
    let (quick, t) = within_budget(start, 120.0);
    verdict(
        nufft_ok && adjoint_ok && window_ok && rotation_ok && local_ok && split_ok && quick,
        format!(
            "nufft {e1:.1e}/{e2:.1e} (<= 1e-11), adjoint {adjoint:.1e}, hat phi'(0) - 1 = {:.1e}, \
             rotation drift {drift:.1e}, local vs loop {local_gap:.1e}, split {split:.1e} (<= 1e-10); {t}",
            (hat0 - 1.0).norm()
        ),
    )
}

fn main() {
    let checks: [(u32, &str, fn() -> Result<Verdict>); 9] = [
        (1, "manufactured convergence", criterion_1),
        (2, "periodic oracle equivalence", criterion_2),
        (3, "free-space radiation condition", criterion_3),
        (4, "truncation tail bound", criterion_4),
        (5, "stability laboratory", criterion_5),
        (6, "cost scaling", criterion_6),
        (7, "Fabry-Perot filtering", criterion_7),
        (8, "Klein-Gordon cutoff", criterion_8),
        (9, "property suites", criterion_9),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut passed = 0;
    let mut ran = 0;
    let mut broken = Vec::new();
    for (n, name, check) in checks {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        ran += 1;
        match check() {
            Ok(v) => {
                passed += v.pass as usize;
                println!(
                    "{} criterion {n} ({name}): {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.detail
                );
            }
            Err(e) => {
                println!("FAIL criterion {n} ({name}): could not run: {e:#}");
                broken.push(n);
            }
        }
    }
    println!("acceptance: {passed}/{ran} criteria pass");
    if !broken.is_empty() {
        eprintln!("criteria {broken:?} did not run");
        std::process::exit(1);
    }
}
