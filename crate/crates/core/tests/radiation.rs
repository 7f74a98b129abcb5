//! Free-space marching with the radiation projection against the direct
//! free-space march.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wfp_core::config::{BoundaryMode, WfpConfig};
use wfp_core::marcher::{simulate, DomainMap, Excitation, OutputSpec};
use wfp_core::potential::{
    eval_scattered_field, reference_march_free, IncidentData, IncidentPulse, SpringSet,
};

fn springs(seed: u64, m: usize) -> SpringSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < m {
        let x = rng.random_range(-1.0..1.0);
        if xs.iter().all(|&y: &f64| (x - y).abs() > 0.05) {
            xs.push(x);
        }
    }
    let bs = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
    SpringSet::new(xs, bs).unwrap()
}

struct Run {
    wfp: Vec<f64>,
    reference: Vec<f64>,
    peak: f64,
}

fn run(bc: BoundaryMode, t_final: f64) -> Run {
    let dt = 0.01;
    let p = 8;
    let user = springs(3, 5);
    let pulse = IncidentPulse::new(30.0, -2.0).unwrap();
    let xs: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let ts: Vec<f64> = (1..=40).map(|i| t_final * i as f64 / 40.0).collect();

    let map = DomainMap::fit(1.0, dt, 1e-12, 0.5).unwrap();
    let cfg = WfpConfig::derive(1e-12, 0.5, map.t(dt), p, bc).unwrap();
    let out = OutputSpec {
        xs: xs.iter().map(|&x| map.x(x)).collect(),
        ts: ts.iter().map(|&t| map.t(t)).collect(),
        total: false,
        keep_densities: false,
        ..OutputSpec::default()
    };
    let res = simulate(
        &map.springs(&user).unwrap(),
        Excitation::Pulse(map.pulse(&pulse).unwrap()),
        &cfg,
        map.t(t_final),
        &out,
    )
    .unwrap();

    let data = IncidentData {
        springs: user.clone(),
        pulse,
    };
    let series = reference_march_free(&user, &data, p, dt, t_final).unwrap();
    let snapped: Vec<f64> = res.field.ts.iter().map(|&t| map.t_user(t)).collect();
    let reference =
        eval_scattered_field(&series, &user, &xs, &snapped, BoundaryMode::FreeSpace, p).unwrap();
    Run {
        peak: reference.max_abs(),
        wfp: res.field.values,
        reference: reference.values,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn projected_march_matches_free_space_reference() {
    let r = run(BoundaryMode::FreeSpace, 4.0 * PI);
    let err = max_diff(&r.wfp, &r.reference);
    eprintln!(
        "free-space field difference {err:.3e} (peak {:.3e})",
        r.peak
    );
    assert!(r.peak > 0.05);
    assert!(err <= 1e-10, "difference {err:e}");
}

#[test]
fn periodic_march_sees_returning_images() {
    let r = run(BoundaryMode::Periodic, 4.0 * PI);
    let err = max_diff(&r.wfp, &r.reference);
    eprintln!("periodic field difference {err:.3e}");
    assert!(
        err > 1e-3,
        "images should spoil the free-space field, got {err:e}"
    );
}
