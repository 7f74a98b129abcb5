//! Incident and transmitted spectra at a probe of a finished run.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use wfp_core::analysis::{windowed_spectrum_padded, Spectrum, Taper};
use wfp_core::IncidentPulse;

use crate::config::SpectraConfig;
use crate::output::{create_dir, read_field, write_json};
use crate::simulate::SimulateSummary;
use crate::Invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakMatch {
    pub omega: f64,
    pub magnitude: f64,
    /// Nearest multiple `n` of `pi / L` and the relative offset from it.
    pub multiple: usize,
    pub relative_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub probe_x: f64,
    pub samples: usize,
    pub sample_dt: f64,
    pub taper_fraction: f64,
    pub taper_b: f64,
    pub pad: usize,
    pub incident_energy: f64,
    pub transmitted_energy: f64,
    pub transmitted_fraction: f64,
    /// Largest transmitted peaks, magnitudes relative to the incident peak.
    pub peaks: Vec<(f64, f64)>,
    pub cavity: Option<f64>,
    pub matches: Vec<PeakMatch>,
    pub out_of_band_energy: Option<f64>,
    /// Out-of-band transmitted energy over incident energy.
    pub out_of_band_fraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectraOutcome {
    pub summary: SpectraSummary,
    pub incident: Spectrum,
    pub transmitted: Spectrum,
}

/// Energy of `s` outside the bands `|ω - nπ/L| <= fraction π/L`, `n >= 1`.
pub fn out_of_band(s: &Spectrum, cavity: f64, fraction: f64) -> f64 {
    let base = PI / cavity;
    let top = s.omega.last().copied().unwrap_or(0.0);
    let mut inside = 0.0;
    let mut n = 1;
    while (n as f64 - fraction) * base < top {
        let c = n as f64 * base;
        inside += s.energy_between(c - fraction * base, c + fraction * base);
        n += 1;
    }
    s.energy() - inside
}

pub fn run(cfg: &SpectraConfig, base: &Path) -> Result<SpectraOutcome> {
    let dir = base.join(&cfg.run);
    let summary: SimulateSummary = serde_json::from_str(
        &std::fs::read_to_string(dir.join("summary.json"))
            .map_err(|e| Invalid(format!("no simulate run in {}: {e}", dir.display())))?,
    )
    .map_err(|e| Invalid(format!("unreadable run summary: {e}")))?;
    if !summary.total {
        return Err(Invalid("transmitted spectra need a total-field run".into()).into());
    }
    if cfg.probe >= summary.probes.len() {
        return Err(Invalid(format!(
            "probe {} requested but the run recorded {} probe signals",
            cfg.probe,
            summary.probes.len()
        ))
        .into());
    }
    if !(cfg.taper_fraction > 0.0 && cfg.taper_fraction <= 0.5) {
        return Err(Invalid(format!("taper fraction {} outside (0, 0.5]", cfg.taper_fraction)).into());
    }
    if !(cfg.peak_separation >= 0.0) {
        return Err(Invalid("peak_separation must be nonnegative".into()).into());
    }
    if !(cfg.taper_b > 0.0 && cfg.taper_b.is_finite()) {
        return Err(Invalid(format!("taper shape {} must be positive", cfg.taper_b)).into());
    }
    let probes = read_field(&dir.join("probes.csv"))?;
    if probes.nt() < 8 {
        return Err(Invalid("probe signal too short for a spectrum".into()).into());
    }
    let x = probes.xs[cfg.probe];
    let signal = probes.column(cfg.probe);
    let dt = probes.ts[1] - probes.ts[0];
    let pulse = IncidentPulse::new(summary.pulse.mu, summary.pulse.t0)?;
    let incident_signal: Vec<f64> = probes.ts.iter().map(|&t| pulse.field(x, t)).collect();
    let taper = Taper {
        fraction: cfg.taper_fraction,
        b: cfg.taper_b,
    };
    let inc = windowed_spectrum_padded(&incident_signal, dt, &taper, cfg.pad);
    let tra = windowed_spectrum_padded(&signal, dt, &taper, cfg.pad);
    let incident = inc.normalized_by(&inc);
    let transmitted = tra.normalized_by(&inc);
    let (ei, et) = (incident.energy(), transmitted.energy());
    let peaks = transmitted.separated_peaks(cfg.peaks, cfg.peak_separation);
    let matches = match cfg.cavity {
        Some(l) => peaks
            .iter()
            .map(|&(w, m)| {
                let n = (w * l / PI).round().max(1.0);
                PeakMatch {
                    omega: w,
                    magnitude: m,
                    multiple: n as usize,
                    relative_offset: (w - n * PI / l).abs() / (n * PI / l),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let oob = cfg.cavity.map(|l| out_of_band(&transmitted, l, cfg.band_fraction));
    Ok(SpectraOutcome {
        summary: SpectraSummary {
            probe_x: x,
            samples: signal.len(),
            sample_dt: dt,
            taper_fraction: cfg.taper_fraction,
            taper_b: cfg.taper_b,
            pad: cfg.pad,
            incident_energy: ei,
            transmitted_energy: et,
            transmitted_fraction: et / ei,
            peaks,
            cavity: cfg.cavity,
            matches,
            out_of_band_energy: oob,
            out_of_band_fraction: oob.map(|e| e / ei),
        },
        incident,
        transmitted,
    })
}

pub fn write(outcome: &SpectraOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (name, s) in [
        ("incident_spectrum.csv", &outcome.incident),
        ("transmitted_spectrum.csv", &outcome.transmitted),
    ] {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        s.write_csv(&mut f)?;
        std::io::Write::flush(&mut f)?;
    }
    write_json(&dir.join("spectra.json"), &outcome.summary)
}
