//! Space-time samples of a field and their on-disk formats.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WfpError};

/// Field values on a tensor grid of times and positions, row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

/// Sidecar describing a raw binary field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub nt: usize,
    pub nx: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub layout: String,
}

impl SpaceTimeField {
    pub fn zeros(xs: Vec<f64>, ts: Vec<f64>) -> Self {
        let values = vec![0.0; xs.len() * ts.len()];
        SpaceTimeField { xs, ts, values }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    pub fn get(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.xs.len() + ix]
    }

    pub fn set(&mut self, it: usize, ix: usize, v: f64) {
        let nx = self.xs.len();
        self.values[it * nx + ix] = v;
    }

    pub fn row(&self, it: usize) -> &[f64] {
        let nx = self.xs.len();
        &self.values[it * nx..(it + 1) * nx]
    }

    pub fn row_mut(&mut self, it: usize) -> &mut [f64] {
        let nx = self.xs.len();
        &mut self.values[it * nx..(it + 1) * nx]
    }

    /// Time series at position index `ix`.
    pub fn column(&self, ix: usize) -> Vec<f64> {
        (0..self.nt()).map(|it| self.get(it, ix)).collect()
    }

    pub fn same_grid(&self, other: &SpaceTimeField) -> bool {
        self.xs == other.xs && self.ts == other.ts
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV: header `t,x_0,x_1,...`, then one row per time.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        write!(out, "t")?;
        for x in &self.xs {
            write!(out, ",{x:?}")?;
        }
        writeln!(out)?;
        for (it, t) in self.ts.iter().enumerate() {
            write!(out, "{t:?}")?;
            for v in self.row(it) {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| WfpError::Format("empty field CSV".into()))??;
        let mut cells = header.split(',');
        if cells.next() != Some("t") {
            return Err(WfpError::Format(
                "field CSV header must start with `t`".into(),
            ));
        }
        let xs = cells.map(parse_f64).collect::<Result<Vec<_>>>()?;
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
            if row.len() != xs.len() + 1 {
                return Err(WfpError::Format(format!(
                    "row has {} cells, expected {}",
                    row.len(),
                    xs.len() + 1
                )));
            }
            ts.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        Ok(SpaceTimeField { xs, ts, values })
    }

    pub fn sidecar(&self) -> FieldSidecar {
        let ext = |v: &[f64]| {
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (t_min, t_max) = ext(&self.ts);
        let (x_min, x_max) = ext(&self.xs);
        FieldSidecar {
            nt: self.nt(),
            nx: self.nx(),
            t_min,
            t_max,
            x_min,
            x_max,
            xs: self.xs.clone(),
            ts: self.ts.clone(),
            layout: "row-major [t][x], little-endian f64".into(),
        }
    }

    /// Raw little-endian values to `<stem>.bin` plus `<stem>.json`.
    pub fn write_binary(&self, stem: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(stem.with_extension("bin"), bytes)?;
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| WfpError::Format(e.to_string()))?;
        std::fs::write(stem.with_extension("json"), json)?;
        Ok(())
    }

    pub fn read_binary(stem: &Path) -> Result<Self> {
        let meta: FieldSidecar =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)
                .map_err(|e| WfpError::Format(e.to_string()))?;
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        if bytes.len() != 8 * meta.nt * meta.nx {
            return Err(WfpError::Format(
                "binary size does not match sidecar".into(),
            ));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SpaceTimeField {
            xs: meta.xs,
            ts: meta.ts,
            values,
        })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| WfpError::Format(format!("not a number: {s:?}")))
}

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
