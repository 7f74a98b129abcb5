//! Neighbour classification, the sparse local operators `S` and `C^(m)`,
//! and local potential evaluation at springs and arbitrary targets.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::config::WfpConfig;
use crate::error::{Result, WfpError};
use crate::potential::SpringSet;
use crate::quadrature::{LocalQuadrature, LocalWeightTable};
use crate::window::Window;

/// Distance from `x` to the nearest periodic image of `xj`.
pub fn periodic_dist(x: f64, xj: f64) -> f64 {
    ((x - xj + PI).rem_euclid(2.0 * PI) - PI).abs()
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Springs sorted by wrapped position, rotated so the largest periodic gap
/// sits between the last and first entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringOrder {
    /// `perm[s]` is the caller's index of sorted spring `s`.
    pub perm: Vec<usize>,
    pub inverse: Vec<usize>,
    pub positions: Vec<f64>,
    pub strengths: Vec<f64>,
    /// Positions ascending in `[-π, π)` with their sorted index, for
    /// binary search.
    ascending: Vec<(f64, usize)>,
}

impl SpringOrder {
    pub fn new(springs: &SpringSet) -> Self {
        let m = springs.len();
        let mut idx: Vec<usize> = (0..m).collect();
        let w: Vec<f64> = springs.positions().iter().map(|&x| wrap(x)).collect();
        idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
        let mut shift = 0;
        if m > 1 {
            let mut best = w[idx[0]] + 2.0 * PI - w[idx[m - 1]];
            for i in 0..m - 1 {
                let gap = w[idx[i + 1]] - w[idx[i]];
                if gap > best {
                    best = gap;
                    shift = i + 1;
                }
            }
        }
        idx.rotate_left(shift);
        let mut inverse = vec![0; m];
        for (s, &o) in idx.iter().enumerate() {
            inverse[o] = s;
        }
        let positions: Vec<f64> = idx.iter().map(|&o| w[o]).collect();
        let strengths = idx.iter().map(|&o| springs.strengths()[o]).collect();
        let mut ascending: Vec<(f64, usize)> =
            positions.iter().enumerate().map(|(s, &x)| (x, s)).collect();
        ascending.sort_by(|a, b| a.0.total_cmp(&b.0));
        SpringOrder {
            perm: idx,
            inverse,
            positions,
            strengths,
            ascending,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Caller order to sorted order.
    pub fn to_sorted(&self, values: &[f64], out: &mut [f64]) {
        for (s, &o) in self.perm.iter().enumerate() {
            out[s] = values[o];
        }
    }

    /// Sorted order to caller order.
    pub fn to_caller(&self, values: &[f64], out: &mut [f64]) {
        for (s, &o) in self.perm.iter().enumerate() {
            out[o] = values[s];
        }
    }

    /// Sorted indices with periodic distance to `x` below `radius`
    /// (`radius < π`), with those distances.
    pub fn within(&self, x: f64, radius: f64) -> Vec<(usize, f64)> {
        let m = self.ascending.len();
        let mut out = Vec::new();
        if m == 0 {
            return out;
        }
        let x = wrap(x);
        // Scan up and down from the insertion point, wrapping cyclically.
        let start = self.ascending.partition_point(|e| e.0 < x);
        for k in 0..m {
            let (pos, s) = self.ascending[(start + k) % m];
            let d = periodic_dist(x, pos);
            if d >= radius {
                break;
            }
            out.push((s, d));
        }
        for k in 1..=m {
            let (pos, s) = self.ascending[(start + m - k) % m];
            let d = periodic_dist(x, pos);
            if d >= radius {
                break;
            }
            out.push((s, d));
        }
        out.sort_by_key(|e| e.0);
        out.dedup_by_key(|e| e.0);
        out
    }
}

/// Nearby (`d < Δt`) and intermediate (`Δt <= d < δ`) springs of one target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborSets {
    pub nearby: Vec<(usize, f64)>,
    pub intermediate: Vec<(usize, f64)>,
}

/// Per-target neighbour sets, indices in sorted spring order.
pub fn classify_neighbors(
    order: &SpringOrder,
    targets: &[f64],
    cfg: &WfpConfig,
) -> Vec<NeighborSets> {
    targets
        .iter()
        .map(|&x| {
            let mut sets = NeighborSets::default();
            for (s, d) in order.within(x, cfg.delta) {
                if d < cfg.dt {
                    sets.nearby.push((s, d));
                } else {
                    sets.intermediate.push((s, d));
                }
            }
            sets
        })
        .collect()
}

/// Last `depth` density vectors, newest first, stored per spring in a
/// doubled ring so each spring's history is one contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistory {
    springs: usize,
    depth: usize,
    head: usize,
    buf: Vec<f64>,
    pub n: usize,
}

impl DensityHistory {
    pub fn new(springs: usize, depth: usize) -> Self {
        DensityHistory {
            springs,
            depth,
            head: 0,
            buf: vec![0.0; springs * 2 * depth],
            n: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn springs(&self) -> usize {
        self.springs
    }

    pub fn push(&mut self, sigma: &[f64]) {
        let d = self.depth;
        self.head = (self.head + d - 1) % d;
        for (l, &v) in sigma.iter().enumerate() {
            let base = l * 2 * d;
            self.buf[base + self.head] = v;
            self.buf[base + self.head + d] = v;
        }
        self.n += 1;
    }

    /// Spring `l`'s history, slot 0 newest.
    pub fn slots(&self, l: usize) -> &[f64] {
        let base = l * 2 * self.depth + self.head;
        &self.buf[base..base + self.depth]
    }

    pub fn newest(&self) -> Vec<f64> {
        (0..self.springs).map(|l| self.slots(l)[0]).collect()
    }

    pub fn storage_len(&self) -> usize {
        self.buf.len()
    }

    /// Little-endian snapshot: springs, depth, n, then slots newest first.
    pub fn write_to(&self, out: &mut impl std::io::Write) -> Result<()> {
        for v in [self.springs, self.depth, self.n] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for l in 0..self.springs {
            for v in self.slots(l) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl std::io::Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut dyn std::io::Read| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let springs = next(input)? as usize;
        let depth = next(input)? as usize;
        let n = next(input)? as usize;
        if depth == 0 || springs.checked_mul(depth).is_none_or(|c| c > 1 << 34) {
            return Err(WfpError::Format(
                "implausible density history header".into(),
            ));
        }
        let mut hist = DensityHistory::new(springs, depth);
        hist.n = n;
        for l in 0..springs {
            for s in 0..depth {
                let v = f64::from_bits(next(input)?);
                hist.buf[l * 2 * depth + s] = v;
                hist.buf[l * 2 * depth + s + depth] = v;
            }
        }
        Ok(hist)
    }
}

/// Nonzero run of a weight table: `Q_m` for `m = first..first + len`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Run {
    first: u32,
    len: u32,
    offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct WeightStore {
    runs: Vec<Run>,
    weights: Vec<f64>,
}

impl WeightStore {
    /// Store `scale * Q_m` for `m >= m_lo`; returns the run index.
    fn push(&mut self, table: &LocalWeightTable, m_lo: usize, scale: f64) -> Option<usize> {
        let (a, b) = table.support()?;
        let a = a.max(m_lo);
        if a > b {
            return None;
        }
        let offset = self.weights.len();
        self.weights.extend((a..=b).map(|m| scale * table.q(m)));
        self.runs.push(Run {
            first: a as u32,
            len: (b - a + 1) as u32,
            offset,
        });
        Some(self.runs.len() - 1)
    }

    fn run(&self, i: usize) -> (usize, &[f64]) {
        let r = self.runs[i];
        (
            r.first as usize,
            &self.weights[r.offset..r.offset + r.len as usize],
        )
    }
}

/// Dot product of a weight run starting at lag `first` with a history whose
/// slot 0 holds lag `lag0`.
#[inline]
fn run_dot(first: usize, w: &[f64], slots: &[f64], lag0: usize) -> f64 {
    let s = &slots[first - lag0..first - lag0 + w.len()];
    w.iter().zip(s).map(|(a, b)| a * b).sum()
}

/// Banded LU without pivoting, rows stored as `[i - kl, i + ku]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    a: Vec<f64>,
}

impl BandedLu {
    /// Factor the band matrix given by `entries` (row, col, value) plus
    /// the identity. Returns `None` on a small pivot.
    fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, f64)]) -> Option<Self> {
        let w = kl + ku + 1;
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            a[i * w + kl] = 1.0;
        }
        for &(i, j, v) in entries {
            a[i * w + j + kl - i] += v;
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let piv = a[k * w + kl];
            if !(piv.abs() >= 1e-14 * scale) {
                return None;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                let l = a[i * w + k + kl - i] / piv;
                a[i * w + k + kl - i] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=(k + ku).min(n - 1) {
                    a[i * w + j + kl - i] -= l * a[k * w + j + kl - k];
                }
            }
        }
        Some(BandedLu { n, kl, ku, a })
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(kl)..i {
                s -= self.a[i * w + j + kl - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                s -= self.a[i * w + j + kl - i] * b[j];
            }
            b[i] = s / self.a[i * w + kl];
        }
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Identity,
    Banded(BandedLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Largest `M` for which a dense factorization is an acceptable fallback.
const DENSE_LIMIT: usize = 4000;

/// One unordered pair of springs within `δ` (sorted indices, `j <= l`).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    j: u32,
    l: u32,
    dist: f64,
    run: usize,
}

/// The implicit matrix `S` (factorized as `I + S`) and the explicit stack
/// `C^(m)`, all in sorted spring order. Weights are stored once per
/// unordered pair without `β`.
#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub order: SpringOrder,
    pairs: Vec<Pair>,
    store: WeightStore,
    s_entries: Vec<(usize, usize, f64)>,
    factor: Factor,
    half_beta: Vec<f64>,
    m_max: usize,
    neighbor_links: usize,
}

impl LocalOperators {
    pub fn build(springs: &SpringSet, cfg: &WfpConfig, window: &Window) -> Result<Self> {
        let quad = LocalQuadrature::new(cfg, window);
        let order = SpringOrder::new(springs);
        let m = order.len();
        let half_beta: Vec<f64> = order.strengths.iter().map(|b| 0.5 * b).collect();
        let mut pairs = Vec::new();
        let mut store = WeightStore::default();
        let mut s_entries = Vec::new();
        let mut banded = true;
        let mut neighbor_links = 0usize;
        let (mut kl, mut ku) = (0usize, 0usize);
        for j in 0..m {
            // Forward cyclic scan finds each unordered pair exactly once
            // because δ < π.
            for k in 0..m {
                let l = (j + k) % m;
                let fwd = (order.positions[l] - order.positions[j]).rem_euclid(2.0 * PI);
                if k > 0 && fwd >= cfg.delta {
                    break;
                }
                let dist = if k == 0 { 0.0 } else { fwd.min(2.0 * PI - fwd) };
                if k > 0 {
                    neighbor_links += 2;
                }
                let table = quad.weights(dist);
                if dist < cfg.dt {
                    let q0 = table.q(0);
                    s_entries.push((j, l, half_beta[j] * q0));
                    if l != j {
                        s_entries.push((l, j, half_beta[l] * q0));
                        if l < j {
                            banded = false;
                        }
                        kl = kl.max(l.abs_diff(j));
                        ku = ku.max(l.abs_diff(j));
                    }
                }
                if let Some(run) = store.push(&table, 1, 1.0) {
                    let (a, b) = if j <= l { (j, l) } else { (l, j) };
                    pairs.push(Pair {
                        j: a as u32,
                        l: b as u32,
                        dist,
                        run,
                    });
                }
            }
        }
        let factor = if s_entries.iter().all(|e| e.2 == 0.0) {
            Factor::Identity
        } else {
            let band = if banded {
                BandedLu::factor(m, kl, ku, &s_entries)
            } else {
                None
            };
            match band {
                Some(lu) => Factor::Banded(lu),
                None if m <= DENSE_LIMIT => {
                    let mut a = DMatrix::<f64>::identity(m, m);
                    for &(i, j, v) in &s_entries {
                        a[(i, j)] += v;
                    }
                    let lu = a.lu();
                    if lu.u().diagonal().iter().any(|d| d.abs() < 1e-14) {
                        return Err(WfpError::Singular("I + S".into()));
                    }
                    Factor::Dense(lu)
                }
                None => {
                    return Err(WfpError::Singular(
                        "I + S has a vanishing pivot in banded form".into(),
                    ))
                }
            }
        };
        Ok(LocalOperators {
            order,
            pairs,
            store,
            s_entries,
            factor,
            half_beta,
            m_max: cfg.m_max,
            neighbor_links,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Mean number of other springs within `δ` of each spring.
    pub fn neighbor_mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.neighbor_links as f64 / self.len() as f64
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn stored_weights(&self) -> usize {
        self.store.weights.len()
    }

    /// Nonzero entries of `S` as (row, col, value), sorted order.
    pub fn s_entries(&self) -> &[(usize, usize, f64)] {
        &self.s_entries
    }

    pub fn bandwidth(&self) -> Option<(usize, usize)> {
        match &self.factor {
            Factor::Identity => Some((0, 0)),
            Factor::Banded(lu) => Some(lu.bandwidth()),
            Factor::Dense(_) => None,
        }
    }

    /// `out_j = Σ_l Σ_{m>=1} C^(m)_{jl} σ_l^{n+1-m}` where slot `s` of the
    /// history holds `σ^{n-s}`.
    pub fn apply_explicit(&self, hist: &DensityHistory, out: &mut [f64]) {
        debug_assert!(hist.depth() >= self.m_max);
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in &self.pairs {
            let (first, w) = self.store.run(p.run);
            let (j, l) = (p.j as usize, p.l as usize);
            out[j] += self.half_beta[j] * run_dot(first, w, hist.slots(l), 1);
            if j != l {
                out[l] += self.half_beta[l] * run_dot(first, w, hist.slots(j), 1);
            }
        }
    }

    /// Solve `(I + S) x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        match &self.factor {
            Factor::Identity => {}
            Factor::Banded(lu) => lu.solve(b),
            Factor::Dense(lu) => {
                let rhs = nalgebra::DVector::from_column_slice(b);
                let x = lu.solve(&rhs).expect("factorization checked at build");
                b.copy_from_slice(x.as_slice());
            }
        }
    }

    /// `(I + S) x`.
    pub fn apply_implicit(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        for &(i, j, v) in &self.s_entries {
            out[i] += v * x[j];
        }
    }
}

/// Precomputed `½ Q_m` tables from springs to a fixed set of targets.
#[derive(Debug, Clone)]
pub struct TargetEvaluator {
    links: Vec<Vec<(usize, usize)>>,
    store: WeightStore,
}

impl TargetEvaluator {
    pub fn new(order: &SpringOrder, targets: &[f64], cfg: &WfpConfig, window: &Window) -> Self {
        let quad = LocalQuadrature::new(cfg, window);
        let mut store = WeightStore::default();
        let links = targets
            .iter()
            .map(|&x| {
                order
                    .within(x, cfg.delta)
                    .into_iter()
                    .filter_map(|(s, d)| store.push(&quad.weights(d), 0, 0.5).map(|r| (s, r)))
                    .collect()
            })
            .collect();
        TargetEvaluator { links, store }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Local potential `u_L(x, t_{n+1})` after `σ^{n+1}` was pushed, so
    /// slot `s` holds `σ^{n+1-s}`.
    pub fn eval(&self, hist: &DensityHistory, out: &mut [f64]) {
        for (o, links) in out.iter_mut().zip(&self.links) {
            *o = links
                .iter()
                .map(|&(s, r)| {
                    let (first, w) = self.store.run(r);
                    run_dot(first, w, hist.slots(s), 0)
                })
                .sum();
        }
    }
}

/// One-shot local potential at `targets` (see [`TargetEvaluator::eval`]).
pub fn eval_local_at_targets(
    targets: &[f64],
    hist: &DensityHistory,
    order: &SpringOrder,
    cfg: &WfpConfig,
    window: &Window,
) -> Vec<f64> {
    let ev = TargetEvaluator::new(order, targets, cfg, window);
    let mut out = vec![0.0; targets.len()];
    ev.eval(hist, &mut out);
    out
}
