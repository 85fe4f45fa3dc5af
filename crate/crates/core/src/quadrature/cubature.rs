//! Adaptive Genz–Malik cubature (degree 7 with an embedded degree-5 rule).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::Locus;
use crate::numeric::NeumaierSum;

/// Cells split per refinement round; fixed so results do not depend on the
/// thread count.
const BATCH: usize = 64;

const LAMBDA2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const LAMBDA4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const LAMBDA5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CubatureConfig {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_cells: usize,
}

impl Default for CubatureConfig {
    fn default() -> Self {
        CubatureConfig { tol_rel: 1e-3, tol_abs: 0.0, max_cells: 2_000_000 }
    }
}

/// How a cell relates to the registered loci.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Regular,
    /// Touches a singular locus: its error is at least its own contribution.
    Singular,
    /// Straddles a feature narrower than the cell: must be split.
    ForceSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CubatureOutcome {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
    pub converged: bool,
    /// A cell at the resolution floor still produced non-finite values.
    pub divergent: bool,
    pub singular_cells: usize,
    /// Leaves whose nodes hit non-finite values; excluded from `value`.
    pub nonfinite_cells: usize,
}

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    err: f64,
    axis: usize,
    forced: bool,
    singular: bool,
    id: u64,
}

impl Cell {
    fn priority(&self) -> f64 {
        if self.forced {
            f64::INFINITY
        } else {
            self.err
        }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority().total_cmp(&other.priority()).then_with(|| other.id.cmp(&self.id))
    }
}

/// Degree-7 estimate, degree-5 error, preferred split axis and whether any
/// node value was non-finite.
fn genz_malik<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64]) -> (f64, f64, usize, bool) {
    let n = lo.len();
    let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let w: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let nf = n as f64;
    let vol: f64 = w.iter().map(|v| 2.0 * v).product();
    let mut bad = false;
    let mut eval = |p: &[f64]| {
        let v = f(p);
        if !v.is_finite() {
            bad = true;
        }
        v
    };
    let f1 = eval(&c);
    let mut p = c.clone();
    let (mut s2, mut s3, mut s4, mut s5) = (0.0, 0.0, 0.0, 0.0);
    let mut diffs = vec![0.0; n];
    let mut clean_axes = vec![false; n];
    for j in 0..n {
        p[j] = c[j] + LAMBDA2 * w[j];
        let a = eval(&p);
        p[j] = c[j] - LAMBDA2 * w[j];
        let b = eval(&p);
        p[j] = c[j] + LAMBDA4 * w[j];
        let cc = eval(&p);
        p[j] = c[j] - LAMBDA4 * w[j];
        let d = eval(&p);
        p[j] = c[j];
        clean_axes[j] = [a, b, cc, d].iter().all(|v| v.is_finite());
        s2 += a + b;
        s3 += cc + d;
        let diff = ((a + b - 2.0 * f1) - (cc + d - 2.0 * f1) / 7.0).abs();
        diffs[j] = if diff.is_finite() { diff } else { f64::INFINITY };
    }
    for j in 0..n {
        for k in j + 1..n {
            for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                p[j] = c[j] + sj * LAMBDA4 * w[j];
                p[k] = c[k] + sk * LAMBDA4 * w[k];
                s4 += eval(&p);
            }
            p[j] = c[j];
            p[k] = c[k];
        }
    }
    for corner in 0..(1usize << n) {
        for j in 0..n {
            let s = if corner >> j & 1 == 1 { 1.0 } else { -1.0 };
            p[j] = c[j] + s * LAMBDA5 * w[j];
        }
        s5 += eval(&p);
    }
    let w1 = (12824.0 - 9120.0 * nf + 400.0 * nf * nf) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * nf) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / 2f64.powi(n as i32);
    let e1 = (729.0 - 950.0 * nf + 50.0 * nf * nf) / 729.0;
    let e2 = 245.0 / 486.0;
    let e3 = (265.0 - 100.0 * nf) / 1458.0;
    let e4 = 25.0 / 729.0;
    let r7 = vol * (w1 * f1 + w2 * s2 + w3 * s3 + w4 * s4 + w5 * s5);
    let r5 = vol * (e1 * f1 + e2 * s2 + e3 * s3 + e4 * s4);
    if bad {
        // Split across a direction whose axial nodes are finite so that a
        // singular line through the center ends up on a cell face.
        let pick = (0..n)
            .filter(|&j| clean_axes[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)))
            .or_else(|| (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a))))
            .unwrap_or(0);
        return (f64::NAN, f64::INFINITY, pick, true);
    }
    (r7, (r7 - r5).abs(), split_axis(&diffs, &w, f1), false)
}

/// Axis with the largest fourth difference, except that among the axes whose
/// difference is not negligible no cell gets more than 8:1 elongated by the
/// choice; the widest axis when nothing discriminates.
fn split_axis(diffs: &[f64], w: &[f64], f1: f64) -> usize {
    let n = w.len();
    let widest = |set: &[usize]| set.iter().copied().max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
    let dmax = diffs.iter().cloned().fold(0.0, f64::max);
    if dmax <= 1e-14 * f1.abs().max(1e-300) {
        return widest(&(0..n).collect::<Vec<_>>()).unwrap_or(0);
    }
    let active: Vec<usize> = (0..n).filter(|&j| diffs[j] >= 1e-3 * dmax).collect();
    let best = active.iter().copied().max_by(|&a, &b| diffs[a].total_cmp(&diffs[b]).then(b.cmp(&a))).unwrap_or(0);
    let wide = widest(&active).unwrap_or(best);
    if w[best] * 8.0 < w[wide] {
        wide
    } else {
        best
    }
}

/// Classify a cell against a list of loci. The cell is covered by up to 64
/// sub-boxes of comparable aspect; it touches a locus when the distance from
/// some sub-box center is below that sub-box's half-diagonal.
pub fn classify_cell(loci: &[Locus], lo: &[f64], hi: &[f64]) -> CellKind {
    if loci.is_empty() {
        return CellKind::Regular;
    }
    let n = lo.len();
    let w: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
    let max_side = w.iter().cloned().fold(0.0, f64::max);
    let mut m = vec![1usize; n];
    while m.iter().product::<usize>() * 2 <= 64 {
        let j = (0..n).max_by(|&a, &b| (w[a] / m[a] as f64).total_cmp(&(w[b] / m[b] as f64))).unwrap_or(0);
        let min_sub = (0..n).map(|k| w[k] / m[k] as f64).fold(f64::INFINITY, f64::min);
        if w[j] / m[j] as f64 <= 2.0 * min_sub {
            break;
        }
        m[j] *= 2;
    }
    let sub: Vec<f64> = (0..n).map(|j| w[j] / m[j] as f64).collect();
    let half_diag = sub.iter().map(|v| 0.25 * v * v).sum::<f64>().sqrt();
    let total: usize = m.iter().product();
    let mut kind = CellKind::Regular;
    let mut c = vec![0.0; n];
    for l in loci {
        if let Some(meets) = l.meets_box(lo, hi) {
            if meets && l.singular {
                kind = CellKind::Singular;
            }
            continue;
        }
        for idx in 0..total {
            let mut r = idx;
            for j in 0..n {
                c[j] = lo[j] + (r % m[j]) as f64 * sub[j] + 0.5 * sub[j];
                r /= m[j];
            }
            let p = l.proximity(&c);
            if p.distance > half_diag {
                continue;
            }
            if l.singular {
                kind = CellKind::Singular;
                break;
            } else if max_side > p.scale {
                return CellKind::ForceSplit;
            }
        }
    }
    kind
}

fn min_width(lo: &[f64], hi: &[f64]) -> bool {
    lo.iter().zip(hi).all(|(a, b)| (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs())))
}

/// A final cell of the subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub value: f64,
    pub error: f64,
    pub singular: bool,
}

/// Integrate `f` over the box `[lo, hi]` (dimension ≥ 2).
pub fn integrate<F, K>(f: &F, lo: &[f64], hi: &[f64], cfg: &CubatureConfig, kind: &K) -> Result<CubatureOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    K: Fn(&[f64], &[f64]) -> CellKind + Sync,
{
    integrate_with_leaves(f, lo, hi, cfg, kind).map(|(o, _)| o)
}

/// [`integrate`], also returning the final cells.
pub fn integrate_with_leaves<F, K>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    cfg: &CubatureConfig,
    kind: &K,
) -> Result<(CubatureOutcome, Vec<Leaf>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
    K: Fn(&[f64], &[f64]) -> CellKind + Sync,
{
    let n = lo.len();
    if n < 2 || hi.len() != n {
        return Err(Error::InvalidParams("cubature needs a box of dimension at least 2".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::InvalidParams(format!("degenerate box {lo:?} .. {hi:?}")));
    }
    if !(cfg.tol_rel > 0.0) || cfg.max_cells < 1 {
        return Err(Error::InvalidParams("tolRel must be positive and maxCells at least 1".into()));
    }
    let make = |lo: Vec<f64>, hi: Vec<f64>, id: u64| -> Cell {
        let k = kind(&lo, &hi);
        let (value, err, axis, bad) = genz_malik(f, &lo, &hi);
        let singular = k == CellKind::Singular;
        let err = if singular && !bad { err.max(value.abs()) } else { err };
        Cell { lo, hi, value, err, axis, forced: bad || k == CellKind::ForceSplit, singular, id }
    };
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    let mut total = NeumaierSum::new();
    let mut err_total = NeumaierSum::new();
    let mut forced = 0usize;
    let mut cells = 1usize;
    let mut divergent = false;
    let mut frozen: Vec<Cell> = Vec::new();
    let push = |c: Cell, heap: &mut BinaryHeap<Cell>, total: &mut NeumaierSum, err: &mut NeumaierSum, forced: &mut usize| {
        if c.forced {
            *forced += 1;
        } else {
            total.add(c.value);
            err.add(c.err);
        }
        heap.push(c);
    };
    let root = make(lo.to_vec(), hi.to_vec(), next_id);
    next_id += 1;
    push(root, &mut heap, &mut total, &mut err_total, &mut forced);
    let converged_now = |total: &NeumaierSum, err: &NeumaierSum, forced: usize| {
        forced == 0 && err.value() <= cfg.tol_abs.max(cfg.tol_rel * total.value().abs())
    };
    loop {
        if converged_now(&total, &err_total, forced) {
            break;
        }
        if cells + 2 > cfg.max_cells {
            break;
        }
        let room = (cfg.max_cells - cells) / 2;
        let take = BATCH.min(room).max(1);
        let mut batch = Vec::with_capacity(take);
        let mut accepted = Vec::new();
        while batch.len() < take {
            let Some(c) = heap.pop() else { break };
            if c.forced {
                forced -= 1;
            } else {
                total.add(-c.value);
                err_total.add(-c.err);
            }
            if min_width(&c.lo, &c.hi) {
                if c.value.is_finite() {
                    accepted.push(Cell { forced: false, ..c });
                } else {
                    divergent = true;
                    accepted.push(Cell { forced: false, value: f64::INFINITY, ..c });
                }
                continue;
            }
            batch.push(c);
        }
        for c in accepted {
            total.add(c.value);
            err_total.add(c.err);
            frozen.push(c);
        }
        if divergent || batch.is_empty() {
            break;
        }
        let ids: Vec<u64> = (0..batch.len() as u64).map(|k| next_id + 2 * k).collect();
        next_id += 2 * batch.len() as u64;
        let children: Vec<(Cell, Cell)> = batch
            .par_iter()
            .zip(ids.par_iter())
            .map(|(c, &id)| {
                let mid = 0.5 * (c.lo[c.axis] + c.hi[c.axis]);
                let mut hi_a = c.hi.clone();
                hi_a[c.axis] = mid;
                let mut lo_b = c.lo.clone();
                lo_b[c.axis] = mid;
                (make(c.lo.clone(), hi_a, id), make(lo_b, c.hi.clone(), id + 1))
            })
            .collect();
        cells += 2 * children.len();
        for (a, b) in children {
            push(a, &mut heap, &mut total, &mut err_total, &mut forced);
            push(b, &mut heap, &mut total, &mut err_total, &mut forced);
        }
    }
    let mut leaves: Vec<Cell> = heap.into_vec();
    leaves.extend(frozen);
    leaves.sort_by_key(|c| c.id);
    let mut value = NeumaierSum::new();
    let mut error = NeumaierSum::new();
    let mut singular_cells = 0;
    let mut pending = false;
    let mut nonfinite_cells = 0;
    for c in &leaves {
        if c.forced {
            pending = true;
        }
        if c.singular {
            singular_cells += 1;
        }
        if c.value.is_finite() {
            value.add(c.value);
            error.add(c.err);
        } else {
            nonfinite_cells += 1;
        }
    }
    let value = if divergent { f64::INFINITY } else { value.value() };
    let error = error.value();
    let converged = !divergent && !pending && nonfinite_cells == 0 && error <= cfg.tol_abs.max(cfg.tol_rel * value.abs());
    let leaves = leaves
        .into_iter()
        .map(|c| Leaf { lo: c.lo, hi: c.hi, value: c.value, error: c.err, singular: c.singular })
        .collect();
    Ok((CubatureOutcome { value, error, cells, converged, divergent, singular_cells, nonfinite_cells }, leaves))
}
