//! Box-counting dimension of Cantor cell sets and of near-critical sets
//! `{|J_f| ≤ ε}` sampled on dyadic grids.
//!
//! Box counting only upper-bounds the Hausdorff dimension; a slope close to
//! `d` is evidence about the construction, not a certificate that `H^d > 0`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{CantorSchedule, CellPair};
use crate::error::{Error, Result};
use crate::maps::Mapping;

/// Deepest grid level for planar maps.
pub const MAX_DEPTH_2D: u32 = 12;
/// Deepest grid level for maps of three variables.
pub const MAX_DEPTH_3D: u32 = 8;
/// Number of deepest scales used by the slope fit.
pub const FIT_SCALES: usize = 4;
/// Largest number of sub-samples per axis and box.
pub const MAX_SAMPLES: u32 = 8;
/// Default boxes per cube side for generation-matched levels.
pub const DEFAULT_BOXES_PER_CUBE: u32 = 2;
/// Default sub-samples per box axis.
pub const DEFAULT_SAMPLES: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionReport {
    /// Box sides, strictly decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Threshold used at each scale (empty for cell sets).
    pub eps: Vec<f64>,
    /// Least-squares slope over the running prefix ending at each scale.
    pub running_slope: Vec<Option<f64>>,
    /// Fitted `-log count / log side` over the deepest scales; `None` when
    /// no box was occupied.
    pub slope: Option<f64>,
    /// Root-mean-square residual of the fit in `log2 count`.
    pub residual: Option<f64>,
    pub target_d: Option<f64>,
    pub epsilon_rule: String,
    /// Set when the slope could not be fitted.
    pub flag: Option<String>,
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let m = x.len();
    if m < 2 || m != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / m as f64;
    let my = y.iter().sum::<f64>() / m as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    Some((slope, (rss / m as f64).sqrt()))
}

/// Slope of `log2 count` against `log2(1/side)`; zero counts give `None`.
fn log_fit(scales: &[f64], counts: &[u64]) -> Option<(f64, f64)> {
    if counts.iter().any(|&c| c == 0) {
        return None;
    }
    let x: Vec<f64> = scales.iter().map(|s| -s.log2()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).log2()).collect();
    fit_line(&x, &y)
}

fn assemble(
    scales: Vec<f64>,
    counts: Vec<u64>,
    eps: Vec<f64>,
    fit_from: usize,
    target_d: Option<f64>,
    epsilon_rule: String,
) -> DimensionReport {
    let running_slope =
        (0..scales.len()).map(|m| log_fit(&scales[..=m], &counts[..=m]).map(|(s, _)| s)).collect();
    let fit = log_fit(&scales[fit_from..], &counts[fit_from..]);
    let flag = if fit.is_some() {
        None
    } else if counts[fit_from..].iter().all(|&c| c == 0) {
        Some("no occupied boxes at the fitted scales; slope undefined".to_string())
    } else {
        Some("some fitted scales have no occupied boxes; slope undefined".to_string())
    };
    DimensionReport {
        scales,
        counts,
        eps,
        running_slope,
        slope: fit.map(|f| f.0),
        residual: fit.map(|f| f.1),
        target_d,
        epsilon_rule,
        flag,
    }
}

/// Number of boxes of the lattice `origin + side·Z^n` whose interior meets
/// the interior of at least one of `boxes`.
pub fn grid_box_count(boxes: &[(Vec<f64>, Vec<f64>)], side: f64, origin: &[f64]) -> Result<u64> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidParams(format!("box side must be positive, got {side}")));
    }
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let slack = 1e-9;
    for (lo, hi) in boxes {
        let n = lo.len();
        if origin.len() != n || hi.len() != n {
            return Err(Error::InvalidParams("box and origin dimensions differ".into()));
        }
        let first: Vec<i64> = (0..n).map(|j| ((lo[j] - origin[j]) / side + slack).floor() as i64).collect();
        let last: Vec<i64> = (0..n).map(|j| ((hi[j] - origin[j]) / side - slack).ceil() as i64 - 1).collect();
        let total: u128 = (0..n).map(|j| (last[j] - first[j] + 1).max(0) as u128).product();
        if total > 1 << 26 {
            return Err(Error::Budget(format!("one box covers {total} grid boxes")));
        }
        let mut idx = first.clone();
        if (0..n).any(|j| last[j] < first[j]) {
            continue;
        }
        loop {
            seen.insert(idx.clone());
            let mut j = 0;
            loop {
                if j == n {
                    break;
                }
                idx[j] += 1;
                if idx[j] <= last[j] {
                    break;
                }
                idx[j] = first[j];
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    Ok(seen.len() as u64)
}

/// Which member of each cell pair to cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellShape {
    /// The cubes `Q_v`, whose union shrinks to `C_Q`.
    Cube,
    /// The rectangles `R_v`, whose union shrinks to `C_R`.
    Rectangle,
}

/// Box-counting slope of a Cantor cell set.
///
/// For cubes each generation contributes one scale: side `2a_i` and the
/// analytic count `2^{ni}` (the number of cells supplied). For rectangles
/// the deepest supplied generation is covered by dyadic grids of sides
/// `2^{-j}` down to its larger rectangle extent and counted box by box.
pub fn box_dimension_of_set(generations: &[Vec<CellPair>], shape: CellShape, target_d: Option<f64>) -> Result<DimensionReport> {
    let gens: Vec<&Vec<CellPair>> = generations.iter().filter(|g| !g.is_empty()).collect();
    match shape {
        CellShape::Cube => {
            if gens.len() < 3 {
                return Err(Error::Precondition(format!("need at least 3 generations, got {}", gens.len())));
            }
            let mut scales = Vec::new();
            let mut counts = Vec::new();
            for g in &gens {
                scales.push(2.0 * g[0].q_half);
                counts.push(g.len() as u64);
            }
            check_decreasing(&scales)?;
            Ok(assemble(scales, counts, Vec::new(), 0, target_d, "analytic cell count 2^{ni} at side 2a_i".into()))
        }
        CellShape::Rectangle => {
            let deepest = gens.last().ok_or_else(|| Error::Precondition("no cells supplied".into()))?;
            let rects: Vec<(Vec<f64>, Vec<f64>)> = deepest.iter().map(|c| c.rectangle()).collect();
            let extent = 2.0 * deepest[0].r_half.0.max(deepest[0].r_half.1);
            let n = rects[0].0.len();
            let origin = vec![-1.0; n];
            let mut scales = Vec::new();
            let mut counts = Vec::new();
            let mut side = 1.0;
            while side >= extent {
                scales.push(side);
                counts.push(grid_box_count(&rects, side, &origin)?);
                side *= 0.5;
            }
            if scales.len() < 3 {
                return Err(Error::Precondition(format!("only {} dyadic scales above the rectangle size", scales.len())));
            }
            let from = scales.len().saturating_sub(FIT_SCALES);
            Ok(assemble(scales, counts, Vec::new(), from, target_d, "grid cover of generation rectangles".into()))
        }
    }
}

fn check_decreasing(scales: &[f64]) -> Result<()> {
    if scales.windows(2).all(|w| w[1] < w[0]) {
        Ok(())
    } else {
        Err(Error::Precondition("generations must be supplied in increasing order".into()))
    }
}

/// Count of generation-`i` cubes on the lattice aligned with their corners.
pub fn aligned_cube_count(cells: &[CellPair]) -> Result<u64> {
    let Some(c0) = cells.first() else { return Ok(0) };
    let side = 2.0 * c0.q_half;
    let origin: Vec<f64> = c0.zv.iter().map(|z| z - c0.q_half).collect();
    let boxes: Vec<(Vec<f64>, Vec<f64>)> = cells.iter().map(|c| c.cube()).collect();
    grid_box_count(&boxes, side, &origin)
}

/// Box sides and thresholds at which the near-critical set is counted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EpsilonRule {
    /// Dyadic boxes of side `2^{1-j}`, `j = 1..=depth`, with one `ε`.
    Fixed { eps: f64 },
    /// One level per generation `i`: boxes of side `2a_i / boxes_per_cube`
    /// and `ε_i = 2·Ĉ·2^{-βi}`, for every generation whose boxes are no
    /// smaller than `2^{1-depth}`.
    #[serde(rename_all = "camelCase")]
    CantorMatched { n_over_d: f64, beta: f64, c_hat: f64, boxes_per_cube: u32 },
}

impl EpsilonRule {
    /// Rule for a Cantor schedule with a fitted Jacobian constant.
    pub fn for_schedule(s: &CantorSchedule, boxes_per_cube: u32) -> Result<Self> {
        if boxes_per_cube == 0 {
            return Err(Error::InvalidParams("boxes per cube must be positive".into()));
        }
        let p = s.params();
        Ok(EpsilonRule::CantorMatched {
            n_over_d: p.n as f64 / p.d,
            beta: s.beta(),
            c_hat: fit_jacobian_constant(s)?,
            boxes_per_cube,
        })
    }

    /// `(box side, ε)` for every level down to boxes of side `2^{1-depth}`.
    pub fn levels(&self, depth: u32) -> Vec<(f64, f64)> {
        let finest = (1.0 - depth as f64).exp2();
        match *self {
            EpsilonRule::Fixed { eps } => (1..=depth).map(|j| ((1.0 - j as f64).exp2(), eps)).collect(),
            EpsilonRule::CantorMatched { n_over_d, beta, c_hat, boxes_per_cube } => {
                let mut out = Vec::new();
                for i in 1.. {
                    let side = 2.0 * (-n_over_d * i as f64).exp2() / boxes_per_cube as f64;
                    if side < finest * (1.0 - 1e-12) {
                        break;
                    }
                    out.push((side, 2.0 * c_hat * (-beta * i as f64).exp2()));
                }
                out
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EpsilonRule::Fixed { eps } => format!("fixed eps = {eps:e} on dyadic boxes"),
            EpsilonRule::CantorMatched { n_over_d, beta, c_hat, boxes_per_cube } => format!(
                "eps_i = 2 * {c_hat} * 2^(-{beta} i) on boxes of side 2^(1 - {n_over_d} i) / {boxes_per_cube}"
            ),
        }
    }
}

/// Jacobian constant `Ĉ` in `J_f ≈ Ĉ·2^{-βi}` on generation-`i` cubes: the
/// median of `J_f·2^{βi}` over a `33^n` sample of the first cube of every
/// generation. Thin bands where deeper profiles are steep do not move it.
pub fn fit_jacobian_constant(s: &CantorSchedule) -> Result<f64> {
    let n = s.n();
    let k = s.max_gen();
    if k == 0 {
        return Err(Error::Precondition("schedule has no generations".into()));
    }
    let per_axis = 33usize;
    let mut ratios = Vec::new();
    for i in 1..=k {
        let g = s.generation(i);
        let z: f64 = -(1..=i).map(|l| 0.5 * s.generation(l - 1).a).sum::<f64>();
        let scale = (s.beta() * i as f64).exp2();
        for idx in 0..per_axis.pow(n as u32) {
            let mut r = idx;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let t = ((r % per_axis) as f64 + 0.5) / per_axis as f64;
                    r /= per_axis;
                    z + g.a * (2.0 * t - 1.0)
                })
                .collect();
            ratios.push(s.eval(&x)?.1 * scale);
        }
    }
    ratios.sort_by(f64::total_cmp);
    Ok(ratios[ratios.len() / 2])
}

/// Box-count slope of `{x : |J_f(x)| ≤ ε}` on `[-1, 1]^n`, at the box
/// sides and thresholds listed by `rule` down to boxes of side `2^{1-depth}`.
/// A box is counted when the Jacobian at one of its `samples^n` sub-cell
/// centers is within the threshold; `samples = 1` tests the box center only.
pub fn near_critical_dimension(
    map: &dyn Mapping,
    rule: &EpsilonRule,
    depth: u32,
    samples: u32,
    target_d: Option<f64>,
) -> Result<DimensionReport> {
    let n = map.dim();
    let cap = match n {
        2 => MAX_DEPTH_2D,
        3 => MAX_DEPTH_3D,
        _ => return Err(Error::InvalidParams(format!("grid counting supports n = 2 or 3, got {n}"))),
    };
    if depth > cap {
        return Err(Error::Budget(format!("depth {depth} exceeds the grid budget {cap} for n = {n}")));
    }
    let (lo, hi) = map.domain().bounding_box();
    if lo.iter().chain(&hi).any(|v| (v.abs() - 1.0).abs() > 0.0) {
        return Err(Error::Precondition("near-critical counting runs on the cube [-1, 1]^n".into()));
    }
    if !(1..=MAX_SAMPLES).contains(&samples) {
        return Err(Error::InvalidParams(format!("samples per axis must be in 1..={MAX_SAMPLES}")));
    }
    let per_box = (samples as u64).pow(n as u32);
    let levels = rule.levels(depth);
    if levels.len() < FIT_SCALES {
        return Err(Error::Precondition(format!(
            "depth {depth} yields {} levels; need at least {FIT_SCALES}",
            levels.len()
        )));
    }
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    let mut eps = Vec::new();
    for (side, e) in levels {
        let m = (2.0 / side - 1e-9).ceil() as u64;
        let total = m.pow(n as u32);
        let count = (0..total)
            .into_par_iter()
            .map(|idx| -> Result<u64> {
                let mut r = idx;
                let corner: Vec<f64> = (0..n)
                    .map(|_| {
                        let c = -1.0 + (r % m) as f64 * side;
                        r /= m;
                        c
                    })
                    .collect();
                let sub = side / samples as f64;
                let mut x = vec![0.0; n];
                for s_idx in 0..per_box {
                    let mut q = s_idx;
                    for j in 0..n {
                        x[j] = corner[j] + ((q % samples as u64) as f64 + 0.5) * sub;
                        q /= samples as u64;
                    }
                    if x.iter().any(|v| *v > 1.0) {
                        continue;
                    }
                    let jac = map.jacobian(&x)?;
                    if !jac.is_finite() {
                        return Err(Error::NonFinite(format!("Jacobian at {x:?}")));
                    }
                    if jac.abs() <= e {
                        return Ok(1);
                    }
                }
                Ok(0)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        scales.push(side);
        counts.push(count);
        eps.push(e);
    }
    let from = scales.len() - FIT_SCALES;
    Ok(assemble(scales, counts, eps, from, target_d, rule.describe()))
}
