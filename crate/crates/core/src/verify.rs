//! Sampled checks of injectivity, degree, Jacobian sign, mollification, and
//! distortion. Every verdict is about the sample it was computed on.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{check_finite, Domain, Jet, Locus, Mapping};
use crate::numeric::gauss::GaussRule;
use crate::numeric::linalg::{det, singular_range};

/// Largest number of grid points a scan will evaluate.
pub const MAX_SCAN_POINTS: u64 = 100_000_000;
/// Witness pairs and points kept in a report.
pub const MAX_WITNESSES: usize = 64;
/// Largest number of near-target grid points clustered by the preimage count.
pub const MAX_PREIMAGE_HITS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectivityVerdict {
    InjectiveOnSample,
    CollisionFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollisionPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub image_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InjectivityReport {
    pub sampled: u64,
    /// Grid points where the map could not be evaluated.
    pub skipped: u64,
    /// Smallest singular value of `Df` over the sample.
    pub min_expansion: f64,
    /// Largest image-distance threshold. A pair is compared against
    /// `h/2 · min(σ_min(x), σ_min(y))`.
    pub tol: f64,
    /// Domain-distance threshold, one grid step.
    pub sep: f64,
    pub collision_count: u64,
    /// Up to [`MAX_WITNESSES`] pairs under their threshold with `|x - y| > sep`.
    pub collisions: Vec<CollisionPair>,
    pub verdict: InjectivityVerdict,
}

/// Cell centers of a `res^n` grid on `[lo, hi]`.
fn grid_point(lo: &[f64], step: &[f64], res: u64, mut idx: u64) -> Vec<f64> {
    (0..lo.len())
        .map(|j| {
            let k = idx % res;
            idx /= res;
            lo[j] + (k as f64 + 0.5) * step[j]
        })
        .collect()
}

fn check_grid(map: &dyn Mapping, lo: &[f64], hi: &[f64], res: usize) -> Result<(u64, Vec<f64>)> {
    let n = map.dim();
    check_finite(lo, n)?;
    check_finite(hi, n)?;
    if lo.iter().zip(hi).any(|(a, b)| a >= b) {
        return Err(Error::InvalidParams("empty scan box".into()));
    }
    if res < 2 {
        return Err(Error::InvalidParams("grid resolution must be at least 2".into()));
    }
    let total = (res as u64).checked_pow(n as u32).filter(|t| *t <= MAX_SCAN_POINTS);
    let Some(total) = total else {
        return Err(Error::Budget(format!("{res}^{n} grid points exceed {MAX_SCAN_POINTS}")));
    };
    let dom = map.domain();
    if !dom.contains(lo) || !dom.contains(hi) {
        return Err(Error::Domain("scan box is not inside the map's domain".into()));
    }
    let step = lo.iter().zip(hi).map(|(a, b)| (b - a) / res as f64).collect();
    Ok((total, step))
}

/// Look for distinct grid points with nearly equal images.
///
/// Points are the cell centers of a `res^n` grid on `[lo, hi]`, with spacing
/// `h` (the largest axis step). A pair collides when `|x - y| > h` and
/// `|f(x) - f(y)| < σ_min·h/2`, `σ_min` being the smallest singular value of
/// `Df` over the sample. Images are bucketed in a hash grid of side `tol`.
pub fn injectivity_scan(map: &dyn Mapping, lo: &[f64], hi: &[f64], res: usize) -> Result<InjectivityReport> {
    let n = map.dim();
    let (total, step) = check_grid(map, lo, hi, res)?;
    let h = step.iter().cloned().fold(0.0, f64::max);
    let res = res as u64;
    let samples: Vec<Option<(Vec<f64>, f64)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(lo, &step, res, idx);
            let jet = map.jet(&x).ok()?;
            if jet.value.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let smin = singular_range(&jet.df).1;
            Some((jet.value, if smin.is_finite() { smin } else { f64::INFINITY }))
        })
        .collect();
    let skipped = samples.iter().filter(|s| s.is_none()).count() as u64;
    let min_expansion = samples.iter().flatten().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let min_expansion = if min_expansion.is_finite() { min_expansion } else { 0.0 };
    let max_local = samples.iter().flatten().map(|s| s.1).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let tol = 0.5 * max_local * h;
    let sep = h * (1.0 + 1e-9);

    // Sort images by hash-cell key, then probe the 3^n neighbouring cells.
    let extent = samples
        .iter()
        .flatten()
        .flat_map(|s| s.0.iter())
        .fold(0.0, |acc: f64, v| acc.max(v.abs()));
    let cell = tol.max(extent.max(1.0) * 1e-12);
    let key = |v: &[f64]| -> Vec<i64> { v.iter().map(|c| (c / cell).floor() as i64).collect() };
    let mut keyed: Vec<(Vec<i64>, u64)> = samples
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|s| (key(&s.0), i as u64)))
        .collect();
    keyed.par_sort_unstable();
    let offsets: Vec<Vec<i64>> = (0..3u32.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let pairs: Vec<(u64, u64, f64)> = keyed
        .par_iter()
        .flat_map_iter(|(k, i)| {
            let (fi, si) = samples[*i as usize].as_ref().expect("keyed samples exist");
            let xi = grid_point(lo, &step, res, *i);
            let mut found = Vec::new();
            for off in &offsets {
                let probe: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
                let start = keyed.partition_point(|e| e.0 < probe);
                for (pk, j) in &keyed[start..] {
                    if *pk != probe {
                        break;
                    }
                    if j <= i {
                        continue;
                    }
                    let (fj, sj) = samples[*j as usize].as_ref().expect("keyed samples exist");
                    let d = dist(fi, fj);
                    if d < 0.5 * h * si.min(*sj).min(max_local) && dist(&xi, &grid_point(lo, &step, res, *j)) > sep {
                        found.push((*i, *j, d));
                    }
                }
            }
            found
        })
        .collect();
    let mut pairs = pairs;
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let collisions = pairs
        .iter()
        .take(MAX_WITNESSES)
        .map(|&(i, j, d)| CollisionPair {
            x: grid_point(lo, &step, res, i),
            y: grid_point(lo, &step, res, j),
            image_distance: d,
        })
        .collect();
    Ok(InjectivityReport {
        sampled: total,
        skipped,
        min_expansion,
        tol,
        sep,
        collision_count: pairs.len() as u64,
        collisions,
        verdict: if pairs.is_empty() { InjectivityVerdict::InjectiveOnSample } else { InjectivityVerdict::CollisionFound },
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DegreeReport {
    pub degree: i64,
    /// Total turning of `f∘loop - y` divided by `2π`.
    pub winding: f64,
    pub residual: f64,
    /// Distance from `y` to the sampled image polyline.
    pub margin: f64,
    /// Largest gap between consecutive image samples.
    pub spacing: f64,
}

/// Counterclockwise samples of the boundary of the rectangle `[lo, hi]`,
/// `per_side` points per edge.
pub fn rectangle_loop(lo: [f64; 2], hi: [f64; 2], per_side: usize) -> Vec<[f64; 2]> {
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let mut out = Vec::with_capacity(4 * per_side);
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for k in 0..per_side {
            let t = k as f64 / per_side as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Brouwer degree of a planar map at `y` from the winding number of the
/// image of a closed sampled curve.
///
/// Refused when `y` is closer to the image polyline than ten times the
/// largest gap between consecutive image samples, or when the winding
/// number is further than 0.05 from an integer.
pub fn degree_2d(map: &dyn Mapping, curve: &[[f64; 2]], y: [f64; 2]) -> Result<DegreeReport> {
    if map.dim() != 2 {
        return Err(Error::Precondition(format!("degree_2d needs n = 2, got {}", map.dim())));
    }
    if curve.len() < 3 {
        return Err(Error::InvalidParams("loop needs at least 3 samples".into()));
    }
    check_finite(&y, 2)?;
    let image: Vec<[f64; 2]> = curve
        .par_iter()
        .map(|p| {
            let v = map.value(p)?;
            check_finite(&v, 2)?;
            Ok([v[0], v[1]])
        })
        .collect::<Result<_>>()?;
    let m = image.len();
    let mut spacing: f64 = 0.0;
    let mut margin = f64::INFINITY;
    let mut turn = 0.0;
    for k in 0..m {
        let a = image[k];
        let b = image[(k + 1) % m];
        spacing = spacing.max(dist(&a, &b));
        margin = margin.min(segment_distance(a, b, y));
        let (ua, ub) = ([a[0] - y[0], a[1] - y[1]], [b[0] - y[0], b[1] - y[1]]);
        let cross = ua[0] * ub[1] - ua[1] * ub[0];
        let dot = ua[0] * ub[0] + ua[1] * ub[1];
        turn += cross.atan2(dot);
    }
    if margin < 10.0 * spacing {
        return Err(Error::Precondition(format!(
            "y is {margin:e} from the image curve; need at least 10 x sample spacing {spacing:e}"
        )));
    }
    let winding = turn / (2.0 * PI);
    let degree = winding.round();
    let residual = (winding - degree).abs();
    if residual >= 0.05 {
        return Err(Error::Precondition(format!("winding number {winding} is not near an integer")));
    }
    Ok(DegreeReport { degree: degree as i64, winding, residual, margin, spacing })
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(&[a[0] + t * ab[0], a[1] + t * ab[1]], &p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreimageCountReport {
    pub sampled: u64,
    pub skipped: u64,
    /// Largest threshold used by a hit. Each grid point is tested against
    /// its own `σ_max(x)·h·√n/2`.
    pub tol: f64,
    /// Connected clusters of hit grid points.
    pub count: usize,
    /// Best grid point of each cluster (smallest `|f(x) - y|`).
    pub representatives: Vec<Vec<f64>>,
}

/// Unsigned preimage count of `y` on a `res^n` cell-center grid: grid points
/// whose image lies within `σ_max(x)·h·√n/2` of `y` are grouped into clusters of
/// grid-adjacent points, one cluster per preimage.
pub fn grid_preimage_count(map: &dyn Mapping, lo: &[f64], hi: &[f64], res: usize, y: &[f64]) -> Result<PreimageCountReport> {
    let n = map.dim();
    check_finite(y, n)?;
    let (total, step) = check_grid(map, lo, hi, res)?;
    let h = step.iter().cloned().fold(0.0, f64::max);
    let res = res as u64;
    let samples: Vec<Option<(f64, f64)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let jet = map.jet(&grid_point(lo, &step, res, idx)).ok()?;
            let d = dist(&jet.value, y);
            let smax = singular_range(&jet.df).0;
            (d.is_finite() && smax.is_finite()).then_some((d, smax))
        })
        .collect();
    let skipped = samples.iter().filter(|s| s.is_none()).count() as u64;
    let radius = 0.5 * h * (n as f64).sqrt();
    let hits: Vec<u64> =
        (0..total).filter(|&i| matches!(samples[i as usize], Some((d, s)) if d <= s * radius)).collect();
    let tol = hits.iter().map(|&i| samples[i as usize].expect("hits were evaluated").1 * radius).fold(0.0, f64::max);
    if hits.len() > MAX_PREIMAGE_HITS {
        return Err(Error::Budget(format!(
            "{} grid points lie within {tol:e} of the target; refine the grid",
            hits.len()
        )));
    }

    let mut parent: Vec<usize> = (0..hits.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let coords = |mut idx: u64| -> Vec<i64> {
        (0..n)
            .map(|_| {
                let k = (idx % res) as i64;
                idx /= res;
                k
            })
            .collect()
    };
    for (a, &ia) in hits.iter().enumerate() {
        let ca = coords(ia);
        for (b, &ib) in hits.iter().enumerate().skip(a + 1) {
            let cb = coords(ib);
            if ca.iter().zip(&cb).all(|(u, v)| (u - v).abs() <= 1) {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                if ra != rb {
                    parent[rb] = ra;
                }
            }
        }
    }
    let mut best: Vec<(usize, u64, f64)> = Vec::new();
    for (a, &ia) in hits.iter().enumerate() {
        let r = root(&mut parent, a);
        let d = samples[ia as usize].expect("hits were evaluated").0;
        match best.iter_mut().find(|b| b.0 == r) {
            Some(b) if d < b.2 => *b = (r, ia, d),
            Some(_) => {}
            None => best.push((r, ia, d)),
        }
    }
    Ok(PreimageCountReport {
        sampled: total,
        skipped,
        tol,
        count: best.len(),
        representatives: best.iter().map(|b| grid_point(lo, &step, res, b.1)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SignReport {
    pub sampled: u64,
    pub skipped: u64,
    pub tol: f64,
    /// Fraction of evaluated points with `J > tol`.
    pub pos_fraction: f64,
    /// Fraction with `J < -tol`.
    pub neg_fraction: f64,
    pub zero_count: u64,
    /// Up to [`MAX_WITNESSES`] points with `|J| ≤ tol`.
    pub zero_witnesses: Vec<Vec<f64>>,
}

/// Fractions of a `res^n` cell-center grid where the Jacobian is positive,
/// negative, or within `tol` of zero.
pub fn sign_constancy_scan(map: &dyn Mapping, lo: &[f64], hi: &[f64], res: usize, tol: f64) -> Result<SignReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParams(format!("tolerance must be non-negative, got {tol}")));
    }
    let (total, step) = check_grid(map, lo, hi, res)?;
    let res = res as u64;
    // (positive, negative, zero, skipped, first zero indices)
    type Tally = (u64, u64, u64, u64, Vec<u64>);
    let tally: Tally = (0..total)
        .into_par_iter()
        .fold(
            || (0, 0, 0, 0, Vec::new()),
            |mut t: Tally, idx| {
                let x = grid_point(lo, &step, res, idx);
                match map.jacobian(&x) {
                    Ok(j) if j > tol => t.0 += 1,
                    Ok(j) if j < -tol => t.1 += 1,
                    Ok(j) if j.is_finite() => {
                        t.2 += 1;
                        if t.4.len() < MAX_WITNESSES {
                            t.4.push(idx);
                        }
                    }
                    _ => t.3 += 1,
                }
                t
            },
        )
        .reduce(
            || (0, 0, 0, 0, Vec::new()),
            |mut a, b| {
                a.0 += b.0;
                a.1 += b.1;
                a.2 += b.2;
                a.3 += b.3;
                a.4.extend(b.4);
                a
            },
        );
    let mut zeros = tally.4;
    zeros.sort_unstable();
    zeros.truncate(MAX_WITNESSES);
    let evaluated = (total - tally.3).max(1) as f64;
    Ok(SignReport {
        sampled: total,
        skipped: tally.3,
        tol,
        pos_fraction: tally.0 as f64 / evaluated,
        neg_fraction: tally.1 as f64 / evaluated,
        zero_count: tally.2,
        zero_witnesses: zeros.into_iter().map(|i| grid_point(lo, &step, res, i)).collect(),
    })
}

/// `|Df(x)|^n / J_f(x)` with the operator norm, or 1 where `J_f(x) = 0`.
pub fn distortion(map: &dyn Mapping, x: &[f64]) -> Result<f64> {
    let jet = map.jet(x)?;
    let j = det(&jet.df);
    if j == 0.0 {
        return Ok(1.0);
    }
    let smax = singular_range(&jet.df).0;
    Ok(smax.powi(map.dim() as i32) / j)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApproxCheckConfig {
    /// Required lower bound `3·delta ≤ J_f` near `G`; the mollified map is
    /// asked for `J ≥ delta`.
    pub delta: f64,
    /// Allowed uniform distance between the map and its mollification.
    pub eta: f64,
    pub kernel_radius: f64,
}

/// Radial and angular node counts of the planar kernel rule.
const KERNEL_RADIAL_NODES: usize = 12;
const KERNEL_ANGULAR_NODES: usize = 24;

/// Convolution `f * ψ_r` with the normalized bump `ψ(z) ∝ exp(-1/(1 - |z|²))`
/// scaled to radius `r`, evaluated with a fixed polar product rule. The rule
/// is normalized discretely and is symmetric under `z → -z`, so affine maps
/// are reproduced exactly.
#[derive(Clone)]
pub struct MollifiedMap<'a> {
    inner: &'a dyn Mapping,
    radius: f64,
    domain: Domain,
    /// Offsets and weights summing to one.
    nodes: Vec<([f64; 2], f64)>,
}

impl<'a> MollifiedMap<'a> {
    /// Mollification of a planar map, defined on `[lo, hi]`, which must stay
    /// `radius` away from the boundary of the map's domain.
    pub fn new(inner: &'a dyn Mapping, radius: f64, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if inner.dim() != 2 {
            return Err(Error::Precondition("mollification is implemented for n = 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!("kernel radius must be positive, got {radius}")));
        }
        let dom = inner.domain();
        let (dlo, dhi) = dom.bounding_box();
        let fits = matches!(dom, Domain::Cube { .. })
            && (0..2).all(|j| lo[j] - radius >= dlo[j] && hi[j] + radius <= dhi[j] && lo[j] < hi[j]);
        if !fits {
            return Err(Error::Precondition(format!(
                "kernel radius {radius} too large for the standoff of [{lo:?}, {hi:?}] from the domain boundary"
            )));
        }
        let g = GaussRule::cached(KERNEL_RADIAL_NODES);
        let mut nodes = Vec::with_capacity(KERNEL_RADIAL_NODES * KERNEL_ANGULAR_NODES);
        let mut total = 0.0;
        for (s, w) in g.nodes.iter().zip(&g.weights) {
            let rho = 0.5 * (s + 1.0);
            let bump = (-1.0 / (1.0 - rho * rho)).exp();
            for k in 0..KERNEL_ANGULAR_NODES {
                let th = 2.0 * PI * (k as f64 + 0.5) / KERNEL_ANGULAR_NODES as f64;
                let wt = 0.5 * w * rho * bump;
                nodes.push(([radius * rho * th.cos(), radius * rho * th.sin()], wt));
                total += wt;
            }
        }
        for n in &mut nodes {
            n.1 /= total;
        }
        Ok(MollifiedMap { inner, radius, domain: Domain::Cube { lo: lo.to_vec(), hi: hi.to_vec() }, nodes })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Mapping for MollifiedMap<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn family(&self) -> &'static str {
        "mollified"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x)?.value)
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        check_finite(x, 2)?;
        self.domain.check(x)?;
        let mut value = vec![0.0; 2];
        let mut df = DMatrix::zeros(2, 2);
        for (z, w) in &self.nodes {
            let jet = self.inner.jet(&[x[0] - z[0], x[1] - z[1]])?;
            for i in 0..2 {
                value[i] += w * jet.value[i];
            }
            df += &jet.df * *w;
        }
        Ok(Jet { value, df, d2: None })
    }

    fn has_closed_d2(&self) -> bool {
        false
    }

    fn loci(&self) -> Vec<Locus> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MollifyReport {
    pub kernel_radius: f64,
    /// Smallest sampled Jacobian of the mollified map on `G`.
    pub min_jac: f64,
    /// Smallest sampled Jacobian of the map itself on `G`.
    pub min_jac_unmollified: f64,
    /// Largest sampled `|f_r - f|` on `G`.
    pub sup_distance: f64,
    pub within_eta: bool,
    pub meets_delta: bool,
    pub injectivity: InjectivityReport,
    pub injective: bool,
}

/// Mollify a planar map at `c.kernel_radius` and check it on `G = [lo, hi]`.
///
/// Preconditions: `G` grown by the kernel radius lies in the domain, and
/// `J_f ≥ 3·delta` on a `res × res` sample of that neighbourhood.
pub fn mollify_and_check(map: &dyn Mapping, c: &ApproxCheckConfig, lo: [f64; 2], hi: [f64; 2], res: usize) -> Result<MollifyReport> {
    if !(c.delta > 0.0 && c.eta > 0.0) {
        return Err(Error::InvalidParams("delta and eta must be positive".into()));
    }
    let moll = MollifiedMap::new(map, c.kernel_radius, lo, hi)?;
    let r = c.kernel_radius;
    let grown_lo = [lo[0] - r, lo[1] - r];
    let grown_hi = [hi[0] + r, hi[1] + r];
    let sign = sign_constancy_scan(map, &grown_lo, &grown_hi, res.max(2), 0.0)?;
    let min_near = grid_min_jacobian(map, &grown_lo, &grown_hi, res.max(2))?;
    if sign.skipped > 0 || min_near < 3.0 * c.delta {
        return Err(Error::Precondition(format!(
            "J_f must be at least 3 delta = {} near G; sampled minimum {min_near}",
            3.0 * c.delta
        )));
    }
    let (total, step) = check_grid(&moll, &lo, &hi, res)?;
    let res64 = res as u64;
    let rows: Vec<(f64, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(&lo, &step, res64, idx);
            let m = moll.jet(&x)?;
            let f = map.jet(&x)?;
            Ok((det(&m.df), f.jacobian(), dist(&m.value, &f.value)))
        })
        .collect::<Result<_>>()?;
    let min_jac = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_jac_unmollified = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let sup_distance = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let injectivity = injectivity_scan(&moll, &lo, &hi, res)?;
    let injective = injectivity.verdict == InjectivityVerdict::InjectiveOnSample;
    Ok(MollifyReport {
        kernel_radius: r,
        min_jac,
        min_jac_unmollified,
        sup_distance,
        within_eta: sup_distance < c.eta,
        meets_delta: min_jac >= c.delta,
        injectivity,
        injective,
    })
}

fn grid_min_jacobian(map: &dyn Mapping, lo: &[f64], hi: &[f64], res: usize) -> Result<f64> {
    let (total, step) = check_grid(map, lo, hi, res)?;
    let res = res as u64;
    (0..total)
        .into_par_iter()
        .map(|idx| map.jacobian(&grid_point(lo, &step, res, idx)))
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}

/// Halve the kernel radius from `c.kernel_radius` until the mollified map
/// has `J ≥ delta`, stays within `eta`, and is injective on the sample.
/// Returns every attempt; the last one is the radius found, if any.
pub fn find_mollification_radius(
    map: &dyn Mapping,
    c: &ApproxCheckConfig,
    lo: [f64; 2],
    hi: [f64; 2],
    res: usize,
    max_halvings: usize,
) -> Result<Vec<MollifyReport>> {
    let mut out = Vec::new();
    let mut cfg = *c;
    for _ in 0..=max_halvings {
        let rep = mollify_and_check(map, &cfg, lo, hi, res)?;
        let ok = rep.meets_delta && rep.within_eta && rep.injective;
        out.push(rep);
        if ok {
            break;
        }
        cfg.kernel_radius *= 0.5;
    }
    Ok(out)
}
