//! Planar map whose critical set contains a prescribed finite set of points:
//! a composition of radial factors, each collapsing the derivative at one
//! center while equal to the identity outside a small disk.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::radial::Profile;
use super::{check_finite, Domain, Hessian, Jet, Locus, Mapping};
use crate::error::{Error, Result};
use crate::numeric::bump::{Kink, SmoothedPiecewiseLinear};
use crate::numeric::gauss::adaptive_gk15;

/// Smoothed logarithmic profile with parameter `r` (factor radius `3r`):
/// `t log(1/r)/log(1/t)` near zero, two linear pieces, then the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProfile {
    r: f64,
    log_inv: f64,
    smoothed: SmoothedPiecewiseLinear,
}

impl LogProfile {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 0.1) {
            return Err(Error::InvalidParams(format!("log profile needs 0 < r < 1/10, got {r}")));
        }
        let l = (1.0 / r).ln();
        let smoothed = SmoothedPiecewiseLinear {
            intercept: -r / l,
            slope: 1.0 + 1.0 / l,
            kinks: vec![
                Kink { at: 1.5 * r, jump: -2.0 / l, radius: 0.25 * r },
                Kink { at: 2.0 * r, jump: 1.0 / l, radius: 0.25 * r },
            ],
        };
        Ok(LogProfile { r, log_inv: l, smoothed })
    }

    pub fn parameter(&self) -> f64 {
        self.r
    }

    /// Slope of the middle linear piece, `1 + 1/log(1/r)`.
    pub fn middle_slope(&self) -> f64 {
        1.0 + 1.0 / self.log_inv
    }

    /// Beyond this radius the profile is exactly the identity.
    pub fn identity_from(&self) -> f64 {
        2.25 * self.r
    }

    /// Breakpoints where the formula changes.
    pub fn breakpoints(&self) -> [f64; 6] {
        let r = self.r;
        [r, 1.25 * r, 1.5 * r, 1.75 * r, 2.0 * r, 2.25 * r]
    }
}

impl Profile for LogProfile {
    fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= self.r {
            t * self.log_inv / (-t.ln())
        } else if t <= 1.25 * self.r {
            self.middle_slope() * t - self.r / self.log_inv
        } else if t >= self.identity_from() {
            t
        } else {
            self.smoothed.value(t)
        }
    }

    fn d1(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= self.r {
            let l = -t.ln();
            self.log_inv / l + self.log_inv / (l * l)
        } else if t <= 1.25 * self.r {
            self.middle_slope()
        } else if t >= self.identity_from() {
            1.0
        } else {
            self.smoothed.derivative(t)
        }
    }

    fn d2(&self, t: f64) -> f64 {
        if t <= 0.0 {
            f64::INFINITY
        } else if t <= self.r {
            let l = -t.ln();
            self.log_inv / (t * l * l) + 2.0 * self.log_inv / (t * l * l * l)
        } else if t <= 1.25 * self.r || t >= self.identity_from() {
            0.0
        } else {
            self.smoothed.second_derivative(t)
        }
    }
}

/// Radial factor `y ↦ c + h(|y - c|)(y - c)/|y - c|` with value, gradient and
/// second derivatives.
fn factor_jet(center: [f64; 2], prof: &LogProfile, y: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], Option<[[[f64; 2]; 2]; 2]>) {
    let d = [y[0] - center[0], y[1] - center[1]];
    let t = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if t >= prof.identity_from() {
        return (y, [[1.0, 0.0], [0.0, 1.0]], Some([[[0.0; 2]; 2]; 2]));
    }
    if t == 0.0 {
        return (center, [[0.0; 2]; 2], None);
    }
    let rho = prof.value(t);
    let d1 = prof.d1(t);
    let d2 = prof.d2(t);
    let u = [d[0] / t, d[1] / t];
    let a = rho / t;
    let value = [center[0] + a * d[0], center[1] + a * d[1]];
    let mut df = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            df[i][j] = if i == j { a } else { 0.0 } + (d1 - a) * u[i] * u[j];
        }
    }
    let a1 = d1 / t - rho / (t * t);
    let a2 = d2 / t - 2.0 * d1 / (t * t) + 2.0 * rho / (t * t * t);
    let mut h = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let dij = (i == j) as u8 as f64;
                let dik = (i == k) as u8 as f64;
                let djk = (j == k) as u8 as f64;
                h[i][j][k] = a1 * (u[k] * dij + u[j] * dik + u[i] * djk - u[i] * u[j] * u[k])
                    + a2 * t * u[i] * u[j] * u[k];
            }
        }
    }
    (value, df, Some(h))
}

/// Per-factor construction record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorReport {
    pub center: [f64; 2],
    pub radius: f64,
    /// Upper bound from the center-separation constraints before halving.
    pub radius_bound: f64,
    /// `∫_{B(c,R)} |D²f|²` with the radial max-norm surrogate.
    pub d2_increment: f64,
    /// `∫_{B(c,R)} |exp(J^{-1/3}) - e|`.
    pub jac_increment: f64,
    pub d2_budget: f64,
    pub jac_budget: f64,
    pub budget_met: bool,
}

/// Smallest factor radius tried when halving toward the increment budgets.
pub const RADIUS_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DenseMap {
    centers: Vec<[f64; 2]>,
    radii: Vec<f64>,
    profiles: Vec<LogProfile>,
    reports: Vec<FactorReport>,
}

impl DenseMap {
    /// Build with explicit radii (validated) or with radii chosen by the
    /// separation constraints followed by halving toward the increment budgets.
    pub fn new(centers: Vec<[f64; 2]>, radii: Option<Vec<f64>>) -> Result<Self> {
        for (i, c) in centers.iter().enumerate() {
            if !(c[0].is_finite() && c[1].is_finite()) || (c[0] * c[0] + c[1] * c[1]).sqrt() >= 1.0 {
                return Err(Error::InvalidParams(format!("center {i} = {c:?} not in the open unit disk")));
            }
            for (j, o) in centers[..i].iter().enumerate() {
                if dist(*c, *o) == 0.0 {
                    return Err(Error::InvalidParams(format!("centers {j} and {i} coincide")));
                }
            }
        }
        let bounds: Vec<f64> = (0..centers.len()).map(|i| radius_bound(&centers, i)).collect();
        let radii = match radii {
            Some(r) => {
                if r.len() != centers.len() {
                    return Err(Error::InvalidParams("radii and centers differ in length".into()));
                }
                for (i, (&ri, &b)) in r.iter().zip(&bounds).enumerate() {
                    if !(ri > 0.0 && ri < b) {
                        return Err(Error::InvalidParams(format!(
                            "radius {i} = {ri} violates the separation constraint (must be in (0, {b}))"
                        )));
                    }
                }
                r
            }
            None => bounds.iter().map(|b| 0.5 * b).collect(),
        };
        let explicit = radii.iter().zip(&bounds).any(|(r, b)| *r != 0.5 * b);
        let mut out_radii = Vec::with_capacity(radii.len());
        let mut profiles = Vec::with_capacity(radii.len());
        let mut reports = Vec::with_capacity(radii.len());
        for (i, (&r0, &bound)) in radii.iter().zip(&bounds).enumerate() {
            let k = (i + 1) as i32;
            let d2_budget = 2f64.powi(-2 * k);
            let jac_budget = 2f64.powi(-k);
            let mut r = r0;
            let (mut d2_inc, mut jac_inc);
            loop {
                d2_inc = factor_d2_energy(r)?;
                jac_inc = factor_jac_increment(r)?;
                let met = d2_inc <= d2_budget && jac_inc <= jac_budget;
                if met || explicit || 0.5 * r < RADIUS_FLOOR {
                    break;
                }
                r *= 0.5;
            }
            out_radii.push(r);
            profiles.push(LogProfile::new(r / 3.0)?);
            reports.push(FactorReport {
                center: centers[i],
                radius: r,
                radius_bound: bound,
                d2_increment: d2_inc,
                jac_increment: jac_inc,
                d2_budget,
                jac_budget,
                budget_met: d2_inc <= d2_budget && jac_inc <= jac_budget,
            });
        }
        Ok(DenseMap { centers, radii: out_radii, profiles, reports })
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn factor_reports(&self) -> &[FactorReport] {
        &self.reports
    }

    /// Supremum of `|Df|` over all factors on a dense radial sample.
    pub fn df_bound(&self) -> f64 {
        self.radii.iter().map(|&r| factor_df_sup(r).unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        check_finite(x, 2)?;
        self.domain().check(x)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Upper bound for the radius of factor `i` (0-based): the factor disk stays in
/// the unit disk, obeys the density-point bound against earlier centers, the
/// `8^{-i}` cap, the profile range `r < 1/10`, and is disjoint from every other
/// factor disk (each radius below half of every center distance).
fn radius_bound(centers: &[[f64; 2]], i: usize) -> f64 {
    let c = centers[i];
    let mut b = 1.0 - (c[0] * c[0] + c[1] * c[1]).sqrt();
    b = b.min(8f64.powi(-(i as i32 + 1))).min(0.3);
    for (j, o) in centers.iter().enumerate() {
        let d = dist(c, *o);
        if j < i {
            b = b.min(4f64.powi(-(i as i32)) * d * d);
        }
        if j != i {
            b = b.min(0.5 * d);
        }
    }
    b
}

/// `max{h', h/t}` sampled densely on `(0, 3r]` for a factor of radius `radius`.
pub fn factor_df_sup(radius: f64) -> Result<f64> {
    let p = LogProfile::new(radius / 3.0)?;
    let r = p.parameter();
    let mut sup: f64 = 0.0;
    let samples = 4000;
    for k in 1..=samples {
        // Log-spaced below r, linear on [r, 3r].
        let near = r * (1e-12f64).powf(1.0 - k as f64 / samples as f64);
        let far = r + 2.0 * r * k as f64 / samples as f64;
        for t in [near, far] {
            sup = sup.max(p.d1(t)).max(p.value(t) / t);
        }
    }
    Ok(sup)
}

/// Integrate `2π ∫_0^R t F(t) dt` for a factor of radius `R`, handling the
/// logarithmic behavior near zero by the substitution `t = exp(-log(1/r)/u)`.
/// The callback returns `t² F(t)`, which stays finite where `t²` underflows.
fn polar_integral(radius: f64, t2f: impl Fn(&LogProfile, f64) -> f64) -> Result<f64> {
    let p = LogProfile::new(radius / 3.0)?;
    let r = p.parameter();
    let l = (1.0 / r).ln();
    let inner = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let t = (-l / u).exp();
        if t == 0.0 {
            return 0.0;
        }
        t2f(&p, t) * l / (u * u)
    };
    let (core, _) = adaptive_gk15(&inner, 0.0, 1.0, 1e-300, 1e-10, 2000);
    let mut total = core;
    let mut edges = vec![r];
    edges.extend_from_slice(&p.breakpoints()[1..]);
    edges.push(radius);
    for w in edges.windows(2) {
        if w[1] > w[0] {
            let (v, _) = adaptive_gk15(&|t: f64| t2f(&p, t) / t, w[0], w[1], 1e-300, 1e-10, 2000);
            total += v;
        }
    }
    Ok(2.0 * std::f64::consts::PI * total)
}

/// `t² · max{|h''|, |h'/t - h/t²|}²`, the radial max-norm surrogate of
/// `|D²f|²` scaled by `t²`. Below `r` both terms are taken in closed form.
fn d2_surrogate_sq(p: &LogProfile, t: f64) -> f64 {
    let n = if t <= p.parameter() {
        let big = p.log_inv;
        let l = -t.ln();
        big / (l * l) * (1.0 + 2.0 / l)
    } else {
        (t * p.d2(t)).abs().max((p.d1(t) - p.value(t) / t).abs())
    };
    n * n
}

/// `∫_{B(c,R)} |D² f_{c,R}|²` for one factor, using the radial surrogate norm.
pub fn factor_d2_energy(radius: f64) -> Result<f64> {
    polar_integral(radius, d2_surrogate_sq)
}

/// `∫_{B(c,R)} |exp(J^{-1/3}) - exp(1)|` for one factor.
pub fn factor_jac_increment(radius: f64) -> Result<f64> {
    polar_integral(radius, |p, t| {
        let j = p.d1(t) * p.value(t) / t;
        let log_t2 = 2.0 * t.ln();
        ((log_t2 + j.powf(-1.0 / 3.0)).exp() - (log_t2 + 1.0).exp()).abs()
    })
}

impl Mapping for DenseMap {
    fn dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Domain {
        Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 }
    }

    fn family(&self) -> &'static str {
        "dense"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut y = [x[0], x[1]];
        for (c, p) in self.centers.iter().zip(&self.profiles) {
            y = factor_jet(*c, p, y).0;
        }
        Ok(y.to_vec())
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check(x)?;
        let mut y = [x[0], x[1]];
        let mut g = [[1.0, 0.0], [0.0, 1.0]];
        let mut h = Some([[[0.0f64; 2]; 2]; 2]);
        for (c, p) in self.centers.iter().zip(&self.profiles) {
            let (v, a, b) = factor_jet(*c, p, y);
            h = match (h, b) {
                (Some(hp), Some(b)) => {
                    let mut nh = [[[0.0; 2]; 2]; 2];
                    for i in 0..2 {
                        for s in 0..2 {
                            for t in 0..2 {
                                let mut acc = 0.0;
                                for j in 0..2 {
                                    acc += a[i][j] * hp[j][s][t];
                                    for k in 0..2 {
                                        acc += b[i][j][k] * g[j][s] * g[k][t];
                                    }
                                }
                                nh[i][s][t] = acc;
                            }
                        }
                    }
                    Some(nh)
                }
                _ => None,
            };
            let mut ng = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    ng[i][j] = a[i][0] * g[0][j] + a[i][1] * g[1][j];
                }
            }
            g = ng;
            y = v;
        }
        let df = DMatrix::from_fn(2, 2, |i, j| g[i][j]);
        let d2 = h.map(|h| {
            let mut t = Hessian::zeros(2);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        t.set(i, j, k, h[i][j][k]);
                    }
                }
            }
            t
        });
        Ok(Jet { value: y.to_vec(), df, d2 })
    }

    fn d2_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x)?.d2.map(|h| h.max_abs()).unwrap_or(f64::INFINITY))
    }

    fn loci(&self) -> Vec<Locus> {
        let centers = self.centers.clone();
        let boxed = self.centers.clone();
        vec![Locus::singular("factor centers", move |x: &[f64]| {
            centers.iter().map(|c| dist(*c, [x[0], x[1]])).fold(f64::INFINITY, f64::min)
        })
        .with_box_test(move |lo, hi| {
            boxed.iter().any(|c| lo[0] <= c[0] && c[0] <= hi[0] && lo[1] <= c[1] && c[1] <= hi[1])
        })]
    }
}
