//! Numeric check of the lower bound
//! `r^{n - a(1 - n/b)} / (∫_B |Dg|^b)^{a/b} ≤ C ∫_B |g|^{-a}` on balls
//! `B = B(z, r)` centred at zeros of a scalar field.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{check_finite, Domain, Mapping};
use crate::numeric::gauss::{adaptive_gk15, GaussRule};
use crate::numeric::linalg::cofactor;
use crate::regimes::RegimeParams;

/// A scalar field with gradient.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> Domain;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// `g(x) = c · x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub domain: Domain,
}

impl ScalarField for LinearField {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_finite(x, self.dim())?;
        Ok(self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.offset)
    }

    fn gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.coeffs.clone())
    }
}

/// The Jacobian determinant of a map, with gradient
/// `∂_k J = Σ_ij cof(Df)_ij ∂_k ∂_j f_i`.
pub struct JacobianField<'a> {
    pub map: &'a dyn Mapping,
}

impl ScalarField for JacobianField<'_> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn domain(&self) -> Domain {
        self.map.domain()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.map.jacobian(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let jet = self.map.jet(x)?;
        let n = self.dim();
        let d2 = jet
            .d2
            .ok_or_else(|| Error::Precondition(format!("{} has no closed-form D²f", self.map.family())))?;
        let cof = cofactor(&jet.df);
        Ok((0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += cof[(i, j)] * d2.get(i, j, k);
                    }
                }
                s
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyEstimateRow {
    pub zero: usize,
    pub j: u32,
    pub r: f64,
    pub grad_integral: f64,
    pub neg_integral: f64,
    pub lhs: f64,
    /// `lhs / ∫|g|^{-a}`; zero when the right-hand side diverges.
    pub ratio: f64,
    pub divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyEstimateReport {
    pub rows: Vec<KeyEstimateRow>,
    /// Implied constant: the largest ratio.
    pub max_ratio: f64,
    /// Largest over smallest finite positive ratio.
    pub variation: f64,
}

const TOL: f64 = 1e-8;
const MAX_PANELS: usize = 4000;

/// `∫_{B(z,r)} F` in polar coordinates with the polar axis along `axis`, so
/// that a zero set tangent to `axis^⊥` is met only at panel edges. The angle
/// approaches the equator as `π/2 ± (π/2) v^grade`; with `grade = 1/(1-a)` a
/// `|cos θ|^{-a}` singularity becomes bounded in `v` and no node lands on the
/// equator itself, where rounding can make the field vanish along a whole ray.
fn ball_integral(
    n: usize,
    z: &[f64],
    r: f64,
    axis: &[f64],
    grade: f64,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (f64, bool) {
    let basis = orthonormal_basis(axis);
    let point = |rho: f64, dir: &[f64]| -> Vec<f64> { (0..n).map(|i| z[i] + rho * dir[i]).collect() };
    let radial = |dir: &[f64], ok: &mut bool| -> f64 {
        let g = |rho: f64| f(&point(rho, dir)) * rho.powi(n as i32 - 1);
        let (v, c) = adaptive_gk15(&g, 0.0, r, 0.0, TOL, MAX_PANELS);
        *ok &= c;
        v
    };
    let graded = |angular: &dyn Fn(f64) -> f64, equator: f64, side: f64| -> (f64, bool) {
        let h = |v: f64| {
            let t = equator + side * 0.5 * PI * v.powf(grade);
            angular(t) * 0.5 * PI * grade * v.powf(grade - 1.0)
        };
        adaptive_gk15(&h, 0.0, 1.0, 0.0, TOL, MAX_PANELS)
    };
    let cell = std::cell::Cell::new(true);
    let mut total = 0.0;
    let mut ok = true;
    match n {
        2 => {
            let ang = |t: f64| {
                let dir = [t.cos() * basis[0][0] + t.sin() * basis[1][0], t.cos() * basis[0][1] + t.sin() * basis[1][1]];
                let mut c = true;
                let v = radial(&dir, &mut c);
                if !c {
                    cell.set(false);
                }
                v
            };
            for (equator, side) in [(0.5 * PI, -1.0), (0.5 * PI, 1.0), (-0.5 * PI, 1.0), (-0.5 * PI, -1.0)] {
                let (v, c) = graded(&ang, equator, side);
                total += v;
                ok &= c;
            }
        }
        3 => {
            let az = GaussRule::cached(32);
            let polar = |t: f64| {
                let (st, ct) = t.sin_cos();
                let mut sum = 0.0;
                for (x, w) in az.nodes.iter().zip(&az.weights) {
                    let ph = PI * (1.0 + x);
                    let (sp, cp) = ph.sin_cos();
                    let dir: Vec<f64> =
                        (0..3).map(|i| ct * basis[0][i] + st * (cp * basis[1][i] + sp * basis[2][i])).collect();
                    let mut c = true;
                    sum += PI * w * radial(&dir, &mut c);
                    if !c {
                        cell.set(false);
                    }
                }
                sum * st
            };
            for side in [-1.0, 1.0] {
                let (v, c) = graded(&polar, 0.5 * PI, side);
                total += v;
                ok &= c;
            }
        }
        _ => return (f64::NAN, false),
    }
    (total, ok && cell.get())
}

fn orthonormal_basis(axis: &[f64]) -> Vec<Vec<f64>> {
    let n = axis.len();
    let len = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e0: Vec<f64> = if len > 0.0 { axis.iter().map(|v| v / len).collect() } else { (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect() };
    let mut basis = vec![e0];
    for k in 0..n {
        let mut v: Vec<f64> = (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for i in 0..n {
                v[i] -= d * b[i];
            }
        }
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 1e-8 {
            basis.push(v.iter().map(|x| x / l).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis
}

/// Ratios of the two sides on balls of radius `2^{-j}` for `j ∈ js`, around
/// each zero of `g`.
pub fn key_estimate_check(
    g: &dyn ScalarField,
    zeros: &[Vec<f64>],
    p: &RegimeParams,
    b: f64,
    js: &[u32],
) -> Result<KeyEstimateReport> {
    let n = g.dim();
    if p.n as usize != n {
        return Err(Error::InvalidParams(format!("field dimension {n} differs from n = {}", p.n)));
    }
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidParams("key estimate supports n = 2 and n = 3".into()));
    }
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::InvalidParams(format!("b must be at least 1, got {b}")));
    }
    if zeros.is_empty() || js.is_empty() {
        return Err(Error::InvalidParams("need at least one zero and one radius".into()));
    }
    let a = p.a;
    let grade = if a < 1.0 { (1.0 / (1.0 - a)).min(4.0) } else { 1.0 };
    let dom = g.domain();
    let mut rows = Vec::new();
    for (zi, z) in zeros.iter().enumerate() {
        check_finite(z, n)?;
        let gz = g.value(z)?;
        let grad = g.gradient(z)?;
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gz.abs() > 1e-12 * (1.0 + gnorm) {
            return Err(Error::Precondition(format!("g({z:?}) = {gz} is not a zero")));
        }
        for &j in js {
            let r = 2f64.powi(-(j as i32));
            for k in 0..n {
                for s in [-1.0, 1.0] {
                    let mut y = z.clone();
                    y[k] += s * r;
                    if !dom.contains(&y) {
                        return Err(Error::Domain(format!("ball of radius {r} around zero {zi} leaves the domain")));
                    }
                }
            }
            let grad_f = |x: &[f64]| match g.gradient(x) {
                Ok(v) => v.iter().map(|c| c * c).sum::<f64>().sqrt().powf(b),
                Err(_) => f64::NAN,
            };
            let neg_f = |x: &[f64]| match g.value(x) {
                Ok(v) => v.abs().powf(-a),
                Err(_) => f64::NAN,
            };
            let (gi, _) = ball_integral(n, z, r, &grad, 1.0, &grad_f);
            let (ni, nok) = ball_integral(n, z, r, &grad, grade, &neg_f);
            let lhs = r.powf(n as f64 - a * (1.0 - n as f64 / b)) / gi.powf(a / b);
            let divergent = !nok || !ni.is_finite();
            let neg_integral = if divergent { f64::INFINITY } else { ni };
            let ratio = if divergent { 0.0 } else { lhs / ni };
            rows.push(KeyEstimateRow { zero: zi, j, r, grad_integral: gi, neg_integral, lhs, ratio, divergent });
        }
    }
    let finite: Vec<f64> = rows.iter().filter(|r| !r.divergent && r.ratio > 0.0).map(|r| r.ratio).collect();
    let max_ratio = finite.iter().cloned().fold(0.0, f64::max);
    let min_ratio = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = if finite.is_empty() { f64::NAN } else { max_ratio / min_ratio };
    Ok(KeyEstimateReport { rows, max_ratio, variation })
}
