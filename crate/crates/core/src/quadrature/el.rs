//! Weak Euler–Lagrange residual of the second-gradient energy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::energy::{EnergyParams, Phi, Psi};
use crate::error::{Error, Result};
use crate::maps::{check_finite, singular_distance, Hessian, Mapping};
use crate::numeric::gauss::GaussRule;
use crate::numeric::linalg::{cofactor, det};
use crate::numeric::NeumaierSum;

const PANELS: usize = 4;
const NODES: usize = 8;

/// Vector test function `φ(x) = (1 - |x - c|²/R²)^4 v`, supported in the
/// closed ball `B(c, R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BumpTest {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: Vec<f64>,
}

/// Value, gradient and second derivatives of a test function.
pub struct TestJet {
    pub value: Vec<f64>,
    pub df: DMatrix<f64>,
    pub d2: Hessian,
}

impl BumpTest {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: Vec<f64>) -> Result<Self> {
        let n = center.len();
        check_finite(&center, n)?;
        check_finite(&amplitude, n)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!("test radius must be positive, got {radius}")));
        }
        Ok(BumpTest { center, radius, amplitude })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude.iter().all(|v| *v == 0.0)
    }

    pub fn jet(&self, x: &[f64]) -> TestJet {
        let n = self.dim();
        let r2 = self.radius * self.radius;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let s = y.iter().map(|v| v * v).sum::<f64>() / r2;
        let mut d2 = Hessian::zeros(n);
        if s >= 1.0 {
            return TestJet { value: vec![0.0; n], df: DMatrix::zeros(n, n), d2 };
        }
        let w = 1.0 - s;
        let b = w.powi(4);
        let db: Vec<f64> = y.iter().map(|v| -8.0 * w.powi(3) * v / r2).collect();
        let value = self.amplitude.iter().map(|v| v * b).collect();
        let df = DMatrix::from_fn(n, n, |i, j| self.amplitude[i] * db[j]);
        for j in 0..n {
            for k in 0..n {
                let mut hb = 48.0 * w * w * y[j] * y[k] / (r2 * r2);
                if j == k {
                    hb -= 8.0 * w.powi(3) / r2;
                }
                for i in 0..n {
                    d2.set(i, j, k, self.amplitude[i] * hb);
                }
            }
        }
        TestJet { value, df, d2 }
    }
}

/// Residual and the finite-difference energy oracle on the same rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElCheck {
    pub residual: f64,
    pub oracle: f64,
    pub step: f64,
    pub relative_error: f64,
    pub nodes: usize,
}

struct Node {
    weight: f64,
    df: DMatrix<f64>,
    d2: Hessian,
    test: TestJet,
}

fn nodes(f: &dyn Mapping, phi: &BumpTest, p: &EnergyParams) -> Result<Vec<Node>> {
    let n = f.dim();
    if phi.dim() != n {
        return Err(Error::InvalidParams(format!("test function dimension {} != {n}", phi.dim())));
    }
    if p.psi != Psi::FrobeniusPower {
        return Err(Error::InvalidParams(
            "the residual needs a differentiable integrand: set psi = frobenius-power".into(),
        ));
    }
    let dom = f.domain();
    let (c, r) = (&phi.center, phi.radius);
    for j in 0..n {
        for s in [-1.0, 1.0] {
            let mut y = c.clone();
            y[j] += s * r;
            if !dom.contains(&y) {
                return Err(Error::Domain("test function support leaves the domain".into()));
            }
        }
    }
    let sd = singular_distance(f, c);
    if sd <= r {
        return Err(Error::Singular(format!("test support of radius {r} reaches a singular locus at distance {sd}")));
    }
    let rule = GaussRule::cached(NODES);
    let per_axis: Vec<(f64, f64)> = (0..PANELS)
        .flat_map(|k| {
            let lo = -r + 2.0 * r * k as f64 / PANELS as f64;
            let hi = lo + 2.0 * r / PANELS as f64;
            let half = 0.5 * (hi - lo);
            rule.nodes.iter().zip(&rule.weights).map(move |(x, w)| (lo + half * (1.0 + x), half * w)).collect::<Vec<_>>()
        })
        .collect();
    let m = per_axis.len();
    let mut out = Vec::new();
    let mut sign = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n).map(|j| c[j] + per_axis[idx[j]].0).collect();
        let weight: f64 = (0..n).map(|j| per_axis[idx[j]].1).product();
        let test = phi.jet(&x);
        let inside = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r * r;
        if inside {
            let jet = f.jet(&x)?;
            let d2 = jet.d2.clone().ok_or_else(|| Error::Precondition(format!("{} has no closed-form D²f", f.family())))?;
            let j = jet.jacobian();
            if p.phi == Phi::InverseAbsDet {
                if j == 0.0 || !j.is_finite() || (sign != 0.0 && j.signum() != sign) {
                    return Err(Error::Singular("test support meets the critical set {J = 0}".into()));
                }
                sign = j.signum();
            }
            out.push(Node { weight, df: jet.df, d2, test });
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn frob(h: &Hessian) -> f64 {
    h.frobenius()
}

fn density(node: &Node, p: &EnergyParams, t: f64) -> f64 {
    let n = node.df.nrows();
    let mut g = node.d2.clone();
    let mut sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = g.get(i, j, k) + t * node.test.d2.get(i, j, k);
                g.set(i, j, k, v);
                sq += v * v;
            }
        }
    }
    let psi = sq.sqrt().powf(p.q);
    let phi = match p.phi {
        Phi::Zero => 0.0,
        Phi::InverseAbsDet => det(&(&node.df + &node.test.df * t)).abs().powf(-p.a),
    };
    psi + phi
}

fn residual_density(node: &Node, p: &EnergyParams) -> f64 {
    let g = frob(&node.d2);
    let scale = if g > 0.0 { p.q * g.powf(p.q - 2.0) } else { 0.0 };
    let psi: f64 = node.d2.as_slice().iter().zip(node.test.d2.as_slice()).map(|(a, b)| a * b).sum::<f64>() * scale;
    let phi = match p.phi {
        Phi::Zero => 0.0,
        Phi::InverseAbsDet => {
            let d = det(&node.df);
            let cof = cofactor(&node.df);
            let k = -p.a * d.abs().powf(-p.a - 1.0) * d.signum();
            k * cof.iter().zip(node.test.df.iter()).map(|(a, b)| a * b).sum::<f64>()
        }
    };
    psi + phi
}

/// `∫ DΨ(D²f)·D²φ + DΦ(Df)·Dφ` over the support of `φ`, with
/// `DΨ(G) = q|G|^{q-2} G` and `DΦ(A) = -a |det A|^{-a-1} sgn(det A) cof A`.
pub fn el_residual(f: &dyn Mapping, phi: &BumpTest, p: &EnergyParams) -> Result<f64> {
    if phi.is_zero() {
        return Ok(0.0);
    }
    let ns = nodes(f, phi, p)?;
    let mut acc = NeumaierSum::new();
    for node in &ns {
        acc.add(node.weight * residual_density(node, p));
    }
    Ok(acc.value())
}

/// Energy of `f + tφ` restricted to the support of `φ`.
pub fn support_energy(f: &dyn Mapping, phi: &BumpTest, p: &EnergyParams, t: f64) -> Result<f64> {
    let ns = nodes(f, phi, p)?;
    let mut acc = NeumaierSum::new();
    for node in &ns {
        acc.add(node.weight * density(node, p, t));
    }
    Ok(acc.value())
}

/// Compare the residual with `(E(f + hφ) - E(f - hφ)) / 2h` on one rule.
pub fn el_check(f: &dyn Mapping, phi: &BumpTest, p: &EnergyParams, step: f64) -> Result<ElCheck> {
    let ns = nodes(f, phi, p)?;
    let mut res = NeumaierSum::new();
    let mut plus = NeumaierSum::new();
    let mut minus = NeumaierSum::new();
    for node in &ns {
        res.add(node.weight * residual_density(node, p));
        plus.add(node.weight * density(node, p, step));
        minus.add(node.weight * density(node, p, -step));
    }
    let residual = res.value();
    let oracle = (plus.value() - minus.value()) / (2.0 * step);
    let relative_error = (residual - oracle).abs() / residual.abs().max(oracle.abs()).max(1e-300);
    Ok(ElCheck { residual, oracle, step, relative_error, nodes: ns.len() })
}
