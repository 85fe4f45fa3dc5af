//! Radial stretchings `x ↦ c + ρ(|x - c|) (x - c)/|x - c|`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_finite, norm, Domain, Hessian, Jet, Locus, Mapping};
use crate::error::{Error, Result};

/// Scalar radial profile `ρ` with two derivatives.
pub trait Profile: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn d1(&self, t: f64) -> f64;
    fn d2(&self, t: f64) -> f64;
}

/// Serializable profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    /// `c * t^p`.
    Power { c: f64, p: f64 },
    /// `Σ coeffs[k] * t^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl ProfileSpec {
    pub fn identity() -> Self {
        ProfileSpec::Power { c: 1.0, p: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProfileSpec::Power { c, p } => {
                if !(c.is_finite() && p.is_finite() && *c != 0.0 && *p != 0.0) {
                    return Err(Error::InvalidParams(format!("power profile needs c != 0, p != 0; got c={c}, p={p}")));
                }
            }
            ProfileSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.len() > 64 || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParams("polynomial profile needs 1..=64 finite coefficients".into()));
                }
            }
        }
        Ok(())
    }
}

impl Profile for ProfileSpec {
    fn value(&self, t: f64) -> f64 {
        match self {
            ProfileSpec::Power { c, p } => c * t.powf(*p),
            ProfileSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    fn d1(&self, t: f64) -> f64 {
        match self {
            ProfileSpec::Power { c, p } => c * p * t.powf(p - 1.0),
            ProfileSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
        }
    }

    fn d2(&self, t: f64) -> f64 {
        match self {
            ProfileSpec::Power { c, p } => c * p * (p - 1.0) * t.powf(p - 2.0),
            ProfileSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + (k * (k - 1)) as f64 * c),
        }
    }
}

/// The four radial quantities at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RadialQuantities {
    /// `max{ρ/r, |ρ'|}`.
    pub df_norm: f64,
    /// `ρ'(r) (ρ(r)/r)^{n-1}`.
    pub jac: f64,
    /// `max{|ρ''|, |ρ/r² - ρ'/r|}`.
    pub d2f_norm: f64,
}

#[derive(Clone)]
pub struct RadialMap {
    n: usize,
    center: Vec<f64>,
    profile: Arc<dyn Profile>,
    domain: Domain,
}

impl RadialMap {
    pub fn new(n: usize, profile: Arc<dyn Profile>, domain: Domain) -> Result<Self> {
        Self::centered(vec![0.0; n], profile, domain)
    }

    pub fn centered(center: Vec<f64>, profile: Arc<dyn Profile>, domain: Domain) -> Result<Self> {
        let n = center.len();
        if n < 1 || domain.dim() != n {
            return Err(Error::InvalidParams("radial map: center and domain dimensions differ".into()));
        }
        Ok(RadialMap { n, center, profile, domain })
    }

    pub fn from_spec(n: usize, spec: ProfileSpec, domain: Domain) -> Result<Self> {
        spec.validate()?;
        Self::new(n, Arc::new(spec), domain)
    }

    pub fn profile(&self) -> &dyn Profile {
        self.profile.as_ref()
    }

    fn offset(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_finite(x, self.n)?;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let r = norm(&y);
        if r == 0.0 {
            return Err(Error::Singular("radial formulas are singular at the center".into()));
        }
        Ok((y, r))
    }

    /// Closed-form norms and Jacobian.
    pub fn quantities(&self, x: &[f64]) -> Result<RadialQuantities> {
        let (_, r) = self.offset(x)?;
        let rho = self.profile.value(r);
        let d1 = self.profile.d1(r);
        let d2 = self.profile.d2(r);
        Ok(RadialQuantities {
            df_norm: (rho / r).max(d1.abs()),
            jac: d1 * (rho / r).powi(self.n as i32 - 1),
            d2f_norm: d2.abs().max((rho / (r * r) - d1 / r).abs()),
        })
    }
}

impl Mapping for RadialMap {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn family(&self) -> &'static str {
        "radial"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (y, r) = self.offset(x)?;
        let scale = self.profile.value(r) / r;
        Ok(y.iter().zip(&self.center).map(|(v, c)| c + scale * v).collect())
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let (y, r) = self.offset(x)?;
        let n = self.n;
        let rho = self.profile.value(r);
        let d1 = self.profile.d1(r);
        let d2 = self.profile.d2(r);
        let u: Vec<f64> = y.iter().map(|v| v / r).collect();
        let a = rho / r;
        let value = y.iter().zip(&self.center).map(|(v, c)| c + a * v).collect();
        let df = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { a } else { 0.0 };
            id + (d1 - a) * u[i] * u[j]
        });
        // A = ρ/r as a function of r, and its first two derivatives.
        let a1 = d1 / r - rho / (r * r);
        let a2 = d2 / r - 2.0 * d1 / (r * r) + 2.0 * rho / (r * r * r);
        let mut h = Hessian::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let dik = if i == k { 1.0 } else { 0.0 };
                    let djk = if j == k { 1.0 } else { 0.0 };
                    let v = a1 * (u[k] * dij + u[j] * dik + u[i] * djk - u[i] * u[j] * u[k])
                        + a2 * r * u[i] * u[j] * u[k];
                    h.set(i, j, k, v);
                }
            }
        }
        Ok(Jet { value, df, d2: Some(h) })
    }

    fn jacobian(&self, x: &[f64]) -> Result<f64> {
        Ok(self.quantities(x)?.jac)
    }

    fn d2_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.quantities(x)?.d2f_norm)
    }

    fn loci(&self) -> Vec<Locus> {
        let c = self.center.clone();
        let c2 = self.center.clone();
        vec![Locus::singular("center", move |x: &[f64]| {
            x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .with_box_test(move |lo, hi| c2.iter().enumerate().all(|(j, v)| lo[j] <= *v && *v <= hi[j]))]
    }
}
