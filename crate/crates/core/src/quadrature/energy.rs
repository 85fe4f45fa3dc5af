use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::cubature::{classify_cell, integrate, CubatureConfig, CubatureOutcome};
use super::series::SeriesSummary;
use crate::calculus::{hessian_of, DiffConfig};
use crate::error::{Error, Result};
use crate::maps::Mapping;

/// Second-gradient integrand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Psi {
    /// `|D²f|^q` with the family's own norm (`Mapping::d2_norm`).
    #[default]
    NormPower,
    /// `|D²f|^q` with the Frobenius norm of the full second-derivative tensor.
    FrobeniusPower,
}

/// Compression integrand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phi {
    /// `|det Df|^{-a}`.
    #[default]
    InverseAbsDet,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyParams {
    pub q: f64,
    pub a: f64,
    #[serde(default)]
    pub psi: Psi,
    #[serde(default)]
    pub phi: Phi,
    pub tol_rel: f64,
    /// Cell budget per integral.
    pub max_cells: usize,
}

impl EnergyParams {
    pub fn new(q: f64, a: f64, tol_rel: f64) -> Self {
        EnergyParams { q, a, psi: Psi::default(), phi: Phi::default(), tol_rel, max_cells: 2_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidParams(format!("q must be at least 1, got {}", self.q)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParams(format!("a must be positive, got {}", self.a)));
        }
        if !(1e-6..=1e-1).contains(&self.tol_rel) {
            return Err(Error::InvalidParams(format!("tolRel {} outside [1e-6, 1e-1]", self.tol_rel)));
        }
        if self.max_cells == 0 || self.max_cells > 100_000_000 {
            return Err(Error::InvalidParams(format!("maxCells {} outside [1, 1e8]", self.max_cells)));
        }
        Ok(())
    }

    pub(crate) fn cubature(&self) -> CubatureConfig {
        CubatureConfig { tol_rel: self.tol_rel, tol_abs: 0.0, max_cells: self.max_cells }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationEnergy {
    pub i: usize,
    pub analytic_d2_term: f64,
    /// `analytic_d2_term^(1/q)`, the term of the norm series.
    pub analytic_d2_norm_term: f64,
    pub analytic_jac_term: f64,
    pub numeric_d2: f64,
    pub numeric_jac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyReport {
    pub d2_integral: f64,
    pub jac_neg_integral: f64,
    pub d2_error: f64,
    pub jac_error: f64,
    pub per_generation: Vec<GenerationEnergy>,
    pub converged: bool,
    pub d2_converged: bool,
    pub jac_converged: bool,
    pub cells_used: usize,
    pub closed_form_evals: usize,
    pub fd_evals: usize,
    pub tol_rel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSummary>,
}

/// Pointwise integrands with evaluation-path counters.
pub(crate) struct Integrands<'a> {
    map: &'a dyn Mapping,
    p: EnergyParams,
    pub closed: AtomicUsize,
    pub fd: AtomicUsize,
}

impl<'a> Integrands<'a> {
    pub fn new(map: &'a dyn Mapping, p: EnergyParams) -> Self {
        Integrands { map, p, closed: AtomicUsize::new(0), fd: AtomicUsize::new(0) }
    }

    pub fn d2(&self, x: &[f64]) -> f64 {
        let q = self.p.q;
        if self.map.has_closed_d2() {
            self.closed.fetch_add(1, Ordering::Relaxed);
            let v = match self.p.psi {
                Psi::NormPower => self.map.d2_norm(x),
                Psi::FrobeniusPower => self.map.jet(x).and_then(|j| {
                    j.d2.map(|h| h.frobenius()).ok_or_else(|| Error::Precondition("missing D²f".into()))
                }),
            };
            return v.map(|v| v.powf(q)).unwrap_or(f64::NAN);
        }
        self.fd.fetch_add(1, Ordering::Relaxed);
        let n = self.map.dim();
        let parts = match hessian_of(&|y| self.map.value(y), x, n, &DiffConfig::default()) {
            Ok(p) => p,
            Err(_) => return f64::NAN,
        };
        let v = match self.p.psi {
            Psi::NormPower => parts.iter().flat_map(|m| m.iter()).fold(0.0, |a: f64, v| a.max(v.abs())),
            Psi::FrobeniusPower => parts.iter().flat_map(|m| m.iter()).map(|v| v * v).sum::<f64>().sqrt(),
        };
        v.powf(q)
    }

    pub fn jac(&self, x: &[f64]) -> f64 {
        match self.p.phi {
            Phi::Zero => 0.0,
            Phi::InverseAbsDet => match self.map.jacobian(x) {
                Ok(j) => {
                    self.closed.fetch_add(1, Ordering::Relaxed);
                    j.abs().powf(-self.p.a)
                }
                Err(_) => f64::NAN,
            },
        }
    }
}

/// `∫|D²f|^q` and `∫|J_f|^{-a}` over the box `[lo, hi]`.
pub fn energy(map: &dyn Mapping, p: &EnergyParams, lo: &[f64], hi: &[f64]) -> Result<EnergyReport> {
    p.validate()?;
    let n = map.dim();
    if lo.len() != n || hi.len() != n {
        return Err(Error::InvalidParams(format!("integration box must have dimension {n}")));
    }
    let dom = map.domain();
    if !dom.contains(lo) || !dom.contains(hi) {
        return Err(Error::Domain(format!("box {lo:?} .. {hi:?} is not inside the map's domain")));
    }
    let loci = map.loci();
    let kind = |a: &[f64], b: &[f64]| classify_cell(&loci, a, b);
    let ig = Integrands::new(map, *p);
    let cfg = p.cubature();
    let d2 = integrate(&|x: &[f64]| ig.d2(x), lo, hi, &cfg, &kind)?;
    let jac = integrate(&|x: &[f64]| ig.jac(x), lo, hi, &cfg, &kind)?;
    Ok(report_from(d2, jac, &ig, p.tol_rel))
}

pub(crate) fn report_from(d2: CubatureOutcome, jac: CubatureOutcome, ig: &Integrands, tol_rel: f64) -> EnergyReport {
    EnergyReport {
        d2_integral: d2.value,
        jac_neg_integral: jac.value,
        d2_error: d2.error,
        jac_error: jac.error,
        per_generation: Vec::new(),
        converged: d2.converged && jac.converged,
        d2_converged: d2.converged,
        jac_converged: jac.converged,
        cells_used: d2.cells + jac.cells,
        closed_form_evals: ig.closed.load(Ordering::Relaxed),
        fd_evals: ig.fd.load(Ordering::Relaxed),
        tol_rel,
        series: None,
    }
}
