//! Per-generation energy bookkeeping for the Cantor squeeze map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cubature::{integrate, CellKind, CubatureConfig};
use super::energy::{EnergyParams, EnergyReport, GenerationEnergy, Psi};
use crate::cantor::CantorSchedule;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::regimes::derive_exponents_exact;

/// Closed-form description of both geometric series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeriesSummary {
    /// Exponent `e` of the norm series ratio `2^e` for `D²f`.
    pub d2_exponent: f64,
    pub d2_exponent_exact: Option<String>,
    pub jac_exponent: f64,
    pub jac_exponent_exact: Option<String>,
    pub d2_norm_ratio: f64,
    /// Ratio of the integral terms, `2^(q e)`.
    pub d2_integral_ratio: f64,
    pub jac_ratio: f64,
    pub partial_sums_d2: Vec<f64>,
    pub partial_sums_d2_norm: Vec<f64>,
    pub partial_sums_jac: Vec<f64>,
    pub limit_d2: f64,
    pub limit_d2_norm: f64,
    pub limit_jac: f64,
    /// `numeric / analytic` at generation 1, absorbing the unnamed constants.
    pub fitted_d2_constant: Option<f64>,
    pub fitted_jac_constant: Option<f64>,
}

/// Analytic per-generation terms `(D² integral, D² norm, Jacobian)` for
/// generations `1..=count`.
pub fn analytic_terms(s: &CantorSchedule, count: usize) -> Vec<(f64, f64, f64)> {
    let n = s.n() as f64;
    let p = s.params();
    let (q, a, d, beta) = (p.q, p.a, p.d, s.beta());
    (1..=count)
        .map(|i| {
            let i = i as f64;
            let vol = 2f64.powf(-(n / d) * (i - 1.0) * n);
            let cells = 2f64.powf(n * i);
            let d2 = cells * vol * 2f64.powf(q * (n / d - beta) * i);
            let jac = cells * vol * 2f64.powf(a * beta * i);
            (d2, d2.powf(1.0 / q), jac)
        })
        .collect()
}

fn partial_sums(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = NeumaierSum::new();
    xs.map(|x| {
        acc.add(x);
        acc.value()
    })
    .collect()
}

/// Per-generation integrals of one generation map over its annulus
/// `Q(0, a_{i-1}/2) \ Q(0, a_i)`, multiplied by the `2^{ni}` cell count.
fn numeric_generation(s: &CantorSchedule, i: usize, p: &EnergyParams) -> Result<(f64, f64, bool, usize)> {
    let n = s.n();
    let boxes = s.annulus_boxes(i)?;
    let cfg = CubatureConfig { tol_rel: p.tol_rel, tol_abs: 0.0, max_cells: p.max_cells };
    let regular = |_: &[f64], _: &[f64]| CellKind::Regular;
    let (q, a) = (p.q, p.a);
    let d2f = |y: &[f64]| match s.local_jet(i, y) {
        Ok(j) => match p.psi {
            Psi::NormPower => j.d2_bound.powf(q),
            Psi::FrobeniusPower => j.hess.norm().powf(q),
        },
        Err(_) => f64::NAN,
    };
    let jf = |y: &[f64]| match s.local_jet(i, y) {
        Ok(j) => j.grad[n - 1].abs().powf(-a),
        Err(_) => f64::NAN,
    };
    let parts: Vec<Result<(f64, f64, bool, usize)>> = boxes
        .par_iter()
        .map(|(lo, hi)| {
            let d = integrate(&d2f, lo, hi, &cfg, &regular)?;
            let j = integrate(&jf, lo, hi, &cfg, &regular)?;
            Ok((d.value, j.value, d.converged && j.converged, d.cells + j.cells))
        })
        .collect();
    let mut d2 = NeumaierSum::new();
    let mut jac = NeumaierSum::new();
    let mut ok = true;
    let mut cells = 0;
    for r in parts {
        let (a, b, c, k) = r?;
        d2.add(a);
        jac.add(b);
        ok &= c;
        cells += k;
    }
    let count = 2f64.powi((n * i) as i32);
    Ok((count * d2.value(), count * jac.value(), ok, cells))
}

/// Analytic series plus numeric per-generation integrals for a schedule.
/// The numeric totals cover the whole cube: the annuli of generations
/// `1..=k` together with the generation-`k` cores partition it.
pub fn cantor_series(s: &CantorSchedule, p: &EnergyParams) -> Result<EnergyReport> {
    p.validate()?;
    let sp = s.params();
    if (p.q - sp.q).abs() > 1e-12 || (p.a - sp.a).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "energy exponents (q={}, a={}) differ from the schedule's (q={}, a={})",
            p.q, p.a, sp.q, sp.a
        )));
    }
    let summary = series_summary(s, s.max_gen().max(1))?;
    let k = s.max_gen();
    let terms = analytic_terms(s, k);
    let mut rows = Vec::with_capacity(k);
    let mut all_ok = true;
    let mut cells = 0;
    for i in 1..=k {
        let (nd2, njac, ok, c) = numeric_generation(s, i, p)?;
        all_ok &= ok;
        cells += c;
        let (d2, d2n, jac) = terms[i - 1];
        rows.push(GenerationEnergy {
            i,
            analytic_d2_term: d2,
            analytic_d2_norm_term: d2n,
            analytic_jac_term: jac,
            numeric_d2: nd2,
            numeric_jac: njac,
        });
    }
    let n = s.n() as i32;
    let core = if k == 0 {
        2f64.powi(n)
    } else {
        let g = s.generation(k);
        2f64.powi(n * k as i32) * (2.0 * g.a).powi(n) * (g.b / g.a).powf(-p.a)
    };
    let d2_total: f64 = partial_sums(rows.iter().map(|r| r.numeric_d2)).last().copied().unwrap_or(0.0);
    let jac_total = partial_sums(rows.iter().map(|r| r.numeric_jac).chain([core])).last().copied().unwrap_or(core);
    let mut summary = summary;
    if let Some(r) = rows.first() {
        summary.fitted_d2_constant = Some(r.numeric_d2 / r.analytic_d2_term);
        summary.fitted_jac_constant = Some(r.numeric_jac / r.analytic_jac_term);
    }
    Ok(EnergyReport {
        d2_integral: d2_total,
        jac_neg_integral: jac_total,
        d2_error: p.tol_rel * d2_total,
        jac_error: p.tol_rel * jac_total,
        per_generation: rows,
        converged: all_ok,
        d2_converged: all_ok,
        jac_converged: all_ok,
        cells_used: cells,
        closed_form_evals: 0,
        fd_evals: 0,
        tol_rel: p.tol_rel,
        series: Some(summary),
    })
}

/// Ratios, partial sums over `count` generations, and closed-form limits.
/// A ratio of at least one means the schedule is inconsistent.
pub fn series_summary(s: &CantorSchedule, count: usize) -> Result<SeriesSummary> {
    let p = s.params();
    let ex = crate::regimes::derive_exponents(p);
    let exact = derive_exponents_exact(p);
    let (e_d2, e_jac) = (ex.series_exp_d2, ex.series_exp_jac);
    let r_norm = 2f64.powf(e_d2);
    let r_int = 2f64.powf(p.q * e_d2);
    let r_jac = 2f64.powf(e_jac);
    if !(r_norm < 1.0 && r_int < 1.0 && r_jac < 1.0) {
        return Err(Error::Precondition(format!(
            "construction inconsistency: series ratios {r_norm}, {r_jac} are not contractive"
        )));
    }
    let terms = analytic_terms(s, count);
    let (t_d2, t_norm, t_jac) = analytic_terms(s, 1)[0];
    Ok(SeriesSummary {
        d2_exponent: e_d2,
        d2_exponent_exact: exact.as_ref().map(|e| e.series_exp_d2.to_string()),
        jac_exponent: e_jac,
        jac_exponent_exact: exact.as_ref().map(|e| e.series_exp_jac.to_string()),
        d2_norm_ratio: r_norm,
        d2_integral_ratio: r_int,
        jac_ratio: r_jac,
        partial_sums_d2: partial_sums(terms.iter().map(|t| t.0)),
        partial_sums_d2_norm: partial_sums(terms.iter().map(|t| t.1)),
        partial_sums_jac: partial_sums(terms.iter().map(|t| t.2)),
        limit_d2: t_d2 / (1.0 - r_int),
        limit_d2_norm: t_norm / (1.0 - r_norm),
        limit_jac: t_jac / (1.0 - r_jac),
        fitted_d2_constant: None,
        fitted_jac_constant: None,
    })
}
