//! Central finite differences used as an independent derivative oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{check_finite, Hessian, Mapping};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffConfig {
    pub step: f64,
    pub richardson: bool,
    /// Minimum distance to a registered singular locus.
    pub singular_standoff: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig { step: 1e-5, richardson: true, singular_standoff: 1e-3 }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-8..=1e-3).contains(&self.step) {
            return Err(Error::InvalidParams(format!("step {} outside [1e-8, 1e-3]", self.step)));
        }
        if !(self.singular_standoff >= 10.0 * self.step) {
            return Err(Error::InvalidParams(format!(
                "standoff {} must be at least 10 * step = {}",
                self.singular_standoff,
                10.0 * self.step
            )));
        }
        Ok(())
    }
}

/// Refuse points whose difference stencil (radius `reach`) leaves the domain
/// or whose distance to a singular locus is below `standoff`.
fn admissible(map: &dyn Mapping, x: &[f64], reach: f64, standoff: f64) -> Result<()> {
    let n = map.dim();
    check_finite(x, n)?;
    let dom = map.domain();
    for j in 0..n {
        for s in [-1.0, 1.0] {
            let mut y = x.to_vec();
            y[j] += s * reach;
            if !dom.contains(&y) {
                return Err(Error::Domain(format!(
                    "difference stencil of radius {reach} around {x:?} leaves the domain along axis {j}"
                )));
            }
        }
    }
    for locus in map.loci().iter().filter(|l| l.singular) {
        let d = locus.proximity(x).distance;
        if d < standoff {
            return Err(Error::Singular(format!(
                "point {x:?} lies {d:.3e} from singular locus '{}' (standoff {standoff:.1e})",
                locus.label
            )));
        }
    }
    Ok(())
}

fn eval_checked(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, y: &[f64]) -> Result<Vec<f64>> {
    let v = f(y)?;
    if let Some(i) = v.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("component {i} is {} at {y:?}", v[i])));
    }
    Ok(v)
}

/// Central-difference Jacobian matrix of an arbitrary evaluator.
pub fn gradient_of(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    m: usize,
    c: &DiffConfig,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let central = |h: f64| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m, n);
        let mut y = x.to_vec();
        for j in 0..n {
            let (hi, lo) = (x[j] + h, x[j] - h);
            y[j] = hi;
            let p = eval_checked(f, &y)?;
            y[j] = lo;
            let q = eval_checked(f, &y)?;
            y[j] = x[j];
            for i in 0..m {
                out[(i, j)] = (p[i] - q[i]) / (hi - lo);
            }
        }
        Ok(out)
    };
    let coarse = central(c.step)?;
    if !c.richardson {
        return Ok(coarse);
    }
    let fine = central(0.5 * c.step)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Second partials of an arbitrary evaluator.
pub fn hessian_of(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    m: usize,
    c: &DiffConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let n = x.len();
    let central = |h: f64| -> Result<Vec<DMatrix<f64>>> {
        let f0 = eval_checked(f, x)?;
        let mut out = vec![DMatrix::zeros(n, n); m];
        let at = |d: &[(usize, f64)]| -> Result<Vec<f64>> {
            let mut y = x.to_vec();
            for &(j, s) in d {
                y[j] += s;
            }
            eval_checked(f, &y)
        };
        for j in 0..n {
            let p = at(&[(j, h)])?;
            let q = at(&[(j, -h)])?;
            for i in 0..m {
                out[i][(j, j)] = (p[i] - 2.0 * f0[i] + q[i]) / (h * h);
            }
            for k in j + 1..n {
                let pp = at(&[(j, h), (k, h)])?;
                let pm = at(&[(j, h), (k, -h)])?;
                let mp = at(&[(j, -h), (k, h)])?;
                let mm = at(&[(j, -h), (k, -h)])?;
                for i in 0..m {
                    let v = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h);
                    out[i][(j, k)] = v;
                    out[i][(k, j)] = v;
                }
            }
        }
        Ok(out)
    };
    let coarse = central(c.step)?;
    if !c.richardson {
        return Ok(coarse);
    }
    let fine = central(0.5 * c.step)?;
    Ok(fine.into_iter().zip(coarse).map(|(f, c)| (f * 4.0 - c) / 3.0).collect())
}

/// Finite-difference `Df(x)`.
pub fn fd_gradient(map: &dyn Mapping, x: &[f64], c: &DiffConfig) -> Result<DMatrix<f64>> {
    c.validate()?;
    admissible(map, x, c.step, c.singular_standoff)?;
    let n = map.dim();
    gradient_of(&|y| map.value(y), x, n, c)
}

/// Finite-difference second derivatives as a [`Hessian`].
pub fn fd_hessian(map: &dyn Mapping, x: &[f64], c: &DiffConfig) -> Result<Hessian> {
    c.validate()?;
    admissible(map, x, 2.0 * c.step, 2.0 * c.singular_standoff)?;
    let n = map.dim();
    let parts = hessian_of(&|y| map.value(y), x, n, c)?;
    let mut h = Hessian::zeros(n);
    for (i, m) in parts.iter().enumerate() {
        for j in 0..n {
            for k in 0..n {
                h.set(i, j, k, m[(j, k)]);
            }
        }
    }
    Ok(h)
}

/// Largest absolute second partial over all components.
pub fn fd_hessian_norm(map: &dyn Mapping, x: &[f64], c: &DiffConfig) -> Result<f64> {
    Ok(fd_hessian(map, x, c)?.max_abs())
}

/// Determinant of the finite-difference gradient.
pub fn fd_jacobian(map: &dyn Mapping, x: &[f64], c: &DiffConfig) -> Result<f64> {
    Ok(crate::numeric::linalg::det(&fd_gradient(map, x, c)?))
}

/// Second partials from one side of a seam: every stencil point is shifted
/// by `offset` (a multiple of `direction`) so that it stays on one side.
pub fn one_sided_hessian_norm(
    map: &dyn Mapping,
    x: &[f64],
    direction: &[f64],
    c: &DiffConfig,
) -> Result<f64> {
    c.validate()?;
    let n = map.dim();
    check_finite(direction, n)?;
    let len = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return Err(Error::InvalidParams("direction must be nonzero".into()));
    }
    let shift = 4.0 * c.step * (n as f64).sqrt();
    let base: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + shift * d / len).collect();
    let parts = hessian_of(&|y| map.value(y), &base, n, c)?;
    Ok(parts.iter().flat_map(|m| m.iter()).fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::radial::ProfileSpec;
    use crate::maps::{AffineMap, Domain, RadialMap};

    #[test]
    fn identity_gradient() {
        let m = AffineMap::identity(3);
        let g = fd_gradient(&m, &[0.1, -0.2, 0.3], &DiffConfig::default()).unwrap();
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn config_bounds() {
        assert!(DiffConfig { step: 1e-2, ..Default::default() }.validate().is_err());
        assert!(DiffConfig { step: 1e-5, richardson: true, singular_standoff: 1e-5 }.validate().is_err());
    }

    #[test]
    fn radial_square_determinant() {
        let m = RadialMap::from_spec(2, ProfileSpec::Power { c: 1.0, p: 2.0 }, Domain::unit_cube(2)).unwrap();
        let x = [0.3, 0.4];
        assert!((fd_jacobian(&m, &x, &DiffConfig::default()).unwrap() - 0.5).abs() < 1e-8);
        assert!(fd_gradient(&m, &[1e-4, 0.0], &DiffConfig::default()).is_err());
    }
}
