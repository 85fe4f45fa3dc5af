//! Smooth maps with closed-form derivatives, used as test inputs.

use nalgebra::DMatrix;

use super::{check_finite, Domain, Hessian, Jet, Mapping};
use crate::error::{Error, Result};

/// `x ↦ A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: Vec<f64>,
    domain: Domain,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: Vec<f64>, domain: Domain) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || offset.len() != n || domain.dim() != n {
            return Err(Error::InvalidParams("affine map: inconsistent dimensions".into()));
        }
        Ok(AffineMap { matrix, offset, domain })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap { matrix: DMatrix::identity(n, n), offset: vec![0.0; n], domain: Domain::unit_cube(n) }
    }
}

impl Mapping for AffineMap {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn family(&self) -> &'static str {
        "affine"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_finite(x, n)?;
        Ok((0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum::<f64>() + self.offset[i]).collect())
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        Ok(Jet { value: self.value(x)?, df: self.matrix.clone(), d2: Some(Hessian::zeros(self.dim())) })
    }
}

/// `f_i(x) = x_i + eps_i sin(k_i · x + phase_i)`: a smooth perturbation of the
/// identity.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMap {
    eps: Vec<f64>,
    freq: Vec<Vec<f64>>,
    phase: Vec<f64>,
    domain: Domain,
}

impl TrigMap {
    pub fn new(eps: Vec<f64>, freq: Vec<Vec<f64>>, phase: Vec<f64>, domain: Domain) -> Result<Self> {
        let n = eps.len();
        if freq.len() != n || phase.len() != n || freq.iter().any(|f| f.len() != n) || domain.dim() != n {
            return Err(Error::InvalidParams("trig map: inconsistent dimensions".into()));
        }
        Ok(TrigMap { eps, freq, phase, domain })
    }

    fn arg(&self, i: usize, x: &[f64]) -> f64 {
        self.freq[i].iter().zip(x).map(|(k, v)| k * v).sum::<f64>() + self.phase[i]
    }
}

impl Mapping for TrigMap {
    fn dim(&self) -> usize {
        self.eps.len()
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn family(&self) -> &'static str {
        "trig"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_finite(x, n)?;
        Ok((0..n).map(|i| x[i] + self.eps[i] * self.arg(i, x).sin()).collect())
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let n = self.dim();
        let value = self.value(x)?;
        let mut df = DMatrix::identity(n, n);
        let mut d2 = Hessian::zeros(n);
        for i in 0..n {
            let s = self.arg(i, x);
            let (sn, cs) = s.sin_cos();
            for j in 0..n {
                df[(i, j)] += self.eps[i] * cs * self.freq[i][j];
                for k in 0..n {
                    d2.set(i, j, k, -self.eps[i] * sn * self.freq[i][j] * self.freq[i][k]);
                }
            }
        }
        Ok(Jet { value, df, d2: Some(d2) })
    }
}
