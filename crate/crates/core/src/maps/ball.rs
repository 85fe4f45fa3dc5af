//! Ball-type map collapsing the segment `{x̄ = 0} × [-1, 1]` to the origin,
//! extended to `[-1,1]^{n-1} × [-2,2]` so it is injective on the boundary.

use nalgebra::DMatrix;

use super::{check_finite, norm, Domain, Hessian, Jet, Locus, Mapping};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BallMap {
    n: usize,
    beta: f64,
}

/// Open interval of admissible collapse exponents, `(2 - (n-1)/q, (n-1)/a)`.
pub fn admissible_beta(n: usize, q: f64, a: f64) -> (f64, f64) {
    let m = (n - 1) as f64;
    (2.0 - m / q, m / a)
}

impl BallMap {
    pub fn new(n: usize, q: f64, a: f64, beta: f64) -> Result<Self> {
        let (lo, hi) = admissible_beta(n, q, a);
        if lo >= hi {
            return Err(Error::InvalidParams(format!(
                "empty beta interval ({lo}, {hi}): need a (2/(n-1) - 1/q) < 1"
            )));
        }
        if !(beta > lo && beta < hi) {
            return Err(Error::InvalidParams(format!("beta={beta} outside ({lo}, {hi})")));
        }
        Self::with_beta(n, beta)
    }

    pub fn midpoint(n: usize, q: f64, a: f64) -> Result<Self> {
        let (lo, hi) = admissible_beta(n, q, a);
        Self::new(n, q, a, 0.5 * (lo + hi))
    }

    /// Any exponent `beta > 0`, admissible or not.
    pub fn with_beta(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("Ball map needs n >= 2".into()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
        }
        Ok(BallMap { n, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn box_domain(n: usize) -> Domain {
        let mut lo = vec![-1.0; n];
        let mut hi = vec![1.0; n];
        lo[n - 1] = -2.0;
        hi[n - 1] = 2.0;
        Domain::Cube { lo, hi }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        check_finite(x, self.n)?;
        Self::box_domain(self.n).check(x)
    }

    fn last(&self, xbar_norm: f64, xn: f64) -> f64 {
        let p = xbar_norm.powf(self.beta);
        let t = xn.abs();
        if t <= 1.0 {
            p * xn
        } else {
            xn.signum() * ((t - 1.0) * (t - 1.0) + p * t)
        }
    }
}

impl Mapping for BallMap {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Domain {
        Self::box_domain(self.n)
    }

    fn family(&self) -> &'static str {
        "ball"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let n = self.n;
        let mut v = x.to_vec();
        v[n - 1] = self.last(norm(&x[..n - 1]), x[n - 1]);
        Ok(v)
    }

    fn jacobian(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let n = self.n;
        let p = norm(&x[..n - 1]).powf(self.beta);
        let t = x[n - 1].abs();
        Ok(if t <= 1.0 { p } else { 2.0 * (t - 1.0) + p })
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check(x)?;
        let n = self.n;
        let m = n - 1;
        let b = self.beta;
        let r = norm(&x[..m]);
        let xn = x[n - 1];
        let t = xn.abs();
        let p = r.powf(b);
        let mut value = x.to_vec();
        value[m] = self.last(r, xn);

        // r^{β-2} x_j is the gradient of r^β / β; at r = 0 it vanishes for
        // β > 1 and blows up otherwise.
        let grad_factor = if r > 0.0 {
            b * r.powf(b - 2.0)
        } else if b > 1.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let mut df = DMatrix::identity(n, n);
        for j in 0..m {
            df[(m, j)] = grad_factor * x[j] * xn;
        }
        df[(m, m)] = if t <= 1.0 { p } else { 2.0 * (t - 1.0) + p };

        let mut d2 = Hessian::zeros(n);
        if r > 0.0 {
            let r2 = b * r.powf(b - 2.0);
            let r4 = b * (b - 2.0) * r.powf(b - 4.0);
            for j in 0..m {
                for k in 0..m {
                    let dij = if j == k { r2 } else { 0.0 };
                    d2.set(m, j, k, xn * (r4 * x[j] * x[k] + dij));
                }
                d2.set_sym(m, j, m, r2 * x[j]);
            }
        } else if b < 2.0 {
            for j in 0..m {
                d2.set(m, j, j, f64::INFINITY);
            }
        } else if b == 2.0 {
            for j in 0..m {
                d2.set(m, j, j, 2.0 * xn);
            }
        }
        if t > 1.0 {
            d2.set(m, m, m, 2.0 * xn.signum());
        }
        Ok(Jet { value, df, d2: Some(d2) })
    }

    fn loci(&self) -> Vec<Locus> {
        let n = self.n;
        vec![
            Locus::singular("segment x̄ = 0", move |x: &[f64]| norm(&x[..n - 1]))
                .with_box_test(move |lo, hi| (0..n - 1).all(|j| lo[j] <= 0.0 && hi[j] >= 0.0)),
            Locus::singular("seam |x_n| = 1", move |x: &[f64]| (x[n - 1].abs() - 1.0).abs()).with_box_test(
                move |lo, hi| {
                    let (a, b) = (lo[n - 1], hi[n - 1]);
                    (a < 1.0 && b > 1.0) || (a < -1.0 && b > -1.0)
                },
            ),
        ]
    }
}
