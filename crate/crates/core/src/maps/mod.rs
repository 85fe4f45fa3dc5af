//! Mapping families with closed-form first and second derivatives.

pub mod ball;
pub mod dense;
pub mod folding;
pub mod radial;
pub mod smooth;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linalg;

pub use ball::BallMap;
pub use dense::DenseMap;
pub use folding::FoldingMap;
pub use radial::{Profile, RadialMap};
pub use smooth::{AffineMap, TrigMap};

/// Slack used when testing domain membership.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Domain {
    Cube { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn unit_cube(n: usize) -> Domain {
        Domain::Cube { lo: vec![-1.0; n], hi: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Cube { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Cube { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - DOMAIN_SLACK && *v <= h + DOMAIN_SLACK),
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2.sqrt() <= radius + DOMAIN_SLACK
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Cube { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{x:?} not in {self:?}")))
        }
    }
}

/// Second derivatives of a vector map: entry `(i, j, k)` is `∂_j ∂_k f_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hessian {
    n: usize,
    data: Vec<f64>,
}

impl Hessian {
    pub fn zeros(n: usize) -> Self {
        Hessian { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let id = self.idx(i, j, k);
        self.data[id] = v;
    }

    /// Set `(i, j, k)` and `(i, k, j)`.
    pub fn set_sym(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.set(i, j, k, v);
        self.set(i, k, j, v);
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let id = self.idx(i, j, k);
        self.data[id] += v;
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Value and derivatives of a map at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: Vec<f64>,
    pub df: DMatrix<f64>,
    pub d2: Option<Hessian>,
}

impl Jet {
    pub fn jacobian(&self) -> f64 {
        linalg::det(&self.df)
    }
}

/// How close a point is to a registered locus and the length scale on which
/// the integrand varies there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proximity {
    /// Lower bound for the Euclidean distance to the locus.
    pub distance: f64,
    /// Feature width; zero for genuine singularities.
    pub scale: f64,
}

type ProximityFn = dyn Fn(&[f64]) -> Proximity + Send + Sync;
type BoxTestFn = dyn Fn(&[f64], &[f64]) -> bool + Send + Sync;

/// A set where derivatives blow up, jump, or vary on a small scale.
#[derive(Clone)]
pub struct Locus {
    pub label: String,
    pub singular: bool,
    proximity: Arc<ProximityFn>,
    box_test: Option<Arc<BoxTestFn>>,
}

impl Locus {
    pub fn singular(label: impl Into<String>, distance: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Locus {
            label: label.into(),
            singular: true,
            proximity: Arc::new(move |x| Proximity { distance: distance(x), scale: 0.0 }),
            box_test: None,
        }
    }

    pub fn feature(label: impl Into<String>, proximity: impl Fn(&[f64]) -> Proximity + Send + Sync + 'static) -> Self {
        Locus { label: label.into(), singular: false, proximity: Arc::new(proximity), box_test: None }
    }

    /// Attaches an exact test for whether the closed box `[lo, hi]` meets the locus.
    pub fn with_box_test(mut self, test: impl Fn(&[f64], &[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.box_test = Some(Arc::new(test));
        self
    }

    pub fn proximity(&self, x: &[f64]) -> Proximity {
        (self.proximity)(x)
    }

    /// `Some(meets)` when the locus carries an exact box test.
    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> Option<bool> {
        self.box_test.as_ref().map(|t| t(lo, hi))
    }
}

/// Smallest and largest `Σ x_j²` over the box `[lo, hi]`.
pub fn box_square_norm_range(lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let mut min = 0.0;
    let mut max = 0.0;
    for (&a, &b) in lo.iter().zip(hi) {
        let near = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
        let far = a.abs().max(b.abs());
        min += near * near;
        max += far * far;
    }
    (min, max)
}

impl fmt::Debug for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Locus").field("label", &self.label).field("singular", &self.singular).finish()
    }
}

/// A map `Ω ⊂ R^n → R^n` with pointwise derivative evaluation.
pub trait Mapping: Send + Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> Domain;
    fn family(&self) -> &'static str;
    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Value, gradient, and (when available in closed form) second derivatives.
    fn jet(&self, x: &[f64]) -> Result<Jet>;

    fn jacobian(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x)?.jacobian())
    }

    /// Norm of `D²f` used by the energy functional; defaults to the max-entry
    /// norm of the closed-form second derivatives.
    fn d2_norm(&self, x: &[f64]) -> Result<f64> {
        match self.jet(x)?.d2 {
            Some(h) => Ok(h.max_abs()),
            None => Err(Error::Precondition(format!("{} has no closed-form D²f", self.family()))),
        }
    }

    /// Whether `jet` returns second derivatives.
    fn has_closed_d2(&self) -> bool {
        true
    }

    fn loci(&self) -> Vec<Locus> {
        Vec::new()
    }
}

/// Lower bound for the distance from `x` to the nearest singular locus.
pub fn singular_distance(map: &dyn Mapping, x: &[f64]) -> f64 {
    map.loci()
        .iter()
        .filter(|l| l.singular)
        .map(|l| l.proximity(x).distance)
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn check_finite(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Domain(format!("expected {n} coordinates, got {}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {i} is {}", x[i])));
    }
    Ok(())
}
