//! The standard bump kernel `c * exp(-1/(1-t^2))` on (-1, 1) and the exact
//! smoothing primitives built from it.
//!
//! Convolving a continuous piecewise-linear function with the kernel only
//! requires the kernel's cumulative distribution `Φ` and first moment `M`,
//! both tabulated once with Hermite interpolation. Every smoothed profile in
//! the crate (Cantor profiles, dense-map profile, cutoffs) is evaluated
//! through these primitives, so value, first and second derivative are exact
//! up to table accuracy (about 1e-15).

use std::sync::OnceLock;

use super::gauss::GaussRule;
use super::summation::NeumaierSum;

const TABLE_INTERVALS: usize = 4096;

struct BumpTables {
    norm: f64,
    cdf: Vec<f64>,
    moment: Vec<f64>,
}

fn unnormalized(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn tables() -> &'static BumpTables {
    static TABLES: OnceLock<BumpTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let rule = GaussRule::legendre(16);
        let h = 2.0 / TABLE_INTERVALS as f64;
        let mut cdf = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut moment = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut c_acc = NeumaierSum::new();
        let mut m_acc = NeumaierSum::new();
        cdf.push(0.0);
        moment.push(0.0);
        for k in 0..TABLE_INTERVALS {
            let lo = -1.0 + k as f64 * h;
            let hi = lo + h;
            c_acc.add(rule.integrate(lo, hi, unnormalized));
            m_acc.add(rule.integrate(lo, hi, |t| t * unnormalized(t)));
            cdf.push(c_acc.value());
            moment.push(m_acc.value());
        }
        let norm = 1.0 / c_acc.value();
        for v in cdf.iter_mut() {
            *v *= norm;
        }
        for v in moment.iter_mut() {
            *v *= norm;
        }
        BumpTables { norm, cdf, moment }
    })
}

/// Normalized kernel density.
pub fn density(t: f64) -> f64 {
    tables().norm * unnormalized(t)
}

/// Derivative of the normalized kernel density.
pub fn density_derivative(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        density(t) * (-2.0 * t / (s * s))
    }
}

/// Quintic Hermite interpolation from tabulated values plus exact first and
/// second derivatives at the nodes.
fn hermite(table: &[f64], d1: impl Fn(f64) -> f64, d2: impl Fn(f64) -> f64, v: f64) -> f64 {
    let h = 2.0 / TABLE_INTERVALS as f64;
    let pos = (v + 1.0) / h;
    let k = (pos.floor().max(0.0) as usize).min(TABLE_INTERVALS - 1);
    let x0 = -1.0 + k as f64 * h;
    let x1 = x0 + h;
    let s = (v - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5) = (s3 * s, s3 * s2);
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
    table[k] * h0
        + h * d1(x0) * h1
        + h * h * d2(x0) * h2
        + table[k + 1] * h3
        + h * d1(x1) * h4
        + h * h * d2(x1) * h5
}

/// Cumulative distribution `Φ(v) = ∫_{-1}^{v} φ`.
pub fn cdf(v: f64) -> f64 {
    if v <= -1.0 {
        0.0
    } else if v >= 1.0 {
        1.0
    } else if v > 0.0 {
        1.0 - hermite(&tables().cdf, density, density_derivative, -v)
    } else {
        hermite(&tables().cdf, density, density_derivative, v)
    }
}

/// First moment `M(v) = ∫_{-1}^{v} s φ(s) ds`.
pub fn first_moment(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        hermite(
            &tables().moment,
            |t| t * density(t),
            |t| density(t) + t * density_derivative(t),
            -v.abs(),
        )
    }
}

/// `R(v) = ∫_{-∞}^{v} Φ`, the kernel-smoothed ramp `max(v, 0)`.
pub fn smooth_ramp(v: f64) -> f64 {
    if v <= -1.0 {
        0.0
    } else if v >= 1.0 {
        v
    } else {
        v * cdf(v) - first_moment(v)
    }
}

/// Smooth non-increasing step: exactly 1 on `(-∞, a]`, exactly 0 on `[b, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothStep {
    pub a: f64,
    pub b: f64,
}

impl SmoothStep {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a < b, "smooth step needs a < b");
        SmoothStep { a, b }
    }

    fn arg(&self, t: f64) -> f64 {
        (self.a + self.b - 2.0 * t) / (self.b - self.a)
    }

    pub fn value(&self, t: f64) -> f64 {
        cdf(self.arg(t))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        -2.0 * density(self.arg(t)) / (self.b - self.a)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let w = self.b - self.a;
        4.0 * density_derivative(self.arg(t)) / (w * w)
    }
}

/// A kink of a continuous piecewise-linear function: at `at` the slope jumps
/// by `jump`; the kink is smoothed with the kernel scaled to `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kink {
    pub at: f64,
    pub jump: f64,
    pub radius: f64,
}

/// Continuous piecewise-linear function convolved with the scaled kernel.
///
/// Writing the function as `c + s0*t + Σ jump_k (t - at_k)_+`, the convolution
/// replaces each ramp by `radius * R((t - at)/radius)`; linear parts are
/// reproduced exactly because the kernel is even with unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedPiecewiseLinear {
    pub intercept: f64,
    pub slope: f64,
    pub kinks: Vec<Kink>,
}

impl SmoothedPiecewiseLinear {
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        acc.add(self.intercept);
        acc.add(self.slope * t);
        for k in &self.kinks {
            acc.add(k.jump * k.radius * smooth_ramp((t - k.at) / k.radius));
        }
        acc.value()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let mut d = self.slope;
        for k in &self.kinks {
            d += k.jump * cdf((t - k.at) / k.radius);
        }
        d
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let mut d = 0.0;
        for k in &self.kinks {
            d += k.jump * density((t - k.at) / k.radius) / k.radius;
        }
        d
    }

    /// The unsmoothed piecewise-linear function.
    pub fn raw_value(&self, t: f64) -> f64 {
        let mut v = self.intercept + self.slope * t;
        for k in &self.kinks {
            v += k.jump * (t - k.at).max(0.0);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gauss::adaptive_gk15;

    #[test]
    fn kernel_has_unit_mass_and_zero_mean() {
        assert!((cdf(1.0 - 1e-12) - 1.0).abs() < 1e-14);
        assert!(first_moment(0.999_999).abs() < 1e-14);
        let (mass, ok) = adaptive_gk15(&density, -1.0, 1.0, 1e-15, 1e-14, 1000);
        assert!(ok);
        assert!((mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cdf_matches_direct_quadrature() {
        for &v in &[-0.9, -0.5, -0.123, 0.0, 0.31, 0.77, 0.95] {
            let (direct, _) = adaptive_gk15(&density, -1.0, v, 1e-16, 1e-14, 1000);
            assert!((cdf(v) - direct).abs() < 1e-14, "v={v}");
            let (m, _) = adaptive_gk15(&|s: f64| s * density(s), -1.0, v, 1e-16, 1e-14, 1000);
            assert!((first_moment(v) - m).abs() < 1e-14, "v={v}");
        }
    }

    #[test]
    fn smooth_ramp_matches_convolution() {
        for &v in &[-0.8, -0.2, 0.0, 0.4, 0.9] {
            let (direct, _) =
                adaptive_gk15(&|s: f64| (v - s).max(0.0) * density(s), -1.0, 1.0, 1e-16, 1e-13, 4000);
            assert!((smooth_ramp(v) - direct).abs() < 1e-13, "v={v}");
        }
        assert_eq!(smooth_ramp(-1.5), 0.0);
        assert_eq!(smooth_ramp(2.0), 2.0);
    }

    #[test]
    fn smooth_step_is_exact_outside_window() {
        let s = SmoothStep::new(0.3, 0.5);
        assert_eq!(s.value(0.2), 1.0);
        assert_eq!(s.value(0.3), 1.0);
        assert_eq!(s.value(0.5), 0.0);
        assert_eq!(s.derivative(0.6), 0.0);
        assert!((s.value(0.4) - 0.5).abs() < 1e-14);
        assert!(s.derivative(0.4) < 0.0);
    }

    #[test]
    fn smoothed_profile_derivatives_match_finite_differences() {
        let p = SmoothedPiecewiseLinear {
            intercept: 0.0,
            slope: 0.5,
            kinks: vec![
                Kink { at: 1.0, jump: 2.0, radius: 0.1 },
                Kink { at: 2.0, jump: -1.0, radius: 0.2 },
            ],
        };
        for &t in &[0.95, 1.03, 1.9, 2.05, 2.5] {
            let h = 1e-6;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((fd - p.derivative(t)).abs() < 1e-7, "t={t}");
            let fd2 = (p.derivative(t + h) - p.derivative(t - h)) / (2.0 * h);
            assert!((fd2 - p.second_derivative(t)).abs() < 1e-5 * (1.0 + fd2.abs()), "t={t}");
        }
        assert_eq!(p.value(0.5), p.raw_value(0.5));
        assert!((p.value(3.0) - p.raw_value(3.0)).abs() < 1e-14);
    }
}
