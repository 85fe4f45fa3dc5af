//! Folding map: identity in `x̃ = (x_2, …, x_n)`, and a first coordinate that
//! folds the slab between `x_1 = h(x̃)` and `x_1 = 0` back over itself.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{box_square_norm_range, check_finite, Domain, Hessian, Jet, Locus, Mapping};
use crate::error::{Error, Result};

/// Lipschitz constant of the fold-depth function `h` (attained at `|x̃|² = 1/5`).
const FOLD_LIPSCHITZ: f64 = 0.858_650_103_359_919_2;

/// Partial derivatives of the first component as a function `F(x_1, H)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Branch {
    f: f64,
    fx: f64,
    fh: f64,
    fxx: f64,
    fxh: f64,
    fhh: f64,
}

/// Which of the four pieces is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldBranch {
    /// `x_1 ≥ 0`.
    Upper,
    /// `h/2 < x_1 < 0`.
    InnerFold,
    /// `h ≤ x_1 ≤ h/2`.
    OuterFold,
    /// `x_1 < h`.
    Lower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldingMap {
    n: usize,
    alpha: f64,
}

/// Result of counting preimages of a target point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreimageReport {
    pub count: usize,
    pub preimages: Vec<Vec<f64>>,
    /// Clusters with no sign change (tangential contact); each counted once.
    pub tangential_clusters: usize,
    pub out_of_range: bool,
}

/// Open interval of admissible fold exponents, `(2 - 1/q, 1 + 1/a)`.
pub fn admissible_alpha(q: f64, a: f64) -> (f64, f64) {
    (2.0 - 1.0 / q, 1.0 + 1.0 / a)
}

impl FoldingMap {
    /// Folding map with `alpha` strictly inside the admissible interval.
    pub fn new(n: usize, q: f64, a: f64, alpha: f64) -> Result<Self> {
        let (lo, hi) = admissible_alpha(q, a);
        if !(q > 1.0 && a > 0.0) {
            return Err(Error::InvalidParams(format!("folding map needs q > 1, a > 0; got q={q}, a={a}")));
        }
        if lo >= hi {
            return Err(Error::InvalidParams(format!(
                "empty alpha interval ({lo}, {hi}): need (1 - 1/q) a < 1"
            )));
        }
        if !(alpha > lo && alpha < hi) {
            return Err(Error::InvalidParams(format!("alpha={alpha} outside ({lo}, {hi})")));
        }
        Self::with_alpha(n, alpha)
    }

    /// Midpoint of the admissible interval.
    pub fn midpoint(n: usize, q: f64, a: f64) -> Result<Self> {
        let (lo, hi) = admissible_alpha(q, a);
        Self::new(n, q, a, 0.5 * (lo + hi))
    }

    /// Any fold exponent `alpha > 1`, admissible or not.
    pub fn with_alpha(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("folding map needs n >= 2".into()));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("fold exponent must exceed 1, got {alpha}")));
        }
        Ok(FoldingMap { n, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Fold depth `h(x̃) = min{0, -(1 - |x̃|²)³/2}` with gradient and Hessian.
    fn depth(&self, xt: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let m = xt.len();
        let s: f64 = xt.iter().map(|v| v * v).sum();
        if s >= 1.0 {
            return (0.0, vec![0.0; m], DMatrix::zeros(m, m));
        }
        let w = 1.0 - s;
        let h = -0.5 * w * w * w;
        let grad = xt.iter().map(|v| 3.0 * w * w * v).collect();
        let hess = DMatrix::from_fn(m, m, |j, l| {
            let d = if j == l { 3.0 * w * w } else { 0.0 };
            d - 12.0 * w * xt[j] * xt[l]
        });
        (h, grad, hess)
    }

    /// Fold depth at `x̃`.
    pub fn fold_depth(&self, xt: &[f64]) -> f64 {
        self.depth(xt).0
    }

    pub fn branch_of(&self, x1: f64, h: f64) -> FoldBranch {
        if x1 >= 0.0 {
            FoldBranch::Upper
        } else if x1 > 0.5 * h {
            FoldBranch::InnerFold
        } else if x1 >= h {
            FoldBranch::OuterFold
        } else {
            FoldBranch::Lower
        }
    }

    fn eval_branch(&self, which: FoldBranch, x: f64, h: f64) -> Branch {
        let al = self.alpha;
        let k = 2f64.powf(al - 1.0);
        let mh = -h;
        // P(H) = (-H)^α and its H-derivatives; zero when H = 0.
        let (p, p1, p2) = if mh > 0.0 {
            (mh.powf(al), -al * mh.powf(al - 1.0), al * (al - 1.0) * mh.powf(al - 2.0))
        } else {
            (0.0, 0.0, 0.0)
        };
        match which {
            FoldBranch::Upper => Branch {
                f: x.powf(al),
                fx: al * x.powf(al - 1.0),
                fxx: al * (al - 1.0) * x.powf(al - 2.0),
                ..Branch::default()
            },
            FoldBranch::InnerFold => {
                let t = -x;
                Branch {
                    f: k * t.powf(al),
                    fx: -k * al * t.powf(al - 1.0),
                    fxx: k * al * (al - 1.0) * t.powf(al - 2.0),
                    ..Branch::default()
                }
            }
            FoldBranch::OuterFold => {
                let u = x - h;
                let u1 = u.powf(al - 1.0);
                let u2 = u.powf(al - 2.0);
                Branch {
                    f: -k * u.powf(al) + p,
                    fx: -k * al * u1,
                    fh: k * al * u1 + p1,
                    fxx: -k * al * (al - 1.0) * u2,
                    fxh: k * al * (al - 1.0) * u2,
                    fhh: -k * al * (al - 1.0) * u2 + p2,
                }
            }
            FoldBranch::Lower => {
                let w = h - x;
                let num = -1.0 - p;
                let num1 = -p1;
                let num2 = -p2;
                let den = (1.0 + h).powf(al);
                let den1 = al * (1.0 + h).powf(al - 1.0);
                let den2 = al * (al - 1.0) * (1.0 + h).powf(al - 2.0);
                let c = num / den;
                let c1 = (num1 - c * den1) / den;
                let c2 = (num2 - 2.0 * c1 * den1 - c * den2) / den;
                let w0 = w.powf(al);
                let w1 = w.powf(al - 1.0);
                let w2 = w.powf(al - 2.0);
                Branch {
                    f: c * w0 + p,
                    fx: -c * al * w1,
                    fh: c1 * w0 + c * al * w1 + p1,
                    fxx: c * al * (al - 1.0) * w2,
                    fxh: -c1 * al * w1 - c * al * (al - 1.0) * w2,
                    fhh: c2 * w0 + 2.0 * c1 * al * w1 + c * al * (al - 1.0) * w2 + p2,
                }
            }
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        check_finite(x, self.n)?;
        Domain::unit_cube(self.n).check(x)
    }

    /// First component only, without domain checks.
    fn first(&self, x1: f64, xt: &[f64]) -> f64 {
        let h = self.fold_depth(xt);
        self.eval_branch(self.branch_of(x1, h), x1, h).f
    }

    /// Largest mismatch of `F`, `∂F/∂x_1`, `∂F/∂H` between the two formulas
    /// meeting at each seam `x_1 ∈ {0, h/2, h}`.
    pub fn seam_mismatch(&self, xt: &[f64]) -> f64 {
        let h = self.fold_depth(xt);
        let pairs = [
            (0.0, FoldBranch::Upper, FoldBranch::InnerFold),
            (0.5 * h, FoldBranch::InnerFold, FoldBranch::OuterFold),
            (h, FoldBranch::OuterFold, FoldBranch::Lower),
        ];
        let mut worst: f64 = 0.0;
        for (s, b1, b2) in pairs {
            let l = self.eval_branch(b1, s, h);
            let r = self.eval_branch(b2, s, h);
            worst = worst.max((l.f - r.f).abs()).max((l.fx - r.fx).abs()).max((l.fh - r.fh).abs());
        }
        worst
    }

    /// Count preimages of `y` by scanning the fiber `x̃ = ỹ` on a grid of
    /// `grid_res` cells, grouping near-zero grid points into clusters, and
    /// bisecting every sign change inside each cluster.
    pub fn preimages(&self, y: &[f64], grid_res: usize) -> Result<PreimageReport> {
        check_finite(y, self.n)?;
        if grid_res < 64 {
            return Err(Error::Precondition(format!("grid resolution must be at least 64, got {grid_res}")));
        }
        if grid_res > 100_000_000 {
            return Err(Error::Budget(format!("grid resolution {grid_res} too large")));
        }
        if !Domain::unit_cube(self.n).contains(y) {
            return Ok(PreimageReport { count: 0, preimages: vec![], tangential_clusters: 0, out_of_range: true });
        }
        let xt = &y[1..];
        let g = |x1: f64| self.first(x1, xt) - y[0];
        let step = 2.0 / grid_res as f64;
        let xs: Vec<f64> = (0..=grid_res).map(|k| if k == grid_res { 1.0 } else { -1.0 + k as f64 * step }).collect();
        let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let threshold = gs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);

        let mut roots: Vec<f64> = Vec::new();
        let mut tangential = 0;
        let mut k = 0;
        while k < gs.len() {
            if gs[k].abs() > threshold {
                k += 1;
                continue;
            }
            let start = k;
            while k < gs.len() && gs[k].abs() <= threshold {
                k += 1;
            }
            // Cluster occupies grid points [start, k); widen by one on each side.
            let lo = start.saturating_sub(1);
            let hi = k.min(gs.len() - 1);
            let mut found = 0;
            for j in lo..=hi {
                if gs[j] == 0.0 {
                    roots.push(xs[j]);
                    found += 1;
                } else if j < hi && gs[j + 1] != 0.0 && (gs[j] < 0.0) != (gs[j + 1] < 0.0) {
                    roots.push(bisect(&g, xs[j], xs[j + 1]));
                    found += 1;
                }
            }
            if found == 0 {
                tangential += 1;
            }
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        let preimages = roots
            .iter()
            .map(|&r| std::iter::once(r).chain(xt.iter().copied()).collect())
            .collect();
        Ok(PreimageReport { count: roots.len() + tangential, preimages, tangential_clusters: tangential, out_of_range: false })
    }
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Mapping for FoldingMap {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Domain {
        Domain::unit_cube(self.n)
    }

    fn family(&self) -> &'static str {
        "folding"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut v = x.to_vec();
        v[0] = self.first(x[0], &x[1..]);
        Ok(v)
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check(x)?;
        let n = self.n;
        let xt = &x[1..];
        let (h, hg, hh) = self.depth(xt);
        let which = self.branch_of(x[0], h);
        let b = self.eval_branch(which, x[0], h);
        debug_assert!(
            [0.0, 0.5 * h, h].iter().all(|s| (x[0] - s).abs() > 1e-12) || self.seam_mismatch(xt) < 1e-9,
            "folding seams discontinuous at {x:?}"
        );
        let mut value = x.to_vec();
        value[0] = b.f;
        let mut df = DMatrix::identity(n, n);
        df[(0, 0)] = b.fx;
        for j in 1..n {
            df[(0, j)] = b.fh * hg[j - 1];
        }
        let mut d2 = Hessian::zeros(n);
        d2.set(0, 0, 0, b.fxx);
        for j in 1..n {
            d2.set_sym(0, 0, j, b.fxh * hg[j - 1]);
            for l in 1..n {
                d2.set(0, j, l, b.fhh * hg[j - 1] * hg[l - 1] + b.fh * hh[(j - 1, l - 1)]);
            }
        }
        Ok(Jet { value, df, d2: Some(d2) })
    }

    fn jacobian(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let h = self.fold_depth(&x[1..]);
        Ok(self.eval_branch(self.branch_of(x[0], h), x[0], h).fx)
    }

    fn loci(&self) -> Vec<Locus> {
        let me = self.clone();
        let me2 = self.clone();
        let mid_lip = (1.0 + 0.25 * FOLD_LIPSCHITZ * FOLD_LIPSCHITZ).sqrt();
        let full_lip = (1.0 + FOLD_LIPSCHITZ * FOLD_LIPSCHITZ).sqrt();
        // h = -(1 - |x̃|²)³ / 2 is monotone in |x̃|², so its range over a box is exact.
        let depth_range = |lo: &[f64], hi: &[f64]| {
            let (s0, s1) = box_square_norm_range(&lo[1..], &hi[1..]);
            let h = |s: f64| if s >= 1.0 { 0.0 } else { -0.5 * (1.0 - s).powi(3) };
            (h(s0), h(s1))
        };
        vec![
            Locus::singular("x1 = 0", |x: &[f64]| x[0].abs()).with_box_test(|lo, hi| lo[0] <= 0.0 && hi[0] >= 0.0),
            Locus::singular("x1 = h/2", move |x: &[f64]| (x[0] - 0.5 * me.fold_depth(&x[1..])).abs() / mid_lip)
                .with_box_test(move |lo, hi| {
                    let (h0, h1) = depth_range(lo, hi);
                    lo[0] <= 0.5 * h1 && hi[0] >= 0.5 * h0
                }),
            Locus::singular("x1 = h", move |x: &[f64]| (x[0] - me2.fold_depth(&x[1..])).abs() / full_lip)
                .with_box_test(move |lo, hi| {
                    let (h0, h1) = depth_range(lo, hi);
                    lo[0] <= h1 && hi[0] >= h0
                }),
        ]
    }
}
