//! Finite-generation Cantor squeeze map.
//!
//! Generation `i` replaces each cube `Q'_v = Q(z_v, a_{i-1}/2)` by a map that
//! is the identity in `x̄ = (x_1, …, x_{n-1})` and squeezes the last coordinate
//! with slope `b_i/a_i` on the inner cube `Q_v = Q(z_v, a_i)`, blending to the
//! parent slope `b_{i-1}/a_{i-1}` near the boundary of `Q'_v`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{check_finite, Domain, Hessian, Jet, Locus, Mapping, Proximity};
use crate::numeric::bump::{Kink, SmoothStep, SmoothedPiecewiseLinear};
use crate::regimes::{classify, derive_exponents, RegimeParams};

/// Largest supported generation count.
pub const MAX_GENERATIONS: usize = 24;
/// Smallest representable cube half-side, `2^-60`.
pub const MIN_SIDE: f64 = 8.673_617_379_884_035e-19;
/// Largest number of cells `cells()` will enumerate.
pub const MAX_ENUMERATED_CELLS: usize = 1 << 20;

/// Geometry of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Generation {
    pub i: usize,
    /// Half-side of `Q_v`.
    pub a: f64,
    /// Half-height of `R_v`.
    pub b: f64,
    /// Kernel radius used to smooth the profile (zero at generation 0).
    pub r: f64,
}

#[derive(Clone, Debug)]
struct Level {
    a_prev: f64,
    b_prev: f64,
    a: f64,
    slope: f64,
    slope_prev: f64,
    profile: SmoothedPiecewiseLinear,
    /// Below this the profile is exactly `slope * t`.
    linear_below: f64,
    /// Above this the profile is exactly `slope_prev * t`.
    linear_above: f64,
    cutoff: SmoothStep,
}

impl Level {
    fn new(a_prev: f64, b_prev: f64, a: f64, b: f64) -> Level {
        let slope = b / a;
        let slope_prev = b_prev / a_prev;
        let len = 0.5 * a_prev - a;
        let t1 = a + 0.25 * len;
        let t2 = 0.5 * a_prev - 0.25 * len;
        let r = len / 16.0;
        let mid = (slope_prev * t2 - slope * t1) / (t2 - t1);
        let profile = SmoothedPiecewiseLinear {
            intercept: 0.0,
            slope,
            kinks: vec![
                Kink { at: t1, jump: mid - slope, radius: r },
                Kink { at: t2, jump: slope_prev - mid, radius: r },
            ],
        };
        Level {
            a_prev,
            b_prev,
            a,
            slope,
            slope_prev,
            profile,
            linear_below: t1 - r,
            linear_above: t2 + r,
            cutoff: SmoothStep::new(a + 0.75 * len, a + 0.875 * len),
        }
    }

    fn h(&self, t: f64) -> (f64, f64, f64) {
        if t <= self.linear_below {
            (self.slope * t, self.slope, 0.0)
        } else if t >= self.linear_above {
            (self.slope_prev * t, self.slope_prev, 0.0)
        } else {
            (self.profile.value(t), self.profile.derivative(t), self.profile.second_derivative(t))
        }
    }

    fn lambda(&self, t: f64) -> (f64, f64, f64) {
        let s = &self.cutoff;
        if t <= s.a {
            (1.0, 0.0, 0.0)
        } else if t >= s.b {
            (0.0, 0.0, 0.0)
        } else {
            (s.value(t), s.derivative(t), s.second_derivative(t))
        }
    }
}

/// Last component of `g_i` and its derivatives at a local point.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    /// The five-term bound on `|D² g_i|` built from the profile and cutoff.
    pub d2_bound: f64,
}

#[derive(Clone, Debug)]
pub struct CantorSchedule {
    params: RegimeParams,
    beta: f64,
    generations: Vec<Generation>,
    levels: Vec<Level>,
}

/// Serializable form of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleSummary {
    pub n: u32,
    pub d: f64,
    pub q: f64,
    pub a: f64,
    pub beta: f64,
    pub max_gen: usize,
    pub per_gen: Vec<Generation>,
}

/// One generation-`i` cell: cube `Q_v ⊂ Q'_v` and rectangle `R_v ⊂ R'_v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellPair {
    pub generation: usize,
    /// Vertex word, one sign vector per letter.
    pub word: Vec<Vec<i8>>,
    pub zv: Vec<f64>,
    pub ztv: Vec<f64>,
    /// Half-side of `Q_v`.
    pub q_half: f64,
    /// Half-side of `Q'_v`.
    pub q_outer_half: f64,
    /// Half-extents of `R_v` in `x̄` and in `x_n`.
    pub r_half: (f64, f64),
    /// Half-extents of `R'_v`.
    pub r_outer_half: (f64, f64),
}

impl CellPair {
    pub fn cube(&self) -> (Vec<f64>, Vec<f64>) {
        (self.zv.iter().map(|c| c - self.q_half).collect(), self.zv.iter().map(|c| c + self.q_half).collect())
    }

    pub fn rectangle(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.ztv.len();
        let half = |j: usize| if j + 1 == n { self.r_half.1 } else { self.r_half.0 };
        (
            (0..n).map(|j| self.ztv[j] - half(j)).collect(),
            (0..n).map(|j| self.ztv[j] + half(j)).collect(),
        )
    }
}

/// Deepest cell reached by the descent for one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    /// Generation whose map `g_i` is active (0 only when `k = 0`).
    pub level: usize,
    pub zv: Vec<f64>,
    pub ztv: Vec<f64>,
    /// `x - z_v`.
    pub local: Vec<f64>,
}

impl CantorSchedule {
    /// Build generations `0..=k`; refused when the counterexample inequality
    /// fails, when `k > 24`, or when `a_k < 2^-60`.
    pub fn build(p: &RegimeParams, k: usize) -> Result<Self> {
        let verdict = classify(p);
        if !verdict.counterexample_exists {
            return Err(Error::Precondition(format!(
                "(1-(n-d)/q)a >= n-d for n={}, q={}, a={}, d={}: construction hypotheses fail",
                p.n, p.q, p.a, p.d
            )));
        }
        if k > MAX_GENERATIONS {
            return Err(Error::InvalidParams(format!("k={k} exceeds {MAX_GENERATIONS}")));
        }
        let n = p.n as f64;
        let ratio = n / p.d;
        if ratio * k as f64 > 60.0 {
            return Err(Error::InvalidParams(format!(
                "a_k = 2^-{} is below 2^-60; reduce k",
                ratio * k as f64
            )));
        }
        let ex = derive_exponents(p);
        if !(ex.series_exp_d2 < 0.0 && ex.series_exp_jac < 0.0) {
            return Err(Error::Precondition(format!(
                "series exponents must be negative, got {} and {}",
                ex.series_exp_d2, ex.series_exp_jac
            )));
        }
        let beta = ex.beta;
        let mut generations = vec![Generation { i: 0, a: 1.0, b: 1.0, r: 0.0 }];
        let mut levels = Vec::with_capacity(k);
        for i in 1..=k {
            let a = 2f64.powf(-ratio * i as f64);
            let b = 2f64.powf(-(ratio + beta) * i as f64);
            let prev = &generations[i - 1];
            let r = (0.5 * prev.a - a) / 16.0;
            if !(r > 0.0) {
                return Err(Error::InvalidParams("r_i must be positive (needs d < n)".into()));
            }
            levels.push(Level::new(prev.a, prev.b, a, b));
            generations.push(Generation { i, a, b, r });
        }
        Ok(CantorSchedule { params: p.clone(), beta, generations, levels })
    }

    pub fn params(&self) -> &RegimeParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn max_gen(&self) -> usize {
        self.levels.len()
    }

    pub fn generation(&self, i: usize) -> &Generation {
        &self.generations[i]
    }

    pub fn generations(&self) -> &[Generation] {
        &self.generations
    }

    pub fn summary(&self) -> ScheduleSummary {
        ScheduleSummary {
            n: self.params.n,
            d: self.params.d,
            q: self.params.q,
            a: self.params.a,
            beta: self.beta,
            max_gen: self.max_gen(),
            per_gen: self.generations.clone(),
        }
    }

    fn level(&self, i: usize) -> Result<&Level> {
        if i == 0 || i > self.max_gen() {
            return Err(Error::InvalidParams(format!("generation {i} not in 1..={}", self.max_gen())));
        }
        Ok(&self.levels[i - 1])
    }

    /// Smoothed profile `h_i(t)` on `[0, a_{i-1}/2]`.
    pub fn profile(&self, i: usize, t: f64) -> Result<f64> {
        Ok(self.profile_jet(i, t)?.0)
    }

    /// `(h_i, h_i', h_i'')`.
    pub fn profile_jet(&self, i: usize, t: f64) -> Result<(f64, f64, f64)> {
        let lv = self.level(i)?;
        if !(0.0..=0.5 * lv.a_prev * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("t={t} outside [0, {}]", 0.5 * lv.a_prev)));
        }
        Ok(lv.h(t))
    }

    /// Cutoff `λ_i(t)` with its first two derivatives.
    pub fn cutoff(&self, i: usize, t: f64) -> Result<(f64, f64, f64)> {
        Ok(self.level(i)?.lambda(t))
    }

    /// Transition window `(start, end)` of the cutoff at generation `i`.
    pub fn cutoff_window(&self, i: usize) -> Result<(f64, f64)> {
        let s = self.level(i)?.cutoff;
        Ok((s.a, s.b))
    }

    /// Kinks of the unsmoothed profile at generation `i`.
    pub fn profile_kinks(&self, i: usize) -> Result<[f64; 2]> {
        let lv = self.level(i)?;
        Ok([lv.profile.kinks[0].at, lv.profile.kinks[1].at])
    }

    /// Largest slope of the profile `h_i`, reached on its middle segment.
    pub fn steepest_slope(&self, i: usize) -> Result<f64> {
        let lv = self.level(i)?;
        let mid = lv.slope + lv.profile.kinks[0].jump;
        Ok(mid.max(lv.slope).max(lv.slope_prev))
    }

    /// Supremum of `J_{f_k}` over a generation-`i` cube `Q_v`: the core slope
    /// `b_k/a_k` or the steepest profile of a deeper generation.
    pub fn jacobian_sup_on_cube(&self, i: usize) -> Result<f64> {
        let k = self.max_gen();
        if i > k {
            return Err(Error::InvalidParams(format!("generation {i} exceeds max {k}")));
        }
        let g = &self.generations[k];
        let mut sup = g.b / g.a;
        for l in i + 1..=k {
            sup = sup.max(self.steepest_slope(l)?);
        }
        Ok(sup)
    }

    /// Last component of `g_i` at local coordinates `y ∈ Q(0, a_{i-1}/2)`.
    pub fn local_jet(&self, i: usize, y: &[f64]) -> Result<LocalJet> {
        let lv = self.level(i)?;
        let n = self.n();
        check_finite(y, n)?;
        let m = n - 1;
        let t = y[m];
        let (h, h1, h2) = lv.h(t.abs());
        let sg = if t < 0.0 { -1.0 } else { 1.0 };
        let (s, s1, s2) = (sg * h, h1, sg * h2);
        let lams: Vec<(f64, f64, f64)> = y[..m].iter().map(|v| lv.lambda(v.abs())).collect();
        let prod_except = |skip: &[usize]| -> f64 {
            lams.iter().enumerate().filter(|(j, _)| !skip.contains(j)).map(|(_, l)| l.0).product()
        };
        let big = prod_except(&[]);
        let grad_l: Vec<f64> = (0..m)
            .map(|j| lams[j].1 * if y[j] < 0.0 { -1.0 } else { 1.0 } * prod_except(&[j]))
            .collect();
        let hess_l = DMatrix::from_fn(m, m, |j, l| {
            if j == l {
                lams[j].2 * prod_except(&[j])
            } else {
                let sj = if y[j] < 0.0 { -1.0 } else { 1.0 };
                let sl = if y[l] < 0.0 { -1.0 } else { 1.0 };
                lams[j].1 * sj * lams[l].1 * sl * prod_except(&[j, l])
            }
        });
        let c = lv.slope_prev;
        let value = big * s + (1.0 - big) * c * t;
        let mut grad = vec![0.0; n];
        for j in 0..m {
            grad[j] = grad_l[j] * (s - c * t);
        }
        grad[m] = big * s1 + (1.0 - big) * c;
        let mut hess = DMatrix::zeros(n, n);
        for j in 0..m {
            for l in 0..m {
                hess[(j, l)] = hess_l[(j, l)] * (s - c * t);
            }
            hess[(j, m)] = grad_l[j] * (s1 - c);
            hess[(m, j)] = hess[(j, m)];
        }
        hess[(m, m)] = big * s2;
        let dl = grad_l.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        let d2l = hess_l.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        let d2_bound = h2
            .abs()
            .max(dl * h1.abs())
            .max(h.abs() * d2l)
            .max((c * t).abs() * d2l)
            .max(c * dl);
        Ok(LocalJet { value, grad, hess, d2_bound })
    }

    /// Descend the cell tree to the generation whose map is active at `x`.
    pub fn descend(&self, x: &[f64]) -> Result<Descent> {
        let n = self.n();
        check_finite(x, n)?;
        Domain::unit_cube(n).check(x)?;
        let mut zv = vec![0.0; n];
        let mut ztv = vec![0.0; n];
        let k = self.max_gen();
        if k == 0 {
            return Ok(Descent { level: 0, local: x.to_vec(), zv, ztv });
        }
        for i in 1..=k {
            let lv = &self.levels[i - 1];
            for j in 0..n {
                let v = if x[j] >= zv[j] { 1.0 } else { -1.0 };
                zv[j] += 0.5 * lv.a_prev * v;
                ztv[j] += 0.5 * if j + 1 == n { lv.b_prev } else { lv.a_prev } * v;
            }
            let local: Vec<f64> = x.iter().zip(&zv).map(|(a, b)| a - b).collect();
            let inside_core = local.iter().all(|v| v.abs() <= lv.a);
            if i == k || !inside_core {
                return Ok(Descent { level: i, zv, ztv, local });
            }
        }
        unreachable!("descent always returns at level k")
    }

    /// `f_k(x)`, `J_{f_k}(x)` and the `|D² f_k|` bound at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let d = self.descend(x)?;
        if d.level == 0 {
            return Ok((x.to_vec(), 1.0, 0.0));
        }
        let lj = self.local_jet(d.level, &d.local)?;
        let n = self.n();
        let mut v = x.to_vec();
        v[n - 1] = d.ztv[n - 1] + lj.value;
        Ok((v, lj.grad[n - 1], lj.d2_bound))
    }

    /// All generation-`i` cells, refused beyond 2^20 cells.
    pub fn cells(&self, i: usize) -> Result<Vec<CellPair>> {
        let n = self.n();
        if i > self.max_gen() {
            return Err(Error::InvalidParams(format!("generation {i} exceeds max {}", self.max_gen())));
        }
        let bits = n * i;
        if bits > 20 {
            return Err(Error::Budget(format!(
                "2^{bits} cells exceed the enumeration cap 2^20; sample cells instead"
            )));
        }
        let count = 1usize << bits;
        let g = &self.generations;
        let mut out = Vec::with_capacity(count);
        for code in 0..count {
            let mut zv = vec![0.0; n];
            let mut ztv = vec![0.0; n];
            let mut word = Vec::with_capacity(i);
            for lvl in 1..=i {
                let letter_bits = (code >> (n * (lvl - 1))) & ((1 << n) - 1);
                let letter: Vec<i8> = (0..n).map(|j| if letter_bits >> j & 1 == 1 { 1 } else { -1 }).collect();
                for j in 0..n {
                    let v = letter[j] as f64;
                    zv[j] += 0.5 * g[lvl - 1].a * v;
                    ztv[j] += 0.5 * if j + 1 == n { g[lvl - 1].b } else { g[lvl - 1].a } * v;
                }
                word.push(letter);
            }
            let (a_prev, b_prev) = if i == 0 { (2.0, 2.0) } else { (g[i - 1].a, g[i - 1].b) };
            out.push(CellPair {
                generation: i,
                word,
                zv,
                ztv,
                q_half: g[i].a,
                q_outer_half: 0.5 * a_prev,
                r_half: (g[i].a, g[i].b),
                r_outer_half: (0.5 * a_prev, 0.5 * b_prev),
            });
        }
        Ok(out)
    }

    /// Boxes of the annulus `Q(0, a_{i-1}/2) \ Q(0, a_i)` in local coordinates,
    /// further split at every profile and cutoff transition so each piece is
    /// free of internal sharp features.
    pub fn annulus_boxes(&self, i: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let lv = self.level(i)?;
        let n = self.n();
        let outer = 0.5 * lv.a_prev;
        let k = &lv.profile.kinks;
        let mut last_axis: Vec<f64> =
            vec![lv.a, k[0].at - k[0].radius, k[0].at + k[0].radius, k[1].at - k[1].radius, k[1].at + k[1].radius, outer];
        let mut bar_axis: Vec<f64> = vec![lv.a, lv.cutoff.a, lv.cutoff.b, outer];
        for ax in [&mut last_axis, &mut bar_axis] {
            ax.retain(|v| *v >= lv.a && *v <= outer);
            ax.sort_by(f64::total_cmp);
            ax.dedup();
        }
        let breaks = |ax: &[f64]| -> Vec<f64> {
            let mut v: Vec<f64> = ax.iter().rev().map(|x| -x).collect();
            v.extend_from_slice(ax);
            v
        };
        let per_axis: Vec<Vec<f64>> =
            (0..n).map(|j| if j + 1 == n { breaks(&last_axis) } else { breaks(&bar_axis) }).collect();
        let mut boxes = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let lo: Vec<f64> = (0..n).map(|j| per_axis[j][idx[j]]).collect();
            let hi: Vec<f64> = (0..n).map(|j| per_axis[j][idx[j] + 1]).collect();
            let inside_core = lo.iter().zip(&hi).all(|(l, h)| *l >= -lv.a && *h <= lv.a);
            if !inside_core {
                boxes.push((lo, hi));
            }
            let mut j = 0;
            loop {
                if j == n {
                    return Ok(boxes);
                }
                idx[j] += 1;
                if idx[j] + 1 < per_axis[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}

/// `f_k` as a [`Mapping`] on `[-1, 1]^n`.
#[derive(Clone, Debug)]
pub struct CantorMap {
    schedule: CantorSchedule,
}

impl CantorMap {
    pub fn new(schedule: CantorSchedule) -> Self {
        CantorMap { schedule }
    }

    pub fn schedule(&self) -> &CantorSchedule {
        &self.schedule
    }
}

impl Mapping for CantorMap {
    fn dim(&self) -> usize {
        self.schedule.n()
    }

    fn domain(&self) -> Domain {
        Domain::unit_cube(self.dim())
    }

    fn family(&self) -> &'static str {
        "cantor"
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.schedule.eval(x)?.0)
    }

    fn jacobian(&self, x: &[f64]) -> Result<f64> {
        Ok(self.schedule.eval(x)?.1)
    }

    fn d2_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.schedule.eval(x)?.2)
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let s = &self.schedule;
        let n = s.n();
        let d = s.descend(x)?;
        if d.level == 0 {
            return Ok(Jet { value: x.to_vec(), df: DMatrix::identity(n, n), d2: Some(Hessian::zeros(n)) });
        }
        let lj = s.local_jet(d.level, &d.local)?;
        let mut value = x.to_vec();
        value[n - 1] = d.ztv[n - 1] + lj.value;
        let mut df = DMatrix::identity(n, n);
        for j in 0..n {
            df[(n - 1, j)] = lj.grad[j];
        }
        let mut d2 = Hessian::zeros(n);
        for j in 0..n {
            for l in 0..n {
                d2.set(n - 1, j, l, lj.hess[(j, l)]);
            }
        }
        Ok(Jet { value, df, d2: Some(d2) })
    }

    fn loci(&self) -> Vec<Locus> {
        let s = self.schedule.clone();
        vec![Locus::feature("cell skeleton", move |x: &[f64]| skeleton_proximity(&s, x))]
    }
}

/// Distance from `x` to the nearest profile or cutoff transition strip of the
/// active generation (or to the inner cube where the next one starts), with
/// the kernel radius of that generation as the feature scale.
fn skeleton_proximity(s: &CantorSchedule, x: &[f64]) -> Proximity {
    let far = Proximity { distance: f64::INFINITY, scale: 1.0 };
    let Ok(d) = s.descend(x) else { return far };
    if d.level == 0 {
        return far;
    }
    let lv = &s.levels[d.level - 1];
    let n = s.n();
    let mut scale = s.generations[d.level].r;
    let mut dist = f64::INFINITY;
    let strip = |t: f64, lo: f64, hi: f64| -> f64 {
        if t < lo {
            lo - t
        } else if t > hi {
            t - hi
        } else {
            0.0
        }
    };
    let t = d.local[n - 1].abs();
    for k in &lv.profile.kinks {
        dist = dist.min(strip(t, k.at - k.radius, k.at + k.radius));
    }
    for j in 0..n - 1 {
        dist = dist.min(strip(d.local[j].abs(), lv.cutoff.a, lv.cutoff.b));
    }
    if d.level < s.max_gen() {
        let inf = d.local.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        let core = (inf - lv.a).abs();
        if core < dist {
            dist = core;
            scale = s.generations[d.level + 1].r;
        }
    }
    Proximity { distance: dist, scale }
}
