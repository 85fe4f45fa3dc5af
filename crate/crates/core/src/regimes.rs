//! Exponent bookkeeping and classification of `(n, q, a, d)` tuples.
//!
//! Every comparator below is evaluated either in exact rational arithmetic
//! (when the tuple was given as decimal or fraction strings) or in `f64` with
//! an absolute tolerance of `1e-12`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for float comparisons.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
struct ExactTuple {
    q: BigRational,
    a: BigRational,
    d: BigRational,
}

/// The tuple `(n, q, a, d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub n: u32,
    pub q: f64,
    pub a: f64,
    pub d: f64,
    #[serde(skip)]
    exact: Option<ExactTuple>,
}

impl RegimeParams {
    /// Float tuple; comparisons use [`FLOAT_TOLERANCE`].
    pub fn new(n: u32, q: f64, a: f64, d: f64) -> Result<Self> {
        let p = RegimeParams { n, q, a, d, exact: None };
        p.validate()?;
        Ok(p)
    }

    /// Exact tuple from rationals.
    pub fn exact(n: u32, q: BigRational, a: BigRational, d: BigRational) -> Result<Self> {
        let p = RegimeParams {
            n,
            q: rat_to_f64(&q),
            a: rat_to_f64(&a),
            d: rat_to_f64(&d),
            exact: Some(ExactTuple { q, a, d }),
        };
        p.validate()?;
        Ok(p)
    }

    /// Exact tuple parsed from decimal (`"0.75"`, `"1e-3"`) or fraction
    /// (`"4/3"`) strings.
    pub fn parse(n: u32, q: &str, a: &str, d: &str) -> Result<Self> {
        Self::exact(n, parse_rational(q)?, parse_rational(a)?, parse_rational(d)?)
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Exact `(q, a, d)` if the tuple was built from rationals.
    pub fn exact_values(&self) -> Option<(BigRational, BigRational, BigRational)> {
        self.exact.as_ref().map(|e| (e.q.clone(), e.a.clone(), e.d.clone()))
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n >= 2
            && self.q.is_finite()
            && self.a.is_finite()
            && self.d.is_finite()
            && match &self.exact {
                Some(e) => {
                    e.q > BigRational::one()
                        && e.a.is_positive()
                        && e.d.is_positive()
                        && e.d < BigRational::from_integer(BigInt::from(self.n))
                }
                None => self.q > 1.0 && self.a > 0.0 && self.d > 0.0 && self.d < self.n as f64,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "need n >= 2, q > 1, a > 0, 0 < d < n; got n={}, q={}, a={}, d={}",
                self.n, self.q, self.a, self.d
            )))
        }
    }
}

/// Parse a decimal, scientific, or `p/q` string into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        if den.contains('/') {
            return Err(bad());
        }
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(num / den);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if exponent.abs() > 400 || int_part.len() + frac_part.len() > 400 {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Arithmetic needed to evaluate the regime inequalities.
trait Field:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn int(i: i64) -> Self;
    /// Sign of `self` for comparison purposes (tolerant for floats).
    fn sign(&self) -> Ordering;
    fn ge(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).sign() != Ordering::Less
    }
    fn gt(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).sign() == Ordering::Greater
    }
}

impl Field for f64 {
    fn int(i: i64) -> Self {
        i as f64
    }
    fn sign(&self) -> Ordering {
        if *self > FLOAT_TOLERANCE {
            Ordering::Greater
        } else if *self < -FLOAT_TOLERANCE {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

impl Field for BigRational {
    fn int(i: i64) -> Self {
        BigRational::from_integer(BigInt::from(i))
    }
    fn sign(&self) -> Ordering {
        self.cmp(&BigRational::zero())
    }
}

fn frac<F: Field>(p: i64, q: i64) -> F {
    F::int(p) / F::int(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Flags {
    hk: bool,
    main: bool,
    critical_set_null: bool,
    sign_constant: bool,
    counterexample: bool,
}

fn flags<F: Field>(n: i64, q: &F, a: &F, d: &F) -> Flags {
    let nn = F::int(n);
    let one = F::int(1);
    let q_gt_n = q.gt(&nn);
    // Lower end of the middle range, n^2/(2n-1) < q <= n.
    let q_mid = q.gt(&frac(n * n, 2 * n - 1)) && !q_gt_n;
    let n_minus_d = nn.clone() - d.clone();

    // Healey-Kromer: q > n and (1 - n/q) a >= n.
    let hk = q_gt_n && ((one.clone() - nn.clone() / q.clone()) * a.clone()).ge(&nn);

    let main = if n == 2 {
        // q > 4/3, a >= 1, (3/2 - 2/q) a >= 1.
        q.gt(&frac(4, 3))
            && a.ge(&one)
            && ((frac::<F>(3, 2) - F::int(2) / q.clone()) * a.clone()).ge(&one)
    } else if q_gt_n {
        // Strict: a > n - 1.
        a.gt(&F::int(n - 1))
    } else if q.gt(&F::int(n - 1)) {
        // Strict: (1 - n/q + 1/(n-1)) a > 1 for n-1 < q <= n.
        ((one.clone() - nn.clone() / q.clone() + frac(1, n - 1)) * a.clone()).gt(&one)
    } else {
        false
    };

    // (1 - (n-d)/q) a >= n - d.
    let high_q_null = ((one.clone() - n_minus_d.clone() / q.clone()) * a.clone()).ge(&n_minus_d);
    let critical_set_null = if q_gt_n {
        high_q_null
    } else if q_mid {
        // (n - d + d/n - (n/q)(n - d)) a >= n - d.
        let coef = n_minus_d.clone() + d.clone() / nn.clone()
            - nn.clone() / q.clone() * n_minus_d.clone();
        (coef * a.clone()).ge(&n_minus_d)
    } else {
        false
    };

    let sign_constant = if q_gt_n {
        // (1 - 1/q) a >= 1.
        ((one.clone() - one.clone() / q.clone()) * a.clone()).ge(&one)
    } else if q_mid {
        // (2 - 1/n - n/q) a >= 1.
        ((F::int(2) - one.clone() / nn.clone() - nn.clone() / q.clone()) * a.clone()).ge(&one)
    } else {
        false
    };

    // Complement of the high-q null-set inequality, with the same comparator,
    // so the two flags partition q > n exactly.
    let counterexample = !high_q_null;
    Flags { hk, main, critical_set_null, sign_constant, counterexample }
}

/// Which side of the dimension threshold a tuple falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalSetStatus {
    /// `H^d({J_f = 0}) = 0` for every admissible map.
    Null,
    /// An explicit map with `H^d({J_f = 0}) > 0` exists.
    Counterexample,
    /// `q <= n` region not covered by either statement.
    Undetermined,
}

impl fmt::Display for CriticalSetStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalSetStatus::Null => "null",
            CriticalSetStatus::Counterexample => "counterexample",
            CriticalSetStatus::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegimeVerdict {
    pub hk_applies: bool,
    pub main_applies: bool,
    pub critical_set_null: bool,
    pub sign_constant: bool,
    pub counterexample_exists: bool,
    pub status: CriticalSetStatus,
    pub notes: String,
}

/// Classify a tuple against every hypothesis.
pub fn classify(p: &RegimeParams) -> RegimeVerdict {
    let n = p.n as i64;
    let (fl, mut notes) = match &p.exact {
        Some(e) => (flags(n, &e.q, &e.a, &e.d), String::from("exact rational arithmetic")),
        None => (
            flags(n, &p.q, &p.a, &p.d),
            format!("float comparisons, absolute tolerance {FLOAT_TOLERANCE:e}"),
        ),
    };
    let status = if fl.critical_set_null && fl.counterexample {
        notes.push_str("; both null-set and counterexample inequalities hold");
        CriticalSetStatus::Undetermined
    } else if fl.critical_set_null {
        CriticalSetStatus::Null
    } else if fl.counterexample {
        CriticalSetStatus::Counterexample
    } else {
        notes.push_str("; gap region q <= n: neither inequality decides");
        CriticalSetStatus::Undetermined
    };
    RegimeVerdict {
        hk_applies: fl.hk,
        main_applies: fl.main,
        critical_set_null: fl.critical_set_null,
        sign_constant: fl.sign_constant,
        counterexample_exists: fl.counterexample,
        status,
        notes,
    }
}

/// Derived exponents of a tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedExponents {
    /// Integrability exponent of `J_f`, present only for `n^2/(2n-1) < q <= n`.
    pub b: Option<f64>,
    pub beta: f64,
    pub series_exp_d2: f64,
    pub series_exp_jac: f64,
}

/// Exact counterpart of [`DerivedExponents`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExactExponents {
    pub b: Option<BigRational>,
    pub beta: BigRational,
    pub series_exp_d2: BigRational,
    pub series_exp_jac: BigRational,
}

fn derive_generic<F: Field>(n: i64, q: &F, a: &F, d: &F) -> (Option<F>, F, F, F) {
    let nn = F::int(n);
    let two = F::int(2);
    let n_over_d = nn.clone() / d.clone();
    let b = if q.gt(&frac(n * n, 2 * n - 1)) && !q.gt(&nn) {
        Some(nn.clone() * q.clone() / (F::int(n * n) - nn.clone() * q.clone() + q.clone()))
    } else {
        None
    };
    let beta = n_over_d.clone() * (q.clone() - nn.clone() + d.clone()) / (two.clone() * q.clone())
        + n_over_d.clone() * (nn.clone() - d.clone()) / (two * a.clone());
    let d2 = (n_over_d - beta.clone()) - F::int(n * n) / (q.clone() * d.clone()) + nn.clone() / q.clone();
    let jac = a.clone() * beta.clone() - F::int(n * n) / d.clone() + nn;
    (b, beta, d2, jac)
}

pub fn derive_exponents(p: &RegimeParams) -> DerivedExponents {
    let n = p.n as i64;
    match &p.exact {
        Some(e) => {
            let x = derive_exact_inner(n, e);
            DerivedExponents {
                b: x.b.as_ref().map(rat_to_f64),
                beta: rat_to_f64(&x.beta),
                series_exp_d2: rat_to_f64(&x.series_exp_d2),
                series_exp_jac: rat_to_f64(&x.series_exp_jac),
            }
        }
        None => {
            let (b, beta, d2, jac) = derive_generic(n, &p.q, &p.a, &p.d);
            DerivedExponents { b, beta, series_exp_d2: d2, series_exp_jac: jac }
        }
    }
}

fn derive_exact_inner(n: i64, e: &ExactTuple) -> ExactExponents {
    let (b, beta, d2, jac) = derive_generic(n, &e.q, &e.a, &e.d);
    ExactExponents { b, beta, series_exp_d2: d2, series_exp_jac: jac }
}

/// Exact exponents; `None` for float tuples.
pub fn derive_exponents_exact(p: &RegimeParams) -> Option<ExactExponents> {
    p.exact.as_ref().map(|e| derive_exact_inner(p.n as i64, e))
}

/// The Jacobian integrability exponent `b = nq/(n^2 - nq + q)`, refusing
/// tuples outside `n^2/(2n-1) < q <= n`.
pub fn sobolev_exponent_b(p: &RegimeParams) -> Result<f64> {
    derive_exponents(p).b.ok_or_else(|| {
        Error::Precondition(format!(
            "b is defined only for n^2/(2n-1) < q <= n; got n={}, q={}",
            p.n, p.q
        ))
    })
}

/// Inclusive range `lo:hi:step` with exact rational endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeSpec {
    pub lo: BigRational,
    pub hi: BigRational,
    pub step: BigRational,
}

/// Largest number of points one range may expand to.
pub const MAX_RANGE_POINTS: usize = 1_000_000;

impl RangeSpec {
    /// Parse `lo:hi:step`, or a single value `v` (one-point range).
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v = parse_rational(v)?;
                Ok(RangeSpec { lo: v.clone(), hi: v, step: BigRational::one() })
            }
            [lo, hi, step] => {
                let r = RangeSpec {
                    lo: parse_rational(lo)?,
                    hi: parse_rational(hi)?,
                    step: parse_rational(step)?,
                };
                if !r.step.is_positive() {
                    return Err(Error::InvalidParams(format!("range step must be positive: {s:?}")));
                }
                Ok(r)
            }
            _ => Err(Error::Parse(format!("expected lo:hi:step or a single value, got {s:?}"))),
        }
    }

    pub fn values(&self) -> Result<Vec<BigRational>> {
        if self.hi < self.lo {
            return Err(Error::InvalidParams("empty range: hi < lo".into()));
        }
        let count = ((self.hi.clone() - self.lo.clone()) / self.step.clone()).floor();
        let count = count.to_integer().to_usize().filter(|c| *c < MAX_RANGE_POINTS);
        let count = count.ok_or_else(|| Error::Budget("range expands to too many points".into()))?;
        Ok((0..=count)
            .map(|k| self.lo.clone() + self.step.clone() * BigRational::from_integer(BigInt::from(k)))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub params: RegimeParams,
    pub exponents: DerivedExponents,
    pub verdict: RegimeVerdict,
}

/// Classify every grid point; rows ordered lexicographically in `(q, a, d)`.
/// Grid points violating the tuple invariants are rejected.
pub fn sweep(n: u32, q: &RangeSpec, a: &RangeSpec, d: &RangeSpec) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let (qs, as_, ds) = (q.values()?, a.values()?, d.values()?);
    let total = qs.len().saturating_mul(as_.len()).saturating_mul(ds.len());
    if total == 0 {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    if total > MAX_RANGE_POINTS {
        return Err(Error::Budget(format!("grid has {total} points, limit {MAX_RANGE_POINTS}")));
    }
    let mut tuples = Vec::with_capacity(total);
    for qv in &qs {
        for av in &as_ {
            for dv in &ds {
                tuples.push((qv.clone(), av.clone(), dv.clone()));
            }
        }
    }
    tuples
        .into_par_iter()
        .map(|(qv, av, dv)| {
            let params = RegimeParams::exact(n, qv, av, dv)?;
            Ok(SweepRow {
                exponents: derive_exponents(&params),
                verdict: classify(&params),
                params,
            })
        })
        .collect()
}

/// CSV header for sweep and classify tables.
pub const CSV_HEADER: &str = "n,q,a,d,b,beta,hk,main,critnull,signconst,counterex";

/// Float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let p = &self.params;
        let e = &self.exponents;
        let v = &self.verdict;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.n,
            fmt17(p.q),
            fmt17(p.a),
            fmt17(p.d),
            e.b.map(fmt17).unwrap_or_default(),
            fmt17(e.beta),
            v.hk_applies,
            v.main_applies,
            v.critical_set_null,
            v.sign_constant,
            v.counterexample_exists
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(r("0.75"), BigRational::new(3.into(), 4.into()));
        assert_eq!(r("4/3"), BigRational::new(4.into(), 3.into()));
        assert_eq!(r("-1.5e2"), BigRational::from_integer((-150).into()));
        assert_eq!(r("2.5E-1"), BigRational::new(1.into(), 4.into()));
        assert_eq!(r(".5"), BigRational::new(1.into(), 2.into()));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1e99999").is_err());
    }

    #[test]
    fn example_exponents_are_exact() {
        let p = RegimeParams::parse(2, "3", "1", "1").unwrap();
        let x = derive_exponents_exact(&p).unwrap();
        assert_eq!(x.beta, r("5/3"));
        assert_eq!(x.series_exp_d2, r("-1/3"));
        assert_eq!(x.series_exp_jac, r("-1/3"));
        assert!(x.b.is_none());
    }

    #[test]
    fn b_exponent() {
        let p = RegimeParams::parse(2, "2", "1", "1").unwrap();
        assert_eq!(derive_exponents_exact(&p).unwrap().b, Some(r("2")));
        let p = RegimeParams::parse(3, "2", "1", "1").unwrap();
        assert_eq!(derive_exponents_exact(&p).unwrap().b, Some(r("6/5")));
        // q = n^2/(2n-1) exactly is outside the open lower bound.
        let p = RegimeParams::parse(2, "4/3", "1", "1").unwrap();
        assert!(sobolev_exponent_b(&p).is_err());
        let p = RegimeParams::parse(2, "3", "1", "1").unwrap();
        assert!(sobolev_exponent_b(&p).is_err());
    }

    #[test]
    fn boundary_comparators_follow_letter() {
        // n = 3, q > n: a > n - 1 is strict.
        let p = RegimeParams::parse(3, "4", "2", "1").unwrap();
        assert!(!classify(&p).main_applies);
        let p = RegimeParams::parse(3, "4", "2.000001", "1").unwrap();
        assert!(classify(&p).main_applies);
        // n = 2: (3/2 - 2/q) a >= 1 is weak; q = 4, a = 1 gives exactly 1.
        let p = RegimeParams::parse(2, "4", "1", "1").unwrap();
        assert!(classify(&p).main_applies);
        // q = n uses the middle branch; equality (1 + 1/2 - 1) * 2 = 1 counts.
        let p = RegimeParams::parse(2, "2", "2", "1").unwrap();
        assert!(classify(&p).critical_set_null);
        let p = RegimeParams::parse(2, "3", "3/2", "1").unwrap();
        let v = classify(&p);
        assert!(v.critical_set_null && !v.counterexample_exists);
    }

    #[test]
    fn gap_region_is_undetermined() {
        // n = 2, q = 1.5, small a: neither branch applies.
        let p = RegimeParams::parse(2, "1.5", "0.5", "1").unwrap();
        let v = classify(&p);
        assert!(!v.critical_set_null);
        assert_eq!(v.status, CriticalSetStatus::Counterexample);
        let p = RegimeParams::parse(2, "1.2", "10", "1").unwrap();
        let v = classify(&p);
        assert!(!v.critical_set_null && !v.counterexample_exists);
        assert_eq!(v.status, CriticalSetStatus::Undetermined);
    }

    #[test]
    fn rejects_invalid_tuples() {
        assert!(RegimeParams::new(1, 3.0, 1.0, 0.5).is_err());
        assert!(RegimeParams::new(2, 1.0, 1.0, 1.0).is_err());
        assert!(RegimeParams::new(2, 3.0, 0.0, 1.0).is_err());
        assert!(RegimeParams::new(2, 3.0, 1.0, 2.0).is_err());
        assert!(RegimeParams::parse(2, "3", "1", "0").is_err());
    }

    #[test]
    fn float_and_exact_agree_off_boundary() {
        let e = RegimeParams::parse(3, "6", "3", "2").unwrap();
        let f = RegimeParams::new(3, 6.0, 3.0, 2.0).unwrap();
        let (ve, vf) = (classify(&e), classify(&f));
        assert_eq!(ve.critical_set_null, vf.critical_set_null);
        assert_eq!(ve.counterexample_exists, vf.counterexample_exists);
        assert!(ve.critical_set_null);
    }

    #[test]
    fn range_values_are_inclusive() {
        let r = RangeSpec::parse("0.5:1.0:0.25").unwrap();
        assert_eq!(r.values().unwrap().len(), 3);
        assert!(RangeSpec::parse("1:0:0.1").unwrap().values().is_err());
        assert!(RangeSpec::parse("0:1:0").is_err());
        assert!(RangeSpec::parse("0:1").is_err());
    }
}
