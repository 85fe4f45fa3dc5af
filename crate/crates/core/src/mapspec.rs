//! JSON map descriptions, point parsing, and content digests.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cantor::{CantorMap, CantorSchedule};
use crate::error::{Error, Result};
use crate::maps::radial::ProfileSpec;
use crate::maps::{BallMap, DenseMap, Domain, FoldingMap, Mapping, RadialMap};
use crate::regimes::{parse_rational, RegimeParams};

/// Largest accepted dimension.
pub const MAX_DIM: usize = 16;

/// A number given either as a JSON number or as a decimal / `p/q` string.
/// Strings keep exact arithmetic available downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(s) => Ok(crate::regimes::rat_to_f64(&parse_rational(s)?)),
        }
    }

    fn text(&self) -> String {
        match self {
            Scalar::Number(v) => format!("{v:?}"),
            Scalar::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialParams {
    pub profile: ProfileSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseParams {
    pub centers: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorParams {
    pub d: Scalar,
    pub q: Scalar,
    pub a: Scalar,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum Family {
    Radial(RadialParams),
    Folding(FoldingParams),
    Ball(BallParams),
    Dense(DenseParams),
    Cantor(CantorParams),
}

/// `{"family": ..., "n": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: Family,
}

impl MapSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: MapSpec = serde_json::from_str(s).map_err(|e| Error::Parse(format!("map spec: {e}")))?;
        if spec.n < 1 || spec.n > MAX_DIM {
            return Err(Error::InvalidParams(format!("n={} outside 1..={MAX_DIM}", spec.n)));
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Radial(_) => "radial",
            Family::Folding(_) => "folding",
            Family::Ball(_) => "ball",
            Family::Dense(_) => "dense",
            Family::Cantor(_) => "cantor",
        }
    }

    /// Hex sha256 of the canonical (key-sorted, compact) JSON form.
    pub fn digest(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(digest_value(&value))
    }

    pub fn cantor(n: usize, d: Scalar, q: Scalar, a: Scalar, k: usize) -> Self {
        MapSpec { n, family: Family::Cantor(CantorParams { d, q, a, k }) }
    }

    /// Regime tuple and generation count for a Cantor spec.
    pub fn cantor_params(&self) -> Result<(RegimeParams, usize)> {
        let Family::Cantor(c) = &self.family else {
            return Err(Error::Precondition(format!("{} spec is not a Cantor spec", self.family_name())));
        };
        let n = u32::try_from(self.n).map_err(|_| Error::InvalidParams("n too large".into()))?;
        let all_text = [&c.d, &c.q, &c.a].iter().all(|s| matches!(s, Scalar::Text(_)));
        let p = if all_text {
            RegimeParams::parse(n, &c.q.text(), &c.a.text(), &c.d.text())?
        } else {
            RegimeParams::new(n, c.q.value()?, c.a.value()?, c.d.value()?)?
        };
        Ok((p, c.k))
    }

    pub fn cantor_schedule(&self) -> Result<CantorSchedule> {
        let (p, k) = self.cantor_params()?;
        CantorSchedule::build(&p, k)
    }

    pub fn build(&self) -> Result<Arc<dyn Mapping>> {
        let n = self.n;
        Ok(match &self.family {
            Family::Radial(r) => {
                r.profile.validate()?;
                let domain = r.domain.clone().unwrap_or_else(|| Domain::unit_cube(n));
                let center = r.center.clone().unwrap_or_else(|| vec![0.0; n]);
                if center.len() != n || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParams(format!("center must have {n} finite entries")));
                }
                Arc::new(RadialMap::centered(center, Arc::new(r.profile.clone()), domain)?)
            }
            Family::Folding(f) => Arc::new(match (f.q, f.a, f.alpha) {
                (Some(q), Some(a), Some(alpha)) => FoldingMap::new(n, q, a, alpha)?,
                (Some(q), Some(a), None) => FoldingMap::midpoint(n, q, a)?,
                (None, None, Some(alpha)) => FoldingMap::with_alpha(n, alpha)?,
                _ => return Err(Error::InvalidParams("folding params need {q, a}, {q, a, alpha}, or {alpha}".into())),
            }),
            Family::Ball(b) => Arc::new(match (b.q, b.a, b.beta) {
                (Some(q), Some(a), Some(beta)) => BallMap::new(n, q, a, beta)?,
                (Some(q), Some(a), None) => BallMap::midpoint(n, q, a)?,
                (None, None, Some(beta)) => BallMap::with_beta(n, beta)?,
                _ => return Err(Error::InvalidParams("ball params need {q, a}, {q, a, beta}, or {beta}".into())),
            }),
            Family::Dense(d) => {
                if n != 2 {
                    return Err(Error::InvalidParams(format!("dense family is planar, got n={n}")));
                }
                if d.centers.is_empty() {
                    return Err(Error::InvalidParams("dense family needs at least one center".into()));
                }
                Arc::new(DenseMap::new(d.centers.clone(), d.radii.clone())?)
            }
            Family::Cantor(_) => Arc::new(CantorMap::new(self.cantor_schedule()?)),
        })
    }
}

/// Hex sha256 of `value` serialized compactly with sorted object keys.
pub fn digest_value(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key, so compact output is canonical.
    let text = serde_json::to_string(value).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parse `"x1,x2,...,xn"` (whitespace tolerated) into finite coordinates.
pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty point".into()));
    }
    let mut out = Vec::new();
    for (i, part) in s.split(',').enumerate() {
        if i >= MAX_DIM {
            return Err(Error::Parse(format!("more than {MAX_DIM} coordinates")));
        }
        let t = part.trim();
        let v: f64 = t.parse().map_err(|_| Error::Parse(format!("coordinate {i}: {t:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("coordinate {i} is not finite")));
        }
        out.push(v);
    }
    Ok(out)
}
