//! Raw scores to `[0, 1]` similarities, and max / mean fusion.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// Scores already are similarities in `[0, 1]`.
    Identity,
    /// `tanh(s / c)` for unbounded similarities.
    TanhSim,
    /// `exp(-s / c)` for distances.
    ExpDissim,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Identity => "identity",
            NormKind::TanhSim => "tanh_sim",
            NormKind::ExpDissim => "exp_dissim",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(NormKind::Identity),
            "tanh_sim" => Ok(NormKind::TanhSim),
            "exp_dissim" => Ok(NormKind::ExpDissim),
            other => Err(Error::InvalidParameter(format!("unknown normalizer kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub kind: NormKind,
    pub c: f64,
}

impl Normalizer {
    pub const IDENTITY: Normalizer = Normalizer { kind: NormKind::Identity, c: 1.0 };

    pub fn new(kind: NormKind, c: f64) -> Result<Self> {
        if kind != NormKind::Identity && !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("normalizer scale {c} must be positive")));
        }
        Ok(Self { kind, c })
    }

    /// Fits `c` to the pooled scores, see [`calibrate_c`].
    pub fn calibrated(kind: NormKind, scores: &[f64]) -> Result<Self> {
        Ok(Self { kind, c: calibrate_c(scores, kind)? })
    }

    pub fn apply(&self, s: f64) -> Result<f64> {
        normalize(s, self)
    }

    /// `NORM <matcher_id> <kind> <c>`.
    pub fn to_line(&self, matcher_id: &str) -> String {
        format!("NORM {matcher_id} {} {}", self.kind, self.c)
    }

    pub fn parse_line(line: &str) -> Result<(String, Normalizer)> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 || f[0] != "NORM" {
            return Err(Error::parse(1, "expected \"NORM <matcher_id> <kind> <c>\""));
        }
        let c: f64 = f[3].parse().map_err(|_| Error::parse(1, format!("bad scale {:?}", f[3])))?;
        Ok((f[1].to_string(), Normalizer::new(f[2].parse()?, c)?))
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Scale that sends the pooled median to 0.5. A zero median falls back to
/// the smallest positive score over `ln 2`.
pub fn calibrate_c(scores: &[f64], kind: NormKind) -> Result<f64> {
    if kind == NormKind::Identity {
        return Ok(1.0);
    }
    if scores.len() < 10 {
        return Err(Error::InsufficientCalibrationData(scores.len()));
    }
    if let Some(&neg) = scores.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::NegativeScore(neg));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = median(&sorted);
    if m > 0.0 {
        let c = match kind {
            NormKind::TanhSim => m / 0.5f64.atanh(),
            _ => m / std::f64::consts::LN_2,
        };
        return Ok(settle_half(m, c, kind));
    }
    sorted
        .iter()
        .find(|s| **s > 0.0)
        .map(|s| s / std::f64::consts::LN_2)
        .ok_or(Error::DegenerateCalibration)
}

/// Steps `c` by single ulps until `m` normalizes to exactly 0.5, when a
/// handful of steps suffice.
fn settle_half(m: f64, c: f64, kind: NormKind) -> f64 {
    let f = |c: f64| match kind {
        NormKind::TanhSim => (m / c).tanh(),
        _ => exp_dissim(m, c),
    };
    let mut x = c;
    for _ in 0..16 {
        let v = f(x);
        if v == 0.5 {
            return x;
        }
        // both maps grow with c for tanh below the target, fall for exp
        let grow_c = (v > 0.5) == (kind == NormKind::TanhSim);
        x = if grow_c { x.next_up() } else { x.next_down() };
    }
    c
}

pub fn normalize(s: f64, n: &Normalizer) -> Result<f64> {
    let v = match n.kind {
        NormKind::Identity => return Ok(s),
        _ if s < 0.0 || s.is_nan() => return Err(Error::NegativeScore(s)),
        NormKind::TanhSim => (s / n.c).tanh(),
        NormKind::ExpDissim => exp_dissim(s, n.c),
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `exp(-s / c)` evaluated as `2^(-s / (c ln 2))`, so that `s = c * LN_2`
/// divides to exactly 1 and maps to exactly 0.5.
fn exp_dissim(s: f64, c: f64) -> f64 {
    (-s / (c * std::f64::consts::LN_2)).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionRule {
    Max,
    /// Realized as the mean, which ranks trials exactly like the sum.
    Sum,
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionRule::Max => "max",
            FusionRule::Sum => "sum",
        })
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(FusionRule::Max),
            "sum" => Ok(FusionRule::Sum),
            other => Err(Error::InvalidParameter(format!("unknown fusion rule {other:?}"))),
        }
    }
}

pub fn fuse(scores: &[f64], rule: FusionRule) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    Ok(match rule {
        FusionRule::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        FusionRule::Sum => scores.iter().sum::<f64>() / scores.len() as f64,
    })
}
