//! The four comparison algorithms.
//!
//! * [`hh`]: triangle-grown minutia pairing, rigid alignment and normalized
//!   correlation of linear-symmetry patches. Similarity in `[0, 1]`.
//! * [`compat`]: pair compatibility tables linked into clusters. Integer
//!   similarity.
//! * [`elastic`]: anchor-pair alignment and one-to-one matching inside
//!   radius-dependent tolerance boxes. Similarity in `[0, 1]`.
//! * [`ridge`]: Gabor FingerCodes aligned by overlap-normalized correlation.
//!   Distance, `0` for identical inputs.

pub mod compat;
pub mod elastic;
pub mod hh;
pub mod ridge;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::NormKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatcherKind {
    Hh,
    Compat,
    Elastic,
    Ridge,
}

impl MatcherKind {
    pub const ALL: [MatcherKind; 4] = [MatcherKind::Hh, MatcherKind::Compat, MatcherKind::Elastic, MatcherKind::Ridge];

    pub fn id(self) -> &'static str {
        match self {
            MatcherKind::Hh => "hh",
            MatcherKind::Compat => "compat",
            MatcherKind::Elastic => "elastic",
            MatcherKind::Ridge => "ridge",
        }
    }

    /// How raw scores of this matcher become similarities.
    pub fn norm_kind(self) -> NormKind {
        match self {
            MatcherKind::Hh => NormKind::Identity,
            MatcherKind::Compat | MatcherKind::Elastic => NormKind::TanhSim,
            MatcherKind::Ridge => NormKind::ExpDissim,
        }
    }
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MatcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatcherKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown matcher {s:?}")))
    }
}
