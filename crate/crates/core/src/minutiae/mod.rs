//! Minutia templates from two detectors: peaks of the inhibited parabolic
//! symmetry response, and crossing numbers on a thinned binary skeleton
//! followed by false-minutia removal.

mod cleanup;
mod io;
mod skeleton;
mod symmetric;

pub use cleanup::{assess_minutia_quality, remove_false_minutiae};
pub use io::{parse_template, read_template, render_template, write_template};
pub use skeleton::{binarize, crossing_number, detect_minutiae_skeleton, relocate_bifurcations, thin};
pub use symmetric::detect_minutiae_symmetry;

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MinutiaKind {
    Termination,
    Bifurcation,
    Unknown,
}

impl MinutiaKind {
    pub fn code(self) -> char {
        match self {
            MinutiaKind::Termination => 'T',
            MinutiaKind::Bifurcation => 'B',
            MinutiaKind::Unknown => 'U',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "T" => Some(MinutiaKind::Termination),
            "B" => Some(MinutiaKind::Bifurcation),
            "U" => Some(MinutiaKind::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    /// Degrees in `[0, 360)`, image coordinates (y down).
    pub direction: f64,
    pub kind: MinutiaKind,
    /// In `[0, 1]`.
    pub quality: f64,
}

impl Minutia {
    pub fn new(x: f64, y: f64, direction: f64, kind: MinutiaKind, quality: f64) -> Self {
        Self {
            x,
            y,
            direction: crate::geometry::normalize_deg(direction),
            kind,
            quality,
        }
    }

    pub fn distance(&self, other: &Minutia) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateSource {
    Symmetry,
    Skeleton,
}

impl fmt::Display for TemplateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateSource::Symmetry => "symmetry",
            TemplateSource::Skeleton => "skeleton",
        })
    }
}

impl std::str::FromStr for TemplateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetry" => Ok(TemplateSource::Symmetry),
            "skeleton" => Ok(TemplateSource::Skeleton),
            _ => Err(Error::InvalidParameter(format!("unknown template source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaTemplate {
    pub width: usize,
    pub height: usize,
    pub source: TemplateSource,
    /// Symmetry templates are ordered by descending response magnitude.
    pub minutiae: Vec<Minutia>,
}

impl MinutiaTemplate {
    pub fn new(width: usize, height: usize, source: TemplateSource) -> Self {
        Self {
            width,
            height,
            source,
            minutiae: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    /// Same template with every minutia moved by `t` (directions rotated too).
    pub fn transformed(&self, t: &crate::geometry::RigidTransform) -> Self {
        let minutiae = self
            .minutiae
            .iter()
            .map(|m| {
                let (x, y) = t.apply(m.x, m.y);
                Minutia::new(x, y, t.apply_angle(m.direction), m.kind, m.quality)
            })
            .collect();
        Self {
            minutiae,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    /// Side of the non-maximum suppression window; odd.
    pub nms_window: usize,
    /// Radius of the linear-symmetry ring around a symmetry peak; also the
    /// border distance below which skeleton minutiae are dropped.
    pub surround_radius: f64,
    pub surround_ls_min: f64,
    /// Minimum |PSi| of a symmetry peak.
    pub min_peak: f64,
    pub max_minutiae: usize,
    /// Side of the local-mean window used for binarization.
    pub binarization_block: usize,
    pub spur_max_len: usize,
    pub lake_max_perimeter: usize,
    pub min_separation: f64,
    /// Skeleton steps traced to orient a minutia.
    pub trace_len: usize,
    /// Search radius for moving a bifurcation onto its valley ending;
    /// 0 keeps the ridge junction.
    pub valley_snap: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            nms_window: 9,
            surround_radius: 8.0,
            surround_ls_min: 0.4,
            min_peak: 0.05,
            max_minutiae: 60,
            binarization_block: 11,
            spur_max_len: 8,
            lake_max_perimeter: 24,
            min_separation: 8.0,
            trace_len: 8,
            valley_snap: 6.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.nms_window < 3 || self.nms_window % 2 == 0 {
            return bad("nms_window must be odd and at least 3");
        }
        if !(self.surround_radius >= 0.0) {
            return bad("surround_radius must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.surround_ls_min) {
            return bad("surround_ls_min must lie in [0, 1]");
        }
        if !(self.min_peak >= 0.0) {
            return bad("min_peak must be non-negative");
        }
        if self.binarization_block < 3 {
            return bad("binarization_block must be at least 3");
        }
        if !(self.min_separation >= 0.0) {
            return bad("min_separation must be non-negative");
        }
        if !(self.valley_snap >= 0.0) {
            return bad("valley_snap must be non-negative");
        }
        if self.trace_len == 0 {
            return bad("trace_len must be positive");
        }
        Ok(())
    }
}
