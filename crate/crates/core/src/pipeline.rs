//! End-to-end feature extraction from a grayscale image.

use crate::error::{Error, Result};
use crate::imageio::GrayImage;
use crate::matcher::compat::{match_compat, CompatConfig};
use crate::matcher::elastic::{elastic_match, ElasticConfig};
use crate::matcher::hh::{match_hh, HHBundle, HHConfig};
use crate::matcher::ridge::{match_fingercodes, ridge_features, FingerCode, RidgeConfig};
use crate::matcher::MatcherKind;
use crate::minutiae::{
    assess_minutia_quality, binarize, detect_minutiae_skeleton, detect_minutiae_symmetry,
    relocate_bifurcations, remove_false_minutiae, thin, ExtractionConfig, MinutiaTemplate,
};
use crate::symmetry::{compute_fields, BinaryImage, SymmetryConfig, SymmetryFields};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Symmetry,
    Skeleton,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetry" => Ok(Method::Symmetry),
            "skeleton" => Ok(Method::Skeleton),
            _ => Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Symmetry => "symmetry",
            Method::Skeleton => "skeleton",
        })
    }
}

/// Template from the symmetry-peak detector together with the fields it was
/// computed from (the correlation matcher needs the LS field).
pub fn extract_symmetry(
    image: &GrayImage,
    sym: &SymmetryConfig,
    cfg: &ExtractionConfig,
) -> Result<(MinutiaTemplate, SymmetryFields)> {
    let fields = compute_fields(image, sym)?;
    let t = detect_minutiae_symmetry(&fields.psi, &fields.ls, &fields.mask, cfg)?;
    Ok((t, fields))
}

/// Binarize, thin, detect by crossing number, clean up, grade.
pub fn extract_skeleton_from(fields: &SymmetryFields, cfg: &ExtractionConfig) -> Result<MinutiaTemplate> {
    let ridges = binarize(&fields.enhanced, &fields.mask, cfg)?;
    let skeleton = thin(&ridges);
    let candidates = detect_minutiae_skeleton(&skeleton, &fields.ls, cfg)?;
    let mut t = remove_false_minutiae(&candidates, &skeleton, &fields.quality, &fields.mask, cfg)?;
    if cfg.valley_snap > 0.0 {
        let valleys = BinaryImage::from_fn(ridges.width, ridges.height, |x, y| {
            fields.mask.get(x, y) && !ridges.get(x, y)
        });
        relocate_bifurcations(&mut t, &thin(&valleys), cfg.valley_snap);
    }
    for m in &mut t.minutiae {
        m.quality = assess_minutia_quality(m, &fields.enhanced, &fields.quality);
    }
    t.minutiae
        .sort_by(|a, b| b.quality.total_cmp(&a.quality).then(a.y.total_cmp(&b.y)).then(a.x.total_cmp(&b.x)));
    t.minutiae.truncate(cfg.max_minutiae);
    Ok(t)
}

pub fn extract_skeleton(
    image: &GrayImage,
    sym: &SymmetryConfig,
    cfg: &ExtractionConfig,
) -> Result<MinutiaTemplate> {
    extract_skeleton_from(&compute_fields(image, sym)?, cfg)
}

pub fn extract(image: &GrayImage, method: Method, sym: &SymmetryConfig, cfg: &ExtractionConfig) -> Result<MinutiaTemplate> {
    match method {
        Method::Symmetry => extract_symmetry(image, sym, cfg).map(|(t, _)| t),
        Method::Skeleton => extract_skeleton(image, sym, cfg),
    }
}

/// Every tunable of the pipeline in one place.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub symmetry: SymmetryConfig,
    pub extraction: ExtractionConfig,
    pub hh: HHConfig,
    pub compat: CompatConfig,
    pub elastic: ElasticConfig,
    pub ridge: RidgeConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.symmetry.validate()?;
        self.extraction.validate()?;
        self.hh.validate()?;
        self.compat.validate()?;
        self.elastic.validate()?;
        self.ridge.validate()
    }
}

/// What a matcher compares.
#[derive(Debug, Clone)]
pub enum Features {
    /// Symmetry template plus its LS field.
    Hh(HHBundle),
    /// Skeleton template.
    Minutiae(MinutiaTemplate),
    Ridge(FingerCode),
}

impl Features {
    pub fn describe(&self) -> &'static str {
        match self {
            Features::Hh(_) => "symmetry template with LS field",
            Features::Minutiae(_) => "minutia template",
            Features::Ridge(_) => "FingerCode",
        }
    }
}

/// Features of one image for several matchers; the symmetry fields are
/// computed once and shared.
pub fn features_for(image: &GrayImage, kinds: &[MatcherKind], cfg: &PipelineConfig) -> Result<Vec<Features>> {
    let needs_fields = kinds.iter().any(|k| *k != MatcherKind::Ridge);
    let fields = if needs_fields { Some(compute_fields(image, &cfg.symmetry)?) } else { None };
    let mut skeleton: Option<MinutiaTemplate> = None;
    kinds
        .iter()
        .map(|k| {
            Ok(match k {
                MatcherKind::Hh => {
                    let f = fields.as_ref().expect("fields computed");
                    let t = detect_minutiae_symmetry(&f.psi, &f.ls, &f.mask, &cfg.extraction)?;
                    Features::Hh(HHBundle { template: t, ls: f.ls.clone() })
                }
                MatcherKind::Compat | MatcherKind::Elastic => {
                    if skeleton.is_none() {
                        skeleton = Some(extract_skeleton_from(fields.as_ref().expect("fields computed"), &cfg.extraction)?);
                    }
                    Features::Minutiae(skeleton.clone().expect("just set"))
                }
                MatcherKind::Ridge => Features::Ridge(ridge_features(image, &cfg.symmetry, &cfg.ridge)?),
            })
        })
        .collect()
}

/// Raw score of `kind` on two feature sets.
pub fn compare(kind: MatcherKind, a: &Features, b: &Features, cfg: &PipelineConfig) -> Result<f64> {
    match (kind, a, b) {
        (MatcherKind::Hh, Features::Hh(x), Features::Hh(y)) => Ok(match_hh(x, y, &cfg.hh)),
        (MatcherKind::Compat, Features::Minutiae(x), Features::Minutiae(y)) => Ok(match_compat(x, y, &cfg.compat) as f64),
        (MatcherKind::Elastic, Features::Minutiae(x), Features::Minutiae(y)) => Ok(elastic_match(x, y, &cfg.elastic)),
        (MatcherKind::Ridge, Features::Ridge(x), Features::Ridge(y)) => Ok(match_fingercodes(x, y, &cfg.ridge)),
        _ => Err(Error::InvalidParameter(format!(
            "matcher {kind} cannot compare a {} with a {}",
            a.describe(),
            b.describe()
        ))),
    }
}
