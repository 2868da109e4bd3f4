use super::{
    inhibit, linear_symmetry, orientation_tensor_of, oriented_smooth, parabolic_symmetry,
    quality_map, segment, BinaryImage, ComplexField, FilterParams, QualityMap, QualityThresholds,
};
use crate::error::{Error, Result};
use crate::imageio::{normalize_intensity, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryConfig {
    pub filter: FilterParams,
    pub target_mean: f64,
    pub target_std: f64,
    /// Scale of the ridge-aligned smoothing; 0 disables it.
    pub enhance_sigma: f64,
    /// Minimum |LS| of the foreground.
    pub segment_threshold: f64,
    pub quality_block: usize,
    pub quality: QualityThresholds,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            target_mean: 128.0,
            target_std: 50.0,
            enhance_sigma: 1.5,
            segment_threshold: 0.3,
            quality_block: 16,
            quality: QualityThresholds::default(),
        }
    }
}

impl SymmetryConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        let q = &self.quality;
        let ok = self.target_std > 0.0
            && (0.0..=255.0).contains(&self.target_mean)
            && self.enhance_sigma >= 0.0
            && (0.0..=1.0).contains(&self.segment_threshold)
            && self.quality_block >= 4
            && q.contrast >= 0.0
            && (0.0..=1.0).contains(&q.coherence_low)
            && (q.coherence_low..=1.0).contains(&q.coherence_high)
            && q.curvature > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid symmetry configuration".into()))
        }
    }
}

/// Everything the minutia detectors and the correlation matcher need.
#[derive(Debug, Clone)]
pub struct SymmetryFields {
    /// Normalized and ridge-smoothed intensities.
    pub enhanced: GrayImage,
    pub ls: ComplexField,
    pub ps: ComplexField,
    pub psi: ComplexField,
    pub mask: BinaryImage,
    pub quality: QualityMap,
}

/// Normalization, ridge-aligned smoothing, symmetry filtering,
/// segmentation and the block quality map.
pub fn compute_fields(image: &GrayImage, cfg: &SymmetryConfig) -> Result<SymmetryFields> {
    image.check_pipeline_size()?;
    cfg.filter.validate()?;
    let (w, h) = (image.width(), image.height());
    let normalized = normalize_intensity(image, cfg.target_mean, cfg.target_std)?.image;
    let mut values = normalized.to_f64();
    if cfg.enhance_sigma > 0.0 {
        let z0 = orientation_tensor_of(&values, w, h, &cfg.filter)?;
        let ls0 = linear_symmetry(&z0, &cfg.filter);
        values = oriented_smooth(&values, w, h, &ls0, cfg.enhance_sigma);
    }
    let enhanced = GrayImage::from_f64(w, h, &values)?;
    let z = orientation_tensor_of(&values, w, h, &cfg.filter)?;
    let ls = linear_symmetry(&z, &cfg.filter);
    let ps = parabolic_symmetry(&z, &cfg.filter)?;
    let psi = inhibit(&ps, &ls)?;
    let mask = segment(&ls, cfg.segment_threshold)?;
    let quality = quality_map(&normalized, &ls, Some(&mask), cfg.quality_block, &cfg.quality)?;
    Ok(SymmetryFields {
        enhanced,
        ls,
        ps,
        psi,
        mask,
        quality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::{synthesize_fingerprint, SyntheticSpec};

    #[test]
    fn constant_image_has_no_fingerprint_area() {
        let img = GrayImage::filled(64, 64, 200);
        let err = compute_fields(&img, &SymmetryConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoFingerprintArea));
    }

    #[test]
    fn wave_fields_cover_the_frame() {
        let spec = SyntheticSpec {
            width: 80,
            height: 80,
            noise_std: 10.0,
            rng_seed: 1,
            ..Default::default()
        };
        let img = synthesize_fingerprint(&spec).unwrap().0;
        let f = compute_fields(&img, &SymmetryConfig::default()).unwrap();
        assert!(f.mask.count() as f64 >= 0.9 * 6400.0);
        assert!(f.quality.levels.iter().all(|&l| l >= 3));
    }
}
