//! Grayscale rasters, PGM I/O, intensity normalization and the synthetic
//! ridge generator.

mod corpus;
mod pgm;
mod synth;

pub use corpus::{perturb, CorpusParams, Impression, SyntheticFinger};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use synth::{
    parse_spec_file, synthesize_fingerprint, write_ground_truth, Dislocation, GroundTruth,
    SyntheticSpec, TruthMinutia,
};

use crate::error::{Error, Result};

/// Smallest width and height accepted by the processing pipeline.
pub const MIN_PIPELINE_DIM: usize = 16;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    /// Resolution tag; informational only.
    pub dpi: Option<u32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::BufferSize {
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            dpi: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            dpi: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
            dpi: None,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Rejects rasters below the 16x16 pipeline minimum.
    pub fn check_pipeline_size(&self) -> Result<()> {
        if self.width < MIN_PIPELINE_DIM || self.height < MIN_PIPELINE_DIM {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Mean and population standard deviation of the intensities.
    pub fn moments(&self) -> (f64, f64) {
        moments(self.pixels.iter().map(|&p| p as f64))
    }

    /// Builds an image from floating-point intensities, rounding and
    /// clamping to [0, 255].
    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values.iter().map(|&v| quantize(v)).collect();
        Self::new(width, height, pixels)
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

pub(crate) fn moments(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        s += v;
        s2 += v * v;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, var.sqrt())
}

/// Result of [`normalize_intensity`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub image: GrayImage,
    /// Set when the input had zero variance and was returned unchanged.
    pub degenerate: bool,
}

/// Linear intensity normalization to a target mean and standard deviation,
/// clamped to [0, 255].
pub fn normalize_intensity(
    image: &GrayImage,
    target_mean: f64,
    target_std: f64,
) -> Result<Normalized> {
    if !(target_std > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target_std must be positive, got {target_std}"
        )));
    }
    let (mean, std) = image.moments();
    if std < 1e-9 {
        return Ok(Normalized {
            image: image.clone(),
            degenerate: true,
        });
    }
    let gain = target_std / std;
    let pixels = image
        .pixels
        .iter()
        .map(|&p| quantize(target_mean + (p as f64 - mean) * gain))
        .collect();
    Ok(Normalized {
        image: GrayImage {
            width: image.width,
            height: image.height,
            pixels,
            dpi: image.dpi,
        },
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn buffer_size_checked() {
        assert!(matches!(
            GrayImage::new(3, 3, vec![0; 8]),
            Err(Error::BufferSize { .. })
        ));
    }

    #[test]
    fn small_images_rejected() {
        let img = GrayImage::filled(15, 40, 0);
        assert!(matches!(
            img.check_pipeline_size(),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(GrayImage::filled(16, 16, 0).check_pipeline_size().is_ok());
    }

    #[test]
    fn normalize_moves_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = Normal::new(200.0, 10.0).unwrap();
        let img = GrayImage::from_fn(64, 64, |_, _| quantize(dist.sample(&mut rng)));
        let (m0, s0) = img.moments();
        assert!((m0 - 200.0).abs() < 1.5 && (s0 - 10.0).abs() < 1.0);
        let out = normalize_intensity(&img, 128.0, 40.0).unwrap();
        assert!(!out.degenerate);
        let (m, s) = out.image.moments();
        assert!((m - 128.0).abs() <= 1.0, "mean {m}");
        assert!((s - 40.0).abs() <= 0.05 * 40.0, "std {s}");
    }

    #[test]
    fn normalize_constant_is_degenerate() {
        let img = GrayImage::filled(20, 20, 77);
        let out = normalize_intensity(&img, 128.0, 40.0).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.image, img);
    }

    #[test]
    fn normalize_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = Normal::new(128.0, 40.0).unwrap();
        let raw: Vec<f64> = (0..64 * 64).map(|_| dist.sample(&mut rng)).collect();
        let img = GrayImage::from_f64(64, 64, &raw).unwrap();
        let (m, s) = img.moments();
        let out = normalize_intensity(&img, m, s).unwrap();
        let max_diff = img
            .pixels()
            .iter()
            .zip(out.image.pixels())
            .map(|(&a, &b)| (a as i32 - b as i32).abs())
            .max()
            .unwrap();
        assert!(max_diff <= 1);
        let _ = rng.random::<u8>();
    }

    #[test]
    fn normalize_rejects_nonpositive_std() {
        let img = GrayImage::filled(20, 20, 1);
        assert!(normalize_intensity(&img, 128.0, 0.0).is_err());
    }
}
