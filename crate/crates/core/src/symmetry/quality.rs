use super::{BinaryImage, ComplexField};
use crate::error::{Error, Result};
use crate::geometry::wrap_deg;
use crate::imageio::{moments, GrayImage};

/// Thresholds combining contrast, coherence and curvature into five levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityThresholds {
    /// Minimum block intensity std, intensity units.
    pub contrast: f64,
    /// Low coherence bound (magnitude of the block-averaged LS).
    pub coherence_low: f64,
    /// High coherence bound (magnitude of the block-averaged LS).
    pub coherence_high: f64,
    /// Maximum orientation change to any 8-neighbour block, degrees.
    pub curvature: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            contrast: 8.0,
            coherence_low: 0.3,
            coherence_high: 0.5,
            curvature: 30.0,
        }
    }
}

/// Per-block quality level, 0 (background or worst) to 4 (best).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityMap {
    pub block_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub levels: Vec<u8>,
}

impl QualityMap {
    pub fn uniform(width: usize, height: usize, block_size: usize, level: u8) -> Self {
        let cols = width.div_ceil(block_size);
        let rows = height.div_ceil(block_size);
        Self {
            block_size,
            cols,
            rows,
            levels: vec![level; cols * rows],
        }
    }

    pub fn block(&self, col: usize, row: usize) -> u8 {
        self.levels[row * self.cols + col]
    }

    /// Level of the block containing pixel `(x, y)`.
    pub fn level_at(&self, x: f64, y: f64) -> u8 {
        let col = ((x.max(0.0) as usize) / self.block_size).min(self.cols - 1);
        let row = ((y.max(0.0) as usize) / self.block_size).min(self.rows - 1);
        self.block(col, row)
    }
}

/// Level 0 for background blocks or contrast below the threshold; else 4,
/// minus one if coherence is below `coherence_high`, minus one more if it is
/// also below `coherence_low`, minus one if curvature exceeds the bound.
/// Curvature is measured against neighbours with at least `coherence_low`
/// coherence; a block below `coherence_low` fails the curvature test.
pub fn quality_map(
    image: &GrayImage,
    ls: &ComplexField,
    mask: Option<&BinaryImage>,
    block_size: usize,
    thresholds: &QualityThresholds,
) -> Result<QualityMap> {
    if block_size < 8 {
        return Err(Error::InvalidParameter(format!(
            "quality block size {block_size} < 8"
        )));
    }
    let (w, h) = (image.width(), image.height());
    if ls.width != w || ls.height != h {
        return Err(Error::DimensionMismatch("LS does not match image".into()));
    }
    if let Some(m) = mask {
        if m.width != w || m.height != h {
            return Err(Error::DimensionMismatch("mask does not match image".into()));
        }
    }
    let cols = w.div_ceil(block_size);
    let rows = h.div_ceil(block_size);
    let n = cols * rows;
    let mut contrast = vec![0.0; n];
    let mut coherence = vec![0.0; n];
    let mut orientation = vec![0.0; n];
    let mut background = vec![false; n];
    for row in 0..rows {
        for col in 0..cols {
            let (x0, y0) = (col * block_size, row * block_size);
            let (x1, y1) = ((x0 + block_size).min(w), (y0 + block_size).min(h));
            let pixels = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y)));
            let (_, std) = moments(pixels.clone().map(|(x, y)| image.get(x, y) as f64));
            let mut sum = num_complex::Complex64::default();
            let mut inside = 0usize;
            let mut total = 0usize;
            for (x, y) in pixels {
                sum += ls.get(x, y);
                total += 1;
                if mask.is_none_or(|m| m.get(x, y)) {
                    inside += 1;
                }
            }
            let b = row * cols + col;
            contrast[b] = std;
            coherence[b] = sum.norm() / total as f64;
            orientation[b] = sum.arg().to_degrees();
            background[b] = inside * 2 < total;
        }
    }
    let mut levels = vec![0u8; n];
    for row in 0..rows {
        for col in 0..cols {
            let b = row * cols + col;
            if background[b] || contrast[b] < thresholds.contrast {
                continue;
            }
            let mut curvature: f64 = 0.0;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (r, c) = (row as isize + dr, col as isize + dc);
                    if (dr == 0 && dc == 0) || r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
                        continue;
                    }
                    let nb = r as usize * cols + c as usize;
                    if background[nb] || coherence[nb] < thresholds.coherence_low {
                        continue;
                    }
                    // orientations are double angles
                    curvature = curvature.max(wrap_deg(orientation[b] - orientation[nb]).abs() / 2.0);
                }
            }
            let mut level = 4i32;
            if coherence[b] < thresholds.coherence_high {
                level -= 1;
            }
            if coherence[b] < thresholds.coherence_low {
                level -= 1;
            }
            // without coherent flow the orientation, and so the curvature, is undefined
            if curvature > thresholds.curvature || coherence[b] < thresholds.coherence_low {
                level -= 1;
            }
            levels[b] = level as u8;
        }
    }
    Ok(QualityMap {
        block_size,
        cols,
        rows,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::{synthesize_fingerprint, SyntheticSpec};
    use crate::symmetry::{linear_symmetry, orientation_tensor, FilterParams};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn ls_of(img: &GrayImage) -> ComplexField {
        let p = FilterParams::default();
        linear_symmetry(&orientation_tensor(img, &p).unwrap(), &p)
    }

    #[test]
    fn constant_blocks_are_level_zero() {
        let img = GrayImage::filled(64, 64, 100);
        let q = quality_map(&img, &ls_of(&img), None, 16, &Default::default()).unwrap();
        assert!(q.levels.iter().all(|&l| l == 0));
        assert_eq!((q.cols, q.rows), (4, 4));
    }

    #[test]
    fn clean_wave_is_level_four() {
        let spec = SyntheticSpec {
            width: 96,
            height: 96,
            base_orientation: 35.0,
            ..Default::default()
        };
        let img = synthesize_fingerprint(&spec).unwrap().0;
        let q = quality_map(&img, &ls_of(&img), None, 16, &Default::default()).unwrap();
        assert!(q.levels.iter().all(|&l| l == 4), "{:?}", q.levels);
    }

    #[test]
    fn noise_is_level_one_or_less() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = Normal::new(128.0, 40.0).unwrap();
        let raw: Vec<f64> = (0..96 * 96).map(|_| n.sample(&mut rng)).collect();
        let img = GrayImage::from_f64(96, 96, &raw).unwrap();
        let q = quality_map(&img, &ls_of(&img), None, 16, &Default::default()).unwrap();
        assert!(q.levels.iter().all(|&l| l <= 1), "{:?}", q.levels);
    }

    #[test]
    fn background_blocks_follow_mask() {
        let spec = SyntheticSpec {
            width: 64,
            height: 64,
            ..Default::default()
        };
        let img = synthesize_fingerprint(&spec).unwrap().0;
        let mask = BinaryImage::from_fn(64, 64, |x, _| x < 32);
        let q = quality_map(&img, &ls_of(&img), Some(&mask), 16, &Default::default()).unwrap();
        assert_eq!(q.block(3, 1), 0);
        assert_eq!(q.block(0, 1), 4);
        assert_eq!(q.level_at(70.0, 10.0), 0);
    }

    #[test]
    fn small_block_rejected() {
        let img = GrayImage::filled(32, 32, 0);
        assert!(quality_map(&img, &ls_of(&img), None, 4, &Default::default()).is_err());
    }
}
