use std::collections::VecDeque;

use super::ComplexField;
use crate::error::{Error, Result};

/// Row-major boolean raster used for masks, binarized ridges and skeletons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-range coordinates read as `false`.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Labels 8-connected components of pixels equal to `value`.
    /// Returns per-pixel labels (`usize::MAX` for other pixels) and sizes.
    pub fn components(&self, value: bool) -> (Vec<usize>, Vec<usize>) {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![usize::MAX; w * h];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if self.data[start] != value || labels[start] != usize::MAX {
                continue;
            }
            let label = sizes.len();
            let mut size = 0;
            labels[start] = label;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                size += 1;
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if self.data[j] == value && labels[j] == usize::MAX {
                            labels[j] = label;
                            queue.push_back(j);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }

    /// Chebyshev distance from `(x, y)` to the nearest background pixel,
    /// counting everything outside the frame as background; capped at `limit`.
    pub fn distance_to_edge(&self, x: usize, y: usize, limit: usize) -> usize {
        let (w, h) = (self.width as isize, self.height as isize);
        let (x, y) = (x as isize, y as isize);
        for r in 0..=limit as isize {
            if x - r < 0 || y - r < 0 || x + r >= w || y + r >= h {
                return r as usize;
            }
            for d in -r..=r {
                if !self.get_signed(x + d, y - r)
                    || !self.get_signed(x + d, y + r)
                    || !self.get_signed(x - r, y + d)
                    || !self.get_signed(x + r, y + d)
                {
                    return r as usize;
                }
            }
        }
        limit
    }
}

/// Foreground where `|LS| >= threshold`, reduced to the largest 8-connected
/// component with interior holes filled.
pub fn segment(ls: &ComplexField, threshold: f64) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "segmentation threshold {threshold} outside [0, 1]"
        )));
    }
    let (w, h) = (ls.width, ls.height);
    let raw = BinaryImage {
        width: w,
        height: h,
        data: ls.values.iter().map(|v| v.norm() >= threshold).collect(),
    };
    let (labels, sizes) = raw.components(true);
    let Some(best) = (0..sizes.len()).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))) else {
        return Err(Error::NoFingerprintArea);
    };
    let mut mask = BinaryImage {
        width: w,
        height: h,
        data: labels.iter().map(|&l| l == best).collect(),
    };
    // fill background components that do not touch the frame
    let (bg_labels, bg_sizes) = mask.components(false);
    let mut touches = vec![false; bg_sizes.len()];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                let l = bg_labels[y * w + x];
                if l != usize::MAX {
                    touches[l] = true;
                }
            }
        }
    }
    for (i, v) in mask.data.iter_mut().enumerate() {
        let l = bg_labels[i];
        if l != usize::MAX && !touches[l] {
            *v = true;
        }
    }
    Ok(mask)
}
