//! Separable 1D correlation.
//!
//! Every 2D filter in the crate is built from these passes. Output pixel
//! `x` of a pass is `sum_u k[u] * src[x + u]`, accumulated in a fixed order
//! so results do not depend on how rows are split across threads. Samples
//! outside the frame either replicate the edge or read as zero.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

pub trait Sample: Copy + Default + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {}

impl Sample for f64 {}
impl Sample for Complex64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1D {
    pub radius: usize,
    /// `taps[u + radius]` weights offset `u`.
    pub taps: Vec<f64>,
    /// Antisymmetric taps; applied as `sum_{u>0} k[u] (s[x+u] - s[x-u])` so
    /// constant input gives exactly zero.
    pub odd: bool,
}

impl Kernel1D {
    fn sampled(sigma: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let taps = (0..=2 * radius)
            .map(|i| {
                let u = i as f64 - radius as f64;
                f(u, (-u * u / (2.0 * sigma * sigma)).exp())
            })
            .collect();
        Self {
            radius,
            taps,
            odd: false,
        }
    }

    /// Sampled Gaussian normalized to unit sum.
    pub fn gaussian(sigma: f64) -> Self {
        let mut k = Self::sampled(sigma, |_, g| g);
        let s: f64 = k.taps.iter().sum();
        k.taps.iter_mut().for_each(|t| *t /= s);
        k
    }

    /// First-derivative-of-Gaussian kernel, scaled so a unit ramp yields 1.
    pub fn gaussian_derivative(sigma: f64) -> Self {
        let mut k = Self::sampled(sigma, |u, g| u * g);
        let r = k.radius as f64;
        let s: f64 = k
            .taps
            .iter()
            .enumerate()
            .map(|(i, t)| t * (i as f64 - r))
            .sum();
        k.taps.iter_mut().for_each(|t| *t /= s);
        k.odd = true;
        k
    }

    /// `u * g(u)` with `g` the unit-sum Gaussian: the 1D factor of the
    /// `(x + iy) g` family.
    pub fn first_moment(sigma: f64) -> Self {
        let g = Self::gaussian(sigma);
        let r = g.radius as f64;
        let taps = g
            .taps
            .iter()
            .enumerate()
            .map(|(i, t)| t * (i as f64 - r))
            .collect();
        Self {
            radius: g.radius,
            taps,
            odd: true,
        }
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let r = self.radius as isize;
        self.taps.iter().enumerate().map(move |(i, &t)| (i as isize - r, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Border {
    #[default]
    Replicate,
    /// Out-of-frame samples are zero. Used for ratio filters, where the
    /// missing weight cancels between numerator and denominator.
    Zero,
}

#[inline]
fn fetch<T: Sample>(line: &[T], i: isize, border: Border) -> T {
    let n = line.len() as isize;
    if i >= 0 && i < n {
        line[i as usize]
    } else {
        match border {
            Border::Replicate => line[i.clamp(0, n - 1) as usize],
            Border::Zero => T::default(),
        }
    }
}

pub fn correlate_rows<T: Sample>(
    src: &[T],
    width: usize,
    height: usize,
    k: &Kernel1D,
    border: Border,
) -> Vec<T> {
    assert_eq!(src.len(), width * height);
    let mut dst = vec![T::default(); src.len()];
    dst.par_chunks_mut(width)
        .zip(src.par_chunks(width))
        .for_each(|(out, row)| {
            for (x, o) in out.iter_mut().enumerate() {
                let mut acc = T::default();
                if k.odd {
                    for (u, t) in k.offsets().skip(k.radius + 1) {
                        let a = fetch(row, x as isize + u, border);
                        let b = fetch(row, x as isize - u, border);
                        acc = acc + (a + b * -1.0) * t;
                    }
                } else {
                    for (u, t) in k.offsets() {
                        acc = acc + fetch(row, x as isize + u, border) * t;
                    }
                }
                *o = acc;
            }
        });
    let _ = height;
    dst
}

pub fn correlate_cols<T: Sample>(
    src: &[T],
    width: usize,
    height: usize,
    k: &Kernel1D,
    border: Border,
) -> Vec<T> {
    assert_eq!(src.len(), width * height);
    let mut dst = vec![T::default(); src.len()];
    let zeros = vec![T::default(); width];
    dst.par_chunks_mut(width).enumerate().for_each(|(y, out)| {
        let row_at = |v: isize| -> &[T] {
            let sy = y as isize + v;
            if sy < 0 || sy >= height as isize {
                if border == Border::Zero {
                    return &zeros;
                }
            }
            let sy = sy.clamp(0, height as isize - 1) as usize;
            &src[sy * width..(sy + 1) * width]
        };
        if k.odd {
            for (v, t) in k.offsets().skip(k.radius + 1) {
                let (a, b) = (row_at(v), row_at(-v));
                for ((o, &p), &q) in out.iter_mut().zip(a).zip(b) {
                    *o = *o + (p + q * -1.0) * t;
                }
            }
        } else {
            for (v, t) in k.offsets() {
                for (o, &s) in out.iter_mut().zip(row_at(v)) {
                    *o = *o + s * t;
                }
            }
        }
    });
    dst
}

/// Horizontal pass with `kx`, then vertical pass with `ky`.
pub fn separable<T: Sample>(
    src: &[T],
    width: usize,
    height: usize,
    kx: &Kernel1D,
    ky: &Kernel1D,
    border: Border,
) -> Vec<T> {
    let rows = correlate_rows(src, width, height, kx, border);
    correlate_cols(&rows, width, height, ky, border)
}
