//! Orientation tensor, linear and parabolic symmetry, quality map and
//! foreground segmentation.
//!
//! `z = (f_x + i f_y)^2` is built from Gaussian-derivative gradients.
//! Linear symmetry is the Gaussian average of `z` divided by the average of
//! `|z|`; its argument is the double-angle gradient orientation and its
//! magnitude the orientation coherence. Parabolic symmetry is the complex
//! scalar product of `z` with `(x + iy) g` at every position; its argument
//! is the minutia direction and its magnitude the certainty.

mod enhance;
mod fields;
pub mod filter;
mod quality;
mod segment;

pub use enhance::oriented_smooth;
pub use fields::{compute_fields, SymmetryConfig, SymmetryFields};
pub use quality::{quality_map, QualityMap, QualityThresholds};
pub use segment::{segment, BinaryImage};

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imageio::{quantize, save_pgm, GrayImage};
use filter::{separable, Border, Kernel1D};

/// Filter scales, in pixels at roughly 500 dpi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Scale of the Gaussian derivatives producing `f_x`, `f_y`.
    pub sigma_deriv: f64,
    /// Averaging scale for linear symmetry.
    pub sigma_avg: f64,
    /// Gaussian scale of the parabolic filter.
    pub sigma_para: f64,
    /// Order `n` of `(x + iy)^n g`; 1 for parabolic symmetry.
    pub filter_order: u8,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma_deriv: 1.0,
            sigma_avg: 4.0,
            sigma_para: 3.0,
            filter_order: 1,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_deriv, self.sigma_avg, self.sigma_para];
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(
                "filter sigmas must be positive".into(),
            ));
        }
        if self.filter_order > 1 {
            return Err(Error::InvalidParameter(format!(
                "filter order {} not in {{0, 1}}",
                self.filter_order
            )));
        }
        Ok(())
    }
}

/// Row-major complex raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::BufferSize {
                expected: width * height,
                found: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![Complex64::default(); width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.values[y * self.width + x]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn same_dims(&self, other: &ComplexField) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bilinear sample; `None` outside the raster.
    pub fn sample(&self, x: f64, y: f64) -> Option<Complex64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        if x0 >= self.width || y0 >= self.height {
            return None;
        }
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        if x1 >= self.width || y1 >= self.height {
            return None;
        }
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Writes the magnitude (scaled so the maximum maps to 255) and the
    /// argument (mapped from [-pi, pi] to [0, 255]) as two PGM files.
    pub fn dump_pgm(&self, magnitude: impl AsRef<Path>, argument: impl AsRef<Path>) -> Result<()> {
        let mags = self.magnitudes();
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
        let mag_img = GrayImage::new(
            self.width,
            self.height,
            mags.iter().map(|m| quantize(m * scale)).collect(),
        )?;
        let arg_img = GrayImage::new(
            self.width,
            self.height,
            self.values
                .iter()
                .map(|v| quantize((v.arg() + PI) / (2.0 * PI) * 255.0))
                .collect(),
        )?;
        save_pgm(&mag_img, magnitude)?;
        save_pgm(&arg_img, argument)
    }
}

/// Squared complex gradient `(f_x + i f_y)^2` at scale `sigma_deriv`.
pub fn orientation_tensor(image: &GrayImage, params: &FilterParams) -> Result<ComplexField> {
    image.check_pipeline_size()?;
    params.validate()?;
    orientation_tensor_of(&image.to_f64(), image.width(), image.height(), params)
}

/// As [`orientation_tensor`], on floating-point intensities.
pub fn orientation_tensor_of(
    values: &[f64],
    width: usize,
    height: usize,
    params: &FilterParams,
) -> Result<ComplexField> {
    let g = Kernel1D::gaussian(params.sigma_deriv);
    let d = Kernel1D::gaussian_derivative(params.sigma_deriv);
    let fx = separable(values, width, height, &d, &g, Border::Replicate);
    let fy = separable(values, width, height, &g, &d, Border::Replicate);
    let z = fx
        .iter()
        .zip(&fy)
        .map(|(&gx, &gy)| {
            let c = Complex64::new(gx, gy);
            c * c
        })
        .collect();
    ComplexField::new(width, height, z)
}

/// Averaged `|z|` below this fraction of its maximum counts as no signal.
/// Far from any structure both averages are Gaussian tails of the same
/// distant ridges and their ratio would report strong symmetry.
pub const ENERGY_FLOOR: f64 = 1e-3;

fn energy_floor(den: &[f64]) -> f64 {
    (den.iter().copied().fold(0.0, f64::max) * ENERGY_FLOOR).max(f64::MIN_POSITIVE)
}

/// Averaged `z` over averaged `|z|`; zero where the average of `|z|` is
/// below [`ENERGY_FLOOR`] of its maximum.
pub fn linear_symmetry(z: &ComplexField, params: &FilterParams) -> ComplexField {
    let g = Kernel1D::gaussian(params.sigma_avg);
    let (w, h) = (z.width, z.height);
    let num = separable(&z.values, w, h, &g, &g, Border::Zero);
    let mags: Vec<f64> = z.values.iter().map(|v| v.norm()).collect();
    let den = separable(&mags, w, h, &g, &g, Border::Zero);
    let floor = energy_floor(&den);
    let values = num
        .iter()
        .zip(&den)
        .map(|(&n, &d)| {
            if d < floor {
                Complex64::default()
            } else {
                let ls = n / d;
                let m = ls.norm();
                if m > 1.0 {
                    ls / m
                } else {
                    ls
                }
            }
        })
        .collect();
    ComplexField {
        width: w,
        height: h,
        values,
    }
}

/// Response of `(x + iy) g` to a unit-magnitude ideal parabolic pattern,
/// `sum |q| g(q)` over the discrete support.
pub fn parabolic_reference(sigma_para: f64) -> f64 {
    let g = Kernel1D::gaussian(sigma_para);
    let mut acc = 0.0;
    for (v, gy) in g.offsets() {
        for (u, gx) in g.offsets() {
            acc += ((u * u + v * v) as f64).sqrt() * gx * gy;
        }
    }
    acc
}

/// Scalar product of `z` with `h_1 = (x + iy) g` at every pixel, divided by
/// the ideal-pattern response scaled by the local average of `|z|`. The
/// ideal parabolic pattern (`z = e^{i arg q}`) therefore yields magnitude 1.
/// Zero where the average of `|z|` is below [`ENERGY_FLOOR`] of its maximum.
pub fn parabolic_symmetry(z: &ComplexField, params: &FilterParams) -> Result<ComplexField> {
    params.validate()?;
    if params.filter_order != 1 {
        return Err(Error::InvalidParameter(
            "parabolic symmetry needs filter order 1".into(),
        ));
    }
    let (w, h) = (z.width, z.height);
    let g = Kernel1D::gaussian(params.sigma_para);
    let m = Kernel1D::first_moment(params.sigma_para);
    // <z, (x + iy) g> = sum z (x - iy) g
    let re_part = separable(&z.values, w, h, &m, &g, Border::Zero);
    let im_part = separable(&z.values, w, h, &g, &m, Border::Zero);
    let mags: Vec<f64> = z.values.iter().map(|v| v.norm()).collect();
    let den = separable(&mags, w, h, &g, &g, Border::Zero);
    let reference = parabolic_reference(params.sigma_para);
    let floor = energy_floor(&den);
    let values = re_part
        .iter()
        .zip(&im_part)
        .zip(&den)
        .map(|((&a, &b), &d)| {
            let scale = d * reference;
            if d < floor || scale <= f64::MIN_POSITIVE {
                Complex64::default()
            } else {
                (a - Complex64::i() * b) / scale
            }
        })
        .collect();
    Ok(ComplexField {
        width: w,
        height: h,
        values,
    })
}

/// `PSi = PS * (1 - |LS|)`.
pub fn inhibit(ps: &ComplexField, ls: &ComplexField) -> Result<ComplexField> {
    if !ps.same_dims(ls) {
        return Err(Error::DimensionMismatch(format!(
            "PS is {}x{}, LS is {}x{}",
            ps.width, ps.height, ls.width, ls.height
        )));
    }
    let values = ps
        .values
        .iter()
        .zip(&ls.values)
        .map(|(&p, &l)| p * (1.0 - l.norm()))
        .collect();
    Ok(ComplexField {
        width: ps.width,
        height: ps.height,
        values,
    })
}
