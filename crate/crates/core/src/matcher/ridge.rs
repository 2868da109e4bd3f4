use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imageio::GrayImage;
use crate::symmetry::filter::{separable, Border, Kernel1D};
use crate::symmetry::{linear_symmetry, orientation_tensor, segment, BinaryImage, SymmetryConfig};

pub const ORIENTATIONS: usize = 8;

/// Distance reported when two codes cannot be aligned.
pub const MAX_DISTANCE: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborBankParams {
    /// Cycles per pixel.
    pub frequency: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for GaborBankParams {
    fn default() -> Self {
        Self {
            frequency: 0.1,
            sigma_x: 4.0,
            sigma_y: 4.0,
        }
    }
}

impl GaborBankParams {
    /// Wave-normal directions, degrees.
    pub fn orientations() -> [f64; ORIENTATIONS] {
        std::array::from_fn(|i| i as f64 * 180.0 / ORIENTATIONS as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frequency > 0.0 && self.frequency < 0.5 && self.sigma_x > 0.0 && self.sigma_y > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid Gabor bank parameters".into()))
        }
    }
}

/// Per-cell statistic of the filtered images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Statistic {
    #[default]
    Std,
    Variance,
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Statistic::Std => "std",
            Statistic::Variance => "variance",
        })
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(Statistic::Std),
            "variance" => Ok(Statistic::Variance),
            other => Err(Error::InvalidParameter(format!("unknown statistic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    pub bank: GaborBankParams,
    pub cell_size: usize,
    pub statistic: Statistic,
    /// Foreground fraction a cell needs to be valid.
    pub min_coverage: f64,
    /// Offsets overlapping fewer than this fraction of the smaller set of
    /// valid cells are not considered.
    pub min_overlap: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            bank: GaborBankParams::default(),
            cell_size: 16,
            statistic: Statistic::Std,
            min_coverage: 0.5,
            min_overlap: 0.25,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        self.bank.validate()?;
        if self.cell_size < 8 {
            return Err(Error::InvalidParameter(format!("cell size {} below 8", self.cell_size)));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) || !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::InvalidParameter("coverage fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn taps(radius: usize, f: impl Fn(f64) -> f64, odd: bool) -> Kernel1D {
    Kernel1D {
        radius,
        taps: (0..=2 * radius).map(|i| f(i as f64 - radius as f64)).collect(),
        odd,
    }
}

/// Magnitude of the response to a zero-mean even Gabor kernel, one image
/// per orientation. Isotropic envelopes run as separable passes.
pub fn gabor_bank(image: &GrayImage, params: &GaborBankParams) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let src = image.to_f64();
    let w0 = std::f64::consts::TAU * params.frequency;
    let isotropic = params.sigma_x == params.sigma_y;
    GaborBankParams::orientations()
        .par_iter()
        .map(|&theta| {
            let (s, c) = theta.to_radians().sin_cos();
            let out = if isotropic {
                let sigma = params.sigma_x;
                let r = (3.0 * sigma).ceil() as usize;
                let g = |u: f64| (-u * u / (2.0 * sigma * sigma)).exp();
                let cx = taps(r, |u| g(u) * (w0 * c * u).cos(), false);
                let sx = taps(r, |u| g(u) * (w0 * c * u).sin(), true);
                let cy = taps(r, |u| g(u) * (w0 * s * u).cos(), false);
                let sy = taps(r, |u| g(u) * (w0 * s * u).sin(), true);
                let env = taps(r, g, false);
                // the sine terms sum to zero, so only cos * cos carries DC
                let (sc_x, sc_y, se): (f64, f64, f64) =
                    (cx.taps.iter().sum(), cy.taps.iter().sum(), env.taps.iter().sum());
                let dc = sc_x * sc_y / (se * se);
                let cc = separable(&src, w, h, &cx, &cy, Border::Replicate);
                let ss = separable(&src, w, h, &sx, &sy, Border::Replicate);
                let ee = separable(&src, w, h, &env, &env, Border::Replicate);
                cc.iter()
                    .zip(&ss)
                    .zip(&ee)
                    .map(|((a, b), e)| (a - b - dc * e).abs())
                    .collect()
            } else {
                direct_gabor(&src, w, h, theta, params)
            };
            Ok(out)
        })
        .collect()
}

fn even_kernel(theta: f64, p: &GaborBankParams) -> (usize, Vec<f64>) {
    let r = (3.0 * p.sigma_x.max(p.sigma_y)).ceil() as usize;
    let n = 2 * r + 1;
    let (s, c) = theta.to_radians().sin_cos();
    let mut k = vec![0.0; n * n];
    let mut env = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 - r as f64, j as f64 - r as f64);
            let (xr, yr) = (x * c + y * s, -x * s + y * c);
            let e = (-(xr * xr) / (2.0 * p.sigma_x * p.sigma_x) - (yr * yr) / (2.0 * p.sigma_y * p.sigma_y)).exp();
            env[j * n + i] = e;
            k[j * n + i] = e * (std::f64::consts::TAU * p.frequency * xr).cos();
        }
    }
    let ratio = k.iter().sum::<f64>() / env.iter().sum::<f64>();
    for (v, e) in k.iter_mut().zip(&env) {
        *v -= ratio * e;
    }
    (r, k)
}

fn direct_gabor(src: &[f64], w: usize, h: usize, theta: f64, p: &GaborBankParams) -> Vec<f64> {
    let (r, k) = even_kernel(theta, p);
    let n = 2 * r + 1;
    let r = r as isize;
    (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            let mut acc = 0.0;
            for v in -r..=r {
                let sy = (y + v).clamp(0, h as isize - 1) as usize;
                for u in -r..=r {
                    let sx = (x + u).clamp(0, w as isize - 1) as usize;
                    acc += k[(v + r) as usize * n + (u + r) as usize] * src[sy * w + sx];
                }
            }
            acc.abs()
        })
        .collect()
}

/// Per-cell, per-orientation statistics over a square tessellation.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerCode {
    pub grid_w: usize,
    pub grid_h: usize,
    pub cell_size: usize,
    /// Row-major cells.
    pub values: Vec<[f64; ORIENTATIONS]>,
    pub valid: Vec<bool>,
}

impl FingerCode {
    pub fn cells(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    fn at(&self, cx: isize, cy: isize) -> Option<&[f64; ORIENTATIONS]> {
        if cx < 0 || cy < 0 || cx >= self.grid_w as isize || cy >= self.grid_h as isize {
            return None;
        }
        let i = cy as usize * self.grid_w + cx as usize;
        self.valid[i].then(|| &self.values[i])
    }

    pub fn render(&self) -> String {
        let mut s = format!("FC {} {} {}\n", self.grid_w, self.grid_h, self.cell_size);
        for cy in 0..self.grid_h {
            for cx in 0..self.grid_w {
                let i = cy * self.grid_w + cx;
                write!(s, "{cx} {cy} {}", u8::from(self.valid[i])).unwrap();
                for v in &self.values[i] {
                    write!(s, " {v:.6}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing FC header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 || f[0] != "FC" {
            return Err(Error::parse(1, "expected \"FC <grid_w> <grid_h> <cell_size>\""));
        }
        let num = |s: &str, line: usize| s.parse::<usize>().map_err(|_| Error::parse(line, format!("bad integer {s:?}")));
        let (gw, gh, cell) = (num(f[1], 1)?, num(f[2], 1)?, num(f[3], 1)?);
        let mut code = FingerCode {
            grid_w: gw,
            grid_h: gh,
            cell_size: cell,
            values: vec![[0.0; ORIENTATIONS]; gw * gh],
            valid: vec![false; gw * gh],
        };
        let mut seen = 0;
        for (i, line) in lines {
            let n = i + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 + ORIENTATIONS {
                return Err(Error::parse(n, format!("expected {} fields", 3 + ORIENTATIONS)));
            }
            let (cx, cy) = (num(f[0], n)?, num(f[1], n)?);
            if cx >= gw || cy >= gh {
                return Err(Error::parse(n, "cell outside the grid"));
            }
            let idx = cy * gw + cx;
            code.valid[idx] = match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(n, format!("validity {other:?} is not 0 or 1"))),
            };
            for (k, s) in f[3..].iter().enumerate() {
                let v: f64 = s.parse().map_err(|_| Error::parse(n, format!("bad value {s:?}")))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::parse(n, "values must be finite and non-negative"));
                }
                code.values[idx][k] = v;
            }
            seen += 1;
        }
        if seen != gw * gh {
            return Err(Error::parse(1, format!("header announces {} cells, found {seen}", gw * gh)));
        }
        Ok(code)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.render())?)
    }
}

/// Full cells only; a cell is valid when at least `min_coverage` of its
/// pixels are foreground. Invalid cells hold zeros.
pub fn extract_fingercode(
    filtered: &[Vec<f64>],
    width: usize,
    height: usize,
    mask: &BinaryImage,
    cfg: &RidgeConfig,
) -> Result<FingerCode> {
    cfg.validate()?;
    if filtered.len() != ORIENTATIONS || filtered.iter().any(|f| f.len() != width * height) {
        return Err(Error::DimensionMismatch("filtered images do not match the frame".into()));
    }
    if mask.width != width || mask.height != height {
        return Err(Error::DimensionMismatch("mask does not match the frame".into()));
    }
    let cs = cfg.cell_size;
    let (gw, gh) = (width / cs, height / cs);
    let mut values = vec![[0.0; ORIENTATIONS]; gw * gh];
    let mut valid = vec![false; gw * gh];
    let area = (cs * cs) as f64;
    for cy in 0..gh {
        for cx in 0..gw {
            let pixels = || (cy * cs..(cy + 1) * cs).flat_map(move |y| (cx * cs..(cx + 1) * cs).map(move |x| y * width + x));
            let fg = pixels().filter(|&i| mask.data[i]).count() as f64;
            if fg < cfg.min_coverage * area {
                continue;
            }
            let idx = cy * gw + cx;
            valid[idx] = true;
            for (k, f) in filtered.iter().enumerate() {
                let mean = pixels().map(|i| f[i]).sum::<f64>() / area;
                let var = pixels().map(|i| (f[i] - mean).powi(2)).sum::<f64>() / area;
                values[idx][k] = match cfg.statistic {
                    Statistic::Std => var.sqrt(),
                    Statistic::Variance => var,
                };
            }
        }
    }
    Ok(FingerCode { grid_w: gw, grid_h: gh, cell_size: cs, values, valid })
}

/// Foreground mask (linear-symmetry segmentation), Gabor bank and code.
/// A print with no foreground yields an all-invalid code.
pub fn ridge_features(image: &GrayImage, sym: &SymmetryConfig, cfg: &RidgeConfig) -> Result<FingerCode> {
    image.check_pipeline_size()?;
    let (w, h) = (image.width(), image.height());
    let ls = linear_symmetry(&orientation_tensor(image, &sym.filter)?, &sym.filter);
    let mask = match segment(&ls, sym.segment_threshold) {
        Ok(m) => m,
        Err(Error::NoFingerprintArea) => BinaryImage::new(w, h),
        Err(e) => return Err(e),
    };
    let filtered = gabor_bank(image, &cfg.bank)?;
    extract_fingercode(&filtered, w, h, &mask, cfg)
}

/// Cell offset `(dx, dy)`: cell `c` of A faces cell `c + (dx, dy)` of B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlignmentOffset {
    pub dx: isize,
    pub dy: isize,
}

/// Sums over the overlap at one offset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OverlapSums {
    pub product: f64,
    pub energy_a: f64,
    pub energy_b: f64,
    pub count: f64,
}

impl OverlapSums {
    /// Products normalized by the energies of both codes over the overlap;
    /// 1 exactly when the overlapping cells are proportional.
    pub fn score(&self) -> f64 {
        if self.energy_a > 0.0 && self.energy_b > 0.0 {
            self.product / (self.energy_a * self.energy_b).sqrt()
        } else {
            0.0
        }
    }
}

fn check_compatible(fa: &FingerCode, fb: &FingerCode) -> Result<()> {
    if fa.cell_size != fb.cell_size {
        return Err(Error::DimensionMismatch(format!("cell sizes {} and {} differ", fa.cell_size, fb.cell_size)));
    }
    Ok(())
}

fn offsets(fa: &FingerCode, fb: &FingerCode) -> impl Iterator<Item = AlignmentOffset> {
    let (xr, yr) = (fa.grid_w.max(fb.grid_w) as isize, fa.grid_h.max(fb.grid_h) as isize);
    (1 - yr..yr).flat_map(move |dy| (1 - xr..xr).map(move |dx| AlignmentOffset { dx, dy }))
}

/// Overlap sums at every offset by direct summation.
pub fn overlap_sums_direct(fa: &FingerCode, fb: &FingerCode) -> Vec<(AlignmentOffset, OverlapSums)> {
    offsets(fa, fb)
        .map(|o| {
            let mut s = OverlapSums::default();
            for cy in 0..fa.grid_h as isize {
                for cx in 0..fa.grid_w as isize {
                    let (Some(a), Some(b)) = (fa.at(cx, cy), fb.at(cx + o.dx, cy + o.dy)) else {
                        continue;
                    };
                    s.count += 1.0;
                    for k in 0..ORIENTATIONS {
                        s.product += a[k] * b[k];
                        s.energy_a += a[k] * a[k];
                        s.energy_b += b[k] * b[k];
                    }
                }
            }
            (o, s)
        })
        .collect()
}

struct Fft2 {
    w: usize,
    h: usize,
    row: std::sync::Arc<dyn Fft<f64>>,
    col: std::sync::Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(w: usize, h: usize, planner: &mut FftPlanner<f64>, inverse: bool) -> Self {
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
        } else {
            (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
        };
        Self { w, h, row, col }
    }

    fn run(&self, data: &mut [Complex64]) {
        for r in data.chunks_mut(self.w) {
            self.row.process(r);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                column[y] = data[y * self.w + x];
            }
            self.col.process(&mut column);
            for y in 0..self.h {
                data[y * self.w + x] = column[y];
            }
        }
    }
}

/// Same sums as [`overlap_sums_direct`], through zero-padded FFT
/// cross-correlations.
pub fn overlap_sums_fft(fa: &FingerCode, fb: &FingerCode) -> Vec<(AlignmentOffset, OverlapSums)> {
    // every tested offset must land on its own bin
    let pw = 2 * fa.grid_w.max(fb.grid_w);
    let ph = 2 * fa.grid_h.max(fb.grid_h);
    let mut planner = FftPlanner::new();
    let fwd = Fft2::new(pw, ph, &mut planner, false);
    let inv = Fft2::new(pw, ph, &mut planner, true);
    let spectrum = |f: &FingerCode, value: &dyn Fn(&[f64; ORIENTATIONS]) -> f64| {
        let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
        for cy in 0..f.grid_h {
            for cx in 0..f.grid_w {
                let i = cy * f.grid_w + cx;
                if f.valid[i] {
                    buf[cy * pw + cx] = Complex64::new(value(&f.values[i]), 0.0);
                }
            }
        }
        fwd.run(&mut buf);
        buf
    };
    // corr(a, b)(d) = sum_c a[c] b[c + d] = IFFT(conj(A) B)
    let correlate = |terms: &[(Vec<Complex64>, Vec<Complex64>)]| {
        let mut acc = vec![Complex64::new(0.0, 0.0); pw * ph];
        for (sa, sb) in terms {
            for ((o, a), b) in acc.iter_mut().zip(sa).zip(sb) {
                *o += a.conj() * b;
            }
        }
        inv.run(&mut acc);
        let norm = (pw * ph) as f64;
        acc.into_iter().map(|z| z.re / norm).collect::<Vec<f64>>()
    };
    let product = correlate(
        &(0..ORIENTATIONS)
            .map(|k| (spectrum(fa, &|v| v[k]), spectrum(fb, &|v| v[k])))
            .collect::<Vec<_>>(),
    );
    let sq = |v: &[f64; ORIENTATIONS]| v.iter().map(|x| x * x).sum::<f64>();
    let one = |_: &[f64; ORIENTATIONS]| 1.0;
    let (ma, mb) = (spectrum(fa, &one), spectrum(fb, &one));
    let energy_a = correlate(&[(spectrum(fa, &sq), mb.clone())]);
    let energy_b = correlate(&[(ma.clone(), spectrum(fb, &sq))]);
    let count = correlate(&[(ma, mb)]);
    offsets(fa, fb)
        .map(|o| {
            let i = o.dy.rem_euclid(ph as isize) as usize * pw + o.dx.rem_euclid(pw as isize) as usize;
            let s = OverlapSums {
                product: product[i],
                energy_a: energy_a[i],
                energy_b: energy_b[i],
                count: count[i].round(),
            };
            (o, s)
        })
        .collect()
}

fn best_offset(sums: &[(AlignmentOffset, OverlapSums)], fa: &FingerCode, fb: &FingerCode, cfg: &RidgeConfig) -> Result<AlignmentOffset> {
    let floor = cfg.min_overlap * fa.valid_count().min(fb.valid_count()) as f64;
    let admissible: Vec<(AlignmentOffset, f64)> = sums
        .iter()
        .filter(|(_, s)| s.count >= 1.0 && s.count >= floor)
        .map(|(o, s)| (*o, s.score()))
        .collect();
    let top = admissible.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    admissible
        .into_iter()
        .filter(|x| x.1 >= top - 1e-9)
        .map(|x| x.0)
        .min_by_key(|o| (o.dx.abs() + o.dy.abs(), o.dy, o.dx))
        .ok_or(Error::NoAdmissibleOffset)
}

/// Offset with the largest overlap-normalized correlation; near ties go to
/// the smallest shift.
pub fn align_fingercodes(fa: &FingerCode, fb: &FingerCode, cfg: &RidgeConfig) -> Result<AlignmentOffset> {
    check_compatible(fa, fb)?;
    best_offset(&overlap_sums_fft(fa, fb), fa, fb, cfg)
}

/// Reference implementation of [`align_fingercodes`] by direct summation.
pub fn align_fingercodes_direct(fa: &FingerCode, fb: &FingerCode, cfg: &RidgeConfig) -> Result<AlignmentOffset> {
    check_compatible(fa, fb)?;
    best_offset(&overlap_sums_direct(fa, fb), fa, fb, cfg)
}

/// Euclidean distance over cells valid in both codes at the given offset,
/// divided by the number of such cells. `None` without common cells.
pub fn fingercode_distance(fa: &FingerCode, fb: &FingerCode, o: AlignmentOffset) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for cy in 0..fa.grid_h as isize {
        for cx in 0..fa.grid_w as isize {
            if let (Some(a), Some(b)) = (fa.at(cx, cy), fb.at(cx + o.dx, cy + o.dy)) {
                sum += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum.sqrt() / n as f64)
}

/// Align, then compare B's code on the shifted tessellation. Whole-cell
/// offsets make the shifted grid coincide with B's own cells, so the
/// shift is an index offset. Failure gives [`MAX_DISTANCE`].
pub fn match_fingercodes(fa: &FingerCode, fb: &FingerCode, cfg: &RidgeConfig) -> f64 {
    align_fingercodes(fa, fb, cfg)
        .ok()
        .and_then(|o| fingercode_distance(fa, fb, o))
        .unwrap_or(MAX_DISTANCE)
}

pub fn match_ridge(a: &GrayImage, b: &GrayImage, sym: &SymmetryConfig, cfg: &RidgeConfig) -> Result<f64> {
    let fa = ridge_features(a, sym, cfg)?;
    let fb = ridge_features(b, sym, cfg)?;
    Ok(match_fingercodes(&fa, &fb, cfg))
}
