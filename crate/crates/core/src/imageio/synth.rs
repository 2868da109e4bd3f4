//! Phase-dislocation ridge model.
//!
//! A planar cosine wave carries ridges; each dislocation adds a
//! `sign * atan2(y - y_k, x - x_k)` term to the phase, which inserts one
//! ridge period on one side of `(x_k, y_k)` and so produces a single ridge
//! ending or bifurcation at that point.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::GrayImage;
use crate::error::{Error, Result};
use crate::geometry::normalize_deg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dislocation {
    pub x: f64,
    pub y: f64,
    /// +1 or -1.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Cycles per pixel, in (0, 0.25].
    pub ridge_frequency: f64,
    /// Wave-normal angle in degrees.
    pub base_orientation: f64,
    pub dislocations: Vec<Dislocation>,
    pub noise_std: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            ridge_frequency: 0.1,
            base_orientation: 0.0,
            dislocations: Vec::new(),
            noise_std: 0.0,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("zero image dimension".into()));
        }
        if !(self.ridge_frequency > 0.0 && self.ridge_frequency <= 0.25) {
            return Err(Error::InvalidParameter(format!(
                "ridge frequency {} outside (0, 0.25]",
                self.ridge_frequency
            )));
        }
        if !(self.noise_std >= 0.0) || !self.base_orientation.is_finite() {
            return Err(Error::InvalidParameter(
                "noise_std must be >= 0 and orientation finite".into(),
            ));
        }
        for d in &self.dislocations {
            if d.sign != 1 && d.sign != -1 {
                return Err(Error::InvalidParameter(format!(
                    "dislocation sign {} is not +1 or -1",
                    d.sign
                )));
            }
            let inside = d.x >= 0.0
                && d.y >= 0.0
                && d.x <= (self.width - 1) as f64
                && d.y <= (self.height - 1) as f64;
            if !inside {
                return Err(Error::InvalidParameter(format!(
                    "dislocation ({}, {}) outside the image",
                    d.x, d.y
                )));
            }
        }
        Ok(())
    }

    /// Ridge phase at `(x, y)`.
    pub fn phase(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.base_orientation.to_radians().sin_cos();
        let mut phi = 2.0 * PI * self.ridge_frequency * (x * c + y * s);
        for d in &self.dislocations {
            phi += d.sign as f64 * (y - d.y).atan2(x - d.x);
        }
        phi
    }

    /// Planted minutia direction for dislocation `k`: the ridge tangent at
    /// the dislocation, i.e. the phase gradient without the dislocation's
    /// own singular term rotated by `sign * 90` degrees.
    pub fn truth_direction(&self, k: usize) -> f64 {
        let d = self.dislocations[k];
        let w = 2.0 * PI * self.ridge_frequency;
        let (s, c) = self.base_orientation.to_radians().sin_cos();
        let (mut gx, mut gy) = (w * c, w * s);
        for (j, o) in self.dislocations.iter().enumerate() {
            if j == k {
                continue;
            }
            let (rx, ry) = (d.x - o.x, d.y - o.y);
            let r2 = rx * rx + ry * ry;
            if r2 > 1e-12 {
                gx += o.sign as f64 * -ry / r2;
                gy += o.sign as f64 * rx / r2;
            }
        }
        normalize_deg(gy.atan2(gx).to_degrees() + 90.0 * d.sign as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthMinutia {
    pub x: f64,
    pub y: f64,
    pub direction: f64,
}

/// Planted minutiae, one per dislocation, in spec order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub minutiae: Vec<TruthMinutia>,
}

/// Renders `I = 127.5 (1 + cos phi) + noise`, quantized to 8 bits.
pub fn synthesize_fingerprint(spec: &SyntheticSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let noise = if spec.noise_std > 0.0 {
        Some(Normal::new(0.0, spec.noise_std).expect("finite std"))
    } else {
        None
    };
    let mut values = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let mut v = 127.5 * (1.0 + spec.phase(x as f64, y as f64).cos());
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            values.push(v);
        }
    }
    let image = GrayImage::from_f64(spec.width, spec.height, &values)?;
    let minutiae = (0..spec.dislocations.len())
        .map(|k| TruthMinutia {
            x: spec.dislocations[k].x,
            y: spec.dislocations[k].y,
            direction: spec.truth_direction(k),
        })
        .collect();
    Ok((image, GroundTruth { minutiae }))
}

/// Ground truth as text: one `x y direction` line per minutia.
pub fn write_ground_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for m in &truth.minutiae {
        writeln!(out, "{:.2} {:.2} {:.2}", m.x, m.y, m.direction).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a key=value spec file. Entries start with a `[name]` line; a file
/// without section headers holds a single entry named `synth`.
///
/// Keys: `width`, `height`, `freq`, `theta0`, `noise_std`, `seed` and a
/// repeatable `dislocation = x,y,sign`.
pub fn parse_spec_file(text: &str) -> Result<Vec<(String, SyntheticSpec)>> {
    struct Pending {
        name: String,
        line: usize,
        spec: SyntheticSpec,
        seen_size: (bool, bool),
    }
    fn finish(p: Pending) -> Result<(String, SyntheticSpec)> {
        if !(p.seen_size.0 && p.seen_size.1) {
            return Err(Error::parse(
                p.line,
                format!("entry '{}' needs width and height", p.name),
            ));
        }
        p.spec
            .validate()
            .map_err(|e| Error::parse(p.line, format!("entry '{}': {e}", p.name)))?;
        Ok((p.name, p.spec))
    }

    let mut entries = Vec::new();
    let mut current: Option<Pending> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(Error::parse(line_no, "empty section name"));
            }
            if let Some(p) = current.take() {
                entries.push(finish(p)?);
            }
            current = Some(Pending {
                name: name.to_string(),
                line: line_no,
                spec: SyntheticSpec::default(),
                seen_size: (false, false),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected key = value, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let p = current.get_or_insert_with(|| Pending {
            name: "synth".into(),
            line: line_no,
            spec: SyntheticSpec::default(),
            seen_size: (false, false),
        });
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("bad number '{v}' for {key}")))
        };
        let uint = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| Error::parse(line_no, format!("bad integer '{v}' for {key}")))
        };
        match key {
            "width" => {
                p.spec.width = uint(value)? as usize;
                p.seen_size.0 = true;
            }
            "height" => {
                p.spec.height = uint(value)? as usize;
                p.seen_size.1 = true;
            }
            "freq" => p.spec.ridge_frequency = num(value)?,
            "theta0" => p.spec.base_orientation = num(value)?,
            "noise_std" => p.spec.noise_std = num(value)?,
            "seed" => p.spec.rng_seed = uint(value)?,
            "dislocation" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::parse(line_no, "dislocation needs x,y,sign"));
                }
                let sign = match parts[2] {
                    "1" | "+1" => 1,
                    "-1" => -1,
                    other => {
                        return Err(Error::parse(
                            line_no,
                            format!("dislocation sign '{other}' is not +1 or -1"),
                        ))
                    }
                };
                p.spec.dislocations.push(Dislocation {
                    x: num(parts[0])?,
                    y: num(parts[1])?,
                    sign,
                });
            }
            other => return Err(Error::parse(line_no, format!("unknown key '{other}'"))),
        }
    }
    if let Some(p) = current.take() {
        entries.push(finish(p)?);
    }
    Ok(entries)
}
