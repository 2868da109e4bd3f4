use std::f64::consts::PI;

use super::{ExtractionConfig, Minutia, MinutiaKind, MinutiaTemplate, TemplateSource};
use crate::error::{Error, Result};
use crate::geometry::normalize_deg;
use crate::symmetry::{BinaryImage, ComplexField};

/// Local maxima of `|PSi|` inside the mask that are surrounded by a ring of
/// strong linear symmetry, ordered by descending magnitude.
pub fn detect_minutiae_symmetry(
    psi: &ComplexField,
    ls: &ComplexField,
    mask: &BinaryImage,
    cfg: &ExtractionConfig,
) -> Result<MinutiaTemplate> {
    cfg.validate()?;
    let (w, h) = (psi.width, psi.height);
    if !psi.same_dims(ls) || mask.width != w || mask.height != h {
        return Err(Error::DimensionMismatch(
            "symmetry fields and mask must share dimensions".into(),
        ));
    }
    if mask.is_empty() {
        return Err(Error::NoFingerprintArea);
    }
    let mag = psi.magnitudes();
    let half = (cfg.nms_window / 2) as isize;

    let mut peaks: Vec<(f64, usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if !mask.get(x, y) || m <= 0.0 || m < cfg.min_peak {
                continue;
            }
            if is_window_max(&mag, w, h, x, y, half) && has_full_surround(ls, x, y, cfg) {
                peaks.push((m, x, y));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));

    let min_gap = cfg.nms_window as f64 / 2.0;
    let mut t = MinutiaTemplate::new(w, h, TemplateSource::Symmetry);
    for (m, x, y) in peaks {
        if t.len() >= cfg.max_minutiae {
            break;
        }
        let (sx, sy) = refine(&mag, w, h, x, y);
        let cand = Minutia::new(
            sx,
            sy,
            normalize_deg(psi.get(x, y).arg().to_degrees()),
            MinutiaKind::Unknown,
            m.min(1.0),
        );
        if t.minutiae.iter().all(|k| k.distance(&cand) >= min_gap) {
            t.minutiae.push(cand);
        }
    }
    Ok(t)
}

/// Ties go to the earlier pixel in raster order, so plateaus yield one peak.
fn is_window_max(mag: &[f64], w: usize, h: usize, x: usize, y: usize, half: isize) -> bool {
    let i = y * w + x;
    let m = mag[i];
    for v in (y as isize - half).max(0)..=(y as isize + half).min(h as isize - 1) {
        for u in (x as isize - half).max(0)..=(x as isize + half).min(w as isize - 1) {
            let j = v as usize * w + u as usize;
            if mag[j] > m || (mag[j] == m && j < i) {
                return false;
            }
        }
    }
    true
}

fn has_full_surround(ls: &ComplexField, x: usize, y: usize, cfg: &ExtractionConfig) -> bool {
    let r = cfg.surround_radius;
    if r == 0.0 {
        return true;
    }
    let n = ((2.0 * PI * r).ceil() as usize).max(16);
    (0..n).all(|k| {
        let a = 2.0 * PI * k as f64 / n as f64;
        ls.sample(x as f64 + r * a.cos(), y as f64 + r * a.sin())
            .is_some_and(|v| v.norm() >= cfg.surround_ls_min)
    })
}

/// Quadratic fit through the 3-sample profile along each axis.
fn refine(mag: &[f64], w: usize, h: usize, x: usize, y: usize) -> (f64, f64) {
    let c = mag[y * w + x];
    let offset = |l: f64, r: f64| {
        let den = l - 2.0 * c + r;
        if den < 0.0 {
            (0.5 * (l - r) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dx = if x > 0 && x + 1 < w {
        offset(mag[y * w + x - 1], mag[y * w + x + 1])
    } else {
        0.0
    };
    let dy = if y > 0 && y + 1 < h {
        offset(mag[(y - 1) * w + x], mag[(y + 1) * w + x])
    } else {
        0.0
    };
    (x as f64 + dx, y as f64 + dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::{synthesize_fingerprint, Dislocation, GrayImage, SyntheticSpec};
    use crate::symmetry::{compute_fields, SymmetryConfig};

    fn detect(spec: &SyntheticSpec) -> MinutiaTemplate {
        let img = synthesize_fingerprint(spec).unwrap().0;
        let f = compute_fields(&img, &SymmetryConfig::default()).unwrap();
        detect_minutiae_symmetry(&f.psi, &f.ls, &f.mask, &ExtractionConfig::default()).unwrap()
    }

    fn spec(dislocations: Vec<Dislocation>) -> SyntheticSpec {
        SyntheticSpec {
            width: 128,
            height: 128,
            base_orientation: 30.0,
            dislocations,
            noise_std: 5.0,
            rng_seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn single_dislocation_gives_one_minutia() {
        let s = spec(vec![Dislocation { x: 64.0, y: 60.0, sign: 1 }]);
        let t = detect(&s);
        assert_eq!(t.len(), 1, "{:?}", t.minutiae);
        let m = t.minutiae[0];
        assert!((m.x - 64.0).hypot(m.y - 60.0) <= 2.0, "{m:?}");
        assert!(crate::geometry::angle_diff_deg(m.direction, s.truth_direction(0)) <= 10.0);
        assert_eq!(m.kind, MinutiaKind::Unknown);
    }

    #[test]
    fn close_dislocations_are_suppressed_to_one() {
        let t = detect(&spec(vec![
            Dislocation { x: 62.0, y: 64.0, sign: 1 },
            Dislocation { x: 66.0, y: 64.0, sign: 1 },
        ]));
        assert_eq!(t.len(), 1, "{:?}", t.minutiae);
    }

    #[test]
    fn constant_image_gives_empty_template() {
        let img = GrayImage::filled(64, 64, 90);
        let z = crate::symmetry::orientation_tensor(&img, &Default::default()).unwrap();
        let ls = crate::symmetry::linear_symmetry(&z, &Default::default());
        let ps = crate::symmetry::parabolic_symmetry(&z, &Default::default()).unwrap();
        let psi = crate::symmetry::inhibit(&ps, &ls).unwrap();
        let mask = BinaryImage::full(64, 64);
        let t = detect_minutiae_symmetry(&psi, &ls, &mask, &ExtractionConfig::default()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn empty_mask_is_an_error() {
        let f = ComplexField::zeros(32, 32);
        let err = detect_minutiae_symmetry(&f, &f, &BinaryImage::new(32, 32), &Default::default());
        assert!(matches!(err, Err(Error::NoFingerprintArea)));
    }

    #[test]
    fn peaks_respect_spacing_order_and_cap() {
        let s = spec(vec![
            Dislocation { x: 30.0, y: 30.0, sign: 1 },
            Dislocation { x: 90.0, y: 35.0, sign: -1 },
            Dislocation { x: 40.0, y: 95.0, sign: -1 },
            Dislocation { x: 95.0, y: 90.0, sign: 1 },
        ]);
        let t = detect(&s);
        assert_eq!(t.len(), 4);
        for (i, a) in t.minutiae.iter().enumerate() {
            for b in &t.minutiae[i + 1..] {
                assert!(a.distance(b) >= 4.5);
                assert!(a.quality >= b.quality);
            }
        }
        let img = synthesize_fingerprint(&s).unwrap().0;
        let f = compute_fields(&img, &SymmetryConfig::default()).unwrap();
        let cfg = ExtractionConfig { max_minutiae: 2, ..Default::default() };
        let capped = detect_minutiae_symmetry(&f.psi, &f.ls, &f.mask, &cfg).unwrap();
        assert_eq!(capped.minutiae, t.minutiae[..2]);
    }

    #[test]
    fn quadratic_refinement_finds_true_vertex() {
        // samples of -(x-0.3)^2 at -1, 0, 1
        let f = |x: f64| 10.0 - (x - 0.3).powi(2);
        let mag = vec![f(-1.0), f(0.0), f(1.0)];
        let (x, _) = refine(&mag, 3, 1, 1, 0);
        assert!((x - 1.3).abs() < 1e-12);
    }
}
