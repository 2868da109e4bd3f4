use std::collections::HashMap;

use super::skeleton::Topology;
use super::{ExtractionConfig, Minutia, MinutiaKind, MinutiaTemplate};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, bearing_deg};
use crate::imageio::GrayImage;
use crate::symmetry::{BinaryImage, QualityMap};

/// Facing terminations must point at each other within this angle.
const FACING_TOL_DEG: f64 = 60.0;

/// Drops, in order: minutiae in quality level 0/1 blocks; facing termination
/// pairs closer than `min_separation`; spurs (a termination reaching a
/// junction in fewer than `spur_max_len` steps, removed with that
/// junction's bifurcation); lakes (two bifurcations joined by two branches
/// of total length at most `lake_max_perimeter`); minutiae closer than
/// `surround_radius` to the mask edge.
pub fn remove_false_minutiae(
    candidates: &MinutiaTemplate,
    skeleton: &BinaryImage,
    qmap: &QualityMap,
    mask: &BinaryImage,
    cfg: &ExtractionConfig,
) -> Result<MinutiaTemplate> {
    cfg.validate()?;
    if skeleton.width != candidates.width
        || skeleton.height != candidates.height
        || mask.width != skeleton.width
        || mask.height != skeleton.height
    {
        return Err(Error::DimensionMismatch(
            "template, skeleton and mask must share dimensions".into(),
        ));
    }
    let mut ms: Vec<Minutia> = candidates
        .minutiae
        .iter()
        .copied()
        .filter(|m| qmap.level_at(m.x, m.y) > 1)
        .collect();

    ms = drop_flagged(ms, |ms| {
        let mut flag = vec![false; ms.len()];
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                let (a, b) = (&ms[i], &ms[j]);
                if a.kind != MinutiaKind::Termination || b.kind != MinutiaKind::Termination {
                    continue;
                }
                if a.distance(b) < cfg.min_separation && facing(a, b) {
                    flag[i] = true;
                    flag[j] = true;
                }
            }
        }
        flag
    });

    let topo = Topology::new(skeleton);
    let clusters_of = |ms: &[Minutia]| -> HashMap<usize, Vec<usize>> {
        let mut by: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, m) in ms.iter().enumerate() {
            if m.kind == MinutiaKind::Bifurcation {
                if let Some(l) = topo.cluster_near(m.x, m.y) {
                    by.entry(l).or_default().push(i);
                }
            }
        }
        by
    };

    ms = drop_flagged(ms, |ms| {
        let by = clusters_of(ms);
        let mut flag = vec![false; ms.len()];
        for (i, m) in ms.iter().enumerate() {
            let (x, y) = (m.x.round() as usize, m.y.round() as usize);
            if m.kind != MinutiaKind::Termination || x >= skeleton.width || y >= skeleton.height || !skeleton.get(x, y) {
                continue;
            }
            let t = topo.trace((x, y), &[], None, cfg.spur_max_len);
            if let (Some(l), true) = (t.junction, t.steps < cfg.spur_max_len) {
                flag[i] = true;
                for &k in by.get(&l).into_iter().flatten() {
                    flag[k] = true;
                }
            }
        }
        flag
    });

    ms = drop_flagged(ms, |ms| {
        let by = clusters_of(ms);
        let mut flag = vec![false; ms.len()];
        let mut keys: Vec<usize> = by.keys().copied().collect();
        keys.sort_unstable();
        for l in keys {
            let mut reached: HashMap<usize, Vec<usize>> = HashMap::new();
            for t in topo.branches(l, cfg.lake_max_perimeter) {
                if let Some(j) = t.junction {
                    reached.entry(j).or_default().push(t.steps);
                }
            }
            for (j, mut lens) in reached {
                if lens.len() < 2 {
                    continue;
                }
                lens.sort_unstable();
                if lens[0] + lens[1] <= cfg.lake_max_perimeter {
                    for &k in by[&l].iter().chain(by.get(&j).into_iter().flatten()) {
                        flag[k] = true;
                    }
                }
            }
        }
        flag
    });

    let limit = cfg.surround_radius.ceil() as usize;
    ms.retain(|m| {
        let (x, y) = (m.x.round() as usize, m.y.round() as usize);
        x < mask.width
            && y < mask.height
            && (mask.distance_to_edge(x, y, limit) as f64) >= cfg.surround_radius
            && !(m.kind == MinutiaKind::Termination && runs_off_mask(m, mask, 2.0 * cfg.surround_radius))
    });

    Ok(MinutiaTemplate {
        minutiae: ms,
        ..candidates.clone()
    })
}

/// A ridge cut by the foreground edge ends a little inside it, pointing out.
fn runs_off_mask(m: &Minutia, mask: &BinaryImage, reach: f64) -> bool {
    let (c, s) = (m.direction.to_radians().cos(), m.direction.to_radians().sin());
    (1..=reach.ceil() as usize).any(|k| {
        let (x, y) = ((m.x + c * k as f64).round(), (m.y + s * k as f64).round());
        !mask.get_signed(x as isize, y as isize)
    })
}

fn drop_flagged(ms: Vec<Minutia>, rule: impl Fn(&[Minutia]) -> Vec<bool>) -> Vec<Minutia> {
    let flag = rule(&ms);
    ms.into_iter()
        .zip(flag)
        .filter_map(|(m, f)| (!f).then_some(m))
        .collect()
}

/// Each termination points at the other, as at the two sides of a break.
fn facing(a: &Minutia, b: &Minutia) -> bool {
    if a.distance(b) < 1.0 {
        return true;
    }
    angle_diff_deg(a.direction, bearing_deg(a.x, a.y, b.x, b.y)) <= FACING_TOL_DEG
        && angle_diff_deg(b.direction, bearing_deg(b.x, b.y, a.x, a.y)) <= FACING_TOL_DEG
}

/// Half from the block quality level, half from the intensity spread of the
/// 11×11 neighbourhood (saturating at a standard deviation of 64).
pub fn assess_minutia_quality(m: &Minutia, image: &GrayImage, qmap: &QualityMap) -> f64 {
    let (w, h) = (image.width() as isize, image.height() as isize);
    let (cx, cy) = (m.x.round() as isize, m.y.round() as isize);
    let vals = (cy - 5..=cy + 5)
        .filter(|&y| y >= 0 && y < h)
        .flat_map(|y| {
            (cx - 5..=cx + 5)
                .filter(move |&x| x >= 0 && x < w)
                .map(move |x| image.get(x as usize, y as usize) as f64)
        });
    let (_, std) = crate::imageio::moments(vals);
    let level = qmap.level_at(m.x, m.y) as f64;
    (0.5 * level / 4.0 + 0.5 * (std / 64.0).min(1.0)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::{detect_minutiae_skeleton, TemplateSource};
    use crate::symmetry::ComplexField;

    fn line_with_spur(spur: usize) -> BinaryImage {
        let mut b = BinaryImage::new(140, 80);
        for x in 30..110 {
            b.set(x, 50, true);
        }
        for k in 1..=spur {
            b.set(70, 50 - k, true);
        }
        b
    }

    fn candidates(s: &BinaryImage) -> MinutiaTemplate {
        detect_minutiae_skeleton(s, &ComplexField::zeros(s.width, s.height), &Default::default()).unwrap()
    }

    fn good(w: usize, h: usize) -> (QualityMap, BinaryImage) {
        (QualityMap::uniform(w, h, 16, 4), BinaryImage::full(w, h))
    }

    #[test]
    fn short_spur_is_removed_with_its_bifurcation() {
        let s = line_with_spur(4);
        let c = candidates(&s);
        assert_eq!(c.len(), 4);
        let (q, mask) = good(140, 80);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.minutiae.iter().all(|m| m.y == 50.0 && (m.x == 30.0 || m.x == 109.0)));
    }

    #[test]
    fn long_branch_is_kept() {
        let s = line_with_spur(15);
        let c = candidates(&s);
        let (q, mask) = good(140, 80);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn low_quality_blocks_empty_the_template() {
        let s = line_with_spur(15);
        let c = candidates(&s);
        for level in [0, 1] {
            let q = QualityMap::uniform(140, 80, 16, level);
            let out = remove_false_minutiae(&c, &s, &q, &BinaryImage::full(140, 80), &Default::default()).unwrap();
            assert!(out.is_empty());
        }
    }

    #[test]
    fn ridge_break_is_removed() {
        let mut s = BinaryImage::new(140, 40);
        for x in (30..68).chain(73..110) {
            s.set(x, 20, true);
        }
        let c = candidates(&s);
        assert_eq!(c.len(), 4);
        let (q, mask) = good(140, 40);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.minutiae.iter().all(|m| m.x == 30.0 || m.x == 109.0));
    }

    #[test]
    fn small_lake_is_removed() {
        let mut s = BinaryImage::new(140, 40);
        for x in (30..60).chain(67..110) {
            s.set(x, 20, true);
        }
        // a loop of two 3-pixel-high arcs between x = 60 and x = 66
        for x in 61..=65 {
            s.set(x, 18, true);
            s.set(x, 22, true);
        }
        for (x, y) in [(60, 19), (60, 21), (66, 19), (66, 21), (60, 20), (66, 20)] {
            s.set(x, y, true);
        }
        let s = crate::minutiae::thin(&s);
        let c = candidates(&s);
        let bif = c.minutiae.iter().filter(|m| m.kind == MinutiaKind::Bifurcation).count();
        assert_eq!(bif, 2, "{:?}", c.minutiae);
        let (q, mask) = good(140, 40);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 2, "{:?}", out.minutiae);
        assert!(out.minutiae.iter().all(|m| m.kind == MinutiaKind::Termination));
    }

    #[test]
    fn border_minutiae_are_removed() {
        let mut s = BinaryImage::new(60, 40);
        for x in 3..40 {
            s.set(x, 20, true);
        }
        let c = candidates(&s);
        let (q, mask) = good(60, 40);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.minutiae[0].x, 39.0);
    }

    #[test]
    fn termination_heading_off_the_mask_is_removed() {
        let mut s = BinaryImage::new(80, 40);
        for x in 20..68 {
            s.set(x, 20, true);
        }
        let c = candidates(&s);
        let (q, mask) = good(80, 40);
        let out = remove_false_minutiae(&c, &s, &q, &mask, &Default::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.minutiae[0].x, 20.0);
    }

    #[test]
    fn removal_is_idempotent_and_never_adds() {
        let s = line_with_spur(4);
        let mut c = candidates(&s);
        c.minutiae.push(Minutia::new(90.0, 50.0, 0.0, MinutiaKind::Termination, 0.5));
        c.minutiae.push(Minutia::new(94.0, 50.0, 180.0, MinutiaKind::Termination, 0.5));
        let (q, mask) = good(140, 80);
        let cfg = ExtractionConfig::default();
        let once = remove_false_minutiae(&c, &s, &q, &mask, &cfg).unwrap();
        let twice = remove_false_minutiae(&once, &s, &q, &mask, &cfg).unwrap();
        assert!(once.len() <= c.len());
        assert_eq!(once, twice);
        assert_eq!(once.source, TemplateSource::Skeleton);
    }

    #[test]
    fn quality_formula() {
        let m = Minutia::new(20.0, 20.0, 0.0, MinutiaKind::Termination, 0.0);
        let checker = GrayImage::from_fn(40, 40, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        let flat = GrayImage::filled(40, 40, 100);
        // std of a 0/64 pattern over 11x11 (61 vs 60 pixels) is ~32
        let half = GrayImage::from_fn(40, 40, |x, y| if (x + y) % 2 == 0 { 0 } else { 64 });
        assert_eq!(assess_minutia_quality(&m, &checker, &QualityMap::uniform(40, 40, 16, 4)), 1.0);
        assert_eq!(assess_minutia_quality(&m, &flat, &QualityMap::uniform(40, 40, 16, 0)), 0.0);
        let q = assess_minutia_quality(&m, &half, &QualityMap::uniform(40, 40, 16, 2));
        assert!((q - 0.5).abs() < 1e-3, "{q}");
    }
}
