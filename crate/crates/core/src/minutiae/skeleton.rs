use std::collections::HashSet;

use super::{ExtractionConfig, Minutia, MinutiaKind, MinutiaTemplate, TemplateSource};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, bearing_deg, normalize_deg};
use crate::imageio::GrayImage;
use crate::symmetry::{BinaryImage, ComplexField};

/// 8-neighbourhood in circular order N, NE, E, SE, S, SW, W, NW.
pub(crate) const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring_bits(b: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let mut r = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        r[k] = b.get_signed(x as isize + dx, y as isize + dy);
    }
    r
}

/// Ridge pixels are darker than the mean of the surrounding
/// `binarization_block` square; everything outside the mask is background.
pub fn binarize(image: &GrayImage, mask: &BinaryImage, cfg: &ExtractionConfig) -> Result<BinaryImage> {
    cfg.validate()?;
    let (w, h) = (image.width(), image.height());
    if mask.width != w || mask.height != h {
        return Err(Error::DimensionMismatch("mask and image differ in size".into()));
    }
    let stride = w + 1;
    let mut integral = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += image.get(x, y) as u64;
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let r = cfg.binarization_block / 2;
    Ok(BinaryImage::from_fn(w, h, |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        let sum = integral[y1 * stride + x1] + integral[y0 * stride + x0]
            - integral[y0 * stride + x1]
            - integral[y1 * stride + x0];
        let count = ((x1 - x0) * (y1 - y0)) as u64;
        (image.get(x, y) as u64) * count < sum
    }))
}

/// Two-subiteration parallel thinning (Guo-Hall conditions) followed by
/// removal of staircase corners, repeated until neither changes anything.
pub fn thin(binary: &BinaryImage) -> BinaryImage {
    let mut s = binary.clone();
    loop {
        loop {
            let a = thinning_pass(&mut s, false);
            let b = thinning_pass(&mut s, true);
            if !a && !b {
                break;
            }
        }
        if !remove_staircases(&mut s) {
            return s;
        }
    }
}

fn thinning_pass(s: &mut BinaryImage, second: bool) -> bool {
    let mut marked = Vec::new();
    for y in 0..s.height {
        for x in 0..s.width {
            if !s.get(x, y) {
                continue;
            }
            // p[0..8] = N, NE, E, SE, S, SW, W, NW
            let p = ring_bits(s, x, y);
            let c = (0..4)
                .filter(|&k| !p[2 * k] && (p[2 * k + 1] || p[(2 * k + 2) % 8]))
                .count();
            let n1 = (0..4)
                .filter(|&k| p[(2 * k + 7) % 8] || p[2 * k])
                .count();
            let n2 = (0..4).filter(|&k| p[2 * k] || p[2 * k + 1]).count();
            let n = n1.min(n2);
            let m = if second {
                (p[0] || p[1] || !p[3]) && p[2]
            } else {
                (p[4] || p[5] || !p[7]) && p[6]
            };
            if c == 1 && (2..=3).contains(&n) && !m {
                marked.push((x, y));
            }
        }
    }
    for &(x, y) in &marked {
        s.set(x, y, false);
    }
    !marked.is_empty()
}

/// Number of 8-connected groups formed by the set ring pixels.
fn ring_components(r: &[bool; 8]) -> usize {
    let mut parent: [usize; 8] = std::array::from_fn(|i| i);
    fn find(p: &mut [usize; 8], mut i: usize) -> usize {
        while p[i] != i {
            i = p[i];
        }
        i
    }
    for i in 0..8 {
        for j in i + 1..8 {
            if r[i] && r[j] {
                let (a, b) = (RING[i], RING[j]);
                if (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 {
                    let (pi, pj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[pi] = pj;
                }
            }
        }
    }
    (0..8).filter(|&i| r[i] && find(&mut parent, i) == i).count()
}

fn remove_staircases(s: &mut BinaryImage) -> bool {
    let mut changed = false;
    for y in 0..s.height {
        for x in 0..s.width {
            if !s.get(x, y) {
                continue;
            }
            let r = ring_bits(s, x, y);
            let (n, e, so, w) = (r[0], r[2], r[4], r[6]);
            let corner = (n && e) || (e && so) || (so && w) || (w && n);
            let boundary = !(n && e && so && w);
            let count = r.iter().filter(|&&b| b).count();
            if corner && boundary && count >= 2 && ring_components(&r) == 1 {
                s.set(x, y, false);
                changed = true;
            }
        }
    }
    changed
}

/// Half the number of value changes around the 8-neighbourhood.
pub fn crossing_number(skeleton: &BinaryImage, x: usize, y: usize) -> usize {
    let r = ring_bits(skeleton, x, y);
    (0..8).filter(|&k| r[k] != r[(k + 1) % 8]).count() / 2
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Trace {
    pub end: (usize, usize),
    pub steps: usize,
    /// Junction cluster reached, if any.
    pub junction: Option<usize>,
}

/// Skeleton with its junction pixels (crossing number ≥ 3) grouped into
/// 8-connected clusters.
pub(crate) struct Topology<'a> {
    pub skel: &'a BinaryImage,
    pub label: Vec<usize>,
    pub clusters: Vec<Vec<(usize, usize)>>,
}

impl<'a> Topology<'a> {
    pub fn new(skel: &'a BinaryImage) -> Self {
        let (w, h) = (skel.width, skel.height);
        let junction = BinaryImage::from_fn(w, h, |x, y| skel.get(x, y) && crossing_number(skel, x, y) >= 3);
        let (label, sizes) = junction.components(true);
        let mut clusters = vec![Vec::new(); sizes.len()];
        for y in 0..h {
            for x in 0..w {
                let l = label[y * w + x];
                if l != usize::MAX {
                    clusters[l].push((x, y));
                }
            }
        }
        Self {
            skel,
            label,
            clusters,
        }
    }

    pub fn label_at(&self, x: usize, y: usize) -> Option<usize> {
        let l = self.label[y * self.skel.width + x];
        (l != usize::MAX).then_some(l)
    }

    /// Cluster whose pixels lie within 1.5 px of `(x, y)`.
    pub fn cluster_near(&self, x: f64, y: f64) -> Option<usize> {
        let (cx, cy) = (x.round() as isize, y.round() as isize);
        let mut best: Option<(f64, usize)> = None;
        for v in cy - 2..=cy + 2 {
            for u in cx - 2..=cx + 2 {
                if u < 0 || v < 0 || u as usize >= self.skel.width || v as usize >= self.skel.height {
                    continue;
                }
                if let Some(l) = self.label_at(u as usize, v as usize) {
                    let d = (u as f64 - x).hypot(v as f64 - y);
                    if d <= 1.5 && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, l));
                    }
                }
            }
        }
        best.map(|(_, l)| l)
    }

    /// Follows the skeleton from `start`, never entering `blocked`, for at
    /// most `max_steps` steps; stops on reaching a junction cluster other
    /// than `own`.
    pub fn trace(
        &self,
        start: (usize, usize),
        blocked: &[(usize, usize)],
        own: Option<usize>,
        max_steps: usize,
    ) -> Trace {
        let mut visited: HashSet<(usize, usize)> = blocked.iter().copied().collect();
        visited.insert(start);
        let mut cur = start;
        let mut steps = 0;
        while steps < max_steps {
            let mut next: Vec<(usize, usize, bool)> = Vec::new();
            for (k, (dx, dy)) in RING.iter().enumerate() {
                let (u, v) = (cur.0 as isize + dx, cur.1 as isize + dy);
                if !self.skel.get_signed(u, v) {
                    continue;
                }
                let p = (u as usize, v as usize);
                if !visited.contains(&p) {
                    next.push((p.0, p.1, k % 2 == 0));
                }
            }
            if next.is_empty() {
                break;
            }
            if let Some(&(x, y, _)) = next
                .iter()
                .find(|&&(x, y, _)| self.label_at(x, y).is_some_and(|l| Some(l) != own))
            {
                return Trace {
                    end: (x, y),
                    steps: steps + 1,
                    junction: self.label_at(x, y),
                };
            }
            next.sort_by_key(|&(_, _, four)| !four);
            for &(x, y, _) in &next {
                visited.insert((x, y));
            }
            cur = (next[0].0, next[0].1);
            steps += 1;
        }
        Trace {
            end: cur,
            steps,
            junction: None,
        }
    }

    pub fn centroid(&self, l: usize) -> (f64, f64) {
        let c = &self.clusters[l];
        let n = c.len() as f64;
        (
            c.iter().map(|p| p.0 as f64).sum::<f64>() / n,
            c.iter().map(|p| p.1 as f64).sum::<f64>() / n,
        )
    }

    /// One trace per branch leaving junction cluster `l`.
    pub fn branches(&self, l: usize, max_steps: usize) -> Vec<Trace> {
        let cluster = &self.clusters[l];
        let mut starts: Vec<(usize, usize)> = Vec::new();
        for &(x, y) in cluster {
            for (dx, dy) in RING {
                let (u, v) = (x as isize + dx, y as isize + dy);
                if !self.skel.get_signed(u, v) {
                    continue;
                }
                let p = (u as usize, v as usize);
                if self.label_at(p.0, p.1) != Some(l) && !starts.contains(&p) {
                    starts.push(p);
                }
            }
        }
        starts.sort_by_key(|&(x, y)| (y, x));
        // adjacent start pixels belong to the same branch
        let mut heads: Vec<(usize, usize)> = Vec::new();
        for &s in &starts {
            let touches = heads
                .iter()
                .any(|h| h.0.abs_diff(s.0) <= 1 && h.1.abs_diff(s.1) <= 1);
            if !touches {
                heads.push(s);
            }
        }
        heads
            .iter()
            .map(|&s| {
                if let Some(j) = self.label_at(s.0, s.1) {
                    return Trace {
                        end: s,
                        steps: 1,
                        junction: Some(j),
                    };
                }
                let mut blocked = cluster.clone();
                blocked.extend(starts.iter().copied().filter(|&p| p != s));
                let mut t = self.trace(s, &blocked, Some(l), max_steps.saturating_sub(1));
                t.steps += 1;
                t
            })
            .collect()
    }
}

/// Ridge tangent from the linear symmetry field, pointed along `sense`.
fn oriented(ls: &ComplexField, x: usize, y: usize, sense: f64) -> f64 {
    let v = ls.get(x, y);
    if v.norm() < 1e-9 {
        return normalize_deg(sense);
    }
    let tangent = v.arg().to_degrees() / 2.0 + 90.0;
    if angle_diff_deg(tangent, sense) > 90.0 {
        normalize_deg(tangent + 180.0)
    } else {
        normalize_deg(tangent)
    }
}

/// Crossing-number minutiae. Terminations point away from the ridge body;
/// bifurcations point toward the stem, the branch most opposed to the
/// other two.
pub fn detect_minutiae_skeleton(
    skeleton: &BinaryImage,
    ls: &ComplexField,
    cfg: &ExtractionConfig,
) -> Result<MinutiaTemplate> {
    cfg.validate()?;
    let (w, h) = (skeleton.width, skeleton.height);
    if ls.width != w || ls.height != h {
        return Err(Error::DimensionMismatch("skeleton and LS field differ in size".into()));
    }
    let topo = Topology::new(skeleton);
    let mut found: Vec<Minutia> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !skeleton.get(x, y) || crossing_number(skeleton, x, y) != 1 {
                continue;
            }
            let t = topo.trace((x, y), &[], None, cfg.trace_len);
            let sense = bearing_deg(t.end.0 as f64, t.end.1 as f64, x as f64, y as f64);
            found.push(Minutia::new(
                x as f64,
                y as f64,
                oriented(ls, x, y, sense),
                MinutiaKind::Termination,
                ls.get(x, y).norm().min(1.0),
            ));
        }
    }
    for l in 0..topo.clusters.len() {
        let (cx, cy) = topo.centroid(l);
        let vecs: Vec<(f64, f64)> = topo
            .branches(l, cfg.trace_len)
            .iter()
            .map(|t| {
                let (dx, dy) = (t.end.0 as f64 - cx, t.end.1 as f64 - cy);
                let n = dx.hypot(dy).max(1e-12);
                (dx / n, dy / n)
            })
            .collect();
        let stem = (0..vecs.len())
            .min_by(|&a, &b| {
                let s = |k: usize| -> f64 {
                    (0..vecs.len())
                        .filter(|&j| j != k)
                        .map(|j| vecs[k].0 * vecs[j].0 + vecs[k].1 * vecs[j].1)
                        .sum()
                };
                s(a).total_cmp(&s(b))
            })
            .map(|k| vecs[k]);
        let sense = stem.map_or(0.0, |(dx, dy)| dy.atan2(dx).to_degrees());
        let (px, py) = (cx.round() as usize, cy.round() as usize);
        found.push(Minutia::new(
            cx,
            cy,
            oriented(ls, px, py, sense),
            MinutiaKind::Bifurcation,
            ls.get(px, py).norm().min(1.0),
        ));
    }
    found.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    Ok(MinutiaTemplate {
        width: w,
        height: h,
        source: TemplateSource::Skeleton,
        minutiae: found,
    })
}

/// Moves every bifurcation onto the nearest valley-skeleton ending within
/// `radius`: a ridge fork is the tip of the valley that closes between its
/// branches, while the ridge medial-axis junction sits deeper in the stem.
pub fn relocate_bifurcations(t: &mut MinutiaTemplate, valley_skeleton: &BinaryImage, radius: f64) {
    let (w, h) = (valley_skeleton.width, valley_skeleton.height);
    let r = radius.ceil() as isize;
    for m in t.minutiae.iter_mut().filter(|m| m.kind == MinutiaKind::Bifurcation) {
        let (cx, cy) = (m.x.round() as isize, m.y.round() as isize);
        let mut best: Option<(f64, usize, usize)> = None;
        for v in (cy - r).max(0)..=(cy + r).min(h as isize - 1) {
            for u in (cx - r).max(0)..=(cx + r).min(w as isize - 1) {
                let (u, v) = (u as usize, v as usize);
                if !valley_skeleton.get(u, v) || crossing_number(valley_skeleton, u, v) != 1 {
                    continue;
                }
                let d = (u as f64 - m.x).hypot(v as f64 - m.y);
                if d <= radius && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, u, v));
                }
            }
        }
        if let Some((_, u, v)) = best {
            m.x = u as f64;
            m.y = v as f64;
        }
    }
}
