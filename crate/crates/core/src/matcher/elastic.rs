use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, RigidTransform};
use crate::minutiae::{Minutia, MinutiaTemplate};

/// How aligned minutiae are paired one-to-one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    /// Closest admissible pair first.
    #[default]
    Greedy,
    /// Maximum-cardinality bipartite matching.
    Optimal,
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Assignment::Greedy => "greedy",
            Assignment::Optimal => "optimal",
        })
    }
}

impl std::str::FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Assignment::Greedy),
            "optimal" => Ok(Assignment::Optimal),
            other => Err(Error::InvalidParameter(format!("unknown assignment {other:?}"))),
        }
    }
}

/// Half-widths of the tolerance box grow linearly with the distance `r`
/// from the alignment anchor: `w0 + k r` and `h0 + k r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticConfig {
    pub w0: f64,
    pub h0: f64,
    pub k: f64,
    pub angle_tol: f64,
    pub assignment: Assignment,
}

impl Default for ElasticConfig {
    fn default() -> Self {
        Self {
            w0: 8.0,
            h0: 8.0,
            k: 0.05,
            angle_tol: 30.0,
            assignment: Assignment::Greedy,
        }
    }
}

impl ElasticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w0 >= 0.0 && self.h0 >= 0.0 && self.k >= 0.0 && self.angle_tol >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid elastic matcher configuration".into()))
        }
    }

    /// Box half-widths at radial distance `r`.
    pub fn box_at(&self, r: f64) -> (f64, f64) {
        (self.w0 + self.k * r, self.h0 + self.k * r)
    }
}

/// Aligned problem: A minutiae, B minutiae carried into A's frame, and the
/// anchor the boxes grow from.
struct Frame<'a> {
    a: &'a [Minutia],
    b: Vec<(f64, f64, f64)>,
    center: (f64, f64),
}

impl<'a> Frame<'a> {
    fn new(a: &'a MinutiaTemplate, b: &MinutiaTemplate, t: &RigidTransform, center: (f64, f64)) -> Self {
        let inv = t.inverse();
        let b = b
            .minutiae
            .iter()
            .map(|m| {
                let (x, y) = inv.apply(m.x, m.y);
                (x, y, inv.apply_angle(m.direction))
            })
            .collect();
        Self { a: &a.minutiae, b, center }
    }

    /// Admissible `(distance, a, b)` pairs.
    fn edges(&self, cfg: &ElasticConfig) -> Vec<(f64, usize, usize)> {
        let mut out = Vec::new();
        for (ia, ma) in self.a.iter().enumerate() {
            let r = (ma.x - self.center.0).hypot(ma.y - self.center.1);
            let (w, h) = cfg.box_at(r);
            for (ib, &(x, y, d)) in self.b.iter().enumerate() {
                if (x - ma.x).abs() <= w && (y - ma.y).abs() <= h && angle_diff_deg(d, ma.direction) <= cfg.angle_tol {
                    out.push(((x - ma.x).hypot(y - ma.y), ia, ib));
                }
            }
        }
        out
    }
}

/// Anchor-pair search: each candidate turns A's anchor direction onto B's
/// and moves the anchor onto its partner. The winner covers the most B
/// minutiae (ties by mean residual); its transform is then refined by a
/// least-squares fit over the greedy correspondences. The result maps A
/// into B.
pub fn align_minutiae(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &ElasticConfig) -> Result<RigidTransform> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let mut best: Option<(usize, f64, RigidTransform, (f64, f64))> = None;
    for ma in &a.minutiae {
        for mb in &b.minutiae {
            let rot = mb.direction - ma.direction;
            let r = RigidTransform::new(0.0, 0.0, rot);
            let (rx, ry) = r.apply(ma.x, ma.y);
            let t = RigidTransform::new(mb.x - rx, mb.y - ry, rot);
            let frame = Frame::new(a, b, &t, (ma.x, ma.y));
            let mut nearest = vec![f64::INFINITY; b.len()];
            for (d, _, ib) in frame.edges(cfg) {
                nearest[ib] = nearest[ib].min(d);
            }
            let hit: Vec<f64> = nearest.into_iter().filter(|d| d.is_finite()).collect();
            let count = hit.len();
            let mean = if count == 0 { f64::INFINITY } else { hit.iter().sum::<f64>() / count as f64 };
            let better = match &best {
                None => true,
                Some((c, m, _, _)) => count > *c || (count == *c && mean < *m),
            };
            if better {
                best = Some((count, mean, t, (ma.x, ma.y)));
            }
        }
    }
    let (_, _, t, center) = best.expect("nonempty templates give a candidate");
    let pairs = assign(&Frame::new(a, b, &t, center), &ElasticConfig { assignment: Assignment::Greedy, ..cfg.clone() });
    if pairs.len() < 2 {
        return Ok(t);
    }
    let pts: Vec<_> = pairs
        .iter()
        .map(|&(ia, ib)| ((a.minutiae[ia].x, a.minutiae[ia].y), (b.minutiae[ib].x, b.minutiae[ib].y)))
        .collect();
    Ok(RigidTransform::fit(&pts).unwrap_or(t))
}

fn assign(frame: &Frame, cfg: &ElasticConfig) -> Vec<(usize, usize)> {
    let mut edges = frame.edges(cfg);
    match cfg.assignment {
        Assignment::Greedy => {
            edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            let mut used_a = vec![false; frame.a.len()];
            let mut used_b = vec![false; frame.b.len()];
            let mut out = Vec::new();
            for (_, ia, ib) in edges {
                if !used_a[ia] && !used_b[ib] {
                    used_a[ia] = true;
                    used_b[ib] = true;
                    out.push((ia, ib));
                }
            }
            out
        }
        Assignment::Optimal => max_matching(frame.a.len(), frame.b.len(), &edges),
    }
}

/// Augmenting-path maximum bipartite matching, trying nearer partners first.
fn max_matching(na: usize, nb: usize, edges: &[(f64, usize, usize)]) -> Vec<(usize, usize)> {
    let mut adj: Vec<Vec<(f64, usize)>> = vec![Vec::new(); na];
    for &(d, ia, ib) in edges {
        adj[ia].push((d, ib));
    }
    for l in &mut adj {
        l.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    }
    fn augment(u: usize, adj: &[Vec<(f64, usize)>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &(_, v) in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; nb];
    for u in 0..na {
        let mut seen = vec![false; nb];
        augment(u, &adj, &mut seen, &mut owner);
    }
    let mut out: Vec<(usize, usize)> = owner.iter().enumerate().filter_map(|(v, o)| o.map(|u| (u, v))).collect();
    out.sort_unstable();
    out
}

/// One-to-one correspondences under a fixed transform, boxes growing from
/// `center` (a point of A's frame).
pub fn matched_pairs(
    a: &MinutiaTemplate,
    b: &MinutiaTemplate,
    t: &RigidTransform,
    center: (f64, f64),
    cfg: &ElasticConfig,
) -> Vec<(usize, usize)> {
    assign(&Frame::new(a, b, t, center), cfg)
}

/// `2 n / (|A| + |B|)` after alignment; boxes grow from the centroid of the
/// matched A minutiae of the alignment.
pub fn elastic_match(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &ElasticConfig) -> f64 {
    let Ok(t) = align_minutiae(a, b, cfg) else {
        return 0.0;
    };
    let center = anchor_center(a, b, &t, cfg);
    let n = matched_pairs(a, b, &t, center, cfg).len();
    2.0 * n as f64 / (a.len() + b.len()) as f64
}

/// The A minutia closest to its aligned partner serves as the box centre.
fn anchor_center(a: &MinutiaTemplate, b: &MinutiaTemplate, t: &RigidTransform, cfg: &ElasticConfig) -> (f64, f64) {
    let inv = t.inverse();
    let mut best = (f64::INFINITY, (a.minutiae[0].x, a.minutiae[0].y));
    for ma in &a.minutiae {
        for mb in &b.minutiae {
            let (x, y) = inv.apply(mb.x, mb.y);
            let d = (x - ma.x).hypot(y - ma.y);
            if d < best.0 && angle_diff_deg(inv.apply_angle(mb.direction), ma.direction) <= cfg.angle_tol {
                best = (d, (ma.x, ma.y));
            }
        }
    }
    best.1
}
