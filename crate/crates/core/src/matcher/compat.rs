use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{bearing_deg, wrap_deg};
use crate::minutiae::MinutiaTemplate;

/// One unordered pair of a template, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraEntry {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub beta_i: f64,
    pub beta_j: f64,
    /// Bearing of the line `i -> j`. Not rigid invariant, used only for the
    /// implied rotation.
    pub bearing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatEntry {
    pub pair_a: (usize, usize),
    pub pair_b: (usize, usize),
    pub implied_rotation: f64,
    /// Summed attribute mismatch, orders the consistency sweep.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatConfig {
    pub tol_dist: f64,
    pub tol_angle: f64,
    pub tol_cluster_rot: f64,
    /// Score sums the `top_k` largest consistent clusters.
    pub top_k: usize,
}

impl Default for CompatConfig {
    fn default() -> Self {
        Self {
            tol_dist: 10.0,
            tol_angle: 11.25,
            tol_cluster_rot: 22.5,
            top_k: 1,
        }
    }
}

impl CompatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol_dist >= 0.0 && self.tol_angle >= 0.0 && self.tol_cluster_rot >= 0.0 && self.top_k >= 1 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid compat matcher configuration".into()))
        }
    }
}

/// Every unordered pair, `n(n-1)/2` entries. Coincident minutiae get
/// direction-only angles relative to a zero bearing.
pub fn intra_table(t: &MinutiaTemplate) -> Vec<IntraEntry> {
    let m = &t.minutiae;
    let mut out = Vec::with_capacity(m.len() * m.len().saturating_sub(1) / 2);
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            let (a, b) = (&m[i], &m[j]);
            let bearing = bearing_deg(a.x, a.y, b.x, b.y);
            out.push(IntraEntry {
                i,
                j,
                d: a.distance(b),
                beta_i: wrap_deg(a.direction - bearing),
                beta_j: wrap_deg(b.direction - (bearing + 180.0)),
                bearing,
            });
        }
    }
    out
}

/// Straight `(i->k, j->l)` and swapped `(i->l, j->k)` assignments are tested
/// separately.
pub fn compatibility_table(ta: &[IntraEntry], tb: &[IntraEntry], cfg: &CompatConfig) -> Vec<CompatEntry> {
    let mut sorted: Vec<&IntraEntry> = tb.iter().collect();
    sorted.sort_by(|x, y| x.d.total_cmp(&y.d));
    let mut out = Vec::new();
    for a in ta {
        let lo = sorted.partition_point(|b| b.d < a.d - cfg.tol_dist);
        for b in &sorted[lo..] {
            if b.d > a.d + cfg.tol_dist {
                break;
            }
            let dd = (a.d - b.d).abs();
            let straight = (wrap_deg(a.beta_i - b.beta_i).abs(), wrap_deg(a.beta_j - b.beta_j).abs());
            if straight.0 <= cfg.tol_angle && straight.1 <= cfg.tol_angle {
                out.push(CompatEntry {
                    pair_a: (a.i, a.j),
                    pair_b: (b.i, b.j),
                    implied_rotation: wrap_deg(b.bearing - a.bearing),
                    residual: dd + straight.0 + straight.1,
                });
            }
            let swapped = (wrap_deg(a.beta_i - b.beta_j).abs(), wrap_deg(a.beta_j - b.beta_i).abs());
            if swapped.0 <= cfg.tol_angle && swapped.1 <= cfg.tol_angle {
                out.push(CompatEntry {
                    pair_a: (a.i, a.j),
                    pair_b: (b.j, b.i),
                    implied_rotation: wrap_deg(b.bearing + 180.0 - a.bearing),
                    residual: dd + swapped.0 + swapped.1,
                });
            }
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Links entries that map a shared A minutia to the same B minutia with
/// agreeing implied rotations, sweeps each connected component greedily
/// (lowest residual first) keeping only entries consistent with a
/// one-to-one assignment, and returns the summed size of the `top_k`
/// largest survivors.
pub fn cluster_score(entries: &[CompatEntry], cfg: &CompatConfig) -> usize {
    let n = entries.len();
    if n == 0 {
        return 0;
    }
    let mut by_assignment: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (e, c) in entries.iter().enumerate() {
        by_assignment.entry((c.pair_a.0, c.pair_b.0)).or_default().push(e);
        by_assignment.entry((c.pair_a.1, c.pair_b.1)).or_default().push(e);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut groups: Vec<&Vec<usize>> = by_assignment.values().collect();
    groups.sort();
    for group in groups {
        for (s, &e) in group.iter().enumerate() {
            for &f in &group[s + 1..] {
                if wrap_deg(entries[e].implied_rotation - entries[f].implied_rotation).abs() <= cfg.tol_cluster_rot {
                    let (re, rf) = (find(&mut parent, e), find(&mut parent, f));
                    if re != rf {
                        parent[re.max(rf)] = re.min(rf);
                    }
                }
            }
        }
    }
    let mut components: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in 0..n {
        let r = find(&mut parent, e);
        components.entry(r).or_default().push(e);
    }
    let mut sizes: Vec<usize> = components
        .into_values()
        .map(|mut members| {
            members.sort_by(|&x, &y| entries[x].residual.total_cmp(&entries[y].residual).then(x.cmp(&y)));
            consistent_count(entries, &members)
        })
        .collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.iter().take(cfg.top_k).sum()
}

fn consistent_count(entries: &[CompatEntry], order: &[usize]) -> usize {
    let mut a_to_b: HashMap<usize, usize> = HashMap::new();
    let mut b_to_a: HashMap<usize, usize> = HashMap::new();
    let mut kept = 0;
    for &e in order {
        let c = &entries[e];
        let links = [(c.pair_a.0, c.pair_b.0), (c.pair_a.1, c.pair_b.1)];
        let ok = links.iter().all(|&(a, b)| {
            a_to_b.get(&a).is_none_or(|&x| x == b) && b_to_a.get(&b).is_none_or(|&x| x == a)
        });
        if ok {
            for (a, b) in links {
                a_to_b.insert(a, b);
                b_to_a.insert(b, a);
            }
            kept += 1;
        }
    }
    kept
}

pub fn match_compat(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &CompatConfig) -> usize {
    cluster_score(&compatibility_table(&intra_table(a), &intra_table(b), cfg), cfg)
}
