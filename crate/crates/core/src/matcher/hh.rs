use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{bearing_deg, circular_mean_deg, wrap_deg, RigidTransform};
use crate::minutiae::{Minutia, MinutiaTemplate};
use crate::symmetry::ComplexField;

/// Distance between two minutiae and each one's direction relative to the
/// line joining them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAttributes {
    pub d: f64,
    /// `direction_i - bearing(i -> j)`, wrapped to `(-180, 180]`.
    pub alpha_ij: f64,
    /// `direction_j - bearing(j -> i)`, wrapped to `(-180, 180]`.
    pub alpha_ji: f64,
}

pub fn pair_attributes(mi: &Minutia, mj: &Minutia) -> Result<PairAttributes> {
    let d = mi.distance(mj);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(PairAttributes {
        d,
        alpha_ij: wrap_deg(mi.direction - bearing_deg(mi.x, mi.y, mj.x, mj.y)),
        alpha_ji: wrap_deg(mj.direction - bearing_deg(mj.x, mj.y, mi.x, mi.y)),
    })
}

/// Minutiae `(i, j)` of A correspond to `(k, l)` of B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Couple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HHConfig {
    pub lambda_dist: f64,
    pub lambda_angle: f64,
    /// Agreement required between corresponding triangle closing angles.
    pub gamma_tol: f64,
    /// Correlation patches are `(2 * area_half + 1)^2` pixels.
    pub area_half: usize,
    /// Minimum mean |LS| of a patch in both prints.
    pub ls_area_min: f64,
}

impl Default for HHConfig {
    fn default() -> Self {
        Self {
            lambda_dist: 8.0,
            lambda_angle: 20.0,
            gamma_tol: 15.0,
            area_half: 10,
            ls_area_min: 0.4,
        }
    }
}

impl HHConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_dist >= 0.0
            && self.lambda_angle >= 0.0
            && self.gamma_tol > 0.0
            && self.area_half > 0
            && (0.0..=1.0).contains(&self.ls_area_min);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid hh matcher configuration".into()))
        }
    }
}

/// Reference couple plus every mated minutia pair `(a, b)`, the reference
/// minutiae first.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingList {
    pub reference: Couple,
    pub pairs: Vec<(usize, usize)>,
}

impl PairingList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn all_pairs(t: &MinutiaTemplate) -> Vec<(usize, usize, PairAttributes)> {
    let n = t.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if let Ok(p) = pair_attributes(&t.minutiae[i], &t.minutiae[j]) {
                    out.push((i, j, p));
                }
            }
        }
    }
    out
}

fn residual(a: &PairAttributes, b: &PairAttributes) -> (f64, f64) {
    (
        (a.d - b.d).abs(),
        wrap_deg(a.alpha_ij - b.alpha_ij).abs() + wrap_deg(a.alpha_ji - b.alpha_ji).abs(),
    )
}

/// All `(i, j, k, l)` with `i < j` whose attributes agree: strict distance
/// tolerance and summed wrapped angle differences below `lambda_angle`.
pub fn corresponding_couples(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &HHConfig) -> Vec<Couple> {
    couples_with_residuals(a, b, cfg).into_iter().map(|(c, _)| c).collect()
}

fn couples_with_residuals(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &HHConfig) -> Vec<(Couple, f64)> {
    let mut pb = all_pairs(b);
    pb.sort_by(|x, y| x.2.d.total_cmp(&y.2.d));
    let mut out = Vec::new();
    for (i, j, pa) in all_pairs(a) {
        if i > j {
            continue;
        }
        let lo = pb.partition_point(|p| p.2.d <= pa.d - cfg.lambda_dist);
        for &(k, l, q) in &pb[lo..] {
            if q.d >= pa.d + cfg.lambda_dist {
                break;
            }
            let (dd, da) = residual(&pa, &q);
            if dd < cfg.lambda_dist && da < cfg.lambda_angle {
                out.push((Couple { i, j, k, l }, dd + da));
            }
        }
    }
    out.sort_by_key(|c| c.0);
    out
}

/// Signed angle at `o` from the ray `o -> p` to the ray `o -> q`.
fn closing_angle(o: &Minutia, p: &Minutia, q: &Minutia) -> f64 {
    wrap_deg(bearing_deg(o.x, o.y, q.x, q.y) - bearing_deg(o.x, o.y, p.x, p.y))
}

/// Picks the reference couple with the most mated neighbours. A neighbour
/// `(o, p)` needs `(i, o; k, p)` and `(j, o; l, p)` to be corresponding
/// couples and its closing angle in A to match the one in B.
pub fn grow_triangles(
    couples: &[Couple],
    a: &MinutiaTemplate,
    b: &MinutiaTemplate,
    cfg: &HHConfig,
) -> Result<PairingList> {
    let with_res: Vec<(Couple, f64)> = couples
        .iter()
        .map(|&c| {
            let r = match (
                pair_attributes(&a.minutiae[c.i], &a.minutiae[c.j]),
                pair_attributes(&b.minutiae[c.k], &b.minutiae[c.l]),
            ) {
                (Ok(x), Ok(y)) => {
                    let (dd, da) = residual(&x, &y);
                    dd + da
                }
                _ => f64::INFINITY,
            };
            (c, r)
        })
        .collect();
    grow(&with_res, a, b, cfg)
}

fn grow(couples: &[(Couple, f64)], a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &HHConfig) -> Result<PairingList> {
    // both orientations of every couple, keyed by the ordered A pair
    let mut index: HashMap<(usize, usize), Vec<(usize, usize, f64)>> = HashMap::new();
    for &(c, r) in couples {
        index.entry((c.i, c.j)).or_default().push((c.k, c.l, r));
        index.entry((c.j, c.i)).or_default().push((c.l, c.k, r));
    }
    let lookup = |x: usize, y: usize, u: usize, v: usize| -> Option<f64> {
        index
            .get(&(x, y))
            .and_then(|list| list.iter().find(|e| e.0 == u && e.1 == v).map(|e| e.2))
    };

    let mut best: Option<(usize, f64, PairingList)> = None;
    for &(c, r) in couples {
        let (mi, mj) = (&a.minutiae[c.i], &a.minutiae[c.j]);
        let (mk, ml) = (&b.minutiae[c.k], &b.minutiae[c.l]);
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (o, mo) in a.minutiae.iter().enumerate() {
            if o == c.i || o == c.j {
                continue;
            }
            let Some(first) = index.get(&(c.i, o)) else { continue };
            for &(k2, p, r1) in first {
                if k2 != c.k || p == c.k || p == c.l {
                    continue;
                }
                let Some(r2) = lookup(c.j, o, c.l, p) else { continue };
                let mp = &b.minutiae[p];
                let ga = closing_angle(mo, mi, mj);
                let gb = closing_angle(mp, mk, ml);
                if wrap_deg(ga - gb).abs() <= cfg.gamma_tol {
                    cands.push((r1 + r2, o, p));
                }
            }
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut pairs = vec![(c.i, c.k), (c.j, c.l)];
        let mut total = r;
        for (res, o, p) in cands {
            if pairs.iter().all(|&(x, y)| x != o && y != p) {
                pairs.push((o, p));
                total += res;
            }
        }
        let n = pairs.len() - 2;
        if n == 0 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bn, br, _)) => n > *bn || (n == *bn && total < *br),
        };
        if better {
            best = Some((n, total, PairingList { reference: c, pairs }));
        }
    }
    best.map(|(_, _, p)| p).ok_or(Error::NoConsistentPairing)
}

/// Rigid motion carrying A's minutiae onto B's: the rotation is the circular
/// mean over neighbours of the change in bearing from the first pair; the
/// translation then maps A's first minutia onto B's.
pub fn estimate_alignment(pairing: &PairingList, a: &MinutiaTemplate, b: &MinutiaTemplate) -> Result<RigidTransform> {
    if pairing.len() < 2 {
        return Err(Error::PairingTooSmall(pairing.len()));
    }
    let (a0, b0) = (&a.minutiae[pairing.pairs[0].0], &b.minutiae[pairing.pairs[0].1]);
    let rot = circular_mean_deg(pairing.pairs[1..].iter().map(|&(ia, ib)| {
        let (ma, mb) = (&a.minutiae[ia], &b.minutiae[ib]);
        bearing_deg(b0.x, b0.y, mb.x, mb.y) - bearing_deg(a0.x, a0.y, ma.x, ma.y)
    }))
    .unwrap_or(0.0);
    let r = RigidTransform::new(0.0, 0.0, rot);
    let (rx, ry) = r.apply(a0.x, a0.y);
    Ok(RigidTransform::new(b0.x - rx, b0.y - ry, rot))
}

/// Mean over admitted minutiae of A of the magnitude of the normalized
/// inner product between the LS patch around the minutia and the
/// transformed patch in B (with B's double angles rotated back).
pub fn correlation_score(
    ls_a: &ComplexField,
    ls_b: &ComplexField,
    template_a: &MinutiaTemplate,
    t: &RigidTransform,
    cfg: &HHConfig,
) -> f64 {
    let h = cfg.area_half as isize;
    let back = Complex64::from_polar(1.0, -2.0 * t.rot.to_radians());
    let mut sum = 0.0;
    let mut admitted = 0usize;
    'minutiae: for m in &template_a.minutiae {
        let n = ((2 * h + 1) * (2 * h + 1)) as f64;
        let (mut ab, mut aa, mut bb, mut ma, mut mb) = (Complex64::new(0.0, 0.0), 0.0, 0.0, 0.0, 0.0);
        for v in -h..=h {
            for u in -h..=h {
                let (x, y) = (m.x + u as f64, m.y + v as f64);
                let (bx, by) = t.apply(x, y);
                let (Some(za), Some(zb)) = (ls_a.sample(x, y), ls_b.sample(bx, by)) else {
                    continue 'minutiae;
                };
                let zb = zb * back;
                ab += za * zb.conj();
                aa += za.norm_sqr();
                bb += zb.norm_sqr();
                ma += za.norm();
                mb += zb.norm();
            }
        }
        if ma / n < cfg.ls_area_min || mb / n < cfg.ls_area_min || aa == 0.0 || bb == 0.0 {
            continue;
        }
        sum += (ab.norm() / (aa * bb).sqrt()).min(1.0);
        admitted += 1;
    }
    if admitted == 0 {
        0.0
    } else {
        sum / admitted as f64
    }
}

/// Template plus the LS field it was extracted with.
#[derive(Debug, Clone)]
pub struct HHBundle {
    pub template: MinutiaTemplate,
    pub ls: ComplexField,
}

/// Pairing, alignment and correlation; any failure to pair scores 0.
pub fn match_hh(a: &HHBundle, b: &HHBundle, cfg: &HHConfig) -> f64 {
    align_hh(&a.template, &b.template, cfg)
        .map(|t| correlation_score(&a.ls, &b.ls, &a.template, &t, cfg))
        .unwrap_or(0.0)
}

/// Pairing followed by alignment estimation.
pub fn align_hh(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &HHConfig) -> Result<RigidTransform> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let couples = couples_with_residuals(a, b, cfg);
    let pairing = grow(&couples, a, b, cfg)?;
    estimate_alignment(&pairing, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff_deg;
    use crate::minutiae::{MinutiaKind, TemplateSource};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(x: f64, y: f64, d: f64) -> Minutia {
        Minutia::new(x, y, d, MinutiaKind::Unknown, 1.0)
    }

    fn random_template(n: usize, seed: u64) -> MinutiaTemplate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = MinutiaTemplate::new(256, 256, TemplateSource::Symmetry);
        while t.len() < n {
            let c = m(rng.random_range(40.0..216.0), rng.random_range(40.0..216.0), rng.random_range(0.0..360.0));
            if t.minutiae.iter().all(|o| o.distance(&c) > 20.0) {
                t.minutiae.push(c);
            }
        }
        t
    }

    #[test]
    fn attribute_examples() {
        let p = pair_attributes(&m(0.0, 0.0, 0.0), &m(10.0, 0.0, 90.0)).unwrap();
        assert_eq!((p.d, p.alpha_ij, p.alpha_ji), (10.0, 0.0, -90.0));
        let q = pair_attributes(&m(10.0, 0.0, 90.0), &m(0.0, 0.0, 0.0)).unwrap();
        assert_eq!((q.d, q.alpha_ij, q.alpha_ji), (10.0, -90.0, 0.0));
        let r = pair_attributes(&m(0.0, 0.0, 0.0), &m(0.0, 10.0, 0.0)).unwrap();
        assert_eq!(r.alpha_ij, -90.0);
        assert!(matches!(pair_attributes(&m(1.0, 1.0, 0.0), &m(1.0, 1.0, 5.0)), Err(Error::CoincidentPoints)));
    }

    proptest! {
        #[test]
        fn attributes_are_rigid_invariant(
            p in (0.0..200.0f64, 0.0..200.0f64, 0.0..360.0f64),
            q in (0.0..200.0f64, 0.0..200.0f64, 0.0..360.0f64),
            t in (-50.0..50.0f64, -50.0..50.0f64, -180.0..180.0f64),
        ) {
            let (a, b) = (m(p.0, p.1, p.2), m(q.0, q.1, q.2));
            prop_assume!(a.distance(&b) > 1e-3);
            let tr = RigidTransform::new(t.0, t.1, t.2);
            let mv = |x: &Minutia| { let (u, v) = tr.apply(x.x, x.y); m(u, v, tr.apply_angle(x.direction)) };
            let (p0, p1) = (pair_attributes(&a, &b).unwrap(), pair_attributes(&mv(&a), &mv(&b)).unwrap());
            prop_assert!((p0.d - p1.d).abs() < 1e-9);
            prop_assert!(wrap_deg(p0.alpha_ij - p1.alpha_ij).abs() < 1e-9);
            prop_assert!(wrap_deg(p0.alpha_ji - p1.alpha_ji).abs() < 1e-9);
        }

        #[test]
        fn self_couples_include_the_diagonal(seed in 0u64..1000, n in 2usize..15) {
            let t = random_template(n, seed);
            let cs = corresponding_couples(&t, &t, &HHConfig::default());
            for i in 0..n {
                for j in i + 1..n {
                    let c = Couple { i, j, k: i, l: j };
                    prop_assert!(cs.contains(&c), "missing {:?}", c);
                }
            }
        }
    }

    #[test]
    fn rigid_copy_keeps_every_couple() {
        let a = random_template(12, 5);
        let b = a.transformed(&RigidTransform::new(7.0, -4.0, 23.0));
        let cs = corresponding_couples(&a, &b, &HHConfig::default());
        for i in 0..12 {
            for j in i + 1..12 {
                assert!(cs.contains(&Couple { i, j, k: i, l: j }));
            }
        }
    }

    #[test]
    fn zero_distance_tolerance_gives_nothing() {
        let a = random_template(8, 1);
        let b = a.transformed(&RigidTransform::new(0.3, 0.1, 3.0));
        let cfg = HHConfig { lambda_dist: 0.0, ..Default::default() };
        assert!(corresponding_couples(&a, &b, &cfg).is_empty());
    }

    #[test]
    fn identical_templates_pair_completely() {
        let a = random_template(10, 9);
        let cfg = HHConfig::default();
        let p = grow_triangles(&corresponding_couples(&a, &a, &cfg), &a, &a, &cfg).unwrap();
        assert_eq!(p.len(), 10);
        assert!(p.pairs.iter().all(|&(x, y)| x == y));
    }

    #[test]
    fn unrelated_templates_do_not_pair() {
        let (a, b) = (random_template(10, 21), random_template(10, 22));
        let cfg = HHConfig::default();
        let cs = corresponding_couples(&a, &b, &cfg);
        assert!(matches!(grow_triangles(&cs, &a, &b, &cfg), Err(Error::NoConsistentPairing)));
    }

    #[test]
    fn collinear_triplet_pairs() {
        let mut a = MinutiaTemplate::new(100, 100, TemplateSource::Symmetry);
        a.minutiae = vec![m(10.0, 50.0, 0.0), m(40.0, 50.0, 0.0), m(80.0, 50.0, 0.0)];
        let cfg = HHConfig::default();
        let p = grow_triangles(&corresponding_couples(&a, &a, &cfg), &a, &a, &cfg).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn alignment_recovers_planted_motion() {
        let a = random_template(10, 3);
        let cfg = HHConfig::default();
        let same = align_hh(&a, &a, &cfg).unwrap();
        assert!(same.dx.abs() < 1e-9 && same.dy.abs() < 1e-9 && same.rot.abs() < 1e-9);

        let shifted = a.transformed(&RigidTransform::new(5.0, -3.0, 0.0));
        let t = align_hh(&a, &shifted, &cfg).unwrap();
        assert!((t.dx - 5.0).abs() <= 0.5 && (t.dy + 3.0).abs() <= 0.5 && t.rot.abs() < 0.5);

        let first = a.minutiae[0];
        let rotated = a.transformed(&RigidTransform::about(first.x, first.y, 10.0, 0.0, 0.0));
        let t = align_hh(&a, &rotated, &cfg).unwrap();
        assert!(angle_diff_deg(t.rot, 10.0) <= 0.5);
        for p in &a.minutiae {
            let (x, y) = t.apply(p.x, p.y);
            let (ex, ey) = RigidTransform::about(first.x, first.y, 10.0, 0.0, 0.0).apply(p.x, p.y);
            assert!((x - ex).hypot(y - ey) < 1e-6);
        }
    }

    #[test]
    fn small_pairing_is_rejected() {
        let a = random_template(3, 1);
        let p = PairingList { reference: Couple { i: 0, j: 1, k: 0, l: 1 }, pairs: vec![(0, 0)] };
        assert!(matches!(estimate_alignment(&p, &a, &a), Err(Error::PairingTooSmall(1))));
    }

    fn wave_ls(theta: f64) -> ComplexField {
        let v = Complex64::from_polar(0.9, 2.0 * theta.to_radians());
        ComplexField::new(64, 64, vec![v; 64 * 64]).unwrap()
    }

    #[test]
    fn correlation_edge_cases() {
        let mut a = MinutiaTemplate::new(64, 64, TemplateSource::Symmetry);
        a.minutiae.push(m(32.0, 32.0, 0.0));
        let ls = wave_ls(30.0);
        let cfg = HHConfig::default();
        let s = correlation_score(&ls, &ls, &a, &RigidTransform::IDENTITY, &cfg);
        assert!((s - 1.0).abs() < 1e-9);
        let zero = ComplexField::zeros(64, 64);
        assert_eq!(correlation_score(&ls, &zero, &a, &RigidTransform::IDENTITY, &cfg), 0.0);
        // patch leaving the frame is skipped
        a.minutiae[0] = m(3.0, 3.0, 0.0);
        assert_eq!(correlation_score(&ls, &ls, &a, &RigidTransform::IDENTITY, &cfg), 0.0);
    }

    #[test]
    fn empty_template_scores_zero() {
        let a = HHBundle { template: MinutiaTemplate::new(64, 64, TemplateSource::Symmetry), ls: wave_ls(0.0) };
        let mut b = a.clone();
        b.template.minutiae.push(m(30.0, 30.0, 0.0));
        assert_eq!(match_hh(&a, &b, &HHConfig::default()), 0.0);
    }
}
