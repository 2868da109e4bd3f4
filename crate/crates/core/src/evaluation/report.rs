use std::fmt::Write as _;

use super::{eer, rates_from_scores, relative_variation, Label, RateCurve, ScoreRecord};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionRule};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionRow {
    /// Matcher ids joined by `+`.
    pub subset: String,
    pub members: Vec<usize>,
    pub rule: FusionRule,
    pub eer: f64,
    pub best_matcher: String,
    pub best_eer: f64,
    /// Percent; `None` when the best individual EER is zero.
    pub relative_variation: Option<f64>,
    pub curve: RateCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    pub matchers: Vec<String>,
    pub individual_eer: Vec<f64>,
    /// Sorted by EER, then rule, then subset enumeration order.
    pub rows: Vec<FusionRow>,
}

/// Every subset of `0..n` with at least two members: by size, then
/// lexicographically.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|bits| (0..n).filter(|i| bits & (1 << i) != 0).collect::<Vec<usize>>())
        .filter(|s| s.len() >= 2)
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Fuses normalized scores trial by trial for each subset and rule.
pub fn fusion_report(
    per_matcher: &[(String, Vec<ScoreRecord>)],
    subsets: &[Vec<usize>],
    rules: &[FusionRule],
) -> Result<FusionReport> {
    let Some((first_id, first)) = per_matcher.first() else {
        return Err(Error::EmptyScores);
    };
    // align every matcher on the first one's sorted trial keys
    let sorted: Vec<Vec<&ScoreRecord>> = per_matcher
        .iter()
        .map(|(_, recs)| {
            let mut v: Vec<&ScoreRecord> = recs.iter().collect();
            v.sort_by(|a, b| a.key().cmp(&b.key()));
            v
        })
        .collect();
    for ((id, _), recs) in per_matcher.iter().zip(&sorted).skip(1) {
        let same = recs.len() == sorted[0].len() && recs.iter().zip(&sorted[0]).all(|(a, b)| a.key() == b.key());
        if !same {
            return Err(Error::TrialKeyMismatch(format!("{id} and {first_id} disagree")));
        }
    }
    let _ = first;
    let labels: Vec<Label> = sorted[0].iter().map(|r| r.label).collect();
    let curve_of = |scores: &[f64]| {
        let (mut g, mut i) = (Vec::new(), Vec::new());
        for (s, l) in scores.iter().zip(&labels) {
            match l {
                Label::Genuine => g.push(*s),
                Label::Impostor => i.push(*s),
            }
        }
        rates_from_scores(&g, &i)
    };
    let columns: Vec<Vec<f64>> = sorted.iter().map(|v| v.iter().map(|r| r.score()).collect()).collect();
    let individual_eer: Vec<f64> = columns.iter().map(|c| curve_of(c).map(|k| eer(&k))).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for members in subsets {
        if members.iter().any(|&m| m >= per_matcher.len()) {
            return Err(Error::InvalidParameter(format!("subset {members:?} names an unknown matcher")));
        }
        let subset = members.iter().map(|&m| per_matcher[m].0.as_str()).collect::<Vec<_>>().join("+");
        let best = *members
            .iter()
            .min_by(|&&a, &&b| individual_eer[a].total_cmp(&individual_eer[b]).then(a.cmp(&b)))
            .expect("subsets are nonempty");
        for &rule in rules {
            let fused: Vec<f64> = (0..labels.len())
                .map(|t| fuse(&members.iter().map(|&m| columns[m][t]).collect::<Vec<_>>(), rule))
                .collect::<Result<_>>()?;
            let curve = curve_of(&fused)?;
            let e = eer(&curve);
            rows.push(FusionRow {
                subset: subset.clone(),
                members: members.clone(),
                rule,
                eer: e,
                best_matcher: per_matcher[best].0.clone(),
                best_eer: individual_eer[best],
                relative_variation: relative_variation(e, individual_eer[best]).ok(),
                curve,
            });
        }
    }
    // stable: equal EERs keep rule order and enumeration order
    rows.sort_by(|a, b| a.eer.total_cmp(&b.eer).then(a.rule.cmp(&b.rule)));
    Ok(FusionReport {
        matchers: per_matcher.iter().map(|(id, _)| id.clone()).collect(),
        individual_eer,
        rows,
    })
}

impl FusionReport {
    pub fn rows_for(&self, rule: FusionRule) -> impl Iterator<Item = &FusionRow> {
        self.rows.iter().filter(move |r| r.rule == rule)
    }

    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.subset.len()).chain([6]).max().unwrap_or(6);
        let mut s = String::new();
        writeln!(s, "{:<width$}  {:<4}  {:>8}  {:<width$}  {:>8}  {:>9}", "subset", "rule", "EER(%)", "best", "best(%)", "rel.var").unwrap();
        for r in &self.rows {
            let rv = r.relative_variation.map(|v| format!("{v:+.2}%")).unwrap_or_else(|| "n/a".into());
            writeln!(
                s,
                "{:<width$}  {:<4}  {:>8.2}  {:<width$}  {:>8.2}  {:>9}",
                r.subset,
                r.rule.to_string(),
                100.0 * r.eer,
                r.best_matcher,
                100.0 * r.best_eer,
                rv
            )
            .unwrap();
        }
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from("subset,rule,eer,best_matcher,best_eer,relative_variation\n");
        for r in &self.rows {
            let rv = r.relative_variation.map(|v| format!("{v:.4}")).unwrap_or_default();
            writeln!(s, "{},{},{:.6},{},{:.6},{rv}", r.subset, r.rule, r.eer, r.best_matcher, r.best_eer).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn records(id: &str, seed: u64, shift: f64) -> Vec<ScoreRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..60)
            .map(|t| {
                let genuine = t % 3 == 0;
                let base: f64 = rng.random_range(0.0..0.6);
                let s = if genuine { base + shift } else { base };
                ScoreRecord {
                    matcher: id.into(),
                    template_id: format!("f{:03}/00", t / 6),
                    probe_id: format!("p{t:03}"),
                    label: if genuine { Label::Genuine } else { Label::Impostor },
                    raw: s,
                    normalized: Some(s.min(1.0)),
                }
            })
            .collect()
    }

    #[test]
    fn subset_counts() {
        assert_eq!(all_subsets(4).len(), 11);
        assert_eq!(all_subsets(2), vec![vec![0, 1]]);
        for n in 2..8 {
            assert_eq!(all_subsets(n).len(), (1 << n) - n - 1);
        }
    }

    #[test]
    fn eleven_rows_per_rule() {
        let per: Vec<_> = ["a", "b", "c", "d"].iter().enumerate().map(|(i, id)| (id.to_string(), records(id, i as u64, 0.2 + 0.05 * i as f64))).collect();
        let rep = fusion_report(&per, &all_subsets(4), &[FusionRule::Max, FusionRule::Sum]).unwrap();
        assert_eq!(rep.rows_for(FusionRule::Max).count(), 11);
        assert_eq!(rep.rows_for(FusionRule::Sum).count(), 11);
        assert!(rep.rows.windows(2).all(|w| w[0].eer <= w[1].eer));
        assert_eq!(rep.render_csv().lines().count(), 23);
        assert_eq!(rep.render_text().lines().count(), 23);
    }

    #[test]
    fn identical_matchers_fuse_to_themselves() {
        let r = records("a", 7, 0.25);
        let mut twin = r.clone();
        twin.iter_mut().for_each(|x| x.matcher = "b".into());
        let per = vec![("a".to_string(), r), ("b".to_string(), twin)];
        let rep = fusion_report(&per, &all_subsets(2), &[FusionRule::Max, FusionRule::Sum]).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert_eq!(row.eer, rep.individual_eer[0]);
        }
    }

    #[test]
    fn key_mismatch_is_rejected() {
        let a = records("a", 1, 0.2);
        let mut b = records("b", 2, 0.2);
        b[5].probe_id = "elsewhere".into();
        let per = vec![("a".to_string(), a), ("b".to_string(), b)];
        assert!(matches!(fusion_report(&per, &all_subsets(2), &[FusionRule::Max]), Err(Error::TrialKeyMismatch(_))));
    }

    #[test]
    fn mean_and_raw_sum_rank_alike() {
        let per: Vec<_> = ["a", "b", "c"].iter().enumerate().map(|(i, id)| (id.to_string(), records(id, 10 + i as u64, 0.15))).collect();
        let rep = fusion_report(&per, &[vec![0, 1, 2]], &[FusionRule::Sum]).unwrap();
        let labels: Vec<Label> = per[0].1.iter().map(|r| r.label).collect();
        let (mut g, mut i) = (Vec::new(), Vec::new());
        for t in 0..labels.len() {
            let raw_sum: f64 = per.iter().map(|(_, r)| r[t].score()).sum();
            if labels[t] == Label::Genuine { g.push(raw_sum) } else { i.push(raw_sum) }
        }
        let e = eer(&rates_from_scores(&g, &i).unwrap());
        assert!((e - rep.rows[0].eer).abs() < 1e-12);
    }
}
