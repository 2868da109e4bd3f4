//! Trial protocol, error rates, EER, DET export and fusion reports.

mod experiment;
mod protocol;
mod report;

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use experiment::{run_experiment, Experiment, ExperimentConfig, FusionMode, MatcherRun};
pub use protocol::{run_protocol, Corpus, FingerEntry, Protocol, Trial};
pub use report::{fusion_report, FusionReport, FusionRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Genuine,
    Impostor,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genuine" => Ok(Label::Genuine),
            "impostor" => Ok(Label::Impostor),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub matcher: String,
    pub template_id: String,
    pub probe_id: String,
    pub label: Label,
    pub raw: f64,
    /// Similarity in `[0, 1]` once a normalizer has been applied.
    pub normalized: Option<f64>,
}

impl ScoreRecord {
    /// Normalized score when present, else the raw one.
    pub fn score(&self) -> f64 {
        self.normalized.unwrap_or(self.raw)
    }

    pub fn key(&self) -> (&str, &str, Label) {
        (&self.template_id, &self.probe_id, self.label)
    }
}

pub const SCORE_HEADER: &str = "matcher,template_id,probe_id,label,raw,normalized";

pub fn render_scores(records: &[ScoreRecord]) -> String {
    let mut s = format!("{SCORE_HEADER}\n");
    for r in records {
        let norm = r.normalized.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(s, "{},{},{},{},{:.6},{norm}", r.matcher, r.template_id, r.probe_id, r.label, r.raw).unwrap();
    }
    s
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(SCORE_HEADER) {
        return Err(Error::parse(1, format!("expected header {SCORE_HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let n = i + 2;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(n, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(n, format!("bad number {s:?}")));
            Ok(ScoreRecord {
                matcher: f[0].into(),
                template_id: f[1].into(),
                probe_id: f[2].into(),
                label: f[3].parse().map_err(|_| Error::parse(n, format!("bad label {:?}", f[3])))?,
                raw: num(f[4])?,
                normalized: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

/// Rates at `-inf`, every distinct score and `+inf`, ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

/// Accept when `score >= t`: FMR counts impostors at or above `t`, FNMR
/// genuine scores below it.
pub fn rates_from_scores(genuine: &[f64], impostor: &[f64]) -> Result<RateCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::OneClass);
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (g, i) = (sorted(genuine), sorted(impostor));
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut points = Vec::with_capacity(thresholds.len() + 2);
    points.push(RatePoint { threshold: f64::NEG_INFINITY, fmr: 1.0, fnmr: 0.0 });
    for t in thresholds {
        let below_i = i.partition_point(|s| *s < t);
        let below_g = g.partition_point(|s| *s < t);
        points.push(RatePoint {
            threshold: t,
            fmr: (i.len() - below_i) as f64 / i.len() as f64,
            fnmr: below_g as f64 / g.len() as f64,
        });
    }
    points.push(RatePoint { threshold: f64::INFINITY, fmr: 0.0, fnmr: 1.0 });
    Ok(RateCurve { points })
}

pub fn compute_rates(records: &[ScoreRecord]) -> Result<RateCurve> {
    let (g, i) = split(records);
    rates_from_scores(&g, &i)
}

fn split(records: &[ScoreRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut g = Vec::new();
    let mut i = Vec::new();
    for r in records {
        match r.label {
            Label::Genuine => g.push(r.score()),
            Label::Impostor => i.push(r.score()),
        }
    }
    (g, i)
}

/// Crossing of FMR and FNMR, interpolated linearly between the adjacent
/// thresholds that bracket it; a run of thresholds where the rates are
/// equal yields the mean of its end rates.
pub fn eer(curve: &RateCurve) -> f64 {
    let p = &curve.points;
    if p.is_empty() {
        return 0.0;
    }
    let d = |k: usize| p[k].fmr - p[k].fnmr;
    let Some(k) = (0..p.len()).find(|&k| d(k) <= 0.0) else {
        return p[p.len() - 1].fmr;
    };
    if d(k) == 0.0 {
        let mut end = k;
        while end + 1 < p.len() && d(end + 1) == 0.0 {
            end += 1;
        }
        return 0.5 * (p[k].fmr + p[end].fmr);
    }
    if k == 0 {
        return 0.5 * (p[0].fmr + p[0].fnmr);
    }
    let (a, b) = (&p[k - 1], &p[k]);
    let lambda = d(k - 1) / (d(k - 1) - d(k));
    a.fmr + lambda * (b.fmr - a.fmr)
}

/// Probability that a genuine score beats an impostor one, ties counted
/// half.
pub fn auc(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::OneClass);
    }
    let mut i = impostor.to_vec();
    i.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for g in genuine {
        let below = i.partition_point(|s| s < g);
        let upto = i.partition_point(|s| s <= g);
        wins += below as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(wins / (genuine.len() * impostor.len()) as f64)
}

pub fn auc_of(records: &[ScoreRecord]) -> Result<f64> {
    let (g, i) = split(records);
    auc(&g, &i)
}

/// Signed percent change of `fused` against `best`.
pub fn relative_variation(fused: f64, best: f64) -> Result<f64> {
    if !(best > 0.0) {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (fused - best) / best)
}

pub const DET_HEADER: &str = "threshold,fmr,fnmr";

fn fmt_threshold(t: f64) -> String {
    if t.is_infinite() {
        if t > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{t:.6}")
    }
}

pub fn render_det(curve: &RateCurve) -> String {
    let mut s = format!("{DET_HEADER}\n");
    for p in &curve.points {
        writeln!(s, "{},{:.6},{:.6}", fmt_threshold(p.threshold), p.fmr, p.fnmr).unwrap();
    }
    s
}

pub fn det_export(curve: &RateCurve, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, render_det(curve))?)
}

pub fn parse_det(text: &str) -> Result<RateCurve> {
    let mut lines = text.lines();
    if lines.next() != Some(DET_HEADER) {
        return Err(Error::parse(1, format!("expected header {DET_HEADER:?}")));
    }
    let points = lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<f64> = l
                .split(',')
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 2, "bad number"))?;
            match f[..] {
                [threshold, fmr, fnmr] => Ok(RatePoint { threshold, fmr, fnmr }),
                _ => Err(Error::parse(i + 2, "expected 3 fields")),
            }
        })
        .collect::<Result<_>>()?;
    Ok(RateCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(curve: &RateCurve, t: f64) -> (f64, f64) {
        // rates at an arbitrary threshold equal those at the next curve point
        let p = curve.points.iter().find(|p| p.threshold >= t).unwrap();
        (p.fmr, p.fnmr)
    }

    #[test]
    fn rate_examples() {
        let c = rates_from_scores(&[0.8, 0.9], &[0.1, 0.2]).unwrap();
        assert_eq!(at(&c, 0.5), (0.0, 0.0));
        let first = c.points[0];
        let last = c.points[c.points.len() - 1];
        assert_eq!((first.threshold, first.fmr, first.fnmr), (f64::NEG_INFINITY, 1.0, 0.0));
        assert_eq!((last.threshold, last.fmr, last.fnmr), (f64::INFINITY, 0.0, 1.0));
        let c = rates_from_scores(&[0.9, 0.8, 0.6], &[0.1, 0.2, 0.7]).unwrap();
        assert_eq!(at(&c, 0.65), (1.0 / 3.0, 1.0 / 3.0));
        assert!(matches!(rates_from_scores(&[], &[0.1]), Err(Error::OneClass)));
    }

    #[test]
    fn eer_examples() {
        assert_eq!(eer(&rates_from_scores(&[0.8, 0.9], &[0.1, 0.2]).unwrap()), 0.0);
        assert!((eer(&rates_from_scores(&[0.9, 0.8, 0.6], &[0.1, 0.2, 0.7]).unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        let same = [0.1, 0.4, 0.4, 0.9];
        assert_eq!(eer(&rates_from_scores(&same, &same).unwrap()), 0.5);
        assert_eq!(eer(&rates_from_scores(&[0.3], &[0.3]).unwrap()), 0.5);
    }

    #[test]
    fn relative_variation_examples() {
        assert!((relative_variation(0.88, 1.24).unwrap() + 29.03).abs() < 0.01);
        assert!((relative_variation(0.78, 1.24).unwrap() + 37.10).abs() < 0.01);
        assert_eq!(relative_variation(1.24, 1.24).unwrap(), 0.0);
        assert!(matches!(relative_variation(0.5, 0.0), Err(Error::ZeroBaseline)));
    }

    #[test]
    fn det_layout_and_round_trip() {
        let c = RateCurve {
            points: vec![
                RatePoint { threshold: 0.1, fmr: 1.0, fnmr: 0.0 },
                RatePoint { threshold: 0.5, fmr: 0.5, fnmr: 0.25 },
                RatePoint { threshold: 0.9, fmr: 0.0, fnmr: 1.0 },
            ],
        };
        let text = render_det(&c);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_det(&text).unwrap(), c);
        assert_eq!(render_det(&RateCurve::default()), "threshold,fmr,fnmr\n");
        let full = rates_from_scores(&[0.123_456_7, 0.9], &[1.0 / 3.0]).unwrap();
        let back = parse_det(&render_det(&full)).unwrap();
        assert_eq!(render_det(&back), render_det(&full));
        let dir = tempfile::tempdir().unwrap();
        det_export(&full, dir.path().join("det.csv")).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("det.csv")).unwrap(), render_det(&full));
    }

    #[test]
    fn score_csv_round_trip() {
        let r = vec![
            ScoreRecord { matcher: "hh".into(), template_id: "f000/00".into(), probe_id: "f000/01".into(), label: Label::Genuine, raw: 0.5, normalized: Some(0.5) },
            ScoreRecord { matcher: "ridge".into(), template_id: "f000/00".into(), probe_id: "f001/04".into(), label: Label::Impostor, raw: 12.25, normalized: None },
        ];
        let text = render_scores(&r);
        assert!(text.starts_with("matcher,template_id,probe_id,label,raw,normalized\nhh,f000/00,f000/01,genuine,0.500000,0.500000\n"));
        assert_eq!(parse_scores(&text).unwrap(), r);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.8, 0.9], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1], &[0.2, 0.05]).unwrap(), 0.5);
    }

    /// Independent sweep: every distinct score as a threshold, rates by
    /// plain counting, then the same crossing rule.
    fn brute_eer(g: &[f64], i: &[f64]) -> f64 {
        let mut ts: Vec<f64> = g.iter().chain(i).copied().collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        let mut pts = vec![(1.0, 0.0)];
        for t in &ts {
            let fmr = i.iter().filter(|s| *s >= t).count() as f64 / i.len() as f64;
            let fnmr = g.iter().filter(|s| *s < t).count() as f64 / g.len() as f64;
            pts.push((fmr, fnmr));
        }
        pts.push((0.0, 1.0));
        for k in 0..pts.len() {
            let (f, n) = pts[k];
            if f == n {
                let mut e = k;
                while e + 1 < pts.len() && pts[e + 1].0 == pts[e + 1].1 {
                    e += 1;
                }
                return (f + pts[e].0) / 2.0;
            }
            if f < n {
                let (f0, n0) = pts[k - 1];
                // solve f0 + s (f - f0) = n0 + s (n - n0)
                let s = (f0 - n0) / ((f0 - n0) - (f - n));
                return f0 + s * (f - f0);
            }
        }
        unreachable!()
    }

    fn score_set() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        // coarse grid values make ties and plateaus common
        let s = prop_oneof![(0u32..20).prop_map(|v| v as f64 / 20.0), 0.0..1.0f64];
        (proptest::collection::vec(s.clone(), 1..100), proptest::collection::vec(s, 1..100))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn eer_matches_brute_force((g, i) in score_set()) {
            let e = eer(&rates_from_scores(&g, &i).unwrap());
            let b = brute_eer(&g, &i);
            prop_assert!((e - b).abs() < 1e-12, "{} vs {}", e, b);
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn curves_are_monotone((g, i) in score_set()) {
            let c = rates_from_scores(&g, &i).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[1].fmr <= w[0].fmr && w[1].fnmr >= w[0].fnmr);
            }
        }

        #[test]
        fn eer_ignores_increasing_maps((g, i) in score_set(), a in 0.1..5.0f64, b in -3.0..3.0f64, p in 0.2..3.0f64) {
            let f = |s: &f64| a * (s + 0.01).powf(p) + b;
            let e0 = eer(&rates_from_scores(&g, &i).unwrap());
            let (g2, i2): (Vec<f64>, Vec<f64>) = (g.iter().map(f).collect(), i.iter().map(f).collect());
            let e1 = eer(&rates_from_scores(&g2, &i2).unwrap());
            prop_assert!((e0 - e1).abs() < 1e-12);
        }
    }
}
