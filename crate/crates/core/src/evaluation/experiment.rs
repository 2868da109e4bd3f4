use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::protocol::{load_features, score_trials};
use super::report::all_subsets;
use super::{auc_of, compute_rates, eer, fusion_report, render_det, render_scores, Corpus, FusionReport, Protocol, RateCurve, ScoreRecord};
use crate::error::{Error, Result};
use crate::fusion::{FusionRule, Normalizer};
use crate::matcher::MatcherKind;
use crate::pipeline::{compare, features_for, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    None,
    /// All selected matchers fused with the max rule.
    Max,
    /// All selected matchers fused with the sum rule.
    Sum,
    /// Every subset of two or more matchers under both rules.
    #[default]
    AllSubsets,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FusionMode::None),
            "max" => Ok(FusionMode::Max),
            "sum" => Ok(FusionMode::Sum),
            "all-subsets" => Ok(FusionMode::AllSubsets),
            other => Err(Error::InvalidParameter(format!("unknown fusion mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::None => "none",
            FusionMode::Max => "max",
            FusionMode::Sum => "sum",
            FusionMode::AllSubsets => "all-subsets",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub matchers: Vec<MatcherKind>,
    pub fusion: FusionMode,
    pub protocol: Protocol,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            matchers: MatcherKind::ALL.to_vec(),
            fusion: FusionMode::AllSubsets,
            protocol: Protocol::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherRun {
    pub kind: MatcherKind,
    /// In trial order, normalized scores filled in.
    pub records: Vec<ScoreRecord>,
    pub normalizer: Normalizer,
    pub curve: RateCurve,
    pub eer: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub runs: Vec<MatcherRun>,
    pub fusion: Option<FusionReport>,
}

/// Features once per image, every trial for every matcher, per-matcher
/// calibration on the pooled raw scores, then fusion.
pub fn run_experiment(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.pipeline.validate()?;
    if cfg.matchers.is_empty() {
        return Err(Error::InvalidParameter("no matchers selected".into()));
    }
    let trials = cfg.protocol.trials(corpus);
    let features = load_features(corpus, &trials, |img| features_for(img, &cfg.matchers, &cfg.pipeline))?;
    let mut runs = Vec::new();
    for (k, &kind) in cfg.matchers.iter().enumerate() {
        let mut records = score_trials(&trials, &features, kind.id(), |a, b| compare(kind, &a[k], &b[k], &cfg.pipeline))?;
        let raw: Vec<f64> = records.iter().map(|r| r.raw).collect();
        let normalizer = Normalizer::calibrated(kind.norm_kind(), &raw)?;
        for r in &mut records {
            r.normalized = Some(normalizer.apply(r.raw)?);
        }
        let curve = compute_rates(&records)?;
        let (e, a) = (eer(&curve), auc_of(&records)?);
        runs.push(MatcherRun { kind, records, normalizer, curve, eer: e, auc: a });
    }
    let n = runs.len();
    let plan: Option<(Vec<Vec<usize>>, Vec<FusionRule>)> = match cfg.fusion {
        _ if n < 2 => None,
        FusionMode::None => None,
        FusionMode::Max => Some((vec![(0..n).collect()], vec![FusionRule::Max])),
        FusionMode::Sum => Some((vec![(0..n).collect()], vec![FusionRule::Sum])),
        FusionMode::AllSubsets => Some((all_subsets(n), vec![FusionRule::Max, FusionRule::Sum])),
    };
    let fusion = match plan {
        Some((subsets, rules)) => {
            let per: Vec<(String, Vec<ScoreRecord>)> = runs.iter().map(|r| (r.kind.id().to_string(), r.records.clone())).collect();
            Some(fusion_report(&per, &subsets, &rules)?)
        }
        None => None,
    };
    Ok(Experiment { runs, fusion })
}

impl Experiment {
    pub fn render_summary(&self) -> String {
        let mut s = String::new();
        for r in &self.runs {
            let g = r.records.iter().filter(|x| x.label == super::Label::Genuine).count();
            writeln!(
                s,
                "matcher={} genuine={} impostor={} eer={:.6} auc={:.6} norm={} c={}",
                r.kind,
                g,
                r.records.len() - g,
                r.eer,
                r.auc,
                r.normalizer.kind,
                r.normalizer.c
            )
            .unwrap();
        }
        s
    }

    pub fn render_normalizers(&self) -> String {
        self.runs.iter().map(|r| r.normalizer.to_line(r.kind.id()) + "\n").collect()
    }

    /// `scores_<id>.csv`, `det_<id>.csv`, `normalizers.txt`, `summary.txt`
    /// and, with fusion, `fusion_report.txt`, `fusion_report.csv` and one
    /// `det_fused_<subset>_<rule>.csv` per row.
    pub fn write(&self, out: impl AsRef<Path>) -> Result<()> {
        let out = out.as_ref();
        fs::create_dir_all(out)?;
        for r in &self.runs {
            fs::write(out.join(format!("scores_{}.csv", r.kind)), render_scores(&r.records))?;
            fs::write(out.join(format!("det_{}.csv", r.kind)), render_det(&r.curve))?;
        }
        fs::write(out.join("normalizers.txt"), self.render_normalizers())?;
        fs::write(out.join("summary.txt"), self.render_summary())?;
        if let Some(rep) = &self.fusion {
            fs::write(out.join("fusion_report.txt"), rep.render_text())?;
            fs::write(out.join("fusion_report.csv"), rep.render_csv())?;
            for row in &rep.rows {
                let name = format!("det_fused_{}_{}.csv", row.subset.replace('+', "-"), row.rule);
                fs::write(out.join(name), render_det(&row.curve))?;
            }
        }
        Ok(())
    }
}
