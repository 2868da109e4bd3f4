//! Plain-text `key = value` configuration with namespaced keys.

use std::fmt::Write as _;
use std::str::FromStr;

use fpv_core::evaluation::{FusionMode, Protocol};
use fpv_core::imageio::CorpusParams;
use fpv_core::matcher::elastic::Assignment;
use fpv_core::matcher::ridge::Statistic;
use fpv_core::matcher::MatcherKind;
use fpv_core::pipeline::PipelineConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub corpus: CorpusParams,
    pub fusion: FusionMode,
    pub matchers: Vec<MatcherKind>,
    pub protocol: Protocol,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            corpus: CorpusParams::default(),
            fusion: FusionMode::AllSubsets,
            matchers: MatcherKind::ALL.to_vec(),
            protocol: Protocol::default(),
        }
    }
}

trait Value: Sized {
    fn read(s: &str) -> Option<Self>;
    fn show(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn read(s: &str) -> Option<Self> {
                s.parse().ok()
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(usize, u8, u64, bool, FusionMode, Assignment, Statistic);

impl Value for f64 {
    fn read(s: &str) -> Option<Self> {
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for Vec<MatcherKind> {
    fn read(s: &str) -> Option<Self> {
        let v: Option<Vec<MatcherKind>> = s.split(',').map(|p| MatcherKind::from_str(p.trim()).ok()).collect();
        v.filter(|v| !v.is_empty())
    }
    fn show(&self) -> String {
        self.iter().map(|k| k.id()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! keys {
    ($($key:literal => $($field:tt).+),* $(,)?) => {
        /// Every accepted key, in file order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_field(s: &mut Settings, key: &str, value: &str) -> Option<bool> {
            match key {
                $($key => Some(match Value::read(value) {
                    Some(v) => {
                        s.$($field).+ = v;
                        true
                    }
                    None => false,
                }),)*
                _ => None,
            }
        }

        fn get_field(s: &Settings, key: &str) -> Option<String> {
            match key {
                $($key => Some(s.$($field).+.show()),)*
                _ => None,
            }
        }
    };
}

keys! {
    "symmetry.sigma_deriv" => pipeline.symmetry.filter.sigma_deriv,
    "symmetry.sigma_avg" => pipeline.symmetry.filter.sigma_avg,
    "symmetry.sigma_para" => pipeline.symmetry.filter.sigma_para,
    "symmetry.filter_order" => pipeline.symmetry.filter.filter_order,
    "symmetry.target_mean" => pipeline.symmetry.target_mean,
    "symmetry.target_std" => pipeline.symmetry.target_std,
    "symmetry.enhance_sigma" => pipeline.symmetry.enhance_sigma,
    "symmetry.segment_threshold" => pipeline.symmetry.segment_threshold,
    "quality.block" => pipeline.symmetry.quality_block,
    "quality.contrast" => pipeline.symmetry.quality.contrast,
    "quality.coherence_low" => pipeline.symmetry.quality.coherence_low,
    "quality.coherence_high" => pipeline.symmetry.quality.coherence_high,
    "quality.curvature" => pipeline.symmetry.quality.curvature,
    "extract.nms_window" => pipeline.extraction.nms_window,
    "extract.surround_radius" => pipeline.extraction.surround_radius,
    "extract.surround_ls_min" => pipeline.extraction.surround_ls_min,
    "extract.min_peak" => pipeline.extraction.min_peak,
    "extract.max_minutiae" => pipeline.extraction.max_minutiae,
    "extract.binarization_block" => pipeline.extraction.binarization_block,
    "extract.spur_max_len" => pipeline.extraction.spur_max_len,
    "extract.lake_max_perimeter" => pipeline.extraction.lake_max_perimeter,
    "extract.min_separation" => pipeline.extraction.min_separation,
    "extract.trace_len" => pipeline.extraction.trace_len,
    "extract.valley_snap" => pipeline.extraction.valley_snap,
    "hh.lambda_dist" => pipeline.hh.lambda_dist,
    "hh.lambda_angle" => pipeline.hh.lambda_angle,
    "hh.gamma_tol" => pipeline.hh.gamma_tol,
    "hh.area_half" => pipeline.hh.area_half,
    "hh.ls_area_min" => pipeline.hh.ls_area_min,
    "compat.tol_dist" => pipeline.compat.tol_dist,
    "compat.tol_angle" => pipeline.compat.tol_angle,
    "compat.tol_cluster_rot" => pipeline.compat.tol_cluster_rot,
    "compat.top_k" => pipeline.compat.top_k,
    "elastic.w0" => pipeline.elastic.w0,
    "elastic.h0" => pipeline.elastic.h0,
    "elastic.k" => pipeline.elastic.k,
    "elastic.angle_tol" => pipeline.elastic.angle_tol,
    "elastic.assignment" => pipeline.elastic.assignment,
    "ridge.frequency" => pipeline.ridge.bank.frequency,
    "ridge.sigma_x" => pipeline.ridge.bank.sigma_x,
    "ridge.sigma_y" => pipeline.ridge.bank.sigma_y,
    "ridge.cell_size" => pipeline.ridge.cell_size,
    "ridge.statistic" => pipeline.ridge.statistic,
    "ridge.min_coverage" => pipeline.ridge.min_coverage,
    "ridge.min_overlap" => pipeline.ridge.min_overlap,
    "fusion.rule" => fusion,
    "eval.matchers" => matchers,
    "eval.genuine" => protocol.genuine,
    "eval.impostor" => protocol.impostor,
    "corpus.fingers" => corpus.fingers,
    "corpus.impressions" => corpus.impressions,
    "corpus.width" => corpus.width,
    "corpus.height" => corpus.height,
    "corpus.freq_min" => corpus.freq_range.0,
    "corpus.freq_max" => corpus.freq_range.1,
    "corpus.dislocations_min" => corpus.dislocation_range.0,
    "corpus.dislocations_max" => corpus.dislocation_range.1,
    "corpus.min_separation" => corpus.min_separation,
    "corpus.margin" => corpus.margin,
    "corpus.max_rotation" => corpus.max_rotation,
    "corpus.max_translation" => corpus.max_translation,
    "corpus.max_noise" => corpus.max_noise,
    "corpus.template_noise" => corpus.template_noise,
    "corpus.seed" => corpus.seed,
}

impl Settings {
    /// Sets one key. `line` only decorates error messages.
    pub fn set(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), CliError> {
        let at = line.map(|l| format!("line {l}: ")).unwrap_or_default();
        match set_field(self, key, value) {
            Some(true) => Ok(()),
            Some(false) => Err(CliError::Config(format!("{at}bad value {value:?} for {key}"))),
            None => Err(CliError::Config(format!("{at}unknown key {key:?}"))),
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        get_field(self, key)
    }

    /// Applies a config file on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim(), Some(i + 1))?;
        }
        Ok(())
    }

    /// `key=value` as given to `--set`.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim(), None)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let c = &self.corpus;
        let ok = c.fingers > 0
            && c.impressions >= 2
            && c.width >= 16
            && c.height >= 16
            && c.freq_range.0 > 0.0
            && c.freq_range.0 <= c.freq_range.1
            && c.dislocation_range.0 <= c.dislocation_range.1
            && c.min_separation >= 0.0
            && c.margin >= 0.0
            && c.max_rotation >= 0.0
            && c.max_translation >= 0.0
            && c.max_noise >= 0.0
            && c.template_noise >= 0.0;
        if !ok {
            return Err(CliError::Config("invalid corpus parameters".into()));
        }
        if !(self.protocol.genuine || self.protocol.impostor) {
            return Err(CliError::Config("eval.genuine and eval.impostor are both off".into()));
        }
        Ok(())
    }

    /// Every key with its current value, loadable by `apply_text`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("listed key"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut s = Settings::default();
        s.set("hh.lambda_dist", "6.5", None).unwrap();
        s.set("eval.matchers", "ridge, hh", None).unwrap();
        s.set("ridge.statistic", "variance", None).unwrap();
        let mut t = Settings::default();
        t.apply_text(&s.render()).unwrap();
        assert_eq!(s, t);
        assert_eq!(t.matchers, vec![MatcherKind::Ridge, MatcherKind::Hh]);
    }

    #[test]
    fn unknown_key_and_bad_value() {
        let mut s = Settings::default();
        let e = s.apply_text("# fine\nhh.lambda_dist = 4\nhh.nope = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 3") && e.to_string().contains("hh.nope"));
        assert!(s.set("ridge.cell_size", "-3", None).is_err());
        assert!(s.set("fusion.rule", "median", None).is_err());
        assert!(s.apply_override("elastic.k").is_err());
    }

    #[test]
    fn validation_catches_module_invariants() {
        let mut s = Settings::default();
        s.set("extract.nms_window", "4", None).unwrap();
        assert!(s.validate().is_err());
        let mut s = Settings::default();
        s.set("ridge.min_overlap", "1.5", None).unwrap();
        assert!(s.validate().is_err());
        assert!(Settings::default().validate().is_ok());
    }
}
