use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{Label, ScoreRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FingerEntry {
    pub id: String,
    /// Impression ids (file stems), sorted.
    pub impressions: Vec<String>,
    pub template: String,
    /// Impression used as the probe when this finger plays the impostor.
    pub impostor: String,
}

/// `root/<finger>/<impression>.pgm`, roles from `root/manifest.txt` when
/// present (`<finger> template=<id> impostor=<id>` per line), otherwise
/// the first and last impressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub fingers: Vec<FingerEntry>,
}

fn stems(dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    out.sort();
    Ok(out)
}

impl Corpus {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let manifest = root.join("manifest.txt");
        let mut problems = Vec::new();
        let mut fingers = Vec::new();
        if manifest.exists() {
            let text = fs::read_to_string(&manifest)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split_whitespace().collect();
                let role = |key: &str| f.iter().find_map(|x| x.strip_prefix(key)).map(str::to_string);
                let (Some(template), Some(impostor)) = (role("template="), role("impostor=")) else {
                    return Err(Error::parse(i + 1, "expected \"<finger> template=<id> impostor=<id>\""));
                };
                let dir = root.join(f[0]);
                let impressions = if dir.is_dir() { stems(&dir)? } else { Vec::new() };
                for id in [&template, &impostor] {
                    if !impressions.contains(id) {
                        problems.push(format!("missing file {}", dir.join(format!("{id}.pgm")).display()));
                    }
                }
                fingers.push(FingerEntry { id: f[0].to_string(), impressions, template, impostor });
            }
        } else if root.is_dir() {
            let mut dirs: Vec<PathBuf> = fs::read_dir(&root)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
            dirs.sort();
            for dir in dirs {
                let impressions = stems(&dir)?;
                if impressions.is_empty() {
                    continue;
                }
                let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let (template, impostor) = (impressions[0].clone(), impressions[impressions.len() - 1].clone());
                fingers.push(FingerEntry { id, impressions, template, impostor });
            }
        }
        if fingers.is_empty() && problems.is_empty() {
            return Err(Error::NoFingers(root));
        }
        fingers.sort_by(|a, b| a.id.cmp(&b.id));
        for f in &fingers {
            if f.impressions.len() < 2 {
                problems.push(format!("finger {} has {} impression(s), at least 2 are required", f.id, f.impressions.len()));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Corpus(problems));
        }
        Ok(Self { root, fingers })
    }

    pub fn path_of(&self, finger: &str, impression: &str) -> PathBuf {
        self.root.join(finger).join(format!("{impression}.pgm"))
    }
}

/// Which trials to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protocol {
    /// Template against every other impression of its finger.
    pub genuine: bool,
    /// Template against the designated impostor impression of every other
    /// finger.
    pub impostor: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { genuine: true, impostor: true }
    }
}

/// One comparison: ids are `<finger>/<impression>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trial {
    pub template_id: String,
    pub probe_id: String,
    pub label: Label,
}

impl Protocol {
    /// Ordered by template finger, then probe id.
    pub fn trials(&self, corpus: &Corpus) -> Vec<Trial> {
        let mut out = Vec::new();
        for f in &corpus.fingers {
            let template_id = format!("{}/{}", f.id, f.template);
            let mut probes: Vec<(String, Label)> = Vec::new();
            if self.genuine {
                probes.extend(f.impressions.iter().filter(|i| **i != f.template).map(|i| (format!("{}/{i}", f.id), Label::Genuine)));
            }
            if self.impostor {
                probes.extend(corpus.fingers.iter().filter(|g| g.id != f.id).map(|g| (format!("{}/{}", g.id, g.impostor), Label::Impostor)));
            }
            probes.sort();
            out.extend(probes.into_iter().map(|(probe_id, label)| Trial { template_id: template_id.clone(), probe_id, label }));
        }
        out
    }
}

/// Loads every image the trials touch, computes features once per image
/// (in parallel, collected in a fixed order) and scores each trial.
/// Unreadable files and failed extractions are reported together.
pub fn run_protocol<F, E, C>(
    corpus: &Corpus,
    protocol: &Protocol,
    matcher_id: &str,
    extract: E,
    compare: C,
) -> Result<Vec<ScoreRecord>>
where
    F: Send + Sync,
    E: Fn(&crate::imageio::GrayImage) -> Result<F> + Sync,
    C: Fn(&F, &F) -> Result<f64> + Sync,
{
    let trials = protocol.trials(corpus);
    let features = load_features(corpus, &trials, |img| extract(img))?;
    score_trials(&trials, &features, matcher_id, compare)
}

pub(crate) fn image_ids(trials: &[Trial]) -> Vec<String> {
    let mut ids: Vec<String> = trials.iter().flat_map(|t| [t.template_id.clone(), t.probe_id.clone()]).collect();
    ids.sort();
    ids.dedup();
    ids
}

pub(crate) fn load_features<F: Send>(
    corpus: &Corpus,
    trials: &[Trial],
    extract: impl Fn(&crate::imageio::GrayImage) -> Result<F> + Sync,
) -> Result<BTreeMap<String, F>> {
    let ids = image_ids(trials);
    let results: Vec<(String, Result<F>)> = ids
        .par_iter()
        .map(|id| {
            let (finger, imp) = id.split_once('/').expect("ids are finger/impression");
            let path = corpus.path_of(finger, imp);
            let r = crate::imageio::load_pgm(&path).and_then(|img| extract(&img));
            (id.clone(), r)
        })
        .collect();
    let mut ok = BTreeMap::new();
    let mut problems = Vec::new();
    for (id, r) in results {
        match r {
            Ok(f) => {
                ok.insert(id, f);
            }
            Err(e) => problems.push(format!("{}: {e}", corpus.root.join(format!("{id}.pgm")).display())),
        }
    }
    if problems.is_empty() {
        Ok(ok)
    } else {
        Err(Error::Corpus(problems))
    }
}

pub(crate) fn score_trials<F: Sync>(
    trials: &[Trial],
    features: &BTreeMap<String, F>,
    matcher_id: &str,
    compare: impl Fn(&F, &F) -> Result<f64> + Sync,
) -> Result<Vec<ScoreRecord>> {
    let scored: Vec<Result<ScoreRecord>> = trials
        .par_iter()
        .map(|t| {
            let raw = compare(&features[&t.template_id], &features[&t.probe_id])?;
            Ok(ScoreRecord {
                matcher: matcher_id.to_string(),
                template_id: t.template_id.clone(),
                probe_id: t.probe_id.clone(),
                label: t.label,
                raw,
                normalized: None,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(scored.len());
    let mut problems = Vec::new();
    for (t, r) in trials.iter().zip(scored) {
        match r {
            Ok(rec) => out.push(rec),
            Err(e) => problems.push(format!("{} vs {}: {e}", t.template_id, t.probe_id)),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::Corpus(problems))
    }
}
