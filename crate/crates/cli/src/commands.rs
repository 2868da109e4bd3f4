use std::fs;
use std::path::Path;

use fpv_core::evaluation::{run_experiment, Corpus, ExperimentConfig};
use fpv_core::fusion::Normalizer;
use fpv_core::imageio::{decode_pgm, parse_spec_file, save_pgm, synthesize_fingerprint, write_ground_truth, GrayImage};
use fpv_core::matcher::ridge::{ridge_features, FingerCode};
use fpv_core::matcher::MatcherKind;
use fpv_core::minutiae::{detect_minutiae_symmetry, parse_template, write_template};
use fpv_core::pipeline::{compare, extract_skeleton_from, features_for, Features, Method};
use fpv_core::symmetry::compute_fields;

use crate::config::Settings;
use crate::error::{CliError, Stage};

/// File kinds recognized by their leading bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Image,
    Template,
    FingerCode,
}

pub fn detect_input(bytes: &[u8]) -> Option<InputKind> {
    if bytes.starts_with(b"P5") {
        Some(InputKind::Image)
    } else if bytes.starts_with(b"FPT1") {
        Some(InputKind::Template)
    } else if bytes.starts_with(b"FC ") {
        Some(InputKind::FingerCode)
    } else {
        None
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).stage(format!("reading {}", path.display()))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, data).stage(format!("writing {}", path.display()))
}

fn load_image(path: &Path) -> Result<GrayImage, CliError> {
    decode_pgm(&read(path)?).stage(format!("loading {}", path.display()))
}

pub fn synth(spec: &Path, out: &Path) -> Result<usize, CliError> {
    let text = String::from_utf8(read(spec)?)
        .map_err(|_| CliError::Usage(format!("{} is not UTF-8 text", spec.display())))?;
    let entries = parse_spec_file(&text).stage(format!("spec file {}", spec.display()))?;
    fs::create_dir_all(out).stage(format!("creating {}", out.display()))?;
    for (name, s) in &entries {
        let (img, truth) = synthesize_fingerprint(s).stage(format!("synthesizing {name}"))?;
        save_pgm(&img, out.join(format!("{name}.pgm"))).stage(format!("writing {name}.pgm"))?;
        write_ground_truth(&truth, out.join(format!("{name}.gt"))).stage(format!("writing {name}.gt"))?;
    }
    Ok(entries.len())
}

pub fn corpus(settings: &Settings, out: &Path) -> Result<usize, CliError> {
    let fingers = settings.corpus.write(out).stage("corpus generation")?;
    Ok(fingers.len())
}

pub fn extract(settings: &Settings, image: &Path, method: Method, out: &Path) -> Result<usize, CliError> {
    let img = load_image(image)?;
    let p = &settings.pipeline;
    let fields = compute_fields(&img, &p.symmetry).stage("symmetry fields")?;
    let t = match method {
        Method::Symmetry => {
            detect_minutiae_symmetry(&fields.psi, &fields.ls, &fields.mask, &p.extraction).stage("symmetry detection")?
        }
        Method::Skeleton => extract_skeleton_from(&fields, &p.extraction).stage("skeleton extraction")?,
    };
    write_template(&t, out).stage(format!("writing {}", out.display()))?;
    Ok(t.len())
}

pub fn fingercode(settings: &Settings, image: &Path, out: &Path) -> Result<usize, CliError> {
    let img = load_image(image)?;
    let p = &settings.pipeline;
    let code = ridge_features(&img, &p.symmetry, &p.ridge).stage("fingercode extraction")?;
    code.write(out).stage(format!("writing {}", out.display()))?;
    Ok(code.valid_count())
}

fn input_error(kind: MatcherKind, path: &Path, what: &str) -> CliError {
    CliError::Input(format!("matcher {kind} cannot use {} ({what})", path.display()))
}

/// Features of one input file for `kind`, extracting from images when needed.
fn features_of(settings: &Settings, kind: MatcherKind, path: &Path) -> Result<Features, CliError> {
    let bytes = read(path)?;
    let name = path.display();
    match detect_input(&bytes) {
        Some(InputKind::Image) => {
            let img = decode_pgm(&bytes).stage(format!("loading {name}"))?;
            let mut f = features_for(&img, &[kind], &settings.pipeline).stage(format!("features of {name}"))?;
            Ok(f.pop().expect("one matcher requested"))
        }
        Some(InputKind::Template) => match kind {
            MatcherKind::Compat | MatcherKind::Elastic => {
                let text = String::from_utf8_lossy(&bytes);
                Ok(Features::Minutiae(parse_template(&text).stage(format!("template {name}"))?))
            }
            _ => Err(input_error(kind, path, "minutia template")),
        },
        Some(InputKind::FingerCode) => match kind {
            MatcherKind::Ridge => {
                let text = String::from_utf8_lossy(&bytes);
                Ok(Features::Ridge(FingerCode::parse(&text).stage(format!("fingercode {name}"))?))
            }
            _ => Err(input_error(kind, path, "FingerCode")),
        },
        None => Err(CliError::Input(format!("{name}: unrecognized file type"))),
    }
}

fn normalizer_for(path: &Path, kind: MatcherKind) -> Result<Normalizer, CliError> {
    let text = String::from_utf8_lossy(&read(path)?).into_owned();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, n) = Normalizer::parse_line(line)
            .map_err(|e| CliError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if id == kind.id() {
            return Ok(n);
        }
    }
    Err(CliError::Input(format!("{} has no normalizer for {kind}", path.display())))
}

/// `matcher=<id> raw=<v>`, plus ` norm=<v>` when a normalizer file is given.
pub fn match_files(
    settings: &Settings,
    kind: MatcherKind,
    a: &Path,
    b: &Path,
    norm: Option<&Path>,
) -> Result<String, CliError> {
    let normalizer = norm.map(|p| normalizer_for(p, kind)).transpose()?;
    let fa = features_of(settings, kind, a)?;
    let fb = features_of(settings, kind, b)?;
    let raw = compare(kind, &fa, &fb, &settings.pipeline).stage("matching")?;
    let mut line = format!("matcher={kind} raw={raw:.6}");
    if let Some(n) = normalizer {
        let v = n.apply(raw).stage("normalization")?;
        line.push_str(&format!(" norm={v:.6}"));
    }
    Ok(line)
}

/// Runs the experiment and writes every artifact; returns the summary.
pub fn eval(settings: &Settings, corpus_dir: &Path, out: &Path) -> Result<String, CliError> {
    let corpus = Corpus::open(corpus_dir).stage("corpus")?;
    let cfg = ExperimentConfig {
        matchers: settings.matchers.clone(),
        fusion: settings.fusion,
        protocol: settings.protocol.clone(),
        pipeline: settings.pipeline.clone(),
    };
    let exp = run_experiment(&corpus, &cfg).stage("evaluation")?;
    exp.write(out).stage(format!("writing {}", out.display()))?;
    write(&out.join("config.txt"), settings.render())?;
    Ok(exp.render_summary())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_detection() {
        assert_eq!(detect_input(b"P5\n4 4\n255\n"), Some(InputKind::Image));
        assert_eq!(detect_input(b"FPT1 256 256 3 symmetry\n"), Some(InputKind::Template));
        assert_eq!(detect_input(b"FC 16 16 16\n"), Some(InputKind::FingerCode));
        assert_eq!(detect_input(b"P2\n"), None);
        assert_eq!(detect_input(b""), None);
    }
}
