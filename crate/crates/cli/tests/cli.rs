use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpv"))
        .args(args)
        .output()
        .expect("spawn fpv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn spec_entries(n: usize) -> String {
    (0..n)
        .map(|i| {
            format!(
                "[p{i:02}]\nwidth = 128\nheight = 128\nfreq = 0.1\ntheta0 = {}\nnoise_std = 5\nseed = {i}\ndislocation = 60,60,1\n",
                i * 15
            )
        })
        .collect()
}

/// Small seeded corpus written through the CLI.
fn corpus(dir: &Path, fingers: usize, impressions: usize) -> PathBuf {
    let out = dir.join("corpus");
    let o = fpv(&[
        "--set",
        &format!("corpus.fingers={fingers}"),
        "--set",
        &format!("corpus.impressions={impressions}"),
        "corpus",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_every_entry_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.txt");
    fs::write(&spec, spec_entries(10)).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(fpv(&["synth", s(&spec), s(&a)]).status.success());
    assert!(fpv(&["synth", s(&spec), s(&b)]).status.success());
    let names = files(&a);
    assert_eq!(names.iter().filter(|n| n.ends_with(".pgm")).count(), 10);
    assert_eq!(names.iter().filter(|n| n.ends_with(".gt")).count(), 10);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn synth_reports_bad_line() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.txt");
    fs::write(&spec, "[x]\nwidth = 64\nheight = 64\nfreq = abc\n").unwrap();
    let o = fpv(&["synth", s(&spec), s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn extract_and_its_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path(), 1, 2);
    let img = c.join("f000/00.pgm");
    let out = tmp.path().join("t.fpt");
    for method in ["symmetry", "skeleton"] {
        let o = fpv(&["extract", s(&img), s(&out), "--method", method]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(&out).unwrap();
        let n: usize = text.split_whitespace().nth(3).unwrap().parse().unwrap();
        assert!(n >= 1, "{method}");
        assert!(text.starts_with("FPT1"));
    }

    let flat = tmp.path().join("flat.pgm");
    let mut bytes = b"P5\n64 64\n255\n".to_vec();
    bytes.extend(std::iter::repeat(128u8).take(64 * 64));
    fs::write(&flat, bytes).unwrap();
    let o = fpv(&["extract", s(&flat), s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no fingerprint area"));

    let o = fpv(&["extract", s(&img), s(&out), "--method", "minutiae"]);
    assert_eq!(o.status.code(), Some(64));
    let o = fpv(&["extract", s(&tmp.path().join("missing.pgm")), s(&out)]);
    assert_eq!(o.status.code(), Some(74));
}

#[test]
fn match_self_and_input_types() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path(), 1, 2);
    let img = c.join("f000/00.pgm");
    let o = fpv(&["match", s(&img), s(&img), "--matcher", "hh"]);
    assert_eq!(stdout(&o).trim(), "matcher=hh raw=1.000000");
    let o = fpv(&["match", s(&img), s(&img), "--matcher", "ridge"]);
    assert_eq!(stdout(&o).trim(), "matcher=ridge raw=0.000000");

    let fc = tmp.path().join("a.fc");
    assert!(fpv(&["fingercode", s(&img), s(&fc)]).status.success());
    let o = fpv(&["match", s(&fc), s(&img), "--matcher", "ridge"]);
    assert_eq!(stdout(&o).trim(), "matcher=ridge raw=0.000000");
    let o = fpv(&["match", s(&fc), s(&fc), "--matcher", "elastic"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FingerCode"));

    let t = tmp.path().join("a.fpt");
    assert!(fpv(&["extract", s(&img), s(&t), "--method", "skeleton"]).status.success());
    let o = fpv(&["match", s(&t), s(&t), "--matcher", "elastic"]);
    assert_eq!(stdout(&o).trim(), "matcher=elastic raw=1.000000");
    let o = fpv(&["match", s(&t), s(&t), "--matcher", "hh"]);
    assert_eq!(o.status.code(), Some(2));

    let o = fpv(&["match", s(&img), s(&img), "--matcher", "bozorth"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn eval_all_subsets_is_deterministic_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path(), 20, 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = fpv(&["eval", s(&c), s(&a), "--fusion", "all-subsets", "--threads", "1"]);
    assert!(oa.status.success(), "{}", stderr(&oa));
    let ob = fpv(&["eval", s(&c), s(&b), "--fusion", "all-subsets", "--threads", "4"]);
    assert!(ob.status.success(), "{}", stderr(&ob));
    assert_eq!(stdout(&oa), stdout(&ob));

    let names = files(&a);
    assert_eq!(names, files(&b));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let csv = fs::read_to_string(a.join("fusion_report.csv")).unwrap();
    for rule in ["max", "sum"] {
        let rows = csv.lines().skip(1).filter(|l| l.split(',').nth(1) == Some(rule)).count();
        assert_eq!(rows, 11, "{rule}");
    }

    // the written normalizers feed back into match
    let img = c.join("f000/00.pgm");
    let probe = c.join("f000/01.pgm");
    let o = fpv(&["match", s(&img), s(&probe), "--matcher", "compat", "--norm", s(&a.join("normalizers.txt"))]);
    let line = stdout(&o);
    assert!(line.starts_with("matcher=compat raw=") && line.contains(" norm="), "{line}");
}

#[test]
fn eval_single_matcher_without_fusion() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path(), 4, 3);
    let out = tmp.path().join("out");
    let o = fpv(&["eval", s(&c), s(&out), "--matchers", "ridge", "--fusion", "none"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("det_")).count(), 1);
    assert!(!names.iter().any(|n| n.starts_with("fusion_report")));
}

#[test]
fn eval_empty_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fpv(&["eval", s(tmp.path()), s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no fingers found"));
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fpv.conf");
    fs::write(&cfg, "# tuned\nhh.lambda_dist = 6   # tighter\nridge.cell_size = 24\n").unwrap();
    let o = fpv(&["--config", s(&cfg), "--set", "ridge.cell_size=32", "config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("hh.lambda_dist = 6\n"));
    assert!(text.contains("ridge.cell_size = 32\n"));

    fs::write(&cfg, "hh.lambda_dist = 6\nhh.typo = 1\n").unwrap();
    let o = fpv(&["--config", s(&cfg), "config"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("line 2"));

    let o = fpv(&["--set", "extract.nms_window=4", "config"]);
    assert_eq!(o.status.code(), Some(64));
}
