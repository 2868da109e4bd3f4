use std::fmt::Write as _;
use std::path::Path;

use super::{Minutia, MinutiaKind, MinutiaTemplate};
use crate::error::{Error, Result};

const MAGIC: &str = "FPT1";

/// Header `FPT1 <w> <h> <count> <source>`, then `x y direction kind quality`
/// per minutia. Coordinates and directions carry two decimals.
pub fn render_template(t: &MinutiaTemplate) -> String {
    let mut s = format!("{MAGIC} {} {} {} {}\n", t.width, t.height, t.len(), t.source);
    for m in &t.minutiae {
        // normalize after rounding so 359.999 does not print as 360.00
        let mut dir = (m.direction * 100.0).round() / 100.0;
        if dir >= 360.0 {
            dir -= 360.0;
        }
        let _ = writeln!(
            s,
            "{:.2} {:.2} {:.2} {} {:.4}",
            m.x,
            m.y,
            dir,
            m.kind.code(),
            m.quality
        );
    }
    s
}

pub fn write_template(t: &MinutiaTemplate, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_template(t))?;
    Ok(())
}

pub fn read_template(path: impl AsRef<Path>) -> Result<MinutiaTemplate> {
    parse_template(&std::fs::read_to_string(path)?)
}

pub fn parse_template(text: &str) -> Result<MinutiaTemplate> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing template header"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 5 || f[0] != MAGIC {
        return Err(Error::parse(1, "expected 'FPT1 <width> <height> <count> <source>'"));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::parse(1, format!("invalid {what} '{s}'")))
    };
    let width = num(f[1], "width")?;
    let height = num(f[2], "height")?;
    let count = num(f[3], "count")?;
    let source = f[4].parse().map_err(|_| Error::parse(1, format!("unknown source '{}'", f[4])))?;
    let mut t = MinutiaTemplate::new(width, height, source);
    for (idx, line) in lines {
        let n = idx + 1;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(n, "expected 'x y direction kind quality'"));
        }
        let real = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(n, format!("invalid {what} '{s}'")))
        };
        let x = real(f[0], "x")?;
        let y = real(f[1], "y")?;
        let direction = real(f[2], "direction")?;
        let kind = MinutiaKind::from_code(f[3])
            .ok_or_else(|| Error::parse(n, format!("invalid kind '{}'", f[3])))?;
        let quality = real(f[4], "quality")?;
        if !(0.0..360.0).contains(&direction) {
            return Err(Error::parse(n, format!("direction {direction} outside [0, 360)")));
        }
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::parse(n, format!("quality {quality} outside [0, 1]")));
        }
        if x < 0.0 || y < 0.0 || x > width as f64 || y > height as f64 {
            return Err(Error::parse(n, format!("position ({x}, {y}) outside the image")));
        }
        t.minutiae.push(Minutia {
            x,
            y,
            direction,
            kind,
            quality,
        });
    }
    if t.len() != count {
        return Err(Error::parse(1, format!("header announces {count} minutiae, found {}", t.len())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::TemplateSource;
    use proptest::prelude::*;

    fn one() -> MinutiaTemplate {
        let mut t = MinutiaTemplate::new(64, 48, TemplateSource::Skeleton);
        t.minutiae.push(Minutia::new(10.5, 20.25, 45.0, MinutiaKind::Bifurcation, 0.75));
        t
    }

    #[test]
    fn single_minutia_layout() {
        let s = render_template(&one());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines, ["FPT1 64 48 1 skeleton", "10.50 20.25 45.00 B 0.7500"]);
        assert_eq!(parse_template(&s).unwrap(), one());
    }

    #[test]
    fn direction_out_of_range_is_rejected() {
        let text = "FPT1 64 64 1 symmetry\n1 2 400 U 0.5\n";
        match parse_template(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_lines_report_their_number() {
        for (text, at) in [
            ("FPT2 1 1 0 symmetry\n", 1),
            ("FPT1 64 64 2 symmetry\n1 2 3 U 0.5\n1 2 3 X 0.5\n", 3),
            ("FPT1 64 64 1 symmetry\n1 2 3 U\n", 2),
            ("FPT1 64 64 2 symmetry\n1 2 3 U 0.5\n", 1),
        ] {
            match parse_template(text).unwrap_err() {
                Error::Parse { line, .. } => assert_eq!(line, at, "{text}"),
                e => panic!("unexpected {e}"),
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.fpt");
        write_template(&one(), &p).unwrap();
        assert_eq!(read_template(&p).unwrap(), one());
    }

    fn grid_minutia() -> impl Strategy<Value = Minutia> {
        (0u32..25600, 0u32..25600, 0u32..36000, 0usize..3, 0u32..=10000).prop_map(
            |(x, y, d, k, q)| Minutia {
                x: x as f64 / 100.0,
                y: y as f64 / 100.0,
                direction: d as f64 / 100.0,
                kind: [MinutiaKind::Termination, MinutiaKind::Bifurcation, MinutiaKind::Unknown][k],
                quality: q as f64 / 10000.0,
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(ms in prop::collection::vec(grid_minutia(), 60)) {
            let t = MinutiaTemplate { width: 256, height: 256, source: TemplateSource::Symmetry, minutiae: ms };
            prop_assert_eq!(parse_template(&render_template(&t)).unwrap(), t);
        }
    }
}
