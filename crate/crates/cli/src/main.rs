//! `fpv`: synthesis, extraction, matching and evaluation from the shell.
//!
//! Exit codes: 0 success, 2 domain error, 64 usage or configuration error,
//! 74 I/O error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpv_core::evaluation::FusionMode;
use fpv_core::matcher::MatcherKind;
use fpv_core::pipeline::Method;

use config::Settings;
use error::{CliError, Stage};

#[derive(Debug, Parser)]
#[command(name = "fpv", version, about = "Fingerprint verification toolkit")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render every entry of a spec file to `<name>.pgm` and `<name>.gt`.
    Synth { spec: PathBuf, out: PathBuf },
    /// Write a seeded multi-impression corpus (`corpus.*` keys).
    Corpus { out: PathBuf },
    /// Extract a minutia template from a PGM image.
    Extract {
        image: PathBuf,
        out: PathBuf,
        #[arg(long, value_parser = ["symmetry", "skeleton"], default_value = "symmetry")]
        method: String,
    },
    /// Extract a FingerCode from a PGM image.
    Fingercode { image: PathBuf, out: PathBuf },
    /// Compare two inputs and print one score line.
    Match {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_parser = ["hh", "compat", "elastic", "ridge"])]
        matcher: String,
        /// Normalizer file as written by `eval`.
        #[arg(long)]
        norm: Option<PathBuf>,
    },
    /// Run the genuine/impostor protocol on a corpus directory.
    Eval {
        corpus: PathBuf,
        out: PathBuf,
        /// Comma-separated matcher ids.
        #[arg(long)]
        matchers: Option<String>,
        #[arg(long, value_parser = ["none", "max", "sum", "all-subsets"])]
        fusion: Option<String>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the effective configuration.
    Config,
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).stage(format!("reading {}", path.display()))?;
        s.apply_text(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
    }
    for kv in &cli.overrides {
        s.apply_override(kv)?;
    }
    if let Command::Eval { matchers, fusion, .. } = &cli.command {
        if let Some(m) = matchers {
            s.set("eval.matchers", m, None)
                .map_err(|_| CliError::Usage(format!("bad matcher list {m:?}")))?;
        }
        if let Some(f) = fusion {
            s.fusion = f.parse::<FusionMode>().map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    s.validate()?;
    Ok(s)
}

fn thread_pool(threads: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = settings(&cli)?;
    match &cli.command {
        Command::Eval { threads, .. } => thread_pool(threads.unwrap_or(0))?,
        _ => thread_pool(1)?,
    }
    match &cli.command {
        Command::Synth { spec, out } => {
            let n = commands::synth(spec, out)?;
            println!("wrote {n} images to {}", out.display());
        }
        Command::Corpus { out } => {
            let n = commands::corpus(&s, out)?;
            println!("wrote {n} fingers to {}", out.display());
        }
        Command::Extract { image, out, method } => {
            let method: Method = method.parse().map_err(|e: fpv_core::Error| CliError::Usage(e.to_string()))?;
            let n = commands::extract(&s, image, method, out)?;
            println!("minutiae={n}");
        }
        Command::Fingercode { image, out } => {
            let n = commands::fingercode(&s, image, out)?;
            println!("valid_cells={n}");
        }
        Command::Match { a, b, matcher, norm } => {
            let kind: MatcherKind = matcher.parse().map_err(|e: fpv_core::Error| CliError::Usage(e.to_string()))?;
            println!("{}", commands::match_files(&s, kind, a, b, norm.as_deref())?);
        }
        Command::Eval { corpus, out, .. } => {
            print!("{}", commands::eval(&s, corpus, out)?);
        }
        Command::Config => print!("{}", s.render()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
