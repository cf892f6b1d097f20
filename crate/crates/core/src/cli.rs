//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::clifford::{irreducible_dimension, variant_classify, CliffordSystem, SystemFile};
use crate::error::{Error, Result};
use crate::focal::FdConfig;
use crate::json;
use crate::report;
use crate::yang_mills::{classify, ClassificationReport, ClassifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub const THREADS_ENV: &str = "CLIFFORD_YM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "clifford-ym", version, about = "Yang-Mills criteria for OT-FKM focal submanifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a Clifford system and write it as JSON.
    Build {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity suites and finite-difference checks on all families with m <= 4, k <= 3.
    Selftest {
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify one family and emit a report.
    Classify {
        #[command(flatten)]
        family: FamilyArgs,
        /// Read the system from a file written by `build` instead of constructing it.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every family up to a given `l` and write a CSV table.
    Scan {
        #[arg(long, default_value_t = 8)]
        max_l: usize,
        #[arg(long, default_value_t = 9)]
        max_m: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a report between JSON and CSV.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Block signs for m divisible by 4, e.g. `+,+,+,-`.
    #[arg(long, allow_hyphen_values = true)]
    pub signs: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Zero threshold for algebraic quantities (default 1e-9 n).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Relative tolerance for finite-difference comparisons.
    #[arg(long)]
    pub fd_tol: Option<f64>,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub fd_crosscheck: bool,
}

pub fn parse_signs(text: &str) -> Result<Vec<i8>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| match t.trim() {
            "+" | "+1" | "1" => Ok(1),
            "-" | "-1" => Ok(-1),
            other => Err(Error::InvalidInput(format!("block sign {other:?} is not + or -"))),
        })
        .collect()
}

impl FamilyArgs {
    fn system(&self) -> Result<CliffordSystem> {
        let m = self.m.ok_or_else(|| Error::InvalidInput("--m is required".into()))?;
        let k = self.k.ok_or_else(|| Error::InvalidInput("--k is required".into()))?;
        let signs = self.signs.as_deref().map(parse_signs).transpose()?.unwrap_or_default();
        CliffordSystem::new(m, k, &signs)
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

impl RunArgs {
    fn config(&self, s: &CliffordSystem) -> Result<ClassifyConfig> {
        if self.samples == 0 {
            return Err(Error::InvalidInput("--samples must be positive".into()));
        }
        let mut cfg = ClassifyConfig::new(s, self.samples, self.seed);
        if let Some(h) = self.fd_step {
            cfg.fd = FdConfig::with_step(h);
        }
        cfg.fd.validate()?;
        for (name, v) in [("--tol", self.tol), ("--fd-tol", self.fd_tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidInput(format!("{name} must be a positive number")));
                }
            }
        }
        if let Some(t) = self.tol {
            cfg.thresholds.zero_threshold = t;
        }
        if let Some(t) = self.fd_tol {
            cfg.thresholds.fd_relative_tol = t;
        }
        cfg.fd_crosscheck = self.fd_crosscheck;
        cfg.sequential = self.sequential;
        cfg.threads = threads_from_env()?;
        Ok(cfg)
    }
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvariantViolation { .. } | Error::DensityMismatch { .. } => EXIT_INVARIANT,
        Error::NonConvergence { .. }
        | Error::SingularJacobian { .. }
        | Error::DegenerateFrame { .. }
        | Error::TooManyFailures { .. } => EXIT_SOLVER,
        Error::InvalidInput(_)
        | Error::DimensionMismatch(_)
        | Error::Schema(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_CONFIG,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_status(r: &ClassificationReport) -> i32 {
    if r.verdicts.checks_passed {
        EXIT_OK
    } else {
        EXIT_INVARIANT
    }
}

/// Every constructible family with `l <= max_l` and `m <= max_m`; for
/// `m ≡ 0 (mod 4)` both the all-plus and the last-minus sign choices.
pub fn family_grid(max_l: usize, max_m: usize) -> Vec<(usize, usize, Vec<i8>)> {
    let mut out = Vec::new();
    for m in 1..=max_m.min(crate::clifford::MAX_M) {
        let delta = irreducible_dimension(m);
        for k in 1..=max_l / delta {
            if k * delta < m + 2 {
                continue;
            }
            if m % 4 == 0 {
                out.push((m, k, vec![1; k]));
                if k > 1 {
                    let mut s = vec![1; k];
                    s[k - 1] = -1;
                    out.push((m, k, s));
                }
            } else {
                out.push((m, k, Vec::new()));
            }
        }
    }
    out
}

fn selftest(samples: usize, seed: u64) -> Result<i32> {
    let start = Instant::now();
    let mut status = EXIT_OK;
    for (m, k, signs) in family_grid(12, 4).into_iter().filter(|f| f.1 <= 3) {
        let s = CliffordSystem::new(m, k, &signs)?;
        s.validate()?;
        let mut cfg = ClassifyConfig::new(&s, samples, seed);
        cfg.fd_crosscheck = true;
        let r = classify(&s, &cfg)?;
        let ok = r.verdicts.checks_passed && r.failures.is_empty();
        if !ok {
            status = EXIT_INVARIANT;
        }
        println!(
            "{:<14} {:?} identities {:.2e} fd {:.2e} {}",
            r.family.label(),
            variant_classify(&s).kind,
            r.stats.identity_worst,
            r.fd_check.as_ref().map_or(0.0, |c| c.max_relative_error),
            if ok { "ok" } else { "FAILED" }
        );
    }
    println!("selftest finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(status)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Build { family, out } => {
            let s = family.system()?;
            write_output(out.as_deref(), &json::to_string(&s.to_file())?)?;
            Ok(EXIT_OK)
        }
        Command::Selftest { samples, seed } => selftest(samples, seed),
        Command::Classify {
            family,
            input,
            run,
            out,
        } => {
            let s = match input {
                Some(p) => {
                    if family.m.is_some() || family.k.is_some() || family.signs.is_some() {
                        return Err(Error::InvalidInput("--in excludes --m, --k and --signs".into()));
                    }
                    let file: SystemFile = json::from_str(&fs::read_to_string(p)?)
                        .map_err(|e| Error::Schema(format!("system file: {e}")))?;
                    CliffordSystem::from_file(&file)?
                }
                None => family.system()?,
            };
            let r = classify(&s, &run.config(&s)?)?;
            match out {
                Some(p) => report::save_report(&r, &p)?,
                None => write_output(None, &json::to_string(&r)?)?,
            }
            Ok(report_status(&r))
        }
        Command::Scan { max_l, max_m, run, out } => {
            let mut rows = Vec::new();
            let mut status = EXIT_OK;
            for (m, k, signs) in family_grid(max_l, max_m) {
                let s = CliffordSystem::new(m, k, &signs)?;
                let r = classify(&s, &run.config(&s)?)?;
                status = status.max(report_status(&r));
                rows.extend(report::sweep_rows(&r));
            }
            match out {
                Some(p) => report::write_sweep(&rows, fs::File::create(p)?)?,
                None => report::write_sweep(&rows, io::stdout())?,
            }
            Ok(status)
        }
        Command::Export { input, out } => {
            report::export(&input, &out)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parse `argv` and run, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs_parse() {
        assert_eq!(parse_signs("+,+,+,-").unwrap(), vec![1, 1, 1, -1]);
        assert_eq!(parse_signs("").unwrap(), Vec::<i8>::new());
        assert!(parse_signs("+,x").is_err());
    }

    #[test]
    fn grid_up_to_eight() {
        let g = family_grid(8, 9);
        assert_eq!(g.len(), 14);
        assert!(g.contains(&(4, 2, vec![1, -1])));
        assert!(g.contains(&(6, 1, vec![])));
        assert!(!g.iter().any(|f| f.0 >= 7));
    }

    #[test]
    fn bad_arguments_are_config_errors() {
        assert_eq!(run(["clifford-ym", "classify", "--m", "3"]), EXIT_CONFIG);
        assert_eq!(run(["clifford-ym", "classify", "--m", "0", "--k", "1"]), EXIT_CONFIG);
        assert_eq!(run(["clifford-ym", "frobnicate"]), EXIT_CONFIG);
    }
}
