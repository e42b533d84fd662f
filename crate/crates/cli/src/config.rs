use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use partial_bgg::{Family, RepresentationKind};
use serde::Deserialize;

/// Invalid flags or configuration; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Conformal,
    Grassmannian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// JSON or TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Conformal: dimension of g_-1 (at least 3).
    #[arg(long)]
    pub n: Option<usize>,
    /// Grassmannian block sizes (both at least 2).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// standard | adjoint | dual-standard | dual-adjoint
    #[arg(long)]
    pub rep: Option<String>,
    /// Maximal polynomial degree on the flat model.
    #[arg(long)]
    pub degree_cap: Option<u32>,
    /// Number of transverse variables on the flat model.
    #[arg(long)]
    pub transverse: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Polynomial degree of the harmonic test sections.
    #[arg(long)]
    pub test_degree: Option<u32>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; defaults to stdout, or a file inside the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "PARTIAL_BGG_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Corrupt one sign of the differential (debug builds only).
    #[arg(long, hide = true)]
    pub inject_sign_bug: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    family: Option<FamilyArg>,
    n: Option<usize>,
    p: Option<usize>,
    q: Option<usize>,
    rep: Option<String>,
    degree_cap: Option<u32>,
    transverse: Option<usize>,
    samples: Option<usize>,
    seed: Option<u64>,
    test_degree: Option<u32>,
    format: Option<Format>,
    output: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        };
        Ok(parsed)
    }
}

/// Fully resolved options of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub family: Family,
    pub rep: RepresentationKind,
    pub degree_cap: u32,
    pub transverse: usize,
    pub samples: usize,
    pub seed: u64,
    pub test_degree: u32,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub inject_sign_bug: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let family = self
            .family
            .or(file.family)
            .ok_or_else(|| usage("--family is required (conformal | grassmannian)"))?;
        let family = match family {
            FamilyArg::Conformal => {
                let n = self.n.or(file.n).ok_or_else(|| usage("conformal family needs --n"))?;
                if n < 3 {
                    return Err(usage(format!("conformal family needs n >= 3, got {n}")));
                }
                Family::Conformal { n }
            }
            FamilyArg::Grassmannian => {
                let p = self.p.or(file.p).ok_or_else(|| usage("grassmannian family needs --p"))?;
                let q = self.q.or(file.q).ok_or_else(|| usage("grassmannian family needs --q"))?;
                if p < 2 || q < 2 {
                    return Err(usage(format!("grassmannian family needs p, q >= 2, got ({p}, {q})")));
                }
                Family::Grassmannian { p, q }
            }
        };
        let rep_name = self.rep.clone().or(file.rep).unwrap_or_else(|| "standard".into());
        let rep = RepresentationKind::parse(&rep_name).ok_or_else(|| {
            usage(format!(
                "unknown representation {rep_name:?}; expected standard, adjoint, dual-standard or dual-adjoint"
            ))
        })?;
        if self.inject_sign_bug && !cfg!(debug_assertions) {
            return Err(usage("--inject-sign-bug is only available in debug builds"));
        }
        Ok(RunConfig {
            family,
            rep,
            degree_cap: self.degree_cap.or(file.degree_cap).unwrap_or(6),
            transverse: self.transverse.or(file.transverse).unwrap_or(0),
            samples: self.samples.or(file.samples).unwrap_or(8),
            seed: self.seed.or(file.seed).unwrap_or(0),
            test_degree: self.test_degree.or(file.test_degree).unwrap_or(3),
            format: self.format.or(file.format).unwrap_or_default(),
            output: self.output.clone().or(file.output),
            output_dir: self.output_dir.clone(),
            inject_sign_bug: self.inject_sign_bug,
        })
    }
}
