//! `ope` command-line driver.
//!
//! Every run reads a TOML config, writes its result file(s) and a
//! `manifest.json` into the output directory, and exits with 0 on success,
//! 1 on a computation failure and 2 on a usage or configuration error. Errors
//! are reported on stderr as `{"error": {"code": …, "message": …}}`.

pub mod cache;
pub mod commands;
pub mod config;

use crate::error::OpeError;
use cache::{sha256_hex, Cache};
use clap::{Parser, Subcommand};
use config::{Format, RunConfig};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "ope", version, about = "Operator product expansion coefficients and bound checks")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dimension cutoff, e.g. `4` or `7/2`.
    #[arg(long, global = true)]
    pub dmax: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Enumerate the operator basis up to the dimension cutoff.
    Basis,
    /// Free-theory coefficient of the `[free_ope]` section.
    FreeOpe,
    /// First-order coefficient of the `[recursion]` section.
    Recursion,
    /// Nilpotency of the free BRST matrix and the free Ward functional.
    Ward,
    /// Short-distance scaling fits over the basis.
    Scaling,
    /// Associativity residuals of the `[assoc]` section.
    Assoc,
    /// Randomized checks of the weighted-tree estimates.
    TreesCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::FreeOpe => "free-ope",
            Command::Recursion => "recursion",
            Command::Ward => "ward",
            Command::Scaling => "scaling",
            Command::Assoc => "assoc",
            Command::TreesCheck => "trees-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        CliError { code: code.into(), message: message.into(), exit: 2 }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::config("USAGE", message)
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError { code: "IO_ERROR".into(), message: format!("{context}: {e}"), exit: 1 }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl From<OpeError> for CliError {
    fn from(e: OpeError) -> Self {
        CliError { code: e.code().into(), message: e.to_string(), exit: 1 }
    }
}

/// One file written to the output directory.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Serialize)]
struct ResultEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config_path: String,
    config_sha256: String,
    effective_config: &'a RunConfig,
    versions: Versions,
    timings_ms: Timings,
    cache: CacheInfo,
    results: Vec<ResultEntry>,
}

#[derive(Serialize)]
struct Versions {
    ope: &'static str,
    manifest_schema: u32,
}

#[derive(Serialize)]
struct Timings {
    total: f64,
    compute: f64,
}

#[derive(Serialize)]
struct CacheInfo {
    dir: String,
    hits: usize,
    misses: usize,
    /// Every lookup of the run was served from the cache.
    hit: bool,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", CliError::usage(e.to_string().trim_end()).to_json());
            return 2;
        }
    };
    match run(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit
        }
    }
}

/// Runs one subcommand and returns the paths written.
pub fn run(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let path = args.config.as_deref().ok_or_else(|| CliError::config("CONFIG_NOT_FOUND", "no --config given"))?;
    let (mut cfg, raw) = RunConfig::load(path)?;
    cfg.override_with(args.tol, args.seed, args.dmax.as_deref(), args.format)?;
    let cache_dir = Cache::resolve_dir(cfg.cache_dir.as_deref(), &args.out);
    let mut cache = Cache::new(cache_dir);
    let compute_start = Instant::now();
    let artifacts = commands::dispatch(args.command, &cfg, &mut cache)?;
    let compute = compute_start.elapsed();

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io("creating output directory", e))?;
    let mut written = Vec::new();
    let mut results = Vec::new();
    for a in &artifacts {
        let p = args.out.join(&a.name);
        write_atomic(&p, &a.bytes).map_err(|e| CliError::io(&a.name, e))?;
        results.push(ResultEntry { file: a.name.clone(), sha256: sha256_hex(&a.bytes) });
        written.push(p);
    }
    let lookups = cache.hits + cache.misses;
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        command: args.command.name(),
        config_path: path.display().to_string(),
        config_sha256: sha256_hex(&raw),
        effective_config: &cfg,
        versions: Versions { ope: env!("CARGO_PKG_VERSION"), manifest_schema: 1 },
        timings_ms: Timings { total: started.elapsed().as_secs_f64() * 1e3, compute: compute.as_secs_f64() * 1e3 },
        cache: CacheInfo { dir: cache.root().display().to_string(), hits: cache.hits, misses: cache.misses, hit: lookups > 0 && cache.misses == 0 },
        results,
    };
    let mp = args.out.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&mp, &bytes).map_err(|e| CliError::io("manifest.json", e))?;
    written.push(mp);
    Ok(written)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
