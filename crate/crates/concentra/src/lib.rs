//! Command-line runner for `concentra-core`: configuration, orchestration
//! and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use clap::{Args, Parser, Subcommand};
use commands::Session;
use config::{Format, Levels, RunConfig};
use error::CliError;
use report::{emit_report, Check, Outcome, RunReport};
use serde_json::json;
use std::ffi::OsString;
use std::path::PathBuf;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "CONCENTRA_OUT";

#[derive(Debug, Parser)]
#[command(name = "concentra", version, about = "Bubble constants, layered expansions and resonance gaps for boundary-concentrating solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bubble constants and the eigenpair.
    Constants(Overrides),
    /// The integral identities of the bubble.
    Identities(Overrides),
    /// Curvature average and leading concentration scale along the curve.
    Mu0(Overrides),
    /// Layered approximate solution over an eps sweep.
    Expand(Overrides),
    /// Reduced eigenvalue curves.
    Spectrum(Overrides),
    /// Dyadic resonance-gap selection.
    Gaps(Overrides),
    /// Every subcommand in turn.
    All(Overrides),
}

impl Command {
    fn parts(&self) -> (&'static str, &Overrides) {
        match self {
            Command::Constants(o) => ("constants", o),
            Command::Identities(o) => ("identities", o),
            Command::Mu0(o) => ("mu0", o),
            Command::Expand(o) => ("expand", o),
            Command::Spectrum(o) => ("spectrum", o),
            Command::Gaps(o) => ("gaps", o),
            Command::All(o) => ("all", o),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML or JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Transverse dimension.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// `round_sphere`, `perturbed_sphere[:amplitude]`, `spheroid_equator[:aspect]` or `flat`.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Samples along the curve.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Inclusive range such as `6..12`.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub c_target: Option<f64>,
    /// Number of reduced eigenvalues.
    #[arg(long = "J")]
    pub j: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the environment and the file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of `json,csv`.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
}

/// Loads the file (or defaults), applies flags and the environment, validates.
pub fn resolve_config(o: &Overrides, env_out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut c = match &o.config {
        Some(p) => config::load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = o.n {
        c.dims.n = n;
    }
    if let Some(g) = &o.geometry {
        c.geometry.apply_flag(g)?;
    }
    if let Some(g) = o.grid {
        c.geometry.grid = g;
    }
    if let Some(v) = o.order {
        c.expansion.order = v;
    }
    if let Some(v) = &o.eps_list {
        c.expansion.eps_list = v.clone();
    }
    if let Some(v) = o.gamma {
        c.expansion.gamma = v;
    }
    if let Some(v) = &o.levels {
        c.spectrum.levels = Levels::parse(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = o.c_target {
        c.spectrum.c_target = v;
    }
    if let Some(v) = o.j {
        c.spectrum.j = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(d) = env_out {
        c.output.directory = d;
    }
    if let Some(d) = &o.out {
        c.output.directory = d.clone();
    }
    if let Some(f) = &o.format {
        c.output.formats = f
            .iter()
            .map(|s| match s.as_str() {
                "json" => Ok(Format::Json),
                "csv" => Ok(Format::Csv),
                other => Err(CliError::Validation(format!("unknown format `{other}` (json, csv)"))),
            })
            .collect::<Result<_, _>>()?;
    }
    c.validate()?;
    Ok(c)
}

const PIPELINE: [&str; 6] = ["constants", "identities", "mu0", "expand", "spectrum", "gaps"];

fn run_one(name: &str, s: &mut Session) -> Result<Outcome, CliError> {
    match name {
        "constants" => commands::constants(s),
        "identities" => commands::identities(s),
        "mu0" => commands::mu0(s),
        "expand" => commands::expand(s),
        "spectrum" => commands::spectrum(s),
        "gaps" => commands::gaps(s),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn emit(name: &str, cfg: &RunConfig, outcome: &Outcome) -> Result<RunReport, CliError> {
    let report = RunReport::new(name, cfg, outcome);
    for p in emit_report(&report, outcome.table.as_ref(), &cfg.output.formats, &cfg.output.directory)? {
        println!("wrote {}", p.display());
    }
    for c in &outcome.checks {
        println!("{} {name}: {} = {:e} ({} {:e})", if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.relation, c.tolerance);
    }
    Ok(report)
}

/// Runs one subcommand (or all of them); returns the failure to report, if any.
pub fn execute(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let mut s = Session::new(cfg)?;
    if name != "all" {
        let outcome = run_one(name, &mut s)?;
        let report = emit(name, cfg, &outcome)?;
        return match report.failed() {
            0 => Ok(()),
            failed => Err(CliError::ChecksFailed { failed }),
        };
    }
    let mut first_error: Option<CliError> = None;
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for sub in PIPELINE {
        match run_one(sub, &mut s).and_then(|o| emit(sub, cfg, &o)) {
            Ok(r) => {
                summary.push(json!({"subcommand": sub, "pass": r.pass, "failed": r.failed()}));
                checks.extend(r.checks.into_iter().map(|c| Check { name: format!("{sub}: {}", c.name), ..c }));
            }
            Err(e) => {
                eprintln!("{}", e.to_json());
                summary.push(json!({"subcommand": sub, "pass": false, "error": e.to_json()["error"].clone()}));
                checks.push(Check::flag(format!("{sub}: completed without error"), false, "-"));
                first_error.get_or_insert(e);
            }
        }
    }
    let outcome = Outcome { payload: json!({ "subcommands": summary }), checks, table: None };
    let report = emit("all", cfg, &outcome)?;
    match (first_error, report.failed()) {
        (Some(e), _) => Err(e),
        (None, 0) => Ok(()),
        (None, failed) => Err(CliError::ChecksFailed { failed }),
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, o) = cli.command.parts();
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let result = resolve_config(o, env_out).and_then(|cfg| execute(name, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            if !matches!(e, CliError::ChecksFailed { .. }) || name != "all" {
                eprintln!("{}", e.to_json());
            }
            e.exit_code()
        }
    }
}
