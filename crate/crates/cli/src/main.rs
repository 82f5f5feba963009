//! Command-line front end: certificate suites on NDJSON, curvature and
//! connection-form exports, covariant Taylor expansion of user forms.
//!
//! Invariants:
//! * exit 0 = every identity holds, exit 1 = an identity is violated,
//!   exit 2 = configuration or input error;
//! * machine output (certificates, documents) goes to stdout, the human
//!   summary to stderr;
//! * output is byte-identical for a fixed (config, seed), independent of
//!   worker count and of the DIAGJET_THREADS cap.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diagjet::dolbeault::exp_star;
use diagjet::export::{
    alpha_to_document, family_from_document, form_from_document, metric_from_document,
    taylor_to_document, tower_to_document, FamilyDocument, FormDocument, MetricDocument,
};
use diagjet::kahler::{curvature_tensor, curvature_tower, levi_civita, ChartMetric};
use diagjet::section::{
    carry_family, connection_form_from_section, metric_family, section_from_family,
};
use diagjet::{Certificate, Error, MetricKind, RunConfig, SuiteKind};

const EXIT_VIOLATION: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "diagjet",
    version,
    about = "Exact-arithmetic verification and export for jet-level diagonal geometry"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Configuration file plus flag overrides; a flag always wins over the
/// corresponding file field.
#[derive(Args)]
struct Overrides {
    /// JSON run configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Metric kind: flat | fubini_study | user.
    #[arg(long, global = true, value_name = "KIND")]
    metric: Option<String>,
    /// Metric series file (implies --metric user).
    #[arg(long, global = true, value_name = "FILE")]
    metric_file: Option<PathBuf>,
    /// Chart dimension.
    #[arg(long, short = 'd', global = true)]
    dim: Option<usize>,
    /// Base truncation order B.
    #[arg(long, short = 'B', global = true)]
    base_order: Option<i64>,
    /// Fiber jet cap N.
    #[arg(long, short = 'N', global = true)]
    fiber_cap: Option<i64>,
    /// Top curvature tower level (default: min(N, B)).
    #[arg(long, global = true)]
    tower_max: Option<i64>,
    /// Seed for the randomized sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated subset of algebra, jets, connections, twisted,
    /// section, atiyah (default: all).
    #[arg(long, global = true, value_delimiter = ',', value_name = "NAMES")]
    suites: Option<Vec<String>>,
    /// Worker thread count; DIAGJET_THREADS caps it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the certificate suites: one NDJSON certificate per identity on
    /// stdout, a human summary on stderr.
    Verify,
    /// Export the curvature tower of the configured metric as a JSON
    /// document on stdout.
    Curvature,
    /// Expand a two-factor chart form through the metric's covariant
    /// Taylor pipeline and emit the expansion document.
    Taylor {
        /// Form document (schema diagjet.form/1).
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
    /// Recover the connection form of the metric's fiberwise family and
    /// export its levels (schema diagjet.alpha/1).
    ExportAlpha {
        /// Fiberwise reparameterization jet (schema diagjet.family/1)
        /// applied to the family before the form is recovered.
        #[arg(long, value_name = "FILE")]
        family: Option<PathBuf>,
    },
}

/// Outcome channel: input trouble exits 2, violated identities exit 1.
enum Failure {
    Input(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Filtration(_) => Failure::Violation(e.to_string()),
            Error::Shape(_) | Error::Order { .. } | Error::Config(_) => {
                Failure::Input(e.to_string())
            }
        }
    }
}

fn input_err(context: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {}", context, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("identity violation: {}", msg);
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let (cfg, user_metric) = assemble_config(&cli.overrides)?;
    cfg.validate().map_err(Failure::from)?;
    match &cli.cmd {
        Cmd::Verify => cmd_verify(&cfg, user_metric.as_ref()),
        Cmd::Curvature => cmd_curvature(&cfg, user_metric.as_ref()),
        Cmd::Taylor { input } => cmd_taylor(&cfg, user_metric.as_ref(), input),
        Cmd::ExportAlpha { family } => cmd_export_alpha(&cfg, user_metric.as_ref(), family.as_deref()),
    }
}

// ---------------------------------------------------------------------------
// Configuration assembly
// ---------------------------------------------------------------------------

fn parse_metric_kind(name: &str) -> Result<MetricKind, Failure> {
    match name {
        "flat" => Ok(MetricKind::Flat),
        "fubini_study" => Ok(MetricKind::FubiniStudy),
        "user" => Ok(MetricKind::User),
        other => Err(Failure::Input(format!(
            "unknown metric '{}' (expected flat, fubini_study, or user)",
            other
        ))),
    }
}

fn parse_suite(name: &str) -> Result<SuiteKind, Failure> {
    SuiteKind::ALL
        .iter()
        .copied()
        .find(|k| k.name() == name)
        .ok_or_else(|| {
            Failure::Input(format!(
                "unknown suite '{}' (expected one of {})",
                name,
                SuiteKind::ALL
                    .iter()
                    .map(|k| k.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_err(&format!("reading {} {}", what, path.display()), e))?;
    serde_json::from_str(&text)
        .map_err(|e| input_err(&format!("parsing {} {}", what, path.display()), e))
}

fn assemble_config(o: &Overrides) -> Result<(RunConfig, Option<ChartMetric>), Failure> {
    let mut cfg: RunConfig = match &o.config {
        Some(path) => read_json(path, "configuration")?,
        None => RunConfig::default(),
    };
    if let Some(name) = &o.metric {
        cfg.metric = parse_metric_kind(name)?;
    }
    if let Some(path) = &o.metric_file {
        cfg.metric_file = Some(path.display().to_string());
        if o.metric.is_none() {
            cfg.metric = MetricKind::User;
        }
    }
    if let Some(d) = o.dim {
        cfg.dim = d;
    }
    if let Some(b) = o.base_order {
        cfg.base_order = b;
    }
    if let Some(n) = o.fiber_cap {
        cfg.fiber_cap = n;
    }
    if let Some(t) = o.tower_max {
        cfg.tower_max = Some(t);
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(names) = &o.suites {
        cfg.suites = names
            .iter()
            .map(|s| parse_suite(s))
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(t) = o.threads {
        cfg.threads = t;
    }
    let user_metric = if cfg.metric == MetricKind::User {
        let path = cfg
            .metric_file
            .clone()
            .ok_or_else(|| Failure::Input("metric 'user' requires --metric-file".into()))?;
        let doc: MetricDocument = read_json(Path::new(&path), "metric")?;
        Some(metric_from_document(&doc).map_err(Failure::from)?)
    } else {
        None
    };
    Ok((cfg, user_metric))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_verify(cfg: &RunConfig, user: Option<&ChartMetric>) -> Result<ExitCode, Failure> {
    let certs = diagjet::run_suites(cfg, user).map_err(Failure::from)?;
    let mut out = io::stdout().lock();
    for c in &certs {
        let line = serde_json::to_string(c).map_err(|e| input_err("serializing certificate", e))?;
        writeln!(out, "{}", line).map_err(|e| input_err("writing certificates", e))?;
    }
    out.flush().map_err(|e| input_err("writing certificates", e))?;
    summarize(cfg, &certs);
    if certs.iter().all(|c| c.passed()) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn summarize(cfg: &RunConfig, certs: &[Certificate]) {
    eprintln!(
        "run: metric {}, dim {}, base order {}, fiber cap {}, seed {}",
        cfg.metric, cfg.dim, cfg.base_order, cfg.fiber_cap, cfg.seed
    );
    for kind in cfg.selected_suites() {
        let group: Vec<&Certificate> = certs.iter().filter(|c| c.suite == kind).collect();
        if group.is_empty() {
            continue;
        }
        let checks: u64 = group.iter().map(|c| c.checks).sum();
        let failed: Vec<&str> = group
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.identity.as_str())
            .collect();
        if failed.is_empty() {
            eprintln!(
                "  {:<12} {:>2} identities {:>8} checks   pass",
                kind.name(),
                group.len(),
                checks
            );
        } else {
            eprintln!(
                "  {:<12} {:>2} identities {:>8} checks   FAIL: {}",
                kind.name(),
                group.len(),
                checks,
                failed.join(", ")
            );
        }
    }
    let failed = certs.iter().filter(|c| !c.passed()).count();
    if failed == 0 {
        eprintln!("all {} identities hold exactly", certs.len());
    } else {
        eprintln!("{} of {} identities FAILED", failed, certs.len());
    }
}

fn print_document<T: serde::Serialize>(doc: &T) -> Result<ExitCode, Failure> {
    let text =
        serde_json::to_string_pretty(doc).map_err(|e| input_err("serializing document", e))?;
    println!("{}", text);
    Ok(ExitCode::SUCCESS)
}

fn cmd_curvature(cfg: &RunConfig, user: Option<&ChartMetric>) -> Result<ExitCode, Failure> {
    let metric = diagjet::resolve_metric(cfg, user).map_err(Failure::from)?;
    let conn = levi_civita(&metric).map_err(Failure::from)?;
    let r2 = curvature_tensor(&conn).map_err(Failure::from)?;
    let levels = curvature_tower(&conn, &r2, cfg.tower_depth().max(2) as usize)
        .map_err(Failure::from)?;
    print_document(&tower_to_document(&levels, metric.base_order))
}

fn cmd_taylor(
    cfg: &RunConfig,
    user: Option<&ChartMetric>,
    input: &Path,
) -> Result<ExitCode, Failure> {
    let metric = diagjet::resolve_metric(cfg, user).map_err(Failure::from)?;
    let conn = levi_civita(&metric).map_err(Failure::from)?;
    let doc: FormDocument = read_json(input, "form")?;
    let eta = form_from_document(&doc).map_err(Failure::from)?;
    let expanded = exp_star(&conn, &eta, cfg.fiber_cap).map_err(Failure::from)?;
    print_document(&taylor_to_document(&expanded))
}

fn cmd_export_alpha(
    cfg: &RunConfig,
    user: Option<&ChartMetric>,
    family: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let metric = diagjet::resolve_metric(cfg, user).map_err(Failure::from)?;
    let conn = levi_civita(&metric).map_err(Failure::from)?;
    let mut fam = metric_family(&conn).map_err(Failure::from)?;
    if let Some(path) = family {
        let doc: FamilyDocument = read_json(path, "family")?;
        let phi = family_from_document(&doc).map_err(Failure::from)?;
        if phi.dim != cfg.dim {
            return Err(Failure::Input(format!(
                "family has dimension {} but the run is configured for {}",
                phi.dim, cfg.dim
            )));
        }
        fam = carry_family(&fam, &phi, phi.order - 1).map_err(Failure::from)?;
    }
    let sec = section_from_family(&fam, cfg.fiber_cap).map_err(Failure::from)?;
    let omega = connection_form_from_section(&sec).map_err(Failure::from)?;
    print_document(&alpha_to_document(&omega, metric.base_order, cfg.fiber_cap))
}
