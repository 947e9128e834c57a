//! `vraudit` command-line frontend.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 artifact parse
//! failure. Errors are printed to stderr as one JSON object
//! `{"error": <code>, "message": <text>}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use vraudit::catalog::SensitivityCatalog;
use vraudit::compliance::{AppRecord, ComplianceConfig, StoreReport};
use vraudit::pipeline::{analyze_apk, analyze_policy, run_audit, AuditConfig};
use vraudit::probe::{probe_all, ProbeConfig, UreqClient, DEFAULT_CONCURRENCY, DEFAULT_HOST_DELAY_MS, DEFAULT_TIMEOUT_MS};
use vraudit::taxonomy::Store;

#[derive(Parser)]
#[command(name = "vraudit", version, about = "Privacy compliance auditing for VR app packages and policies")]
struct Cli {
    /// Sensitivity catalog JSON; the built-in catalog when absent.
    #[arg(long, global = true, env = "AUDITOR_CATALOG")]
    catalog: Option<PathBuf>,
    /// Compliance settings JSON (benign permissions, store policy URLs).
    #[arg(long, global = true)]
    compliance: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the behavioral profile of one APK as JSON.
    AnalyzeApk {
        path: PathBuf,
        /// Restrict API rules to one store; all stores when absent.
        #[arg(long)]
        store: Option<Store>,
    },
    /// Print the analysis of one privacy policy (plain text or HTML) as JSON.
    AnalyzePolicy {
        path: PathBuf,
        /// App name used for the VR-specificity check.
        #[arg(long)]
        app_name: Option<String>,
        /// URL the policy was fetched from, checked against store-generic URLs.
        #[arg(long)]
        url: Option<String>,
    },
    /// Classify policy links by HTTP outcome. Requires --live.
    CheckLinks {
        /// URLs to check; `@file` reads one URL per line.
        #[arg(required = true)]
        urls: Vec<String>,
        #[arg(long)]
        live: bool,
        #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
        timeout_ms: u64,
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
        concurrency: usize,
    },
    /// Run the full audit over a records file and input directories.
    Audit(AuditArgs),
    /// Load a catalog and report its size, or the first schema error.
    CatalogValidate {
        /// Catalog to check; falls back to --catalog, then the built-in one.
        path: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(clap::Args)]
struct AuditArgs {
    /// JSON array of app records.
    #[arg(long)]
    records: PathBuf,
    /// Directory of `<app_id>.apk` files.
    #[arg(long)]
    apk_dir: Option<PathBuf>,
    /// Directory of `<app_id>.txt` / `.html` policy files.
    #[arg(long)]
    policy_dir: Option<PathBuf>,
    /// Output directory for `report.json` and the human-readable report;
    /// stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Probe policy links over the network.
    #[arg(long)]
    live: bool,
    /// Per-request budget for link probes, redirects included.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    #[arg(long, default_value_t = default_workers(), value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
}

fn default_workers() -> u64 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u64)
}

/// Resolved settings of one audit run.
#[derive(Debug, Clone)]
struct RunConfig {
    catalog_path: Option<PathBuf>,
    records_path: PathBuf,
    apk_dir: Option<PathBuf>,
    policy_dir: Option<PathBuf>,
    output_path: Option<PathBuf>,
    format: Format,
    live_network: bool,
    timeout_ms: u64,
    /// Always ≥ 1.
    workers: usize,
}

struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
}

impl Failure {
    fn config(code: &'static str, message: impl ToString) -> Self {
        Failure { exit: 1, code, message: message.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.code, "message": f.message }));
            ExitCode::from(f.exit)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::AnalyzeApk { path, store } => {
            let catalog = load_catalog(cli.catalog.as_deref())?;
            if !path.is_file() {
                return Err(Failure::config("NotFound", format!("{}: no such file", path.display())));
            }
            let profile = analyze_apk(&path, store, &catalog)
                .map_err(|e| Failure { exit: 2, code: e.code(), message: format!("{}: {e}", path.display()) })?;
            print_json(&profile);
        }
        Command::AnalyzePolicy { path, app_name, url } => {
            let catalog = load_catalog(cli.catalog.as_deref())?;
            let compliance = load_compliance(cli.compliance.as_deref())?;
            let bytes = fs::read(&path).map_err(|e| Failure::config("Io", format!("{}: {e}", path.display())))?;
            // Policy analysis reads only the name and URL of the record.
            let record = (app_name.is_some() || url.is_some()).then(|| {
                let mut r = AppRecord::new("", Store::Oculus, app_name.unwrap_or_default());
                r.policy_url = url;
                r
            });
            let analysis = analyze_policy(&String::from_utf8_lossy(&bytes), record.as_ref(), &catalog, &compliance);
            print_json(&analysis);
        }
        Command::CheckLinks { urls, live, timeout_ms, concurrency } => {
            if !live {
                return Err(Failure::config("Offline", "link checks need network access; pass --live"));
            }
            let urls = expand_urls(&urls)?;
            let config = ProbeConfig { timeout_ms, concurrency: concurrency.max(1), host_delay_ms: DEFAULT_HOST_DELAY_MS };
            for (url, r) in urls.iter().zip(probe_all(&urls, config, &UreqClient)) {
                match r {
                    Ok(res) => emit(&serde_json::to_string(&res).expect("probe result serializes")),
                    Err(e) => emit(&json!({ "url": url, "error": e.to_string() }).to_string()),
                }
            }
        }
        Command::Audit(args) => {
            let config = RunConfig {
                catalog_path: cli.catalog,
                records_path: args.records,
                apk_dir: args.apk_dir,
                policy_dir: args.policy_dir,
                output_path: args.output,
                format: args.format,
                live_network: args.live,
                timeout_ms: args.timeout_ms,
                workers: args.workers as usize,
            };
            let compliance = load_compliance(cli.compliance.as_deref())?;
            cmd_audit(&config, compliance)?;
        }
        Command::CatalogValidate { path } => {
            let catalog = load_catalog(path.as_deref().or(cli.catalog.as_deref()))?;
            print_json(&json!({
                "api_rules": catalog.api_rules.len(),
                "policy_phrases": catalog.policy_corpus.len(),
                "data_types": catalog.data_types(),
            }));
        }
    }
    Ok(())
}

fn cmd_audit(config: &RunConfig, compliance: ComplianceConfig) -> Result<(), Failure> {
    let catalog = load_catalog(config.catalog_path.as_deref())?;
    for dir in [&config.apk_dir, &config.policy_dir].into_iter().flatten() {
        if !dir.is_dir() {
            return Err(Failure::config("NotFound", format!("{}: not a directory", dir.display())));
        }
    }
    let audit = AuditConfig {
        records_path: config.records_path.clone(),
        apk_dir: config.apk_dir.clone(),
        policy_dir: config.policy_dir.clone(),
        workers: config.workers,
        live: config.live_network.then(|| ProbeConfig { timeout_ms: config.timeout_ms, ..ProbeConfig::default() }),
        compliance,
    };
    let client = UreqClient;
    let report = run_audit(&audit, &catalog, config.live_network.then_some(&client as _))
        .map_err(|e| Failure::config("Audit", e))?;
    match &config.output_path {
        None => emit(render(&report, config.format).trim_end()),
        Some(dir) => write_outputs(dir, &report, config.format)?,
    }
    Ok(())
}

fn render(report: &StoreReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Table => report.to_table(),
        Format::Csv => report.to_csv(),
    }
}

/// `report.json` always; `report.txt` or `report.csv` for the human formats.
fn write_outputs(dir: &Path, report: &StoreReport, format: Format) -> Result<(), Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::config("Io", format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = vec![(dir.join("report.json"), report.to_json())];
    match format {
        Format::Json => {}
        Format::Table => files.push((dir.join("report.txt"), report.to_table())),
        Format::Csv => files.push((dir.join("report.csv"), report.to_csv())),
    }
    for (path, body) in files {
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn load_catalog(path: Option<&Path>) -> Result<SensitivityCatalog, Failure> {
    match path {
        None => Ok(SensitivityCatalog::default_catalog()),
        Some(p) => SensitivityCatalog::from_path(p).map_err(|e| Failure::config("Catalog", format!("{}: {e}", p.display()))),
    }
}

fn load_compliance(path: Option<&Path>) -> Result<ComplianceConfig, Failure> {
    let Some(p) = path else { return Ok(ComplianceConfig::default()) };
    let text = fs::read_to_string(p).map_err(|e| Failure::config("Io", format!("{}: {e}", p.display())))?;
    ComplianceConfig::from_json(&text).map_err(|e| Failure::config("Compliance", format!("{}: {e}", p.display())))
}

fn expand_urls(args: &[String]) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for a in args {
        match a.strip_prefix('@') {
            Some(file) => {
                let text = fs::read_to_string(file).map_err(|e| Failure::config("Io", format!("{file}: {e}")))?;
                out.extend(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from));
            }
            None => out.push(a.clone()),
        }
    }
    Ok(out)
}

fn print_json(value: &impl serde::Serialize) {
    emit(&serde_json::to_string_pretty(value).expect("value serializes"));
}

/// Writes one line to stdout; a closed pipe ends output quietly.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}
