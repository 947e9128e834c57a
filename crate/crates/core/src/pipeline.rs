//! End-to-end wiring: APK → behavioral profile, policy text → declarative
//! profile, and the batch audit over a records file plus input directories.
//!
//! Inputs are joined by file stem: `<app_id>.apk` in the APK directory and
//! `<app_id>.txt` / `.html` / `.htm` in the policy directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::apk::{detect_engine, open_apk, open_apk_bytes, parse_manifest, ApkError, ApkPackage, EngineKind, ManifestError};
use crate::catalog::{Rule, SensitivityCatalog};
use crate::compliance::{
    aggregate_report, ingest_records, run_checks, AnalysisStatus, AppAudit, AppRecord, BehavioralProfile,
    ComplianceConfig, DeclarativeProfile, PolicyAnalysis, RecordError, ReportError, StoreReport,
};
use crate::policy::html::{looks_like_html, strip_html};
use crate::policy::{
    classify_components, detect_language, extract_child_age, extract_declared_datatypes, readability, segment,
    specificity_check, validity_check,
};
use crate::probe::{discover_language_variants, probe_all, HttpClient, ProbeConfig};
use crate::taxonomy::{Engine, Store};
use crate::unity::{analyze_il2cpp, analyze_mono};
use crate::unreal::analyze_unreal;

pub const MANIFEST_PATH: &str = "AndroidManifest.xml";
pub const POLICY_EXTENSIONS: [&str; 3] = ["txt", "html", "htm"];

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Apk(#[from] ApkError),
    #[error("manifest: {0}")]
    Manifest(#[from] ManifestError),
}

impl AnalyzeError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalyzeError::Apk(e) => e.code(),
            AnalyzeError::Manifest(ManifestError::MalformedXml(_)) => "MalformedXml",
            AnalyzeError::Manifest(ManifestError::UnsupportedChunkVersion { .. }) => "UnsupportedChunkVersion",
            AnalyzeError::Manifest(ManifestError::MissingManifestElement) => "MissingManifestElement",
        }
    }
}

/// Rules for one engine; with no store, the union over all stores.
pub fn rules_for(catalog: &SensitivityCatalog, store: Option<Store>, engine: Engine) -> Vec<&Rule> {
    catalog
        .api_rules
        .iter()
        .filter(|r| r.engine == engine && store.is_none_or(|s| r.store.matches(s)))
        .collect()
}

pub fn analyze_package(
    app_id: &str,
    pkg: &ApkPackage,
    store: Option<Store>,
    catalog: &SensitivityCatalog,
) -> Result<BehavioralProfile, AnalyzeError> {
    let manifest = parse_manifest(&pkg.extract(MANIFEST_PATH)?)?;
    let perms = manifest.permissions;
    let engine = detect_engine(pkg);
    let outcome = match engine {
        EngineKind::UnityIl2cpp => analyze_il2cpp(pkg, &rules_for(catalog, store, Engine::Unity))
            .map(|a| (a.evidence, a.warnings))
            .map_err(|e| e.to_string()),
        EngineKind::UnityMono => analyze_mono(pkg, &rules_for(catalog, store, Engine::Unity))
            .map(|a| (a.evidence, a.warnings))
            .map_err(|e| e.to_string()),
        EngineKind::Unreal => analyze_unreal(pkg, &rules_for(catalog, store, Engine::Unreal))
            .map(|a| (a.evidence, Vec::new()))
            .map_err(|e| e.to_string()),
        EngineKind::Unknown => {
            return Ok(BehavioralProfile::incomplete(
                app_id,
                engine,
                perms,
                AnalysisStatus::Unsupported,
                "no Unity or Unreal build detected",
            ))
        }
    };
    Ok(match outcome {
        Ok((mut evidence, notes)) => {
            evidence.sort();
            let mut p = BehavioralProfile::complete(app_id, engine, perms, evidence);
            p.notes = notes;
            p
        }
        Err(e) => BehavioralProfile::incomplete(app_id, engine, perms, AnalysisStatus::LacksFiles, e),
    })
}

/// Behavioral profile of an APK file; the app id is the file stem.
pub fn analyze_apk(
    path: &Path,
    store: Option<Store>,
    catalog: &SensitivityCatalog,
) -> Result<BehavioralProfile, AnalyzeError> {
    let pkg = open_apk(path)?;
    analyze_package(&file_stem(path), &pkg, store, catalog)
}

pub fn analyze_apk_bytes(
    app_id: &str,
    data: Vec<u8>,
    store: Option<Store>,
    catalog: &SensitivityCatalog,
) -> Result<BehavioralProfile, AnalyzeError> {
    analyze_package(app_id, &open_apk_bytes(data)?, store, catalog)
}

/// Policy text (plain or HTML) analyzed against the record it belongs to.
pub fn analyze_policy(
    text: &str,
    record: Option<&AppRecord>,
    catalog: &SensitivityCatalog,
    config: &ComplianceConfig,
) -> PolicyAnalysis {
    let plain = if looks_like_html(text) { strip_html(text) } else { text.to_string() };
    let mut doc = segment(&plain);
    if let Some(url) = record.and_then(|r| r.policy_url.as_deref()) {
        doc = doc.with_source_url(url);
    }
    let coverage = classify_components(&doc);
    let (vr_specific, specificity_hits) = specificity_check(&doc, record.map_or("", |r| r.name.as_str()));
    PolicyAnalysis {
        word_count: doc.word_count(),
        validity: validity_check(&doc, &config.store_policy_urls),
        vr_specific,
        specificity_hits,
        readability: readability(&doc).ok(),
        declared: extract_declared_datatypes(&doc, &coverage, &catalog.policy_corpus),
        child_age: extract_child_age(&doc, &coverage),
        language: detect_language(&plain),
        coverage,
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("records: {0}")]
    Records(#[from] RecordError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("live probing requested without an HTTP client")]
    NoClient,
}

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub records_path: PathBuf,
    pub apk_dir: Option<PathBuf>,
    pub policy_dir: Option<PathBuf>,
    pub workers: usize,
    /// Probe policy links when set; offline otherwise.
    pub live: Option<ProbeConfig>,
    pub compliance: ComplianceConfig,
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `stem → path` for files with one of `exts`; the lexicographically first
/// path wins when two files share a stem.
fn index_dir(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>, AuditError> {
    let io = |source| AuditError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        out.entry(file_stem(&p)).or_insert(p);
    }
    Ok(out)
}

fn audit_one(
    record: &AppRecord,
    apk: Option<&PathBuf>,
    policy: Option<&PathBuf>,
    catalog: &SensitivityCatalog,
    config: &ComplianceConfig,
) -> (Option<BehavioralProfile>, DeclarativeProfile, Vec<String>) {
    let mut errors = Vec::new();
    let behavioral = apk.and_then(|p| match analyze_apk(p, Some(record.store), catalog) {
        Ok(mut b) => {
            b.app_id = record.app_id.clone();
            Some(b)
        }
        Err(e) => {
            errors.push(format!("apk {}: {e}", e.code()));
            None
        }
    });
    let text = policy.and_then(|p| match std::fs::read(p) {
        Ok(bytes) => Some(String::from_utf8_lossy(&bytes).into_owned()),
        Err(e) => {
            errors.push(format!("policy: {e}"));
            None
        }
    });
    let analysis = text.map(|t| analyze_policy(&t, Some(record), catalog, config));
    (behavioral, DeclarativeProfile::new(record.clone(), analysis), errors)
}

/// Runs the whole audit. Output depends only on the inputs and config, not
/// on `workers`.
pub fn run_audit(
    config: &AuditConfig,
    catalog: &SensitivityCatalog,
    client: Option<&dyn HttpClient>,
) -> Result<StoreReport, AuditError> {
    let text = std::fs::read_to_string(&config.records_path)
        .map_err(|source| AuditError::Io { path: config.records_path.clone(), source })?;
    let records = ingest_records(&text)?;
    let apks = match &config.apk_dir {
        Some(d) => index_dir(d, &["apk"])?,
        None => BTreeMap::new(),
    };
    let policies = match &config.policy_dir {
        Some(d) => index_dir(d, &POLICY_EXTENSIONS)?,
        None => BTreeMap::new(),
    };
    if config.live.is_some() && client.is_none() {
        return Err(AuditError::NoClient);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| AuditError::Pool(e.to_string()))?;
    let mut partial: Vec<_> = pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                let (b, d, errors) =
                    audit_one(r, apks.get(&r.app_id), policies.get(&r.app_id), catalog, &config.compliance);
                (b, d, errors)
            })
            .collect()
    });

    let mut notes = Vec::new();
    let known: BTreeSet<&str> = records.iter().map(|r| r.app_id.as_str()).collect();
    for stem in apks.keys().filter(|s| !known.contains(s.as_str())) {
        notes.push(format!("apk without record ignored: {stem}"));
    }
    for stem in policies.keys().filter(|s| !known.contains(s.as_str())) {
        notes.push(format!("policy without record ignored: {stem}"));
    }

    let urls: Vec<(usize, String)> = partial
        .iter()
        .enumerate()
        .filter_map(|(i, (_, d, _))| d.record.policy_url.clone().map(|u| (i, u)))
        .collect();
    match (&config.live, client) {
        (Some(probe), Some(client)) => {
            let list: Vec<String> = urls.iter().map(|(_, u)| u.clone()).collect();
            let results = probe_all(&list, *probe, client);
            for ((i, _), r) in urls.iter().zip(results) {
                match r {
                    Ok(r) => partial[*i].1.link_status = Some(r),
                    Err(e) => partial[*i].2.push(format!("policy_url: {e}")),
                }
            }
            let variants: Vec<_> = pool.install(|| {
                urls.par_iter()
                    .map(|(i, u)| {
                        let claimed = &partial[*i].1.record.supported_languages;
                        if claimed.is_empty() {
                            return None;
                        }
                        discover_language_variants(u, claimed, probe.timeout_ms, client, &detect_language).ok()
                    })
                    .collect()
            });
            for ((i, _), v) in urls.iter().zip(variants) {
                partial[*i].1.language_variants = v;
            }
        }
        _ if !urls.is_empty() => {
            notes.push("offline run: policy links not probed, link_status omitted".into());
        }
        _ => {}
    }

    let audits: Vec<AppAudit> = partial
        .into_iter()
        .map(|(behavioral, declarative, errors)| {
            let findings = run_checks(behavioral.as_ref(), &declarative, &config.compliance);
            AppAudit { app_id: declarative.app_id.clone(), behavioral, declarative, findings, errors }
        })
        .collect();
    Ok(aggregate_report(&audits, &notes)?)
}
