//! Behavioral and declarative profiles, the cross-checks between them, and
//! store-level aggregation.

pub mod records;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use records::{ingest_records, AgeRating, AppRecord, RecordError};
pub use report::{aggregate_report, AppAudit, Ratio, ReportError, StoreReport, REPORT_SCHEMA};

use crate::apk::EngineKind;
use crate::evidence::AccessEvidence;
use crate::policy::{ChildAge, Component, ComponentCoverage, DeclaredSet, Language, ReadabilityReport, Validity};
use crate::probe::{ProbeResult, VariantStatus};
use crate::taxonomy::{DataType, Store};

pub const DEFAULT_COMPLIANCE_JSON: &str = include_str!("../../data/compliance.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnalysisStatus {
    Complete,
    /// Engine artifacts absent or in a format the readers do not support.
    LacksFiles,
    /// No supported engine detected.
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehavioralProfile {
    pub app_id: String,
    pub engine: EngineKind,
    pub manifest_permissions: BTreeSet<String>,
    /// Empty unless `analysis_status` is `Complete`.
    pub accesses: Vec<AccessEvidence>,
    pub analysis_status: AnalysisStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BehavioralProfile {
    pub fn complete(
        app_id: impl Into<String>,
        engine: EngineKind,
        manifest_permissions: BTreeSet<String>,
        accesses: Vec<AccessEvidence>,
    ) -> BehavioralProfile {
        BehavioralProfile {
            app_id: app_id.into(),
            engine,
            manifest_permissions,
            accesses,
            analysis_status: AnalysisStatus::Complete,
            notes: Vec::new(),
        }
    }

    /// A profile whose engine analysis did not finish; accesses are dropped.
    pub fn incomplete(
        app_id: impl Into<String>,
        engine: EngineKind,
        manifest_permissions: BTreeSet<String>,
        status: AnalysisStatus,
        note: impl Into<String>,
    ) -> BehavioralProfile {
        debug_assert_ne!(status, AnalysisStatus::Complete);
        BehavioralProfile {
            app_id: app_id.into(),
            engine,
            manifest_permissions,
            accesses: Vec::new(),
            analysis_status: status,
            notes: vec![note.into()],
        }
    }

    pub fn accessed_types(&self) -> BTreeSet<DataType> {
        self.accesses.iter().map(|a| a.data_type).collect()
    }
}

/// Results of analyzing the policy text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAnalysis {
    pub word_count: usize,
    pub validity: Validity,
    pub vr_specific: bool,
    pub specificity_hits: Vec<String>,
    /// Absent for a document with no words.
    pub readability: Option<ReadabilityReport>,
    pub coverage: ComponentCoverage,
    pub declared: DeclaredSet,
    pub child_age: Option<ChildAge>,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclarativeProfile {
    pub app_id: String,
    pub record: AppRecord,
    /// Absent only when no policy text was available.
    pub policy: Option<PolicyAnalysis>,
    pub link_status: Option<ProbeResult>,
    pub language_variants: Option<BTreeMap<String, VariantStatus>>,
}

impl DeclarativeProfile {
    pub fn new(record: AppRecord, policy: Option<PolicyAnalysis>) -> DeclarativeProfile {
        DeclarativeProfile {
            app_id: record.app_id.clone(),
            record,
            policy,
            link_status: None,
            language_variants: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warn,
    Violation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    #[serde(rename = "F_PERM_DISCREPANCY")]
    PermDiscrepancy,
    #[serde(rename = "F_CROSS_PLATFORM_PERM")]
    CrossPlatformPerm,
    #[serde(rename = "F_CHILD_INCONSISTENCY")]
    ChildInconsistency,
    #[serde(rename = "F_CHILD_DISCREPANCY")]
    ChildDiscrepancy,
    #[serde(rename = "F_BEHAVIOR_UNDECLARED")]
    BehaviorUndeclared,
    #[serde(rename = "F_BEHAVIOR_VAGUE")]
    BehaviorVague,
    #[serde(rename = "F_POLICY_INVALID")]
    PolicyInvalid,
    #[serde(rename = "F_POLICY_NOT_VR")]
    PolicyNotVr,
    #[serde(rename = "F_LINK_BROKEN")]
    LinkBroken,
    #[serde(rename = "F_LANG_GAP")]
    LangGap,
}

impl FindingCode {
    pub const ALL: [FindingCode; 10] = [
        FindingCode::PermDiscrepancy,
        FindingCode::CrossPlatformPerm,
        FindingCode::ChildInconsistency,
        FindingCode::ChildDiscrepancy,
        FindingCode::BehaviorUndeclared,
        FindingCode::BehaviorVague,
        FindingCode::PolicyInvalid,
        FindingCode::PolicyNotVr,
        FindingCode::LinkBroken,
        FindingCode::LangGap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::PermDiscrepancy => "F_PERM_DISCREPANCY",
            FindingCode::CrossPlatformPerm => "F_CROSS_PLATFORM_PERM",
            FindingCode::ChildInconsistency => "F_CHILD_INCONSISTENCY",
            FindingCode::ChildDiscrepancy => "F_CHILD_DISCREPANCY",
            FindingCode::BehaviorUndeclared => "F_BEHAVIOR_UNDECLARED",
            FindingCode::BehaviorVague => "F_BEHAVIOR_VAGUE",
            FindingCode::PolicyInvalid => "F_POLICY_INVALID",
            FindingCode::PolicyNotVr => "F_POLICY_NOT_VR",
            FindingCode::LinkBroken => "F_LINK_BROKEN",
            FindingCode::LangGap => "F_LANG_GAP",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            FindingCode::ChildDiscrepancy | FindingCode::BehaviorUndeclared | FindingCode::PolicyInvalid => {
                Severity::Violation
            }
            FindingCode::PermDiscrepancy
            | FindingCode::CrossPlatformPerm
            | FindingCode::ChildInconsistency
            | FindingCode::BehaviorVague
            | FindingCode::LinkBroken => Severity::Warn,
            FindingCode::PolicyNotVr | FindingCode::LangGap => Severity::Info,
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub app_id: String,
    /// Never empty.
    pub evidence: Vec<String>,
    pub severity: Severity,
}

impl Finding {
    pub fn new(code: FindingCode, app_id: &str, evidence: Vec<String>) -> Finding {
        assert!(!evidence.is_empty(), "{code} finding without evidence");
        Finding { code, app_id: app_id.to_string(), evidence, severity: code.severity() }
    }
}

/// Tunables for the checks, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceConfig {
    /// Permission short names never reported as undisclosed.
    pub benign_permissions: BTreeSet<String>,
    /// URL prefixes of the stores' own privacy policies.
    pub store_policy_urls: Vec<String>,
}

impl Default for ComplianceConfig {
    fn default() -> Self {
        ComplianceConfig::from_json(DEFAULT_COMPLIANCE_JSON).expect("bundled compliance config parses")
    }
}

impl ComplianceConfig {
    pub fn from_json(text: &str) -> Result<ComplianceConfig, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// `android.permission.CAMERA` and `CAMERA` both become `CAMERA`.
pub fn permission_short_name(p: &str) -> &str {
    let p = p.trim();
    p.rsplit('.').next().unwrap_or(p)
}

pub fn check_permission_discrepancy(
    profile: &BehavioralProfile,
    record: &AppRecord,
    config: &ComplianceConfig,
) -> Vec<Finding> {
    let Some(declared) = &record.declared_permissions else {
        return Vec::new();
    };
    let declared: BTreeSet<&str> = declared.iter().map(|p| permission_short_name(p)).collect();
    let undisclosed: Vec<String> = profile
        .manifest_permissions
        .iter()
        .filter(|p| {
            let short = permission_short_name(p);
            !declared.contains(short) && !config.benign_permissions.contains(short)
        })
        .cloned()
        .collect();
    if undisclosed.is_empty() {
        Vec::new()
    } else {
        vec![Finding::new(FindingCode::PermDiscrepancy, &record.app_id, undisclosed)]
    }
}

/// Store whose custom permission namespace `permission` belongs to.
pub fn permission_vendor(permission: &str) -> Option<Store> {
    if permission.starts_with("com.oculus.permission.") {
        Some(Store::Oculus)
    } else if permission.starts_with("com.picovr.permission.") {
        Some(Store::Pico)
    } else {
        None
    }
}

pub fn check_cross_platform_permissions(profile: &BehavioralProfile, record: &AppRecord) -> Vec<Finding> {
    let foreign: Vec<String> = profile
        .manifest_permissions
        .iter()
        .filter(|p| permission_vendor(p).is_some_and(|v| v != record.store))
        .cloned()
        .collect();
    if foreign.is_empty() {
        Vec::new()
    } else {
        vec![Finding::new(FindingCode::CrossPlatformPerm, &record.app_id, foreign)]
    }
}

/// Inconsistency: an all-ages app whose policy has no children clause.
/// Discrepancy: the store's minimum age exceeds the policy's age limit.
pub fn check_children(declarative: &DeclarativeProfile) -> Vec<Finding> {
    let record = &declarative.record;
    let (Some(rating), Some(policy)) = (record.age_rating, &declarative.policy) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if rating == AgeRating::All && !policy.coverage.has(Component::Children) {
        out.push(Finding::new(
            FindingCode::ChildInconsistency,
            &record.app_id,
            vec!["age_rating=all".into(), "policy has no CHILDREN component".into()],
        ));
    }
    if let (AgeRating::Min(store_age), Some(child)) = (rating, &policy.child_age) {
        if store_age > child.age {
            out.push(Finding::new(
                FindingCode::ChildDiscrepancy,
                &record.app_id,
                vec![format!("age_rating={store_age}"), format!("policy_age={}", child.age)],
            ));
        }
    }
    out
}

pub fn check_behavior_declaration(behavioral: &BehavioralProfile, declarative: &DeclarativeProfile) -> Vec<Finding> {
    if behavioral.analysis_status != AnalysisStatus::Complete {
        return Vec::new();
    }
    let empty = DeclaredSet::default();
    let declared = declarative.policy.as_ref().map_or(&empty, |p| &p.declared);
    let mut apis: BTreeMap<DataType, BTreeSet<&str>> = BTreeMap::new();
    for a in &behavioral.accesses {
        apis.entry(a.data_type).or_default().insert(&a.api_name);
    }
    let mut out = Vec::new();
    for (dt, names) in apis {
        if declared.specific.contains(&dt) {
            continue;
        }
        let code = if declared.vague { FindingCode::BehaviorVague } else { FindingCode::BehaviorUndeclared };
        let mut evidence = vec![dt.to_string()];
        evidence.extend(names.into_iter().map(|n| format!("via {n}")));
        out.push(Finding::new(code, &behavioral.app_id, evidence));
    }
    out
}

pub fn check_policy(declarative: &DeclarativeProfile) -> Vec<Finding> {
    let id = &declarative.app_id;
    let mut out = Vec::new();
    match &declarative.policy {
        None if declarative.record.policy_url.is_none() => {
            out.push(Finding::new(FindingCode::PolicyInvalid, id, vec!["no privacy policy provided".into()]));
        }
        None => {}
        Some(p) => {
            if p.validity != Validity::Valid {
                out.push(Finding::new(
                    FindingCode::PolicyInvalid,
                    id,
                    vec![p.validity.as_str().to_string(), format!("{} words", p.word_count)],
                ));
            }
            if !p.vr_specific {
                out.push(Finding::new(FindingCode::PolicyNotVr, id, vec!["no VR-specific terms or app name".into()]));
            }
        }
    }
    if let Some(link) = &declarative.link_status {
        if link.status != crate::probe::LinkStatus::Ok {
            out.push(Finding::new(
                FindingCode::LinkBroken,
                id,
                vec![link.url.clone(), link.status.class_label().to_string()],
            ));
        }
    }
    if let Some(variants) = &declarative.language_variants {
        let missing: Vec<String> = variants
            .iter()
            .filter(|(_, s)| **s == VariantStatus::Missing)
            .map(|(l, _)| l.clone())
            .collect();
        if !missing.is_empty() {
            out.push(Finding::new(FindingCode::LangGap, id, missing));
        }
    }
    out
}

/// Every check for one app, sorted. `behavioral` is `None` when no APK was
/// available.
pub fn run_checks(
    behavioral: Option<&BehavioralProfile>,
    declarative: &DeclarativeProfile,
    config: &ComplianceConfig,
) -> Vec<Finding> {
    let mut out = Vec::new();
    if let Some(b) = behavioral {
        out.extend(check_permission_discrepancy(b, &declarative.record, config));
        out.extend(check_cross_platform_permissions(b, &declarative.record));
        out.extend(check_behavior_declaration(b, declarative));
    }
    out.extend(check_children(declarative));
    out.extend(check_policy(declarative));
    out.sort();
    out
}
