//! Store-level aggregation and rendering.
//!
//! Every cell carries its numerator and denominator. Percentages are derived
//! from the two in integer arithmetic and rounded half-up to one decimal, so
//! the report is byte-stable across platforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnalysisStatus, BehavioralProfile, DeclarativeProfile, Finding, FindingCode};
use crate::apk::EngineKind;
use crate::policy::{Component, Validity};
use crate::probe::LinkStatus;
use crate::taxonomy::{DataType, Store};

pub const REPORT_SCHEMA: &str = "report_v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no audits to aggregate")]
    EmptyRunSet,
}

/// Everything known about one app after the checks ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppAudit {
    pub app_id: String,
    /// `None` when no APK was supplied or it could not be opened.
    pub behavioral: Option<BehavioralProfile>,
    pub declarative: DeclarativeProfile,
    pub findings: Vec<Finding>,
    /// Per-app failures that did not stop the run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub count: usize,
    pub denominator: usize,
    /// `None` when the denominator is zero.
    pub percent: Option<f64>,
}

/// `count / denominator` in percent, in tenths, rounded half-up.
pub fn percent_tenths(count: usize, denominator: usize) -> Option<u64> {
    if denominator == 0 {
        return None;
    }
    let (c, d) = (count as u64, denominator as u64);
    Some((c * 2000 + d) / (2 * d))
}

impl Ratio {
    pub fn new(count: usize, denominator: usize) -> Ratio {
        Ratio { count, denominator, percent: percent_tenths(count, denominator).map(|t| t as f64 / 10.0) }
    }

    fn percent_text(&self) -> String {
        match percent_tenths(self.count, self.denominator) {
            Some(t) => format!("{}.{}", t / 10, t % 10),
            None => "-".into(),
        }
    }

    fn cell(&self) -> String {
        format!("{} ({}%)", self.count, self.percent_text())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub label: String,
    #[serde(flatten)]
    pub ratio: Ratio,
}

fn labeled(label: impl Into<String>, count: usize, denominator: usize) -> Labeled {
    Labeled { label: label.into(), ratio: Ratio::new(count, denominator) }
}

/// Engine family used for report rows.
pub fn engine_family(kind: EngineKind) -> &'static str {
    match kind {
        EngineKind::UnityIl2cpp | EngineKind::UnityMono => "Unity",
        EngineKind::Unreal => "Unreal",
        EngineKind::Unknown => "Unknown",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTypeCell {
    pub data_type: DataType,
    /// Apps whose code or config accesses the type, over analyzed apps.
    pub access: Ratio,
    /// Accessing apps whose policy names the type, over accessing apps.
    pub declared: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRow {
    pub store: Store,
    pub engine: String,
    pub apps: usize,
    pub analyzed: usize,
    /// Apps lacking analyzable engine files.
    pub lacks_files: usize,
    pub cells: Vec<DataTypeCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonComplianceRow {
    pub store: Store,
    /// Analyzed apps with an undeclared or vaguely declared access.
    pub non_compliant: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub store: Store,
    pub apps: usize,
    pub with_policy: usize,
    /// Over all apps; `Missing` counts apps without policy text.
    pub validity: Vec<Labeled>,
    /// Over apps with policy text.
    pub vr_specific: Ratio,
    pub links_checked: usize,
    /// Over probed links, one entry per status class.
    pub link_status: Vec<Labeled>,
    /// Probed links that did not end in a 2xx.
    pub link_failures: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub store: Store,
    pub policies: usize,
    pub coverage: Vec<Labeled>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildrenRow {
    pub store: Store,
    pub category: String,
    pub apps: usize,
    pub inconsistency: Ratio,
    pub discrepancy: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreReport {
    pub schema: String,
    pub app_count: usize,
    pub notes: Vec<String>,
    pub behavior: Vec<BehaviorRow>,
    pub non_compliance: Vec<NonComplianceRow>,
    pub policy: Vec<PolicyRow>,
    pub components: Vec<ComponentRow>,
    /// One row per store and known category.
    pub children: Vec<ChildrenRow>,
    /// Per-store totals over apps with a known category.
    pub children_totals: Vec<ChildrenRow>,
    pub finding_counts: BTreeMap<FindingCode, usize>,
    pub apps: Vec<AppAudit>,
}

fn has_code(a: &AppAudit, codes: &[FindingCode]) -> bool {
    a.findings.iter().any(|f| codes.contains(&f.code))
}

fn store_of(a: &AppAudit) -> Store {
    a.declarative.record.store
}

fn behavior_rows(apps: &[&AppAudit]) -> Vec<BehaviorRow> {
    let mut groups: BTreeMap<(Store, &'static str), Vec<(&AppAudit, &BehavioralProfile)>> = BTreeMap::new();
    for a in apps {
        if let Some(b) = &a.behavioral {
            groups.entry((store_of(a), engine_family(b.engine))).or_default().push((a, b));
        }
    }
    groups
        .into_iter()
        .map(|((store, engine), members)| {
            let analyzed: Vec<_> =
                members.iter().filter(|(_, b)| b.analysis_status == AnalysisStatus::Complete).collect();
            let cells = DataType::ALL
                .into_iter()
                .map(|dt| {
                    let accessing: Vec<_> = analyzed.iter().filter(|(_, b)| b.accessed_types().contains(&dt)).collect();
                    let declared = accessing
                        .iter()
                        .filter(|(a, _)| a.declarative.policy.as_ref().is_some_and(|p| p.declared.specific.contains(&dt)))
                        .count();
                    DataTypeCell {
                        data_type: dt,
                        access: Ratio::new(accessing.len(), analyzed.len()),
                        declared: Ratio::new(declared, accessing.len()),
                    }
                })
                .collect();
            BehaviorRow {
                store,
                engine: engine.to_string(),
                apps: members.len(),
                analyzed: analyzed.len(),
                lacks_files: members.len() - analyzed.len(),
                cells,
            }
        })
        .collect()
}

fn non_compliance_rows(apps: &[&AppAudit]) -> Vec<NonComplianceRow> {
    let mut per: BTreeMap<Store, (usize, usize)> = BTreeMap::new();
    for a in apps {
        let Some(b) = &a.behavioral else { continue };
        if b.analysis_status != AnalysisStatus::Complete {
            continue;
        }
        let e = per.entry(store_of(a)).or_default();
        e.1 += 1;
        if has_code(a, &[FindingCode::BehaviorUndeclared, FindingCode::BehaviorVague]) {
            e.0 += 1;
        }
    }
    per.into_iter()
        .map(|(store, (n, d))| NonComplianceRow { store, non_compliant: Ratio::new(n, d) })
        .collect()
}

const VALIDITY_LABELS: [&str; 4] = ["Valid", "TooShort", "StoreGeneric", "Missing"];

fn by_store<'a>(apps: &[&'a AppAudit]) -> BTreeMap<Store, Vec<&'a AppAudit>> {
    let mut m: BTreeMap<Store, Vec<&AppAudit>> = BTreeMap::new();
    for a in apps {
        m.entry(store_of(a)).or_default().push(a);
    }
    m
}

fn policy_rows(apps: &[&AppAudit]) -> Vec<PolicyRow> {
    by_store(apps)
        .into_iter()
        .map(|(store, members)| {
            let policies: Vec<_> = members.iter().filter_map(|a| a.declarative.policy.as_ref()).collect();
            let validity_label = |v: Validity| v.as_str();
            let validity = VALIDITY_LABELS
                .iter()
                .map(|l| {
                    let n = if *l == "Missing" {
                        members.len() - policies.len()
                    } else {
                        policies.iter().filter(|p| validity_label(p.validity) == *l).count()
                    };
                    labeled(*l, n, members.len())
                })
                .collect();
            let links: Vec<LinkStatus> =
                members.iter().filter_map(|a| a.declarative.link_status.as_ref().map(|l| l.status)).collect();
            let link_status = LinkStatus::CLASS_LABELS
                .iter()
                .map(|l| labeled(*l, links.iter().filter(|s| s.class_label() == *l).count(), links.len()))
                .collect();
            PolicyRow {
                store,
                apps: members.len(),
                with_policy: policies.len(),
                validity,
                vr_specific: Ratio::new(policies.iter().filter(|p| p.vr_specific).count(), policies.len()),
                links_checked: links.len(),
                link_status,
                link_failures: Ratio::new(links.iter().filter(|s| **s != LinkStatus::Ok).count(), links.len()),
            }
        })
        .collect()
}

fn component_rows(apps: &[&AppAudit]) -> Vec<ComponentRow> {
    by_store(apps)
        .into_iter()
        .map(|(store, members)| {
            let policies: Vec<_> = members.iter().filter_map(|a| a.declarative.policy.as_ref()).collect();
            let coverage = Component::ALL
                .iter()
                .map(|c| labeled(c.as_str(), policies.iter().filter(|p| p.coverage.has(*c)).count(), policies.len()))
                .collect();
            ComponentRow { store, policies: policies.len(), coverage }
        })
        .collect()
}

fn children_row(store: Store, category: String, members: &[&AppAudit]) -> ChildrenRow {
    let i = members.iter().filter(|a| has_code(a, &[FindingCode::ChildInconsistency])).count();
    let d = members.iter().filter(|a| has_code(a, &[FindingCode::ChildDiscrepancy])).count();
    ChildrenRow {
        store,
        category,
        apps: members.len(),
        inconsistency: Ratio::new(i, members.len()),
        discrepancy: Ratio::new(d, members.len()),
    }
}

fn children_rows(apps: &[&AppAudit]) -> (Vec<ChildrenRow>, Vec<ChildrenRow>) {
    let mut groups: BTreeMap<(Store, String), Vec<&AppAudit>> = BTreeMap::new();
    for a in apps {
        let category = a.declarative.record.category.trim();
        if !category.is_empty() {
            groups.entry((store_of(a), category.to_string())).or_default().push(a);
        }
    }
    let rows: Vec<ChildrenRow> =
        groups.iter().map(|((s, c), m)| children_row(*s, c.clone(), m)).collect();
    let mut per_store: BTreeMap<Store, Vec<&AppAudit>> = BTreeMap::new();
    for ((s, _), m) in &groups {
        per_store.entry(*s).or_default().extend(m.iter().copied());
    }
    let totals = per_store.into_iter().map(|(s, m)| children_row(s, "Total".into(), &m)).collect();
    (rows, totals)
}

/// Folds per-app audits into store-level tables. Input order does not
/// matter; apps are sorted by id.
pub fn aggregate_report(audits: &[AppAudit], notes: &[String]) -> Result<StoreReport, ReportError> {
    if audits.is_empty() {
        return Err(ReportError::EmptyRunSet);
    }
    let mut apps: Vec<&AppAudit> = audits.iter().collect();
    apps.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    let mut finding_counts: BTreeMap<FindingCode, usize> = FindingCode::ALL.iter().map(|c| (*c, 0)).collect();
    for a in &apps {
        for f in &a.findings {
            *finding_counts.entry(f.code).or_default() += 1;
        }
    }
    let (children, children_totals) = children_rows(&apps);
    let notes: BTreeSet<String> = notes.iter().cloned().collect();
    Ok(StoreReport {
        schema: REPORT_SCHEMA.to_string(),
        app_count: apps.len(),
        notes: notes.into_iter().collect(),
        behavior: behavior_rows(&apps),
        non_compliance: non_compliance_rows(&apps),
        policy: policy_rows(&apps),
        components: component_rows(&apps),
        children,
        children_totals,
        finding_counts,
        apps: apps.into_iter().cloned().collect(),
    })
}

/// Left-aligned first column, right-aligned rest, two-space gutters.
fn render_table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut width = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |out: &mut String, r: &[String]| {
        let mut s = String::new();
        for (i, c) in r.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = width[i] - c.chars().count();
            if i < 2 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    let _ = writeln!(out, "{title}");
    line(out, header);
    let total: usize = width.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(out, r);
    }
    out.push('\n');
}

fn strings<const N: usize>(a: [&str; N]) -> Vec<String> {
    a.iter().map(|s| s.to_string()).collect()
}

impl StoreReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} apps)\n", self.schema, self.app_count);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if !self.notes.is_empty() {
            out.push('\n');
        }

        let mut header = strings(["Store", "Engine", "Apps", "LF"]);
        header.extend(DataType::ALL.iter().map(|d| d.to_string()));
        let mut rows = Vec::new();
        for r in &self.behavior {
            let mut access = vec![r.store.to_string(), r.engine.clone(), r.apps.to_string(), r.lacks_files.to_string()];
            access.extend(r.cells.iter().map(|c| c.access.cell()));
            let mut declared = strings(["", "  declared", "", ""]);
            declared.extend(r.cells.iter().map(|c| c.declared.cell()));
            rows.push(access);
            rows.push(declared);
        }
        render_table(&mut out, "Sensitive data access and declaration", &header, &rows);

        let rows: Vec<Vec<String>> = self
            .non_compliance
            .iter()
            .map(|r| vec![r.store.to_string(), r.non_compliant.cell()])
            .collect();
        render_table(&mut out, "Behavior-declaration non-compliance", &strings(["Store", "Apps"]), &rows);

        let mut header = strings(["Store", "Apps"]);
        header.extend(VALIDITY_LABELS.iter().map(|s| s.to_string()));
        header.extend(strings(["VR-specific", "Links", "Broken"]));
        header.extend(LinkStatus::CLASS_LABELS.iter().skip(1).map(|s| s.to_string()));
        let rows: Vec<Vec<String>> = self
            .policy
            .iter()
            .map(|r| {
                let mut row = vec![r.store.to_string(), r.apps.to_string()];
                row.extend(r.validity.iter().map(|l| l.ratio.cell()));
                row.push(r.vr_specific.cell());
                row.push(r.links_checked.to_string());
                row.push(r.link_failures.cell());
                row.extend(r.link_status.iter().skip(1).map(|l| l.ratio.cell()));
                row
            })
            .collect();
        render_table(&mut out, "Policy validity and link status", &header, &rows);

        let mut header = strings(["Store", "Policies"]);
        header.extend(Component::ALL.iter().map(|c| c.as_str().to_string()));
        let rows: Vec<Vec<String>> = self
            .components
            .iter()
            .map(|r| {
                let mut row = vec![r.store.to_string(), r.policies.to_string()];
                row.extend(r.coverage.iter().map(|l| l.ratio.cell()));
                row
            })
            .collect();
        render_table(&mut out, "Policy component coverage", &header, &rows);

        let rows: Vec<Vec<String>> = self
            .children
            .iter()
            .chain(&self.children_totals)
            .map(|r| {
                vec![
                    r.store.to_string(),
                    r.category.clone(),
                    r.apps.to_string(),
                    r.inconsistency.cell(),
                    r.discrepancy.cell(),
                ]
            })
            .collect();
        render_table(&mut out, "Children protection", &strings(["Store", "Category", "Apps", "I", "D"]), &rows);

        let rows: Vec<Vec<String>> = self
            .finding_counts
            .iter()
            .map(|(c, n)| vec![c.as_str().to_string(), format!("{:?}", c.severity()), n.to_string()])
            .collect();
        render_table(&mut out, "Findings", &strings(["Code", "Severity", "Count"]), &rows);

        let rows: Vec<Vec<String>> = self
            .apps
            .iter()
            .flat_map(|a| {
                a.findings.iter().map(|f| vec![a.app_id.clone(), f.code.as_str().to_string(), f.evidence.join("; ")])
            })
            .collect();
        render_table(&mut out, "Findings by app", &strings(["App", "Code", "Evidence"]), &rows);
        out.trim_end().to_string() + "\n"
    }

    /// Long format: one line per cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["table", "store", "group", "metric", "count", "denominator", "percent"])
            .expect("in-memory write");
        let mut put = |table: &str, store: Store, group: &str, metric: &str, r: &Ratio| {
            let pct = percent_tenths(r.count, r.denominator).map(|t| format!("{}.{}", t / 10, t % 10)).unwrap_or_default();
            w.write_record([
                table,
                store.as_str(),
                group,
                metric,
                &r.count.to_string(),
                &r.denominator.to_string(),
                &pct,
            ])
            .expect("in-memory write");
        };
        for r in &self.behavior {
            for c in &r.cells {
                put("behavior", r.store, &r.engine, &format!("{}_access", c.data_type), &c.access);
                put("behavior", r.store, &r.engine, &format!("{}_declared", c.data_type), &c.declared);
            }
            put("behavior", r.store, &r.engine, "lacks_files", &Ratio::new(r.lacks_files, r.apps));
        }
        for r in &self.non_compliance {
            put("non_compliance", r.store, "", "non_compliant", &r.non_compliant);
        }
        for r in &self.policy {
            for l in &r.validity {
                put("policy", r.store, "validity", &l.label, &l.ratio);
            }
            put("policy", r.store, "specificity", "vr_specific", &r.vr_specific);
            for l in &r.link_status {
                put("policy", r.store, "link_status", &l.label, &l.ratio);
            }
        }
        for r in &self.components {
            for l in &r.coverage {
                put("components", r.store, "", &l.label, &l.ratio);
            }
        }
        for r in self.children.iter().chain(&self.children_totals) {
            put("children", r.store, &r.category, "I", &r.inconsistency);
            put("children", r.store, &r.category, "D", &r.discrepancy);
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
    }
}
