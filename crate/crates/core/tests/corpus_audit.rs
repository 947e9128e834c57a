//! Audits the synthetic corpora and checks every report cell against a
//! tabulation computed from the corpus specs alone.

use std::collections::{BTreeMap, BTreeSet};

use vraudit::compliance::{AnalysisStatus, ComplianceConfig, FindingCode, StoreReport};
use vraudit::pipeline::{run_audit, AuditConfig};
use vraudit::catalog::SensitivityCatalog;
use vraudit_fixtures::corpus::{synthetic_corpus, three_app_corpus, write_corpus, Age, AppSpec, Build, STORE_POLICY_URL};

fn audit(apps: &[AppSpec], workers: usize) -> StoreReport {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_corpus(dir.path(), apps).unwrap();
    let cfg = AuditConfig {
        records_path: paths.records,
        apk_dir: Some(paths.apk_dir),
        policy_dir: Some(paths.policy_dir),
        workers,
        live: None,
        compliance: ComplianceConfig::default(),
    };
    run_audit(&cfg, &SensitivityCatalog::default_catalog(), None).unwrap()
}

/// (count, denominator) pairs keyed by a flat cell name.
type Sheet = BTreeMap<String, (usize, usize)>;

fn validity_of(a: &AppSpec) -> &'static str {
    match &a.policy {
        None => "Missing",
        Some(_) if a.policy_url.as_deref() == Some(STORE_POLICY_URL) => "StoreGeneric",
        Some(p) if !p.long => "TooShort",
        Some(_) => "Valid",
    }
}

fn components_of(a: &AppSpec) -> BTreeSet<&'static str> {
    match &a.policy {
        Some(p) if p.long => {
            let mut c: BTreeSet<&str> = ["COLLECT", "DATA_USE", "SHARE", "RETENTION", "SECURITY", "PROVIDER"].into();
            if p.children.is_some() {
                c.insert("CHILDREN");
            }
            c
        }
        _ => BTreeSet::new(),
    }
}

fn declared(a: &AppSpec, dt: &str) -> bool {
    a.policy.as_ref().is_some_and(|p| p.long && p.declares.contains(dt))
}

fn oracle(apps: &[AppSpec]) -> Sheet {
    let mut s = Sheet::new();
    let mut bump = |k: String, hit: bool| {
        let e = s.entry(k).or_insert((0, 0));
        e.1 += 1;
        if hit {
            e.0 += 1;
        }
    };
    for a in apps {
        let st = a.store;
        if let Some(b) = a.build.filter(|b| *b != Build::Garbage) {
            let row = format!("behavior/{st}/{}", b.engine_family());
            bump(format!("{row}/lf"), !b.analyzable());
            if b.analyzable() {
                let acc = a.expected_accesses();
                for dt in ["Body", "Face", "Eye", "Hand"] {
                    bump(format!("{row}/{dt}/access"), acc.contains(dt));
                    if acc.contains(dt) {
                        bump(format!("{row}/{dt}/declared"), declared(a, dt));
                    }
                }
                bump(format!("noncompliance/{st}"), acc.iter().any(|d| !declared(a, d)));
            }
        }
        let v = validity_of(a);
        for l in ["Valid", "TooShort", "StoreGeneric", "Missing"] {
            bump(format!("policy/{st}/validity/{l}"), v == l);
        }
        if let Some(p) = &a.policy {
            bump(format!("policy/{st}/vr"), p.vr);
            let comps = components_of(a);
            for c in ["COLLECT", "SHARE", "SECURITY", "RIGHT", "CHILDREN", "REGION", "UPDATE", "PROVIDER", "RETENTION", "DATA_USE"] {
                bump(format!("components/{st}/{c}"), comps.contains(c));
            }
        }
        let has_children = a.policy.as_ref().is_some_and(|p| p.long && p.children.is_some());
        let inconsistent = a.policy.is_some() && a.age_rating == Some(Age::All) && !has_children;
        let policy_age = a.policy.as_ref().and_then(|p| p.children.flatten().filter(|_| p.long));
        let discrepant = matches!((a.age_rating, policy_age), (Some(Age::Min(r)), Some(p)) if r > p);
        for key in [format!("children/{st}/{}", a.category), format!("children/{st}/Total")] {
            bump(format!("{key}/I"), inconsistent);
            bump(format!("{key}/D"), discrepant);
        }
    }
    s
}

fn sheet_of(r: &StoreReport) -> Sheet {
    let mut s = Sheet::new();
    let mut put = |k: String, c: usize, d: usize| {
        if d > 0 {
            s.insert(k, (c, d));
        }
    };
    for row in &r.behavior {
        let key = format!("behavior/{}/{}", row.store, row.engine);
        put(format!("{key}/lf"), row.lacks_files, row.apps);
        for c in &row.cells {
            put(format!("{key}/{}/access", c.data_type), c.access.count, c.access.denominator);
            put(format!("{key}/{}/declared", c.data_type), c.declared.count, c.declared.denominator);
        }
    }
    for row in &r.non_compliance {
        put(format!("noncompliance/{}", row.store), row.non_compliant.count, row.non_compliant.denominator);
    }
    for row in &r.policy {
        for l in &row.validity {
            put(format!("policy/{}/validity/{}", row.store, l.label), l.ratio.count, l.ratio.denominator);
        }
        put(format!("policy/{}/vr", row.store), row.vr_specific.count, row.vr_specific.denominator);
    }
    for row in &r.components {
        for l in &row.coverage {
            put(format!("components/{}/{}", row.store, l.label), l.ratio.count, l.ratio.denominator);
        }
    }
    for row in r.children.iter().chain(&r.children_totals) {
        let key = format!("children/{}/{}", row.store, row.category);
        put(format!("{key}/I"), row.inconsistency.count, row.inconsistency.denominator);
        put(format!("{key}/D"), row.discrepancy.count, row.discrepancy.denominator);
    }
    s
}

fn assert_sheets_equal(got: &Sheet, want: &Sheet) {
    let keys: BTreeSet<&String> = got.keys().chain(want.keys()).collect();
    let diffs: Vec<String> = keys
        .into_iter()
        .filter(|k| got.get(*k) != want.get(*k))
        .map(|k| format!("{k}: report {:?}, oracle {:?}", got.get(k), want.get(k)))
        .collect();
    assert!(diffs.is_empty(), "{} cell(s) differ:\n{}", diffs.len(), diffs.join("\n"));
}

#[test]
fn per_app_ground_truth() {
    let apps = synthetic_corpus(40, 7);
    let report = audit(&apps, 4);
    let by_id: BTreeMap<&str, &AppSpec> = apps.iter().map(|a| (a.app_id.as_str(), a)).collect();
    for audit in &report.apps {
        let spec = by_id[audit.app_id.as_str()];
        match (spec.build, &audit.behavioral) {
            (None, None) => {}
            (Some(Build::Garbage), None) => assert!(audit.errors.iter().any(|e| e.contains("NotAZip")), "{:?}", audit.errors),
            (Some(b), Some(p)) => {
                let want = if b.analyzable() {
                    AnalysisStatus::Complete
                } else if b == Build::NoEngine {
                    AnalysisStatus::Unsupported
                } else {
                    AnalysisStatus::LacksFiles
                };
                assert_eq!(p.analysis_status, want, "{}", spec.app_id);
                let got: BTreeSet<String> = p.accessed_types().iter().map(|d| d.to_string()).collect();
                let want: BTreeSet<String> = spec.expected_accesses().iter().map(|d| d.to_string()).collect();
                assert_eq!(got, want, "{} ({b:?})", spec.app_id);
                let perms: Vec<&String> = p.manifest_permissions.iter().collect();
                let mut want_perms: Vec<&String> = spec.manifest_permissions.iter().collect();
                want_perms.sort();
                assert_eq!(perms, want_perms);
            }
            (b, p) => panic!("{}: build {b:?} but profile {p:?}", spec.app_id),
        }
        if let (Some(ps), Some(pa)) = (&spec.policy, &audit.declarative.policy) {
            if ps.long {
                let got: BTreeSet<String> = pa.declared.specific.iter().map(|d| d.to_string()).collect();
                let want: BTreeSet<String> = ps.declares.iter().map(|d| d.to_string()).collect();
                assert_eq!(got, want, "{}", spec.app_id);
                assert_eq!(pa.declared.vague, ps.vague, "{}", spec.app_id);
                assert_eq!(pa.child_age.as_ref().map(|c| c.age), ps.children.flatten(), "{}", spec.app_id);
            }
        }
    }
}

#[test]
fn twenty_app_tables_match_oracle() {
    let apps = synthetic_corpus(20, 20);
    let report = audit(&apps, 4);
    assert_eq!(report.app_count, 20);
    assert_sheets_equal(&sheet_of(&report), &oracle(&apps));
}

#[test]
fn larger_corpora_match_oracle() {
    for seed in [1, 2, 3] {
        let apps = synthetic_corpus(60, seed);
        assert_sheets_equal(&sheet_of(&audit(&apps, 8)), &oracle(&apps));
    }
}

#[test]
fn children_rows_sum_to_known_categories() {
    let apps = synthetic_corpus(50, 11);
    let report = audit(&apps, 2);
    for total in &report.children_totals {
        let sum: usize = report.children.iter().filter(|r| r.store == total.store).map(|r| r.apps).sum();
        assert_eq!(sum, total.apps);
    }
    let known = report.apps.iter().filter(|a| !a.declarative.record.category.trim().is_empty()).count();
    assert_eq!(report.children.iter().map(|r| r.apps).sum::<usize>(), known);
}

#[test]
fn behavior_findings_only_for_complete_profiles() {
    let apps = synthetic_corpus(60, 5);
    let report = audit(&apps, 3);
    for a in &report.apps {
        let behavior: Vec<_> = a
            .findings
            .iter()
            .filter(|f| matches!(f.code, FindingCode::BehaviorUndeclared | FindingCode::BehaviorVague))
            .collect();
        match &a.behavioral {
            Some(b) if b.analysis_status == AnalysisStatus::Complete => {
                let types: BTreeSet<String> = b.accessed_types().iter().map(|d| d.to_string()).collect();
                for f in behavior {
                    assert!(types.contains(&f.evidence[0]), "{f:?}");
                }
            }
            _ => assert!(behavior.is_empty(), "{}: {behavior:?}", a.app_id),
        }
    }
}

#[test]
fn three_app_expected_findings() {
    let report = audit(&three_app_corpus(), 2);
    let codes: BTreeMap<&str, Vec<&str>> = report
        .apps
        .iter()
        .map(|a| (a.app_id.as_str(), a.findings.iter().map(|f| f.code.as_str()).collect()))
        .collect();
    assert_eq!(
        codes["beat-arena"],
        vec!["F_PERM_DISCREPANCY", "F_CHILD_DISCREPANCY", "F_BEHAVIOR_UNDECLARED"]
    );
    assert_eq!(
        codes["cloud-garden"],
        vec!["F_PERM_DISCREPANCY", "F_CROSS_PLATFORM_PERM", "F_CHILD_INCONSISTENCY", "F_BEHAVIOR_VAGUE", "F_BEHAVIOR_VAGUE"]
    );
    let garden = report.apps.iter().find(|a| a.app_id == "cloud-garden").unwrap();
    assert_eq!(garden.findings[0].evidence, vec!["com.oculus.permission.HAND_TRACKING".to_string()]);
    assert_eq!(codes["quiet-museum"], vec!["F_CHILD_INCONSISTENCY", "F_POLICY_INVALID", "F_POLICY_NOT_VR"]);
    assert!(report.notes.iter().any(|n| n.contains("offline")));
}
