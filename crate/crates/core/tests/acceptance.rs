//! Acceptance gate. Runs each criterion in isolation and prints one
//! `PASS`/`FAIL` line per criterion; exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use regex::Regex;

use vraudit::apk::{extract_entry, open_apk_bytes, parse_manifest, EngineKind};
use vraudit::catalog::{load_catalog, lookup, Rule, RuleKind, SensitivityCatalog, StoreScope, DEFAULT_CATALOG_JSON};
use vraudit::compliance::{
    run_checks, AgeRating, AppRecord, BehavioralProfile, ComplianceConfig, DeclarativeProfile, FindingCode,
};
use vraudit::evidence::{AccessEvidence, EvidenceSource};
use vraudit::pipeline::{analyze_apk_bytes, analyze_policy, rules_for, run_audit, AuditConfig};
use vraudit::policy::components::ComponentRules;
use vraudit::policy::{
    classify_components, detect_language, extract_child_age, readability, segment, validity_check, Component, Validity,
};
use vraudit::probe::{check_link, discover_language_variants, LinkStatus, UreqClient, VariantStatus};
use vraudit::taxonomy::{DataType, Engine, Store};
use vraudit::unity::{analyze_il2cpp_bytes, extract_call_edges, parse_global_metadata};
use vraudit::unreal::analyze_pak;
use vraudit_fixtures::axml::{AttrValue, Element, Manifest};
use vraudit_fixtures::corpus::{synthetic_corpus, write_corpus, PolicySpec};
use vraudit_fixtures::elf::{bl, ElfSpec, NOP, RET};
use vraudit_fixtures::il2cpp::Metadata;
use vraudit_fixtures::pak::PakWriter;
use vraudit_fixtures::zipw::{build_zip, Method};

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("zip/apk round trip", zip_round_trip),
        ("binary xml manifest parity", axml_parity),
        ("aarch64 call edge oracle", call_edge_oracle),
        ("unreal pak config and plugin audit", unreal_fixture),
        ("catalog transcription", catalog_transcription),
        ("readability formulas", readability_formulas),
        ("policy rules", policy_rules),
        ("compliance truth table", compliance_truth_table),
        ("end-to-end determinism", end_to_end_determinism),
        ("offline probe suite", offline_probe_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(()) => println!("PASS {:>2} {name} ({:.2}s)", i + 1, start.elapsed().as_secs_f64()),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {:>2} {name}: {}", i + 1, msg.lines().next().unwrap_or(""));
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ident(rng: &mut StdRng, len: std::ops::Range<usize>) -> String {
    let n = rng.gen_range(len);
    (0..n).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn zip_round_trip() {
    let mut rng = StdRng::seed_from_u64(0x5A1F);
    let start = Instant::now();
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let mut names = BTreeSet::new();
        let mut entries: Vec<(String, Vec<u8>, Method)> = Vec::new();
        while entries.len() < n {
            let dirs: Vec<String> = (0..rng.gen_range(0..3)).map(|_| ident(&mut rng, 1..9)).collect();
            let ext = ["bin", "xml", "dex", "so", "txt", "dat"][rng.gen_range(0..6)];
            let mut path = dirs.join("/");
            if !path.is_empty() {
                path.push('/');
            }
            path.push_str(&format!("{}.{ext}", ident(&mut rng, 1..12)));
            if !names.insert(path.clone()) {
                continue;
            }
            let len = match rng.gen_range(0..4) {
                0 => 0,
                1 => rng.gen_range(1..64),
                2 => rng.gen_range(64..4096),
                _ => rng.gen_range(4096..65536),
            };
            let data: Vec<u8> = if rng.gen_bool(0.5) {
                (0..len).map(|_| rng.gen()).collect()
            } else {
                let motif = ident(&mut rng, 1..16).into_bytes();
                motif.iter().copied().cycle().take(len).collect()
            };
            let method = if rng.gen_bool(0.5) { Method::Stored } else { Method::Deflated };
            entries.push((path, data, method));
        }
        let pkg = open_apk_bytes(build_zip(&entries)).expect("archive opens");
        assert_eq!(pkg.len(), entries.len());
        for (path, data, _) in &entries {
            assert!(extract_entry(&pkg, path).expect("entry extracts") == *data, "{path} differs");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
}

const PERMISSIONS: [&str; 12] = [
    "android.permission.INTERNET",
    "android.permission.CAMERA",
    "android.permission.RECORD_AUDIO",
    "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.BLUETOOTH",
    "android.permission.WRITE_EXTERNAL_STORAGE",
    "com.oculus.permission.HAND_TRACKING",
    "com.oculus.permission.EYE_TRACKING",
    "com.oculus.permission.FACE_TRACKING",
    "com.picovr.permission.FACE_TRACKING",
    "com.picovr.permission.EYE_TRACKING",
    "com.picovr.permission.HAND_TRACKING",
];

fn axml_parity() {
    let mut rng = StdRng::seed_from_u64(0xA0A1);
    let mut seen = BTreeSet::new();
    for i in 0..50 {
        let package = format!("com.{}.{}", ident(&mut rng, 2..8), ident(&mut rng, 2..10));
        let mut perms: Vec<&str> = PERMISSIONS.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        match i {
            0 => perms.push("com.picovr.permission.FACE_TRACKING"),
            1 => perms.push("com.oculus.permission.HAND_TRACKING"),
            _ => {}
        }
        let mut manifest = Manifest::new(&package, &perms);
        if rng.gen_bool(0.5) {
            manifest.extra.push(
                Element::new("uses-feature")
                    .attr(true, "name", AttrValue::Str("android.hardware.vr.headtracking".into()))
                    .attr(true, "required", AttrValue::Bool(true)),
            );
        }
        if rng.gen_bool(0.5) {
            manifest.extra.push(
                Element::new("application")
                    .attr(true, "label", AttrValue::Str(ident(&mut rng, 3..12)))
                    .child(Element::new("activity").attr(true, "name", AttrValue::Str(".Main".into()))),
            );
        }
        let plain = parse_manifest(manifest.to_plain_xml().as_bytes()).expect("plain manifest parses");
        let binary = parse_manifest(&manifest.to_axml(i % 2 == 0)).expect("binary manifest parses");
        assert!(binary.is_binary_xml && !plain.is_binary_xml);
        assert!(binary.same_content(&plain), "manifest {i}: {binary:?} vs {plain:?}");
        let want: BTreeSet<String> = perms.iter().map(|p| p.to_string()).collect();
        assert_eq!(binary.permissions, want);
        assert_eq!(binary.package_name, package);
        seen.extend(binary.permissions);
    }
    assert!(seen.contains("com.picovr.permission.FACE_TRACKING"));
    assert!(seen.contains("com.oculus.permission.HAND_TRACKING"));
}

/// Decodes every word by explicit field masking; the caller is the nearest
/// label at or below the call site, or the call site itself.
fn edge_oracle(addr: u64, words: &[u32], labels: &BTreeSet<u64>) -> BTreeSet<(u64, u64)> {
    let end = addr as i128 + 4 * words.len() as i128;
    let mut out = BTreeSet::new();
    for (i, &w) in words.iter().enumerate() {
        if w & 0xFC00_0000 != 0x9400_0000 {
            continue;
        }
        let raw = (w & 0x03FF_FFFF) as i128;
        let imm = if raw & 0x0200_0000 != 0 { raw - 0x0400_0000 } else { raw };
        let pc = addr as i128 + 4 * i as i128;
        let target = pc + 4 * imm;
        if target < addr as i128 || target >= end {
            continue;
        }
        let caller = labels.iter().rev().find(|&&l| l as i128 <= pc).map_or(pc as u64, |&l| l);
        out.insert((caller, target as u64));
    }
    out
}

fn random_word(rng: &mut StdRng, len: usize) -> u32 {
    match rng.gen_range(0..8) {
        0..=2 => rng.gen(),
        3 | 4 => 0x9400_0000 | (rng.gen::<u32>() & 0x03FF_FFFF),
        5 | 6 => {
            let d = rng.gen_range(-(len as i32)..=len as i32);
            0x9400_0000 | (d as u32 & 0x03FF_FFFF)
        }
        _ => NOP,
    }
}

fn call_edge_oracle() {
    let mut rng = StdRng::seed_from_u64(0xB1);
    for case in 0..1000 {
        let addr = rng.gen_range(1u64..0x10000) * 0x1000;
        let len = rng.gen_range(0..160);
        let words: Vec<u32> = (0..len).map(|_| random_word(&mut rng, len)).collect();
        let labels: BTreeSet<u64> = (0..rng.gen_range(0..8))
            .filter(|_| len > 0)
            .map(|_| addr + 4 * rng.gen_range(0..len as u64))
            .collect();
        let mut md = Metadata::new(24);
        for (k, off) in labels.iter().enumerate() {
            md.add_method(None, &format!("fn_{k}"), *off as u32);
        }
        let table = parse_global_metadata(&md.build()).expect("metadata parses");
        let graph = extract_call_edges(&ElfSpec::aarch64(addr, &words).build(), &table).expect("elf parses");
        assert_eq!(graph.edges, edge_oracle(addr, &words, &labels), "case {case}");
    }

    let (caller, callee) = (0x832CBCu64, 0x1705848u64);
    let mut elf = ElfSpec::zeroed(0x800000, 0x1000000);
    elf.set_word(caller + 8, bl(caller + 8, callee));
    elf.set_word(caller + 12, RET);
    elf.set_word(callee, RET);
    let elf = elf.build();
    let mut md = Metadata::new(24);
    md.add_method(None, "EyeRender", caller as u32);
    md.add_method(None, "GetEyeTrackingData", callee as u32);
    let md = md.build();
    let graph = extract_call_edges(&elf, &parse_global_metadata(&md).unwrap()).unwrap();
    assert_eq!(graph.edges, BTreeSet::from([(caller, callee)]));
    assert_eq!((graph.name_of(caller).as_str(), graph.name_of(callee).as_str()), ("EyeRender", "GetEyeTrackingData"));
    let rule = Rule {
        store: StoreScope::Only(Store::Pico),
        engine: Engine::Unity,
        data_type: DataType::Eye,
        kind: RuleKind::Api,
        name: "GetEyeTrackingData".into(),
        kind_guessed: false,
        note: None,
    };
    let analysis = analyze_il2cpp_bytes(&md, &elf, &[&rule]).unwrap();
    assert_eq!(
        analysis.evidence,
        vec![AccessEvidence {
            data_type: DataType::Eye,
            api_name: "GetEyeTrackingData".into(),
            path: vec!["EyeRender".into(), "GetEyeTrackingData".into()],
            source: EvidenceSource::CallGraph,
        }]
    );
}

fn unreal_pak(eye: &str) -> Vec<u8> {
    let ini = format!("[/Script/Engine.RendererSettings]\nr.MobileHDR=True\n\n[/Script/XRSettings]\nEnableEyeTracking={eye}\n");
    let plugin = r#"{"FileVersion": 3, "FriendlyName": "PICO XR",
        "Modules": [{"Name": "PICOXRMotionTracking", "Type": "Runtime", "LoadingPhase": "Default"}]}"#;
    PakWriter::new(4)
        .add("Game/Config/DefaultEngine.ini", ini.as_bytes())
        .add("Game/Plugins/PICOXR/PICOXR.uplugin", plugin.as_bytes())
        .add("Game/Content/Maps/Entry.umap", &[1u8; 32])
        .build()
}

fn unreal_fixture() {
    let catalog = SensitivityCatalog::default_catalog();
    let rules = rules_for(&catalog, Some(Store::Pico), Engine::Unreal);
    for (flag, want) in [("True", vec![DataType::Body, DataType::Eye]), ("False", vec![DataType::Body])] {
        let pak = unreal_pak(flag);
        let direct = analyze_pak("Game-Android.pak".into(), &pak, &rules).expect("pak parses");
        let types: BTreeSet<DataType> = direct.evidence.iter().map(|e| e.data_type).collect();
        assert_eq!(types, want.iter().copied().collect(), "EnableEyeTracking={flag}");

        let manifest = Manifest::new("com.studio.garden", &["android.permission.INTERNET"]).to_axml(true);
        let apk = build_zip(&[
            ("AndroidManifest.xml", manifest, Method::Deflated),
            ("lib/arm64-v8a/libUE4.so", vec![0x7F, b'E', b'L', b'F'], Method::Deflated),
            ("assets/Game/Content/Paks/Game-Android.pak", pak, Method::Stored),
        ]);
        let profile = analyze_apk_bytes("garden", apk, Some(Store::Pico), &catalog).expect("apk analyzes");
        assert_eq!(profile.engine, EngineKind::Unreal);
        assert_eq!(profile.accessed_types(), want.iter().copied().collect());
    }
}

const TABLE_APIS: &[(Store, Engine, DataType, &[&str])] = &[
    (Store::Pico, Engine::Unity, DataType::Body, &["GetBodyTrackingPose", "BodyTrackerRole", "BodyTrackerResult", "BodyTrackerTransform"]),
    (Store::Pico, Engine::Unity, DataType::Face, &["WantFaceTrackingService", "GetFaceTrackingSupported", "StartFaceTracking"]),
    (Store::Pico, Engine::Unity, DataType::Eye, &["UPvr_getEyeTrackingPos", "UPvr_getEyeTrackingData", "UPvr_getEyeTrackingGazeRay"]),
    (Store::Pico, Engine::Unity, DataType::Hand, &["GetHandScale", "GetJointLocations", "GetSettingState"]),
    (Store::Pico, Engine::Unreal, DataType::Body, &["PXR.Get_Body_Tracking_Pose", "PXR.Set_Swift_Mode", "PICOXRMotionTracking"]),
    (Store::Pico, Engine::Unreal, DataType::Face, &["Pico.Get_Face_Tracking_State", "Pico.Start_Face_Tracking", "EnableFaceTracking"]),
    (Store::Pico, Engine::Unreal, DataType::Eye, &["Pico.Get_Eye_Tracking_Gaze_Ray", "Pico.Set_Boundary_Visible", "PICOXRHMD", "OpenXREyeTracker"]),
    (Store::Pico, Engine::Unreal, DataType::Hand, &["Pico.Get_Handness", "PicoMobileController", "PICOXRHMD", "OpenXRHandTracking"]),
    (Store::Oculus, Engine::Unity, DataType::Body, &["OVRBody", "OVRBone", "OVRCustomSkeleton"]),
    (Store::Oculus, Engine::Unity, DataType::Face, &["OVRCustomFace", "OVRCustomFaceExtensions", "OVRFace"]),
    (Store::Oculus, Engine::Unity, DataType::Eye, &["OVREyeGaze"]),
    (Store::Oculus, Engine::Unity, DataType::Hand, &["OVRHand"]),
    (Store::Oculus, Engine::Unreal, DataType::Body, &["OpenXRHMD", "OpenXREditor", "OpenXR"]),
    (Store::Oculus, Engine::Unreal, DataType::Face, &["FacialAnimation"]),
    (Store::Oculus, Engine::Unreal, DataType::Eye, &["OculusEyeTracker"]),
    (Store::Oculus, Engine::Unreal, DataType::Hand, &["GetHandJointTransform"]),
];

const TABLE_PHRASES: &[(DataType, &[&str])] = &[
    (DataType::Body, &["Body Tracking", "Motion Capture Data", "Physical Interaction Data", "User Posture and Movement"]),
    (DataType::Face, &["Facial Recognition", "Facial Mapping", "Emotion Detection", "Facial Geometry Data", "Camera"]),
    (DataType::Eye, &["Eye Tracking", "Gaze Detection", "Eye Movement Metrics", "Pupil Dilation Data", "Iris Scan"]),
    (DataType::Hand, &["Hand Tracking", "Hand Size", "Hand Pose Data", "Touch Interaction", "Hand Movement Data"]),
];

fn catalog_transcription() {
    let catalog = load_catalog(DEFAULT_CATALOG_JSON.as_bytes()).expect("default catalog loads");
    let mut cells = 0;
    for (store, engine, dt, names) in TABLE_APIS {
        let rules = lookup(&catalog, *store, *engine);
        for name in *names {
            assert!(
                rules.iter().any(|r| r.data_type == *dt && r.name == *name),
                "{store} {engine:?} {dt}: {name} missing"
            );
        }
        cells += 1;
    }
    assert_eq!(cells, 16);
    for (dt, phrases) in TABLE_PHRASES {
        let have = &catalog.policy_corpus[dt];
        for p in *phrases {
            assert!(have.contains(&p.to_lowercase()), "{dt}: {p} missing");
        }
    }
    let reloaded = load_catalog(catalog.to_json().as_bytes()).expect("serialized catalog reloads");
    assert!(reloaded.semantically_eq(&catalog));
    for store in [Store::Pico, Store::Oculus] {
        for engine in [Engine::Unity, Engine::Unreal] {
            let types: BTreeSet<DataType> = lookup(&catalog, store, engine).iter().map(|r| r.data_type).collect();
            assert_eq!(types, DataType::ALL.into_iter().collect(), "{store} {engine:?}");
        }
    }
}

/// Vowel runs over `aeiouy`, minus a trailing silent `e` unless the word
/// ends in `le`; at least one.
fn oracle_syllables(word: &str, runs: &Regex) -> usize {
    let w = word.to_lowercase();
    let mut n = runs.find_iter(&w).count();
    if w.len() >= 2 && w.ends_with('e') && !w.ends_with("le") {
        n = n.saturating_sub(1);
    }
    n.max(1)
}

fn readability_formulas() {
    let r = readability(&segment("The cat sat.")).unwrap();
    assert!((r.fres - 119.19).abs() <= 0.01, "FRES {}", r.fres);
    assert!((r.ari - -5.80).abs() <= 0.01, "ARI {}", r.ari);
    assert!((r.lix - 3.00).abs() <= 0.01, "LIX {}", r.lix);

    let runs = Regex::new("[aeiouy]+").unwrap();
    let protected = ["no", "co", "st", "mr", "ms", "dr", "vs", "jr", "sr", "inc", "ltd", "mrs", "corp", "llc", "dept", "approx"];
    let mut rng = StdRng::seed_from_u64(0x6EAD);
    for doc in 0..100 {
        let mut sentences: Vec<Vec<String>> = Vec::new();
        for _ in 0..rng.gen_range(1..20) {
            let words: Vec<String> = (0..rng.gen_range(1..25))
                .map(|_| loop {
                    let w = ident(&mut rng, 1..13);
                    if !protected.contains(&w.as_str()) {
                        break w;
                    }
                })
                .collect();
            sentences.push(words);
        }
        let mut text = String::new();
        for (i, s) in sentences.iter().enumerate() {
            if i > 0 {
                text.push_str(if rng.gen_bool(0.2) { "\n\n" } else { " " });
            }
            let mut first = s[0].clone();
            first[..1].make_ascii_uppercase();
            text.push_str(&first);
            for w in &s[1..] {
                text.push(' ');
                text.push_str(w);
            }
            text.push(['.', '!', '?'][rng.gen_range(0..3)]);
        }
        let words: Vec<&String> = sentences.iter().flatten().collect();
        let (wc, sc) = (words.len() as f64, sentences.len() as f64);
        let letters: usize = words.iter().map(|w| w.len()).sum();
        let syllables: usize = words.iter().map(|w| oracle_syllables(w, &runs)).sum();
        let long = words.iter().filter(|w| w.len() > 6).count();
        let want = [
            ("ari", 4.71 * letters as f64 / wc + 0.5 * wc / sc - 21.43),
            ("fres", 206.835 - 1.015 * wc / sc - 84.6 * syllables as f64 / wc),
            ("lix", wc / sc + 100.0 * long as f64 / wc),
            ("lpw", letters as f64 / wc),
            ("spw", syllables as f64 / wc),
            ("wps", wc / sc),
            ("sc", sc),
            ("wc", wc),
            ("rt_seconds", wc / 238.0 * 60.0),
            ("st_seconds", wc / 130.0 * 60.0),
        ];
        let r = readability(&segment(&text)).unwrap();
        let got = [r.ari, r.fres, r.lix, r.lpw, r.spw, r.wps, r.sc as f64, r.wc as f64, r.rt_seconds, r.st_seconds];
        for ((name, w), g) in want.iter().zip(got) {
            assert!((w - g).abs() <= 1e-9, "doc {doc} {name}: got {g}, oracle {w}");
        }
    }
}

fn child_age(text: &str) -> Option<u32> {
    let doc = segment(text);
    extract_child_age(&doc, &classify_components(&doc)).map(|a| a.age)
}

fn policy_rules() {
    #[derive(serde::Deserialize)]
    struct Snippet {
        text: String,
        labels: BTreeSet<Component>,
    }
    let snippets: Vec<Snippet> = serde_json::from_str(include_str!("../data/component_snippets.json")).unwrap();
    assert_eq!(snippets.len(), 50);
    let rules = ComponentRules::default_rules();
    let correct = snippets.iter().filter(|s| rules.label_paragraph(&s.text) == s.labels).count();
    assert!(correct * 10 >= snippets.len() * 9, "accuracy {correct}/50");

    let children = "We do not collect any information from anyone under 13 years of age.";
    let retention = "We will retain your data for 12 months.";
    assert_eq!(rules.label_paragraph(children), BTreeSet::from([Component::Children]));
    assert_eq!(rules.label_paragraph(retention), BTreeSet::from([Component::Retention]));

    let none: [&str; 0] = [];
    let words = |n: usize| vec!["word"; n].join(" ") + ".";
    assert_eq!(validity_check(&segment(&words(99)), &none), Validity::TooShort);
    assert_eq!(validity_check(&segment(&words(100)), &none), Validity::Valid);

    assert_eq!(child_age(children), Some(13));
    assert_eq!(
        child_age("We do not knowingly collect personal information from children under the age of thirteen (13)."),
        Some(13)
    );
}

struct Case {
    name: &'static str,
    store: Store,
    accesses: &'static [DataType],
    declares: &'static [&'static str],
    vague: bool,
    age_rating: AgeRating,
    /// `None`: no children paragraph; `Some(None)`: one without an age.
    policy_age: Option<Option<u32>>,
    manifest: &'static [&'static str],
    declared_permissions: &'static [&'static str],
    want: &'static [FindingCode],
}

fn compliance_truth_table() {
    use DataType::*;
    use FindingCode::*;
    let base = Case {
        name: "",
        store: Store::Oculus,
        accesses: &[Eye],
        declares: &["Eye"],
        vague: false,
        age_rating: AgeRating::Min(13),
        policy_age: Some(Some(13)),
        manifest: &["android.permission.INTERNET"],
        declared_permissions: &[],
        want: &[],
    };
    let cases = [
        Case { name: "access declared", ..base },
        Case { name: "access undeclared", declares: &[], want: &[BehaviorUndeclared], ..base },
        Case { name: "access vague only", declares: &[], vague: true, want: &[BehaviorVague], ..base },
        Case { name: "partial declaration", accesses: &[Eye, Hand], want: &[BehaviorUndeclared], ..base },
        Case { name: "declared without access", accesses: &[], declares: &["Eye", "Face"], ..base },
        Case { name: "all ages, no children clause", age_rating: AgeRating::All, policy_age: None, want: &[ChildInconsistency], ..base },
        Case { name: "all ages, children clause", age_rating: AgeRating::All, policy_age: Some(None), ..base },
        Case { name: "rating 13, policy 11", policy_age: Some(Some(11)), want: &[ChildDiscrepancy], ..base },
        Case { name: "rating 16, policy 16", age_rating: AgeRating::Min(16), policy_age: Some(Some(16)), ..base },
        Case {
            name: "undisclosed camera permission",
            manifest: &["android.permission.INTERNET", "android.permission.CAMERA"],
            want: &[PermDiscrepancy],
            ..base
        },
        Case {
            name: "pico app with oculus hand tracking",
            store: Store::Pico,
            manifest: &["com.oculus.permission.HAND_TRACKING"],
            declared_permissions: &["HAND_TRACKING"],
            want: &[CrossPlatformPerm],
            ..base
        },
        Case {
            name: "oculus app with own hand tracking",
            manifest: &["com.oculus.permission.HAND_TRACKING"],
            declared_permissions: &["HAND_TRACKING"],
            ..base
        },
    ];
    let catalog = SensitivityCatalog::default_catalog();
    let config = ComplianceConfig::default();
    for case in &cases {
        let mut record = AppRecord::new("app", case.store, "Star Orbit");
        record.age_rating = Some(case.age_rating);
        record.policy_url = Some("https://star-orbit.example.com/privacy".into());
        record.declared_permissions = Some(case.declared_permissions.iter().map(|p| p.to_string()).collect());
        let spec = PolicySpec {
            long: true,
            vr: true,
            children: case.policy_age,
            declares: case.declares.iter().copied().collect(),
            vague: case.vague,
            html: false,
        };
        let policy = analyze_policy(&spec.render("Star Orbit"), Some(&record), &catalog, &config);
        let accesses = case
            .accesses
            .iter()
            .map(|&dt| AccessEvidence {
                data_type: dt,
                api_name: format!("{dt}Api"),
                path: vec![format!("{dt}Api")],
                source: EvidenceSource::Presence,
            })
            .collect();
        let manifest = case.manifest.iter().map(|p| p.to_string()).collect();
        let behavior = BehavioralProfile::complete("app", EngineKind::UnityIl2cpp, manifest, accesses);
        let findings = run_checks(Some(&behavior), &DeclarativeProfile::new(record, Some(policy)), &config);
        let got: BTreeMap<FindingCode, usize> = findings.iter().fold(BTreeMap::new(), |mut m, f| {
            *m.entry(f.code).or_default() += 1;
            m
        });
        let want: BTreeMap<FindingCode, usize> = case.want.iter().map(|c| (*c, 1)).collect();
        assert_eq!(got, want, "case {:?}", case.name);
    }
}

fn end_to_end_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_corpus(dir.path(), &synthetic_corpus(20, 2024)).unwrap();
    let catalog = SensitivityCatalog::default_catalog();
    let mut outputs = Vec::new();
    for workers in [1, 4, 16, 4, 1] {
        let config = AuditConfig {
            records_path: paths.records.clone(),
            apk_dir: Some(paths.apk_dir.clone()),
            policy_dir: Some(paths.policy_dir.clone()),
            workers,
            live: None,
            compliance: ComplianceConfig::default(),
        };
        let report = run_audit(&config, &catalog, None).expect("audit completes");
        assert_eq!(report.app_count, 20);
        outputs.push((report.to_json(), report.to_table(), report.to_csv()));
    }
    for (i, o) in outputs.iter().enumerate().skip(1) {
        assert!(o == &outputs[0], "run {i} differs from run 0");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
}

const EN_POLICY: &str = include_str!("../data/lang/en.txt");

/// (status, extra headers, body, delay before responding)
fn route(path: &str) -> (u16, String, String, u64) {
    let plain = |code: u16| (code, String::new(), format!("status {code}"), 0);
    match path {
        "/200" => plain(200),
        "/301" => (301, "Location: /200\r\n".into(), String::new(), 0),
        "/slow" => (200, String::new(), "late".into(), 3000),
        "/en/privacy" => (
            200,
            String::new(),
            format!("<html><body><p>{EN_POLICY}</p><a href=\"/fr/privacy\">Français</a></body></html>"),
            0,
        ),
        p => match p.trim_start_matches('/').parse::<u16>() {
            Ok(code) => plain(code),
            Err(_) => plain(404),
        },
    }
}

fn handle(stream: TcpStream) {
    let mut reader = BufReader::new(stream.try_clone().expect("stream clones"));
    let mut request = String::new();
    if reader.read_line(&mut request).is_err() {
        return;
    }
    loop {
        let mut header = String::new();
        match reader.read_line(&mut header) {
            Ok(0) | Err(_) => break,
            Ok(_) if header == "\r\n" || header == "\n" => break,
            Ok(_) => {}
        }
    }
    let path = request.split_whitespace().nth(1).unwrap_or("/").to_string();
    let (code, headers, body, delay) = route(&path);
    std::thread::sleep(Duration::from_millis(delay));
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {code} Stub\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n{headers}\r\n{body}",
        body.len()
    );
    let _ = out.flush();
}

fn stub_server() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").expect("loopback bind");
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            std::thread::spawn(move || handle(stream));
        }
    });
    addr
}

fn offline_probe_suite() {
    let addr = stub_server();
    let client = UreqClient;
    let cases = [
        ("/200", LinkStatus::Ok),
        ("/301", LinkStatus::Ok),
        ("/404", LinkStatus::Code404),
        ("/400", LinkStatus::Code400),
        ("/500", LinkStatus::Code500),
        ("/503", LinkStatus::Code503),
        ("/410", LinkStatus::Code410),
        ("/slow", LinkStatus::Timeout),
    ];
    let mut wrong = Vec::new();
    for (path, want) in cases {
        let url = format!("http://{addr}{path}");
        let result = check_link(&url, 500, &client).expect("url is valid");
        if result.status != want {
            wrong.push(format!("{path}: {:?}, want {want:?}", result.status));
        }
        if path == "/301" {
            assert_eq!(result.redirects, 1);
            assert_eq!(result.final_url, format!("http://{addr}/200"));
        }
    }
    assert!(wrong.is_empty(), "misclassified: {}", wrong.join("; "));

    let claimed: BTreeSet<String> = ["en", "fr"].iter().map(|s| s.to_string()).collect();
    let variants =
        discover_language_variants(&format!("http://{addr}/en/privacy"), &claimed, 2000, &client, &detect_language)
            .expect("url is valid");
    assert_eq!(
        variants,
        BTreeMap::from([("en".to_string(), VariantStatus::Covered), ("fr".to_string(), VariantStatus::Missing)])
    );
}
