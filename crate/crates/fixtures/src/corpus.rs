//! Synthetic audit corpus generator.
//!
//! Each [`AppSpec`] states what the app *is*: its store record, which
//! sensitive data types its build touches, and what its policy says. The
//! builders turn a spec into a records entry, an APK and a policy file. Tests
//! tabulate expected report cells from the specs alone, never from the
//! analyzers' output.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::axml::Manifest;
use crate::dotnet::Assembly;
use crate::elf::{bl, ElfSpec};
use crate::il2cpp::Metadata;
use crate::pak::PakWriter;
use crate::zipw::build_deflated;

pub const DATA_TYPES: [&str; 4] = ["Body", "Face", "Eye", "Hand"];
pub const STORES: [&str; 5] = ["Oculus", "Viveport", "Pico", "Microsoft", "PlayStation"];
pub const CATEGORIES: [&str; 6] = ["Action", "Shooter", "Casual", "Education", "Simulation", "Puzzle"];
pub const STORE_POLICY_URL: &str = "https://www.picoxr.com/legal/privacy-policy";

const RET: u32 = 0xD65F_03C0;
const TEXT_ADDR: u64 = 0x10000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Age {
    All,
    Min(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Build {
    Il2cpp,
    Mono,
    Unreal,
    /// Unreal build whose pak index is encrypted.
    UnrealEncrypted,
    /// IL2CPP build without `global-metadata.dat`.
    Il2cppNoMetadata,
    /// Plain Android app, no game engine.
    NoEngine,
    /// Bytes that are not a zip archive.
    Garbage,
}

impl Build {
    pub fn engine_family(self) -> &'static str {
        match self {
            Build::Il2cpp | Build::Mono | Build::Il2cppNoMetadata => "Unity",
            Build::Unreal | Build::UnrealEncrypted => "Unreal",
            Build::NoEngine | Build::Garbage => "Unknown",
        }
    }

    /// Whether the analyzers can recover accesses from this build.
    pub fn analyzable(self) -> bool {
        matches!(self, Build::Il2cpp | Build::Mono | Build::Unreal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySpec {
    /// At least 100 words when set; a single sentence otherwise.
    pub long: bool,
    pub vr: bool,
    /// `Some(age)` adds a children paragraph; `Some(None)` omits the number.
    pub children: Option<Option<u32>>,
    pub declares: BTreeSet<&'static str>,
    pub vague: bool,
    pub html: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppSpec {
    pub app_id: String,
    pub store: &'static str,
    pub name: String,
    pub category: String,
    pub age_rating: Option<Age>,
    pub declared_permissions: Option<Vec<String>>,
    pub supported_languages: Vec<String>,
    pub policy_url: Option<String>,
    pub manifest_permissions: Vec<String>,
    /// `None` when the corpus has no APK for the app.
    pub build: Option<Build>,
    /// Data types the build touches. Only meaningful for analyzable builds.
    pub accesses: BTreeSet<&'static str>,
    pub policy: Option<PolicySpec>,
}

/// What a build uses to reach one data type.
enum Marker {
    Method { ns: &'static str, ty: &'static str, method: &'static str },
    Module(&'static str),
    ConfigKey(&'static str),
}

/// One unambiguous marker per (store, engine, data type); `None` where the
/// engine exposes the type only through APIs the config reader cannot see.
fn marker(store: &str, engine: &str, dt: &str) -> Option<Marker> {
    use Marker::*;
    Some(match (store, engine, dt) {
        ("Pico", "Unity", "Body") => Method { ns: "Unity.XR.PXR", ty: "PXR_MotionTracking", method: "GetBodyTrackingPose" },
        ("Pico", "Unity", "Face") => Method { ns: "Unity.XR.PXR", ty: "PXR_FaceTracking", method: "StartFaceTracking" },
        ("Pico", "Unity", "Eye") => Method { ns: "Pvr_UnitySDKAPI", ty: "System", method: "UPvr_getEyeTrackingData" },
        ("Pico", "Unity", "Hand") => Method { ns: "Unity.XR.PXR", ty: "PXR_HandTracking", method: "GetHandScale" },
        ("Oculus", "Unity", "Body") => Method { ns: "Oculus.Movement", ty: "OVRBody", method: "Update" },
        ("Oculus", "Unity", "Face") => Method { ns: "Oculus.Movement", ty: "OVRFace", method: "LateUpdate" },
        ("Oculus", "Unity", "Eye") => Method { ns: "Oculus.Movement", ty: "OVREyeGaze", method: "Update" },
        ("Oculus", "Unity", "Hand") => Method { ns: "Oculus.Interaction", ty: "OVRHand", method: "GetFingerIsPinching" },
        ("Pico", "Unreal", "Body") => Module("PICOXRMotionTracking"),
        ("Pico", "Unreal", "Face") => ConfigKey("EnableFaceTracking"),
        ("Pico", "Unreal", "Eye") => ConfigKey("EnableEyeTracking"),
        ("Pico", "Unreal", "Hand") => Module("PicoMobileController"),
        ("Oculus", "Unreal", "Body") => Module("OpenXRHMD"),
        ("Oculus", "Unreal", "Face") => Module("FacialAnimation"),
        ("Oculus", "Unreal", "Eye") => Module("OculusEyeTracker"),
        _ => return None,
    })
}

pub fn detectable(store: &str, build: Build, dt: &str) -> bool {
    marker(store, build.engine_family(), dt).is_some()
}

/// Innocuous code present in every Unity build.
const FILLER_METHODS: [(&str, &str, &str); 4] = [
    ("Game", "PlayerController", "Move"),
    ("Game", "ScoreBoard", "Refresh"),
    ("Game", "AudioManager", "PlayClip"),
    ("Game", "MenuUi", "OnHandednessChanged"),
];

fn il2cpp_files(store: &str, types: &BTreeSet<&str>) -> (Vec<u8>, Vec<u8>) {
    let mut md = Metadata::new(24);
    let mut calls = Vec::new();
    let mut slot = 1u64;
    let entry = TEXT_ADDR;
    let ty = md.add_type("Game", "GameLoop");
    md.add_method(Some(ty), "Update", entry as u32);
    let mut all: Vec<(&str, &str, &str)> = FILLER_METHODS.to_vec();
    for dt in types {
        if let Some(Marker::Method { ns, ty, method }) = marker(store, "Unity", dt) {
            all.push((ns, ty, method));
        }
    }
    for (ns, ty_name, method) in all {
        let t = md.add_type(ns, ty_name);
        let addr = TEXT_ADDR + slot * 0x40;
        md.add_method(Some(t), method, addr as u32);
        calls.push(addr);
        slot += 1;
    }
    let mut elf = ElfSpec::zeroed(TEXT_ADDR, (slot as usize + 1) * 0x40);
    for (i, target) in calls.iter().enumerate() {
        let pc = entry + 4 * i as u64;
        elf.set_word(pc, bl(pc, *target));
    }
    elf.set_word(entry + 4 * calls.len() as u64, RET);
    for target in &calls {
        elf.set_word(*target, RET);
    }
    (md.build(), elf.build())
}

fn mono_dll(store: &str, types: &BTreeSet<&str>) -> Vec<u8> {
    let mut asm = Assembly::default();
    for (ns, ty, m) in FILLER_METHODS {
        asm.type_def(ns, ty, &[m]);
    }
    for dt in types {
        if let Some(Marker::Method { ns, ty, method }) = marker(store, "Unity", dt) {
            asm.type_def(ns, ty, &[method]);
        }
    }
    asm.build()
}

fn unreal_pak(store: &str, types: &BTreeSet<&str>, encrypted: bool) -> Vec<u8> {
    let mut keys = Vec::new();
    let mut modules = Vec::new();
    for dt in types {
        match marker(store, "Unreal", dt) {
            Some(Marker::ConfigKey(k)) => keys.push(k),
            Some(Marker::Module(m)) => modules.push(m),
            _ => {}
        }
    }
    let mut ini = String::from("[/Script/Engine.RendererSettings]\nr.MobileHDR=False\n\n[/Script/XRSettings]\n");
    for k in ["EnableEyeTracking", "EnableFaceTracking"] {
        let on = keys.contains(&k);
        ini.push_str(&format!("{k}={}\n", if on { "True" } else { "False" }));
    }
    let module_list: Vec<Value> = std::iter::once("GameCore")
        .chain(modules.iter().copied())
        .map(|m| json!({"Name": m, "Type": "Runtime", "LoadingPhase": "Default"}))
        .collect();
    let plugin = json!({"FileVersion": 3, "FriendlyName": "XR", "Modules": module_list});
    let mut w = PakWriter::new(4)
        .add("Game/Config/DefaultEngine.ini", ini.as_bytes())
        .add("Game/Plugins/VendorXR/VendorXR.uplugin", plugin.to_string().as_bytes())
        .add("Game/Content/Maps/Main.umap", &[7u8; 64]);
    w.encrypted_index = encrypted;
    w.build()
}

impl AppSpec {
    pub fn record_json(&self) -> Value {
        let mut r = json!({
            "app_id": self.app_id,
            "store": self.store,
            "name": self.name,
            "category": self.category,
            "supported_languages": self.supported_languages,
        });
        let o = r.as_object_mut().expect("object literal");
        match self.age_rating {
            Some(Age::All) => {
                o.insert("age_rating".into(), json!("all"));
            }
            Some(Age::Min(n)) => {
                o.insert("age_rating".into(), json!(n));
            }
            None => {}
        }
        if let Some(p) = &self.declared_permissions {
            o.insert("declared_permissions".into(), json!(p));
        }
        if let Some(u) = &self.policy_url {
            o.insert("policy_url".into(), json!(u));
        }
        o.insert("developer".into(), json!(format!("{} Studio", self.name)));
        r
    }

    pub fn apk_bytes(&self) -> Option<Vec<u8>> {
        let build = self.build?;
        if build == Build::Garbage {
            return Some(b"this is not an archive".repeat(8));
        }
        let perms: Vec<&str> = self.manifest_permissions.iter().map(String::as_str).collect();
        let manifest = Manifest::new(&format!("com.example.{}", self.app_id), &perms).to_axml(false);
        let mut entries: Vec<(String, Vec<u8>)> = vec![
            ("AndroidManifest.xml".into(), manifest),
            ("classes.dex".into(), b"dex\n035\0".to_vec()),
        ];
        match build {
            Build::Il2cpp | Build::Il2cppNoMetadata => {
                let (md, elf) = il2cpp_files(self.store, &self.accesses);
                entries.push(("lib/arm64-v8a/libil2cpp.so".into(), elf));
                entries.push(("lib/arm64-v8a/libunity.so".into(), vec![0x7f, b'E', b'L', b'F']));
                if build == Build::Il2cpp {
                    entries.push(("assets/bin/Data/Managed/Metadata/global-metadata.dat".into(), md));
                }
            }
            Build::Mono => {
                entries.push(("lib/arm64-v8a/libmono.so".into(), vec![0x7f, b'E', b'L', b'F']));
                entries.push(("assets/bin/Data/Managed/Assembly-CSharp.dll".into(), mono_dll(self.store, &self.accesses)));
            }
            Build::Unreal | Build::UnrealEncrypted => {
                entries.push(("lib/arm64-v8a/libUE4.so".into(), vec![0x7f, b'E', b'L', b'F']));
                entries.push((
                    "assets/Game/Content/Paks/Game-Android.pak".into(),
                    unreal_pak(self.store, &self.accesses, build == Build::UnrealEncrypted),
                ));
            }
            Build::NoEngine => {
                entries.push(("res/layout/main.xml".into(), b"<LinearLayout/>".to_vec()));
            }
            Build::Garbage => unreachable!(),
        }
        Some(build_deflated(&entries))
    }

    /// Ground truth: data types the analyzers should report.
    pub fn expected_accesses(&self) -> BTreeSet<&'static str> {
        match self.build {
            Some(b) if b.analyzable() => self.accesses.iter().copied().filter(|d| detectable(self.store, b, d)).collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn policy_text(&self) -> Option<String> {
        self.policy.as_ref().map(|p| p.render(&self.name))
    }

    pub fn policy_file_name(&self) -> Option<String> {
        self.policy.as_ref().map(|p| format!("{}.{}", self.app_id, if p.html { "html" } else { "txt" }))
    }
}

fn data_phrase(dt: &str) -> &'static str {
    match dt {
        "Body" => "body tracking",
        "Face" => "facial recognition",
        "Eye" => "eye tracking",
        "Hand" => "hand tracking",
        _ => unreachable!("unknown data type {dt}"),
    }
}

impl PolicySpec {
    /// Paragraphs as (heading, body).
    fn paragraphs(&self, app_name: &str) -> Vec<(String, String)> {
        let intro = if self.vr {
            format!("This policy explains how we handle information in {app_name}, our immersive virtual reality game.")
        } else {
            "This policy explains how our studio handles information when you use our products and websites.".to_string()
        };
        if !self.long {
            return vec![(String::new(), format!("{intro} We will collect your data."))];
        }
        let mut collect = String::from(
            "We collect information you provide when you create an account, such as your email address and display name.",
        );
        for dt in &self.declares {
            collect.push_str(&format!(" We collect {} data to adapt gameplay to you.", data_phrase(dt)));
        }
        if self.vague {
            collect.push_str(" We may collect your biometric data.");
        }
        let mut out = vec![
            (String::new(), intro),
            ("Information We Collect".to_string(), collect),
            (
                "How We Use Your Information".to_string(),
                "We use your information to provide, maintain and improve the game, to personalize your experience and to respond to support requests.".to_string(),
            ),
            (
                "How We Share Your Information".to_string(),
                "We do not sell your personal information. We share data only with service providers that host our servers, and we may disclose information when required by law.".to_string(),
            ),
            (
                "Data Retention".to_string(),
                "We retain account data for as long as your account is active and delete it within 90 days after you close the account.".to_string(),
            ),
            (
                "Security".to_string(),
                "We use encryption in transit and other safeguards to protect your information against unauthorized access.".to_string(),
            ),
        ];
        match self.children {
            Some(Some(age)) => out.push((
                "Children's Privacy".to_string(),
                format!("Our service is not directed to children under {age} years of age, and we do not knowingly accept registrations from them."),
            )),
            Some(None) => out.push((
                "Children's Privacy".to_string(),
                "We care about the privacy of children and ask that parents supervise their children while they play.".to_string(),
            )),
            None => {}
        }
        out.push((
            "Contact Us".to_string(),
            "If you have questions about this policy, contact us at privacy@example.com.".to_string(),
        ));
        out
    }

    pub fn render(&self, app_name: &str) -> String {
        let paras = self.paragraphs(app_name);
        if self.html {
            let mut s = String::from("<!DOCTYPE html>\n<html><head><title>Privacy Policy</title><style>p{margin:0}</style></head><body>\n");
            for (h, body) in paras {
                if !h.is_empty() {
                    s.push_str(&format!("<h2>{h}</h2>\n"));
                }
                s.push_str(&format!("<p>{}</p>\n", body.replace('\'', "&#39;")));
            }
            s.push_str("</body></html>\n");
            s
        } else {
            paras
                .into_iter()
                .map(|(h, b)| if h.is_empty() { b } else { format!("{h}\n{b}") })
                .collect::<Vec<_>>()
                .join("\n\n")
                + "\n"
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub records: PathBuf,
    pub apk_dir: PathBuf,
    pub policy_dir: PathBuf,
}

/// Writes `records.json`, `apks/` and `policies/` under `dir`.
pub fn write_corpus(dir: &Path, apps: &[AppSpec]) -> std::io::Result<CorpusPaths> {
    let paths = CorpusPaths {
        records: dir.join("records.json"),
        apk_dir: dir.join("apks"),
        policy_dir: dir.join("policies"),
    };
    fs::create_dir_all(&paths.apk_dir)?;
    fs::create_dir_all(&paths.policy_dir)?;
    let records: Vec<Value> = apps.iter().map(AppSpec::record_json).collect();
    fs::write(&paths.records, serde_json::to_string_pretty(&records)? + "\n")?;
    for a in apps {
        if let Some(apk) = a.apk_bytes() {
            fs::write(paths.apk_dir.join(format!("{}.apk", a.app_id)), apk)?;
        }
        if let (Some(name), Some(text)) = (a.policy_file_name(), a.policy_text()) {
            fs::write(paths.policy_dir.join(name), text)?;
        }
    }
    Ok(paths)
}

fn vendor_permission(store: &str, dt: &str) -> Option<String> {
    let prefix = match store {
        "Oculus" => "com.oculus.permission",
        "Pico" => "com.picovr.permission",
        _ => return None,
    };
    let name = match dt {
        "Body" => "BODY_TRACKING",
        "Face" => "FACE_TRACKING",
        "Eye" => "EYE_TRACKING",
        "Hand" => "HAND_TRACKING",
        _ => return None,
    };
    Some(format!("{prefix}.{name}"))
}

fn random_app(rng: &mut StdRng, i: usize) -> AppSpec {
    let store = *[STORES[0], STORES[0], STORES[2], STORES[2], STORES[1], STORES[3], STORES[4]]
        .choose(rng)
        .expect("non-empty");
    let name = format!("{} {}", ["Sky", "Iron", "Lunar", "Echo", "Pixel", "Nova"][i % 6], ["Quest", "Arena", "Garden", "Racer"][i % 4]);
    let has_apk = matches!(store, "Oculus" | "Pico");
    let build = has_apk.then(|| {
        *[
            Build::Il2cpp,
            Build::Il2cpp,
            Build::Mono,
            Build::Unreal,
            Build::Unreal,
            Build::UnrealEncrypted,
            Build::Il2cppNoMetadata,
            Build::NoEngine,
        ]
        .choose(rng)
        .expect("non-empty")
    });
    let accesses: BTreeSet<&'static str> = match build {
        Some(b) if b != Build::NoEngine => {
            DATA_TYPES.iter().copied().filter(|d| detectable(store, b, d) && rng.gen_bool(0.4)).collect()
        }
        _ => BTreeSet::new(),
    };
    let mut manifest = vec!["android.permission.INTERNET".to_string()];
    if rng.gen_bool(0.5) {
        manifest.push("android.permission.RECORD_AUDIO".into());
    }
    if rng.gen_bool(0.3) {
        manifest.push("android.permission.CAMERA".into());
    }
    manifest.extend(accesses.iter().filter_map(|d| vendor_permission(store, d)));
    if store == "Pico" && rng.gen_bool(0.25) {
        manifest.push("com.oculus.permission.HAND_TRACKING".into());
    }
    manifest.sort();
    manifest.dedup();
    let declared_permissions = has_apk.then(|| {
        manifest
            .iter()
            .filter(|p| !p.ends_with(".INTERNET") && rng.gen_bool(0.8))
            .map(|p| p.rsplit('.').next().unwrap_or(p).to_string())
            .collect()
    });
    let policy = rng.gen_bool(0.85).then(|| {
        let long = rng.gen_bool(0.8);
        PolicySpec {
            long,
            vr: rng.gen_bool(0.7),
            children: if long && rng.gen_bool(0.5) { Some(*[Some(13), Some(16), Some(11), None].choose(rng).expect("non-empty")) } else { None },
            declares: if long { DATA_TYPES.iter().copied().filter(|_| rng.gen_bool(0.3)).collect() } else { BTreeSet::new() },
            vague: long && rng.gen_bool(0.2),
            html: rng.gen_bool(0.3),
        }
    });
    let policy_url = match rng.gen_range(0..10) {
        0 => None,
        1 => Some(STORE_POLICY_URL.to_string()),
        _ => Some(format!("https://app{i}.example.com/privacy")),
    };
    AppSpec {
        app_id: format!("app{i:03}"),
        store,
        name,
        category: CATEGORIES.choose(rng).expect("non-empty").to_string(),
        age_rating: *[None, Some(Age::All), Some(Age::All), Some(Age::Min(13)), Some(Age::Min(16))]
            .choose(rng)
            .expect("non-empty"),
        declared_permissions,
        supported_languages: if rng.gen_bool(0.3) { vec!["en".into(), "fr".into()] } else { vec!["en".into()] },
        policy_url,
        manifest_permissions: manifest,
        build,
        accesses,
        policy,
    }
}

/// `n` apps drawn from a seeded generator; identical for identical seeds.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<AppSpec> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut apps: Vec<AppSpec> = (0..n).map(|i| random_app(&mut rng, i)).collect();
    // one garbage file keeps the per-app error path exercised
    if let Some(a) = apps.iter_mut().find(|a| a.build.is_some()) {
        if n >= 10 {
            a.build = Some(Build::Garbage);
            a.accesses.clear();
        }
    }
    apps
}

/// Three hand-written apps covering the main findings.
pub fn three_app_corpus() -> Vec<AppSpec> {
    let long = |children, declares: &[&'static str], vague| PolicySpec {
        long: true,
        vr: true,
        children,
        declares: declares.iter().copied().collect(),
        vague,
        html: false,
    };
    vec![
        AppSpec {
            app_id: "beat-arena".into(),
            store: "Oculus",
            name: "Beat Arena".into(),
            category: "Action".into(),
            age_rating: Some(Age::Min(13)),
            declared_permissions: Some(vec!["RECORD_AUDIO".into()]),
            supported_languages: vec!["en".into()],
            policy_url: Some("https://beat-arena.example.com/privacy".into()),
            manifest_permissions: vec![
                "android.permission.INTERNET".into(),
                "android.permission.RECORD_AUDIO".into(),
                "com.oculus.permission.HAND_TRACKING".into(),
            ],
            build: Some(Build::Il2cpp),
            accesses: ["Hand", "Eye"].into(),
            policy: Some(long(Some(Some(11)), &["Eye"], false)),
        },
        AppSpec {
            app_id: "cloud-garden".into(),
            store: "Pico",
            name: "Cloud Garden".into(),
            category: "Casual".into(),
            age_rating: Some(Age::All),
            declared_permissions: Some(vec!["CAMERA".into()]),
            supported_languages: vec!["en".into(), "zh".into()],
            policy_url: Some("https://cloud-garden.example.com/privacy".into()),
            manifest_permissions: vec![
                "android.permission.CAMERA".into(),
                "android.permission.INTERNET".into(),
                "com.oculus.permission.HAND_TRACKING".into(),
            ],
            build: Some(Build::Unreal),
            accesses: ["Eye", "Body"].into(),
            policy: Some(long(None, &[], true)),
        },
        AppSpec {
            app_id: "quiet-museum".into(),
            store: "Viveport",
            name: "Quiet Museum".into(),
            category: "Education".into(),
            age_rating: Some(Age::All),
            declared_permissions: None,
            supported_languages: vec!["en".into()],
            policy_url: None,
            manifest_permissions: vec![],
            build: None,
            accesses: BTreeSet::new(),
            policy: Some(PolicySpec {
                long: false,
                vr: false,
                children: None,
                declares: BTreeSet::new(),
                vague: false,
                html: false,
            }),
        },
    ]
}
