//! Unreal analysis: locate the pak, read its index, and mine
//! `DefaultEngine.ini` keys and `.uplugin` module lists.

pub mod ini;
pub mod pak;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apk::{open_apk_bytes, ApkError, ApkPackage};
use crate::catalog::{Rule, RuleKind};
use crate::evidence::{AccessEvidence, EvidenceSource};

pub use ini::{parse_bool, parse_ini, EngineConfig};
pub use pak::{entry_data, parse_pak_index, PakEntry, PakIndex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UnrealError {
    #[error("obb is not a zip archive")]
    NotAZip,
    #[error("no .pak entry found")]
    NoPakEntry,
    #[error("more than one .pak entry: {0:?}")]
    MultiplePakEntries(Vec<String>),
    #[error("pak footer magic not found")]
    BadFooterMagic,
    #[error("pak index is encrypted")]
    EncryptedIndexUnsupported,
    #[error("pak index out of bounds: {0}")]
    IndexOutOfBounds(String),
    #[error("pak version {0} unsupported")]
    UnsupportedPakVersion(i32),
    #[error("compressed pak entry {0} unsupported")]
    CompressedEntryUnsupported(String),
    #[error("malformed ini: unterminated section header on line {line}")]
    MalformedIni { line: usize },
    #[error("malformed plugin descriptor {path}: {message}")]
    MalformedPluginJson { path: String, message: String },
    #[error("archive error: {0}")]
    Archive(String),
}

impl UnrealError {
    /// True for pak shapes outside the supported family, as opposed to
    /// corrupt data.
    pub fn is_unsupported(&self) -> bool {
        matches!(
            self,
            UnrealError::EncryptedIndexUnsupported
                | UnrealError::UnsupportedPakVersion(_)
                | UnrealError::CompressedEntryUnsupported(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginManifest {
    pub plugin_name: String,
    /// Non-empty names, descriptor order.
    pub modules: Vec<String>,
}

fn is_pak(path: &str) -> bool {
    path.to_ascii_lowercase().ends_with(".pak")
}

/// Extracts the single `.pak` from an obb (zip) container.
pub fn unwrap_obb(data: &[u8]) -> Result<Vec<u8>, UnrealError> {
    let pkg = open_apk_bytes(data.to_vec()).map_err(|e| match e {
        ApkError::NotAZip | ApkError::TruncatedArchive => UnrealError::NotAZip,
        other => UnrealError::Archive(other.to_string()),
    })?;
    let paks: Vec<String> = pkg.paths().filter(|p| is_pak(p)).map(str::to_string).collect();
    match paks.as_slice() {
        [] => Err(UnrealError::NoPakEntry),
        [one] => pkg.extract(one).map_err(|e| UnrealError::Archive(e.to_string())),
        _ => Err(UnrealError::MultiplePakEntries(paks)),
    }
}

fn parse_plugin(path: &str, data: &[u8]) -> Result<PluginManifest, UnrealError> {
    let malformed = |message: String| UnrealError::MalformedPluginJson {
        path: path.to_string(),
        message,
    };
    let text = ini::decode_text(data);
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let modules = match value.get("Modules") {
        None | Some(serde_json::Value::Null) => Vec::new(),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .filter_map(|m| m.get("Name").and_then(|n| n.as_str()))
            .filter(|n| !n.is_empty())
            .map(str::to_string)
            .collect(),
        Some(_) => return Err(malformed("\"Modules\" is not an array".into())),
    };
    let file = path.rsplit('/').next().unwrap_or(path);
    let plugin_name = file.rsplit_once('.').map_or(file, |(stem, _)| stem).to_string();
    Ok(PluginManifest { plugin_name, modules })
}

/// Reads every `DefaultEngine.ini` (merged, first path wins per key) and
/// every `.uplugin` descriptor in the pak.
pub fn read_config_and_plugins(
    pak: &[u8],
    index: &PakIndex,
) -> Result<(Option<EngineConfig>, Vec<PluginManifest>), UnrealError> {
    let mut config: Option<EngineConfig> = None;
    let mut plugins = Vec::new();
    for (path, entry) in &index.entries {
        let lower = path.to_ascii_lowercase();
        if lower.ends_with("defaultengine.ini") {
            let parsed = parse_ini(&ini::decode_text(entry_data(pak, path, entry)?))?;
            match &mut config {
                Some(c) => c.merge(parsed),
                None => config = Some(parsed),
            }
        } else if lower.ends_with(".uplugin") {
            plugins.push(parse_plugin(path, entry_data(pak, path, entry)?)?);
        }
    }
    Ok((config, plugins))
}

/// Strips Unreal's array-operation prefixes (`+Key`, `-Key`, `.Key`, `!Key`).
fn bare_key(key: &str) -> &str {
    key.trim_start_matches(['+', '-', '.', '!'])
}

/// Evidence from enabled config keys and linked modules. Each key or module
/// yields at most one item per data type.
pub fn detect_sensitive_config(
    cfg: Option<&EngineConfig>,
    plugins: &[PluginManifest],
    rules: &[&Rule],
) -> Vec<AccessEvidence> {
    let mut out = Vec::new();
    let mut push = |rule: &Rule, name: &str, source: EvidenceSource| {
        let e = AccessEvidence {
            data_type: rule.data_type,
            api_name: rule.name.clone(),
            path: vec![name.to_string()],
            source,
        };
        if !out.contains(&e) {
            out.push(e);
        }
    };
    if let Some(cfg) = cfg {
        for (section, key, value) in cfg.pairs() {
            let key = bare_key(key);
            let hits: Vec<&&Rule> = rules
                .iter()
                .filter(|r| r.kind == RuleKind::ConfigKey && r.name.eq_ignore_ascii_case(key))
                .collect();
            if hits.is_empty() {
                continue;
            }
            if !parse_bool(value) {
                log::info!("config key {key}={value:?} not enabled");
                continue;
            }
            for r in hits {
                push(r, key, EvidenceSource::ConfigKey { section: section.to_string() });
            }
        }
    }
    for p in plugins {
        for m in &p.modules {
            for r in rules.iter().filter(|r| r.kind == RuleKind::Module && r.name == *m) {
                push(r, m, EvidenceSource::Module { plugin: p.plugin_name.clone() });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrealAnalysis {
    pub pak_path: String,
    pub pak_version: i32,
    pub config: Option<EngineConfig>,
    pub plugins: Vec<PluginManifest>,
    pub evidence: Vec<AccessEvidence>,
}

/// Finds the pak inside the package: a `.pak` entry directly, or the single
/// `.pak` inside an `.obb`/`main.obb.png` container entry.
pub fn locate_pak(pkg: &ApkPackage) -> Result<(String, Vec<u8>), UnrealError> {
    let archive = |e: ApkError| UnrealError::Archive(e.to_string());
    let direct: Vec<&str> = pkg.paths().filter(|p| is_pak(p)).collect();
    match direct.as_slice() {
        [one] => return Ok((one.to_string(), pkg.extract(one).map_err(archive)?)),
        [_, _, ..] => {
            return Err(UnrealError::MultiplePakEntries(direct.iter().map(|s| s.to_string()).collect()))
        }
        [] => {}
    }
    let obbs: Vec<&str> = pkg
        .paths()
        .filter(|p| {
            let l = p.to_ascii_lowercase();
            l.ends_with(".obb") || l.ends_with(".obb.png")
        })
        .collect();
    match obbs.as_slice() {
        [] => Err(UnrealError::NoPakEntry),
        [one] => Ok((one.to_string(), unwrap_obb(&pkg.extract(one).map_err(archive)?)?)),
        _ => Err(UnrealError::MultiplePakEntries(obbs.iter().map(|s| s.to_string()).collect())),
    }
}

pub fn analyze_unreal(pkg: &ApkPackage, rules: &[&Rule]) -> Result<UnrealAnalysis, UnrealError> {
    let (pak_path, pak) = locate_pak(pkg)?;
    analyze_pak(pak_path, &pak, rules)
}

pub fn analyze_pak(pak_path: String, pak: &[u8], rules: &[&Rule]) -> Result<UnrealAnalysis, UnrealError> {
    let index = parse_pak_index(pak)?;
    let (config, plugins) = read_config_and_plugins(pak, &index)?;
    let evidence = detect_sensitive_config(config.as_ref(), &plugins, rules);
    Ok(UnrealAnalysis {
        pak_path,
        pak_version: index.version,
        config,
        plugins,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{SensitivityCatalog, StoreScope};
    use crate::taxonomy::{DataType, Engine, Store};
    use proptest::prelude::*;
    use std::collections::BTreeSet;
    use vraudit_fixtures::pak::PakWriter;
    use vraudit_fixtures::zipw::{build_deflated, build_zip, Method};

    const PLUGIN: &str = r#"{"FileVersion":3,"Modules":[{"Name":"PICOXRMotionTracking","Type":"Runtime"},{"Name":"OpenXRHandTracking"}]}"#;

    fn pico_rules(cat: &SensitivityCatalog) -> Vec<&Rule> {
        cat.lookup(Store::Pico, Engine::Unreal)
    }

    fn types(ev: &[AccessEvidence]) -> BTreeSet<DataType> {
        ev.iter().map(|e| e.data_type).collect()
    }

    #[test]
    fn obb_unwrap() {
        let pak = PakWriter::new(3).add("a", b"x").build();
        let obb = build_deflated(&[("game.pak", &pak[..]), ("readme.txt", b"hi")]);
        assert_eq!(unwrap_obb(&obb).unwrap(), pak);
        assert_eq!(unwrap_obb(&build_deflated(&[("x.txt", b"1")])), Err(UnrealError::NoPakEntry));
        let two = build_zip(&[("a.pak", b"1", Method::Stored), ("b.pak", b"2", Method::Stored)]);
        assert!(matches!(unwrap_obb(&two), Err(UnrealError::MultiplePakEntries(_))));
        assert_eq!(unwrap_obb(b"plain"), Err(UnrealError::NotAZip));
    }

    #[test]
    fn config_and_plugins() {
        let pak = PakWriter::new(3)
            .add("MyApp/Config/DefaultEngine.ini", b"[/Script/PICOXR.Settings]\nEnableEyeTracking=True\n")
            .add("MyApp/Plugins/PICOXR/PICOXR.uplugin", PLUGIN.as_bytes())
            .build();
        let idx = parse_pak_index(&pak).unwrap();
        let (cfg, plugins) = read_config_and_plugins(&pak, &idx).unwrap();
        assert_eq!(cfg.unwrap().sections["/Script/PICOXR.Settings"]["EnableEyeTracking"], "True");
        assert_eq!(plugins[0].plugin_name, "PICOXR");
        assert!(plugins[0].modules.contains(&"PICOXRMotionTracking".to_string()));

        let empty = PakWriter::new(3).add("Content/Map.umap", b"..").build();
        let idx = parse_pak_index(&empty).unwrap();
        assert_eq!(read_config_and_plugins(&empty, &idx).unwrap(), (None, vec![]));
    }

    #[test]
    fn bad_plugin_json() {
        let pak = PakWriter::new(3).add("P/P.uplugin", b"{not json").build();
        let idx = parse_pak_index(&pak).unwrap();
        assert!(matches!(
            read_config_and_plugins(&pak, &idx),
            Err(UnrealError::MalformedPluginJson { .. })
        ));
    }

    #[test]
    fn detection_examples() {
        let cat = SensitivityCatalog::default_catalog();
        let rules = pico_rules(&cat);
        let on = parse_ini("[S]\nenableeyetracking=True").unwrap();
        let ev = detect_sensitive_config(Some(&on), &[], &rules);
        assert_eq!(types(&ev), BTreeSet::from([DataType::Eye]));
        assert_eq!(ev[0].source, EvidenceSource::ConfigKey { section: "S".into() });
        let off = parse_ini("[S]\nEnableEyeTracking=False").unwrap();
        assert!(detect_sensitive_config(Some(&off), &[], &rules).is_empty());
        let plugin = parse_plugin("X/X.uplugin", PLUGIN.as_bytes()).unwrap();
        let ev = detect_sensitive_config(None, &[plugin], &rules);
        assert_eq!(types(&ev), BTreeSet::from([DataType::Body, DataType::Hand]));
        // module names are case-sensitive
        let lower = PluginManifest { plugin_name: "X".into(), modules: vec!["picoxrmotiontracking".into()] };
        assert!(detect_sensitive_config(None, &[lower], &rules).is_empty());
    }

    #[test]
    fn oculus_eye_module() {
        let cat = SensitivityCatalog::default_catalog();
        let rules = cat.lookup(Store::Oculus, Engine::Unreal);
        let p = PluginManifest { plugin_name: "OVR".into(), modules: vec!["OculusEyeTracker".into()] };
        assert_eq!(types(&detect_sensitive_config(None, &[p], &rules)), BTreeSet::from([DataType::Eye]));
    }

    fn unique_rule(i: usize, kind: RuleKind) -> Rule {
        Rule {
            store: StoreScope::Any,
            engine: Engine::Unreal,
            data_type: DataType::ALL[i % 4],
            kind,
            name: format!("N{i}"),
            kind_guessed: false,
            note: None,
        }
    }

    proptest! {
        #[test]
        fn evidence_bounded_by_inputs(
            keys in proptest::collection::btree_map("N[0-9]{1,2}|K[a-z]{1,3}", prop_oneof!["True", "true", "1", "False", "0", "yes"], 0..10),
            modules in proptest::collection::vec("N[0-9]{1,2}|M[a-z]{1,3}", 0..10),
        ) {
            let rules: Vec<Rule> = (0..100)
                .map(|i| unique_rule(i, if i % 2 == 0 { RuleKind::ConfigKey } else { RuleKind::Module }))
                .collect();
            let refs: Vec<&Rule> = rules.iter().collect();
            let cfg = EngineConfig { sections: [("S".to_string(), keys.clone())].into() };
            let plugins = vec![PluginManifest { plugin_name: "P".into(), modules: modules.clone() }];
            let ev = detect_sensitive_config(Some(&cfg), &plugins, &refs);
            prop_assert!(ev.len() <= keys.len() + modules.len());
            let catalog_types: BTreeSet<DataType> = rules.iter().map(|r| r.data_type).collect();
            prop_assert!(ev.iter().all(|e| catalog_types.contains(&e.data_type)));
        }
    }
}
