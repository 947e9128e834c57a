//! Sensitive-data catalog: which APIs, classes, modules and config keys reveal
//! access to which VR data category, per store and engine, plus the phrase
//! corpus used to recognise declared data types in policies.
//!
//! The catalog is data. A default copy is compiled in from
//! `data/catalog.json`; `load_catalog` accepts any document with the same
//! schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{DataType, Engine, Store};

pub const DEFAULT_CATALOG_JSON: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("duplicate rule: {0}")]
    DuplicateRule(String),
    #[error("unknown data type {0:?}")]
    UnknownDataType(String),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Api,
    Class,
    Module,
    ConfigKey,
}

/// `any` or a specific store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StoreScope {
    Any,
    Only(Store),
}

impl StoreScope {
    pub fn matches(&self, store: Store) -> bool {
        match self {
            StoreScope::Any => true,
            StoreScope::Only(s) => *s == store,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            StoreScope::Any => "any",
            StoreScope::Only(s) => s.as_str(),
        }
    }
}

impl Serialize for StoreScope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Rule {
    pub store: StoreScope,
    pub engine: Engine,
    pub data_type: DataType,
    pub kind: RuleKind,
    pub name: String,
    /// Kind assigned by naming convention rather than stated by the source.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub kind_guessed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityCatalog {
    pub api_rules: Vec<Rule>,
    pub policy_corpus: BTreeMap<DataType, Vec<String>>,
}

// Raw shapes; data types and stores stay strings so that unknown values get
// their dedicated errors instead of a generic serde message.
#[derive(Deserialize)]
struct RawCatalog {
    #[allow(dead_code)]
    #[serde(default)]
    version: Option<u32>,
    api_rules: Vec<RawRule>,
    policy_corpus: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct RawRule {
    store: String,
    engine: Engine,
    data_type: String,
    kind: RuleKind,
    name: String,
    #[serde(default)]
    kind_guessed: bool,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Serialize)]
struct CatalogOut<'a> {
    version: u32,
    api_rules: &'a [Rule],
    policy_corpus: BTreeMap<&'static str, &'a Vec<String>>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::SchemaViolation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a catalog document.
pub fn load_catalog(text: &[u8]) -> Result<SensitivityCatalog, CatalogError> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    let raw: RawCatalog = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.inner().to_string())
    })?;

    let mut seen = BTreeSet::new();
    let mut api_rules = Vec::with_capacity(raw.api_rules.len());
    for (i, r) in raw.api_rules.into_iter().enumerate() {
        let data_type: DataType = r.data_type.parse().map_err(CatalogError::UnknownDataType)?;
        let store = if r.store == "any" {
            StoreScope::Any
        } else {
            StoreScope::Only(
                r.store
                    .parse()
                    .map_err(|s| schema(format!("api_rules[{i}].store"), format!("unknown store {s:?}")))?,
            )
        };
        let name = r.name.trim().to_string();
        if name.is_empty() {
            return Err(schema(format!("api_rules[{i}].name"), "empty name"));
        }
        // A name may legitimately indicate more than one data type (e.g. an
        // HMD module covering eye and hand input), so the data type is part of
        // the identity.
        let key = (store, r.engine, r.kind, name.clone(), data_type);
        if !seen.insert(key) {
            return Err(CatalogError::DuplicateRule(format!(
                "{} {} {:?} {name} ({data_type})",
                store.as_str(),
                r.engine,
                r.kind
            )));
        }
        api_rules.push(Rule {
            store,
            engine: r.engine,
            data_type,
            kind: r.kind,
            name,
            kind_guessed: r.kind_guessed,
            note: r.note,
        });
    }

    let mut policy_corpus = BTreeMap::new();
    for (k, phrases) in raw.policy_corpus {
        let dt: DataType = k.parse().map_err(CatalogError::UnknownDataType)?;
        let phrases: Vec<String> = phrases
            .iter()
            .map(|p| normalize_phrase(p))
            .filter(|p| !p.is_empty())
            .collect();
        policy_corpus.insert(dt, phrases);
    }
    for dt in DataType::ALL {
        if policy_corpus.get(&dt).is_none_or(|p| p.is_empty()) {
            return Err(schema(format!("policy_corpus.{dt}"), "needs at least one phrase"));
        }
    }
    Ok(SensitivityCatalog {
        api_rules,
        policy_corpus,
    })
}

/// Lower-cases and collapses whitespace.
pub fn normalize_phrase(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl SensitivityCatalog {
    pub fn default_catalog() -> SensitivityCatalog {
        load_catalog(DEFAULT_CATALOG_JSON.as_bytes()).expect("bundled catalog is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<SensitivityCatalog, CatalogError> {
        load_catalog(&std::fs::read(path)?)
    }

    /// Rules for `(store, engine)` plus rules scoped to any store.
    pub fn lookup(&self, store: Store, engine: Engine) -> Vec<&Rule> {
        lookup(self, store, engine)
    }

    pub fn data_types(&self) -> BTreeSet<DataType> {
        self.policy_corpus.keys().copied().collect()
    }

    pub fn to_json(&self) -> String {
        let out = CatalogOut {
            version: 1,
            api_rules: &self.api_rules,
            policy_corpus: self.policy_corpus.iter().map(|(k, v)| (k.as_str(), v)).collect(),
        };
        serde_json::to_string_pretty(&out).expect("catalog serializes")
    }

    /// Equality ignoring rule and phrase order.
    pub fn semantically_eq(&self, other: &SensitivityCatalog) -> bool {
        let a: BTreeSet<&Rule> = self.api_rules.iter().collect();
        let b: BTreeSet<&Rule> = other.api_rules.iter().collect();
        let ca: BTreeMap<_, BTreeSet<&String>> =
            self.policy_corpus.iter().map(|(k, v)| (k, v.iter().collect())).collect();
        let cb: BTreeMap<_, BTreeSet<&String>> =
            other.policy_corpus.iter().map(|(k, v)| (k, v.iter().collect())).collect();
        a == b && ca == cb
    }
}

pub fn lookup(catalog: &SensitivityCatalog, store: Store, engine: Engine) -> Vec<&Rule> {
    catalog
        .api_rules
        .iter()
        .filter(|r| r.engine == engine && r.store.matches(store))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has(rules: &[&Rule], dt: DataType, kind: RuleKind, name: &str) -> bool {
        rules.iter().any(|r| r.data_type == dt && r.kind == kind && r.name == name)
    }

    #[test]
    fn default_has_pico_eye_api() {
        let c = SensitivityCatalog::default_catalog();
        assert!(c.api_rules.iter().any(|r| r.store == StoreScope::Only(Store::Pico)
            && r.engine == Engine::Unity
            && r.data_type == DataType::Eye
            && r.kind == RuleKind::Api
            && r.name == "UPvr_getEyeTrackingPos"));
        assert!(c.policy_corpus[&DataType::Hand].contains(&"hand pose data".to_string()));
    }

    #[test]
    fn lookup_examples() {
        let c = SensitivityCatalog::default_catalog();
        let ou = c.lookup(Store::Oculus, Engine::Unity);
        assert!(has(&ou, DataType::Eye, RuleKind::Class, "OVREyeGaze"));
        assert!(ou.iter().all(|r| r.engine == Engine::Unity));
        let ue = c.lookup(Store::Oculus, Engine::Unreal);
        assert!(has(&ue, DataType::Eye, RuleKind::Module, "OculusEyeTracker"));
        // store-agnostic rules come along
        assert!(has(&ue, DataType::Eye, RuleKind::ConfigKey, "EnableEyeTracking"));
        assert!(c.lookup(Store::PlayStation, Engine::Unity).is_empty());
    }

    #[test]
    fn unknown_data_type() {
        let doc = br#"{"api_rules":[{"store":"Pico","engine":"Unity","data_type":"Voice","kind":"api","name":"X"}],
            "policy_corpus":{"Body":["a"],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        assert!(matches!(load_catalog(doc), Err(CatalogError::UnknownDataType(s)) if s == "Voice"));
        let doc = br#"{"api_rules":[], "policy_corpus":{"Body":["a"],"Face":["b"],"Eye":["c"],"Hand":["d"],"Voice":["e"]}}"#;
        assert!(matches!(load_catalog(doc), Err(CatalogError::UnknownDataType(_))));
    }

    #[test]
    fn schema_violations() {
        let missing = br#"{"api_rules":[{"store":"Pico","engine":"Unity","data_type":"Eye","kind":"api"}],
            "policy_corpus":{"Body":["a"],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        match load_catalog(missing) {
            Err(CatalogError::SchemaViolation { path, .. }) => assert!(path.starts_with("api_rules[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_catalog(br#"{"api_rules":[]}"#),
            Err(CatalogError::SchemaViolation { .. })
        ));
        let empty_corpus = br#"{"api_rules":[], "policy_corpus":{"Body":[],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        assert!(matches!(load_catalog(empty_corpus), Err(CatalogError::SchemaViolation { .. })));
        let bad_store = br#"{"api_rules":[{"store":"AppStoreX","engine":"Unity","data_type":"Eye","kind":"api","name":"X"}],
            "policy_corpus":{"Body":["a"],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        assert!(matches!(load_catalog(bad_store), Err(CatalogError::SchemaViolation { .. })));
    }

    #[test]
    fn duplicate_rule() {
        let doc = br#"{"api_rules":[
            {"store":"Pico","engine":"Unity","data_type":"Eye","kind":"api","name":"X"},
            {"store":"Pico","engine":"Unity","data_type":"Eye","kind":"api","name":"X"}],
            "policy_corpus":{"Body":["a"],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        assert!(matches!(load_catalog(doc), Err(CatalogError::DuplicateRule(_))));
    }

    #[test]
    fn reserialize_round_trip() {
        let c = SensitivityCatalog::default_catalog();
        let again = load_catalog(c.to_json().as_bytes()).unwrap();
        assert!(c.semantically_eq(&again));
        let mut shuffled = again.clone();
        shuffled.api_rules.reverse();
        assert!(c.semantically_eq(&shuffled));
        assert_ne!(c.api_rules, shuffled.api_rules);
    }

    #[test]
    fn corpus_phrases_are_normalized() {
        let doc = br#"{"api_rules":[], "policy_corpus":{"Body":["Body   Tracking"],"Face":["b"],"Eye":["c"],"Hand":["d"]}}"#;
        let c = load_catalog(doc).unwrap();
        assert_eq!(c.policy_corpus[&DataType::Body], vec!["body tracking"]);
    }
}
