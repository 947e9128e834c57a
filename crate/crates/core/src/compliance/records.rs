//! Store metadata records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Store;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("unknown store {store:?} at {path}")]
    UnknownStore { path: String, store: String },
}

/// Store age rating: suitable for everyone, or a minimum age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAge", into = "RawAge")]
pub enum AgeRating {
    All,
    Min(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawAge {
    Years(i64),
    Word(String),
}

impl TryFrom<RawAge> for AgeRating {
    type Error = String;

    fn try_from(raw: RawAge) -> Result<Self, Self::Error> {
        match raw {
            RawAge::Word(w) if w.eq_ignore_ascii_case("all") => Ok(AgeRating::All),
            RawAge::Word(w) => Err(format!("age_rating must be \"all\" or a non-negative integer, got {w:?}")),
            RawAge::Years(n) => u32::try_from(n)
                .map(AgeRating::Min)
                .map_err(|_| format!("age_rating must be \"all\" or a non-negative integer, got {n}")),
        }
    }
}

impl From<AgeRating> for RawAge {
    fn from(a: AgeRating) -> RawAge {
        match a {
            AgeRating::All => RawAge::Word("all".into()),
            AgeRating::Min(n) => RawAge::Years(n.into()),
        }
    }
}

impl fmt::Display for AgeRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeRating::All => f.write_str("all"),
            AgeRating::Min(n) => write!(f, "{n}+"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    pub store: Store,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_rating: Option<AgeRating>,
    #[serde(default)]
    pub category: String,
    /// `None` when the store page does not list permissions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_permissions: Option<BTreeSet<String>>,
    #[serde(default)]
    pub supported_languages: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub play_style: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment_requirement: Option<String>,
    /// Keys outside the schema, kept verbatim.
    #[serde(flatten)]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl AppRecord {
    pub fn new(app_id: impl Into<String>, store: Store, name: impl Into<String>) -> AppRecord {
        AppRecord {
            app_id: app_id.into(),
            store,
            name: name.into(),
            age_rating: None,
            category: String::new(),
            declared_permissions: None,
            supported_languages: BTreeSet::new(),
            policy_url: None,
            play_style: None,
            environment_requirement: None,
            extras: BTreeMap::new(),
        }
    }
}

/// Parses a JSON array of records. Store names are checked first so an
/// unknown store gets its own error rather than a generic schema message.
pub fn ingest_records(json: &str) -> Result<Vec<AppRecord>, RecordError> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| RecordError::SchemaViolation {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let Some(items) = value.as_array() else {
        return Err(RecordError::SchemaViolation { path: ".".into(), message: "expected an array of records".into() });
    };
    for (i, item) in items.iter().enumerate() {
        if let Some(store) = item.get("store").and_then(|s| s.as_str()) {
            if store.parse::<Store>().is_err() {
                return Err(RecordError::UnknownStore { path: format!("[{i}].store"), store: store.to_string() });
            }
        }
    }
    let records: Vec<AppRecord> = serde_path_to_error::deserialize(value).map_err(|e| RecordError::SchemaViolation {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        if r.app_id.trim().is_empty() {
            return Err(RecordError::SchemaViolation { path: format!("[{i}].app_id"), message: "empty app_id".into() });
        }
        if !seen.insert(r.app_id.as_str()) {
            return Err(RecordError::SchemaViolation {
                path: format!("[{i}].app_id"),
                message: format!("duplicate app_id {:?}", r.app_id),
            });
        }
    }
    Ok(records)
}
