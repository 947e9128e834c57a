use serde::{Deserialize, Serialize};

use crate::taxonomy::DataType;

/// How a piece of access evidence was obtained.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceSource {
    /// Reached through the native call graph.
    CallGraph,
    /// Name present in metadata or managed assemblies; no call path.
    Presence,
    /// Enabled engine configuration key, with the ini section hosting it.
    ConfigKey { section: String },
    /// Module listed by a plugin descriptor.
    Module { plugin: String },
}

/// One observed use of a sensitive API, class, module or config key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccessEvidence {
    pub data_type: DataType,
    pub api_name: String,
    /// Method names from an entry point down to the API. Never empty.
    pub path: Vec<String>,
    pub source: EvidenceSource,
}
