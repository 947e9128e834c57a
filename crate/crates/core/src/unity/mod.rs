//! Unity analysis: IL2CPP builds via metadata and native call graph, Mono
//! builds via managed assembly names.

pub mod callgraph;
pub mod dotnet;
pub mod metadata;
pub mod reach;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apk::{ApkError, ApkPackage};
use crate::catalog::Rule;
use crate::evidence::AccessEvidence;

pub use callgraph::{extract_call_edges, EdgeConfidence, ElfError, NamedCallGraph};
pub use dotnet::{parse_dotnet_names, DotnetError};
pub use metadata::{parse_global_metadata, MetadataError, MetadataTable, ParseMode};
pub use reach::{condense, name_matches, presence_evidence, reach_sensitive};

pub const METADATA_PATH: &str = "assets/bin/Data/Managed/Metadata/global-metadata.dat";
pub const IL2CPP_LIB: &str = "lib/arm64-v8a/libil2cpp.so";
pub const MANAGED_DIR: &str = "assets/bin/Data/Managed/";

#[derive(Debug, Error)]
pub enum UnityError {
    #[error(transparent)]
    Apk(#[from] ApkError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Elf(#[from] ElfError),
    #[error("{0} not present in package")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnityMode {
    /// Metadata parsed and call graph recovered.
    CallGraph,
    /// Metadata unreadable as records; names matched by presence only.
    StringScan,
    /// Managed assemblies read directly.
    Mono,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnityAnalysis {
    pub mode: UnityMode,
    pub evidence: Vec<AccessEvidence>,
    pub edge_count: usize,
    pub warnings: Vec<String>,
}

/// IL2CPP analysis from raw metadata and `libil2cpp.so` bytes.
pub fn analyze_il2cpp_bytes(
    metadata: &[u8],
    elf: &[u8],
    rules: &[&Rule],
) -> Result<UnityAnalysis, UnityError> {
    let table = parse_global_metadata(metadata)?;
    if table.parse_mode == ParseMode::StringScan {
        return Ok(UnityAnalysis {
            mode: UnityMode::StringScan,
            evidence: condense(presence_evidence(&table.raw_strings, rules)),
            edge_count: 0,
            warnings: vec!["metadata layout not recognised; presence-only matching".into()],
        });
    }
    let graph = extract_call_edges(elf, &table)?;
    let mut evidence = reach_sensitive(&graph, rules);
    // methods without native code still count as present
    let with_code: std::collections::BTreeSet<&String> = graph.labels.values().collect();
    let codeless: Vec<&String> = table
        .method_names
        .iter()
        .filter(|n| !with_code.contains(n))
        .collect();
    evidence.extend(presence_evidence(codeless, rules));
    Ok(UnityAnalysis {
        mode: UnityMode::CallGraph,
        evidence: condense(evidence),
        edge_count: graph.edges.len(),
        warnings: Vec::new(),
    })
}

pub fn analyze_il2cpp(pkg: &ApkPackage, rules: &[&Rule]) -> Result<UnityAnalysis, UnityError> {
    if !pkg.contains(METADATA_PATH) {
        return Err(UnityError::Missing("global-metadata.dat"));
    }
    let metadata = pkg.extract(METADATA_PATH)?;
    let lib = pkg
        .paths()
        .find(|p| p.starts_with("lib/") && p.ends_with("/libil2cpp.so"))
        .map(str::to_string)
        .ok_or(UnityError::Missing("libil2cpp.so"))?;
    let elf = pkg.extract(&lib)?;
    analyze_il2cpp_bytes(&metadata, &elf, rules)
}

/// Mono analysis over every managed DLL under `assets/`. Unreadable
/// assemblies are skipped with a warning.
pub fn analyze_mono(pkg: &ApkPackage, rules: &[&Rule]) -> Result<UnityAnalysis, UnityError> {
    let mut names = std::collections::BTreeSet::new();
    let mut warnings = Vec::new();
    let dlls: Vec<String> = pkg
        .paths()
        .filter(|p| p.starts_with("assets/") && p.to_ascii_lowercase().ends_with(".dll"))
        .map(str::to_string)
        .collect();
    for dll in &dlls {
        match parse_dotnet_names(&pkg.extract(dll)?) {
            Ok(n) => names.extend(n),
            Err(e) => warnings.push(format!("{dll}: {e}")),
        }
    }
    Ok(UnityAnalysis {
        mode: UnityMode::Mono,
        evidence: condense(presence_evidence(&names, rules)),
        edge_count: 0,
        warnings,
    })
}
