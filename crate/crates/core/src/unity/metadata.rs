//! IL2CPP `global-metadata.dat` reader.
//!
//! One header layout is supported (see `docs/formats.md`); anything else,
//! including a bad sanity value or an unsupported version, is read in
//! string-scan mode, which only recovers identifier-like strings.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const METADATA_SANITY: u32 = 0xFAB1_1BAF;
pub const SUPPORTED_VERSIONS: RangeInclusive<i32> = 24..=29;
pub const MIN_SCAN_LEN: usize = 4;

const HEADER_LEN: usize = 32;
const METHOD_RECORD_LEN: usize = 20;
const TYPE_RECORD_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetadataError {
    #[error("empty metadata input")]
    EmptyInput,
    #[error("truncated metadata: {0}")]
    TruncatedHeader(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseMode {
    Structured,
    StringScan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataTable {
    /// Qualified method names (`Namespace.Type::Method`) in record order.
    pub method_names: Vec<String>,
    /// First native code offset seen for each name.
    pub name_to_offset: BTreeMap<String, u64>,
    pub raw_strings: BTreeSet<String>,
    pub parse_mode: ParseMode,
    pub version: Option<i32>,
}

impl MetadataTable {
    /// Offset → name, choosing the lexicographically smallest name when
    /// several share an offset so the labelling stays injective.
    pub fn labels(&self) -> BTreeMap<u64, String> {
        let mut out = BTreeMap::new();
        for (name, off) in &self.name_to_offset {
            out.entry(*off).or_insert_with(|| name.clone());
        }
        out
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.'
}

/// Every maximal run of `[A-Za-z0-9_.]` at least `min_len` bytes long.
pub fn scan_identifiers(data: &[u8], min_len: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut start = None;
    for (i, &b) in data.iter().chain(std::iter::once(&0u8)).enumerate() {
        match (is_ident_byte(b), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    // ident bytes are ASCII
                    out.insert(String::from_utf8_lossy(&data[s..i]).into_owned());
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn u32_at(d: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(d[at..at + 4].try_into().unwrap())
}

fn i32_at(d: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(d[at..at + 4].try_into().unwrap())
}

fn section<'a>(data: &'a [u8], at: usize, what: &str) -> Result<&'a [u8], MetadataError> {
    let off = u32_at(data, at) as usize;
    let size = u32_at(data, at + 4) as usize;
    off.checked_add(size)
        .and_then(|end| data.get(off..end))
        .ok_or_else(|| MetadataError::TruncatedHeader(format!("{what} section {off:#x}+{size:#x} past end")))
}

fn c_string(strings: &[u8], idx: u32) -> Result<String, MetadataError> {
    let start = idx as usize;
    let tail = strings
        .get(start..)
        .ok_or_else(|| MetadataError::TruncatedHeader(format!("string index {idx:#x} past string section")))?;
    let len = tail.iter().position(|&b| b == 0).unwrap_or(tail.len());
    Ok(String::from_utf8_lossy(&tail[..len]).into_owned())
}

fn string_scan(data: &[u8], version: Option<i32>) -> MetadataTable {
    MetadataTable {
        method_names: Vec::new(),
        name_to_offset: BTreeMap::new(),
        raw_strings: scan_identifiers(data, MIN_SCAN_LEN),
        parse_mode: ParseMode::StringScan,
        version,
    }
}

pub fn parse_global_metadata(data: &[u8]) -> Result<MetadataTable, MetadataError> {
    if data.is_empty() {
        return Err(MetadataError::EmptyInput);
    }
    if data.len() < 8 || u32_at(data, 0) != METADATA_SANITY {
        return Ok(string_scan(data, None));
    }
    let version = i32_at(data, 4);
    if !SUPPORTED_VERSIONS.contains(&version) {
        log::info!("metadata version {version} unsupported, falling back to string scan");
        return Ok(string_scan(data, Some(version)));
    }
    if data.len() < HEADER_LEN {
        return Err(MetadataError::TruncatedHeader(format!(
            "{} bytes, header needs {HEADER_LEN}",
            data.len()
        )));
    }
    let strings = section(data, 8, "string")?;
    let methods = section(data, 16, "method")?;
    let types = section(data, 24, "type definition")?;
    if methods.len() % METHOD_RECORD_LEN != 0 || types.len() % TYPE_RECORD_LEN != 0 {
        return Err(MetadataError::TruncatedHeader("partial record at section end".into()));
    }

    let type_names: Vec<String> = types
        .chunks_exact(TYPE_RECORD_LEN)
        .map(|t| {
            let name = c_string(strings, u32_at(t, 0))?;
            let ns = c_string(strings, u32_at(t, 4))?;
            Ok(if ns.is_empty() { name } else { format!("{ns}.{name}") })
        })
        .collect::<Result<_, MetadataError>>()?;

    let mut method_names = Vec::with_capacity(methods.len() / METHOD_RECORD_LEN);
    let mut name_to_offset = BTreeMap::new();
    for m in methods.chunks_exact(METHOD_RECORD_LEN) {
        let name = c_string(strings, u32_at(m, 0))?;
        let declaring = i32_at(m, 4);
        let code = u32_at(m, 8) as u64;
        let qualified = if declaring >= 0 {
            let t = type_names.get(declaring as usize).ok_or_else(|| {
                MetadataError::TruncatedHeader(format!("declaring type {declaring} out of range"))
            })?;
            format!("{t}::{name}")
        } else {
            name
        };
        if code != 0 {
            name_to_offset.entry(qualified.clone()).or_insert(code);
        }
        method_names.push(qualified);
    }

    let mut raw_strings: BTreeSet<String> = strings
        .split(|&b| b == 0)
        .filter(|s| !s.is_empty())
        .map(|s| String::from_utf8_lossy(s).into_owned())
        .collect();
    raw_strings.extend(method_names.iter().cloned());

    Ok(MetadataTable {
        method_names,
        name_to_offset,
        raw_strings,
        parse_mode: ParseMode::Structured,
        version: Some(version),
    })
}
