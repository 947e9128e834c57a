//! Call-graph recovery from AArch64 `libil2cpp.so`.
//!
//! Only direct `BL` instructions are decoded. Each call is attributed to the
//! nearest labelled function at or below the instruction address; calls
//! before the first label are attributed to the instruction address itself.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metadata::MetadataTable;

const EM_AARCH64: u16 = 183;
const SHT_NOBITS: u32 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElfError {
    #[error("not an ELF image")]
    NotElf,
    #[error("ELF image has no .text section")]
    NoTextSection,
    #[error("ELF image is not 64-bit little endian")]
    WrongClassOrEndianness,
    #[error("ELF machine {0} is not AArch64")]
    WrongMachine(u16),
    #[error("truncated ELF image: {0}")]
    Truncated(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeConfidence {
    /// Both endpoints are metadata-labelled functions.
    Exact,
    /// Caller or callee had no metadata label.
    Approx,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NamedCallGraph {
    pub nodes: BTreeSet<u64>,
    pub edges: BTreeSet<(u64, u64)>,
    /// Injective: one name per offset.
    pub labels: BTreeMap<u64, String>,
    pub confidence: BTreeMap<(u64, u64), EdgeConfidence>,
}

impl NamedCallGraph {
    pub fn name_of(&self, node: u64) -> String {
        self.labels
            .get(&node)
            .cloned()
            .unwrap_or_else(|| format!("sub_{node:X}"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TextSection<'a> {
    pub addr: u64,
    pub bytes: &'a [u8],
}

fn field<const N: usize>(elf: &[u8], at: usize) -> Result<[u8; N], ElfError> {
    at.checked_add(N)
        .and_then(|end| elf.get(at..end))
        .map(|s| s.try_into().unwrap())
        .ok_or_else(|| ElfError::Truncated(format!("{N} bytes at {at:#x}")))
}

fn u16_at(elf: &[u8], at: usize) -> Result<u16, ElfError> {
    field::<2>(elf, at).map(u16::from_le_bytes)
}

fn u32_at(elf: &[u8], at: usize) -> Result<u32, ElfError> {
    field::<4>(elf, at).map(u32::from_le_bytes)
}

fn u64_at(elf: &[u8], at: usize) -> Result<u64, ElfError> {
    field::<8>(elf, at).map(u64::from_le_bytes)
}

/// Finds `.text` through the section header table.
pub fn find_text(elf: &[u8]) -> Result<TextSection<'_>, ElfError> {
    if elf.get(..4) != Some(b"\x7FELF") {
        return Err(ElfError::NotElf);
    }
    if elf.get(4) != Some(&2) || elf.get(5) != Some(&1) {
        return Err(ElfError::WrongClassOrEndianness);
    }
    let machine = u16_at(elf, 0x12)?;
    if machine != EM_AARCH64 {
        return Err(ElfError::WrongMachine(machine));
    }
    let shoff = u64_at(elf, 0x28)? as usize;
    let shentsize = u16_at(elf, 0x3A)? as usize;
    let shnum = u16_at(elf, 0x3C)? as usize;
    let shstrndx = u16_at(elf, 0x3E)? as usize;
    if shnum == 0 || shstrndx >= shnum || shentsize < 64 {
        return Err(ElfError::NoTextSection);
    }
    let header = |i: usize| shoff + i * shentsize;
    let strtab_off = u64_at(elf, header(shstrndx) + 0x18)? as usize;
    let strtab_size = u64_at(elf, header(shstrndx) + 0x20)? as usize;
    let strtab = strtab_off
        .checked_add(strtab_size)
        .and_then(|end| elf.get(strtab_off..end))
        .ok_or_else(|| ElfError::Truncated("section name table".into()))?;
    for i in 0..shnum {
        let h = header(i);
        let name_off = u32_at(elf, h)? as usize;
        let name = strtab
            .get(name_off..)
            .and_then(|t| t.split(|&b| b == 0).next())
            .unwrap_or_default();
        if name != b".text" {
            continue;
        }
        if u32_at(elf, h + 4)? == SHT_NOBITS {
            return Err(ElfError::NoTextSection);
        }
        let addr = u64_at(elf, h + 0x10)?;
        let off = u64_at(elf, h + 0x18)? as usize;
        let size = u64_at(elf, h + 0x20)? as usize;
        let bytes = off
            .checked_add(size)
            .and_then(|end| elf.get(off..end))
            .ok_or_else(|| ElfError::Truncated(".text contents".into()))?;
        return Ok(TextSection { addr, bytes });
    }
    Err(ElfError::NoTextSection)
}

/// Target of an AArch64 `BL` at `pc`, or `None` for any other instruction.
pub fn decode_bl(word: u32, pc: u64) -> Option<u64> {
    if word >> 26 != 0b100101 {
        return None;
    }
    // sign-extend imm26 via an arithmetic shift
    let imm = ((word << 6) as i32 >> 6) as i64;
    Some(pc.wrapping_add_signed(imm * 4))
}

/// Every `(pc, target)` BL pair in `text` whose target lies inside `text`.
pub fn scan_bl(text: TextSection<'_>) -> Vec<(u64, u64)> {
    let end = text.addr + text.bytes.len() as u64;
    text.bytes
        .chunks_exact(4)
        .enumerate()
        .filter_map(|(i, w)| {
            let pc = text.addr + 4 * i as u64;
            let target = decode_bl(u32::from_le_bytes(w.try_into().unwrap()), pc)?;
            (target >= text.addr && target < end).then_some((pc, target))
        })
        .collect()
}

pub fn extract_call_edges(elf: &[u8], metadata: &MetadataTable) -> Result<NamedCallGraph, ElfError> {
    let text = find_text(elf)?;
    let labels = metadata.labels();
    let mut graph = NamedCallGraph {
        nodes: labels.keys().copied().collect(),
        ..Default::default()
    };
    for (pc, target) in scan_bl(text) {
        let caller = labels.range(..=pc).next_back().map(|(&off, _)| off);
        let edge = (caller.unwrap_or(pc), target);
        let confidence = if caller.is_some() && labels.contains_key(&target) {
            EdgeConfidence::Exact
        } else {
            EdgeConfidence::Approx
        };
        graph.nodes.insert(edge.0);
        graph.nodes.insert(edge.1);
        graph.edges.insert(edge);
        graph.confidence.insert(edge, confidence);
    }
    graph.labels = labels;
    Ok(graph)
}
