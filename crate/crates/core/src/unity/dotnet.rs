//! ECMA-335 metadata reader for Unity Mono assemblies.
//!
//! Reads only the tables up to MemberRef (0x0A), which is enough to recover
//! type references, type definitions, method definitions and member
//! references. Names come out as `Namespace.Type` and
//! `Namespace.Type::Member`.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DotnetError {
    #[error("not a PE image")]
    NotPe,
    #[error("PE image has no CLI header")]
    NoCliHeader,
    #[error("corrupt CLI metadata: {0}")]
    CorruptMetadata(String),
}

fn corrupt(msg: impl Into<String>) -> DotnetError {
    DotnetError::CorruptMetadata(msg.into())
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&self, at: usize, len: usize) -> Result<&'a [u8], DotnetError> {
        at.checked_add(len)
            .and_then(|end| self.data.get(at..end))
            .ok_or_else(|| corrupt(format!("read {len} bytes at {at:#x} past end")))
    }
    fn u16(&self, at: usize) -> Result<u16, DotnetError> {
        Ok(u16::from_le_bytes(self.bytes(at, 2)?.try_into().unwrap()))
    }
    fn u32(&self, at: usize) -> Result<u32, DotnetError> {
        Ok(u32::from_le_bytes(self.bytes(at, 4)?.try_into().unwrap()))
    }
    fn u64(&self, at: usize) -> Result<u64, DotnetError> {
        Ok(u64::from_le_bytes(self.bytes(at, 8)?.try_into().unwrap()))
    }
    /// Little-endian index of width 2 or 4.
    fn idx(&self, at: usize, width: usize) -> Result<u32, DotnetError> {
        if width == 2 {
            self.u16(at).map(u32::from)
        } else {
            self.u32(at)
        }
    }
}

struct Section {
    va: u32,
    vsize: u32,
    raw_ptr: u32,
    raw_size: u32,
}

fn rva_to_offset(sections: &[Section], rva: u32) -> Option<usize> {
    sections.iter().find_map(|s| {
        let span = s.vsize.max(s.raw_size);
        (rva >= s.va && rva - s.va < span && rva - s.va < s.raw_size)
            .then(|| (s.raw_ptr + (rva - s.va)) as usize)
    })
}

/// Locates the metadata root (`BSJB`) through the CLI header.
fn metadata_root(data: &[u8]) -> Result<usize, DotnetError> {
    let r = Reader { data };
    if data.get(..2) != Some(b"MZ") {
        return Err(DotnetError::NotPe);
    }
    let pe = r.u32(0x3C).map_err(|_| DotnetError::NotPe)? as usize;
    if r.bytes(pe, 4).ok() != Some(b"PE\0\0".as_slice()) {
        return Err(DotnetError::NotPe);
    }
    let coff = pe + 4;
    let n_sections = r.u16(coff + 2).map_err(|_| DotnetError::NotPe)? as usize;
    let opt_size = r.u16(coff + 16).map_err(|_| DotnetError::NotPe)? as usize;
    let opt = coff + 20;
    let (count_at, dirs_at) = match r.u16(opt).map_err(|_| DotnetError::NotPe)? {
        0x10B => (opt + 92, opt + 96),
        0x20B => (opt + 108, opt + 112),
        _ => return Err(DotnetError::NotPe),
    };
    let dir_count = r.u32(count_at).map_err(|_| DotnetError::NotPe)?;
    if dir_count <= 14 {
        return Err(DotnetError::NoCliHeader);
    }
    let cli_rva = r.u32(dirs_at + 14 * 8).map_err(|_| DotnetError::NotPe)?;
    if cli_rva == 0 {
        return Err(DotnetError::NoCliHeader);
    }
    let mut sections = Vec::with_capacity(n_sections);
    for i in 0..n_sections {
        let s = opt + opt_size + i * 40;
        sections.push(Section {
            vsize: r.u32(s + 8).map_err(|_| DotnetError::NotPe)?,
            va: r.u32(s + 12).map_err(|_| DotnetError::NotPe)?,
            raw_size: r.u32(s + 16).map_err(|_| DotnetError::NotPe)?,
            raw_ptr: r.u32(s + 20).map_err(|_| DotnetError::NotPe)?,
        });
    }
    let cli = rva_to_offset(&sections, cli_rva).ok_or(DotnetError::NoCliHeader)?;
    let md_rva = r.u32(cli + 8)?;
    let root = rva_to_offset(&sections, md_rva).ok_or_else(|| corrupt("metadata RVA not mapped"))?;
    if r.bytes(root, 4)? != b"BSJB" {
        return Err(corrupt("metadata root signature is not BSJB"));
    }
    Ok(root)
}

const MODULE: usize = 0x00;
const TYPE_REF: usize = 0x01;
const TYPE_DEF: usize = 0x02;
const FIELD: usize = 0x04;
const METHOD_DEF: usize = 0x06;
const PARAM: usize = 0x08;
const MEMBER_REF: usize = 0x0A;
const MODULE_REF: usize = 0x1A;
const TYPE_SPEC: usize = 0x1B;
const ASSEMBLY_REF: usize = 0x23;

struct Layout {
    rows: [u32; 64],
    str_w: usize,
    guid_w: usize,
    blob_w: usize,
}

impl Layout {
    fn idx(&self, table: usize) -> usize {
        if self.rows[table] < 1 << 16 {
            2
        } else {
            4
        }
    }
    fn coded(&self, tables: &[usize], tag_bits: u32) -> usize {
        let max = tables.iter().map(|&t| self.rows[t]).max().unwrap_or(0);
        if max < 1 << (16 - tag_bits) {
            2
        } else {
            4
        }
    }
    fn resolution_scope(&self) -> usize {
        self.coded(&[MODULE, MODULE_REF, ASSEMBLY_REF, TYPE_REF], 2)
    }
    fn type_def_or_ref(&self) -> usize {
        self.coded(&[TYPE_DEF, TYPE_REF, TYPE_SPEC], 2)
    }
    fn member_ref_parent(&self) -> usize {
        self.coded(&[TYPE_DEF, TYPE_REF, MODULE_REF, METHOD_DEF, TYPE_SPEC], 3)
    }
    fn row_size(&self, table: usize) -> Option<usize> {
        let (s, g, b) = (self.str_w, self.guid_w, self.blob_w);
        Some(match table {
            0x00 => 2 + s + 3 * g,
            0x01 => self.resolution_scope() + 2 * s,
            0x02 => 4 + 2 * s + self.type_def_or_ref() + self.idx(FIELD) + self.idx(METHOD_DEF),
            0x03 => self.idx(FIELD),
            0x04 => 2 + s + b,
            0x05 => self.idx(METHOD_DEF),
            0x06 => 8 + s + b + self.idx(PARAM),
            0x07 => self.idx(PARAM),
            0x08 => 4 + s,
            0x09 => self.idx(TYPE_DEF) + self.type_def_or_ref(),
            0x0A => self.member_ref_parent() + s + b,
            _ => return None,
        })
    }
}

fn heap_string(heap: &[u8], idx: u32) -> Result<String, DotnetError> {
    let tail = heap
        .get(idx as usize..)
        .ok_or_else(|| corrupt(format!("#Strings index {idx:#x} out of range")))?;
    let len = tail
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| corrupt("unterminated #Strings entry"))?;
    Ok(String::from_utf8_lossy(&tail[..len]).into_owned())
}

fn qualify(ns: &str, name: &str) -> String {
    if ns.is_empty() {
        name.to_string()
    } else {
        format!("{ns}.{name}")
    }
}

/// Recovers qualified type and member names from a managed assembly.
pub fn parse_dotnet_names(data: &[u8]) -> Result<BTreeSet<String>, DotnetError> {
    let root = metadata_root(data)?;
    let r = Reader { data };
    let version_len = r.u32(root + 12)? as usize;
    let mut at = root + 16 + version_len + 2;
    let n_streams = r.u16(at)? as usize;
    at += 2;
    let mut tables_stream = None;
    let mut strings_stream = None;
    for _ in 0..n_streams {
        let off = r.u32(at)? as usize;
        let size = r.u32(at + 4)? as usize;
        let name_start = at + 8;
        let name_len = data
            .get(name_start..)
            .unwrap_or_default()
            .iter()
            .take(32)
            .position(|&b| b == 0)
            .ok_or_else(|| corrupt("stream name not terminated"))?;
        let name = &data[name_start..name_start + name_len];
        let body = r.bytes(root + off, size)?;
        match name {
            b"#~" | b"#-" => tables_stream = Some(body),
            b"#Strings" => strings_stream = Some(body),
            _ => {}
        }
        at = name_start + (name_len + 4) / 4 * 4;
    }
    let tables = tables_stream.ok_or_else(|| corrupt("no #~ stream"))?;
    let strings = strings_stream.unwrap_or(&[]);
    let t = Reader { data: tables };

    let heap_sizes = *tables.get(6).ok_or_else(|| corrupt("short #~ header"))?;
    let valid = t.u64(8)?;
    let mut layout = Layout {
        rows: [0; 64],
        str_w: if heap_sizes & 0x01 != 0 { 4 } else { 2 },
        guid_w: if heap_sizes & 0x02 != 0 { 4 } else { 2 },
        blob_w: if heap_sizes & 0x04 != 0 { 4 } else { 2 },
    };
    let mut pos = 24;
    for i in 0..64 {
        if valid & (1 << i) != 0 {
            layout.rows[i] = t.u32(pos)?;
            pos += 4;
        }
    }
    if heap_sizes & 0x40 != 0 {
        pos += 4;
    }
    let mut table_start = [0usize; MEMBER_REF + 1];
    for (i, start) in table_start.iter_mut().enumerate() {
        *start = pos;
        if layout.rows[i] > 0 {
            let size = layout.row_size(i).expect("tables up to MemberRef have known layout");
            pos = pos
                .checked_add(size * layout.rows[i] as usize)
                .filter(|&p| p <= tables.len())
                .ok_or_else(|| corrupt(format!("table {i:#04x} runs past #~ stream")))?;
        }
    }
    let row = |table: usize, i: usize| table_start[table] + i * layout.row_size(table).unwrap();
    let s = layout.str_w;

    let mut out = BTreeSet::new();

    let mut type_refs = Vec::with_capacity(layout.rows[TYPE_REF] as usize);
    for i in 0..layout.rows[TYPE_REF] as usize {
        let base = row(TYPE_REF, i) + layout.resolution_scope();
        let name = heap_string(strings, t.idx(base, s)?)?;
        let ns = heap_string(strings, t.idx(base + s, s)?)?;
        type_refs.push(qualify(&ns, &name));
    }

    let n_types = layout.rows[TYPE_DEF] as usize;
    let n_methods = layout.rows[METHOD_DEF] as usize;
    let mut type_defs = Vec::with_capacity(n_types);
    let mut method_lists = Vec::with_capacity(n_types);
    let method_list_at = 4 + 2 * s + layout.type_def_or_ref() + layout.idx(FIELD);
    for i in 0..n_types {
        let base = row(TYPE_DEF, i);
        let name = heap_string(strings, t.idx(base + 4, s)?)?;
        let ns = heap_string(strings, t.idx(base + 4 + s, s)?)?;
        type_defs.push(qualify(&ns, &name));
        method_lists.push(t.idx(base + method_list_at, layout.idx(METHOD_DEF))? as usize);
    }

    // owner[m] for 0-based method index m; MethodList is 1-based and monotone.
    let mut owner: Vec<Option<usize>> = vec![None; n_methods];
    for ty in 0..n_types {
        let start = method_lists[ty].max(1);
        let end = method_lists
            .get(ty + 1)
            .copied()
            .unwrap_or(n_methods + 1)
            .min(n_methods + 1);
        for slot in owner.iter_mut().take(end.saturating_sub(1)).skip(start - 1) {
            *slot = Some(ty);
        }
    }
    let mut method_names = Vec::with_capacity(n_methods);
    for (i, ty) in owner.iter().enumerate() {
        let name = heap_string(strings, t.idx(row(METHOD_DEF, i) + 8, s)?)?;
        let full = match ty {
            Some(ty) => format!("{}::{name}", type_defs[*ty]),
            None => name,
        };
        method_names.push(full);
    }

    let mrp = layout.member_ref_parent();
    for i in 0..layout.rows[MEMBER_REF] as usize {
        let base = row(MEMBER_REF, i);
        let parent = t.idx(base, mrp)?;
        let name = heap_string(strings, t.idx(base + mrp, s)?)?;
        let (tag, index) = (parent & 0b111, (parent >> 3) as usize);
        let owner = match tag {
            0 => type_defs.get(index.wrapping_sub(1)),
            1 => type_refs.get(index.wrapping_sub(1)),
            _ => None,
        };
        out.insert(match owner {
            Some(q) => format!("{q}::{name}"),
            None => name,
        });
    }

    out.extend(type_refs);
    out.extend(type_defs);
    out.extend(method_names);
    Ok(out)
}
