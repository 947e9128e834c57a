//! Unreal `.pak` index reader, versions 3 to 7, unencrypted index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::UnrealError;

pub const PAK_MAGIC: u32 = 0x5A6F_12E1;
pub const SUPPORTED_PAK_VERSIONS: std::ops::RangeInclusive<i32> = 3..=7;

/// magic(4) + version(4) + index offset(8) + index size(8) + hash(20)
const FOOTER_TAIL: usize = 44;
/// Distances from the end at which newer footers place the magic
/// (compression-name tables of 4 or 5 names, optional frozen-index byte).
const NEWER_FOOTER_PROBES: [usize; 3] = [172, 204, 205];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PakEntry {
    /// Offset of the inline entry header that precedes the data.
    pub offset: u64,
    pub size: u64,
    pub uncompressed_size: u64,
    pub compression_method: i32,
    /// Length of the inline header; data starts at `offset + header_len`.
    pub header_len: u64,
}

impl PakEntry {
    pub fn is_compressed(&self) -> bool {
        self.compression_method != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PakIndex {
    pub mount_point: String,
    pub entries: BTreeMap<String, PakEntry>,
    pub version: i32,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], UnrealError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| UnrealError::IndexOutOfBounds(format!("index record at {:#x}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn i32(&mut self) -> Result<i32, UnrealError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, UnrealError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, UnrealError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Length-prefixed string: positive length is bytes including NUL,
    /// negative length is UTF-16 code units including NUL.
    fn fstring(&mut self) -> Result<String, UnrealError> {
        let len = self.i32()?;
        if len == 0 {
            return Ok(String::new());
        }
        let s = if len > 0 {
            let raw = self.take(len as usize)?;
            String::from_utf8_lossy(raw.strip_suffix(&[0]).unwrap_or(raw)).into_owned()
        } else {
            let units = (len as i64).unsigned_abs() as usize;
            let raw = self.take(units.checked_mul(2).ok_or_else(|| {
                UnrealError::IndexOutOfBounds("string length overflow".into())
            })?)?;
            let mut wide: Vec<u16> = raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
            if wide.last() == Some(&0) {
                wide.pop();
            }
            String::from_utf16_lossy(&wide)
        };
        Ok(s)
    }

    fn entry(&mut self) -> Result<PakEntry, UnrealError> {
        let start = self.pos;
        let offset = self.i64()?;
        let size = self.i64()?;
        let uncompressed = self.i64()?;
        let compression_method = self.i32()?;
        self.take(20)?;
        if compression_method != 0 {
            let blocks = self.u32()? as usize;
            self.take(blocks.checked_mul(16).ok_or_else(|| {
                UnrealError::IndexOutOfBounds("block count overflow".into())
            })?)?;
        }
        self.take(1 + 4)?;
        if offset < 0 || size < 0 || uncompressed < 0 {
            return Err(UnrealError::IndexOutOfBounds("negative offset or size".into()));
        }
        Ok(PakEntry {
            offset: offset as u64,
            size: size as u64,
            uncompressed_size: uncompressed as u64,
            compression_method,
            header_len: (self.pos - start) as u64,
        })
    }
}

fn magic_at(data: &[u8], from_end: usize) -> Option<i32> {
    let at = data.len().checked_sub(from_end)?;
    let magic = u32::from_le_bytes(data.get(at..at + 4)?.try_into().ok()?);
    (magic == PAK_MAGIC).then(|| i32::from_le_bytes(data[at + 4..at + 8].try_into().unwrap()))
}

pub fn parse_pak_index(data: &[u8]) -> Result<PakIndex, UnrealError> {
    let version = match magic_at(data, FOOTER_TAIL) {
        Some(v) => v,
        None => {
            return Err(NEWER_FOOTER_PROBES
                .iter()
                .find_map(|&d| magic_at(data, d))
                .map_or(UnrealError::BadFooterMagic, UnrealError::UnsupportedPakVersion))
        }
    };
    if !SUPPORTED_PAK_VERSIONS.contains(&version) {
        return Err(UnrealError::UnsupportedPakVersion(version));
    }
    let footer = data.len() - FOOTER_TAIL;
    if version >= 4 && data.get(footer.wrapping_sub(1)).is_some_and(|&b| b != 0) {
        return Err(UnrealError::EncryptedIndexUnsupported);
    }
    let mut f = Cursor { data, pos: footer + 8 };
    let index_offset = f.i64()?;
    let index_size = f.i64()?;
    let index = usize::try_from(index_offset)
        .ok()
        .zip(usize::try_from(index_size).ok())
        .and_then(|(o, s)| Some(o..o.checked_add(s)?))
        .filter(|r| r.end <= footer)
        .and_then(|r| data.get(r))
        .ok_or_else(|| {
            UnrealError::IndexOutOfBounds(format!("index {index_offset:#x}+{index_size:#x}"))
        })?;

    let mut c = Cursor { data: index, pos: 0 };
    let mount_point = c.fstring()?;
    let count = c.i32()?;
    if count < 0 {
        return Err(UnrealError::IndexOutOfBounds(format!("entry count {count}")));
    }
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let path = c.fstring()?;
        let entry = c.entry()?;
        let end = entry
            .offset
            .checked_add(entry.header_len)
            .and_then(|v| v.checked_add(entry.size));
        if end.is_none_or(|e| e > data.len() as u64) {
            return Err(UnrealError::IndexOutOfBounds(format!(
                "{path}: {:#x}+{:#x} past {:#x}",
                entry.offset,
                entry.size,
                data.len()
            )));
        }
        if entries.contains_key(&path) {
            log::warn!("duplicate pak entry {path}, keeping first");
            continue;
        }
        entries.insert(path, entry);
    }
    Ok(PakIndex {
        mount_point,
        entries,
        version,
    })
}

/// Bytes of an uncompressed entry.
pub fn entry_data<'a>(pak: &'a [u8], path: &str, entry: &PakEntry) -> Result<&'a [u8], UnrealError> {
    if entry.is_compressed() {
        return Err(UnrealError::CompressedEntryUnsupported(path.to_string()));
    }
    let start = (entry.offset + entry.header_len) as usize;
    pak.get(start..start + entry.size as usize)
        .ok_or_else(|| UnrealError::IndexOutOfBounds(path.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use vraudit_fixtures::pak::PakWriter;

    #[test]
    fn two_entries_with_offsets() {
        let (bytes, listing) = PakWriter::new(3)
            .add("Engine/Config/DefaultEngine.ini", b"[A]\nx=1\n")
            .add("MyApp/Plugins/P/P.uplugin", b"{}")
            .build_with_listing();
        let idx = parse_pak_index(&bytes).unwrap();
        assert_eq!(idx.mount_point, "../../../");
        assert_eq!(idx.entries.len(), 2);
        for (path, off, size) in listing {
            let e = &idx.entries[&path];
            assert_eq!((e.offset, e.size), (off, size));
        }
        let e = &idx.entries["MyApp/Plugins/P/P.uplugin"];
        assert_eq!(entry_data(&bytes, "", e).unwrap(), b"{}");
    }

    #[test]
    fn bad_magic() {
        let mut bytes = PakWriter::new(3).add("a", b"x").build();
        let n = bytes.len();
        bytes[n - 44] ^= 0xFF;
        assert_eq!(parse_pak_index(&bytes), Err(UnrealError::BadFooterMagic));
        assert_eq!(parse_pak_index(b"tiny"), Err(UnrealError::BadFooterMagic));
    }

    #[test]
    fn encrypted_index() {
        let mut w = PakWriter::new(4).add("a", b"x");
        w.encrypted_index = true;
        assert_eq!(parse_pak_index(&w.build()), Err(UnrealError::EncryptedIndexUnsupported));
    }

    #[test]
    fn entry_offset_past_end() {
        let (mut bytes, listing) = PakWriter::new(3).add("a", b"xyz").build_with_listing();
        // index starts right after the one entry; its offset field follows the mount point
        let index_at = (listing[0].1 + 53 + 3) as usize;
        let rec = index_at + 4 + 10 + 4 + 4 + 2;
        bytes[rec..rec + 8].copy_from_slice(&(1u64 << 40).to_le_bytes());
        assert!(matches!(parse_pak_index(&bytes), Err(UnrealError::IndexOutOfBounds(_))));
    }

    #[test]
    fn newer_footer_is_unsupported() {
        let mut bytes = vec![0u8; 400];
        let at = bytes.len() - 204;
        bytes[at..at + 4].copy_from_slice(&PAK_MAGIC.to_le_bytes());
        bytes[at + 4..at + 8].copy_from_slice(&11i32.to_le_bytes());
        assert_eq!(parse_pak_index(&bytes), Err(UnrealError::UnsupportedPakVersion(11)));
        let old = PakWriter::new(2).add("a", b"x").build();
        assert_eq!(parse_pak_index(&old), Err(UnrealError::UnsupportedPakVersion(2)));
    }

    #[test]
    fn compressed_entry_refused_on_read() {
        let mut w = PakWriter::new(5).add("Cfg/DefaultEngine.ini", b"[A]");
        w.compression_method = 1;
        let bytes = w.build();
        let idx = parse_pak_index(&bytes).unwrap();
        let (p, e) = idx.entries.iter().next().unwrap();
        assert_eq!(entry_data(&bytes, p, e), Err(UnrealError::CompressedEntryUnsupported(p.clone())));
    }

    proptest! {
        #[test]
        fn roundtrip_against_writer(
            version in 3i32..=7,
            files in proptest::collection::btree_map(
                "[A-Za-z0-9_/]{1,24}(\\.[a-z]{1,4})?|[À-ÿ]{1,6}",
                proptest::collection::vec(any::<u8>(), 0..200),
                0..12,
            ),
        ) {
            let mut w = PakWriter::new(version);
            for (p, d) in &files {
                w = w.add(p, d);
            }
            let (bytes, listing) = w.build_with_listing();
            let idx = parse_pak_index(&bytes).unwrap();
            prop_assert_eq!(idx.version, version);
            prop_assert_eq!(idx.entries.len(), listing.len());
            for (path, off, size) in &listing {
                let e = &idx.entries[path];
                prop_assert_eq!((e.offset, e.size), (*off, *size));
                prop_assert_eq!(entry_data(&bytes, path, e).unwrap(), files[path].as_slice());
            }
        }
    }
}
