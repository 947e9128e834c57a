//! Central-directory zip reader.
//!
//! Only the pieces an APK needs: EOCD lookup, central directory listing and
//! stored/deflate extraction with CRC verification. Zip64 archives are
//! rejected.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flate2::read::DeflateDecoder;

use super::ApkError;

const LOCAL_SIG: u32 = 0x0403_4b50;
const CENTRAL_SIG: u32 = 0x0201_4b50;
const EOCD_SIG: u32 = 0x0605_4b50;
const EOCD_LEN: usize = 22;
const MAX_COMMENT: usize = 0xFFFF;

pub const METHOD_STORED: u16 = 0;
pub const METHOD_DEFLATE: u16 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryMeta {
    pub method: u16,
    pub flags: u16,
    pub crc32: u32,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub local_header_offset: u64,
}

#[derive(Debug, Clone)]
pub(crate) enum Source {
    File(PathBuf),
    Memory(Arc<[u8]>),
}

impl Source {
    pub(crate) fn describe(&self) -> String {
        match self {
            Source::File(p) => p.display().to_string(),
            Source::Memory(b) => format!("<memory:{} bytes>", b.len()),
        }
    }

    fn read_at(&self, offset: u64, len: usize) -> Result<Vec<u8>, ApkError> {
        match self {
            Source::File(p) => {
                let mut f = File::open(p)?;
                let total = f.metadata()?.len();
                if offset.checked_add(len as u64).is_none_or(|end| end > total) {
                    return Err(ApkError::TruncatedArchive);
                }
                f.seek(SeekFrom::Start(offset))?;
                let mut buf = vec![0; len];
                f.read_exact(&mut buf)?;
                Ok(buf)
            }
            Source::Memory(b) => {
                let start = usize::try_from(offset).map_err(|_| ApkError::TruncatedArchive)?;
                let end = start.checked_add(len).ok_or(ApkError::TruncatedArchive)?;
                b.get(start..end)
                    .map(|s| s.to_vec())
                    .ok_or(ApkError::TruncatedArchive)
            }
        }
    }

    fn len(&self) -> Result<u64, ApkError> {
        match self {
            Source::File(p) => Ok(std::fs::metadata(p)?.len()),
            Source::Memory(b) => Ok(b.len() as u64),
        }
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads the central directory of `source`.
pub(crate) fn read_directory(source: &Source) -> Result<BTreeMap<String, EntryMeta>, ApkError> {
    let total = source.len()?;
    if total < 4 {
        return Err(ApkError::NotAZip);
    }
    let head = source.read_at(0, 4)?;
    if &head[..2] != b"PK" {
        return Err(ApkError::NotAZip);
    }
    if (total as usize) < EOCD_LEN {
        return Err(ApkError::TruncatedArchive);
    }
    let tail_len = (total as usize).min(EOCD_LEN + MAX_COMMENT);
    let tail_start = total - tail_len as u64;
    let tail = source.read_at(tail_start, tail_len)?;

    // Scan backward for an EOCD whose comment length reaches end of file.
    let mut eocd = None;
    let mut i = tail.len() - EOCD_LEN;
    loop {
        if u32_at(&tail, i) == EOCD_SIG {
            let comment_len = u16_at(&tail, i + 20) as usize;
            if i + EOCD_LEN + comment_len == tail.len() {
                eocd = Some(i);
                break;
            }
        }
        if i == 0 {
            break;
        }
        i -= 1;
    }
    let Some(at) = eocd else {
        return Err(if u32_at(&head, 0) == LOCAL_SIG || u32_at(&head, 0) == EOCD_SIG {
            ApkError::TruncatedArchive
        } else {
            ApkError::NotAZip
        });
    };
    let count = u16_at(&tail, at + 10) as u64;
    let cd_size = u32_at(&tail, at + 12) as u64;
    let cd_offset = u32_at(&tail, at + 16) as u64;
    if count == 0xFFFF || cd_size == 0xFFFF_FFFF || cd_offset == 0xFFFF_FFFF {
        return Err(ApkError::Unsupported("zip64 archives".into()));
    }
    let eocd_pos = tail_start + at as u64;
    if cd_offset + cd_size > eocd_pos {
        return Err(ApkError::TruncatedArchive);
    }
    let cd = source.read_at(cd_offset, cd_size as usize)?;

    let mut entries = BTreeMap::new();
    let mut pos = 0usize;
    for _ in 0..count {
        if pos + 46 > cd.len() || u32_at(&cd, pos) != CENTRAL_SIG {
            return Err(ApkError::TruncatedArchive);
        }
        let flags = u16_at(&cd, pos + 8);
        let method = u16_at(&cd, pos + 10);
        let crc32 = u32_at(&cd, pos + 16);
        let compressed_size = u32_at(&cd, pos + 20) as u64;
        let uncompressed_size = u32_at(&cd, pos + 24) as u64;
        let name_len = u16_at(&cd, pos + 28) as usize;
        let extra_len = u16_at(&cd, pos + 30) as usize;
        let comment_len = u16_at(&cd, pos + 32) as usize;
        let local_header_offset = u32_at(&cd, pos + 42) as u64;
        let name_end = pos + 46 + name_len;
        if name_end > cd.len() {
            return Err(ApkError::TruncatedArchive);
        }
        let name = String::from_utf8_lossy(&cd[pos + 46..name_end]).replace('\\', "/");
        pos = name_end + extra_len + comment_len;
        if name.ends_with('/') {
            continue;
        }
        // Duplicate names: the first central-directory record wins.
        entries.entry(name).or_insert(EntryMeta {
            method,
            flags,
            crc32,
            compressed_size,
            uncompressed_size,
            local_header_offset,
        });
    }
    Ok(entries)
}

/// Reads and decompresses one entry.
pub(crate) fn read_entry(source: &Source, path: &str, meta: &EntryMeta) -> Result<Vec<u8>, ApkError> {
    if meta.flags & 0x1 != 0 {
        return Err(ApkError::UnsupportedCompression {
            path: path.to_string(),
            method: meta.method,
        });
    }
    if meta.method != METHOD_STORED && meta.method != METHOD_DEFLATE {
        return Err(ApkError::UnsupportedCompression {
            path: path.to_string(),
            method: meta.method,
        });
    }
    let local = source.read_at(meta.local_header_offset, 30)?;
    if u32_at(&local, 0) != LOCAL_SIG {
        return Err(ApkError::CorruptEntry {
            path: path.to_string(),
            reason: "bad local header signature".into(),
        });
    }
    let name_len = u16_at(&local, 26) as u64;
    let extra_len = u16_at(&local, 28) as u64;
    let data_start = meta.local_header_offset + 30 + name_len + extra_len;
    let raw = source.read_at(data_start, meta.compressed_size as usize)?;

    let data = match meta.method {
        METHOD_STORED => raw,
        _ => {
            let mut out = Vec::with_capacity(meta.uncompressed_size as usize);
            DeflateDecoder::new(raw.as_slice())
                .take(meta.uncompressed_size + 1)
                .read_to_end(&mut out)
                .map_err(|e| ApkError::CorruptEntry {
                    path: path.to_string(),
                    reason: format!("inflate: {e}"),
                })?;
            out
        }
    };
    if data.len() as u64 != meta.uncompressed_size {
        return Err(ApkError::CorruptEntry {
            path: path.to_string(),
            reason: format!("size {} != {}", data.len(), meta.uncompressed_size),
        });
    }
    let mut crc = flate2::Crc::new();
    crc.update(&data);
    if crc.sum() != meta.crc32 {
        return Err(ApkError::CorruptEntry {
            path: path.to_string(),
            reason: "crc mismatch".into(),
        });
    }
    Ok(data)
}

pub(crate) fn file_source(path: &Path) -> Result<Source, ApkError> {
    File::open(path)?;
    Ok(Source::File(path.to_path_buf()))
}
