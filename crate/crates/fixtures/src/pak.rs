//! Unreal `.pak` writer for uncompressed, unencrypted archives (versions 3-7).
//!
//! Each entry's data is preceded by a serialized entry header (offset field
//! zero) exactly as UnrealPak lays files out; the index at the end carries the
//! real offsets and is located through the trailing footer.

use crate::{put_i32, put_i64, put_u32};

pub const PAK_MAGIC: u32 = 0x5A6F_12E1;

#[derive(Debug, Clone)]
pub struct PakWriter {
    pub version: i32,
    pub mount_point: String,
    pub entries: Vec<(String, Vec<u8>)>,
    pub encrypted_index: bool,
    /// Force a compression method id on every index entry.
    pub compression_method: i32,
}

/// An index entry as written: (path, offset of the entry header, data size).
pub type WrittenEntry = (String, u64, u64);

pub fn put_fstring(out: &mut Vec<u8>, s: &str) {
    if s.is_empty() {
        put_i32(out, 0);
        return;
    }
    if s.is_ascii() {
        put_i32(out, s.len() as i32 + 1);
        out.extend_from_slice(s.as_bytes());
        out.push(0);
    } else {
        let units: Vec<u16> = s.encode_utf16().collect();
        put_i32(out, -(units.len() as i32 + 1));
        for u in units {
            out.extend_from_slice(&u.to_le_bytes());
        }
        out.extend_from_slice(&[0, 0]);
    }
}

impl PakWriter {
    pub fn new(version: i32) -> Self {
        PakWriter {
            version,
            mount_point: "../../../".to_string(),
            entries: Vec::new(),
            encrypted_index: false,
            compression_method: 0,
        }
    }

    pub fn add(mut self, path: &str, data: &[u8]) -> Self {
        self.entries.push((path.to_string(), data.to_vec()));
        self
    }

    fn entry_record(&self, out: &mut Vec<u8>, offset: u64, size: u64) {
        put_i64(out, offset as i64);
        put_i64(out, size as i64);
        put_i64(out, size as i64);
        put_i32(out, self.compression_method);
        out.extend_from_slice(&[0; 20]);
        if self.compression_method != 0 {
            put_u32(out, 1);
            put_i64(out, 0);
            put_i64(out, size as i64);
        }
        out.push(0);
        put_u32(out, 0);
    }

    /// Returns the pak bytes and the entry table as written.
    pub fn build_with_listing(&self) -> (Vec<u8>, Vec<WrittenEntry>) {
        let mut out = Vec::new();
        let mut listing = Vec::new();
        for (path, data) in &self.entries {
            let offset = out.len() as u64;
            self.entry_record(&mut out, 0, data.len() as u64);
            out.extend_from_slice(data);
            listing.push((path.clone(), offset, data.len() as u64));
        }
        let index_offset = out.len() as u64;
        let mut index = Vec::new();
        put_fstring(&mut index, &self.mount_point);
        put_i32(&mut index, listing.len() as i32);
        for (path, offset, size) in &listing {
            put_fstring(&mut index, path);
            self.entry_record(&mut index, *offset, *size);
        }
        out.extend_from_slice(&index);
        if self.version >= 7 {
            out.extend_from_slice(&[0; 16]);
        }
        if self.version >= 4 {
            out.push(self.encrypted_index as u8);
        }
        put_u32(&mut out, PAK_MAGIC);
        put_i32(&mut out, self.version);
        put_i64(&mut out, index_offset as i64);
        put_i64(&mut out, index.len() as i64);
        out.extend_from_slice(&[0; 20]);
        (out, listing)
    }

    pub fn build(&self) -> Vec<u8> {
        self.build_with_listing().0
    }
}
