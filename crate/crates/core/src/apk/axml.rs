//! Android binary XML decoder.
//!
//! Handles the string pool (UTF-8 and UTF-16), the resource map, namespace
//! chunks and start/end elements. Attribute values are kept only when they are
//! strings; typed values (ints, booleans, references) decode to `None`.

use super::manifest::{XmlAttr, XmlElement};
use super::ManifestError;

pub const RES_XML_TYPE: u16 = 0x0003;
pub const RES_STRING_POOL_TYPE: u16 = 0x0001;
pub const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;
pub const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
pub const RES_XML_END_NAMESPACE_TYPE: u16 = 0x0101;
pub const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
pub const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;

const UTF8_FLAG: u32 = 0x100;
const NO_ENTRY: u32 = 0xFFFF_FFFF;
const TYPE_STRING: u8 = 0x03;

/// `android:name`; aapt2 may strip attribute names that have resource ids.
const ATTR_NAME_ID: u32 = 0x0101_0003;

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn u16(&self, at: usize) -> Result<u16, ManifestError> {
        self.data
            .get(at..at + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .ok_or_else(|| malformed(format!("read past end at {at:#x}")))
    }

    fn u32(&self, at: usize) -> Result<u32, ManifestError> {
        self.data
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| malformed(format!("read past end at {at:#x}")))
    }

    fn u8(&self, at: usize) -> Result<u8, ManifestError> {
        self.data
            .get(at)
            .copied()
            .ok_or_else(|| malformed(format!("read past end at {at:#x}")))
    }
}

fn malformed(msg: impl Into<String>) -> ManifestError {
    ManifestError::MalformedXml(msg.into())
}

/// Cheap sniff: does `data` start with a binary XML document header?
pub fn is_binary_xml(data: &[u8]) -> bool {
    data.len() >= 8 && u16::from_le_bytes([data[0], data[1]]) == RES_XML_TYPE
}

#[derive(Debug, Default)]
struct StringPool {
    strings: Vec<String>,
}

impl StringPool {
    fn get(&self, idx: u32) -> Result<&str, ManifestError> {
        self.strings
            .get(idx as usize)
            .map(String::as_str)
            .ok_or_else(|| malformed(format!("string index {idx} out of range")))
    }

    fn get_opt(&self, idx: u32) -> Result<Option<&str>, ManifestError> {
        if idx == NO_ENTRY {
            Ok(None)
        } else {
            self.get(idx).map(Some)
        }
    }
}

fn utf8_len(r: &Reader<'_>, at: usize) -> Result<(usize, usize), ManifestError> {
    let b0 = r.u8(at)? as usize;
    if b0 & 0x80 != 0 {
        let b1 = r.u8(at + 1)? as usize;
        Ok((((b0 & 0x7F) << 8) | b1, 2))
    } else {
        Ok((b0, 1))
    }
}

fn utf16_len(r: &Reader<'_>, at: usize) -> Result<(usize, usize), ManifestError> {
    let w0 = r.u16(at)? as usize;
    if w0 & 0x8000 != 0 {
        let w1 = r.u16(at + 2)? as usize;
        Ok((((w0 & 0x7FFF) << 16) | w1, 4))
    } else {
        Ok((w0, 2))
    }
}

fn parse_string_pool(r: &Reader<'_>, chunk: usize, header_size: usize, size: usize) -> Result<StringPool, ManifestError> {
    if header_size != 0x1C {
        return Err(ManifestError::UnsupportedChunkVersion {
            chunk_type: RES_STRING_POOL_TYPE,
            header_size: header_size as u16,
        });
    }
    let count = r.u32(chunk + 8)? as usize;
    let flags = r.u32(chunk + 16)?;
    let strings_start = r.u32(chunk + 20)? as usize;
    let utf8 = flags & UTF8_FLAG != 0;
    if count > size / 4 {
        return Err(malformed("string count exceeds chunk size"));
    }
    let base = chunk + strings_start;
    let end = chunk + size;
    let mut strings = Vec::with_capacity(count);
    for i in 0..count {
        let off = r.u32(chunk + header_size + 4 * i)? as usize;
        let at = base + off;
        if at >= end {
            return Err(malformed(format!("string {i} starts outside pool")));
        }
        let s = if utf8 {
            let (_, n1) = utf8_len(r, at)?;
            let (bytes, n2) = utf8_len(r, at + n1)?;
            let start = at + n1 + n2;
            let raw = r
                .data
                .get(start..start + bytes)
                .filter(|_| start + bytes <= end)
                .ok_or_else(|| malformed(format!("string {i} overruns pool")))?;
            String::from_utf8_lossy(raw).into_owned()
        } else {
            let (units, n) = utf16_len(r, at)?;
            let start = at + n;
            if start + units * 2 > end {
                return Err(malformed(format!("string {i} overruns pool")));
            }
            let chars: Vec<u16> = (0..units)
                .map(|k| r.u16(start + 2 * k))
                .collect::<Result<_, _>>()?;
            String::from_utf16_lossy(&chars)
        };
        strings.push(s);
    }
    Ok(StringPool { strings })
}

/// Decodes a binary XML document into its root element.
pub fn decode(data: &[u8]) -> Result<XmlElement, ManifestError> {
    let r = Reader { data };
    if !is_binary_xml(data) {
        return Err(malformed("missing binary XML header"));
    }
    let header_size = r.u16(2)?;
    if header_size != 8 {
        return Err(ManifestError::UnsupportedChunkVersion {
            chunk_type: RES_XML_TYPE,
            header_size,
        });
    }
    let doc_size = (r.u32(4)? as usize).min(data.len());

    let mut pool: Option<StringPool> = None;
    let mut resource_ids: Vec<u32> = Vec::new();
    // Stack of open elements; finished children are attached to their parent.
    let mut stack: Vec<XmlElement> = Vec::new();
    let mut root: Option<XmlElement> = None;

    let mut pos = 8usize;
    while pos + 8 <= doc_size {
        let ty = r.u16(pos)?;
        let hsize = r.u16(pos + 2)? as usize;
        let size = r.u32(pos + 4)? as usize;
        if hsize < 8 || size < hsize || pos + size > doc_size {
            return Err(malformed(format!("bad chunk header at {pos:#x}")));
        }
        match ty {
            RES_STRING_POOL_TYPE => {
                pool = Some(parse_string_pool(&r, pos, hsize, size)?);
            }
            RES_XML_RESOURCE_MAP_TYPE => {
                resource_ids = (0..(size - hsize) / 4)
                    .map(|i| r.u32(pos + hsize + 4 * i))
                    .collect::<Result<_, _>>()?;
            }
            RES_XML_START_NAMESPACE_TYPE | RES_XML_END_NAMESPACE_TYPE => {}
            RES_XML_START_ELEMENT_TYPE => {
                if hsize != 0x10 {
                    return Err(ManifestError::UnsupportedChunkVersion {
                        chunk_type: ty,
                        header_size: hsize as u16,
                    });
                }
                let pool = pool.as_ref().ok_or_else(|| malformed("element before string pool"))?;
                let ext = pos + hsize;
                let name = pool.get(r.u32(ext + 4)?)?.to_string();
                let attr_start = r.u16(ext + 8)? as usize;
                let attr_size = r.u16(ext + 10)? as usize;
                let attr_count = r.u16(ext + 12)? as usize;
                if attr_size < 20 {
                    return Err(malformed("attribute record too small"));
                }
                let mut attrs = Vec::with_capacity(attr_count);
                for i in 0..attr_count {
                    let a = ext + attr_start + i * attr_size;
                    if a + 20 > pos + size {
                        return Err(malformed("attribute overruns element chunk"));
                    }
                    let ns = pool.get_opt(r.u32(a)?)?.map(str::to_string);
                    let name_idx = r.u32(a + 4)?;
                    let mut attr_name = pool.get(name_idx)?.to_string();
                    if attr_name.is_empty() && resource_ids.get(name_idx as usize) == Some(&ATTR_NAME_ID) {
                        attr_name = "name".to_string();
                    }
                    let raw = r.u32(a + 8)?;
                    let data_type = r.u8(a + 15)?;
                    let value_data = r.u32(a + 16)?;
                    let value = if raw != NO_ENTRY {
                        Some(pool.get(raw)?.to_string())
                    } else if data_type == TYPE_STRING {
                        Some(pool.get(value_data)?.to_string())
                    } else {
                        None
                    };
                    attrs.push(XmlAttr {
                        namespace: ns,
                        name: attr_name,
                        value,
                    });
                }
                stack.push(XmlElement {
                    name,
                    attrs,
                    children: Vec::new(),
                });
            }
            RES_XML_END_ELEMENT_TYPE => {
                let done = stack.pop().ok_or_else(|| malformed("unbalanced end element"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => {
                        if root.is_none() {
                            root = Some(done);
                        }
                    }
                }
            }
            // CDATA and anything unknown are skipped by size.
            _ => {}
        }
        pos += size;
    }
    if !stack.is_empty() {
        return Err(malformed("unterminated element"));
    }
    root.ok_or(ManifestError::MissingManifestElement)
}
