//! Android binary XML (AXML) writer plus a plain-text XML renderer for the
//! same logical document.

use std::collections::HashMap;

use crate::{pad_to, put_u16, put_u32};

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const RES_XML_TYPE: u16 = 0x0003;
const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;
const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
const RES_XML_END_NAMESPACE_TYPE: u16 = 0x0101;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;

const UTF8_FLAG: u32 = 0x100;
const NO_ENTRY: u32 = 0xFFFF_FFFF;

const TYPE_STRING: u8 = 0x03;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_BOOLEAN: u8 = 0x12;

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Str(String),
    Int(i32),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attr {
    /// `true` when the attribute lives in the android namespace.
    pub android: bool,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attr>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element {
            name: name.to_string(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, android: bool, name: &str, value: AttrValue) -> Self {
        self.attrs.push(Attr {
            android,
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn child(mut self, c: Element) -> Self {
        self.children.push(c);
        self
    }
}

/// A logical AndroidManifest document.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub package: String,
    pub permissions: Vec<String>,
    /// Extra non-permission children of `<manifest>` (features, application...).
    pub extra: Vec<Element>,
}

impl Manifest {
    pub fn new(package: &str, permissions: &[&str]) -> Self {
        Manifest {
            package: package.to_string(),
            permissions: permissions.iter().map(|s| s.to_string()).collect(),
            extra: Vec::new(),
        }
    }

    pub fn to_element(&self) -> Element {
        let mut root = Element::new("manifest")
            .attr(true, "versionCode", AttrValue::Int(42))
            .attr(false, "package", AttrValue::Str(self.package.clone()));
        for p in &self.permissions {
            root = root.child(
                Element::new("uses-permission").attr(true, "name", AttrValue::Str(p.clone())),
            );
        }
        for e in &self.extra {
            root = root.child(e.clone());
        }
        root
    }

    pub fn to_plain_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
        write_plain(&self.to_element(), 0, true, &mut out);
        out
    }

    pub fn to_axml(&self, utf8: bool) -> Vec<u8> {
        encode(&self.to_element(), utf8)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn write_plain(e: &Element, depth: usize, root: bool, out: &mut String) {
    let indent = "    ".repeat(depth);
    out.push_str(&indent);
    out.push('<');
    out.push_str(&e.name);
    if root {
        out.push_str(&format!(" xmlns:android=\"{ANDROID_NS}\""));
    }
    for a in &e.attrs {
        let v = match &a.value {
            AttrValue::Str(s) => xml_escape(s),
            AttrValue::Int(i) => i.to_string(),
            AttrValue::Bool(b) => b.to_string(),
        };
        let prefix = if a.android { "android:" } else { "" };
        out.push_str(&format!(" {prefix}{}=\"{v}\"", a.name));
    }
    if e.children.is_empty() {
        out.push_str(" />\n");
        return;
    }
    out.push_str(">\n");
    for c in &e.children {
        write_plain(c, depth + 1, false, out);
    }
    out.push_str(&indent);
    out.push_str(&format!("</{}>\n", e.name));
}

/// Android attribute resource ids for the names we emit.
fn resource_id(name: &str) -> Option<u32> {
    match name {
        "name" => Some(0x0101_0003),
        "versionCode" => Some(0x0101_021b),
        "required" => Some(0x0101_028e),
        "glEsVersion" => Some(0x0101_0281),
        _ => None,
    }
}

struct Pool {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl Pool {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

fn collect_attr_names(e: &Element, out: &mut Vec<String>) {
    for a in &e.attrs {
        if a.android && resource_id(&a.name).is_some() && !out.contains(&a.name) {
            out.push(a.name.clone());
        }
    }
    for c in &e.children {
        collect_attr_names(c, out);
    }
}

fn collect_strings(e: &Element, pool: &mut Pool) {
    pool.intern(&e.name);
    for a in &e.attrs {
        pool.intern(&a.name);
        if let AttrValue::Str(s) = &a.value {
            pool.intern(s);
        }
    }
    for c in &e.children {
        collect_strings(c, pool);
    }
}

fn encode_len_utf8(out: &mut Vec<u8>, n: usize) {
    if n > 0x7F {
        out.push((((n >> 8) & 0x7F) as u8) | 0x80);
        out.push((n & 0xFF) as u8);
    } else {
        out.push(n as u8);
    }
}

fn encode_len_utf16(out: &mut Vec<u8>, n: usize) {
    if n > 0x7FFF {
        put_u16(out, (((n >> 16) & 0x7FFF) as u16) | 0x8000);
        put_u16(out, (n & 0xFFFF) as u16);
    } else {
        put_u16(out, n as u16);
    }
}

fn string_pool_chunk(strings: &[String], utf8: bool) -> Vec<u8> {
    let mut data = Vec::new();
    let mut offsets = Vec::new();
    for s in strings {
        offsets.push(data.len() as u32);
        if utf8 {
            encode_len_utf8(&mut data, s.encode_utf16().count());
            encode_len_utf8(&mut data, s.len());
            data.extend_from_slice(s.as_bytes());
            data.push(0);
        } else {
            let units: Vec<u16> = s.encode_utf16().collect();
            encode_len_utf16(&mut data, units.len());
            for u in units {
                put_u16(&mut data, u);
            }
            put_u16(&mut data, 0);
        }
    }
    pad_to(&mut data, 4);
    let header_size = 0x1C_u32;
    let strings_start = header_size + 4 * strings.len() as u32;
    let size = strings_start + data.len() as u32;
    let mut out = Vec::new();
    put_u16(&mut out, RES_STRING_POOL_TYPE);
    put_u16(&mut out, header_size as u16);
    put_u32(&mut out, size);
    put_u32(&mut out, strings.len() as u32);
    put_u32(&mut out, 0); // style count
    put_u32(&mut out, if utf8 { UTF8_FLAG } else { 0 });
    put_u32(&mut out, strings_start);
    put_u32(&mut out, 0); // styles start
    for o in offsets {
        put_u32(&mut out, o);
    }
    out.extend_from_slice(&data);
    out
}

fn node_header(out: &mut Vec<u8>, ty: u16, size: u32, line: u32) {
    put_u16(out, ty);
    put_u16(out, 0x10);
    put_u32(out, size);
    put_u32(out, line);
    put_u32(out, NO_ENTRY);
}

struct Ctx<'a> {
    pool: &'a mut Pool,
    ns_uri: u32,
    line: u32,
}

fn encode_element(e: &Element, ctx: &mut Ctx<'_>, out: &mut Vec<u8>) {
    ctx.line += 1;
    let name = ctx.pool.intern(&e.name);
    let size = 0x10 + 0x14 + 0x14 * e.attrs.len() as u32;
    node_header(out, RES_XML_START_ELEMENT_TYPE, size, ctx.line);
    put_u32(out, NO_ENTRY);
    put_u32(out, name);
    put_u16(out, 0x14);
    put_u16(out, 0x14);
    put_u16(out, e.attrs.len() as u16);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    for a in &e.attrs {
        put_u32(out, if a.android { ctx.ns_uri } else { NO_ENTRY });
        put_u32(out, ctx.pool.intern(&a.name));
        match &a.value {
            AttrValue::Str(s) => {
                let idx = ctx.pool.intern(s);
                put_u32(out, idx);
                put_u16(out, 8);
                out.push(0);
                out.push(TYPE_STRING);
                put_u32(out, idx);
            }
            AttrValue::Int(i) => {
                put_u32(out, NO_ENTRY);
                put_u16(out, 8);
                out.push(0);
                out.push(TYPE_INT_DEC);
                put_u32(out, *i as u32);
            }
            AttrValue::Bool(b) => {
                put_u32(out, NO_ENTRY);
                put_u16(out, 8);
                out.push(0);
                out.push(TYPE_INT_BOOLEAN);
                put_u32(out, if *b { 0xFFFF_FFFF } else { 0 });
            }
        }
    }
    for c in &e.children {
        encode_element(c, ctx, out);
    }
    ctx.line += 1;
    node_header(out, RES_XML_END_ELEMENT_TYPE, 0x18, ctx.line);
    put_u32(out, NO_ENTRY);
    put_u32(out, name);
}

/// Encodes `root` as a binary XML document with the android namespace bound
/// to the `android` prefix.
pub fn encode(root: &Element, utf8: bool) -> Vec<u8> {
    // Attribute names with resource ids occupy the first pool slots so that
    // the resource map lines up, as aapt does.
    let mut pool = Pool {
        strings: Vec::new(),
        index: HashMap::new(),
    };
    let mut mapped = Vec::new();
    collect_attr_names(root, &mut mapped);
    for n in &mapped {
        pool.intern(n);
    }
    let prefix = pool.intern("android");
    let uri = pool.intern(ANDROID_NS);
    collect_strings(root, &mut pool);

    let mut body = Vec::new();
    // resource map
    put_u16(&mut body, RES_XML_RESOURCE_MAP_TYPE);
    put_u16(&mut body, 8);
    put_u32(&mut body, 8 + 4 * mapped.len() as u32);
    for n in &mapped {
        put_u32(&mut body, resource_id(n).unwrap());
    }
    node_header(&mut body, RES_XML_START_NAMESPACE_TYPE, 0x18, 1);
    put_u32(&mut body, prefix);
    put_u32(&mut body, uri);
    let mut ctx = Ctx {
        pool: &mut pool,
        ns_uri: uri,
        line: 1,
    };
    encode_element(root, &mut ctx, &mut body);
    let line = ctx.line + 1;
    node_header(&mut body, RES_XML_END_NAMESPACE_TYPE, 0x18, line);
    put_u32(&mut body, prefix);
    put_u32(&mut body, uri);

    let pool_chunk = string_pool_chunk(&pool.strings, utf8);
    let mut out = Vec::new();
    put_u16(&mut out, RES_XML_TYPE);
    put_u16(&mut out, 8);
    put_u32(&mut out, (8 + pool_chunk.len() + body.len()) as u32);
    out.extend_from_slice(&pool_chunk);
    out.extend_from_slice(&body);
    out
}
