//! Writer for the pinned global-metadata.dat layout read by vraudit.
//!
//! Header (little endian, 32 bytes):
//!
//! | off | field            |
//! |-----|------------------|
//! | 0   | sanity 0xFAB11BAF|
//! | 4   | version (i32)    |
//! | 8   | strings offset   |
//! | 12  | strings size     |
//! | 16  | methods offset   |
//! | 20  | methods size     |
//! | 24  | type defs offset |
//! | 28  | type defs size   |
//!
//! Method record (20 bytes): name index, declaring type (i32, -1 = none),
//! code offset, token, flags (u16), parameter count (u16).
//! Type record (8 bytes): name index, namespace index.

use crate::{pad_to, put_i32, put_u16, put_u32};

pub const SANITY: u32 = 0xFAB1_1BAF;

#[derive(Debug, Clone)]
pub struct TypeDef {
    pub namespace: String,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct MethodDef {
    pub name: String,
    pub declaring_type: Option<usize>,
    pub code_offset: u32,
}

#[derive(Debug, Clone)]
pub struct Metadata {
    pub version: i32,
    pub types: Vec<TypeDef>,
    pub methods: Vec<MethodDef>,
    /// Extra strings placed in the string section without being referenced.
    pub loose_strings: Vec<String>,
}

impl Metadata {
    pub fn new(version: i32) -> Self {
        Metadata {
            version,
            types: Vec::new(),
            methods: Vec::new(),
            loose_strings: Vec::new(),
        }
    }

    pub fn add_type(&mut self, namespace: &str, name: &str) -> usize {
        self.types.push(TypeDef {
            namespace: namespace.to_string(),
            name: name.to_string(),
        });
        self.types.len() - 1
    }

    pub fn add_method(&mut self, declaring_type: Option<usize>, name: &str, code_offset: u32) {
        self.methods.push(MethodDef {
            name: name.to_string(),
            declaring_type,
            code_offset,
        });
    }

    /// The qualified names a reader should recover, with their offsets.
    pub fn expected(&self) -> Vec<(String, u32)> {
        self.methods
            .iter()
            .map(|m| {
                let name = match m.declaring_type {
                    Some(t) => {
                        let t = &self.types[t];
                        if t.namespace.is_empty() {
                            format!("{}::{}", t.name, m.name)
                        } else {
                            format!("{}.{}::{}", t.namespace, t.name, m.name)
                        }
                    }
                    None => m.name.clone(),
                };
                (name, m.code_offset)
            })
            .collect()
    }

    pub fn build(&self) -> Vec<u8> {
        let mut strings = Vec::new();
        let mut intern = |s: &str| -> u32 {
            let at = strings.len() as u32;
            strings.extend_from_slice(s.as_bytes());
            strings.push(0);
            at
        };
        let type_idx: Vec<(u32, u32)> = self
            .types
            .iter()
            .map(|t| (intern(&t.name), intern(&t.namespace)))
            .collect();
        let method_idx: Vec<u32> = self.methods.iter().map(|m| intern(&m.name)).collect();
        for s in &self.loose_strings {
            intern(s);
        }
        pad_to(&mut strings, 4);

        let mut types = Vec::new();
        for (n, ns) in &type_idx {
            put_u32(&mut types, *n);
            put_u32(&mut types, *ns);
        }
        let mut methods = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            put_u32(&mut methods, method_idx[i]);
            put_i32(&mut methods, m.declaring_type.map(|t| t as i32).unwrap_or(-1));
            put_u32(&mut methods, m.code_offset);
            put_u32(&mut methods, 0x0600_0001 + i as u32);
            put_u16(&mut methods, 0x0086);
            put_u16(&mut methods, 0);
        }

        let strings_off = 32u32;
        let methods_off = strings_off + strings.len() as u32;
        let types_off = methods_off + methods.len() as u32;
        let mut out = Vec::new();
        put_u32(&mut out, SANITY);
        put_i32(&mut out, self.version);
        put_u32(&mut out, strings_off);
        put_u32(&mut out, strings.len() as u32);
        put_u32(&mut out, methods_off);
        put_u32(&mut out, methods.len() as u32);
        put_u32(&mut out, types_off);
        put_u32(&mut out, types.len() as u32);
        out.extend_from_slice(&strings);
        out.extend_from_slice(&methods);
        out.extend_from_slice(&types);
        out
    }
}
