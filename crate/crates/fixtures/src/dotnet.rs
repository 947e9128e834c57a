//! Minimal PE32 + ECMA-335 metadata emitter.
//!
//! Emits Module, TypeRef, TypeDef, MethodDef, MemberRef and AssemblyRef tables
//! with `#~`, `#Strings`, `#GUID` and `#Blob` heaps. [`Assembly::listing`]
//! returns the names a metadata reader should recover.

use crate::{pad_to, put_u16, put_u32, put_u64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    TypeRef(usize),
    TypeDef(usize),
}

#[derive(Debug, Clone)]
pub struct TypeDefSpec {
    pub namespace: String,
    pub name: String,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub type_refs: Vec<(String, String)>,
    pub type_defs: Vec<TypeDefSpec>,
    pub member_refs: Vec<(Parent, String)>,
    /// Extra bytes appended to `#Strings` (forces 4-byte string indices when
    /// the heap grows past 64 KiB).
    pub pad_strings: usize,
    pub include_cli_header: bool,
}

impl Default for Assembly {
    fn default() -> Self {
        Assembly {
            type_refs: Vec::new(),
            type_defs: vec![TypeDefSpec {
                namespace: String::new(),
                name: "<Module>".to_string(),
                methods: Vec::new(),
            }],
            member_refs: Vec::new(),
            pad_strings: 0,
            include_cli_header: true,
        }
    }
}

fn qualify(ns: &str, name: &str) -> String {
    if ns.is_empty() {
        name.to_string()
    } else {
        format!("{ns}.{name}")
    }
}

impl Assembly {
    pub fn type_ref(&mut self, ns: &str, name: &str) -> usize {
        self.type_refs.push((ns.to_string(), name.to_string()));
        self.type_refs.len() - 1
    }

    pub fn type_def(&mut self, ns: &str, name: &str, methods: &[&str]) -> usize {
        self.type_defs.push(TypeDefSpec {
            namespace: ns.to_string(),
            name: name.to_string(),
            methods: methods.iter().map(|m| m.to_string()).collect(),
        });
        self.type_defs.len() - 1
    }

    pub fn member_ref(&mut self, parent: Parent, name: &str) {
        self.member_refs.push((parent, name.to_string()));
    }

    /// Names in the `Namespace.Type` / `Namespace.Type::Member` form.
    pub fn listing(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (ns, n) in &self.type_refs {
            out.push(qualify(ns, n));
        }
        for t in &self.type_defs {
            let q = qualify(&t.namespace, &t.name);
            for m in &t.methods {
                out.push(format!("{q}::{m}"));
            }
            out.push(q);
        }
        for (p, m) in &self.member_refs {
            let q = match p {
                Parent::TypeRef(i) => qualify(&self.type_refs[*i].0, &self.type_refs[*i].1),
                Parent::TypeDef(i) => {
                    qualify(&self.type_defs[*i].namespace, &self.type_defs[*i].name)
                }
            };
            out.push(format!("{q}::{m}"));
        }
        out.sort();
        out.dedup();
        out
    }

    fn metadata(&self) -> Vec<u8> {
        let mut strings = vec![0u8];
        let mut intern = |s: &str| -> u32 {
            if s.is_empty() {
                return 0;
            }
            let at = strings.len() as u32;
            strings.extend_from_slice(s.as_bytes());
            strings.push(0);
            at
        };
        let module_name = intern("Fixture.dll");
        let asm_ref_name = intern("mscorlib");
        let trefs: Vec<(u32, u32)> = self
            .type_refs
            .iter()
            .map(|(ns, n)| (intern(n), intern(ns)))
            .collect();
        let tdefs: Vec<(u32, u32, Vec<u32>)> = self
            .type_defs
            .iter()
            .map(|t| {
                let n = intern(&t.name);
                let ns = intern(&t.namespace);
                let ms = t.methods.iter().map(|m| intern(m)).collect();
                (n, ns, ms)
            })
            .collect();
        let mrefs: Vec<u32> = self.member_refs.iter().map(|(_, m)| intern(m)).collect();
        strings.extend(std::iter::repeat_n(0u8, self.pad_strings));
        pad_to(&mut strings, 4);
        let wide_strings = strings.len() > 0xFFFF;

        let guid = [0x11u8; 16];
        let mut blob = vec![0u8, 3, 0x20, 0, 0x01];
        pad_to(&mut blob, 4);

        let put_str = |out: &mut Vec<u8>, idx: u32| {
            if wide_strings {
                put_u32(out, idx);
            } else {
                put_u16(out, idx as u16);
            }
        };

        let method_count: usize = tdefs.iter().map(|t| t.2.len()).sum();
        let mut tables = Vec::new();
        // Module
        put_u16(&mut tables, 0);
        put_str(&mut tables, module_name);
        put_u16(&mut tables, 1);
        put_u16(&mut tables, 0);
        put_u16(&mut tables, 0);
        // TypeRef: ResolutionScope -> AssemblyRef 1 (tag 2)
        for (n, ns) in &trefs {
            put_u16(&mut tables, (1 << 2) | 2);
            put_str(&mut tables, *n);
            put_str(&mut tables, *ns);
        }
        // TypeDef
        let mut next_method = 1u16;
        for (n, ns, ms) in &tdefs {
            put_u32(&mut tables, 0x0010_0001);
            put_str(&mut tables, *n);
            put_str(&mut tables, *ns);
            put_u16(&mut tables, 0);
            put_u16(&mut tables, 1);
            put_u16(&mut tables, next_method);
            next_method += ms.len() as u16;
        }
        // MethodDef
        for (_, _, ms) in &tdefs {
            for m in ms {
                put_u32(&mut tables, 0);
                put_u16(&mut tables, 0);
                put_u16(&mut tables, 0x0086);
                put_str(&mut tables, *m);
                put_u16(&mut tables, 1);
                put_u16(&mut tables, 1);
            }
        }
        // MemberRef: MemberRefParent, 3-bit tag
        for (i, (p, _)) in self.member_refs.iter().enumerate() {
            let coded = match p {
                Parent::TypeDef(t) => (*t as u16 + 1) << 3,
                Parent::TypeRef(t) => ((*t as u16 + 1) << 3) | 1,
            };
            put_u16(&mut tables, coded);
            put_str(&mut tables, mrefs[i]);
            put_u16(&mut tables, 1);
        }
        // AssemblyRef
        put_u16(&mut tables, 4);
        put_u16(&mut tables, 0);
        put_u16(&mut tables, 0);
        put_u16(&mut tables, 0);
        put_u32(&mut tables, 0);
        put_u16(&mut tables, 0);
        put_str(&mut tables, asm_ref_name);
        put_str(&mut tables, 0);
        put_u16(&mut tables, 0);

        let mut present: Vec<(u32, u32)> = vec![(0x00, 1)];
        if !trefs.is_empty() {
            present.push((0x01, trefs.len() as u32));
        }
        present.push((0x02, tdefs.len() as u32));
        if method_count > 0 {
            present.push((0x06, method_count as u32));
        }
        if !mrefs.is_empty() {
            present.push((0x0A, mrefs.len() as u32));
        }
        present.push((0x23, 1));

        let mut tilde = Vec::new();
        put_u32(&mut tilde, 0);
        tilde.push(2);
        tilde.push(0);
        tilde.push(if wide_strings { 0x01 } else { 0 });
        tilde.push(1);
        let valid: u64 = present.iter().fold(0, |acc, (t, _)| acc | (1u64 << t));
        put_u64(&mut tilde, valid);
        put_u64(&mut tilde, 0);
        for (_, rows) in &present {
            put_u32(&mut tilde, *rows);
        }
        tilde.extend_from_slice(&tables);
        pad_to(&mut tilde, 4);

        let version = b"v4.0.30319\0\0";
        let streams: [(&[u8], &[u8]); 4] = [
            (b"#~\0\0", &tilde),
            (b"#Strings\0\0\0\0", &strings),
            (b"#GUID\0\0\0", &guid),
            (b"#Blob\0\0\0", &blob),
        ];
        let header_len = 16 + version.len() + 4 + streams.iter().map(|(n, _)| 8 + n.len()).sum::<usize>();
        let mut root = Vec::new();
        put_u32(&mut root, 0x424A_5342);
        put_u16(&mut root, 1);
        put_u16(&mut root, 1);
        put_u32(&mut root, 0);
        put_u32(&mut root, version.len() as u32);
        root.extend_from_slice(version);
        put_u16(&mut root, 0);
        put_u16(&mut root, streams.len() as u16);
        let mut offset = header_len as u32;
        for (name, data) in &streams {
            put_u32(&mut root, offset);
            put_u32(&mut root, data.len() as u32);
            root.extend_from_slice(name);
            offset += data.len() as u32;
        }
        assert_eq!(root.len(), header_len);
        for (_, data) in &streams {
            root.extend_from_slice(data);
        }
        root
    }

    pub fn build(&self) -> Vec<u8> {
        const SECTION_RVA: u32 = 0x2000;
        const SECTION_RAW: u32 = 0x200;

        let mut section = Vec::new();
        if self.include_cli_header {
            let metadata = self.metadata();
            let md_rva = SECTION_RVA + 72;
            put_u32(&mut section, 72);
            put_u16(&mut section, 2);
            put_u16(&mut section, 5);
            put_u32(&mut section, md_rva);
            put_u32(&mut section, metadata.len() as u32);
            put_u32(&mut section, 1);
            put_u32(&mut section, 0);
            section.extend_from_slice(&[0; 48]);
            section.extend_from_slice(&metadata);
        } else {
            section.extend_from_slice(&[0xC3; 16]);
        }
        let raw_size = (section.len() as u32).div_ceil(0x200) * 0x200;

        let mut out = vec![0u8; 0x80];
        out[0] = b'M';
        out[1] = b'Z';
        out[0x3C..0x40].copy_from_slice(&0x80u32.to_le_bytes());
        out.extend_from_slice(b"PE\0\0");
        put_u16(&mut out, 0x014C);
        put_u16(&mut out, 1);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0);
        put_u16(&mut out, 0xE0);
        put_u16(&mut out, 0x2102);
        // optional header, PE32
        put_u16(&mut out, 0x010B);
        out.push(8);
        out.push(0);
        put_u32(&mut out, raw_size);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0);
        put_u32(&mut out, SECTION_RVA);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0x0040_0000);
        put_u32(&mut out, 0x2000);
        put_u32(&mut out, 0x200);
        put_u16(&mut out, 4);
        put_u16(&mut out, 0);
        put_u16(&mut out, 0);
        put_u16(&mut out, 0);
        put_u16(&mut out, 4);
        put_u16(&mut out, 0);
        put_u32(&mut out, 0);
        put_u32(&mut out, SECTION_RVA + raw_size.div_ceil(0x2000) * 0x2000);
        put_u32(&mut out, SECTION_RAW);
        put_u32(&mut out, 0);
        put_u16(&mut out, 3);
        put_u16(&mut out, 0x8540);
        for v in [0x0010_0000u32, 0x1000, 0x0010_0000, 0x1000] {
            put_u32(&mut out, v);
        }
        put_u32(&mut out, 0);
        put_u32(&mut out, 16);
        for dir in 0..16 {
            if dir == 14 && self.include_cli_header {
                put_u32(&mut out, SECTION_RVA);
                put_u32(&mut out, 72);
            } else {
                put_u32(&mut out, 0);
                put_u32(&mut out, 0);
            }
        }
        out.extend_from_slice(b".text\0\0\0");
        put_u32(&mut out, section.len() as u32);
        put_u32(&mut out, SECTION_RVA);
        put_u32(&mut out, raw_size);
        put_u32(&mut out, SECTION_RAW);
        put_u32(&mut out, 0);
        put_u32(&mut out, 0);
        put_u16(&mut out, 0);
        put_u16(&mut out, 0);
        put_u32(&mut out, 0x6000_0020);
        out.resize(SECTION_RAW as usize, 0);
        out.extend_from_slice(&section);
        out.resize((SECTION_RAW + raw_size) as usize, 0);
        out
    }
}
