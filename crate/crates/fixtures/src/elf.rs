//! Minimal ELF64 / AArch64 shared-object writer and A64 instruction helpers.

use crate::{pad_to, put_u16, put_u32, put_u64};

pub const NOP: u32 = 0xD503_201F;
pub const RET: u32 = 0xD65F_03C0;

/// Encodes `BL target` placed at `pc`. Panics if the displacement does not fit.
pub fn bl(pc: u64, target: u64) -> u32 {
    let delta = target as i64 - pc as i64;
    assert!(delta % 4 == 0, "unaligned branch");
    let imm = delta / 4;
    assert!((-(1 << 25)..(1 << 25)).contains(&imm), "branch out of range");
    0x9400_0000 | ((imm as u32) & 0x03FF_FFFF)
}

/// Encodes an unconditional `B target` (not a call).
pub fn b(pc: u64, target: u64) -> u32 {
    let imm = (target as i64 - pc as i64) / 4;
    0x1400_0000 | ((imm as u32) & 0x03FF_FFFF)
}

#[derive(Debug, Clone)]
pub struct ElfSpec {
    pub text_addr: u64,
    pub text: Vec<u8>,
    /// 1 = ELFCLASS32, 2 = ELFCLASS64
    pub class: u8,
    /// 1 = little endian, 2 = big endian
    pub data: u8,
    pub include_text: bool,
}

impl ElfSpec {
    pub fn aarch64(text_addr: u64, words: &[u32]) -> Self {
        let mut text = Vec::with_capacity(words.len() * 4);
        for w in words {
            text.extend_from_slice(&w.to_le_bytes());
        }
        ElfSpec {
            text_addr,
            text,
            class: 2,
            data: 1,
            include_text: true,
        }
    }

    /// A `.text` of `len` bytes of zero at `text_addr`, into which individual
    /// words can be written with [`ElfSpec::set_word`].
    pub fn zeroed(text_addr: u64, len: usize) -> Self {
        ElfSpec {
            text_addr,
            text: vec![0; len],
            class: 2,
            data: 1,
            include_text: true,
        }
    }

    pub fn set_word(&mut self, addr: u64, word: u32) {
        let off = (addr - self.text_addr) as usize;
        self.text[off..off + 4].copy_from_slice(&word.to_le_bytes());
    }

    pub fn build(&self) -> Vec<u8> {
        let mut shstrtab = vec![0u8];
        let text_name = shstrtab.len() as u32;
        shstrtab.extend_from_slice(b".text\0");
        let shstr_name = shstrtab.len() as u32;
        shstrtab.extend_from_slice(b".shstrtab\0");
        let other_name = shstrtab.len() as u32;
        shstrtab.extend_from_slice(b".rodata\0");

        let mut out = Vec::new();
        out.extend_from_slice(&[0x7F, b'E', b'L', b'F', self.class, self.data, 1, 0]);
        out.extend_from_slice(&[0; 8]);
        put_u16(&mut out, 3); // ET_DYN
        put_u16(&mut out, 183); // EM_AARCH64
        put_u32(&mut out, 1);
        put_u64(&mut out, 0); // entry
        put_u64(&mut out, 0); // phoff
        let shoff_pos = out.len();
        put_u64(&mut out, 0); // shoff placeholder
        put_u32(&mut out, 0);
        put_u16(&mut out, 64);
        put_u16(&mut out, 56);
        put_u16(&mut out, 0);
        put_u16(&mut out, 64);
        put_u16(&mut out, 3);
        put_u16(&mut out, 2);
        pad_to(&mut out, 16);

        let text_off = out.len() as u64;
        out.extend_from_slice(&self.text);
        pad_to(&mut out, 8);
        let shstr_off = out.len() as u64;
        out.extend_from_slice(&shstrtab);
        pad_to(&mut out, 8);
        let shoff = out.len() as u64;
        out[shoff_pos..shoff_pos + 8].copy_from_slice(&shoff.to_le_bytes());

        // null section
        out.extend_from_slice(&[0; 64]);
        let (name, ty, flags) = if self.include_text {
            (text_name, 1u32, 6u64)
        } else {
            (other_name, 1u32, 2u64)
        };
        section_header(&mut out, name, ty, flags, self.text_addr, text_off, self.text.len() as u64, 4);
        section_header(&mut out, shstr_name, 3, 0, 0, shstr_off, shstrtab.len() as u64, 1);
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn section_header(
    out: &mut Vec<u8>,
    name: u32,
    ty: u32,
    flags: u64,
    addr: u64,
    offset: u64,
    size: u64,
    align: u64,
) {
    put_u32(out, name);
    put_u32(out, ty);
    put_u64(out, flags);
    put_u64(out, addr);
    put_u64(out, offset);
    put_u64(out, size);
    put_u32(out, 0);
    put_u32(out, 0);
    put_u64(out, align);
    put_u64(out, 0);
}
