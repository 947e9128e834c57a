//! Reference encoders for building vraudit test fixtures.
//!
//! Every writer here is deliberately independent of the readers in
//! `vraudit-core`: the zip writer is backed by the `zip` crate and the binary
//! formats are emitted from their published layouts. Tests build an input with
//! one of these writers, parse it with the core crate and compare against the
//! logical document the writer was given.

pub mod axml;
pub mod corpus;
pub mod dotnet;
pub mod elf;
pub mod il2cpp;
pub mod pak;
pub mod zipw;

pub(crate) fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_i32(out: &mut Vec<u8>, v: i32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_i64(out: &mut Vec<u8>, v: i64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn pad_to(out: &mut Vec<u8>, align: usize) {
    while !out.len().is_multiple_of(align) {
        out.push(0);
    }
}
