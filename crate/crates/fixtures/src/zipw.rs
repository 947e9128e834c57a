//! Zip archives via the `zip` crate.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stored,
    Deflated,
}

/// Builds an archive with the given entries, in order.
pub fn build_zip<P: AsRef<str>, D: AsRef<[u8]>>(entries: &[(P, D, Method)]) -> Vec<u8> {
    let mut w = ZipWriter::new(Cursor::new(Vec::new()));
    for (path, data, method) in entries {
        let method = match method {
            Method::Stored => CompressionMethod::Stored,
            Method::Deflated => CompressionMethod::Deflated,
        };
        let opts = SimpleFileOptions::default()
            .compression_method(method)
            .last_modified_time(DateTime::default())
            .large_file(false);
        w.start_file(path.as_ref(), opts).expect("start_file");
        w.write_all(data.as_ref()).expect("write entry");
    }
    w.finish().expect("finish zip").into_inner()
}

/// Convenience wrapper: every entry deflated.
pub fn build_deflated<P: AsRef<str>, D: AsRef<[u8]>>(entries: &[(P, D)]) -> Vec<u8> {
    let entries: Vec<(&str, &[u8], Method)> = entries
        .iter()
        .map(|(p, d)| (p.as_ref(), d.as_ref(), Method::Deflated))
        .collect();
    build_zip(&entries)
}

/// Lists (name, uncompressed bytes) using the `zip` crate reader.
pub fn read_all(data: &[u8]) -> Vec<(String, Vec<u8>)> {
    use std::io::Read;
    let mut archive = zip::ZipArchive::new(Cursor::new(data)).expect("open zip");
    let mut out = Vec::new();
    for i in 0..archive.len() {
        let mut f = archive.by_index(i).expect("entry");
        let mut buf = Vec::new();
        f.read_to_end(&mut buf).expect("read entry");
        out.push((f.name().to_string(), buf));
    }
    out
}

/// Rewrites the compression method of every entry (local and central headers)
/// of a stored-only archive. Used to fabricate unsupported-method inputs.
pub fn patch_method(mut data: Vec<u8>, method: u16) -> Vec<u8> {
    let mut i = 0;
    while i + 4 <= data.len() {
        match &data[i..i + 4] {
            [b'P', b'K', 3, 4] => {
                data[i + 8..i + 10].copy_from_slice(&method.to_le_bytes());
                i += 30;
            }
            [b'P', b'K', 1, 2] => {
                data[i + 10..i + 12].copy_from_slice(&method.to_le_bytes());
                i += 46;
            }
            _ => i += 1,
        }
    }
    data
}
