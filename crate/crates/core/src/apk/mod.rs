//! APK containers: listing, extraction, manifest parsing and engine detection.

mod axml;
mod manifest;
mod zip;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::axml::is_binary_xml;
pub use self::manifest::{parse_manifest, ManifestInfo, XmlAttr, XmlElement, ANDROID_NS};
pub use self::zip::EntryMeta;
use self::zip::Source;

#[derive(Debug, Error)]
pub enum ApkError {
    #[error("not a zip archive")]
    NotAZip,
    #[error("truncated archive")]
    TruncatedArchive,
    #[error("unsupported archive feature: {0}")]
    Unsupported(String),
    #[error("entry not found: {0}")]
    EntryNotFound(String),
    #[error("unsupported compression method {method} for {path}")]
    UnsupportedCompression { path: String, method: u16 },
    #[error("corrupt entry {path}: {reason}")]
    CorruptEntry { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ApkError {
    /// Stable short code used in structured error records.
    pub fn code(&self) -> &'static str {
        match self {
            ApkError::NotAZip => "NotAZip",
            ApkError::TruncatedArchive => "TruncatedArchive",
            ApkError::Unsupported(_) => "Unsupported",
            ApkError::EntryNotFound(_) => "EntryNotFound",
            ApkError::UnsupportedCompression { .. } => "UnsupportedCompression",
            ApkError::CorruptEntry { .. } => "CorruptEntry",
            ApkError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed xml: {0}")]
    MalformedXml(String),
    #[error("unsupported chunk header (type {chunk_type:#06x}, header size {header_size})")]
    UnsupportedChunkVersion { chunk_type: u16, header_size: u16 },
    #[error("document has no <manifest> root element")]
    MissingManifestElement,
}

/// An opened APK (or any zip). Entry bytes are read on demand.
#[derive(Debug, Clone)]
pub struct ApkPackage {
    source: Source,
    entries: BTreeMap<String, EntryMeta>,
}

/// Opens a zip file and reads its central directory.
pub fn open_apk(path: impl AsRef<Path>) -> Result<ApkPackage, ApkError> {
    let source = zip::file_source(path.as_ref())?;
    let entries = zip::read_directory(&source)?;
    Ok(ApkPackage { source, entries })
}

/// Same as [`open_apk`] for an in-memory archive.
pub fn open_apk_bytes(data: impl Into<Arc<[u8]>>) -> Result<ApkPackage, ApkError> {
    let source = Source::Memory(data.into());
    let entries = zip::read_directory(&source)?;
    Ok(ApkPackage { source, entries })
}

/// Reads one entry, fully decompressed.
pub fn extract_entry(pkg: &ApkPackage, path: &str) -> Result<Vec<u8>, ApkError> {
    let meta = pkg
        .entries
        .get(path)
        .ok_or_else(|| ApkError::EntryNotFound(path.to_string()))?;
    zip::read_entry(&pkg.source, path, meta)
}

impl ApkPackage {
    pub fn source(&self) -> String {
        self.source.describe()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(path, uncompressed length)` in path order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.uncompressed_size))
    }

    pub fn entry_meta(&self, path: &str) -> Option<&EntryMeta> {
        self.entries.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn extract(&self, path: &str) -> Result<Vec<u8>, ApkError> {
        extract_entry(self, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    UnityIl2cpp,
    UnityMono,
    Unreal,
    Unknown,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::UnityIl2cpp => "UnityIl2cpp",
            EngineKind::UnityMono => "UnityMono",
            EngineKind::Unreal => "Unreal",
            EngineKind::Unknown => "Unknown",
        }
    }
}

/// Engine decision plus the markers behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineDetection {
    pub kind: EngineKind,
    /// Entry paths that fired a detection rule.
    pub markers: Vec<String>,
    /// Set when markers from more than one engine were present and the fixed
    /// precedence picked the winner.
    pub heuristic: bool,
}

fn file_name(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

fn is_unreal_lib(path: &str) -> bool {
    path.starts_with("lib/") && matches!(file_name(path), "libUE4.so" | "libUnreal.so")
}

fn is_pak(path: &str) -> bool {
    path.to_ascii_lowercase().ends_with(".pak")
}

fn is_il2cpp_lib(path: &str) -> bool {
    path.starts_with("lib/") && file_name(path) == "libil2cpp.so"
}

fn is_managed_dll_candidate(path: &str) -> bool {
    path.starts_with("assets/") && path.to_ascii_lowercase().ends_with(".dll")
}

/// Classifies the build engine. Precedence: Unreal > UnityIl2cpp > UnityMono.
pub fn detect_engine(pkg: &ApkPackage) -> EngineKind {
    detect_engine_detailed(pkg).kind
}

pub fn detect_engine_detailed(pkg: &ApkPackage) -> EngineDetection {
    let mut unreal = Vec::new();
    let mut il2cpp = Vec::new();
    let mut mono = Vec::new();
    for path in pkg.paths() {
        if is_unreal_lib(path) || is_pak(path) {
            unreal.push(path.to_string());
        } else if is_il2cpp_lib(path) {
            il2cpp.push(path.to_string());
        } else if is_managed_dll_candidate(path) {
            let is_pe = pkg
                .extract(path)
                .map(|b| b.starts_with(b"MZ"))
                .unwrap_or(false);
            if is_pe {
                mono.push(path.to_string());
            }
        }
    }
    let families = [!unreal.is_empty(), !il2cpp.is_empty(), !mono.is_empty()]
        .iter()
        .filter(|f| **f)
        .count();
    let (kind, markers) = if !unreal.is_empty() {
        (EngineKind::Unreal, unreal)
    } else if !il2cpp.is_empty() {
        (EngineKind::UnityIl2cpp, il2cpp)
    } else if !mono.is_empty() {
        (EngineKind::UnityMono, mono)
    } else {
        (EngineKind::Unknown, Vec::new())
    };
    EngineDetection {
        kind,
        markers,
        heuristic: families > 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vraudit_fixtures::axml::Manifest;
    use vraudit_fixtures::zipw::{build_deflated, build_zip, patch_method, Method};

    fn pkg(entries: &[(&str, &[u8])]) -> ApkPackage {
        open_apk_bytes(build_deflated(entries)).unwrap()
    }

    #[test]
    fn lists_entries() {
        let p = pkg(&[("AndroidManifest.xml", b"<manifest/>"), ("lib/arm64-v8a/libUE4.so", b"\x7fELF")]);
        assert_eq!(p.len(), 2);
        let listed: Vec<_> = p.entries().collect();
        assert_eq!(listed, vec![("AndroidManifest.xml", 11), ("lib/arm64-v8a/libUE4.so", 4)]);
    }

    #[test]
    fn empty_zip_has_no_entries() {
        let empty: &[(&str, &[u8])] = &[];
        assert!(pkg(empty).is_empty());
    }

    #[test]
    fn bare_eocd_is_an_empty_archive() {
        let mut data = b"PK\x05\x06".to_vec();
        data.extend_from_slice(&[0; 18]);
        let p = open_apk_bytes(data.clone()).unwrap();
        assert_eq!(p.len(), 0);
        // The reference writer produces exactly this for an empty archive.
        let empty: &[(&str, &[u8])] = &[];
        assert_eq!(build_deflated(empty), data);
    }

    #[test]
    fn not_a_zip() {
        assert!(matches!(open_apk_bytes(b"hello world, not a zip".to_vec()), Err(ApkError::NotAZip)));
        assert!(matches!(open_apk_bytes(Vec::new()), Err(ApkError::NotAZip)));
    }

    #[test]
    fn truncated_archive() {
        let data = build_deflated(&[("a.txt", b"abc".as_slice())]);
        let cut = data[..data.len() - 10].to_vec();
        assert!(matches!(open_apk_bytes(cut), Err(ApkError::TruncatedArchive)));
    }

    #[test]
    fn stored_passthrough() {
        let p = open_apk_bytes(build_zip(&[("x.txt", b"abc".as_slice(), Method::Stored)])).unwrap();
        assert_eq!(extract_entry(&p, "x.txt").unwrap(), b"abc");
    }

    #[test]
    fn deflate_zeros() {
        let zeros = vec![0u8; 10 * 1024];
        let p = pkg(&[("z.bin", &zeros)]);
        assert!(p.entry_meta("z.bin").unwrap().compressed_size < 1024);
        assert_eq!(extract_entry(&p, "z.bin").unwrap(), zeros);
    }

    #[test]
    fn missing_entry() {
        let p = pkg(&[("a", b"1".as_slice())]);
        assert!(matches!(extract_entry(&p, "missing.txt"), Err(ApkError::EntryNotFound(_))));
    }

    #[test]
    fn unsupported_method() {
        let data = patch_method(build_zip(&[("a.txt", b"abc".as_slice(), Method::Stored)]), 12);
        let p = open_apk_bytes(data).unwrap();
        assert!(matches!(
            extract_entry(&p, "a.txt"),
            Err(ApkError::UnsupportedCompression { method: 12, .. })
        ));
    }

    #[test]
    fn crc_mismatch_is_corrupt() {
        let mut data = build_zip(&[("a.txt", b"abcdef".as_slice(), Method::Stored)]);
        let at = data.windows(6).position(|w| w == b"abcdef").unwrap();
        data[at] = b'X';
        let p = open_apk_bytes(data).unwrap();
        assert!(matches!(extract_entry(&p, "a.txt"), Err(ApkError::CorruptEntry { .. })));
    }

    #[test]
    fn file_backed_package() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("app.apk");
        std::fs::write(&path, build_deflated(&[("assets/a.txt", b"hello".as_slice())])).unwrap();
        let p = open_apk(&path).unwrap();
        assert_eq!(p.extract("assets/a.txt").unwrap(), b"hello");
        assert!(matches!(open_apk(dir.path().join("nope.apk")), Err(ApkError::Io(_))));
    }

    #[test]
    fn pico_face_tracking_plaintext() {
        let xml = Manifest::new("com.example.vr", &["com.picovr.permission.FACE_TRACKING"]).to_plain_xml();
        let info = parse_manifest(xml.as_bytes()).unwrap();
        assert_eq!(info.package_name, "com.example.vr");
        assert_eq!(
            info.permissions.iter().collect::<Vec<_>>(),
            vec!["com.picovr.permission.FACE_TRACKING"]
        );
        assert!(!info.is_binary_xml);
    }

    #[test]
    fn no_permissions() {
        let xml = Manifest::new("com.example.empty", &[]).to_plain_xml();
        assert!(parse_manifest(xml.as_bytes()).unwrap().permissions.is_empty());
    }

    #[test]
    fn binary_camera_permission() {
        for utf8 in [true, false] {
            let bin = Manifest::new("com.example.cam", &["android.permission.CAMERA"]).to_axml(utf8);
            let info = parse_manifest(&bin).unwrap();
            assert!(info.is_binary_xml);
            assert_eq!(info.package_name, "com.example.cam");
            assert!(info.permissions.contains("android.permission.CAMERA"));
            assert_eq!(info.permissions.len(), 1);
        }
    }

    #[test]
    fn duplicate_permissions_dedup() {
        let xml = Manifest::new("p", &["android.permission.CAMERA", "android.permission.CAMERA"]).to_plain_xml();
        assert_eq!(parse_manifest(xml.as_bytes()).unwrap().permissions.len(), 1);
    }

    #[test]
    fn manifest_errors() {
        assert!(matches!(parse_manifest(b"<manifest"), Err(ManifestError::MalformedXml(_))));
        assert!(matches!(
            parse_manifest(b"<application/>"),
            Err(ManifestError::MissingManifestElement)
        ));
        let mut bin = Manifest::new("p", &[]).to_axml(true);
        bin[2] = 0x10;
        assert!(matches!(
            parse_manifest(&bin),
            Err(ManifestError::UnsupportedChunkVersion { chunk_type: 3, .. })
        ));
        let bin = Manifest::new("p", &["a.b.C"]).to_axml(true);
        assert!(parse_manifest(&bin[..bin.len() - 30]).is_err());
    }

    #[test]
    fn engine_detection_rules() {
        let il2cpp = pkg(&[("lib/arm64-v8a/libil2cpp.so", b"x".as_slice())]);
        assert_eq!(detect_engine(&il2cpp), EngineKind::UnityIl2cpp);
        let ue = pkg(&[("lib/arm64-v8a/libUE4.so", b"x".as_slice())]);
        assert_eq!(detect_engine(&ue), EngineKind::Unreal);
        let pak = pkg(&[("assets/game.pak", b"x".as_slice())]);
        assert_eq!(detect_engine(&pak), EngineKind::Unreal);
        let mono = pkg(&[("assets/bin/Data/Managed/Assembly-CSharp.dll", b"MZ\x90\x00".as_slice())]);
        assert_eq!(detect_engine(&mono), EngineKind::UnityMono);
        let fake_dll = pkg(&[("assets/bin/Data/Managed/x.dll", b"not pe".as_slice())]);
        assert_eq!(detect_engine(&fake_dll), EngineKind::Unknown);
        let none = pkg(&[("classes.dex", b"dex".as_slice())]);
        assert_eq!(detect_engine(&none), EngineKind::Unknown);
    }

    #[test]
    fn engine_precedence_is_fixed_and_flagged() {
        let hybrid = pkg(&[
            ("assets/bin/Data/Managed/Assembly-CSharp.dll", b"MZ".as_slice()),
            ("lib/arm64-v8a/libil2cpp.so", b"x".as_slice()),
            ("lib/arm64-v8a/libUE4.so", b"x".as_slice()),
        ]);
        let d = detect_engine_detailed(&hybrid);
        assert_eq!(d.kind, EngineKind::Unreal);
        assert!(d.heuristic);
        let both_unity = pkg(&[
            ("assets/bin/Data/Managed/Assembly-CSharp.dll", b"MZ".as_slice()),
            ("lib/arm64-v8a/libil2cpp.so", b"x".as_slice()),
        ]);
        assert_eq!(detect_engine(&both_unity), EngineKind::UnityIl2cpp);
    }
}
