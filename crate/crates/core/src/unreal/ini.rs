//! Minimal ini grammar for Unreal config files.
//!
//! `[Section]` headers, `key=value` pairs, and full-line `;` or `#`
//! comments. Keys before any header land in the section named `""`.
//! Repeated keys keep the last value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::UnrealError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

/// Decodes config bytes, honouring a UTF-16LE or UTF-8 byte-order mark.
pub fn decode_text(data: &[u8]) -> String {
    if let Some(rest) = data.strip_prefix(&[0xFF, 0xFE]) {
        let units: Vec<u16> = rest.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        return String::from_utf16_lossy(&units);
    }
    let data = data.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(data);
    String::from_utf8_lossy(data).into_owned()
}

pub fn parse_ini(text: &str) -> Result<EngineConfig, UnrealError> {
    let mut cfg = EngineConfig::default();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(UnrealError::MalformedIni { line: n + 1 })?;
            section = name.trim().to_string();
            cfg.sections.entry(section.clone()).or_default();
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                cfg.sections
                    .entry(section.clone())
                    .or_default()
                    .insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => log::debug!("ini line {} ignored: {line:?}", n + 1),
        }
    }
    Ok(cfg)
}

impl EngineConfig {
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for (name, keys) in &self.sections {
            if !name.is_empty() || keys.is_empty() {
                out.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in keys {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }

    /// (section, key, value) triples in order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.sections
            .iter()
            .flat_map(|(s, kv)| kv.iter().map(move |(k, v)| (s.as_str(), k.as_str(), v.as_str())))
    }

    pub fn key_count(&self) -> usize {
        self.sections.values().map(BTreeMap::len).sum()
    }

    /// Merges `other`; existing keys win.
    pub fn merge(&mut self, other: EngineConfig) {
        for (s, kv) in other.sections {
            let dst = self.sections.entry(s).or_default();
            for (k, v) in kv {
                dst.entry(k).or_insert(v);
            }
        }
    }
}

/// Boolean ini value: only `True`, `true` and `1` are true.
pub fn parse_bool(value: &str) -> bool {
    matches!(value, "True" | "true" | "1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eye_tracking_key() {
        let cfg = parse_ini(
            "; comment\n[/Script/OculusHMD.OculusHMDRuntimeSettings]\nEnableEyeTracking=True\n bSupportsDash = False \n",
        )
        .unwrap();
        let s = &cfg.sections["/Script/OculusHMD.OculusHMDRuntimeSettings"];
        assert_eq!(s["EnableEyeTracking"], "True");
        assert_eq!(s["bSupportsDash"], "False");
    }

    #[test]
    fn unterminated_header() {
        assert_eq!(parse_ini("[Broken\nx=1"), Err(UnrealError::MalformedIni { line: 1 }));
    }

    #[test]
    fn global_keys_and_utf16() {
        let mut bytes = vec![0xFF, 0xFE];
        for u in "a=1\n[S]\nb=2".encode_utf16() {
            bytes.extend_from_slice(&u.to_le_bytes());
        }
        let cfg = parse_ini(&decode_text(&bytes)).unwrap();
        assert_eq!(cfg.sections[""]["a"], "1");
        assert_eq!(cfg.sections["S"]["b"], "2");
    }

    #[test]
    fn booleans() {
        assert!(parse_bool("True") && parse_bool("true") && parse_bool("1"));
        assert!(!parse_bool("TRUE") && !parse_bool("yes") && !parse_bool("False"));
    }

    fn config() -> impl Strategy<Value = EngineConfig> {
        let key = "[A-Za-z+][A-Za-z0-9_.]{0,12}";
        let value = "([!-~]([ -~]{0,16}[!-~])?)?";
        let section = "(/Script/)?[A-Za-z][A-Za-z0-9_. ]{0,12}[A-Za-z0-9]|";
        proptest::collection::btree_map(section, proptest::collection::btree_map(key, value, 0..5), 0..5)
            .prop_map(|sections| EngineConfig { sections })
    }

    proptest! {
        #[test]
        fn serialize_reparse_is_identity(cfg in config()) {
            // a global section only survives serialization if it has keys
            let mut cfg = cfg;
            if cfg.sections.get("").is_some_and(BTreeMap::is_empty) {
                cfg.sections.remove("");
            }
            let text = cfg.to_ini();
            let back = parse_ini(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(parse_ini(&back.to_ini()).unwrap(), back);
        }
    }
}
