//! AndroidManifest.xml parsing for plain-text and binary encodings.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{axml, ManifestError};

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Encoding-neutral element tree shared by both decoders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlElement {
    pub name: String,
    pub attrs: Vec<XmlAttr>,
    pub children: Vec<XmlElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlAttr {
    pub namespace: Option<String>,
    pub name: String,
    /// `None` for typed (non-string) binary values.
    pub value: Option<String>,
}

impl XmlElement {
    fn attr(&self, namespace: Option<&str>, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.name == name && a.namespace.as_deref() == namespace)
            .and_then(|a| a.value.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub package_name: String,
    pub permissions: BTreeSet<String>,
    pub is_binary_xml: bool,
}

impl ManifestInfo {
    /// Equality ignoring which encoding the document came from.
    pub fn same_content(&self, other: &ManifestInfo) -> bool {
        self.package_name == other.package_name && self.permissions == other.permissions
    }
}

/// Parses an AndroidManifest in either encoding.
pub fn parse_manifest(data: &[u8]) -> Result<ManifestInfo, ManifestError> {
    let (root, is_binary_xml) = if axml::is_binary_xml(data) {
        (axml::decode(data)?, true)
    } else {
        (parse_text(data)?, false)
    };
    if root.name != "manifest" {
        return Err(ManifestError::MissingManifestElement);
    }
    let package_name = root.attr(None, "package").unwrap_or_default().to_string();
    let mut permissions = BTreeSet::new();
    for child in root.children.iter().filter(|c| c.name == "uses-permission") {
        let Some(label) = child.attr(Some(ANDROID_NS), "name") else {
            continue;
        };
        let label = label.trim();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            log::warn!("skipping malformed permission label {label:?}");
            continue;
        }
        permissions.insert(label.to_string());
    }
    Ok(ManifestInfo {
        package_name,
        permissions,
        is_binary_xml,
    })
}

fn convert(node: roxmltree::Node<'_, '_>) -> XmlElement {
    XmlElement {
        name: node.tag_name().name().to_string(),
        attrs: node
            .attributes()
            .map(|a| XmlAttr {
                namespace: a.namespace().map(str::to_string),
                name: a.name().to_string(),
                value: Some(a.value().to_string()),
            })
            .collect(),
        children: node.children().filter(|c| c.is_element()).map(convert).collect(),
    }
}

fn parse_text(data: &[u8]) -> Result<XmlElement, ManifestError> {
    let text = std::str::from_utf8(data).map_err(|e| ManifestError::MalformedXml(e.to_string()))?;
    let text = text.trim_start_matches('\u{feff}');
    let doc = roxmltree::Document::parse(text).map_err(|e| ManifestError::MalformedXml(e.to_string()))?;
    Ok(convert(doc.root_element()))
}
