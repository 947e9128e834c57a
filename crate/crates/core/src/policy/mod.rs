//! Privacy-policy text analysis.
//!
//! Documents are split into blank-line separated paragraphs, then into
//! sentences. Words are maximal runs of letters, digits, apostrophes and
//! hyphens containing at least one letter or digit.

pub mod age;
pub mod components;
pub mod declared;
pub mod html;
pub mod lang;
pub mod readability;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use age::{extract_child_age, ChildAge};
pub use components::{classify_components, Component, ComponentCoverage, ComponentRules};
pub use declared::{extract_declared_datatypes, DeclaredSet};
pub use lang::{detect_language, Language};
pub use readability::{readability, ReadabilityError, ReadabilityReport};

/// Policies with fewer words than this are insufficient.
pub const MIN_POLICY_WORDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub words: Vec<String>,
    pub paragraph: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDoc {
    pub raw_text: String,
    pub paragraphs: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub source_url: Option<String>,
}

impl PolicyDoc {
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| s.words.len()).sum()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.words.iter().map(String::as_str))
    }

    pub fn paragraph_sentences(&self, paragraph: usize) -> impl Iterator<Item = &Sentence> {
        self.sentences.iter().filter(move |s| s.paragraph == paragraph)
    }

    pub fn with_source_url(mut self, url: impl Into<String>) -> Self {
        self.source_url = Some(url.into());
        self
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}' || c == '-'
}

/// Word tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .map(str::to_string)
        .collect()
}

const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "inc", "ltd", "co", "corp", "llc", "mr", "mrs", "ms", "dr", "st", "vs", "no", "u.s", "u.k",
    "jr", "sr", "approx", "dept",
];

fn ends_with_abbreviation(before: &str) -> bool {
    let token: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '.')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let token = token.trim_start_matches('.').to_lowercase();
    ABBREVIATIONS.contains(&token.as_str())
}

fn split_sentences(paragraph: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | ')' | '"' | '\'' | '\u{201D}' | '\u{2019}' | ']') {
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = if k == chars.len() {
                true
            } else {
                k > j && chars[k].1.is_uppercase() && !(c == '.' && ends_with_abbreviation(&paragraph[start..at]))
            };
            if boundary {
                let end = chars.get(j).map_or(paragraph.len(), |&(p, _)| p);
                let s = paragraph[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    let tail = paragraph[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Blank-line separated paragraphs, trimmed, empty ones dropped.
pub fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.trim().is_empty() {
                out.push(cur.trim().to_string());
            }
            cur.clear();
        } else {
            if !cur.is_empty() {
                cur.push('\n');
            }
            cur.push_str(line);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

pub fn segment(text: &str) -> PolicyDoc {
    let paragraphs = paragraphs(text);
    let mut sentences = Vec::new();
    for (p, para) in paragraphs.iter().enumerate() {
        for s in split_sentences(para) {
            let words = tokenize(s);
            if words.is_empty() {
                continue;
            }
            sentences.push(Sentence {
                text: s.to_string(),
                words,
                paragraph: p,
            });
        }
    }
    PolicyDoc {
        raw_text: text.to_string(),
        paragraphs,
        sentences,
        source_url: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Validity {
    Valid,
    TooShort,
    /// Link points at the store's own policy rather than the app's.
    StoreGeneric,
}

impl Validity {
    pub fn as_str(self) -> &'static str {
        match self {
            Validity::Valid => "Valid",
            Validity::TooShort => "TooShort",
            Validity::StoreGeneric => "StoreGeneric",
        }
    }
}

pub fn validity_check<S: AsRef<str>>(doc: &PolicyDoc, store_policy_urls: &[S]) -> Validity {
    let generic = doc.source_url.as_deref().is_some_and(|u| {
        let u = u.trim().to_ascii_lowercase();
        store_policy_urls
            .iter()
            .any(|p| u.starts_with(&p.as_ref().trim().to_ascii_lowercase()))
    });
    if generic {
        Validity::StoreGeneric
    } else if doc.word_count() < MIN_POLICY_WORDS {
        Validity::TooShort
    } else {
        Validity::Valid
    }
}

static VR_TERMS: LazyLock<Vec<(&'static str, Regex)>> = LazyLock::new(|| {
    [
        ("virtual reality", r"(?i)\bvirtual[\s-]+reality\b"),
        ("VR", r"(?i)(?:^|[^\p{L}\p{N}])vr(?:[^\p{L}\p{N}]|$)"),
        ("immersive", r"(?i)\bimmersive\b"),
        ("head-mounted display", r"(?i)\bhead[\s-]+mounted[\s-]+displays?\b"),
    ]
    .into_iter()
    .map(|(t, p)| (t, Regex::new(p).unwrap()))
    .collect()
});

/// Whether the policy speaks about VR at all; `hits` lists matched terms in
/// a fixed order, with the app name last.
pub fn specificity_check(doc: &PolicyDoc, app_name: &str) -> (bool, Vec<String>) {
    let text = &doc.raw_text;
    let mut hits: Vec<String> = VR_TERMS
        .iter()
        .filter(|(_, re)| re.is_match(text))
        .map(|(t, _)| t.to_string())
        .collect();
    let name = app_name.trim();
    if !name.is_empty() {
        let re = Regex::new(&format!(r"(?i)(?:^|[^\p{{L}}\p{{N}}]){}(?:[^\p{{L}}\p{{N}}]|$)", regex::escape(name)))
            .expect("escaped name is a valid pattern");
        if re.is_match(text) {
            hits.push(name.to_string());
        }
    }
    (!hits.is_empty(), hits)
}
