//! Language identification.
//!
//! Chinese, Japanese and Korean are decided by Unicode-block shares. The
//! Latin-script languages use character-trigram rank profiles built from the
//! sample texts in `data/lang/`, compared by out-of-place distance.

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

pub const MIN_DETECT_CHARS: usize = 40;
pub const PROFILE_SIZE: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
    Ja,
    De,
    Fr,
    Vi,
    Es,
    Ko,
    Unknown,
}

impl Language {
    pub const KNOWN: [Language; 8] = [
        Language::En,
        Language::Zh,
        Language::Ja,
        Language::De,
        Language::Fr,
        Language::Vi,
        Language::Es,
        Language::Ko,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
            Language::Ja => "ja",
            Language::De => "de",
            Language::Fr => "fr",
            Language::Vi => "vi",
            Language::Es => "es",
            Language::Ko => "ko",
            Language::Unknown => "unknown",
        }
    }

    pub fn from_code(code: &str) -> Option<Language> {
        let c = code.trim().to_ascii_lowercase();
        let c = c.split(['-', '_']).next().unwrap_or_default();
        Language::KNOWN.into_iter().find(|l| l.code() == c)
    }

    /// English name, as used in language-switcher links.
    pub fn english_name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Zh => "Chinese",
            Language::Ja => "Japanese",
            Language::De => "German",
            Language::Fr => "French",
            Language::Vi => "Vietnamese",
            Language::Es => "Spanish",
            Language::Ko => "Korean",
            Language::Unknown => "Unknown",
        }
    }

    /// Name in the language itself.
    pub fn native_name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Zh => "中文",
            Language::Ja => "日本語",
            Language::De => "Deutsch",
            Language::Fr => "Français",
            Language::Vi => "Tiếng Việt",
            Language::Es => "Español",
            Language::Ko => "한국어",
            Language::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

const SAMPLES: &[(Language, &str)] = &[
    (Language::En, include_str!("../../data/lang/en.txt")),
    (Language::De, include_str!("../../data/lang/de.txt")),
    (Language::Fr, include_str!("../../data/lang/fr.txt")),
    (Language::Es, include_str!("../../data/lang/es.txt")),
    (Language::Vi, include_str!("../../data/lang/vi.txt")),
];

/// Trigram → rank, rank 0 most frequent.
type Profile = HashMap<String, usize>;

/// Top trigrams of lowercased letter runs padded with `_`. Ties break
/// lexicographically so profiles are deterministic.
pub fn trigram_ranks(text: &str, size: usize) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for word in text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let padded: Vec<char> = std::iter::once('_')
            .chain(word.chars().flat_map(char::to_lowercase))
            .chain(std::iter::once('_'))
            .collect();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(size).map(|(t, _)| t).collect()
}

static PROFILES: LazyLock<Vec<(Language, Profile)>> = LazyLock::new(|| {
    SAMPLES
        .iter()
        .map(|(l, text)| {
            let ranks = trigram_ranks(text, PROFILE_SIZE);
            (*l, ranks.into_iter().enumerate().map(|(i, t)| (t, i)).collect())
        })
        .collect()
});

fn out_of_place(doc: &[String], profile: &Profile) -> usize {
    doc.iter()
        .enumerate()
        .map(|(i, t)| profile.get(t).map_or(PROFILE_SIZE, |&r| r.abs_diff(i)))
        .sum()
}

fn script_shares(text: &str) -> (usize, usize, usize, usize) {
    let (mut han, mut kana, mut hangul, mut letters) = (0, 0, 0, 0);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        match c as u32 {
            0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF => han += 1,
            0x3040..=0x30FF | 0x31F0..=0x31FF => kana += 1,
            0xAC00..=0xD7AF | 0x1100..=0x11FF | 0x3130..=0x318F => hangul += 1,
            _ => {}
        }
    }
    (han, kana, hangul, letters)
}

pub fn detect_language(text: &str) -> Language {
    if text.trim().chars().count() < MIN_DETECT_CHARS {
        return Language::Unknown;
    }
    let (han, kana, hangul, letters) = script_shares(text);
    if letters == 0 {
        return Language::Unknown;
    }
    if hangul * 2 >= letters {
        return Language::Ko;
    }
    // Japanese mixes kana into Han text; a tenth kana is decisive.
    if (han + kana) * 2 >= letters && kana * 10 >= han + kana {
        return Language::Ja;
    }
    if han * 2 >= letters {
        return Language::Zh;
    }
    let doc = trigram_ranks(text, PROFILE_SIZE);
    if doc.is_empty() {
        return Language::Unknown;
    }
    PROFILES
        .iter()
        .map(|(l, p)| (out_of_place(&doc, p), *l))
        .min()
        .map_or(Language::Unknown, |(_, l)| l)
}
