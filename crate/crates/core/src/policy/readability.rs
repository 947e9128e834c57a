//! Readability metrics over a segmented document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PolicyDoc;

/// Silent reading rate, words per minute.
pub const READING_WPM: f64 = 238.0;
/// Speaking rate, words per minute.
pub const SPEAKING_WPM: f64 = 130.0;
/// Words with more letters than this count as long for LIX.
pub const LONG_WORD_LETTERS: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadabilityError {
    #[error("document has no words")]
    EmptyDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    pub ari: f64,
    pub fres: f64,
    pub lix: f64,
    pub lpw: f64,
    pub spw: f64,
    pub wps: f64,
    pub sc: usize,
    pub wc: usize,
    pub rt_seconds: f64,
    pub st_seconds: f64,
}

/// Vowel groups over `aeiouy`, minus a silent final `e` unless the word
/// ends in `le`; at least 1.
pub fn syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0usize;
    let mut prev = false;
    for &c in &w {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if n >= 2 && w[n - 1] == 'e' && w[n - 2] != 'l' {
        groups = groups.saturating_sub(1);
    }
    groups.max(1)
}

pub fn letters(word: &str) -> usize {
    word.chars().filter(|c| c.is_alphabetic()).count()
}

pub fn readability(doc: &PolicyDoc) -> Result<ReadabilityReport, ReadabilityError> {
    let wc = doc.word_count();
    let sc = doc.sentences.len();
    if wc == 0 || sc == 0 {
        return Err(ReadabilityError::EmptyDocument);
    }
    let (mut letter_total, mut syl_total, mut long) = (0usize, 0usize, 0usize);
    for w in doc.words() {
        let l = letters(w);
        letter_total += l;
        syl_total += syllables(w);
        if l > LONG_WORD_LETTERS {
            long += 1;
        }
    }
    let (w, s) = (wc as f64, sc as f64);
    let lpw = letter_total as f64 / w;
    let spw = syl_total as f64 / w;
    let wps = w / s;
    Ok(ReadabilityReport {
        ari: 4.71 * lpw + 0.5 * wps - 21.43,
        fres: 206.835 - 1.015 * wps - 84.6 * spw,
        lix: wps + 100.0 * long as f64 / w,
        lpw,
        spw,
        wps,
        sc,
        wc,
        rt_seconds: w / READING_WPM * 60.0,
        st_seconds: w / SPEAKING_WPM * 60.0,
    })
}
