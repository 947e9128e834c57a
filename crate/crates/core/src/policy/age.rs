//! Children's age limit stated in a policy.

use serde::{Deserialize, Serialize};

use super::components::{Component, ComponentCoverage};
use super::{tokenize, PolicyDoc};

/// Tokens this close to an age cue count as age statements.
pub const AGE_WINDOW: usize = 3;
pub const AGE_RANGE: std::ops::RangeInclusive<u32> = 1..=21;

const CUES: &[&str] = &["years", "year", "age", "aged", "old"];

const NUMBER_WORDS: &[(&str, u32)] = &[
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
    ("twenty", 20),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildAge {
    /// Largest candidate.
    pub age: u32,
    /// Distinct candidates in order of appearance.
    pub candidates: Vec<u32>,
}

fn number(token: &str) -> Option<u32> {
    if token.chars().all(|c| c.is_ascii_digit()) && token.len() <= 3 {
        return token.parse().ok();
    }
    NUMBER_WORDS.iter().find(|(w, _)| *w == token).map(|(_, n)| *n)
}

/// Ages within [`AGE_WINDOW`] tokens of an age cue, scanned only in
/// paragraphs labelled CHILDREN.
pub fn extract_child_age(doc: &PolicyDoc, coverage: &ComponentCoverage) -> Option<ChildAge> {
    let mut candidates = Vec::new();
    for p in coverage.paragraphs_with(Component::Children) {
        let Some(text) = doc.paragraphs.get(p) else { continue };
        let tokens: Vec<String> = tokenize(text)
            .iter()
            .flat_map(|w| w.split('-').map(str::to_lowercase).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        for (i, t) in tokens.iter().enumerate() {
            let Some(n) = number(t) else { continue };
            if !AGE_RANGE.contains(&n) {
                continue;
            }
            let lo = i.saturating_sub(AGE_WINDOW);
            let hi = (i + AGE_WINDOW).min(tokens.len() - 1);
            if tokens[lo..=hi].iter().any(|w| CUES.contains(&w.as_str())) && !candidates.contains(&n) {
                candidates.push(n);
            }
        }
    }
    let age = *candidates.iter().max()?;
    Some(ChildAge { age, candidates })
}
