//! VR data types a policy declares it collects.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::components::{Component, ComponentCoverage};
use super::{tokenize, PolicyDoc};
use crate::taxonomy::DataType;

pub const VAGUE_TERMS: &[&str] = &["biometric data", "sensor data", "game interaction data"];

static COLLECTION_VERB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(collect|gather|obtain|record|process|receiv)(s|es|e|ed|ing)?\b").unwrap()
});

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredSet {
    pub specific: BTreeSet<DataType>,
    pub vague: bool,
    /// (sentence, matched phrase)
    pub evidence: Vec<(String, String)>,
}

/// Lowercased tokens joined by single spaces and padded, so phrase search
/// with surrounding spaces respects word boundaries.
fn token_line(text: &str) -> String {
    let toks: Vec<String> = tokenize(text).iter().map(|t| t.to_lowercase()).collect();
    format!(" {} ", toks.join(" "))
}

fn contains_phrase(line: &str, phrase: &str) -> bool {
    let p = token_line(phrase);
    !p.trim().is_empty() && line.contains(&p)
}

pub fn extract_declared_datatypes(
    doc: &PolicyDoc,
    coverage: &ComponentCoverage,
    corpus: &BTreeMap<DataType, Vec<String>>,
) -> DeclaredSet {
    let mut out = DeclaredSet::default();
    let collect_paras: BTreeSet<usize> = coverage.paragraphs_with(Component::Collect).collect();
    for s in doc.sentences.iter().filter(|s| collect_paras.contains(&s.paragraph)) {
        if !COLLECTION_VERB.is_match(&s.text) {
            continue;
        }
        let line = token_line(&s.text);
        let mut specific_here = false;
        for (dt, phrases) in corpus {
            for p in phrases {
                if contains_phrase(&line, p) {
                    out.specific.insert(*dt);
                    out.evidence.push((s.text.clone(), p.clone()));
                    specific_here = true;
                }
            }
        }
        if !specific_here {
            for v in VAGUE_TERMS {
                if contains_phrase(&line, v) {
                    out.vague = true;
                    out.evidence.push((s.text.clone(), v.to_string()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::SensitivityCatalog;
    use crate::policy::{classify_components, segment};
    use proptest::prelude::*;

    fn declared(text: &str) -> DeclaredSet {
        let d = segment(text);
        let cat = SensitivityCatalog::default_catalog();
        extract_declared_datatypes(&d, &classify_components(&d), &cat.policy_corpus)
    }

    #[test]
    fn hand_pose_example() {
        let d = declared("The app collects technical information such as estimated hand size and hand pose data.");
        assert!(d.specific.contains(&DataType::Hand));
        assert!(!d.vague);
    }

    #[test]
    fn biometric_is_vague() {
        let d = declared("We may collect your biometric data.");
        assert!(d.specific.is_empty());
        assert!(d.vague);
    }

    #[test]
    fn email_only() {
        let d = declared("Information We Collect\nWe collect your email address when you register.");
        assert!(d.specific.is_empty());
        assert!(!d.vague);
    }

    #[test]
    fn non_collect_paragraph_ignored() {
        let d = declared("We share eye tracking summaries with partners.");
        assert!(d.specific.is_empty());
    }

    #[test]
    fn specific_phrase_suppresses_vague_in_sentence() {
        let d = declared("We collect biometric data such as eye tracking and gaze detection signals.");
        assert_eq!(d.specific, BTreeSet::from([DataType::Eye]));
        assert!(!d.vague);
    }

    proptest! {
        #[test]
        fn specific_within_corpus_keys(words in proptest::collection::vec(
            prop_oneof!["collect", "we", "eye tracking", "hand size", "camera", "body tracking", "data", "sensor data", "\\."], 0..40)
        ) {
            let text = words.join(" ");
            let d = segment(&text);
            let mut corpus = SensitivityCatalog::default_catalog().policy_corpus;
            corpus.remove(&DataType::Face);
            let got = extract_declared_datatypes(&d, &classify_components(&d), &corpus);
            prop_assert!(got.specific.iter().all(|t| corpus.contains_key(t)));
        }
    }
}
