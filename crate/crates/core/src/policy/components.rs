//! Rule-based labelling of policy paragraphs with content components.
//!
//! Each component has keyword patterns and canonical headings (shipped as
//! `data/components.json`). A paragraph's first line is its heading when it
//! is short and has no sentence punctuation. Heading hits weigh
//! `heading_weight`, body hits weigh 1; a paragraph gets every component
//! scoring at least `threshold` or whose canonical heading matches exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PolicyDoc;

pub const DEFAULT_COMPONENTS_JSON: &str = include_str!("../../data/components.json");

const HEADING_MAX_WORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Component {
    Collect,
    Share,
    Security,
    Right,
    Children,
    Region,
    Update,
    Provider,
    Retention,
    DataUse,
}

impl Component {
    pub const ALL: [Component; 10] = [
        Component::Collect,
        Component::Share,
        Component::Security,
        Component::Right,
        Component::Children,
        Component::Region,
        Component::Update,
        Component::Provider,
        Component::Retention,
        Component::DataUse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Collect => "COLLECT",
            Component::Share => "SHARE",
            Component::Security => "SECURITY",
            Component::Right => "RIGHT",
            Component::Children => "CHILDREN",
            Component::Region => "REGION",
            Component::Update => "UPDATE",
            Component::Provider => "PROVIDER",
            Component::Retention => "RETENTION",
            Component::DataUse => "DATA_USE",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Component::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown component {s:?}"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCoverage {
    pub present: BTreeSet<Component>,
    pub paragraph_labels: Vec<(usize, Component)>,
}

impl ComponentCoverage {
    pub fn has(&self, c: Component) -> bool {
        self.present.contains(&c)
    }

    pub fn paragraphs_with(&self, c: Component) -> impl Iterator<Item = usize> + '_ {
        self.paragraph_labels.iter().filter(move |(_, l)| *l == c).map(|(p, _)| *p)
    }
}

#[derive(Deserialize)]
struct RawRules {
    threshold: u32,
    heading_weight: u32,
    components: BTreeMap<Component, RawComponent>,
}

#[derive(Deserialize)]
struct RawComponent {
    keywords: Vec<String>,
    headings: Vec<String>,
}

#[derive(Debug)]
struct CompiledComponent {
    keywords: Vec<Regex>,
    headings: BTreeSet<String>,
}

#[derive(Debug)]
pub struct ComponentRules {
    threshold: u32,
    heading_weight: u32,
    components: BTreeMap<Component, CompiledComponent>,
}

impl ComponentRules {
    pub fn from_json(text: &str) -> Result<ComponentRules, String> {
        let raw: RawRules = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut components = BTreeMap::new();
        for (c, rc) in raw.components {
            let keywords = rc
                .keywords
                .iter()
                .map(|k| Regex::new(&format!("(?i){k}")).map_err(|e| format!("{c}: {e}")))
                .collect::<Result<_, _>>()?;
            let headings = rc.headings.iter().map(|h| normalize_heading(h)).collect();
            components.insert(c, CompiledComponent { keywords, headings });
        }
        Ok(ComponentRules {
            threshold: raw.threshold,
            heading_weight: raw.heading_weight,
            components,
        })
    }

    pub fn default_rules() -> &'static ComponentRules {
        static RULES: LazyLock<ComponentRules> =
            LazyLock::new(|| ComponentRules::from_json(DEFAULT_COMPONENTS_JSON).expect("shipped rules compile"));
        &RULES
    }

    /// Components assigned to one paragraph.
    pub fn label_paragraph(&self, paragraph: &str) -> BTreeSet<Component> {
        let (heading, body) = split_heading(paragraph);
        let norm = heading.map(normalize_heading);
        let mut out = BTreeSet::new();
        for (c, rules) in &self.components {
            if norm.as_ref().is_some_and(|h| rules.headings.contains(h)) {
                out.insert(*c);
                continue;
            }
            let hits = |text: &str| -> u32 { rules.keywords.iter().map(|re| re.find_iter(text).count() as u32).sum() };
            let score = heading.map_or(0, |h| self.heading_weight * hits(h)) + hits(body);
            if score >= self.threshold {
                out.insert(*c);
            }
        }
        out
    }
}

fn split_heading(paragraph: &str) -> (Option<&str>, &str) {
    let (first, rest) = paragraph.split_once('\n').unwrap_or((paragraph, ""));
    let first_t = first.trim();
    let looks_like_heading = !first_t.is_empty()
        && first_t.split_whitespace().count() <= HEADING_MAX_WORDS
        && !first_t.ends_with(['.', '!', '?', ',', ';']);
    if looks_like_heading {
        (Some(first_t), rest)
    } else {
        (None, paragraph)
    }
}

/// Lowercase, curly apostrophes folded, leading numbering and trailing
/// punctuation removed, whitespace collapsed.
pub fn normalize_heading(h: &str) -> String {
    let h = h.replace('\u{2019}', "'").to_lowercase();
    let h = h.trim_start_matches(|c: char| c.is_ascii_digit() || matches!(c, '.' | ')' | '#' | '-' | ' ' | '\t'));
    let h = h.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    h.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn classify_components(doc: &PolicyDoc) -> ComponentCoverage {
    classify_with(doc, ComponentRules::default_rules())
}

pub fn classify_with(doc: &PolicyDoc, rules: &ComponentRules) -> ComponentCoverage {
    let mut cov = ComponentCoverage::default();
    for (i, p) in doc.paragraphs.iter().enumerate() {
        for c in rules.label_paragraph(p) {
            cov.present.insert(c);
            cov.paragraph_labels.push((i, c));
        }
    }
    cov
}
