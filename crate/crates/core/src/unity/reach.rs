//! Matching catalog rules against recovered names, and shortest entry paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::catalog::{Rule, RuleKind};
use crate::evidence::{AccessEvidence, EvidenceSource};

use super::callgraph::NamedCallGraph;

/// Names shorter than this only match exactly or by segment.
pub const SUBSTRING_MIN_LEN: usize = 8;

fn type_segment(label: &str) -> &str {
    let ty = label.rsplit_once("::").map_or(label, |(t, _)| t);
    ty.rsplit_once('.').map_or(ty, |(_, last)| last)
}

/// Whether a recovered name refers to the rule's API or class.
///
/// Tried in order: exact name, member segment after `::`, type segment (for
/// class rules), then substring for names of at least
/// [`SUBSTRING_MIN_LEN`] characters.
pub fn name_matches(label: &str, rule: &Rule) -> bool {
    let n = rule.name.as_str();
    if label == n {
        return true;
    }
    if let Some((_, member)) = label.rsplit_once("::") {
        if member == n {
            return true;
        }
    }
    if rule.kind == RuleKind::Class && type_segment(label) == n {
        return true;
    }
    n.len() >= SUBSTRING_MIN_LEN && label.contains(n)
}

fn applicable(rule: &Rule) -> bool {
    matches!(rule.kind, RuleKind::Api | RuleKind::Class)
}

/// One evidence item per (matching name, data type); the first matching
/// rule in `rules` order names the API.
fn matches_by_type<'r>(label: &str, rules: &[&'r Rule]) -> Vec<&'r Rule> {
    let mut seen = BTreeSet::new();
    rules
        .iter()
        .copied()
        .filter(|r| applicable(r) && name_matches(label, r))
        .filter(|r| seen.insert(r.data_type))
        .collect()
}

/// Multi-source BFS from every in-degree-0 node. Returns the BFS parent of
/// each reached node; roots map to themselves.
fn bfs_from_roots(graph: &NamedCallGraph) -> BTreeMap<u64, u64> {
    let mut adj: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut has_caller = BTreeSet::new();
    for &(a, b) in &graph.edges {
        adj.entry(a).or_default().push(b);
        has_caller.insert(b);
    }
    let mut parent = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &n in graph.nodes.iter().filter(|n| !has_caller.contains(n)) {
        parent.insert(n, n);
        queue.push_back(n);
    }
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(&n).into_iter().flatten() {
            if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(m) {
                e.insert(n);
                queue.push_back(m);
            }
        }
    }
    parent
}

/// Evidence for every labelled node matching a rule, each with a shortest
/// path from an entry node. A node unreachable from any entry node (for
/// example inside a cycle) gets the one-element path `[node]`.
pub fn reach_sensitive(graph: &NamedCallGraph, rules: &[&Rule]) -> Vec<AccessEvidence> {
    let parent = bfs_from_roots(graph);
    let mut out = Vec::new();
    for (&node, label) in &graph.labels {
        let hits = matches_by_type(label, rules);
        if hits.is_empty() {
            continue;
        }
        let mut path = vec![graph.name_of(node)];
        if parent.contains_key(&node) {
            let mut cur = node;
            while parent[&cur] != cur {
                cur = parent[&cur];
                path.push(graph.name_of(cur));
            }
        }
        path.reverse();
        for r in hits {
            out.push(AccessEvidence {
                data_type: r.data_type,
                api_name: r.name.clone(),
                path: path.clone(),
                source: EvidenceSource::CallGraph,
            });
        }
    }
    out
}

/// Evidence from bare name presence, for inputs without a call graph.
pub fn presence_evidence<'a>(
    names: impl IntoIterator<Item = &'a String>,
    rules: &[&Rule],
) -> Vec<AccessEvidence> {
    let mut out = Vec::new();
    for name in names {
        for r in matches_by_type(name, rules) {
            out.push(AccessEvidence {
                data_type: r.data_type,
                api_name: r.name.clone(),
                path: vec![name.clone()],
                source: EvidenceSource::Presence,
            });
        }
    }
    out
}

/// Keeps one evidence item per (data type, API), preferring the shortest
/// path and then the lexicographically smallest.
pub fn condense(evidence: Vec<AccessEvidence>) -> Vec<AccessEvidence> {
    let mut best: BTreeMap<(crate::taxonomy::DataType, String), AccessEvidence> = BTreeMap::new();
    for e in evidence {
        let key = (e.data_type, e.api_name.clone());
        match best.get(&key) {
            Some(cur) if (cur.path.len(), &cur.path) <= (e.path.len(), &e.path) => {}
            _ => {
                best.insert(key, e);
            }
        }
    }
    best.into_values().collect()
}
