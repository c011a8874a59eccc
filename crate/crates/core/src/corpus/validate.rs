use serde::Serialize;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::{ArticleInstance, ChainInstance};

/// A broken invariant, naming the instance and the rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub instance_id: String,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}", self.instance_id, self.rule, self.detail)
    }
}

fn violation(id: &str, rule: &'static str, detail: String) -> Violation {
    Violation {
        instance_id: id.to_string(),
        rule,
        detail,
    }
}

fn check_chain(id: &str, ci: usize, chain: &[usize], n: usize, out: &mut Vec<Violation>) {
    if chain.is_empty() {
        out.push(violation(id, "empty-chain", format!("chain {ci} is empty")));
        return;
    }
    let out_of_range: Vec<usize> = chain.iter().copied().filter(|&i| i >= n).collect();
    if !out_of_range.is_empty() {
        out.push(violation(
            id,
            "index-out-of-range",
            format!("chain {ci} references {out_of_range:?} but the article has {n} sentences"),
        ));
    }
    let distinct: BTreeSet<usize> = chain.iter().copied().collect();
    if distinct.len() != chain.len() {
        out.push(violation(
            id,
            "duplicate-index",
            format!("chain {ci} {chain:?} repeats an index"),
        ));
    } else if chain.windows(2).any(|w| w[0] >= w[1]) {
        out.push(violation(
            id,
            "unordered-chain",
            format!("chain {ci} {chain:?} is not strictly increasing"),
        ));
    }
}

/// Invariant violations of a single article.
pub fn validate_instance(a: &ArticleInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if a.id.is_empty() {
        out.push(violation(
            "<empty id>",
            "empty-id",
            "instance id is empty".into(),
        ));
    }
    if a.evidence_chains.is_empty() {
        out.push(violation(
            &a.id,
            "no-chains",
            "instance has no evidence chain".into(),
        ));
    }
    for (ci, chain) in a.evidence_chains.iter().enumerate() {
        check_chain(&a.id, ci, chain, a.sentences.len(), &mut out);
    }
    out
}

/// All violations across a dataset; empty iff every invariant holds.
pub fn validate_dataset(dataset: &[ArticleInstance]) -> Vec<Violation> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in dataset {
        out.extend(validate_instance(a));
        if !a.id.is_empty() && !seen.insert(a.id.as_str()) {
            out.push(violation(
                &a.id,
                "duplicate-id",
                "id appears more than once".into(),
            ));
        }
    }
    out
}

pub fn validate_chain_instance(c: &ChainInstance) -> Vec<Violation> {
    let id = c.id();
    let mut out = Vec::new();
    let n = c.sentences.len();
    if c.origin_map.len() != n {
        out.push(violation(
            &id,
            "origin-map-length",
            format!(
                "origin_map has {} entries for {n} sentences",
                c.origin_map.len()
            ),
        ));
    }
    let distinct: HashSet<usize> = c.origin_map.iter().copied().collect();
    if distinct.len() != c.origin_map.len() {
        out.push(violation(
            &id,
            "origin-map-injective",
            "origin_map repeats an index".into(),
        ));
    }
    if let Some(&bad) = c.evidence.iter().find(|&&i| i >= n) {
        out.push(violation(
            &id,
            "index-out-of-range",
            format!("evidence index {bad} >= {n}"),
        ));
    }
    for (ci, chain) in c.article_chains.iter().enumerate() {
        check_chain(&id, ci, chain, n, &mut out);
    }
    match c.article_chains.get(c.chain_id) {
        Some(own) if own.iter().copied().collect::<BTreeSet<_>>() == c.evidence => {}
        _ => out.push(violation(
            &id,
            "evidence-chain-mismatch",
            "evidence does not equal the instance's own article chain".into(),
        )),
    }
    if c.evidence.is_empty() {
        out.push(violation(&id, "empty-chain", "evidence is empty".into()));
    }
    out
}
