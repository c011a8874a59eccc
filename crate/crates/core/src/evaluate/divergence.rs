use std::collections::BTreeMap;

use crate::text::content_tokens;
use crate::{Error, Result};

/// Relative unigram frequencies after lowercasing and stop-word removal.
pub fn term_distribution<S: AsRef<str>>(texts: &[S]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in texts {
        for tok in content_tokens(t.as_ref()) {
            *counts.entry(tok).or_default() += 1.0;
        }
    }
    let total: f64 = counts.values().sum();
    counts.values_mut().for_each(|c| *c /= total);
    counts
}

fn kl_to_mean(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / (0.5 * (p + q))).log2()
    }
}

/// Base-2 Jensen-Shannon divergence of two distributions over the same support.
pub fn js_divergence_dists(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid("distributions differ in length"));
    }
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| 0.5 * kl_to_mean(a, b) + 0.5 * kl_to_mean(b, a))
        .sum();
    Ok(js.clamp(0.0, 1.0))
}

/// Jensen-Shannon divergence between the unigram distributions of two corpora.
pub fn js_divergence<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    let pa = term_distribution(a);
    let pb = term_distribution(b);
    if pa.is_empty() || pb.is_empty() {
        return Err(Error::invalid("corpus has no terms after preprocessing"));
    }
    let vocab: std::collections::BTreeSet<&String> = pa.keys().chain(pb.keys()).collect();
    let p: Vec<f64> = vocab
        .iter()
        .map(|w| pa.get(*w).copied().unwrap_or(0.0))
        .collect();
    let q: Vec<f64> = vocab
        .iter()
        .map(|w| pb.get(*w).copied().unwrap_or(0.0))
        .collect();
    js_divergence_dists(&p, &q)
}
