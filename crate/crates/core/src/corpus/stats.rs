use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{ArticleInstance, VeracityLabel};
use crate::text::word_count;
use crate::{Error, Result};

pub const CHAIN_LENGTH_BUCKETS: [&str; 6] = ["1", "2", "3", "4", "5", "6+"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanSd { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanSd { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub articles: usize,
    pub chains: usize,
    pub words_per_article: MeanSd,
    pub sentences_per_article: MeanSd,
    pub evidence_per_article: MeanSd,
    pub evidence_per_chain: MeanSd,
    pub chains_per_article: MeanSd,
    pub label_counts: BTreeMap<VeracityLabel, usize>,
    /// Percentage of chains per length bucket, in [`CHAIN_LENGTH_BUCKETS`] order.
    pub chain_length_histogram: [f64; 6],
}

/// Table-style corpus statistics: per-article means/SDs, per-chain lengths,
/// label counts.
pub fn compute_stats(dataset: &[ArticleInstance]) -> Result<StatsReport> {
    if dataset.is_empty() {
        return Err(Error::invalid(
            "cannot compute statistics of an empty dataset",
        ));
    }
    let words: Vec<f64> = dataset
        .iter()
        .map(|a| a.sentences.iter().map(|s| word_count(s)).sum::<usize>() as f64)
        .collect();
    let sentences: Vec<f64> = dataset.iter().map(|a| a.sentences.len() as f64).collect();
    let evidence: Vec<f64> = dataset
        .iter()
        .map(|a| a.evidence_union().len() as f64)
        .collect();
    let chain_lens: Vec<usize> = dataset
        .iter()
        .flat_map(|a| a.evidence_chains.iter().map(Vec::len))
        .collect();
    let chains_per: Vec<f64> = dataset
        .iter()
        .map(|a| a.evidence_chains.len() as f64)
        .collect();

    let mut label_counts: BTreeMap<VeracityLabel, usize> =
        VeracityLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for a in dataset {
        *label_counts.entry(a.label).or_default() += 1;
    }

    let mut histogram = [0.0; 6];
    for &len in &chain_lens {
        histogram[len.clamp(1, 6) - 1] += 1.0;
    }
    if !chain_lens.is_empty() {
        for h in &mut histogram {
            *h *= 100.0 / chain_lens.len() as f64;
        }
    }

    Ok(StatsReport {
        articles: dataset.len(),
        chains: chain_lens.len(),
        words_per_article: MeanSd::of(&words),
        sentences_per_article: MeanSd::of(&sentences),
        evidence_per_article: MeanSd::of(&evidence),
        evidence_per_chain: MeanSd::of(&chain_lens.iter().map(|&l| l as f64).collect::<Vec<_>>()),
        chains_per_article: MeanSd::of(&chains_per),
        label_counts,
        chain_length_histogram: histogram,
    })
}
