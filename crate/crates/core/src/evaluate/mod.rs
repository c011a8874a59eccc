//! Metrics and analyses over model predictions.

mod agreement;
mod attention;
mod divergence;
mod stats;

pub use agreement::{
    agreement, fleiss_kappa, krippendorff_alpha, Agreement, AgreementMode, AnnotationRecord,
};
pub use attention::{attention_ratios, AttentionRatios, GraphAttention};
pub use divergence::{js_divergence, js_divergence_dists, term_distribution};
pub use stats::welch_ttest;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::str::FromStr;

use crate::corpus::{Example, VeracityLabel};
use crate::reasoner::{select_evidence, Prediction};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Macro-F1 over all three labels and accuracy. A label with no support and
/// no predictions scores F1 = 0.
pub fn label_metrics(predicted: &[VeracityLabel], gold: &[VeracityLabel]) -> Result<LabelMetrics> {
    if predicted.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::invalid("label metrics need at least one instance"));
    }
    let mut tp = [0usize; 3];
    let mut pred_n = [0usize; 3];
    let mut gold_n = [0usize; 3];
    for (p, g) in predicted.iter().zip(gold) {
        pred_n[p.index()] += 1;
        gold_n[g.index()] += 1;
        if p == g {
            tp[p.index()] += 1;
        }
    }
    let f1 = |c: usize| {
        if tp[c] == 0 {
            return 0.0;
        }
        let p = tp[c] as f64 / pred_n[c] as f64;
        let r = tp[c] as f64 / gold_n[c] as f64;
        2.0 * p * r / (p + r)
    };
    Ok(LabelMetrics {
        macro_f1: (0..3).map(f1).sum::<f64>() / 3.0,
        accuracy: tp.iter().sum::<usize>() as f64 / gold.len() as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision, recall and F1 of one predicted set against one gold set.
pub fn evidence_prf(predicted: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> (f64, f64, f64) {
    let hit = predicted.intersection(gold).count() as f64;
    let p = if predicted.is_empty() {
        0.0
    } else {
        hit / predicted.len() as f64
    };
    let r = if gold.is_empty() {
        0.0
    } else {
        hit / gold.len() as f64
    };
    let f = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f)
}

/// Per-instance P/R/F1 against the union of the instance's chains,
/// macro-averaged over instances.
pub fn evidence_metrics(
    predicted: &[Vec<usize>],
    gold_chains: &[Vec<Vec<usize>>],
) -> Result<EvidenceMetrics> {
    if predicted.len() != gold_chains.len() {
        return Err(Error::invalid(format!(
            "{} evidence predictions for {} gold instances",
            predicted.len(),
            gold_chains.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid(
            "evidence metrics need at least one instance",
        ));
    }
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for (pred, chains) in predicted.iter().zip(gold_chains) {
        let pred: BTreeSet<usize> = pred.iter().copied().collect();
        let gold: BTreeSet<usize> = chains.iter().flatten().copied().collect();
        let (p, r, f) = evidence_prf(&pred, &gold);
        sp += p;
        sr += r;
        sf += f;
    }
    let n = predicted.len() as f64;
    Ok(EvidenceMetrics {
        f1: sf / n,
        precision: sp / n,
        recall: sr / n,
    })
}

/// True when some gold chain is contained in `evidence`.
pub fn chain_retrieved(evidence: &[usize], chains: &[Vec<usize>]) -> bool {
    let set: BTreeSet<usize> = evidence.iter().copied().collect();
    chains.iter().any(|c| c.iter().all(|i| set.contains(i)))
}

/// Fraction of instances with the correct label and at least one full
/// chain inside the predicted evidence.
pub fn fever_score(predictions: &[Prediction], gold: &[Example]) -> Result<f64> {
    check_lengths(predictions, gold)?;
    let hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.label() == g.label && chain_retrieved(&p.evidence, &g.chains))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

fn check_lengths(predictions: &[Prediction], gold: &[Example]) -> Result<()> {
    if predictions.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold instances",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::invalid("no instances to evaluate"));
    }
    Ok(())
}

/// Full metric set over a group of instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: usize,
    pub label_macro_f1: f64,
    pub label_accuracy: f64,
    pub evidence_f1: f64,
    pub evidence_precision: f64,
    pub evidence_recall: f64,
    pub fever_score: f64,
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buckets: Vec<BucketReport>,
}

impl MetricsReport {
    /// Scores `predictions` as given; `k` is recorded, not applied.
    pub fn compute(predictions: &[Prediction], gold: &[Example], k: Option<usize>) -> Result<Self> {
        check_lengths(predictions, gold)?;
        let labels = label_metrics(
            &predictions
                .iter()
                .map(Prediction::label)
                .collect::<Vec<_>>(),
            &gold.iter().map(|g| g.label).collect::<Vec<_>>(),
        )?;
        let evidence = evidence_metrics(
            &predictions
                .iter()
                .map(|p| p.evidence.clone())
                .collect::<Vec<_>>(),
            &gold.iter().map(|g| g.chains.clone()).collect::<Vec<_>>(),
        )?;
        Ok(MetricsReport {
            count: gold.len(),
            label_macro_f1: labels.macro_f1,
            label_accuracy: labels.accuracy,
            evidence_f1: evidence.f1,
            evidence_precision: evidence.precision,
            evidence_recall: evidence.recall,
            fever_score: fever_score(predictions, gold)?,
            k,
            buckets: Vec::new(),
        })
    }
}

/// Re-selects each prediction's evidence at top-`k` from its importance.
pub fn with_top_k(predictions: &[Prediction], k: usize) -> Vec<Prediction> {
    predictions
        .iter()
        .map(|p| Prediction {
            evidence: select_evidence(&p.importance, k),
            ..p.clone()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub evidence_f1: f64,
    pub evidence_precision: f64,
    pub evidence_recall: f64,
    pub fever_score: f64,
}

/// Evidence metrics for each `k`, re-running evidence selection.
pub fn sweep_top_k(
    predictions: &[Prediction],
    gold: &[Example],
    ks: &[usize],
) -> Result<Vec<SweepRow>> {
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::invalid("k must be at least 1"));
            }
            let m = MetricsReport::compute(&with_top_k(predictions, k), gold, Some(k))?;
            Ok(SweepRow {
                k,
                evidence_f1: m.evidence_f1,
                evidence_precision: m.evidence_precision,
                evidence_recall: m.evidence_recall,
                fever_score: m.fever_score,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketRule {
    ChainLength1or2Vs3plus,
    NeOverlapLt40VsGe40,
    ConfidenceLt90VsGe90,
}

impl BucketRule {
    pub fn bucket_names(self) -> [&'static str; 2] {
        match self {
            Self::ChainLength1or2Vs3plus => ["chain length 1-2", "chain length 3+"],
            Self::NeOverlapLt40VsGe40 => ["NE overlap < 40%", "NE overlap >= 40%"],
            Self::ConfidenceLt90VsGe90 => ["confidence < 90%", "confidence >= 90%"],
        }
    }
}

impl FromStr for BucketRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain_length_1or2_vs_3plus" | "chain-length" => Ok(Self::ChainLength1or2Vs3plus),
            "ne_overlap_lt40_vs_ge40" | "ne-overlap" => Ok(Self::NeOverlapLt40VsGe40),
            "confidence_lt90_vs_ge90" | "confidence" => Ok(Self::ConfidenceLt90VsGe90),
            other => Err(Error::Config(format!("unknown bucket rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub name: String,
    pub count: usize,
    /// `None` for an empty bucket.
    pub metrics: Option<Box<MetricsReport>>,
}

/// Which bucket (0 or 1) each instance falls in.
///
/// Chain length uses the instance's shortest gold chain; `ne_overlap` must be
/// supplied for the NE-overlap rule. Upper buckets have closed lower bounds.
pub fn assign_buckets(
    rule: BucketRule,
    predictions: &[Prediction],
    gold: &[Example],
    ne_overlap: Option<&[f64]>,
) -> Result<Vec<usize>> {
    check_lengths(predictions, gold)?;
    match rule {
        BucketRule::ChainLength1or2Vs3plus => gold
            .iter()
            .map(|g| {
                let len = g
                    .chains
                    .iter()
                    .map(Vec::len)
                    .min()
                    .ok_or_else(|| Error::Validation {
                        id: g.id.clone(),
                        message: "no evidence chain".into(),
                    })?;
                Ok(usize::from(len >= 3))
            })
            .collect(),
        BucketRule::NeOverlapLt40VsGe40 => {
            let overlap = ne_overlap
                .ok_or_else(|| Error::Config("NE-overlap buckets need overlap values".into()))?;
            if overlap.len() != gold.len() {
                return Err(Error::invalid(
                    "one NE-overlap value per instance is required",
                ));
            }
            Ok(overlap.iter().map(|&o| usize::from(o >= 0.40)).collect())
        }
        BucketRule::ConfidenceLt90VsGe90 => Ok(predictions
            .iter()
            .map(|p| usize::from(p.confidence() >= 0.90))
            .collect()),
    }
}

/// Metrics recomputed on each bucket's subset.
pub fn bucketed_report(
    rule: BucketRule,
    predictions: &[Prediction],
    gold: &[Example],
    ne_overlap: Option<&[f64]>,
    k: Option<usize>,
) -> Result<Vec<BucketReport>> {
    let assign = assign_buckets(rule, predictions, gold, ne_overlap)?;
    rule.bucket_names()
        .iter()
        .enumerate()
        .map(|(b, name)| {
            let idx: Vec<usize> = (0..gold.len()).filter(|&i| assign[i] == b).collect();
            let metrics = if idx.is_empty() {
                None
            } else {
                let p: Vec<Prediction> = idx.iter().map(|&i| predictions[i].clone()).collect();
                let g: Vec<Example> = idx.iter().map(|&i| gold[i].clone()).collect();
                Some(Box::new(MetricsReport::compute(&p, &g, k)?))
            };
            Ok(BucketReport {
                name: name.to_string(),
                count: idx.len(),
                metrics,
            })
        })
        .collect()
}
