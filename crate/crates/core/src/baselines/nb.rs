use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::corpus::VeracityLabel;
use crate::{Error, Result};

/// Multinomial Naive Bayes with additive smoothing over the three labels.
///
/// Labels absent from training get zero posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub alpha: f64,
    /// `ln P(c)`, `None` for labels absent from training.
    log_prior: [Option<f64>; 3],
    /// `ln P(f | c)` per label, dense over features.
    log_likelihood: [Vec<f64>; 3],
}

impl MultinomialNb {
    pub fn fit(vectors: &[SparseVector], labels: &[VeracityLabel], alpha: f64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("naive bayes: empty training set"));
        }
        if vectors.len() != labels.len() {
            return Err(Error::invalid(
                "naive bayes: vectors and labels differ in length",
            ));
        }
        let dim = vectors[0].dim;
        let mut counts = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        let mut class_n = [0usize; 3];
        for (v, l) in vectors.iter().zip(labels) {
            if v.dim != dim {
                return Err(Error::invalid(
                    "naive bayes: inconsistent feature dimension",
                ));
            }
            class_n[l.index()] += 1;
            for &(i, x) in &v.entries {
                counts[l.index()][i] += x;
            }
        }
        let n = vectors.len() as f64;
        let mut log_prior = [None; 3];
        let mut log_likelihood: [Vec<f64>; 3] = Default::default();
        for c in 0..3 {
            if class_n[c] == 0 {
                continue;
            }
            log_prior[c] = Some((class_n[c] as f64 / n).ln());
            let total: f64 = counts[c].iter().sum::<f64>() + alpha * dim as f64;
            log_likelihood[c] = counts[c]
                .iter()
                .map(|x| ((x + alpha) / total).ln())
                .collect();
        }
        Ok(MultinomialNb {
            alpha,
            log_prior,
            log_likelihood,
        })
    }

    fn joint_log(&self, v: &SparseVector) -> [Option<f64>; 3] {
        let mut out = [None; 3];
        for c in 0..3 {
            if let Some(prior) = self.log_prior[c] {
                let ll: f64 = v
                    .entries
                    .iter()
                    .map(|&(i, x)| x * self.log_likelihood[c][i])
                    .sum();
                out[c] = Some(prior + ll);
            }
        }
        out
    }

    pub fn predict_proba(&self, v: &SparseVector) -> [f64; 3] {
        let joint = self.joint_log(v);
        let max = joint
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = [0.0; 3];
        for c in 0..3 {
            if let Some(j) = joint[c] {
                out[c] = (j - max).exp();
            }
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= s);
        out
    }

    /// Arg-max posterior; ties go to the earlier label.
    pub fn predict(&self, v: &SparseVector) -> VeracityLabel {
        let joint = self.joint_log(v);
        let mut best: Option<(usize, f64)> = None;
        for (c, j) in joint.iter().enumerate() {
            if let Some(j) = *j {
                if best.is_none_or(|(_, b)| j > b) {
                    best = Some((c, j));
                }
            }
        }
        VeracityLabel::ALL[best.expect("at least one class").0]
    }
}
