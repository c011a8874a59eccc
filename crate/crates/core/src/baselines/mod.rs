//! Reference systems: a random guesser and TF-IDF features with Naive Bayes.

mod nb;
mod tfidf;

pub use nb::MultinomialNb;
pub use tfidf::{ngrams, SparseVector, TfidfFeatureSpace, NGRAM_RANGE};

use rand::seq::index::sample;
use rand::Rng as _;

use crate::corpus::{Example, VeracityLabel};
use crate::reasoner::Prediction;
use crate::rng::Rng;

/// Upper bound of the random evidence-set size.
pub const RANDOM_MAX_EVIDENCE: usize = 10;

/// Uniform label, `k ~ U[1, 10]` (capped at the sentence count) distinct
/// evidence sentences, uniform importance.
pub fn random_predict(n_sentences: usize, rng: &mut Rng) -> Prediction {
    let k = rng.random_range(1..=RANDOM_MAX_EVIDENCE).min(n_sentences);
    let mut evidence = sample(rng, n_sentences, k).into_vec();
    evidence.sort_unstable();
    let label = rng.random_range(0..3);
    let mut label_dist = [0.0; 3];
    label_dist[label] = 1.0;
    let importance = if n_sentences == 0 {
        Vec::new()
    } else {
        vec![1.0 / n_sentences as f64; n_sentences]
    };
    Prediction {
        label_dist,
        importance,
        evidence,
        hop_attention: None,
    }
}

/// Document side of the TF-IDF features: the article sentences joined by spaces.
pub fn document_text(ex: &Example) -> String {
    ex.sentences.join(" ")
}

/// A fitted TF-IDF + Naive Bayes pipeline.
#[derive(Clone, Debug)]
pub struct TfidfNb {
    pub space: TfidfFeatureSpace,
    pub model: MultinomialNb,
}

impl TfidfNb {
    pub fn fit(train: &[Example]) -> crate::Result<Self> {
        let claims: Vec<&str> = train.iter().map(|e| e.claim.as_str()).collect();
        let docs: Vec<String> = train.iter().map(document_text).collect();
        let docs_ref: Vec<&str> = docs.iter().map(String::as_str).collect();
        let space = TfidfFeatureSpace::fit(&claims, &docs_ref);
        let vectors: Vec<SparseVector> = claims
            .iter()
            .zip(&docs_ref)
            .map(|(c, d)| space.vectorize(c, d))
            .collect();
        let labels: Vec<VeracityLabel> = train.iter().map(|e| e.label).collect();
        let model = MultinomialNb::fit(&vectors, &labels, 1.0)?;
        Ok(TfidfNb { space, model })
    }

    /// Posterior as label distribution; no evidence is retrieved.
    pub fn predict(&self, ex: &Example) -> Prediction {
        let v = self.space.vectorize(&ex.claim, &document_text(ex));
        let n = ex.sentences.len();
        Prediction {
            label_dist: self.model.predict_proba(&v),
            importance: if n == 0 {
                Vec::new()
            } else {
                vec![1.0 / n as f64; n]
            },
            evidence: Vec::new(),
            hop_attention: None,
        }
    }
}
