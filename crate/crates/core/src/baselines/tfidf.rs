use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::text::{content_tokens, STOPWORDS_ID};
use crate::{Error, Result};

/// Word n-gram orders used for both sides.
pub const NGRAM_RANGE: (usize, usize) = (2, 3);

const FORMAT: &str = "hopcheck-tfidf";
const VERSION: u32 = 1;

/// Sparse feature vector with ascending, unique indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }
}

/// Stop-word-filtered word n-grams of `text`, n in [`NGRAM_RANGE`].
pub fn ngrams(text: &str) -> Vec<String> {
    let toks = content_tokens(text);
    let mut out = Vec::new();
    for n in NGRAM_RANGE.0..=NGRAM_RANGE.1 {
        for w in toks.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Side {
    vocab: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Side {
    fn fit(texts: &[&str]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            let uniq: BTreeSet<String> = ngrams(t).into_iter().collect();
            for g in uniq {
                *df.entry(g).or_default() += 1;
            }
        }
        let d = texts.len() as f64;
        let (vocab, idf) = df
            .into_iter()
            .map(|(g, n)| (g, ((1.0 + d) / (1.0 + n as f64)).ln() + 1.0))
            .unzip();
        let mut side = Side {
            vocab,
            idf,
            index: BTreeMap::new(),
        };
        side.reindex();
        side
    }

    fn reindex(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
    }

    /// L2-normalized tf·idf entries, offset by `base`.
    fn weights(&self, text: &str, base: usize) -> Vec<(usize, f64)> {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for g in ngrams(text) {
            if let Some(&i) = self.index.get(&g) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        entries.into_iter().map(|(i, v)| (base + i, v)).collect()
    }
}

/// Fitted claim-side and document-side n-gram vocabularies with IDF tables.
///
/// `idf(g) = ln((1 + D) / (1 + df(g))) + 1`; each side is L2-normalized
/// independently before concatenation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfFeatureSpace {
    format: String,
    version: u32,
    pub stopwords: String,
    pub ngram_range: (usize, usize),
    claim: Side,
    doc: Side,
}

impl TfidfFeatureSpace {
    pub fn fit(claims: &[&str], documents: &[&str]) -> Self {
        TfidfFeatureSpace {
            format: FORMAT.into(),
            version: VERSION,
            stopwords: STOPWORDS_ID.into(),
            ngram_range: NGRAM_RANGE,
            claim: Side::fit(claims),
            doc: Side::fit(documents),
        }
    }

    pub fn claim_vocab(&self) -> &[String] {
        &self.claim.vocab
    }

    pub fn doc_vocab(&self) -> &[String] {
        &self.doc.vocab
    }

    pub fn claim_idf(&self) -> &[f64] {
        &self.claim.idf
    }

    pub fn doc_idf(&self) -> &[f64] {
        &self.doc.idf
    }

    pub fn dim(&self) -> usize {
        self.claim.vocab.len() + self.doc.vocab.len()
    }

    /// Claim features in the first `|claim_vocab|` slots, document features after.
    pub fn vectorize(&self, claim: &str, document: &str) -> SparseVector {
        let mut entries = self.claim.weights(claim, 0);
        entries.extend(self.doc.weights(document, self.claim.vocab.len()));
        SparseVector {
            dim: self.dim(),
            entries,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut space: TfidfFeatureSpace = serde_json::from_str(&text)?;
        if space.format != FORMAT || space.version != VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported feature space {} v{}",
                path.display(),
                space.format,
                space.version
            )));
        }
        space.claim.reindex();
        space.doc.reindex();
        Ok(space)
    }
}
