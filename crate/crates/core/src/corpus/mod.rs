//! Canonical data model and dataset handling.
//!
//! Every source format is translated into [`ArticleInstance`] records (one
//! JSON object per line). Training operates on [`ChainInstance`]s, obtained by
//! splitting each article into one example per annotated evidence chain.

mod import;
mod io;
mod pylit;
mod split;
mod stats;
mod validate;

pub use import::{import_dataset, AdapterConfig, ImportReport, SourceFormat};
pub use io::{
    fingerprint, load_canonical, load_chain_instances, load_examples, load_records,
    parse_canonical, read_jsonl, to_canonical_line, write_canonical, write_jsonl,
};
pub use split::{make_dev_split, split_chains};
pub use stats::{compute_stats, MeanSd, StatsReport, CHAIN_LENGTH_BUCKETS};
pub use validate::{validate_chain_instance, validate_dataset, validate_instance, Violation};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VeracityLabel {
    False,
    HalfTrue,
    True,
}

impl VeracityLabel {
    /// Label order used for indexing and tie-breaking.
    pub const ALL: [VeracityLabel; 3] = [Self::False, Self::HalfTrue, Self::True];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::False => "false",
            Self::HalfTrue => "half-true",
            Self::True => "true",
        }
    }
}

impl fmt::Display for VeracityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VeracityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "false" => Ok(Self::False),
            "half-true" => Ok(Self::HalfTrue),
            "true" => Ok(Self::True),
            other => Err(Error::UnknownLabel(vec![other.to_string()])),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// One claim with its ruling article and annotated evidence chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleInstance {
    pub id: String,
    pub claim: String,
    #[serde(default)]
    pub speaker: String,
    pub label: VeracityLabel,
    pub sentences: Vec<String>,
    pub evidence_chains: Vec<Vec<usize>>,
    #[serde(default)]
    pub split: Split,
}

impl ArticleInstance {
    pub fn evidence_union(&self) -> BTreeSet<usize> {
        self.evidence_chains.iter().flatten().copied().collect()
    }
}

/// A training unit holding exactly one of its article's chains as evidence.
///
/// `article_chains` carries all of the parent article's chains in retained
/// indices; `article_chains[chain_id]` is the instance's own evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainInstance {
    pub article_id: String,
    pub chain_id: usize,
    pub claim: String,
    #[serde(default)]
    pub speaker: String,
    pub label: VeracityLabel,
    pub sentences: Vec<String>,
    pub evidence: BTreeSet<usize>,
    pub origin_map: Vec<usize>,
    pub article_chains: Vec<Vec<usize>>,
}

impl ChainInstance {
    pub fn id(&self) -> String {
        format!("{}#{}", self.article_id, self.chain_id)
    }

    pub fn evidence_union(&self) -> BTreeSet<usize> {
        self.article_chains.iter().flatten().copied().collect()
    }
}

/// Model-facing view of either record type: sentences plus the gold chains
/// used for scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub claim: String,
    pub speaker: String,
    pub label: VeracityLabel,
    pub sentences: Vec<String>,
    pub chains: Vec<Vec<usize>>,
    pub origin_map: Vec<usize>,
}

impl Example {
    /// Union of all gold chains; the target set for retrieval metrics.
    pub fn gold_evidence(&self) -> BTreeSet<usize> {
        self.chains.iter().flatten().copied().collect()
    }
}

impl From<&ArticleInstance> for Example {
    fn from(a: &ArticleInstance) -> Self {
        Example {
            id: a.id.clone(),
            claim: a.claim.clone(),
            speaker: a.speaker.clone(),
            label: a.label,
            sentences: a.sentences.clone(),
            chains: a.evidence_chains.clone(),
            origin_map: (0..a.sentences.len()).collect(),
        }
    }
}

impl From<&ChainInstance> for Example {
    fn from(c: &ChainInstance) -> Self {
        Example {
            id: c.id(),
            claim: c.claim.clone(),
            speaker: c.speaker.clone(),
            label: c.label,
            sentences: c.sentences.clone(),
            chains: vec![c.evidence.iter().copied().collect()],
            origin_map: c.origin_map.clone(),
        }
    }
}

/// Contents of a dataset file: whole articles or split chain instances.
#[derive(Clone, Debug, PartialEq)]
pub enum Records {
    Articles(Vec<ArticleInstance>),
    Chains(Vec<ChainInstance>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Articles(a) => a.len(),
            Records::Chains(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn examples(&self) -> Vec<Example> {
        match self {
            Records::Articles(a) => a.iter().map(Example::from).collect(),
            Records::Chains(c) => c.iter().map(Example::from).collect(),
        }
    }

    /// Writes the records back in their own format.
    pub fn write(&self, path: &std::path::Path) -> crate::Result<()> {
        match self {
            Records::Articles(a) => write_canonical(path, a),
            Records::Chains(c) => write_jsonl(path, c),
        }
    }
}
