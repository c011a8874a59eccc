//! Node construction and contextual encoding.
//!
//! Each article sentence becomes a node `[CLS] claim [SEP] speaker [SEP]
//! sentence [SEP]`; the encoder maps every node to a sequence of vectors
//! whose first row is the node summary.

mod nodes;
mod tokenizer;
mod transformer;

pub use nodes::{build_nodes, Node, NodeBatch, DEFAULT_MAX_NODE_LEN, MIN_NODE_LEN};
pub use tokenizer::{basic_tokenize, Tokenizer, RESERVED_TOKENS, VOCAB_HEADER};
pub use transformer::{Encoder, EncoderConfig, INIT_STD};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::autograd::{ParamStore, Tape};
use crate::{Error, Result};

/// Environment variable naming the asset cache (pretrained weights).
pub const ASSET_DIR_ENV: &str = "HOPCHECK_ASSET_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    #[serde(rename = "tiny-trainable", alias = "tiny")]
    TinyTrainable,
    #[serde(rename = "pretrained-12x768")]
    Pretrained12x768,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Self::TinyTrainable => "tiny-trainable",
            Self::Pretrained12x768 => "pretrained-12x768",
        }
    }

    /// Directory holding converted pretrained weights:
    /// `$HOPCHECK_ASSET_DIR/pretrained-12x768`.
    pub fn asset_dir(self) -> Result<PathBuf> {
        let root = std::env::var_os(ASSET_DIR_ENV).ok_or_else(|| {
            Error::Config(format!(
                "{ASSET_DIR_ENV} is not set; {} weights cannot be located",
                self.name()
            ))
        })?;
        Ok(PathBuf::from(root).join(self.name()))
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" | "tiny-trainable" => Ok(Self::TinyTrainable),
            "pretrained-12x768" | "pretrained" => Ok(Self::Pretrained12x768),
            other => Err(Error::Config(format!("unknown encoder backend {other:?}"))),
        }
    }
}

/// What a backend promises to the rest of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendContract {
    pub name: String,
    pub hidden: usize,
    pub max_sequence_len: usize,
    pub trainable: bool,
}

impl Encoder {
    pub fn contract(&self, backend: Backend) -> BackendContract {
        BackendContract {
            name: backend.name().into(),
            hidden: self.config.hidden,
            max_sequence_len: self.config.max_positions,
            trainable: true,
        }
    }
}

const PRETRAINED_FORMAT: &str = "hopcheck-encoder";

#[derive(Deserialize)]
struct PretrainedMeta {
    format: String,
    version: u32,
    config: EncoderConfig,
    params: Vec<crate::autograd::ParamMeta>,
}

/// Loads converted weights (`encoder.json`, `encoder.bin`, `vocab.txt`) from `dir`.
pub fn load_pretrained(dir: &std::path::Path) -> Result<(Tokenizer, Encoder, ParamStore)> {
    let meta_path = dir.join("encoder.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: PretrainedMeta = serde_json::from_str(&text)?;
    if meta.format != PRETRAINED_FORMAT || meta.version != 1 {
        return Err(Error::Config(format!(
            "{}: unsupported encoder format {} v{}",
            meta_path.display(),
            meta.format,
            meta.version
        )));
    }
    let store = ParamStore::read_blob(&meta.params, &dir.join("encoder.bin"))?;
    let tokenizer = Tokenizer::load(&dir.join("vocab.txt"))?;
    if tokenizer.len() != meta.config.vocab_size {
        return Err(Error::Config(format!(
            "vocabulary has {} tokens but the encoder expects {}",
            tokenizer.len(),
            meta.config.vocab_size
        )));
    }
    let encoder = Encoder::bind(&store, meta.config)?;
    Ok((tokenizer, encoder, store))
}

/// Per-node vector sequences; row 0 of each is the node summary.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRepresentations {
    pub nodes: Vec<Array2<f64>>,
}

impl NodeRepresentations {
    pub fn hidden(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.ncols())
    }

    /// `nodes x hidden` matrix of summary vectors.
    pub fn summaries(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nodes.len(), self.hidden()));
        for (i, n) in self.nodes.iter().enumerate() {
            out.row_mut(i).assign(&n.row(0));
        }
        out
    }
}

/// Encodes every node of `batch` (evaluation mode).
pub fn encode_nodes(
    encoder: &Encoder,
    params: &ParamStore,
    batch: &NodeBatch,
) -> Result<NodeRepresentations> {
    for (i, n) in batch.nodes.iter().enumerate() {
        encoder.check_node(i, n)?;
    }
    let nodes = batch
        .nodes
        .iter()
        .map(|n| {
            let mut tape = Tape::new(params);
            let out = encoder.encode(&mut tape, n);
            tape.value(out).clone()
        })
        .collect();
    Ok(NodeRepresentations { nodes })
}
