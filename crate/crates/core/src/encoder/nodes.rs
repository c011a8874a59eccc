use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::corpus::Example;
use crate::{Error, Result};

/// Default tokens per node.
pub const DEFAULT_MAX_NODE_LEN: usize = 128;

/// Smallest accepted `max_node_len`.
pub const MIN_NODE_LEN: usize = 8;

/// One (claim, speaker, sentence) token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub ids: Vec<u32>,
    /// 0 for the claim/speaker segment, 1 for the sentence segment.
    pub segments: Vec<u8>,
    /// Sentence index in the original article.
    pub origin: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBatch {
    pub nodes: Vec<Node>,
    pub max_node_len: usize,
}

impl NodeBatch {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Builds one node per sentence:
/// `[CLS] claim [SEP] speaker [SEP]` then `([unusedJ])? sentence [SEP]`.
///
/// Over-long nodes lose sentence tokens from the end first, then speaker
/// tokens, then claim tokens; special tokens are kept. The reserved token
/// index is the sentence's position `j`, clamped to the last reserved token.
pub fn build_nodes(
    ex: &Example,
    tok: &Tokenizer,
    max_node_len: usize,
    sentence_ids: bool,
) -> Result<NodeBatch> {
    if max_node_len < MIN_NODE_LEN {
        return Err(Error::Config(format!(
            "max_node_len {max_node_len} is below {MIN_NODE_LEN}"
        )));
    }
    if sentence_ids && tok.reserved_count() == 0 {
        return Err(Error::Config(
            "sentence ids need [unusedN] tokens in the vocabulary".into(),
        ));
    }
    let claim = tok.encode(&ex.claim);
    let speaker = tok.encode(&ex.speaker);
    let (cls, sep) = (tok.cls_id(), tok.sep_id());
    let nodes = ex
        .sentences
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut sent = tok.encode(s);
            let mut claim = claim.clone();
            let mut speaker = speaker.clone();
            let fixed = 4 + usize::from(sentence_ids);
            while fixed + claim.len() + speaker.len() + sent.len() > max_node_len {
                if sent.pop().is_none() && speaker.pop().is_none() {
                    claim.pop();
                }
            }
            let mut ids = Vec::with_capacity(max_node_len);
            ids.push(cls);
            ids.extend(&claim);
            ids.push(sep);
            ids.extend(&speaker);
            ids.push(sep);
            let a_len = ids.len();
            if sentence_ids {
                let n = j.min(tok.reserved_count() - 1);
                ids.push(tok.reserved_id(n).expect("index clamped to reserved range"));
            }
            ids.extend(&sent);
            ids.push(sep);
            let mut segments = vec![0u8; a_len];
            segments.resize(ids.len(), 1);
            Node {
                ids,
                segments,
                origin: ex.origin_map.get(j).copied().unwrap_or(j),
            }
        })
        .collect();
    Ok(NodeBatch {
        nodes,
        max_node_len,
    })
}
