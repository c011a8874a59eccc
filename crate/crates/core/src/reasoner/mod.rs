//! Single-step and graph reasoning models over sentence nodes.
//!
//! Each node's summary vector feeds a label head (per-node distribution over
//! the three labels) and an importance head (a softmax across nodes). The
//! claim-level label distribution is the importance-weighted mixture of the
//! per-node distributions. Graph models first apply `L` extra-hop attention
//! layers to the summary vectors.

mod hop;
mod model;
mod prediction;

pub use hop::{extra_hop_layer, node_heads, HopLayerWeights, HopStackConfig, MAX_HOPS};
pub use model::{forward, single_step, Model, ModelConfig, TapeOutput};
pub use prediction::{Prediction, PredictionRecord};

use crate::{Error, Result};

/// Default number of evidence sentences returned.
pub const DEFAULT_TOP_K: usize = 6;

/// The `min(k, n)` most important node indices, ascending. Ties prefer the
/// lower index.
pub fn select_evidence(importance: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Importance-weighted mixture of per-node label distributions.
pub fn aggregate_label(node_dists: &[[f64; 3]], importance: &[f64]) -> Result<[f64; 3]> {
    if node_dists.len() != importance.len() {
        return Err(Error::invalid(format!(
            "{} node distributions but {} importance weights",
            node_dists.len(),
            importance.len()
        )));
    }
    let mut out = [0.0; 3];
    for (d, w) in node_dists.iter().zip(importance) {
        for c in 0..3 {
            out[c] += w * d[c];
        }
    }
    Ok(out)
}
