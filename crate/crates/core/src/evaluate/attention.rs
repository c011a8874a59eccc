use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One graph's attention matrix (row = source node) and evidence mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAttention {
    pub attention: Vec<Vec<f64>>,
    pub evidence: Vec<bool>,
}

/// Mean attention-to-graph-average ratios grouped by source→target type.
/// A group with no edges is `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttentionRatios {
    pub evi_to_non_evi: Option<f64>,
    pub evi_to_evi: Option<f64>,
    pub non_evi_to_non_evi: Option<f64>,
    pub non_evi_to_evi: Option<f64>,
    /// Edge counts in the order of the fields above.
    pub edges: [usize; 4],
}

/// Edge ratios `α_uv / mean(α)` per graph, averaged over all edges of all
/// graphs in each group.
pub fn attention_ratios(graphs: &[GraphAttention]) -> Result<AttentionRatios> {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for (gi, g) in graphs.iter().enumerate() {
        let n = g.evidence.len();
        if g.attention.len() != n || g.attention.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "graph {gi}: attention shape does not match mask length {n}"
            )));
        }
        if n == 0 {
            continue;
        }
        let mean = g.attention.iter().flatten().sum::<f64>() / (n * n) as f64;
        for (u, row) in g.attention.iter().enumerate() {
            for (v, a) in row.iter().enumerate() {
                let group = match (g.evidence[u], g.evidence[v]) {
                    (true, false) => 0,
                    (true, true) => 1,
                    (false, false) => 2,
                    (false, true) => 3,
                };
                sums[group] += a / mean;
                counts[group] += 1;
            }
        }
    }
    let avg = |i: usize| (counts[i] > 0).then(|| sums[i] / counts[i] as f64);
    Ok(AttentionRatios {
        evi_to_non_evi: avg(0),
        evi_to_evi: avg(1),
        non_evi_to_non_evi: avg(2),
        non_evi_to_evi: avg(3),
        edges: counts,
    })
}
