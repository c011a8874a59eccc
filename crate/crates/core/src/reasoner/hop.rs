use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::{Error, Result};

/// Maximum supported number of hop layers.
pub const MAX_HOPS: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopStackConfig {
    pub num_hops: usize,
    /// Query/key projection size per head.
    pub hidden: usize,
    pub heads: usize,
}

impl Default for HopStackConfig {
    fn default() -> Self {
        HopStackConfig {
            num_hops: 3,
            hidden: 64,
            heads: 1,
        }
    }
}

impl HopStackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_hops > MAX_HOPS {
            return Err(Error::Config(format!(
                "{} hop layers requested; at most {MAX_HOPS} are supported",
                self.num_hops
            )));
        }
        if self.hidden == 0 || self.heads == 0 {
            return Err(Error::Config(
                "hop hidden size and head count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Plain-array weights of one hop layer, for analysis and reference use.
#[derive(Clone, Debug, PartialEq)]
pub struct HopLayerWeights {
    /// Per head: query `(W: H x d, b: 1 x d)`.
    pub query: Vec<(Array2<f64>, Array2<f64>)>,
    /// Per head: key `(W: H x d, b: 1 x d)`.
    pub key: Vec<(Array2<f64>, Array2<f64>)>,
    /// `(W: H x H, b: 1 x H)`.
    pub value: (Array2<f64>, Array2<f64>),
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// One graph-attention hop over a fully connected graph with self-edges.
///
/// For each head, `α = softmax_rows(q kᵀ / √d)` with `q = S W_q + b_q` and
/// `k = S W_k + b_k`; heads are averaged. The update is
/// `ELU(α (S W_v + b_v))`. Returns the new summaries and `α`.
pub fn extra_hop_layer(summaries: &Array2<f64>, w: &HopLayerWeights) -> (Array2<f64>, Array2<f64>) {
    let n = summaries.nrows();
    let mut alpha = Array2::<f64>::zeros((n, n));
    for ((wq, bq), (wk, bk)) in w.query.iter().zip(&w.key) {
        let q = summaries.dot(wq) + bq;
        let k = summaries.dot(wk) + bk;
        let scale = 1.0 / (wq.ncols() as f64).sqrt();
        let mut s = q.dot(&k.t()) * scale;
        for mut row in s.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let z = row.sum();
            row.mapv_inplace(|v| v / z);
        }
        alpha += &s;
    }
    alpha /= w.query.len() as f64;
    let v = summaries.dot(&w.value.0) + &w.value.1;
    (alpha.dot(&v).mapv(elu), alpha)
}

#[derive(Clone, Debug)]
pub(crate) struct HopLayerIds {
    pub query: Vec<(ParamId, ParamId)>,
    pub key: Vec<(ParamId, ParamId)>,
    pub value: (ParamId, ParamId),
}

impl HopLayerIds {
    pub fn weights(&self, store: &ParamStore) -> HopLayerWeights {
        let pair = |(w, b): (ParamId, ParamId)| (store.get(w).clone(), store.get(b).clone());
        HopLayerWeights {
            query: self.query.iter().map(|&p| pair(p)).collect(),
            key: self.key.iter().map(|&p| pair(p)).collect(),
            value: pair(self.value),
        }
    }

    /// Tape version of [`extra_hop_layer`]; returns `(updated, α)`.
    pub fn apply(&self, tape: &mut Tape, s: Var) -> (Var, Var) {
        let mut alphas = Vec::with_capacity(self.query.len());
        for (&(wq, bq), &(wk, bk)) in self.query.iter().zip(&self.key) {
            let wq_var = tape.param(wq);
            let d = tape.value(wq_var).ncols();
            let q = affine(tape, s, wq, bq);
            let k = affine(tape, s, wk, bk);
            let kt = tape.transpose(k);
            let scores = tape.matmul(q, kt);
            let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
            alphas.push(tape.softmax_rows(scores));
        }
        let mut alpha = alphas[0];
        for &a in &alphas[1..] {
            alpha = tape.add(alpha, a);
        }
        if alphas.len() > 1 {
            alpha = tape.scale(alpha, 1.0 / alphas.len() as f64);
        }
        let v = affine(tape, s, self.value.0, self.value.1);
        let mixed = tape.matmul(alpha, v);
        (tape.elu(mixed), alpha)
    }
}

pub(crate) fn affine(tape: &mut Tape, x: Var, w: ParamId, b: ParamId) -> Var {
    let w = tape.param(w);
    let b = tape.param(b);
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

/// Per-node label distributions and the across-node importance distribution
/// from summary vectors, with label head `(W: H x 3, b)` and importance head
/// `(W: H x 1, b)`.
pub fn node_heads(
    summaries: &Array2<f64>,
    label_head: (&Array2<f64>, &Array2<f64>),
    importance_head: (&Array2<f64>, &Array2<f64>),
) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    if summaries.nrows() == 0 {
        return Err(Error::invalid("node heads need at least one node"));
    }
    let logits = summaries.dot(label_head.0) + label_head.1;
    let dists = logits
        .rows()
        .into_iter()
        .map(|r| {
            let m = r.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            [e[0] / z, e[1] / z, e[2] / z]
        })
        .collect();
    let imp: Array1<f64> = (summaries.dot(importance_head.0) + importance_head.1)
        .index_axis(Axis(1), 0)
        .to_owned();
    let m = imp.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = imp.mapv(|v| (v - m).exp());
    let z = e.sum();
    Ok((dists, e.iter().map(|v| v / z).collect()))
}
