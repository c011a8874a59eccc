use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Node;
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::rng::derive;
use crate::{Error, Result};

/// Geometry of a BERT-style post-layer-norm encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub intermediate: usize,
    pub max_positions: usize,
    pub type_vocab_size: usize,
    pub layer_norm_eps: f64,
}

impl EncoderConfig {
    /// Small from-scratch encoder.
    pub fn tiny(vocab_size: usize, max_positions: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden: 32,
            layers: 2,
            heads: 2,
            intermediate: 64,
            max_positions,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    /// BERT-base geometry (12 layers, hidden 768).
    pub fn base_12x768(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden: 768,
            layers: 12,
            heads: 12,
            intermediate: 3072,
            max_positions: 512,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {} is not divisible into {} heads",
                self.hidden, self.heads
            )));
        }
        if self.vocab_size == 0 || self.max_positions == 0 || self.type_vocab_size < 2 {
            return Err(Error::Config(
                "encoder vocabulary, positions and segments must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct LayerIds {
    q: (ParamId, ParamId),
    k: (ParamId, ParamId),
    v: (ParamId, ParamId),
    o: (ParamId, ParamId),
    ln1: (ParamId, ParamId),
    ff1: (ParamId, ParamId),
    ff2: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
}

/// Handles to the encoder's tensors inside a [`ParamStore`].
///
/// Tensor names follow the usual BERT checkpoint layout; dense weights are
/// stored `in x out`.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    word: ParamId,
    position: ParamId,
    token_type: ParamId,
    emb_ln: (ParamId, ParamId),
    layers: Vec<LayerIds>,
}

/// Every tensor the encoder needs: `(name, rows, cols, init)`.
fn layout(cfg: &EncoderConfig) -> Vec<(String, usize, usize, Init)> {
    let h = cfg.hidden;
    let mut out = vec![
        (
            "embeddings.word_embeddings.weight".to_string(),
            cfg.vocab_size,
            h,
            Init::Normal,
        ),
        (
            "embeddings.position_embeddings.weight".into(),
            cfg.max_positions,
            h,
            Init::Normal,
        ),
        (
            "embeddings.token_type_embeddings.weight".into(),
            cfg.type_vocab_size,
            h,
            Init::Normal,
        ),
        ("embeddings.LayerNorm.weight".into(), 1, h, Init::Ones),
        ("embeddings.LayerNorm.bias".into(), 1, h, Init::Zeros),
    ];
    for l in 0..cfg.layers {
        let p = format!("encoder.layer.{l}.");
        let dense = |name: &str, i: usize, o: usize| {
            [
                (format!("{p}{name}.weight"), i, o, Init::Normal),
                (format!("{p}{name}.bias"), 1, o, Init::Zeros),
            ]
        };
        let norm = |name: &str| {
            [
                (format!("{p}{name}.weight"), 1, h, Init::Ones),
                (format!("{p}{name}.bias"), 1, h, Init::Zeros),
            ]
        };
        out.extend(dense("attention.self.query", h, h));
        out.extend(dense("attention.self.key", h, h));
        out.extend(dense("attention.self.value", h, h));
        out.extend(dense("attention.output.dense", h, h));
        out.extend(norm("attention.output.LayerNorm"));
        out.extend(dense("intermediate.dense", h, cfg.intermediate));
        out.extend(dense("output.dense", cfg.intermediate, h));
        out.extend(norm("output.LayerNorm"));
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    Normal,
    Ones,
    Zeros,
}

/// Standard deviation of freshly initialized weight matrices.
pub const INIT_STD: f64 = 0.02;

pub(crate) fn init_tensor(
    seed: u64,
    name: &str,
    rows: usize,
    cols: usize,
    init: Init,
) -> Array2<f64> {
    match init {
        Init::Ones => Array2::ones((rows, cols)),
        Init::Zeros => Array2::zeros((rows, cols)),
        Init::Normal => {
            let mut rng = derive(seed, name);
            let normal = Normal::new(0.0, INIT_STD).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
        }
    }
}

impl Encoder {
    /// Adds freshly initialized tensors to `store`.
    pub fn init(store: &mut ParamStore, config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        for (name, r, c, init) in layout(&config) {
            let t = init_tensor(seed, &name, r, c, init);
            store.add(name, t);
        }
        Self::bind(store, config)
    }

    /// Looks up existing tensors by name and checks their shapes.
    pub fn bind(store: &ParamStore, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let get = |name: &str, r: usize, c: usize| -> Result<ParamId> {
            let id = store
                .id_of(name)
                .ok_or_else(|| Error::Config(format!("missing encoder tensor {name}")))?;
            let shape = store.get(id).dim();
            if shape != (r, c) {
                return Err(Error::Config(format!(
                    "{name}: shape {shape:?}, expected ({r}, {c})"
                )));
            }
            Ok(id)
        };
        let ids = layout(&config)
            .into_iter()
            .map(|(n, r, c, _)| get(&n, r, c))
            .collect::<Result<Vec<_>>>()?;
        let mut it = ids.into_iter();
        let mut one = || it.next().expect("layout order");
        let (word, position, token_type) = (one(), one(), one());
        let emb_ln = (one(), one());
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            layers.push(LayerIds {
                q: (one(), one()),
                k: (one(), one()),
                v: (one(), one()),
                o: (one(), one()),
                ln1: (one(), one()),
                ff1: (one(), one()),
                ff2: (one(), one()),
                ln2: (one(), one()),
            });
        }
        Ok(Encoder {
            config,
            word,
            position,
            token_type,
            emb_ln,
            layers,
        })
    }

    pub fn param_names(config: &EncoderConfig) -> Vec<String> {
        layout(config).into_iter().map(|(n, ..)| n).collect()
    }

    fn dense(tape: &mut Tape, x: Var, (w, b): (ParamId, ParamId)) -> Var {
        let w = tape.param(w);
        let b = tape.param(b);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }

    fn norm(&self, tape: &mut Tape, x: Var, (g, b): (ParamId, ParamId)) -> Var {
        let g = tape.param(g);
        let b = tape.param(b);
        tape.layer_norm(x, g, b, self.config.layer_norm_eps)
    }

    /// Checks token, position and segment ranges for one node.
    pub fn check_node(&self, node_index: usize, node: &Node) -> Result<()> {
        if node.ids.len() > self.config.max_positions {
            return Err(Error::invalid(format!(
                "node {node_index}: {} tokens exceed the encoder's {} positions",
                node.ids.len(),
                self.config.max_positions
            )));
        }
        if let Some(pos) = node
            .ids
            .iter()
            .position(|&id| id as usize >= self.config.vocab_size)
        {
            return Err(Error::invalid(format!(
                "node {node_index}, position {pos}: token id {} outside vocabulary of {}",
                node.ids[pos], self.config.vocab_size
            )));
        }
        if let Some(pos) = node
            .segments
            .iter()
            .position(|&s| s as usize >= self.config.type_vocab_size)
        {
            return Err(Error::invalid(format!(
                "node {node_index}, position {pos}: segment out of range"
            )));
        }
        if node.segments.len() != node.ids.len() || node.ids.is_empty() {
            return Err(Error::invalid(format!(
                "node {node_index}: malformed token sequence"
            )));
        }
        Ok(())
    }

    /// Contextual vectors (`tokens x hidden`) for one node.
    pub fn encode(&self, tape: &mut Tape, node: &Node) -> Var {
        let n = node.ids.len();
        let ids: Vec<usize> = node.ids.iter().map(|&i| i as usize).collect();
        let segs: Vec<usize> = node.segments.iter().map(|&s| s as usize).collect();
        let pos: Vec<usize> = (0..n).collect();
        let word = tape.param(self.word);
        let position = tape.param(self.position);
        let token_type = tape.param(self.token_type);
        let we = tape.gather_rows(word, &ids);
        let pe = tape.gather_rows(position, &pos);
        let te = tape.gather_rows(token_type, &segs);
        let x = tape.add(we, pe);
        let x = tape.add(x, te);
        let mut x = self.norm(tape, x, self.emb_ln);

        let h = self.config.hidden;
        let dh = h / self.config.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        for layer in &self.layers {
            let q = Self::dense(tape, x, layer.q);
            let k = Self::dense(tape, x, layer.k);
            let v = Self::dense(tape, x, layer.v);
            let mut ctx = Vec::with_capacity(self.config.heads);
            for head in 0..self.config.heads {
                let (a, b) = (head * dh, (head + 1) * dh);
                let qh = tape.slice_cols(q, a, b);
                let kh = tape.slice_cols(k, a, b);
                let vh = tape.slice_cols(v, a, b);
                let kt = tape.transpose(kh);
                let scores = tape.matmul(qh, kt);
                let scores = tape.scale(scores, scale);
                let att = tape.softmax_rows(scores);
                ctx.push(tape.matmul(att, vh));
            }
            let ctx = if ctx.len() == 1 {
                ctx[0]
            } else {
                tape.concat_cols(&ctx)
            };
            let attn_out = Self::dense(tape, ctx, layer.o);
            let res = tape.add(attn_out, x);
            let x1 = self.norm(tape, res, layer.ln1);
            let ff = Self::dense(tape, x1, layer.ff1);
            let ff = tape.gelu(ff);
            let ff = Self::dense(tape, ff, layer.ff2);
            let res = tape.add(ff, x1);
            x = self.norm(tape, res, layer.ln2);
        }
        x
    }
}
