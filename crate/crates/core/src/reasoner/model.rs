use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::hop::{affine, HopLayerIds, HopLayerWeights, HopStackConfig};
use super::{select_evidence, Prediction};
use crate::autograd::{ParamId, ParamMeta, ParamStore, Tape, Var};
use crate::corpus::Example;
use crate::encoder::{
    build_nodes, load_pretrained, Backend, Encoder, EncoderConfig, NodeBatch, Tokenizer,
};
use crate::rng::derive;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backend: Backend,
    pub encoder: EncoderConfig,
    pub hops: HopStackConfig,
    pub max_node_len: usize,
    pub sentence_ids: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.hops.validate()?;
        if self.max_node_len > self.encoder.max_positions {
            return Err(Error::Config(format!(
                "max_node_len {} exceeds the encoder's {} positions",
                self.max_node_len, self.encoder.max_positions
            )));
        }
        Ok(())
    }
}

/// Encoder, hop layers, label head and importance head over one parameter store.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub tokenizer: Tokenizer,
    pub seed: u64,
    encoder: Encoder,
    hops: Vec<HopLayerIds>,
    label_head: (ParamId, ParamId),
    importance_head: (ParamId, ParamId),
}

/// Tape handles produced by one forward pass.
pub struct TapeOutput {
    /// Aggregated label distribution, `1 x 3`.
    pub label: Var,
    /// Per-node label distributions, `n x 3`.
    pub node_label: Var,
    /// Importance over nodes, `1 x n`.
    pub importance: Var,
    /// Log-importance, `1 x n`.
    pub log_importance: Var,
    /// Attention of each hop layer, `n x n`.
    pub attention: Vec<Var>,
}

fn head_layout(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let h = cfg.encoder.hidden;
    let d = cfg.hops.hidden;
    let mut out = Vec::new();
    for l in 0..cfg.hops.num_hops {
        for head in 0..cfg.hops.heads {
            for part in ["query", "key"] {
                out.push((format!("hop.{l}.head.{head}.{part}.weight"), h, d));
                out.push((format!("hop.{l}.head.{head}.{part}.bias"), 1, d));
            }
        }
        out.push((format!("hop.{l}.value.weight"), h, h));
        out.push((format!("hop.{l}.value.bias"), 1, h));
    }
    out.push(("head.label.weight".into(), h, 3));
    out.push(("head.label.bias".into(), 1, 3));
    out.push(("head.importance.weight".into(), h, 1));
    out.push(("head.importance.bias".into(), 1, 1));
    out
}

/// Glorot-normal weights, zero biases.
fn init_head_tensor(seed: u64, name: &str, rows: usize, cols: usize) -> Array2<f64> {
    if name.ends_with(".bias") {
        return Array2::zeros((rows, cols));
    }
    let std = (2.0 / (rows + cols) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut rng = derive(seed, name);
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
}

const CHECKPOINT_FORMAT: &str = "hopcheck-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    format: String,
    version: u32,
    config: ModelConfig,
    seed: u64,
    vocab_sha256: String,
    params: Vec<ParamMeta>,
}

impl Model {
    /// Freshly initialized model (tiny backend, or any geometry from scratch).
    pub fn new(config: ModelConfig, tokenizer: Tokenizer, seed: u64) -> Result<Self> {
        config.validate()?;
        if tokenizer.len() != config.encoder.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} tokens, encoder expects {}",
                tokenizer.len(),
                config.encoder.vocab_size
            )));
        }
        let mut params = ParamStore::new();
        Encoder::init(&mut params, config.encoder.clone(), seed)?;
        for (name, r, c) in head_layout(&config) {
            let t = init_head_tensor(seed, &name, r, c);
            params.add(name, t);
        }
        Self::bind(config, params, tokenizer, seed)
    }

    /// Pretrained encoder from `dir` with freshly initialized hop layers and heads.
    pub fn from_pretrained(
        dir: &Path,
        hops: HopStackConfig,
        max_node_len: usize,
        sentence_ids: bool,
        seed: u64,
    ) -> Result<Self> {
        let (tokenizer, encoder, mut params) = load_pretrained(dir)?;
        let config = ModelConfig {
            backend: Backend::Pretrained12x768,
            encoder: encoder.config,
            hops,
            max_node_len,
            sentence_ids,
        };
        config.validate()?;
        for (name, r, c) in head_layout(&config) {
            let t = init_head_tensor(seed, &name, r, c);
            params.add(name, t);
        }
        Self::bind(config, params, tokenizer, seed)
    }

    fn bind(
        config: ModelConfig,
        params: ParamStore,
        tokenizer: Tokenizer,
        seed: u64,
    ) -> Result<Self> {
        let encoder = Encoder::bind(&params, config.encoder.clone())?;
        let get = |name: &str| {
            params
                .id_of(name)
                .ok_or_else(|| Error::Config(format!("missing tensor {name}")))
        };
        for (name, r, c) in head_layout(&config) {
            let shape = params.get(get(&name)?).dim();
            if shape != (r, c) {
                return Err(Error::Config(format!(
                    "{name}: shape {shape:?}, expected ({r}, {c})"
                )));
            }
        }
        let pair = |p: &str| -> Result<(ParamId, ParamId)> {
            Ok((get(&format!("{p}.weight"))?, get(&format!("{p}.bias"))?))
        };
        let mut hops = Vec::with_capacity(config.hops.num_hops);
        for l in 0..config.hops.num_hops {
            hops.push(HopLayerIds {
                query: (0..config.hops.heads)
                    .map(|h| pair(&format!("hop.{l}.head.{h}.query")))
                    .collect::<Result<_>>()?,
                key: (0..config.hops.heads)
                    .map(|h| pair(&format!("hop.{l}.head.{h}.key")))
                    .collect::<Result<_>>()?,
                value: pair(&format!("hop.{l}.value"))?,
            });
        }
        let label_head = pair("head.label")?;
        let importance_head = pair("head.importance")?;
        Ok(Model {
            config,
            params,
            tokenizer,
            seed,
            encoder,
            hops,
            label_head,
            importance_head,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn nodes(&self, ex: &Example) -> Result<NodeBatch> {
        build_nodes(
            ex,
            &self.tokenizer,
            self.config.max_node_len,
            self.config.sentence_ids,
        )
    }

    pub fn hop_weights(&self, layer: usize) -> HopLayerWeights {
        self.hops[layer].weights(&self.params)
    }

    /// `(label W, label b, importance W, importance b)`.
    pub fn head_weights(&self) -> [&Array2<f64>; 4] {
        [
            self.params.get(self.label_head.0),
            self.params.get(self.label_head.1),
            self.params.get(self.importance_head.0),
            self.params.get(self.importance_head.1),
        ]
    }

    /// Parameters of the hop layers and both heads.
    pub fn reasoning_param_ids(&self) -> Vec<ParamId> {
        head_layout(&self.config)
            .iter()
            .map(|(n, ..)| self.params.id_of(n).expect("bound"))
            .collect()
    }

    /// Records the forward pass on `tape` (which must read `self.params`).
    /// With `use_hops = false` the hop layers are skipped (single-step model).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        batch: &NodeBatch,
        use_hops: bool,
    ) -> Result<TapeOutput> {
        if batch.is_empty() {
            return Err(Error::invalid(
                "cannot run the model on a graph with no nodes",
            ));
        }
        for (i, n) in batch.nodes.iter().enumerate() {
            self.encoder.check_node(i, n)?;
        }
        let mut summaries = Vec::with_capacity(batch.len());
        for node in &batch.nodes {
            let h = self.encoder.encode(tape, node);
            summaries.push(tape.row(h, 0));
        }
        let mut s = if summaries.len() == 1 {
            summaries[0]
        } else {
            tape.concat_rows(&summaries)
        };
        let mut attention = Vec::new();
        if use_hops {
            for layer in &self.hops {
                let (next, alpha) = layer.apply(tape, s);
                s = next;
                attention.push(alpha);
            }
        }
        let logits = affine(tape, s, self.label_head.0, self.label_head.1);
        let node_label = tape.softmax_rows(logits);
        let imp = affine(tape, s, self.importance_head.0, self.importance_head.1);
        let imp = tape.transpose(imp);
        let importance = tape.softmax_rows(imp);
        let log_importance = tape.log_softmax_rows(imp);
        let label = tape.matmul(importance, node_label);
        Ok(TapeOutput {
            label,
            node_label,
            importance,
            log_importance,
            attention,
        })
    }

    fn run(&self, batch: &NodeBatch, k: usize, use_hops: bool) -> Result<Prediction> {
        let mut tape = Tape::new(&self.params);
        let out = self.forward_tape(&mut tape, batch, use_hops)?;
        let l = tape.value(out.label);
        let importance: Vec<f64> = tape.value(out.importance).iter().copied().collect();
        let hop_attention = (!out.attention.is_empty()).then(|| {
            out.attention
                .iter()
                .map(|a| {
                    tape.value(*a)
                        .rows()
                        .into_iter()
                        .map(|r| r.to_vec())
                        .collect()
                })
                .collect()
        });
        Ok(Prediction {
            label_dist: [l[[0, 0]], l[[0, 1]], l[[0, 2]]],
            evidence: select_evidence(&importance, k),
            importance,
            hop_attention,
        })
    }

    pub fn predict(&self, ex: &Example, k: usize) -> Result<Prediction> {
        forward(self, &self.nodes(ex)?, k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            seed: self.seed,
            vocab_sha256: self.tokenizer.sha256(),
            params: self.params.metas(),
        };
        let path = dir.join("checkpoint.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&path, e))?;
        self.params.write_blob(&dir.join("params.bin"))?;
        self.tokenizer.save(&dir.join("vocab.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("checkpoint.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: CheckpointManifest = serde_json::from_str(&text)?;
        if m.format != CHECKPOINT_FORMAT || m.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        let tokenizer = Tokenizer::load(&dir.join("vocab.txt"))?;
        if tokenizer.sha256() != m.vocab_sha256 {
            return Err(Error::Config(format!(
                "{}: vocabulary hash mismatch",
                dir.display()
            )));
        }
        let params = ParamStore::read_blob(&m.params, &dir.join("params.bin"))?;
        m.config.validate()?;
        Self::bind(m.config, params, tokenizer, m.seed)
    }
}

/// Encoder, `L` hop layers on the summary slots, heads, aggregation, and
/// top-`k` evidence. With `L = 0` this is the single-step model.
pub fn forward(model: &Model, batch: &NodeBatch, k: usize) -> Result<Prediction> {
    model.run(batch, k, true)
}

/// The single-step model: heads applied directly to the encoder summaries.
pub fn single_step(model: &Model, batch: &NodeBatch, k: usize) -> Result<Prediction> {
    model.run(batch, k, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VeracityLabel;
    use crate::encoder::encode_nodes;
    use crate::reasoner::{aggregate_label, extra_hop_layer, node_heads};

    fn example() -> Example {
        Example {
            id: "a".into(),
            claim: "the governor raised taxes".into(),
            speaker: "jane doe".into(),
            label: VeracityLabel::True,
            sentences: vec![
                "taxes rose in may".into(),
                "the governor signed the bill".into(),
                "critics objected".into(),
            ],
            chains: vec![vec![0, 1]],
            origin_map: vec![0, 1, 2],
        }
    }

    pub(crate) fn tiny(hops: usize) -> Model {
        let ex = example();
        let mut texts = ex.sentences.clone();
        texts.push(ex.claim.clone());
        texts.push(ex.speaker.clone());
        let tok = Tokenizer::build(&texts, 100);
        let config = ModelConfig {
            backend: Backend::TinyTrainable,
            encoder: EncoderConfig::tiny(tok.len(), 32),
            hops: HopStackConfig {
                num_hops: hops,
                hidden: 16,
                heads: 1,
            },
            max_node_len: 32,
            sentence_ids: false,
        };
        Model::new(config, tok, 42).unwrap()
    }

    #[test]
    fn prediction_invariants() {
        for l in [0, 1, 3] {
            let m = tiny(l);
            let p = m.predict(&example(), 2).unwrap();
            assert!((p.label_dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((p.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(p.evidence.len(), 2);
            assert_eq!(p.hop_attention.as_ref().map_or(0, Vec::len), l);
            for a in p.hop_attention.iter().flatten() {
                for row in a {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_hops_is_the_single_step_model() {
        let m = tiny(0);
        let b = m.nodes(&example()).unwrap();
        assert_eq!(forward(&m, &b, 2).unwrap(), single_step(&m, &b, 2).unwrap());
    }

    #[test]
    fn tape_path_matches_array_reference() {
        let m = tiny(2);
        let b = m.nodes(&example()).unwrap();
        let p = forward(&m, &b, 2).unwrap();
        let mut s = encode_nodes(m.encoder(), &m.params, &b)
            .unwrap()
            .summaries();
        for l in 0..2 {
            s = extra_hop_layer(&s, &m.hop_weights(l)).0;
        }
        let [lw, lb, iw, ib] = m.head_weights();
        let (dists, imp) = node_heads(&s, (lw, lb), (iw, ib)).unwrap();
        let agg = aggregate_label(&dists, &imp).unwrap();
        for (a, b) in agg.iter().zip(p.label_dist) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in imp.iter().zip(&p.importance) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let m = tiny(1);
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = Model::load(dir.path()).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.config, m.config);
        assert_eq!(
            back.predict(&example(), 3).unwrap(),
            m.predict(&example(), 3).unwrap()
        );
    }

    #[test]
    fn too_many_hops_rejected() {
        let m = tiny(0);
        let mut cfg = m.config.clone();
        cfg.hops.num_hops = 8;
        assert!(Model::new(cfg, m.tokenizer.clone(), 1).is_err());
    }
}
