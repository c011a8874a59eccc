use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{tape_loss, Adam, ExperimentConfig, LossMode};
use crate::autograd::Tape;
use crate::corpus::Example;
use crate::encoder::{Backend, EncoderConfig, NodeBatch, Tokenizer};
use crate::evaluate::MetricsReport;
use crate::reasoner::{forward, Model, ModelConfig, Prediction};
use crate::rng::derive;
use crate::{Error, Result};

/// Examples of one dataset id.
#[derive(Clone, Debug, Default)]
pub struct StageData {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
}

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: usize,
    pub dataset: String,
    /// 1-based within the stage.
    pub epoch: usize,
    /// 1-based over the whole regime.
    pub global_epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub train_label_loss: f64,
    pub train_evidence_loss: f64,
    pub dev_dataset: String,
    pub dev: MetricsReport,
    /// Dev label macro-F1, or dev evidence F1 in `evi` mode.
    pub selection_metric: f64,
    pub is_best: bool,
}

pub struct TrainOutcome {
    /// Parameters of the best epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_global_epoch: usize,
    pub best_metric: f64,
}

/// Fresh model for `config`; the tiny backend's vocabulary is built from the
/// training texts of every stage.
pub fn build_model(
    config: &ExperimentConfig,
    datasets: &BTreeMap<String, StageData>,
) -> Result<Model> {
    match config.backend {
        Backend::TinyTrainable => {
            let mut texts: Vec<&str> = Vec::new();
            for stage in config.resolved_stages()? {
                if let Some(d) = datasets.get(&stage.dataset) {
                    for ex in &d.train {
                        texts.push(&ex.claim);
                        texts.push(&ex.speaker);
                        texts.extend(ex.sentences.iter().map(String::as_str));
                    }
                }
            }
            let tokenizer = Tokenizer::build(&texts, config.tiny.max_vocab_words);
            let encoder = EncoderConfig {
                hidden: config.tiny.hidden,
                layers: config.tiny.layers,
                heads: config.tiny.heads,
                intermediate: config.tiny.intermediate,
                ..EncoderConfig::tiny(tokenizer.len(), config.max_node_len)
            };
            let model_config = ModelConfig {
                backend: Backend::TinyTrainable,
                encoder,
                hops: config.hop_config(),
                max_node_len: config.max_node_len,
                sentence_ids: config.sentence_ids,
            };
            Model::new(model_config, tokenizer, config.seed)
        }
        Backend::Pretrained12x768 => Model::from_pretrained(
            &config.backend.asset_dir()?,
            config.hop_config(),
            config.max_node_len,
            config.sentence_ids,
            config.seed,
        ),
    }
}

fn selection_metric(mode: LossMode, m: &MetricsReport) -> f64 {
    match mode {
        LossMode::Evi => m.evidence_f1,
        _ => m.label_macro_f1,
    }
}

/// Dev predictions at top-`k`.
pub(crate) fn predict_all(
    model: &Model,
    batches: &[NodeBatch],
    k: usize,
) -> Result<Vec<Prediction>> {
    batches.iter().map(|b| forward(model, b, k)).collect()
}

/// Runs every stage in order with one graph per optimization step, scores the
/// dev set after each epoch, and keeps the parameters of the best epoch.
pub fn run_regime(
    config: &ExperimentConfig,
    datasets: &BTreeMap<String, StageData>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let stages = config.resolved_stages()?;
    for s in &stages {
        match datasets.get(&s.dataset) {
            Some(d) if !d.train.is_empty() => {}
            _ => {
                return Err(Error::Config(format!(
                    "no training data for stage dataset {:?}",
                    s.dataset
                )))
            }
        }
    }
    let dev_name = config.dev_dataset()?;
    let dev = match datasets.get(&dev_name) {
        Some(d) if !d.dev.is_empty() => &d.dev,
        _ => return Err(Error::Config(format!("no dev data for {dev_name:?}"))),
    };

    let mut model = build_model(config, datasets)?;
    let mut opt = Adam::new(&model.params, config.learning_rate());
    let dev_batches: Vec<NodeBatch> = dev.iter().map(|e| model.nodes(e)).collect::<Result<_>>()?;

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, crate::autograd::ParamStore)> = None;
    let mut global = 0;
    for (si, stage) in stages.iter().enumerate() {
        let train = &datasets[&stage.dataset].train;
        let batches: Vec<NodeBatch> = train
            .iter()
            .map(|e| model.nodes(e))
            .collect::<Result<_>>()?;
        let golds: Vec<BTreeSet<usize>> = train.iter().map(Example::gold_evidence).collect();
        for epoch in 1..=stage.epochs {
            global += 1;
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut derive(config.seed, &format!("shuffle:{si}:{epoch}")));
            let (mut total, mut lab, mut evi, mut steps) = (0.0, 0.0, 0.0, 0usize);
            for &i in &order {
                let grads = {
                    let mut tape = Tape::new(&model.params);
                    let out = model.forward_tape(&mut tape, &batches[i], true)?;
                    let Some(loss) =
                        tape_loss(&mut tape, &out, train[i].label, &golds[i], config.loss_mode)
                            .map_err(|e| Error::Validation {
                                id: train[i].id.clone(),
                                message: e.to_string(),
                            })?
                    else {
                        continue;
                    };
                    total += tape.scalar(loss.total);
                    lab += loss.label;
                    evi += loss.evidence;
                    tape.backward(loss.total)
                };
                opt.step(&mut model.params, &grads);
                steps += 1;
            }
            let preds = predict_all(&model, &dev_batches, config.top_k)?;
            let report = MetricsReport::compute(&preds, dev, Some(config.top_k))?;
            let metric = selection_metric(config.loss_mode, &report);
            let is_best = best.as_ref().is_none_or(|(b, ..)| metric > *b);
            if is_best {
                best = Some((metric, global, model.params.clone()));
            }
            let n = steps.max(1) as f64;
            log::info!(
                "stage {} ({}) epoch {epoch}: loss {:.4}, dev selection metric {metric:.4}{}",
                si + 1,
                stage.dataset,
                total / n,
                if is_best { " (best)" } else { "" }
            );
            history.push(EpochRecord {
                stage: si + 1,
                dataset: stage.dataset.clone(),
                epoch,
                global_epoch: global,
                steps,
                train_loss: total / n,
                train_label_loss: lab / n,
                train_evidence_loss: evi / n,
                dev_dataset: dev_name.clone(),
                dev: report,
                selection_metric: metric,
                is_best,
            });
        }
    }
    let (best_metric, best_global_epoch, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainOutcome {
        model,
        history,
        best_global_epoch,
        best_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VeracityLabel;
    use crate::train::Stage;

    fn data(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                id: format!("ex{i}"),
                claim: format!("claim number {i} about taxes"),
                speaker: "someone".into(),
                label: VeracityLabel::ALL[i % 3],
                sentences: vec![
                    "first sentence".into(),
                    format!("taxes went up {i}"),
                    "unrelated remark".into(),
                ],
                chains: vec![vec![1]],
                origin_map: vec![0, 1, 2],
            })
            .collect()
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            stages: vec![Stage::new("toy", 1)],
            hops: 1,
            hop_hidden: 8,
            max_node_len: 32,
            tiny: super::super::TinyConfig {
                hidden: 8,
                heads: 1,
                intermediate: 16,
                layers: 1,
                max_vocab_words: 100,
            },
            ..Default::default()
        }
    }

    #[test]
    fn one_epoch_plumbing() {
        let mut ds = BTreeMap::new();
        ds.insert(
            "toy".to_string(),
            StageData {
                train: data(10),
                dev: data(4),
            },
        );
        let out = run_regime(&config(), &ds).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.history[0].steps, 10);
        assert!(out.history[0].is_best);
        let dir = tempfile::tempdir().unwrap();
        out.model.save(dir.path()).unwrap();
        assert!(dir.path().join("params.bin").exists());
    }

    #[test]
    fn identical_runs_are_bitwise_equal_and_best_is_max() {
        let mut ds = BTreeMap::new();
        ds.insert(
            "toy".to_string(),
            StageData {
                train: data(6),
                dev: data(3),
            },
        );
        let mut cfg = config();
        cfg.stages[0].epochs = 3;
        let a = run_regime(&cfg, &ds).unwrap();
        let b = run_regime(&cfg, &ds).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.params, b.model.params);
        let max = a
            .history
            .iter()
            .map(|r| r.selection_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_metric, max);
    }

    #[test]
    fn missing_dataset_fails_before_training() {
        let err = run_regime(&config(), &BTreeMap::new()).err().unwrap();
        assert!(err.to_string().contains("toy"));
    }
}
