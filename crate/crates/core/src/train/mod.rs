//! Losses, optimization, experiment configuration and staged training.

mod config;
mod regime;

pub use config::{DatasetPaths, ExperimentConfig, RegimePreset, Stage, TinyConfig, SCHEMA_VERSION};
pub use regime::{build_model, run_regime, EpochRecord, StageData, TrainOutcome};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::str::FromStr;

use crate::autograd::{Gradients, ParamStore, Tape, Var};
use crate::corpus::VeracityLabel;
use crate::reasoner::{Prediction, TapeOutput};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    #[default]
    Joint,
    Evi,
    Lab,
}

impl LossMode {
    fn uses_label(self) -> bool {
        self != LossMode::Evi
    }

    fn uses_evidence(self) -> bool {
        self != LossMode::Lab
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Self::Joint),
            "evi" => Ok(Self::Evi),
            "lab" => Ok(Self::Lab),
            other => Err(Error::Config(format!("unknown loss mode {other:?}"))),
        }
    }
}

fn check_evidence(gold_evidence: &BTreeSet<usize>, nodes: usize) -> Result<()> {
    if gold_evidence.is_empty() {
        return Err(Error::invalid(
            "evidence loss needs at least one gold evidence node",
        ));
    }
    if let Some(&i) = gold_evidence.iter().find(|&&i| i >= nodes) {
        return Err(Error::invalid(format!(
            "gold evidence node {i} outside {nodes} nodes"
        )));
    }
    Ok(())
}

/// Label loss `-ln p(gold)` and evidence loss `-(1/|G|) Σ_{g∈G} ln w_g`
/// (cross-entropy from the uniform distribution over gold nodes to the
/// importance distribution); joint is their sum.
pub fn compute_loss(
    p: &Prediction,
    gold_label: VeracityLabel,
    gold_evidence: &BTreeSet<usize>,
    mode: LossMode,
) -> Result<f64> {
    let mut loss = 0.0;
    if mode.uses_label() {
        loss -= p.label_dist[gold_label.index()].ln();
    }
    if mode.uses_evidence() {
        check_evidence(gold_evidence, p.importance.len())?;
        loss -= gold_evidence
            .iter()
            .map(|&g| p.importance[g].ln())
            .sum::<f64>()
            / gold_evidence.len() as f64;
    }
    Ok(loss)
}

/// Loss terms recorded on a tape.
pub struct TapeLoss {
    pub total: Var,
    pub label: f64,
    pub evidence: f64,
}

/// [`compute_loss`] on the tape. Examples without gold evidence fall back to
/// the label term alone (and contribute nothing in `evi` mode).
pub fn tape_loss(
    tape: &mut Tape,
    out: &TapeOutput,
    gold_label: VeracityLabel,
    gold_evidence: &BTreeSet<usize>,
    mode: LossMode,
) -> Result<Option<TapeLoss>> {
    let nodes = tape.value(out.importance).ncols();
    let use_evidence = mode.uses_evidence() && !gold_evidence.is_empty();
    let use_label = mode.uses_label() || (mode == LossMode::Joint && gold_evidence.is_empty());
    let mut terms = Vec::new();
    let (mut label, mut evidence) = (0.0, 0.0);
    if use_label {
        let p = tape.element(out.label, 0, gold_label.index());
        let lp = tape.ln(p);
        let l = tape.scale(lp, -1.0);
        label = tape.scalar(l);
        terms.push(l);
    }
    if use_evidence {
        check_evidence(gold_evidence, nodes)?;
        let mut picked = Vec::with_capacity(gold_evidence.len());
        for &g in gold_evidence {
            picked.push(tape.element(out.log_importance, 0, g));
        }
        let cat = if picked.len() == 1 {
            picked[0]
        } else {
            tape.concat_cols(&picked)
        };
        let s = tape.sum(cat);
        let e = tape.scale(s, -1.0 / gold_evidence.len() as f64);
        evidence = tape.scalar(e);
        terms.push(e);
    }
    let Some(&first) = terms.first() else {
        return Ok(None);
    };
    let total = if terms.len() == 2 {
        tape.add(first, terms[1])
    } else {
        first
    };
    Ok(Some(TapeLoss {
        total,
        label,
        evidence,
    }))
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .ids()
            .map(|id| Array2::zeros(params.get(id).raw_dim()))
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = params.get_mut(id);
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}
