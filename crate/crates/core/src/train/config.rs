use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::LossMode;
use crate::encoder::{Backend, DEFAULT_MAX_NODE_LEN};
use crate::perturb::Setting;
use crate::reasoner::{HopStackConfig, DEFAULT_TOP_K};
use crate::{Error, Result, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub dataset: String,
    pub epochs: usize,
}

impl Stage {
    pub fn new(dataset: &str, epochs: usize) -> Self {
        Stage {
            dataset: dataset.into(),
            epochs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimePreset {
    LiarOnly,
    PolitihopOnly,
    LiarThenPolitihop,
    FeverLiarPolitihop,
}

impl RegimePreset {
    pub const ALL: [RegimePreset; 4] = [
        Self::LiarOnly,
        Self::PolitihopOnly,
        Self::LiarThenPolitihop,
        Self::FeverLiarPolitihop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LiarOnly => "liar_only",
            Self::PolitihopOnly => "politihop_only",
            Self::LiarThenPolitihop => "liar_then_politihop",
            Self::FeverLiarPolitihop => "fever_liar_politihop",
        }
    }

    pub fn stages(self) -> Vec<Stage> {
        match self {
            Self::LiarOnly => vec![Stage::new("liar_plus", 4)],
            Self::PolitihopOnly => vec![Stage::new("politihop", 8)],
            Self::LiarThenPolitihop => vec![Stage::new("liar_plus", 4), Stage::new("politihop", 4)],
            Self::FeverLiarPolitihop => {
                vec![
                    Stage::new("fever", 2),
                    Stage::new("liar_plus", 4),
                    Stage::new("politihop", 4),
                ]
            }
        }
    }
}

impl FromStr for RegimePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "liar_only" => Ok(Self::LiarOnly),
            "politihop_only" => Ok(Self::PolitihopOnly),
            "liar_then_politihop" | "liar+politihop" => Ok(Self::LiarThenPolitihop),
            "fever_liar_politihop" | "fever+liar+politihop" => Ok(Self::FeverLiarPolitihop),
            other => Err(Error::Config(format!("unknown regime preset {other:?}"))),
        }
    }
}

/// Geometry of the from-scratch encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TinyConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub intermediate: usize,
    pub max_vocab_words: usize,
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            layers: 2,
            hidden: 32,
            heads: 2,
            intermediate: 64,
            max_vocab_words: 20_000,
        }
    }
}

/// Train and dev files of one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub dev: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub preset: Option<RegimePreset>,
    /// Explicit stages; override the preset's.
    pub stages: Vec<Stage>,
    pub loss_mode: LossMode,
    pub hops: usize,
    pub hop_hidden: usize,
    pub hop_heads: usize,
    pub top_k: usize,
    pub seed: u64,
    /// Defaults to 1e-3 for the tiny backend and 1e-5 for the pretrained one.
    pub learning_rate: Option<f64>,
    pub backend: Backend,
    pub sentence_ids: bool,
    pub setting: Setting,
    pub max_node_len: usize,
    /// Dataset whose dev split drives checkpoint selection; defaults to the
    /// last stage's dataset.
    pub dev_dataset: Option<String>,
    pub tiny: TinyConfig,
    pub datasets: BTreeMap<String, DatasetPaths>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            preset: None,
            stages: Vec::new(),
            loss_mode: LossMode::Joint,
            hops: 3,
            hop_hidden: 64,
            hop_heads: 1,
            top_k: DEFAULT_TOP_K,
            seed: DEFAULT_SEED,
            learning_rate: None,
            backend: Backend::TinyTrainable,
            sentence_ids: false,
            setting: Setting::Full,
            max_node_len: DEFAULT_MAX_NODE_LEN,
            dev_dataset: None,
            tiny: TinyConfig::default(),
            datasets: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_preset(preset: RegimePreset) -> Self {
        ExperimentConfig {
            preset: Some(preset),
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative dataset paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in cfg.datasets.values_mut() {
            d.train = base.join(&d.train);
            d.dev = d.dev.as_ref().map(|p| base.join(p));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema_version {}",
                self.schema_version
            )));
        }
        let stages = self.resolved_stages()?;
        if let Some(s) = stages.iter().find(|s| s.epochs == 0) {
            return Err(Error::Config(format!(
                "stage {:?} has zero epochs",
                s.dataset
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self
            .learning_rate
            .is_some_and(|lr| !(lr > 0.0 && lr.is_finite()))
        {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.hop_config().validate()
    }

    pub fn resolved_stages(&self) -> Result<Vec<Stage>> {
        if !self.stages.is_empty() {
            return Ok(self.stages.clone());
        }
        self.preset
            .map(RegimePreset::stages)
            .ok_or_else(|| Error::Config("config names neither a preset nor stages".into()))
    }

    pub fn hop_config(&self) -> HopStackConfig {
        HopStackConfig {
            num_hops: self.hops,
            hidden: self.hop_hidden,
            heads: self.hop_heads,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.backend {
            Backend::TinyTrainable => 1e-3,
            Backend::Pretrained12x768 => 1e-5,
        })
    }

    pub fn dev_dataset(&self) -> Result<String> {
        if let Some(d) = &self.dev_dataset {
            return Ok(d.clone());
        }
        Ok(self
            .resolved_stages()?
            .last()
            .expect("validated non-empty")
            .dataset
            .clone())
    }

    /// Differences from the named presets and reference hyper-parameters.
    pub fn deviations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let stages = self.resolved_stages().unwrap_or_default();
        let show = |s: &[Stage]| {
            s.iter()
                .map(|s| format!("({},{})", s.dataset, s.epochs))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self.preset {
            Some(p) if p.stages() != stages => out.push(format!(
                "stages [{}] differ from preset {} [{}]",
                show(&stages),
                p.name(),
                show(&p.stages())
            )),
            Some(_) => {}
            None => {
                if !RegimePreset::ALL.iter().any(|p| p.stages() == stages) {
                    out.push(format!("stages [{}] match no named preset", show(&stages)));
                }
            }
        }
        if self.seed != DEFAULT_SEED {
            out.push(format!(
                "seed {} differs from the default {DEFAULT_SEED}",
                self.seed
            ));
        }
        if self.backend == Backend::Pretrained12x768 && self.learning_rate() != 1e-5 {
            out.push(format!(
                "learning rate {} differs from 1e-5",
                self.learning_rate()
            ));
        }
        if self.backend == Backend::Pretrained12x768
            && (self.hops, self.hop_hidden) != (3, 64)
            && self.hops != 0
        {
            out.push(format!(
                "{} hop layers of size {} differ from 3 x 64",
                self.hops, self.hop_hidden
            ));
        }
        out
    }

    /// SHA-256 of the config's canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fever_preset_stages() {
        let p: RegimePreset = "fever+liar+politihop".parse().unwrap();
        assert_eq!(
            p.stages(),
            vec![
                Stage::new("fever", 2),
                Stage::new("liar_plus", 4),
                Stage::new("politihop", 4)
            ]
        );
    }

    #[test]
    fn off_preset_stages_are_flagged_not_rejected() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            stages = [{ dataset = "liar_plus", epochs = 4 }, { dataset = "politihop", epochs = 8 }]
            "#,
        )
        .unwrap();
        let dev = cfg.deviations();
        assert_eq!(dev.len(), 1);
        assert!(dev[0].contains("match no named preset"), "{dev:?}");
        assert!(
            ExperimentConfig::from_preset(RegimePreset::LiarThenPolitihop)
                .deviations()
                .is_empty()
        );
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            preset = "politihop_only"
            loss_mode = "evi"
            hops = 2
            backend = "tiny-trainable"
            setting = "even"
            [tiny]
            hidden = 16
            [datasets.politihop]
            train = "train.jsonl"
            dev = "dev.jsonl"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.loss_mode, LossMode::Evi);
        assert_eq!(cfg.tiny.layers, 2);
        assert_eq!(cfg.tiny.hidden, 16);
        assert_eq!(cfg.learning_rate(), 1e-3);
        assert_eq!(cfg.dev_dataset().unwrap(), "politihop");
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn invalid_configs() {
        assert!(ExperimentConfig::from_toml("").is_err());
        assert!(ExperimentConfig::from_toml("stages = [{ dataset = \"x\", epochs = 0 }]").is_err());
        assert!(ExperimentConfig::from_toml("preset = \"liar_only\"\nhops = 9").is_err());
        assert!(ExperimentConfig::from_toml("preset = \"liar_only\"\nbogus = 1").is_err());
    }
}
