//! Evaluation-set construction: even splits, adversarial named-entity
//! replacements, and NE-overlap measurement.

mod ner;

pub use ner::{normalize_entity, CapitalizationRecognizer, EntityRecognizer, EntitySet};

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{ArticleInstance, ChainInstance, Records};
use crate::{rng, Error, Result};

/// An instance the builders can restrict and rewrite.
///
/// Evidence here is the union of all of the article's chains; every other
/// sentence is non-evidence.
pub trait Perturbable: Clone {
    fn key(&self) -> String;
    fn article_id(&self) -> &str;
    fn sentences(&self) -> &[String];
    fn evidence_union(&self) -> BTreeSet<usize>;
    /// Number of sentences outside every chain that an even split samples
    /// (before capping by availability).
    fn sample_budget(&self) -> usize;
    /// Keeps only `keep` (ascending), remapping chains and origins.
    fn retain(&self, keep: &[usize]) -> Self;
    fn set_sentence(&mut self, index: usize, text: String);
}

fn remap(chain: &[usize], keep: &[usize]) -> Vec<usize> {
    chain
        .iter()
        .filter_map(|i| keep.binary_search(i).ok())
        .collect()
}

impl Perturbable for ChainInstance {
    fn key(&self) -> String {
        self.id()
    }

    fn article_id(&self) -> &str {
        &self.article_id
    }

    fn sentences(&self) -> &[String] {
        &self.sentences
    }

    fn evidence_union(&self) -> BTreeSet<usize> {
        ChainInstance::evidence_union(self)
    }

    /// Non-evidence of a chain instance is its siblings' sentences plus the
    /// sample, filled to the sum of the article's chain lengths.
    fn sample_budget(&self) -> usize {
        let target: usize = self.article_chains.iter().map(Vec::len).sum();
        let siblings = self.evidence_union().difference(&self.evidence).count();
        target.saturating_sub(siblings)
    }

    fn retain(&self, keep: &[usize]) -> Self {
        let article_chains: Vec<Vec<usize>> =
            self.article_chains.iter().map(|c| remap(c, keep)).collect();
        ChainInstance {
            sentences: keep.iter().map(|&i| self.sentences[i].clone()).collect(),
            origin_map: keep.iter().map(|&i| self.origin_map[i]).collect(),
            evidence: article_chains[self.chain_id].iter().copied().collect(),
            article_chains,
            ..self.clone()
        }
    }

    fn set_sentence(&mut self, index: usize, text: String) {
        self.sentences[index] = text;
    }
}

impl Perturbable for ArticleInstance {
    fn key(&self) -> String {
        self.id.clone()
    }

    fn article_id(&self) -> &str {
        &self.id
    }

    fn sentences(&self) -> &[String] {
        &self.sentences
    }

    fn evidence_union(&self) -> BTreeSet<usize> {
        ArticleInstance::evidence_union(self)
    }

    fn sample_budget(&self) -> usize {
        self.evidence_union().len()
    }

    fn retain(&self, keep: &[usize]) -> Self {
        ArticleInstance {
            sentences: keep.iter().map(|&i| self.sentences[i].clone()).collect(),
            evidence_chains: self
                .evidence_chains
                .iter()
                .map(|c| remap(c, keep))
                .collect(),
            ..self.clone()
        }
    }

    fn set_sentence(&mut self, index: usize, text: String) {
        self.sentences[index] = text;
    }
}

/// Keeps every chain's sentences and a uniformly sampled subset of the
/// remaining ones (size from [`Perturbable::sample_budget`], capped by
/// availability), preserving article order.
pub fn build_even_split<T: Perturbable>(instance: &T, seed: u64) -> T {
    let evidence = instance.evidence_union();
    let others: Vec<usize> = (0..instance.sentences().len())
        .filter(|i| !evidence.contains(i))
        .collect();
    let budget = instance.sample_budget().min(others.len());
    let mut rng = rng::derive(seed, &format!("even:{}", instance.key()));
    let mut keep: Vec<usize> = evidence.iter().copied().collect();
    keep.extend(
        sample(&mut rng, others.len(), budget)
            .into_iter()
            .map(|j| others[j]),
    );
    keep.sort_unstable();
    instance.retain(&keep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    /// Article the sentence came from, when known.
    pub source: Option<String>,
    pub text: String,
    pub entities: EntitySet,
}

/// Candidate replacement sentences with their entity sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplacementPool {
    pub entries: Vec<PoolEntry>,
}

impl ReplacementPool {
    pub fn from_articles(articles: &[ArticleInstance], recognizer: &dyn EntityRecognizer) -> Self {
        let entries = articles
            .iter()
            .flat_map(|a| {
                a.sentences.iter().map(|s| PoolEntry {
                    source: Some(a.id.clone()),
                    text: s.clone(),
                    entities: recognizer.recognize(s),
                })
            })
            .collect();
        ReplacementPool { entries }
    }

    /// Reads a pool file: one sentence per line as `source<TAB>text`, optionally
    /// followed by `<TAB>entity|entity|...`. Lines without a tab are bare text
    /// with unknown source. Entities are recognized when not precomputed.
    pub fn load(path: &Path, recognizer: &dyn EntityRecognizer) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let (source, text, ents) = match fields.as_slice() {
                [text] => (None, *text, None),
                [src, text] => (Some(src.to_string()), *text, None),
                [src, text, ents, ..] => (Some(src.to_string()), *text, Some(*ents)),
                [] => continue,
            };
            let entities = match ents {
                Some(list) => list.split('|').collect(),
                None => recognizer.recognize(text),
            };
            entries.push(PoolEntry {
                source: source.filter(|s| !s.is_empty()),
                text: text.to_string(),
                entities,
            });
        }
        Ok(ReplacementPool { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for e in &self.entries {
            let ents: Vec<&str> = e.entities.iter().collect();
            writeln!(
                w,
                "{}\t{}\t{}",
                e.source.as_deref().unwrap_or(""),
                e.text.replace(['\t', '\n'], " "),
                ents.join("|")
            )
            .map_err(|err| Error::io(path, err))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackKind {
    /// No pool sentence shared an entity; used any sentence with an entity.
    AnyEntity,
    /// No usable pool sentence at all; the original sentence was kept.
    KeptOriginal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEvent {
    pub instance: String,
    pub sentence: usize,
    pub kind: FallbackKind,
}

/// Outcome of [`build_adversarial`]: the perturbed instance, the pool index
/// used for each replaced slot, and any fallbacks taken.
#[derive(Clone, Debug)]
pub struct Adversarial<T> {
    pub instance: T,
    pub replacements: Vec<(usize, usize)>,
    pub fallbacks: Vec<FallbackEvent>,
}

/// Replaces every non-evidence sentence with a pool sentence from another
/// article that shares at least one named entity with the evidence, sampled
/// uniformly with replacement.
pub fn build_adversarial<T: Perturbable>(
    instance: &T,
    pool: &ReplacementPool,
    recognizer: &dyn EntityRecognizer,
    seed: u64,
) -> Adversarial<T> {
    let evidence = instance.evidence_union();
    let mut evidence_entities = EntitySet::new();
    for &i in &evidence {
        evidence_entities.extend(&recognizer.recognize(&instance.sentences()[i]));
    }
    let own = instance.article_id();
    let foreign = |e: &&PoolEntry| e.source.as_deref() != Some(own);
    let sharing: Vec<usize> = pool
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| foreign(e) && e.entities.intersects(&evidence_entities))
        .map(|(i, _)| i)
        .collect();
    let any_entity: Vec<usize> = pool
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| foreign(e) && !e.entities.is_empty())
        .map(|(i, _)| i)
        .collect();

    let mut rng = rng::derive(seed, &format!("adversarial:{}", instance.key()));
    let mut out = instance.clone();
    let mut replacements = Vec::new();
    let mut fallbacks = Vec::new();
    for slot in (0..instance.sentences().len()).filter(|i| !evidence.contains(i)) {
        let (candidates, fallback) = if !sharing.is_empty() {
            (&sharing, None)
        } else if !any_entity.is_empty() {
            (&any_entity, Some(FallbackKind::AnyEntity))
        } else {
            (&sharing, Some(FallbackKind::KeptOriginal))
        };
        if let Some(kind) = fallback {
            log::warn!(
                "{}: sentence {slot}: adversarial fallback {kind:?}",
                instance.key()
            );
            fallbacks.push(FallbackEvent {
                instance: instance.key(),
                sentence: slot,
                kind,
            });
        }
        if candidates.is_empty() {
            continue;
        }
        let pick = candidates[rng.random_range(0..candidates.len())];
        out.set_sentence(slot, pool.entries[pick].text.clone());
        replacements.push((slot, pick));
    }
    Adversarial {
        instance: out,
        replacements,
        fallbacks,
    }
}

/// Which version of a dataset a model is trained or evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    #[default]
    Full,
    Even,
    Adversarial,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "even" | "even-split" => Ok(Self::Even),
            "adversarial" => Ok(Self::Adversarial),
            other => Err(Error::Config(format!("unknown dataset setting {other:?}"))),
        }
    }
}

/// Applies the even-split or adversarial construction to every record.
/// Adversarial needs a replacement pool.
pub fn apply_setting(
    records: &Records,
    setting: Setting,
    seed: u64,
    pool: Option<&ReplacementPool>,
    recognizer: &dyn EntityRecognizer,
) -> Result<(Records, Vec<FallbackEvent>)> {
    fn each<T: Perturbable>(
        items: &[T],
        setting: Setting,
        seed: u64,
        pool: Option<&ReplacementPool>,
        recognizer: &dyn EntityRecognizer,
        fallbacks: &mut Vec<FallbackEvent>,
    ) -> Result<Vec<T>> {
        items
            .iter()
            .map(|x| match setting {
                Setting::Full => Ok(x.clone()),
                Setting::Even => Ok(build_even_split(x, seed)),
                Setting::Adversarial => {
                    let pool = pool.ok_or_else(|| {
                        Error::Config("the adversarial setting needs a replacement pool".into())
                    })?;
                    let adv = build_adversarial(&build_even_split(x, seed), pool, recognizer, seed);
                    fallbacks.extend(adv.fallbacks);
                    Ok(adv.instance)
                }
            })
            .collect()
    }
    let mut fallbacks = Vec::new();
    let out = match records {
        Records::Articles(a) => {
            Records::Articles(each(a, setting, seed, pool, recognizer, &mut fallbacks)?)
        }
        Records::Chains(c) => {
            Records::Chains(each(c, setting, seed, pool, recognizer, &mut fallbacks)?)
        }
    };
    Ok((out, fallbacks))
}

/// Jaccard overlap of two entity sets; 0 when both are empty.
pub fn jaccard(a: &EntitySet, b: &EntitySet) -> f64 {
    let union = a.union_len(b);
    if union == 0 {
        0.0
    } else {
        a.intersection_len(b) as f64 / union as f64
    }
}

/// NE overlap between evidence and non-evidence sentences.
pub fn ne_overlap<S: AsRef<str>>(
    evidence_sentences: &[S],
    non_evidence_sentences: &[S],
    recognizer: &dyn EntityRecognizer,
) -> f64 {
    let collect = |sents: &[S]| {
        let mut set = EntitySet::new();
        for s in sents {
            set.extend(&recognizer.recognize(s.as_ref()));
        }
        set
    };
    jaccard(
        &collect(evidence_sentences),
        &collect(non_evidence_sentences),
    )
}
