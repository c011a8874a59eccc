//! Source-format adapters producing canonical records.
//!
//! An [`AdapterConfig`] names the source column for each canonical field,
//! how sentence and evidence columns are encoded, and a label-mapping table.
//! Each source format has a preset; a TOML file can override any part of it.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use super::{pylit, write_canonical, ArticleInstance, Split, VeracityLabel};
use crate::text::{split_sentences, word_tokens};
use crate::{Error, Result};

pub const ADAPTER_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Politihop,
    LiarPlus,
    Fever,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "politihop" => Ok(Self::Politihop),
            "liar_plus" | "liar-plus" => Ok(Self::LiarPlus),
            "fever" => Ok(Self::Fever),
            other => Err(Error::Config(format!("unknown source format {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Jsonl,
    Tsv,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceFormat {
    /// JSON or Python list of strings.
    List,
    /// Running text, split into sentences.
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceFormat {
    /// List of lists of sentence indices.
    Chains,
    /// Mapping chain id -> list of sentence indices.
    ChainMap,
    /// FEVER evidence sets: each set is a list of `[annotation, evidence, page, line]`
    /// items (resolved through the `sentence_keys` column) or bare indices.
    FeverSets,
    /// One chain: the sentences whose text occurs in the `summary` column.
    SummaryMatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Columns {
    pub id: String,
    pub claim: String,
    #[serde(default)]
    pub speaker: Option<String>,
    pub label: String,
    pub sentences: String,
    pub evidence: String,
    #[serde(default)]
    pub split: Option<String>,
    #[serde(default)]
    pub summary: Option<String>,
    #[serde(default)]
    pub sentence_keys: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub schema_version: u32,
    pub input: InputKind,
    #[serde(default = "yes")]
    pub has_header: bool,
    #[serde(default)]
    pub quoting: Option<bool>,
    /// Merge rows sharing an id (e.g. one row per annotator); chains are unioned
    /// and identical chains collapse.
    #[serde(default)]
    pub group_by_id: bool,
    #[serde(default)]
    pub default_split: Split,
    pub columns: Columns,
    pub sentence_format: SentenceFormat,
    pub evidence_format: EvidenceFormat,
    #[serde(default)]
    pub index_base: usize,
    /// Source label (case-insensitive) -> canonical label.
    pub labels: BTreeMap<String, VeracityLabel>,
}

fn yes() -> bool {
    true
}

impl AdapterConfig {
    /// Canonical records read back with every field mapped to itself.
    pub fn identity() -> Self {
        AdapterConfig {
            schema_version: ADAPTER_SCHEMA_VERSION,
            input: InputKind::Jsonl,
            has_header: true,
            quoting: None,
            group_by_id: false,
            default_split: Split::Train,
            columns: Columns {
                id: "id".into(),
                claim: "claim".into(),
                speaker: Some("speaker".into()),
                label: "label".into(),
                sentences: "sentences".into(),
                evidence: "evidence_chains".into(),
                split: Some("split".into()),
                summary: None,
                sentence_keys: None,
            },
            sentence_format: SentenceFormat::List,
            evidence_format: EvidenceFormat::Chains,
            index_base: 0,
            labels: VeracityLabel::ALL
                .iter()
                .map(|l| (l.as_str().to_string(), *l))
                .collect(),
        }
    }

    pub fn preset(format: SourceFormat) -> Self {
        use VeracityLabel::*;
        let labels = |pairs: &[(&str, VeracityLabel)]| {
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };
        match format {
            SourceFormat::Politihop => AdapterConfig {
                input: InputKind::Tsv,
                group_by_id: true,
                columns: Columns {
                    id: "article_id".into(),
                    claim: "statement".into(),
                    speaker: Some("author".into()),
                    label: "annotated_label".into(),
                    sentences: "ruling".into(),
                    evidence: "annotated_evidence".into(),
                    split: None,
                    summary: None,
                    sentence_keys: None,
                },
                evidence_format: EvidenceFormat::ChainMap,
                ..Self::identity()
            },
            SourceFormat::LiarPlus => AdapterConfig {
                columns: Columns {
                    id: "id".into(),
                    claim: "statement".into(),
                    speaker: Some("speaker".into()),
                    label: "label".into(),
                    sentences: "article_sentences".into(),
                    evidence: "justification".into(),
                    split: None,
                    summary: Some("justification".into()),
                    sentence_keys: None,
                },
                evidence_format: EvidenceFormat::SummaryMatch,
                labels: labels(&[
                    ("pants-fire", False),
                    ("false", False),
                    ("barely-true", False),
                    ("half-true", HalfTrue),
                    ("mostly-true", True),
                    ("true", True),
                ]),
                ..Self::identity()
            },
            SourceFormat::Fever => AdapterConfig {
                columns: Columns {
                    id: "id".into(),
                    claim: "claim".into(),
                    speaker: None,
                    label: "label".into(),
                    sentences: "sentences".into(),
                    evidence: "evidence".into(),
                    split: None,
                    summary: None,
                    sentence_keys: Some("sentence_keys".into()),
                },
                evidence_format: EvidenceFormat::FeverSets,
                labels: labels(&[
                    ("supports", True),
                    ("refutes", False),
                    ("not enough info", HalfTrue),
                ]),
                ..Self::identity()
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AdapterConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != ADAPTER_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "adapter schema_version {} unsupported (expected {ADAPTER_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("adapter config serializes")
    }

    fn lookup_label(&self, raw: &str) -> Option<VeracityLabel> {
        let key = raw.trim().to_lowercase();
        self.labels
            .iter()
            .find(|(k, _)| k.to_lowercase() == key)
            .map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub records_read: usize,
    pub instances_written: usize,
    pub merged_rows: usize,
    /// Ids of records dropped because they carried no evidence chain.
    pub skipped_without_evidence: Vec<String>,
    pub label_mapping: BTreeMap<String, VeracityLabel>,
}

/// A source row: named fields (JSON objects or headed files) or positional
/// fields (headerless files, addressed by 0-based index).
enum Row {
    Json(serde_json::Map<String, Value>),
    Fields(Vec<String>),
}

impl Row {
    fn get(&self, column: &str, header: &HashMap<String, usize>) -> Option<Value> {
        match self {
            Row::Json(m) => m.get(column).cloned(),
            Row::Fields(fields) => {
                let idx = header
                    .get(column)
                    .copied()
                    .or_else(|| column.parse().ok())?;
                fields.get(idx).map(|s| Value::String(s.clone()))
            }
        }
    }
}

fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Strings holding JSON or Python containers are decoded; other values pass through.
fn decode(v: Value) -> std::result::Result<Value, String> {
    match v {
        Value::String(s) => {
            let t = s.trim();
            if t.starts_with(['[', '{', '(']) {
                serde_json::from_str(t).or_else(|_| pylit::parse(t))
            } else {
                Ok(Value::String(s))
            }
        }
        other => Ok(other),
    }
}

fn as_index(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn normalized_words(s: &str) -> String {
    word_tokens(s).join(" ")
}

struct Parsed {
    id: String,
    claim: String,
    speaker: String,
    label: VeracityLabel,
    sentences: Vec<String>,
    chains: Vec<Vec<usize>>,
    split: Split,
}

fn read_rows(
    kind: InputKind,
    cfg: &AdapterConfig,
    path: &Path,
) -> Result<(Vec<(usize, Row)>, HashMap<String, usize>)> {
    let mut header = HashMap::new();
    let mut rows = Vec::new();
    match kind {
        InputKind::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let parse_err = |message: String| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message,
                };
                match serde_json::from_str::<Value>(&line).map_err(|e| parse_err(e.to_string()))? {
                    Value::Object(m) => rows.push((i + 1, Row::Json(m))),
                    _ => return Err(parse_err("record is not a JSON object".into())),
                }
            }
        }
        InputKind::Tsv | InputKind::Csv => {
            let delimiter = if kind == InputKind::Tsv { b'\t' } else { b',' };
            let quoting = cfg.quoting.unwrap_or(kind == InputKind::Csv);
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(delimiter)
                .has_headers(cfg.has_header)
                .quoting(quoting)
                .flexible(true)
                .from_path(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if cfg.has_header {
                let h = reader
                    .headers()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                header = h
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.to_string(), i))
                    .collect();
            }
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1 + usize::from(cfg.has_header),
                    message: e.to_string(),
                })?;
                rows.push((
                    i + 1 + usize::from(cfg.has_header),
                    Row::Fields(rec.iter().map(String::from).collect()),
                ));
            }
            let c = &cfg.columns;
            let required = [&c.id, &c.claim, &c.label, &c.sentences, &c.evidence];
            let optional = [&c.speaker, &c.split, &c.summary, &c.sentence_keys];
            for col in required.into_iter().chain(optional.into_iter().flatten()) {
                let known = header.contains_key(col.as_str())
                    || (!cfg.has_header && col.parse::<usize>().is_ok());
                if !known && !(Some(col) == c.speaker.as_ref()) {
                    return Err(Error::Config(format!(
                        "mapped column {col:?} not present in {}",
                        path.display()
                    )));
                }
            }
        }
    }
    Ok((rows, header))
}

fn parse_row(
    cfg: &AdapterConfig,
    row: &Row,
    header: &HashMap<String, usize>,
    line: usize,
    path: &Path,
    unknown_labels: &mut BTreeSet<String>,
) -> Result<Option<Parsed>> {
    let c = &cfg.columns;
    let required = |col: &str| {
        row.get(col, header).ok_or_else(|| {
            Error::Config(format!(
                "{}: line {line}: mapped column {col:?} missing",
                path.display()
            ))
        })
    };
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let id = as_text(&required(&c.id)?);
    let claim = as_text(&required(&c.claim)?);
    let speaker = c
        .speaker
        .as_ref()
        .and_then(|col| row.get(col, header))
        .map(|v| as_text(&v))
        .unwrap_or_default();
    let raw_label = as_text(&required(&c.label)?);
    let label = match cfg.lookup_label(&raw_label) {
        Some(l) => l,
        None => {
            unknown_labels.insert(raw_label);
            return Ok(None);
        }
    };
    let split = match c.split.as_ref().and_then(|col| row.get(col, header)) {
        Some(v) => as_text(&v).parse()?,
        None => cfg.default_split,
    };

    let sentences: Vec<String> = match cfg.sentence_format {
        SentenceFormat::Text => split_sentences(&as_text(&required(&c.sentences)?)),
        SentenceFormat::List => match decode(required(&c.sentences)?).map_err(&bad)? {
            Value::Array(items) => items.iter().map(as_text).collect(),
            _ => return Err(bad(format!("column {:?} is not a list", c.sentences))),
        },
    };

    let shift = |v: &Value| -> Result<usize> {
        let i = as_index(v).ok_or_else(|| bad(format!("non-integer sentence index {v}")))?;
        usize::try_from(i - cfg.index_base as i64).map_err(|_| {
            bad(format!(
                "sentence index {i} below index_base {}",
                cfg.index_base
            ))
        })
    };
    let list_of_indices = |v: &Value| -> Result<Vec<usize>> {
        match v {
            Value::Array(items) => items.iter().map(shift).collect(),
            other => Ok(vec![shift(other)?]),
        }
    };

    let mut chains: Vec<Vec<usize>> = match cfg.evidence_format {
        EvidenceFormat::Chains => match decode(required(&c.evidence)?).map_err(&bad)? {
            Value::Array(items) => items.iter().map(list_of_indices).collect::<Result<_>>()?,
            Value::Null => Vec::new(),
            _ => {
                return Err(bad(format!(
                    "column {:?} is not a list of chains",
                    c.evidence
                )))
            }
        },
        EvidenceFormat::ChainMap => match decode(required(&c.evidence)?).map_err(&bad)? {
            Value::Object(m) => {
                let mut entries: Vec<(String, Value)> = m.into_iter().collect();
                entries.sort_by(|a, b| match (a.0.parse::<i64>(), b.0.parse::<i64>()) {
                    (Ok(x), Ok(y)) => x.cmp(&y),
                    _ => a.0.cmp(&b.0),
                });
                entries
                    .iter()
                    .map(|(_, v)| list_of_indices(v))
                    .collect::<Result<_>>()?
            }
            Value::Null => Vec::new(),
            _ => {
                return Err(bad(format!(
                    "column {:?} is not a chain mapping",
                    c.evidence
                )))
            }
        },
        EvidenceFormat::FeverSets => {
            let keys: HashMap<(String, i64), usize> = match c.sentence_keys.as_ref() {
                Some(col) => match row.get(col, header).map(decode).transpose().map_err(&bad)? {
                    Some(Value::Array(items)) => items
                        .iter()
                        .enumerate()
                        .filter_map(|(i, k)| match k {
                            Value::Array(pair) if pair.len() == 2 => {
                                Some(((as_text(&pair[0]), as_index(&pair[1])?), i))
                            }
                            _ => None,
                        })
                        .collect(),
                    _ => HashMap::new(),
                },
                None => HashMap::new(),
            };
            let sets = match decode(required(&c.evidence)?).map_err(&bad)? {
                Value::Array(items) => items,
                _ => Vec::new(),
            };
            let mut out = Vec::new();
            'sets: for set in &sets {
                let Value::Array(items) = set else { continue };
                let mut chain = Vec::new();
                for item in items {
                    match item {
                        Value::Array(parts) if parts.len() == 4 => {
                            let (Some(page), Some(line_no)) =
                                (parts[2].as_str(), as_index(&parts[3]))
                            else {
                                continue 'sets;
                            };
                            match keys.get(&(page.to_string(), line_no)) {
                                Some(&i) => chain.push(i),
                                None => continue 'sets,
                            }
                        }
                        other => chain.push(shift(other)?),
                    }
                }
                if !chain.is_empty() {
                    out.push(chain);
                }
            }
            out
        }
        EvidenceFormat::SummaryMatch => {
            let col = c.summary.as_ref().unwrap_or(&c.evidence);
            let summary = normalized_words(&as_text(&required(col)?));
            let chain: Vec<usize> = sentences
                .iter()
                .enumerate()
                .filter(|(_, s)| {
                    let n = normalized_words(s);
                    n.split(' ').count() >= 3 && summary.contains(&n)
                })
                .map(|(i, _)| i)
                .collect();
            if chain.is_empty() {
                Vec::new()
            } else {
                vec![chain]
            }
        }
    };
    for chain in &mut chains {
        chain.sort_unstable();
    }
    Ok(Some(Parsed {
        id,
        claim,
        speaker,
        label,
        sentences,
        chains,
        split,
    }))
}

/// Translates a source file into canonical instances.
pub fn import_records(
    format: SourceFormat,
    path: &Path,
    cfg: &AdapterConfig,
) -> Result<(Vec<ArticleInstance>, ImportReport)> {
    log::debug!("importing {} as {format:?}", path.display());
    let (rows, header) = read_rows(cfg.input, cfg, path)?;
    let mut unknown = BTreeSet::new();
    let mut report = ImportReport {
        records_read: rows.len(),
        label_mapping: cfg.labels.clone(),
        ..Default::default()
    };
    let mut out: Vec<ArticleInstance> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (line, row) in &rows {
        let Some(p) = parse_row(cfg, row, &header, *line, path, &mut unknown)? else {
            continue;
        };
        if cfg.group_by_id {
            if let Some(&slot) = by_id.get(&p.id) {
                let existing = &mut out[slot];
                for chain in p.chains {
                    if !existing.evidence_chains.contains(&chain) {
                        existing.evidence_chains.push(chain);
                    }
                }
                report.merged_rows += 1;
                continue;
            }
            by_id.insert(p.id.clone(), out.len());
        }
        out.push(ArticleInstance {
            id: p.id,
            claim: p.claim,
            speaker: p.speaker,
            label: p.label,
            sentences: p.sentences,
            evidence_chains: p.chains,
            split: p.split,
        });
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownLabel(unknown.into_iter().collect()));
    }
    let (kept, dropped): (Vec<_>, Vec<_>) =
        out.into_iter().partition(|a| !a.evidence_chains.is_empty());
    report.skipped_without_evidence = dropped.into_iter().map(|a| a.id).collect();
    for a in &kept {
        if let Some(v) = super::validate_instance(a).into_iter().next() {
            return Err(Error::Validation {
                id: v.instance_id,
                message: format!("[{}] {}", v.rule, v.detail),
            });
        }
    }
    report.instances_written = kept.len();
    Ok((kept, report))
}

/// Imports a source file and writes the canonical file to `out`.
pub fn import_dataset(
    format: SourceFormat,
    path: &Path,
    cfg: &AdapterConfig,
    out: &Path,
) -> Result<ImportReport> {
    let (instances, report) = import_records(format, path, cfg)?;
    write_canonical(out, &instances)?;
    for id in &report.skipped_without_evidence {
        log::warn!("{id}: no evidence chain, record skipped");
    }
    Ok(report)
}
