use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementMode {
    Label,
    Sentence,
}

impl FromStr for AgreementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(Self::Label),
            "sentence" => Ok(Self::Sentence),
            other => Err(Error::Config(format!("unknown agreement mode {other:?}"))),
        }
    }
}

/// One annotated item: per-rater labels and/or per-rater evidence sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub num_sentences: usize,
    #[serde(default)]
    pub evidence: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub fleiss_kappa: Option<f64>,
    pub krippendorff_alpha: Option<f64>,
    /// Items (label mode) or articles with a defined value (sentence mode).
    pub items: usize,
}

fn category_counts(ratings: &[Vec<usize>], categories: usize) -> Vec<Vec<usize>> {
    ratings
        .iter()
        .map(|row| {
            let mut c = vec![0; categories];
            for &r in row {
                c[r] += 1;
            }
            c
        })
        .collect()
}

fn check_table(ratings: &[Vec<usize>]) -> Result<usize> {
    let m = ratings
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("no items to compare"))?;
    if m < 2 {
        return Err(Error::invalid("agreement needs at least two raters"));
    }
    if ratings.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(
            "every item needs the same number of ratings",
        ));
    }
    Ok(ratings.iter().flatten().max().map_or(0, |&c| c + 1))
}

/// Fleiss' κ for items × raters nominal codes; `None` when chance agreement is 1.
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<Option<f64>> {
    let k = check_table(ratings)?;
    let n = ratings[0].len() as f64;
    let counts = category_counts(ratings, k);
    let items = counts.len() as f64;
    let p_bar = counts
        .iter()
        .map(|c| (c.iter().map(|&x| (x * x) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = counts.iter().map(|c| c[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(None);
    }
    Ok(Some((p_bar - p_e) / (1.0 - p_e)))
}

/// Krippendorff's α for nominal data without missing values; `None` when
/// only one category occurs.
pub fn krippendorff_alpha(ratings: &[Vec<usize>]) -> Result<Option<f64>> {
    let k = check_table(ratings)?;
    let mut o = vec![vec![0.0; k]; k];
    for row in ratings {
        let m = row.len() as f64;
        for (i, &a) in row.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if i != j {
                    o[a][b] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for j in 0..k {
            if c != j {
                d_o += o[c][j];
                d_e += n_c[c] * n_c[j];
            }
        }
    }
    if d_e == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - (n - 1.0) * d_o / d_e))
}

fn encode_labels(records: &[AnnotationRecord]) -> Vec<Vec<usize>> {
    let mut codes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        for l in &r.labels {
            let next = codes.len();
            codes.entry(l.as_str()).or_insert(next);
        }
    }
    records
        .iter()
        .map(|r| r.labels.iter().map(|l| codes[l.as_str()]).collect())
        .collect()
}

/// Label mode: one item per record. Sentence mode: each record is an article
/// whose sentences are items coded evidence / non-evidence per rater; values
/// are averaged over articles where they are defined.
pub fn agreement(records: &[AnnotationRecord], mode: AgreementMode) -> Result<Agreement> {
    match mode {
        AgreementMode::Label => {
            let table = encode_labels(records);
            Ok(Agreement {
                fleiss_kappa: fleiss_kappa(&table)?,
                krippendorff_alpha: krippendorff_alpha(&table)?,
                items: records.len(),
            })
        }
        AgreementMode::Sentence => {
            if records.is_empty() {
                return Err(Error::invalid("no articles to compare"));
            }
            let (mut kappas, mut alphas) = (Vec::new(), Vec::new());
            for r in records {
                if r.evidence.iter().flatten().any(|&i| i >= r.num_sentences) {
                    return Err(Error::Validation {
                        id: r.id.clone(),
                        message: "evidence index out of range".into(),
                    });
                }
                let table: Vec<Vec<usize>> = (0..r.num_sentences)
                    .map(|s| {
                        r.evidence
                            .iter()
                            .map(|e| usize::from(e.contains(&s)))
                            .collect()
                    })
                    .collect();
                if table.is_empty() {
                    continue;
                }
                kappas.extend(fleiss_kappa(&table)?);
                alphas.extend(krippendorff_alpha(&table)?);
            }
            let mean =
                |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
            Ok(Agreement {
                fleiss_kappa: mean(&kappas),
                krippendorff_alpha: mean(&alphas),
                items: alphas.len(),
            })
        }
    }
}
