use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::validate::{validate_chain_instance, validate_instance};
use super::{ArticleInstance, ChainInstance, Example, Records};
use crate::{Error, Result};

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn to_canonical_line(a: &ArticleInstance) -> String {
    serde_json::to_string(a).expect("article serializes")
}

/// Parses canonical records from a reader; `path` is used in error messages.
pub fn parse_canonical<R: Read>(reader: R, path: &Path) -> Result<Vec<ArticleInstance>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let a: ArticleInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(v) = validate_instance(&a).into_iter().next() {
            return Err(Error::Validation {
                id: v.instance_id,
                message: format!("[{}] {}", v.rule, v.detail),
            });
        }
        out.push(a);
    }
    Ok(out)
}

/// Loads and validates a canonical dataset file, preserving record order.
pub fn load_canonical(path: &Path) -> Result<Vec<ArticleInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_canonical(file, path)
}

pub fn write_canonical(path: &Path, dataset: &[ArticleInstance]) -> Result<()> {
    write_jsonl(path, dataset)
}

pub fn load_chain_instances(path: &Path) -> Result<Vec<ChainInstance>> {
    let chains: Vec<ChainInstance> = read_jsonl(path)?;
    for c in &chains {
        if let Some(v) = validate_chain_instance(c).into_iter().next() {
            return Err(Error::Validation {
                id: v.instance_id,
                message: format!("[{}] {}", v.rule, v.detail),
            });
        }
    }
    Ok(chains)
}

/// Loads either a canonical article file or a chain-instance file, detected
/// from the first record's fields.
pub fn load_records(path: &Path) -> Result<Records> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let first = BufReader::new(file)
        .lines()
        .map_while(|l| l.ok())
        .find(|l| !l.trim().is_empty());
    let is_chain = match first {
        None => return Ok(Records::Articles(Vec::new())),
        Some(line) => serde_json::from_str::<serde_json::Value>(&line)
            .map(|v| v.get("chain_id").is_some())
            .unwrap_or(false),
    };
    if is_chain {
        Ok(Records::Chains(load_chain_instances(path)?))
    } else {
        Ok(Records::Articles(load_canonical(path)?))
    }
}

/// [`load_records`] converted to model-facing examples.
pub fn load_examples(path: &Path) -> Result<Vec<Example>> {
    Ok(load_records(path)?.examples())
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn fingerprint(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::article;
    use crate::corpus::{Split, VeracityLabel};

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(load_canonical(&p).unwrap().is_empty());
        assert!(load_examples(&p).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_chain_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        let a = article("x12", 10, vec![vec![12]]);
        std::fs::write(&p, to_canonical_line(&a) + "\n").unwrap();
        match load_canonical(&p) {
            Err(Error::Validation { id, .. }) => assert_eq!(id, "x12"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        let a = article("ok", 2, vec![vec![0]]);
        std::fs::write(&p, format!("{}\n{{not json\n", to_canonical_line(&a))).unwrap();
        match load_canonical(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn three_line_fixture_field_by_field() {
        let text = r#"{"id":"p1","claim":"Says taxes rose.","speaker":"Jane Roe","label":"false","sentences":["A.","B.","C."],"evidence_chains":[[0,2]],"split":"train"}
{"id":"p2","claim":"Crime fell.","label":"half-true","sentences":["One.","Two."],"evidence_chains":[[1],[0,1]],"split":"dev"}
{"id":"p3","claim":"Jobs grew.","speaker":"","label":"true","sentences":["X."],"evidence_chains":[[0]],"split":"test"}
"#;
        let ds = parse_canonical(text.as_bytes(), Path::new("fixture")).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds[0].id, "p1");
        assert_eq!(ds[0].claim, "Says taxes rose.");
        assert_eq!(ds[0].speaker, "Jane Roe");
        assert_eq!(ds[0].label, VeracityLabel::False);
        assert_eq!(ds[0].sentences, vec!["A.", "B.", "C."]);
        assert_eq!(ds[0].evidence_chains, vec![vec![0, 2]]);
        assert_eq!(ds[0].split, Split::Train);
        assert_eq!(ds[1].id, "p2");
        assert_eq!(ds[1].speaker, "");
        assert_eq!(ds[1].label, VeracityLabel::HalfTrue);
        assert_eq!(ds[1].evidence_chains, vec![vec![1], vec![0, 1]]);
        assert_eq!(ds[1].split, Split::Dev);
        assert_eq!(ds[2].id, "p3");
        assert_eq!(ds[2].label, VeracityLabel::True);
        assert_eq!(ds[2].split, Split::Test);
    }

    #[test]
    fn examples_detect_chain_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chains.jsonl");
        let chains = crate::corpus::split_chains(&[article("a", 4, vec![vec![1], vec![2, 3]])]);
        write_jsonl(&p, &chains).unwrap();
        let ex = load_examples(&p).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[1].id, "a#1");
    }
}
