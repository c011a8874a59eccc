use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Normalized (case-folded, whitespace-collapsed) named entities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet(BTreeSet<String>);

pub fn normalize_entity(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl EntitySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the normalized form; empty strings are ignored.
    pub fn insert(&mut self, raw: &str) -> bool {
        let n = normalize_entity(raw);
        !n.is_empty() && self.0.insert(n)
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.0.contains(&normalize_entity(entity))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn intersects(&self, other: &EntitySet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().any(|e| large.0.contains(e))
    }

    pub fn intersection_len(&self, other: &EntitySet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn union_len(&self, other: &EntitySet) -> usize {
        self.0.union(&other.0).count()
    }

    pub fn extend(&mut self, other: &EntitySet) {
        self.0.extend(other.0.iter().cloned());
    }
}

impl<'a> FromIterator<&'a str> for EntitySet {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut s = EntitySet::new();
        for e in iter {
            s.insert(e);
        }
        s
    }
}

/// Pluggable named-entity recognizer.
pub trait EntityRecognizer: Send + Sync {
    fn recognize(&self, text: &str) -> EntitySet;
}

/// Dependency-free fallback: maximal runs of capitalized tokens that do not
/// start a sentence, plus every all-caps token of two or more letters.
///
/// Trailing punctuation on a token closes the current run, so
/// "Wuhan, China" yields two entities.
#[derive(Clone, Copy, Debug, Default)]
pub struct CapitalizationRecognizer;

fn is_all_caps(token: &str) -> bool {
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

impl EntityRecognizer for CapitalizationRecognizer {
    fn recognize(&self, text: &str) -> EntitySet {
        let mut out = EntitySet::new();
        let mut run: Vec<&str> = Vec::new();
        let mut sentence_start = true;
        for raw in text.split_whitespace() {
            let core = raw.trim_matches(|c: char| !c.is_alphanumeric());
            let leading_punct = raw.starts_with(|c: char| !c.is_alphanumeric());
            let trailing = &raw[raw
                .rfind(|c: char| c.is_alphanumeric())
                .map_or(0, |i| i + 1)..];
            if leading_punct && !run.is_empty() {
                out.insert(&run.join(" "));
                run.clear();
            }
            if !core.is_empty() {
                if is_all_caps(core) {
                    out.insert(core);
                }
                let capitalized = core.chars().next().is_some_and(char::is_uppercase);
                if capitalized && !sentence_start {
                    run.push(core);
                } else if !run.is_empty() {
                    out.insert(&run.join(" "));
                    run.clear();
                }
                sentence_start = false;
            }
            if !trailing.is_empty() && !run.is_empty() {
                out.insert(&run.join(" "));
                run.clear();
            }
            if trailing.contains(['.', '!', '?']) {
                sentence_start = true;
            }
        }
        if !run.is_empty() {
            out.insert(&run.join(" "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ents(text: &str) -> Vec<String> {
        CapitalizationRecognizer
            .recognize(text)
            .iter()
            .map(String::from)
            .collect()
    }

    #[test]
    fn empty_text() {
        assert!(ents("").is_empty());
    }

    #[test]
    fn wuhan_example() {
        assert_eq!(
            ents("The virus reached Wuhan, China on Monday."),
            vec!["china", "monday", "wuhan"]
        );
    }

    #[test]
    fn no_capitalized_non_initial_tokens() {
        assert!(ents("Nothing here is named at all.").is_empty());
    }

    #[test]
    fn multiword_spans_and_all_caps() {
        assert_eq!(
            ents("Reports from the New York Times cite COVID-19 data. Iran was next."),
            vec!["covid-19", "new york times"]
        );
        // sentence-initial "Iran" is skipped; a later mention is kept
        assert_eq!(
            ents("Iran said so. Officials in Iran agreed."),
            vec!["iran"]
        );
    }

    #[test]
    fn entity_set_normalizes() {
        let s: EntitySet = ["  New   York ", "new york", ""].into_iter().collect();
        assert_eq!(s.len(), 1);
        assert!(s.contains("NEW YORK"));
    }
}
