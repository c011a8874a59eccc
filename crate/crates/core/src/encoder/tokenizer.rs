use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// Header line of vocabularies written by this crate. Plain one-token-per-line
/// files (no header) are accepted too.
pub const VOCAB_HEADER: &str = "# hopcheck-vocab v1";

/// Number of `[unusedN]` tokens reserved in built vocabularies.
pub const RESERVED_TOKENS: usize = 128;

const MAX_WORD_CHARS: usize = 100;

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32, 0x2000..=0x206F | 0x3000..=0x303F | 0xFF01..=0xFF0F)
        || matches!(c, '¡' | '¿' | '«' | '»' | '§' | '¶')
}

/// Lowercases, strips accents, and splits on whitespace and punctuation.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .nfd()
        .filter(|c| !unicode_normalization::char::is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_control() && !c.is_whitespace() {
                ' '
            } else {
                c
            }
        })
        .collect();
    let mut out = Vec::new();
    for word in cleaned.split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// WordPiece vocabulary and tokenizer (uncased, BERT conventions).
#[derive(Clone, Debug, PartialEq)]
pub struct Tokenizer {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    reserved: usize,
}

impl Tokenizer {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("vocabulary lists {t:?} twice")));
            }
        }
        for special in [PAD, UNK, CLS, SEP] {
            if !index.contains_key(special) {
                return Err(Error::Config(format!("vocabulary lacks {special}")));
            }
        }
        let reserved = (0..)
            .take_while(|i| index.contains_key(&format!("[unused{i}]")))
            .count();
        Ok(Tokenizer {
            tokens,
            index,
            reserved,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        if lines
            .peek()
            .is_some_and(|l| l.starts_with("# hopcheck-vocab"))
        {
            let header = lines.next().unwrap_or_default();
            if header != VOCAB_HEADER {
                return Err(Error::Config(format!(
                    "unsupported vocabulary header {header:?}"
                )));
            }
        }
        Self::from_tokens(lines.map(str::to_string).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// File contents: header plus one token per line.
    pub fn to_file_string(&self) -> String {
        let mut s = String::from(VOCAB_HEADER);
        s.push('\n');
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    /// Vocabulary built from training text: specials, reserved tokens, every
    /// observed character (word-initial and `##` continuation), then the most
    /// frequent words up to `max_words`.
    pub fn build<S: AsRef<str>>(texts: &[S], max_words: usize) -> Self {
        let mut words: BTreeMap<String, usize> = BTreeMap::new();
        let mut chars: std::collections::BTreeSet<char> = Default::default();
        for t in texts {
            for w in basic_tokenize(t.as_ref()) {
                chars.extend(w.chars());
                *words.entry(w).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP, MASK]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend((0..RESERVED_TOKENS).map(|i| format!("[unused{i}]")));
        let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
        for c in &chars {
            for t in [c.to_string(), format!("##{c}")] {
                if seen.insert(t.clone()) {
                    tokens.push(t);
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = words
            .into_iter()
            .filter(|(w, _)| w.chars().count() > 1)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (w, _) in ranked.into_iter().take(max_words) {
            if seen.insert(w.clone()) {
                tokens.push(w);
            }
        }
        Self::from_tokens(tokens).expect("specials present and tokens unique")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    fn special(&self, token: &str) -> u32 {
        self.index[token]
    }

    pub fn cls_id(&self) -> u32 {
        self.special(CLS)
    }

    pub fn sep_id(&self) -> u32 {
        self.special(SEP)
    }

    pub fn unk_id(&self) -> u32 {
        self.special(UNK)
    }

    /// Count of consecutive `[unused0]`, `[unused1]`, ... tokens.
    pub fn reserved_count(&self) -> usize {
        self.reserved
    }

    pub fn reserved_id(&self, n: usize) -> Option<u32> {
        (n < self.reserved).then(|| self.index[&format!("[unused{n}]")])
    }

    fn wordpiece(&self, word: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(self.unk_id());
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, "##");
                }
                if let Some(&id) = self.index.get(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => {
                    out.push(self.unk_id());
                    return;
                }
            }
            start = end;
        }
        out.extend(pieces);
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for w in basic_tokenize(text) {
            self.wordpiece(&w, &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Tokenizer {
        let toks = [
            "[PAD]",
            "[UNK]",
            "[CLS]",
            "[SEP]",
            "[unused0]",
            "[unused1]",
            "the",
            "un",
            "##aff",
            "##able",
            ",",
            "cafe",
        ];
        Tokenizer::from_tokens(toks.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn basic_splits_punctuation_and_strips_accents() {
        assert_eq!(
            basic_tokenize("Café, UNAFFABLE!"),
            vec!["cafe", ",", "unaffable", "!"]
        );
    }

    #[test]
    fn greedy_longest_match() {
        let t = toy();
        assert_eq!(t.encode("unaffable"), vec![7, 8, 9]);
        assert_eq!(t.encode("The café, xyz"), vec![6, 11, 10, 1]);
        assert_eq!(t.reserved_count(), 2);
    }

    #[test]
    fn built_vocab_never_produces_unknowns_on_its_corpus() {
        let corpus = [
            "Senator Smith voted twice.",
            "Voters rejected the measure in 2019!",
        ];
        let t = Tokenizer::build(&corpus, 3);
        for s in corpus {
            assert!(!t.encode(s).contains(&t.unk_id()));
        }
        assert_eq!(t.reserved_count(), RESERVED_TOKENS);
        let back = Tokenizer::parse(&t.to_file_string()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn missing_special_is_rejected() {
        assert!(Tokenizer::from_tokens(vec!["[PAD]".into(), "[UNK]".into()]).is_err());
        assert!(Tokenizer::parse("# hopcheck-vocab v9\n[PAD]\n").is_err());
    }
}
