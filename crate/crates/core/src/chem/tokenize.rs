//! Regex tokenizer and corpus-built vocabulary.
//!
//! Token ids are 1-based: PAD = 1, BOS = 2, EOS = 3, UNK = 4, and corpus
//! tokens follow from 5 up to `R = len()`. Characters not covered by the
//! tokenizer pattern become single-character tokens mapped to UNK.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tables::tables;

pub type TokenId = u32;

pub const PAD: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;
pub const UNK: TokenId = 4;
const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&tables().tokenizer_pattern).expect("tokenizer pattern compiles"))
}

/// Splits text into raw tokens. Uncovered characters are returned one per
/// token with `false` as the second element.
pub fn split_tokens(text: &str) -> Vec<(&str, bool)> {
    let mut out = Vec::new();
    let mut last = 0;
    for m in pattern().find_iter(text) {
        push_uncovered(&text[last..m.start()], &mut out);
        out.push((m.as_str(), true));
        last = m.end();
    }
    push_uncovered(&text[last..], &mut out);
    out
}

fn push_uncovered<'a>(gap: &'a str, out: &mut Vec<(&'a str, bool)>) {
    for (i, c) in gap.char_indices() {
        out.push((&gap[i..i + c.len_utf8()], false));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = &'static str;

    fn try_from(entries: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::from_entries(entries).ok_or("bad reserved prefix or duplicate vocabulary entry")
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.entries
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its full entry list (reserved entries
    /// first). Returns `None` if the reserved prefix is wrong or entries
    /// repeat.
    pub fn from_entries(entries: Vec<String>) -> Option<Self> {
        if entries.len() < RESERVED.len() || entries[..4].iter().zip(RESERVED).any(|(a, b)| a != b) {
            return None;
        }
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.clone(), i as TokenId + 1).is_some() {
                return None;
            }
        }
        Some(Vocabulary { entries, index })
    }

    /// R: number of ids including the reserved ones.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.entries.get((id as usize).checked_sub(1)?).map(String::as_str)
    }

    pub fn is_special(id: TokenId) -> bool {
        id <= UNK
    }

    /// SHA-256 over the newline-joined entries, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Vocabulary from every token in the corpus, ordered by descending
/// frequency, ties lexicographic.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[S]) -> Vocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in corpus {
        for (tok, _) in split_tokens(s.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut toks: Vec<(&str, usize)> = counts.into_iter().collect();
    toks.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(toks.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Vocabulary::from_entries(entries).expect("reserved prefix and unique tokens")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    /// BOS, tokens, EOS.
    pub ids: Vec<TokenId>,
    /// Number of UNK substitutions.
    pub unk_count: usize,
}

impl TokenSequence {
    pub fn has_unk(&self) -> bool {
        self.unk_count > 0
    }
}

pub fn tokenize(text: &str, v: &Vocabulary) -> TokenSequence {
    let mut ids = vec![BOS];
    let mut unk_count = 0;
    for (tok, _) in split_tokens(text) {
        match v.id(tok) {
            Some(id) if !Vocabulary::is_special(id) => ids.push(id),
            _ => {
                ids.push(UNK);
                unk_count += 1;
            }
        }
    }
    ids.push(EOS);
    TokenSequence { ids, unk_count }
}

/// Concatenates token strings up to the first EOS. PAD and BOS are skipped;
/// UNK renders as `?`.
pub fn detokenize(ids: &[TokenId], v: &Vocabulary) -> String {
    let mut out = String::new();
    for &id in ids {
        match id {
            EOS => break,
            PAD | BOS => {}
            UNK => out.push('?'),
            _ => out.push_str(v.token(id).unwrap_or("?")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(corpus: &[&str]) -> Vocabulary {
        build_vocabulary(corpus)
    }

    fn names(seq: &TokenSequence, v: &Vocabulary) -> Vec<String> {
        seq.ids.iter().map(|&i| v.token(i).unwrap().to_string()).collect()
    }

    #[test]
    fn simple_sequences() {
        let v = vocab(&["CCO", "CCl"]);
        assert_eq!(names(&tokenize("CCO", &v), &v), ["<bos>", "C", "C", "O", "<eos>"]);
        assert_eq!(names(&tokenize("CCl", &v), &v), ["<bos>", "C", "Cl", "<eos>"]);
    }

    #[test]
    fn benzene_round_trip() {
        let v = vocab(&["c1ccccc1"]);
        let seq = tokenize("c1ccccc1", &v);
        assert!(!seq.has_unk());
        assert_eq!(detokenize(&seq.ids, &v), "c1ccccc1");
    }

    #[test]
    fn vocabulary_order_and_size() {
        let v = vocab(&["CC", "CO"]);
        assert_eq!(v.len(), 6);
        assert_eq!(&v.entries()[4..], ["C", "O"]);
        assert_eq!(vocab(&["CO", "CC"]), v);
        assert_eq!(vocab(&["CO", "CC"]).hash(), v.hash());
        assert!(vocab(&["CCl"]).id("Cl").is_some());
        assert!(vocab(&["CCl"]).id("l").is_none());
    }

    #[test]
    fn frequency_ties_are_lexicographic() {
        let v = vocab(&["ON", "NO"]);
        assert_eq!(&v.entries()[4..], ["N", "O"]);
    }

    #[test]
    fn bracket_and_percent_tokens() {
        let toks: Vec<&str> = split_tokens("C%12[NH3+]Br").into_iter().map(|t| t.0).collect();
        assert_eq!(toks, ["C", "%12", "[NH3+]", "Br"]);
    }

    #[test]
    fn unknown_characters_are_flagged() {
        let v = vocab(&["CC"]);
        let seq = tokenize("CxN", &v);
        assert_eq!(seq.unk_count, 2);
        assert_eq!(seq.ids, [BOS, 5, UNK, UNK, EOS]);
        assert_eq!(detokenize(&seq.ids, &v), "C??");
    }

    #[test]
    fn serde_round_trip() {
        let v = vocab(&["CCO"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocabulary>(r#"["C","O"]"#).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_without_unk(s in "[CNOcno()=#123]{1,30}") {
            let v = build_vocabulary(&[s.as_str()]);
            let seq = tokenize(&s, &v);
            prop_assert_eq!(seq.unk_count, 0);
            prop_assert_eq!(detokenize(&seq.ids, &v), s);
            prop_assert!(seq.ids.iter().all(|&i| i >= 1 && i as usize <= v.len()));
        }
    }
}
