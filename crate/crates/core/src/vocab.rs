//! Ordered token vocabulary with stable ids.
//!
//! Layout: special tokens first, then the single-character alphabet in code
//! point order, then learned tokens in the order they were accepted. Ids
//! `len()..len() + 256` are reserved for byte escapes and are not stored.

use std::fs;
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::SentinelConfig;
use crate::{Error, Result};

pub const EOT_TOKEN: &str = "<eot>";
pub const PAD_TOKEN: &str = "<pad>";
pub const SPECIAL_TOKENS: [&str; 2] = [EOT_TOKEN, PAD_TOKEN];
pub const BYTE_ESCAPES: usize = 256;
pub const FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: FxHashMap<String, u32>,
    n_special: usize,
    n_base: usize,
    pub sentinel: char,
    pub l_max: usize,
    pub word_separated: bool,
    pub corpus_digest: Option<String>,
    pub iterations: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    sentinel: String,
    l_max: usize,
    word_separated: bool,
    tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corpus_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
}

impl Vocabulary {
    /// Special tokens plus the given alphabet, sorted and deduplicated.
    pub fn with_alphabet(alphabet: impl IntoIterator<Item = char>, sentinel: &SentinelConfig, l_max: usize) -> Self {
        let mut chars: Vec<char> = alphabet.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(chars.iter().map(|c| c.to_string()))
            .collect();
        Self::from_tokens(tokens, sentinel, l_max).expect("alphabet tokens are distinct")
    }

    /// Rebuilds a vocabulary from its token list. Leading special tokens and
    /// the single-character run after them form the base.
    pub fn from_tokens(tokens: Vec<String>, sentinel: &SentinelConfig, l_max: usize) -> Result<Self> {
        let mut index = FxHashMap::default();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateSurface(t.clone()));
            }
        }
        let n_special = tokens
            .iter()
            .zip(SPECIAL_TOKENS)
            .take_while(|(t, s)| t.as_str() == *s)
            .count();
        let n_base = n_special
            + tokens[n_special..]
                .iter()
                .take_while(|t| t.chars().count() == 1)
                .count();
        Ok(Vocabulary {
            tokens,
            index,
            n_special,
            n_base,
            sentinel: sentinel.sentinel,
            l_max,
            word_separated: sentinel.word_separated,
            corpus_digest: None,
            iterations: None,
        })
    }

    pub fn sentinel_config(&self) -> SentinelConfig {
        SentinelConfig::new(self.sentinel).word_separated(self.word_separated)
    }

    /// Appends a learned token and returns its id.
    pub fn push(&mut self, surface: impl Into<String>) -> Result<u32> {
        let surface = surface.into();
        if self.index.contains_key(&surface) {
            return Err(Error::DuplicateSurface(surface));
        }
        let id = self.tokens.len() as u32;
        self.index.insert(surface.clone(), id);
        self.tokens.push(surface);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn special_count(&self) -> usize {
        self.n_special
    }

    /// Specials plus alphabet.
    pub fn base_len(&self) -> usize {
        self.n_base
    }

    pub fn alphabet(&self) -> &[String] {
        &self.tokens[self.n_special..self.n_base]
    }

    pub fn learned(&self) -> &[String] {
        &self.tokens[self.n_base..]
    }

    /// Tokens that can be matched from text (everything but specials).
    pub fn matchable(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(self.n_special)
            .map(|(i, t)| (i as u32, t.as_str()))
    }

    pub fn get(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    /// Total id space including byte escapes.
    pub fn id_space(&self) -> usize {
        self.tokens.len() + BYTE_ESCAPES
    }

    pub fn escape_id(&self, byte: u8) -> u32 {
        (self.tokens.len() + byte as usize) as u32
    }

    /// The byte an escape id stands for, or `None` for ordinary ids.
    pub fn escape_byte(&self, id: u32) -> Option<u8> {
        let id = id as usize;
        (id >= self.tokens.len() && id < self.id_space()).then(|| (id - self.tokens.len()) as u8)
    }

    pub fn is_special(&self, id: u32) -> bool {
        (id as usize) < self.n_special
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            version: FILE_VERSION,
            sentinel: self.sentinel.to_string(),
            l_max: self.l_max,
            word_separated: self.word_separated,
            tokens: self.tokens.clone(),
            corpus_digest: self.corpus_digest.clone(),
            iterations: self.iterations,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(s)?;
        if file.version != FILE_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported vocabulary version {}",
                file.version
            )));
        }
        let mut chars = file.sentinel.chars();
        let sentinel = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "sentinel must be one code point, got {:?}",
                    file.sentinel
                )))
            }
        };
        let cfg = SentinelConfig::new(sentinel).word_separated(file.word_separated);
        let mut v = Self::from_tokens(file.tokens, &cfg, file.l_max)?;
        v.corpus_digest = file.corpus_digest;
        v.iterations = file.iterations;
        Ok(v)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Vocabulary {
        Vocabulary::with_alphabet("cab\u{2423}".chars(), &SentinelConfig::default(), 16)
    }

    #[test]
    fn layout() {
        let v = base();
        assert_eq!(v.tokens(), ["<eot>", "<pad>", "a", "b", "c", "\u{2423}"]);
        assert_eq!(v.base_len(), 6);
        assert_eq!(v.alphabet().len(), 4);
        assert!(v.learned().is_empty());
        assert_eq!(v.escape_id(0), 6);
        assert_eq!(v.escape_byte(6 + 255), Some(255));
        assert_eq!(v.escape_byte(3), None);
        assert_eq!(v.escape_byte(6 + 256), None);
    }

    #[test]
    fn push_is_append_only() {
        let mut v = base();
        let before: Vec<String> = v.tokens().to_vec();
        assert_eq!(v.push("ab").unwrap(), 6);
        assert_eq!(&v.tokens()[..6], &before[..]);
        assert!(matches!(v.push("ab"), Err(Error::DuplicateSurface(_))));
        assert_eq!(v.learned(), ["ab"]);
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let mut v = base();
        v.push("a\u{2423}b\"\\").unwrap();
        v.corpus_digest = Some("00ff".into());
        v.iterations = Some(1);
        let s = v.to_json();
        let back = Vocabulary::from_json(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Vocabulary::from_json("{").is_err());
        let dup = r#"{"version":1,"sentinel":"_","l_max":4,"word_separated":false,"tokens":["a","a"]}"#;
        assert!(matches!(Vocabulary::from_json(dup), Err(Error::DuplicateSurface(_))));
        let sent = r#"{"version":1,"sentinel":"ab","l_max":4,"word_separated":false,"tokens":[]}"#;
        assert!(Vocabulary::from_json(sent).is_err());
    }
}
