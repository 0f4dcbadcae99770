//! Corpus ingestion, space-sentinel preprocessing and sharding.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sequence::TokenSequence;
use crate::{Error, Result};

pub const DEFAULT_SENTINEL: char = '\u{2423}';
pub const DEFAULT_EOT: &str = "<eot>";
/// 512 MiB.
pub const DEFAULT_SHARD_BYTES: usize = 512 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelConfig {
    pub sentinel: char,
    pub word_separated: bool,
}

impl Default for SentinelConfig {
    fn default() -> Self {
        SentinelConfig {
            sentinel: DEFAULT_SENTINEL,
            word_separated: false,
        }
    }
}

impl SentinelConfig {
    pub fn new(sentinel: char) -> Self {
        SentinelConfig {
            sentinel,
            word_separated: false,
        }
    }

    pub fn word_separated(mut self, on: bool) -> Self {
        self.word_separated = on;
        self
    }
}

/// Replaces every U+0020 with the sentinel.
pub fn preprocess(text: &str, cfg: &SentinelConfig) -> Result<String> {
    if let Some(offset) = text.find(cfg.sentinel) {
        return Err(Error::SentinelCollision {
            sentinel: cfg.sentinel,
            offset,
        });
    }
    Ok(text.replace(' ', cfg.sentinel.encode_utf8(&mut [0; 4])))
}

/// Inverse of [`preprocess`].
pub fn restore(text: &str, cfg: &SentinelConfig) -> String {
    text.replace(cfg.sentinel, " ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawCorpus {
    pub documents: Vec<String>,
    pub eot_marker: String,
}

impl RawCorpus {
    pub fn new(documents: Vec<String>) -> Self {
        RawCorpus {
            documents,
            eot_marker: DEFAULT_EOT.to_string(),
        }
    }

    /// Splits a blob at every end-of-text marker. A trailing empty document
    /// (text ending in the marker) is dropped.
    pub fn from_eot_text(text: &str, eot_marker: &str) -> Self {
        let mut documents: Vec<String> = text.split(eot_marker).map(str::to_string).collect();
        if documents.last().is_some_and(|d| d.is_empty()) {
            documents.pop();
        }
        RawCorpus {
            documents,
            eot_marker: eot_marker.to_string(),
        }
    }

    /// One document per non-empty line.
    pub fn from_lines(text: &str) -> Self {
        RawCorpus::new(
            text.lines()
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn read_eot(path: impl AsRef<Path>, eot_marker: &str) -> Result<Self> {
        let text = read_utf8(path.as_ref())?;
        Ok(Self::from_eot_text(&text, eot_marker))
    }

    pub fn read_lines(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_lines(&read_utf8(path.as_ref())?))
    }

    pub fn char_count(&self) -> usize {
        self.documents.iter().map(|d| d.chars().count()).sum()
    }

    /// Splits off the last `fraction` of documents (at least one when the
    /// corpus has two or more).
    pub fn split_tail(mut self, fraction: f64) -> (RawCorpus, RawCorpus) {
        let n = self.documents.len();
        let mut k = (n as f64 * fraction).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        } else {
            k = 0;
        }
        let tail = self.documents.split_off(n - k);
        let marker = self.eot_marker.clone();
        (
            self,
            RawCorpus {
                documents: tail,
                eot_marker: marker,
            },
        )
    }
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    String::from_utf8(bytes).map_err(|_| Error::InvalidUtf8)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shard {
    pub id: usize,
    /// Preprocessed documents laid end to end.
    pub text: String,
    pub byte_len: usize,
    /// Byte offset of each document within `text`.
    pub doc_starts: Vec<usize>,
}

impl Shard {
    pub fn documents(&self) -> impl Iterator<Item = &str> + '_ {
        let ends = self.doc_starts.iter().skip(1).copied().chain([self.text.len()]);
        self.doc_starts
            .iter()
            .zip(ends)
            .map(move |(&s, e)| &self.text[s..e])
    }

    pub fn sequence(&self) -> TokenSequence {
        TokenSequence::from_documents(self.documents())
    }

    pub fn char_count(&self) -> usize {
        crate::sequence::char_count(self.text.as_bytes())
    }
}

/// Preprocesses every document and packs them greedily, in order, into shards
/// of at most `max_shard_bytes` bytes.
pub fn shard(corpus: &RawCorpus, max_shard_bytes: usize, cfg: &SentinelConfig) -> Result<Vec<Shard>> {
    let mut shards = Vec::new();
    let mut cur = Shard {
        id: 0,
        text: String::new(),
        byte_len: 0,
        doc_starts: Vec::new(),
    };
    for (index, doc) in corpus.documents.iter().enumerate() {
        if !corpus.eot_marker.is_empty() && doc.contains(&corpus.eot_marker) {
            return Err(Error::EotCollision {
                index,
                marker: corpus.eot_marker.clone(),
            });
        }
        let doc = preprocess(doc, cfg)?;
        if doc.len() > max_shard_bytes {
            return Err(Error::DocumentTooLarge {
                index,
                bytes: doc.len(),
                cap: max_shard_bytes,
            });
        }
        if !cur.doc_starts.is_empty() && cur.text.len() + doc.len() > max_shard_bytes {
            let id = cur.id + 1;
            shards.push(std::mem::replace(
                &mut cur,
                Shard {
                    id,
                    text: String::new(),
                    byte_len: 0,
                    doc_starts: Vec::new(),
                },
            ));
        }
        cur.doc_starts.push(cur.text.len());
        cur.text.push_str(&doc);
        cur.byte_len = cur.text.len();
    }
    if !cur.doc_starts.is_empty() {
        shards.push(cur);
    }
    Ok(shards)
}

/// Reassembles the preprocessed corpus, documents joined by `eot_marker`.
pub fn join_shards(shards: &[Shard], eot_marker: &str) -> String {
    let docs: Vec<&str> = shards.iter().flat_map(Shard::documents).collect();
    docs.join(eot_marker)
}

/// SHA-256 over the shard documents, hex encoded.
pub fn corpus_digest(shards: &[Shard]) -> String {
    let mut h = Sha256::new();
    for doc in shards.iter().flat_map(Shard::documents) {
        h.update((doc.len() as u64).to_le_bytes());
        h.update(doc.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const LETTERS: &[u8; 52] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// Substitutes each non-sentinel code point, independently with probability
/// `rate`, by a random ASCII letter different from the original.
///
/// For every code point other than the sentinel one `f64` is drawn; when it
/// falls below `rate` a second draw picks the replacement letter.
pub fn inject_noise(text: &str, rate: f64, seed: u64, sentinel: char) -> Result<String> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("noise rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c == sentinel {
            out.push(c);
            continue;
        }
        if rng.gen::<f64>() < rate {
            out.push(random_letter_except(&mut rng, c));
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

fn random_letter_except(rng: &mut impl Rng, c: char) -> char {
    match LETTERS.iter().position(|&l| l as char == c) {
        Some(skip) => {
            let i = rng.gen_range(0..LETTERS.len() - 1);
            LETTERS[if i >= skip { i + 1 } else { i }] as char
        }
        None => LETTERS[rng.gen_range(0..LETTERS.len())] as char,
    }
}
