//! Longest-match encoding over a frozen vocabulary.

use rustc_hash::FxHashMap;

use crate::corpus::{preprocess, restore, SentinelConfig};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// Byte-level trie over the UTF-8 forms of the vocabulary surfaces.
///
/// Surfaces are whole code point sequences, so a byte match that ends in an
/// accepting state always ends on a character boundary of the input and the
/// longest byte match is the longest code point match.
#[derive(Clone, Debug)]
pub struct MatchAutomaton {
    /// Root transitions, dense. `NO_STATE` marks a missing edge.
    root: Box<[u32; 256]>,
    /// Per state: first edge index, edge count and accepted token id.
    states: Vec<State>,
    edge_bytes: Vec<u8>,
    edge_targets: Vec<u32>,
    accepting: usize,
    max_len: usize,
}

#[derive(Clone, Copy, Debug)]
struct State {
    first_edge: u32,
    edges: u16,
    accept: u32,
}

const NO_STATE: u32 = u32::MAX;
const NO_TOKEN: u32 = u32::MAX;

impl MatchAutomaton {
    /// Compiles `(id, surface)` pairs. Empty surfaces are ignored.
    pub fn compile<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, &'a str)>,
    {
        // Build with sorted child lists, then freeze into flat arrays.
        let mut children: Vec<Vec<(u8, u32)>> = vec![Vec::new()];
        let mut accept: Vec<u32> = vec![NO_TOKEN];
        let mut max_len = 0;
        let mut accepting = 0;
        for (id, surface) in entries {
            if surface.is_empty() {
                continue;
            }
            max_len = max_len.max(surface.len());
            let mut node = 0usize;
            for &b in surface.as_bytes() {
                node = match children[node].binary_search_by_key(&b, |&(c, _)| c) {
                    Ok(i) => children[node][i].1 as usize,
                    Err(i) => {
                        let next = children.len() as u32;
                        children[node].insert(i, (b, next));
                        children.push(Vec::new());
                        accept.push(NO_TOKEN);
                        next as usize
                    }
                };
            }
            if accept[node] != NO_TOKEN {
                return Err(Error::DuplicateSurface(surface.to_string()));
            }
            accept[node] = id;
            accepting += 1;
        }
        let mut root = Box::new([NO_STATE; 256]);
        for &(b, t) in &children[0] {
            root[b as usize] = t;
        }
        let mut states = Vec::with_capacity(children.len());
        let mut edge_bytes = Vec::new();
        let mut edge_targets = Vec::new();
        for (node, kids) in children.iter().enumerate() {
            states.push(State {
                first_edge: edge_bytes.len() as u32,
                edges: kids.len() as u16,
                accept: accept[node],
            });
            for &(b, t) in kids {
                edge_bytes.push(b);
                edge_targets.push(t);
            }
        }
        Ok(MatchAutomaton {
            root,
            states,
            edge_bytes,
            edge_targets,
            accepting,
            max_len,
        })
    }

    /// Every vocabulary token except the special tokens.
    pub fn from_vocab(vocab: &Vocabulary) -> Result<Self> {
        Self::compile(vocab.matchable())
    }

    pub fn accept_states(&self) -> usize {
        self.accepting
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Longest surface in bytes.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    #[inline]
    fn step(&self, state: u32, b: u8) -> u32 {
        let st = self.states[state as usize];
        let lo = st.first_edge as usize;
        let edges = &self.edge_bytes[lo..lo + st.edges as usize];
        match edges.binary_search(&b) {
            Ok(i) => self.edge_targets[lo + i],
            Err(_) => NO_STATE,
        }
    }

    /// Longest surface that prefixes `text[pos..]`: `(id, byte_len)`.
    #[inline]
    pub fn longest_match(&self, text: &[u8], pos: usize) -> Option<(u32, usize)> {
        let mut state = *self.root.get(*text.get(pos)? as usize)?;
        let mut best = None;
        let mut i = pos + 1;
        loop {
            if state == NO_STATE {
                break;
            }
            let acc = self.states[state as usize].accept;
            if acc != NO_TOKEN {
                best = Some((acc, i - pos));
            }
            if i >= text.len() {
                break;
            }
            state = self.step(state, text[i]);
            i += 1;
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Special,
    /// A single code point from the vocabulary.
    Char,
    /// A learned token of two or more code points.
    Multi,
    /// A byte escape for a code point absent from the vocabulary.
    Escape,
}

pub fn token_kind(vocab: &Vocabulary, id: u32) -> Option<TokenKind> {
    if vocab.is_special(id) {
        return Some(TokenKind::Special);
    }
    if vocab.escape_byte(id).is_some() {
        return Some(TokenKind::Escape);
    }
    let s = vocab.get(id)?;
    let mut chars = s.chars();
    Some(match (chars.next(), chars.next()) {
        (Some(_), None) => TokenKind::Char,
        _ => TokenKind::Multi,
    })
}

/// Concatenates token surfaces and escape bytes, without undoing the
/// sentinel substitution.
pub fn decode_preprocessed(ids: &[u32], vocab: &Vocabulary) -> Result<String> {
    let mut bytes = Vec::with_capacity(ids.len() * 4);
    for &id in ids {
        if let Some(s) = vocab.get(id) {
            bytes.extend_from_slice(s.as_bytes());
        } else if let Some(b) = vocab.escape_byte(id) {
            bytes.push(b);
        } else {
            return Err(Error::UnknownId {
                id,
                size: vocab.id_space(),
            });
        }
    }
    String::from_utf8(bytes).map_err(|_| Error::InvalidUtf8)
}

/// Inverse of encoding raw text: surfaces concatenated, sentinel mapped back
/// to a space.
pub fn decode(ids: &[u32], vocab: &Vocabulary, cfg: &SentinelConfig) -> Result<String> {
    Ok(restore(&decode_preprocessed(ids, vocab)?, cfg))
}

/// Shared interface of the length-weighted encoder and the BPE baseline.
pub trait Tokenizer: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Encodes already preprocessed text.
    fn encode(&self, text: &str) -> Vec<u32>;

    fn sentinel(&self) -> SentinelConfig {
        self.vocabulary().sentinel_config()
    }

    /// Preprocesses raw text, then encodes it.
    fn encode_raw(&self, raw: &str) -> Result<Vec<u32>> {
        Ok(self.encode(&preprocess(raw, &self.sentinel())?))
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        decode(ids, self.vocabulary(), &self.sentinel())
    }

    fn decode_preprocessed(&self, ids: &[u32]) -> Result<String> {
        decode_preprocessed(ids, self.vocabulary())
    }
}

/// Greedy left-to-right longest-match encoder.
#[derive(Clone, Debug)]
pub struct LengthMaxEncoder {
    vocab: Vocabulary,
    automaton: MatchAutomaton,
}

impl LengthMaxEncoder {
    pub fn new(vocab: Vocabulary) -> Result<Self> {
        let automaton = MatchAutomaton::from_vocab(&vocab)?;
        Ok(LengthMaxEncoder { vocab, automaton })
    }

    pub fn automaton(&self) -> &MatchAutomaton {
        &self.automaton
    }
}

/// Longest-match encoding with byte-escape fallback.
pub fn encode_with(automaton: &MatchAutomaton, vocab: &Vocabulary, text: &str) -> Vec<u32> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len() / 2 + 1);
    let mut pos = 0;
    while pos < bytes.len() {
        match automaton.longest_match(bytes, pos) {
            Some((id, len)) => {
                out.push(id);
                pos += len;
            }
            None => {
                let c = text[pos..].chars().next().expect("pos is a char boundary");
                for &b in &bytes[pos..pos + c.len_utf8()] {
                    out.push(vocab.escape_id(b));
                }
                pos += c.len_utf8();
            }
        }
    }
    out
}

impl Tokenizer for LengthMaxEncoder {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        encode_with(&self.automaton, &self.vocab, text)
    }
}

pub const BINARY_MAGIC: &[u8; 4] = b"LMTK";
pub const BINARY_VERSION: u8 = 1;

/// Whitespace-separated decimal ids, newline terminated.
pub fn ids_to_text(ids: &[u32]) -> String {
    let mut s = String::with_capacity(ids.len() * 6);
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&id.to_string());
    }
    s.push('\n');
    s
}

pub fn ids_from_text(s: &str) -> Result<Vec<u32>> {
    s.split_whitespace()
        .map(|f| {
            f.parse::<u32>()
                .map_err(|_| Error::MalformedStream(format!("not a token id: {f:?}")))
        })
        .collect()
}

/// `LMTK`, a version byte, then little-endian u32 ids.
pub fn ids_to_binary(ids: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + ids.len() * 4);
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn ids_from_binary(bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() < 5 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::MalformedStream("missing LMTK header".into()));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(Error::MalformedStream(format!("unsupported version {}", bytes[4])));
    }
    let body = &bytes[5..];
    if !body.len().is_multiple_of(4) {
        return Err(Error::MalformedStream("truncated id".into()));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Token frequencies of an id stream.
pub fn frequencies(ids: &[u32]) -> FxHashMap<u32, u64> {
    let mut f = FxHashMap::default();
    for &id in ids {
        *f.entry(id).or_default() += 1;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentinelConfig;
    use proptest::prelude::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::from_tokens(
            tokens.iter().map(|s| s.to_string()).collect(),
            &SentinelConfig::default(),
            16,
        )
        .unwrap()
    }

    fn surfaces<'a>(v: &'a Vocabulary, ids: &[u32]) -> Vec<&'a str> {
        ids.iter().map(|&i| v.get(i).unwrap()).collect()
    }

    /// Tries every surface, longest first, at each position.
    fn naive(v: &Vocabulary, text: &str) -> Vec<u32> {
        let mut by_len: Vec<(u32, &str)> = v.matchable().collect();
        by_len.sort_by_key(|&(_, s)| std::cmp::Reverse(s.chars().count()));
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            match by_len.iter().find(|(_, s)| rest.starts_with(s)) {
                Some(&(id, s)) => {
                    out.push(id);
                    rest = &rest[s.len()..];
                }
                None => {
                    let c = rest.chars().next().unwrap();
                    for b in c.to_string().bytes() {
                        out.push(v.escape_id(b));
                    }
                    rest = &rest[c.len_utf8()..];
                }
            }
        }
        out
    }

    #[test]
    fn longest_of_three_prefixes() {
        let v = vocab(&["a", "ab", "abc"]);
        let a = MatchAutomaton::from_vocab(&v).unwrap();
        assert_eq!(a.longest_match(b"abcd", 0), Some((2, 3)));
        assert_eq!(MatchAutomaton::from_vocab(&vocab(&["a"])).unwrap().longest_match(b"b", 0), None);
    }

    #[test]
    fn cat_sat_walkthrough() {
        let cfg = SentinelConfig::default();
        let raw = ["The cat ", "The ", "cat ", "sat"];
        let pre: Vec<String> = raw.iter().map(|s| preprocess(s, &cfg).unwrap()).collect();
        let v = vocab(&pre.iter().map(String::as_str).collect::<Vec<_>>());
        let enc = LengthMaxEncoder::new(v.clone()).unwrap();
        assert_eq!(enc.automaton().accept_states(), 4);
        let ids = enc.encode_raw("The cat sat").unwrap();
        assert_eq!(surfaces(&v, &ids), ["The\u{2423}cat\u{2423}", "sat"]);
        assert_eq!(enc.decode(&ids).unwrap(), "The cat sat");
        assert_eq!(enc.encode(""), Vec::<u32>::new());
        assert_eq!(enc.decode(&[]).unwrap(), "");
    }

    #[test]
    fn united_states_leading_token() {
        let cfg = SentinelConfig::default();
        let raw = [
            "The United States ",
            "The ",
            "United ",
            "States ",
            "is ",
            "in the midst of ",
            "in ",
            "the ",
            "a ",
            "historic ",
            "snowstorm",
            ".",
        ];
        let pre: Vec<String> = raw.iter().map(|s| preprocess(s, &cfg).unwrap()).collect();
        let v = vocab(&pre.iter().map(String::as_str).collect::<Vec<_>>());
        let enc = LengthMaxEncoder::new(v.clone()).unwrap();
        let ids = enc
            .encode_raw("The United States is in the midst of a historic snowstorm.")
            .unwrap();
        assert_eq!(
            surfaces(&v, &ids),
            [
                "The\u{2423}United\u{2423}States\u{2423}",
                "is\u{2423}",
                "in\u{2423}the\u{2423}midst\u{2423}of\u{2423}",
                "a\u{2423}",
                "historic\u{2423}",
                "snowstorm",
                "."
            ]
        );
    }

    #[test]
    fn unknown_code_point_uses_byte_escapes() {
        let v = vocab(&["<eot>", "<pad>", "a"]);
        let enc = LengthMaxEncoder::new(v.clone()).unwrap();
        let ids = enc.encode("a\u{e9}");
        assert_eq!(ids, [2, v.escape_id(0xc3), v.escape_id(0xa9)]);
        assert_eq!(enc.decode_preprocessed(&ids).unwrap(), "a\u{e9}");
        assert_eq!(token_kind(&v, ids[1]), Some(TokenKind::Escape));
        assert_eq!(token_kind(&v, 0), Some(TokenKind::Special));
    }

    #[test]
    fn specials_are_not_matched_from_text() {
        let v = vocab(&["<eot>", "<pad>", "<", "e", "o", "t", ">"]);
        let enc = LengthMaxEncoder::new(v).unwrap();
        assert_eq!(enc.encode("<eot>").len(), 5);
    }

    #[test]
    fn unknown_id() {
        let v = vocab(&["a"]);
        assert!(matches!(
            decode(&[257], &v, &SentinelConfig::default()),
            Err(Error::UnknownId { id: 257, size: 257 })
        ));
    }

    #[test]
    fn duplicate_surface_rejected() {
        assert!(matches!(
            MatchAutomaton::compile([(0, "ab"), (1, "ab")]),
            Err(Error::DuplicateSurface(_))
        ));
    }

    #[test]
    fn id_formats() {
        let ids = [0, 7, 4_000_000_000];
        assert_eq!(ids_from_text(&ids_to_text(&ids)).unwrap(), ids);
        let bin = ids_to_binary(&ids);
        assert_eq!(&bin[..4], b"LMTK");
        assert_eq!(ids_from_binary(&bin).unwrap(), ids);
        assert!(ids_from_binary(b"LMTK\x01\x00").is_err());
        assert!(ids_from_binary(b"XXXX\x01").is_err());
        assert!(ids_from_text("1 x").is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_scanner(
            toks in proptest::collection::vec("[ab\u{e9}\u{2423}]{1,5}", 1..30),
            text in "[abc\u{e9}\u{2423}]{0,60}",
        ) {
            let mut seen = std::collections::BTreeSet::new();
            let toks: Vec<&str> = toks.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect();
            let v = vocab(&toks);
            let enc = LengthMaxEncoder::new(v.clone()).unwrap();
            let ids = enc.encode(&text);
            prop_assert_eq!(&ids, &naive(&v, &text));
            prop_assert_eq!(enc.decode_preprocessed(&ids).unwrap(), text.clone());
            prop_assert!(ids.len() <= text.len());
        }
    }
}
