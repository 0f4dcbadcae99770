//! Frequency-only byte pair encoding baseline over the same preprocessed
//! corpus and alphabet as the length-weighted trainer.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::corpus::{SentinelConfig, Shard};
use crate::encoder::Tokenizer;
use crate::vocab::Vocabulary;
use crate::{Error, Result};

pub use crate::metrics::utilization;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeTable {
    /// Merged pairs in the order they were learned.
    pub merges: Vec<(String, String)>,
    /// Specials, alphabet, then every distinct merge result.
    pub vocab: Vocabulary,
}

#[derive(Serialize, Deserialize)]
struct MergeFile {
    version: u32,
    sentinel: String,
    word_separated: bool,
    alphabet: Vec<String>,
    merges: Vec<(String, String)>,
}

impl MergeTable {
    /// Rebuilds the vocabulary from an alphabet and a merge list.
    pub fn from_merges(
        alphabet: impl IntoIterator<Item = char>,
        merges: Vec<(String, String)>,
        sentinel: &SentinelConfig,
    ) -> Result<Self> {
        let mut vocab = Vocabulary::with_alphabet(alphabet, sentinel, 0);
        for (l, r) in &merges {
            if !vocab.contains(l) || !vocab.contains(r) {
                return Err(Error::InvalidConfig(format!("merge ({l:?}, {r:?}) uses an unknown symbol")));
            }
            let s = format!("{l}{r}");
            if !vocab.contains(&s) {
                vocab.push(s)?;
            }
        }
        Ok(MergeTable { merges, vocab })
    }

    pub fn to_json(&self) -> String {
        let file = MergeFile {
            version: 1,
            sentinel: self.vocab.sentinel.to_string(),
            word_separated: self.vocab.word_separated,
            alphabet: self.vocab.alphabet().to_vec(),
            merges: self.merges.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("merge table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MergeFile = serde_json::from_str(s)?;
        if file.version != 1 {
            return Err(Error::InvalidConfig(format!("unsupported merge table version {}", file.version)));
        }
        let one = |s: &str| {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::InvalidConfig(format!("expected one code point, got {s:?}"))),
            }
        };
        let sentinel = SentinelConfig::new(one(&file.sentinel)?).word_separated(file.word_separated);
        let alphabet = file.alphabet.iter().map(|a| one(a)).collect::<Result<Vec<char>>>()?;
        Self::from_merges(alphabet, file.merges, &sentinel)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug)]
pub struct BpeConfig {
    pub sentinel: SentinelConfig,
    pub min_count: u64,
    pub workers: usize,
}

impl Default for BpeConfig {
    fn default() -> Self {
        BpeConfig {
            sentinel: SentinelConfig::default(),
            min_count: 2,
            workers: 1,
        }
    }
}

const NONE: u32 = u32::MAX;

type Pair = (u32, u32);

struct State<'a> {
    vocab: Vocabulary,
    /// Whether symbol id ends with the separator (word-separated mode only).
    closes_word: Vec<bool>,
    sym: Vec<u32>,
    prev: Vec<u32>,
    next: Vec<u32>,
    counts: FxHashMap<Pair, i64>,
    positions: FxHashMap<Pair, Vec<u32>>,
    heap: BinaryHeap<(i64, Reverse<Pair>)>,
    cfg: &'a BpeConfig,
}

impl State<'_> {
    fn mergeable(&self, a: u32) -> bool {
        !self.cfg.sentinel.word_separated || !self.closes_word[a as usize]
    }

    fn add(&mut self, pair: Pair, pos: u32, touched: &mut FxHashSet<Pair>) {
        if !self.mergeable(pair.0) {
            return;
        }
        *self.counts.entry(pair).or_default() += 1;
        self.positions.entry(pair).or_default().push(pos);
        touched.insert(pair);
    }

    fn remove(&mut self, pair: Pair) {
        if !self.mergeable(pair.0) {
            return;
        }
        if let Some(c) = self.counts.get_mut(&pair) {
            *c -= 1;
        }
    }

    /// Highest count pair, ties broken by the smaller `(left, right)`
    /// surface pair.
    fn best(&mut self) -> Option<(Pair, i64)> {
        let mut top: Option<i64> = None;
        let mut tied: Vec<Pair> = Vec::new();
        while let Some(&(c, Reverse(p))) = self.heap.peek() {
            if top.is_some_and(|t| c < t) {
                break;
            }
            self.heap.pop();
            let cur = self.counts.get(&p).copied().unwrap_or(0);
            if cur != c {
                if cur > 0 {
                    self.heap.push((cur, Reverse(p)));
                }
                continue;
            }
            if cur < self.cfg.min_count as i64 {
                continue;
            }
            top = Some(c);
            if !tied.contains(&p) {
                tied.push(p);
            }
        }
        let c = top?;
        let surf = |p: &Pair| (self.vocab.get(p.0).unwrap(), self.vocab.get(p.1).unwrap());
        let best = *tied.iter().min_by(|a, b| surf(a).cmp(&surf(b))).unwrap();
        for p in tied {
            if p != best {
                self.heap.push((c, Reverse(p)));
            }
        }
        Some((best, c))
    }

    fn merge(&mut self, pair: Pair, new: u32) {
        let (a, b) = pair;
        let mut pos = self.positions.remove(&pair).unwrap_or_default();
        pos.sort_unstable();
        pos.dedup();
        let mut touched = FxHashSet::default();
        for i in pos {
            let i_ = i as usize;
            if self.sym[i_] != a {
                continue;
            }
            let j = self.next[i_];
            if j == NONE || self.sym[j as usize] != b {
                continue;
            }
            let p = self.prev[i_];
            let n = self.next[j as usize];
            if p != NONE {
                self.remove((self.sym[p as usize], a));
            }
            self.remove((a, b));
            if n != NONE {
                self.remove((b, self.sym[n as usize]));
            }
            self.sym[i_] = new;
            self.sym[j as usize] = NONE;
            self.next[i_] = n;
            if n != NONE {
                self.prev[n as usize] = i;
            }
            if p != NONE {
                self.add((self.sym[p as usize], new), p, &mut touched);
            }
            if n != NONE {
                self.add((new, self.sym[n as usize]), i, &mut touched);
            }
        }
        self.counts.remove(&pair);
        for t in touched {
            if let Some(&c) = self.counts.get(&t) {
                if c > 0 {
                    self.heap.push((c, Reverse(t)));
                }
            }
        }
    }
}

/// Learns merges until the vocabulary holds `k` tokens or no pair occurs
/// `min_count` times. A merge whose result already exists reuses that token
/// and does not grow the vocabulary.
pub fn train_bpe(shards: &[Shard], k: usize, cfg: &BpeConfig) -> Result<MergeTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut alphabet: Vec<char> = shards.iter().flat_map(|s| s.text.chars()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    let vocab = Vocabulary::with_alphabet(alphabet, &cfg.sentinel, 0);
    if k < vocab.len() {
        return Err(Error::InvalidK { k, base: vocab.len() });
    }
    let sep = cfg.sentinel.sentinel;
    let closes_word: Vec<bool> = vocab.tokens().iter().map(|t| t.ends_with(sep)).collect();

    let mut sym = Vec::new();
    let mut prev = Vec::new();
    let mut next = Vec::new();
    for doc in shards.iter().flat_map(Shard::documents) {
        let base = sym.len() as u32;
        let n = doc.chars().count() as u32;
        for (i, c) in doc.chars().enumerate() {
            let i = i as u32;
            sym.push(vocab.id(c.encode_utf8(&mut [0; 4])).expect("alphabet covers corpus"));
            prev.push(if i == 0 { NONE } else { base + i - 1 });
            next.push(if i + 1 == n { NONE } else { base + i + 1 });
        }
    }

    let mut st = State {
        vocab,
        closes_word,
        sym,
        prev,
        next,
        counts: FxHashMap::default(),
        positions: FxHashMap::default(),
        heap: BinaryHeap::new(),
        cfg,
    };
    // Initial pair positions, counted in parallel over fixed-size chunks.
    let chunks: Vec<FxHashMap<Pair, Vec<u32>>> = pool.install(|| {
        let n = st.sym.len();
        (0..n.div_ceil(1 << 20))
            .into_par_iter()
            .map(|c| {
                let mut local: FxHashMap<Pair, Vec<u32>> = FxHashMap::default();
                for i in (c << 20)..((c + 1) << 20).min(n) {
                    let j = st.next[i];
                    if j != NONE && st.mergeable(st.sym[i]) {
                        local.entry((st.sym[i], st.sym[j as usize])).or_default().push(i as u32);
                    }
                }
                local
            })
            .collect()
    });
    for local in chunks {
        for (p, v) in local {
            st.positions.entry(p).or_default().extend(v);
        }
    }
    for (p, v) in &st.positions {
        st.counts.insert(*p, v.len() as i64);
        st.heap.push((v.len() as i64, Reverse(*p)));
    }

    let mut merges = Vec::new();
    while st.vocab.len() < k {
        let Some((pair, _)) = st.best() else { break };
        let (l, r) = (
            st.vocab.get(pair.0).unwrap().to_string(),
            st.vocab.get(pair.1).unwrap().to_string(),
        );
        let surface = format!("{l}{r}");
        let new = match st.vocab.id(&surface) {
            Some(id) => id,
            None => {
                st.closes_word.push(surface.ends_with(sep));
                st.vocab.push(surface)?
            }
        };
        st.merge(pair, new);
        merges.push((l, r));
    }
    Ok(MergeTable { merges, vocab: st.vocab })
}

/// Applies merges in table order.
#[derive(Clone, Debug)]
pub struct BpeEncoder {
    table: MergeTable,
    /// `(left id, right id)` -> `(rank, result id)`.
    ranks: FxHashMap<Pair, (u32, u32)>,
}

impl BpeEncoder {
    pub fn new(table: MergeTable) -> Self {
        let mut ranks = FxHashMap::default();
        for (rank, (l, r)) in table.merges.iter().enumerate() {
            let a = table.vocab.id(l).expect("merge symbols are in the vocabulary");
            let b = table.vocab.id(r).expect("merge symbols are in the vocabulary");
            let out = table.vocab.id(&format!("{l}{r}")).expect("merge results are in the vocabulary");
            ranks.entry((a, b)).or_insert((rank as u32, out));
        }
        BpeEncoder { table, ranks }
    }

    pub fn table(&self) -> &MergeTable {
        &self.table
    }
}

/// Encodes with a merge table. Equivalent to applying every merge, in
/// order, left to right over the whole text; implemented with a heap of
/// `(rank, position)` so each merge touches only its neighbours.
pub fn encode_bpe(text: &str, enc: &BpeEncoder) -> Vec<u32> {
    let vocab = &enc.table.vocab;
    let mut sym: Vec<u32> = Vec::with_capacity(text.len());
    for c in text.chars() {
        match vocab.id(c.encode_utf8(&mut [0; 4])) {
            Some(id) => sym.push(id),
            None => {
                for b in c.to_string().bytes() {
                    sym.push(vocab.escape_id(b));
                }
            }
        }
    }
    let n = sym.len();
    let mut next: Vec<u32> = (1..=n as u32).collect();
    let mut prev: Vec<u32> = (0..n as u32).map(|i| i.wrapping_sub(1)).collect();
    if n > 0 {
        next[n - 1] = NONE;
    }
    let mut heap: BinaryHeap<Reverse<(u32, u32)>> = BinaryHeap::new();
    for i in 0..n.saturating_sub(1) {
        if let Some(&(rank, _)) = enc.ranks.get(&(sym[i], sym[i + 1])) {
            heap.push(Reverse((rank, i as u32)));
        }
    }
    while let Some(Reverse((rank, i))) = heap.pop() {
        let i_ = i as usize;
        let j = next[i_];
        if sym[i_] == NONE || j == NONE {
            continue;
        }
        let Some(&(r, out)) = enc.ranks.get(&(sym[i_], sym[j as usize])) else {
            continue;
        };
        if r != rank {
            continue;
        }
        sym[i_] = out;
        sym[j as usize] = NONE;
        let nj = next[j as usize];
        next[i_] = nj;
        if nj != NONE {
            prev[nj as usize] = i;
        }
        // Only merges later in the table can still fire.
        let p = prev[i_];
        if p != NONE {
            if let Some(&(r2, _)) = enc.ranks.get(&(sym[p as usize], out)) {
                if r2 > rank {
                    heap.push(Reverse((r2, p)));
                }
            }
        }
        if nj != NONE {
            if let Some(&(r2, _)) = enc.ranks.get(&(out, sym[nj as usize])) {
                if r2 > rank {
                    heap.push(Reverse((r2, i)));
                }
            }
        }
    }
    sym.into_iter().filter(|&s| s != NONE).collect()
}

impl Tokenizer for BpeEncoder {
    fn vocabulary(&self) -> &Vocabulary {
        &self.table.vocab
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        encode_bpe(text, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{shard, RawCorpus};
    use proptest::prelude::*;

    fn shards_of(docs: &[&str], cfg: &SentinelConfig) -> Vec<Shard> {
        shard(&RawCorpus::new(docs.iter().map(|d| d.to_string()).collect()), 1 << 20, cfg).unwrap()
    }

    fn surfaces(enc: &BpeEncoder, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| enc.vocabulary().get(i).unwrap().to_string()).collect()
    }

    /// Applies each merge in order with a left-to-right scan.
    fn reference(text: &str, table: &MergeTable) -> Vec<String> {
        let mut toks: Vec<String> = text.chars().map(String::from).collect();
        for (l, r) in &table.merges {
            let mut out = Vec::with_capacity(toks.len());
            let mut i = 0;
            while i < toks.len() {
                if i + 1 < toks.len() && &toks[i] == l && &toks[i + 1] == r {
                    out.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    out.push(toks[i].clone());
                    i += 1;
                }
            }
            toks = out;
        }
        toks
    }

    #[test]
    fn aaab_first_merge() {
        let cfg = BpeConfig::default();
        let shards = shards_of(&["aaab"], &cfg.sentinel);
        let t = train_bpe(&shards, 5, &cfg).unwrap();
        assert_eq!(t.merges, [("a".to_string(), "a".to_string())]);
        let enc = BpeEncoder::new(t);
        assert_eq!(surfaces(&enc, &enc.encode("aaab")), ["aa", "a", "b"]);
        assert_eq!(enc.encode(""), Vec::<u32>::new());
    }

    #[test]
    fn abab_first_merge() {
        let cfg = BpeConfig::default();
        let shards = shards_of(&[&"ab".repeat(10)], &cfg.sentinel);
        let t = train_bpe(&shards, 5, &cfg).unwrap();
        assert_eq!(t.merges[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn k_equal_to_alphabet_is_empty() {
        let cfg = BpeConfig::default();
        let shards = shards_of(&["abab"], &cfg.sentinel);
        let t = train_bpe(&shards, 4, &cfg).unwrap();
        assert!(t.merges.is_empty());
        assert!(matches!(train_bpe(&shards, 3, &cfg), Err(Error::InvalidK { .. })));
        let enc = BpeEncoder::new(t);
        assert_eq!(surfaces(&enc, &enc.encode("ba")), ["b", "a"]);
    }

    #[test]
    fn word_separated_never_crosses_separator() {
        let cfg = BpeConfig {
            sentinel: SentinelConfig::default().word_separated(true),
            ..Default::default()
        };
        let shards = shards_of(&[&"the cat ".repeat(30)], &cfg.sentinel);
        let t = train_bpe(&shards, 40, &cfg).unwrap();
        for tok in t.vocab.learned() {
            let inner = &tok[..tok.len() - tok.chars().last().unwrap().len_utf8()];
            assert!(!inner.contains('\u{2423}'), "{tok}");
        }
    }

    #[test]
    fn merge_file_round_trip() {
        let cfg = BpeConfig::default();
        let shards = shards_of(&["hello hello world world"], &cfg.sentinel);
        let t = train_bpe(&shards, 20, &cfg).unwrap();
        let s = t.to_json();
        let back = MergeTable::from_json(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), s);
    }

    proptest! {
        #[test]
        fn heap_encoder_matches_ordered_scans(train in "[abc ]{2,60}", text in "[abcd ]{0,40}") {
            let cfg = BpeConfig::default();
            let shards = shards_of(&[&train], &cfg.sentinel);
            let table = train_bpe(&shards, 30, &cfg).unwrap();
            let enc = BpeEncoder::new(table.clone());
            let pre = crate::corpus::preprocess(&text, &cfg.sentinel).unwrap();
            let ids = enc.encode(&pre);
            prop_assert_eq!(enc.decode_preprocessed(&ids).unwrap(), pre.clone());
            if pre.chars().all(|c| table.vocab.contains(c.encode_utf8(&mut [0; 4]))) {
                prop_assert_eq!(surfaces(&enc, &ids), reference(&pre, &table));
            }
        }
    }
}
