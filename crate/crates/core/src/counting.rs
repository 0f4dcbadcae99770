//! Candidate enumeration: runs of two or more adjacent current tokens whose
//! concatenated length is at most `l_max` characters.

use memchr::memmem;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::hash::{RollingHasher, DEFAULT_BASE, MERSENNE_61};
use crate::scoreboard::{rank_parts, Scoreboard};
use crate::sequence::{char_count, is_char_start, TokenSequence};
use crate::{Error, Result};

/// Longest candidate the packed occurrence format can address.
pub const MAX_L_MAX: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingConfig {
    pub l_max: usize,
    pub min_freq: u64,
    pub hash_base: u64,
    pub hash_modulus: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        CountingConfig {
            l_max: 16,
            min_freq: 2,
            hash_base: DEFAULT_BASE,
            hash_modulus: MERSENNE_61,
        }
    }
}

impl CountingConfig {
    pub fn with_l_max(l_max: usize) -> Self {
        CountingConfig {
            l_max,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_L_MAX).contains(&self.l_max) {
            return Err(Error::InvalidConfig(format!(
                "l_max must be in 2..={MAX_L_MAX}, got {}",
                self.l_max
            )));
        }
        if self.min_freq < 2 {
            return Err(Error::InvalidConfig(format!(
                "min_freq must be at least 2, got {}",
                self.min_freq
            )));
        }
        self.hasher().map(|_| ())
    }

    pub fn hasher(&self) -> Result<RollingHasher> {
        RollingHasher::new(self.hash_base, self.hash_modulus)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub count: u64,
    pub char_len: usize,
    pub score: u64,
}

impl Candidate {
    pub fn new(surface: impl Into<String>, count: u64) -> Self {
        let surface = surface.into();
        let char_len = surface.chars().count();
        Candidate {
            score: count * char_len as u64,
            surface,
            count,
            char_len,
        }
    }
}

/// Which runs are admissible as candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunFilter {
    All,
    /// The separator may only appear as the final character.
    WordSeparated(char),
}

impl RunFilter {
    pub fn accepts(&self, surface: &str) -> bool {
        match *self {
            RunFilter::All => true,
            RunFilter::WordSeparated(sep) => surface
                .char_indices()
                .all(|(i, c)| c != sep || i + c.len_utf8() == surface.len()),
        }
    }
}

struct SepBytes {
    buf: [u8; 4],
    len: usize,
}

impl SepBytes {
    fn new(filter: RunFilter) -> Option<Self> {
        match filter {
            RunFilter::All => None,
            RunFilter::WordSeparated(c) => {
                let mut buf = [0; 4];
                let len = c.encode_utf8(&mut buf).len();
                Some(SepBytes { buf, len })
            }
        }
    }

    fn bytes(&self) -> &[u8] {
        &self.buf[..self.len]
    }
}

/// Calls `f(end, digest, chars)` for every admissible run starting at token
/// start `s`, shortest first.
#[inline]
fn walk_runs<F>(
    seq: &TokenSequence,
    s: usize,
    l_max: usize,
    sep: Option<&SepBytes>,
    hasher: Option<&RollingHasher>,
    mut f: F,
) where
    F: FnMut(usize, u64, usize),
{
    let bytes = seq.text().as_bytes();
    let mut digest = 0u64;
    let mut chars = 0;
    let mut tokens = 0;
    let mut t0 = s;
    let mut closed = false;
    while let Some(t1) = seq.next_start(t0) {
        if closed {
            break;
        }
        let tok = &bytes[t0..t1];
        chars += if tok.len() == 1 { 1 } else { char_count(tok) };
        if chars > l_max {
            break;
        }
        if let Some(sep) = sep {
            if let Some(p) = memmem::find(tok, sep.bytes()) {
                if p + sep.len != tok.len() {
                    break;
                }
                closed = true;
            }
        }
        if let Some(h) = hasher {
            for &b in tok {
                digest = h.push(digest, b);
            }
        }
        tokens += 1;
        if tokens >= 2 {
            f(t1, digest, chars);
        }
        if seq.is_hard(t1) {
            break;
        }
        t0 = t1;
    }
}

fn token_starts(seq: &TokenSequence, lo: usize, hi: usize) -> impl Iterator<Item = usize> + '_ {
    let hi = hi.min(seq.byte_len());
    let first = if lo < hi && seq.is_start(lo) {
        Some(lo)
    } else {
        seq.next_start(lo).filter(|&p| p < hi)
    };
    std::iter::successors(first, move |&p| seq.next_start(p).filter(|&q| q < hi))
}

/// Exact occurrence counts of every admissible run, without frequency
/// filtering. Surfaces are keyed by rolling-hash digest and verified
/// byte-for-byte, so colliding digests never merge distinct surfaces.
pub fn count_runs(seq: &TokenSequence, cfg: &CountingConfig, filter: RunFilter) -> Result<FxHashMap<String, u64>> {
    cfg.validate()?;
    let hasher = cfg.hasher()?;
    let sep = SepBytes::new(filter);
    let text = seq.text();
    // digest -> [(start, end, count)], one entry per distinct surface.
    let mut table: FxHashMap<u64, Vec<(usize, usize, u64)>> = FxHashMap::default();
    for s in token_starts(seq, 0, seq.byte_len()) {
        walk_runs(seq, s, cfg.l_max, sep.as_ref(), Some(&hasher), |e, digest, _| {
            let slot = table.entry(digest).or_default();
            let surface = &text.as_bytes()[s..e];
            match slot
                .iter_mut()
                .find(|(a, b, _)| &text.as_bytes()[*a..*b] == surface)
            {
                Some(entry) => entry.2 += 1,
                None => slot.push((s, e, 1)),
            }
        });
    }
    Ok(table
        .into_values()
        .flatten()
        .map(|(s, e, c)| (text[s..e].to_string(), c))
        .collect())
}

/// Counts with every entry below `cfg.min_freq` removed.
pub fn enumerate_candidates(
    seq: &TokenSequence,
    cfg: &CountingConfig,
    filter: RunFilter,
) -> Result<FxHashMap<String, u64>> {
    let mut counts = count_runs(seq, cfg, filter)?;
    counts.retain(|_, c| *c >= cfg.min_freq);
    Ok(counts)
}

/// Exact global ranking computed by [`count_top`].
#[derive(Clone, Debug, Default)]
pub struct TopCandidates {
    /// Best candidates, best first.
    pub ranked: Vec<Candidate>,
    /// Best candidate not in `ranked`, if any. Every untracked candidate
    /// ranks at or below it.
    pub threshold: Option<Candidate>,
    /// Distinct candidates with count at least `min_freq`.
    pub distinct: usize,
    /// Number of counting passes used.
    pub passes: usize,
    /// Total run occurrences enumerated.
    pub occurrences: u64,
}

const SEQ_BITS: u32 = 16;
const START_BITS: u32 = 36;
const LEN_BITS: u32 = 12;
const BUCKETS: usize = 1 << 16;
const CHUNK_BYTES: usize = 1 << 20;

#[inline]
fn pack(seq: usize, start: usize, len: usize) -> u64 {
    ((seq as u64) << (START_BITS + LEN_BITS)) | ((start as u64) << LEN_BITS) | (len as u64 - 1)
}

#[inline]
fn unpack(loc: u64) -> (usize, usize, usize) {
    let len = (loc & ((1 << LEN_BITS) - 1)) as usize + 1;
    let start = ((loc >> LEN_BITS) & ((1 << START_BITS) - 1)) as usize;
    let seq = (loc >> (START_BITS + LEN_BITS)) as usize;
    (seq, start, start + len)
}

/// Bucket of runs starting at `s`: `(two_char, longer)`. All runs with the
/// same surface land in the same bucket, because the key depends only on
/// the first two or three characters.
#[inline]
fn start_buckets(bytes: &[u8], s: usize) -> (usize, usize) {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut chars = 0;
    let mut two = 0;
    let mut i = s;
    while i < bytes.len() {
        let b = bytes[i];
        if is_char_start(b) {
            if chars == 2 {
                two = bucket_of(h);
            }
            chars += 1;
            if chars == 4 {
                break;
            }
        }
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        i += 1;
    }
    if chars == 2 {
        two = bucket_of(h);
    }
    (two, if chars >= 3 { bucket_of(h) } else { two })
}

#[inline]
fn bucket_of(h: u64) -> usize {
    (h.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 48) as usize
}

struct WorkItem {
    seq: usize,
    lo: usize,
    hi: usize,
}

fn work_items(seqs: &[TokenSequence]) -> Vec<WorkItem> {
    let mut items = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        let mut lo = 0;
        while lo < seq.byte_len() {
            let hi = (lo + CHUNK_BYTES).min(seq.byte_len());
            items.push(WorkItem { seq: i, lo, hi });
            lo = hi;
        }
    }
    items
}

/// Exact corpus-wide counts of every admissible run across all sequences,
/// keeping the `m` best candidates plus the best one below them.
///
/// Occurrences are materialised as `(digest, location)` pairs in passes of
/// at most roughly `budget` entries, each pass covering a disjoint set of
/// prefix buckets. Runs inside the current rayon pool.
pub fn count_top(
    seqs: &[TokenSequence],
    cfg: &CountingConfig,
    filter: RunFilter,
    m: usize,
    budget: usize,
) -> Result<TopCandidates> {
    cfg.validate()?;
    if seqs.len() > 1 << SEQ_BITS {
        return Err(Error::InvalidConfig(format!("at most {} shards", 1usize << SEQ_BITS)));
    }
    if seqs.iter().any(|s| s.byte_len() >= 1 << START_BITS) {
        return Err(Error::InvalidConfig("shard larger than 64 GiB".into()));
    }
    let hasher = cfg.hasher()?;
    let sep = SepBytes::new(filter);
    let items = work_items(seqs);

    // Occurrences per bucket.
    let sizes = items
        .par_iter()
        .fold(
            || vec![0u64; BUCKETS],
            |mut acc, it| {
                let seq = &seqs[it.seq];
                let bytes = seq.text().as_bytes();
                for s in token_starts(seq, it.lo, it.hi) {
                    let (two, longer) = start_buckets(bytes, s);
                    walk_runs(seq, s, cfg.l_max, sep.as_ref(), None, |_, _, chars| {
                        acc[if chars == 2 { two } else { longer }] += 1;
                    });
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; BUCKETS],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut pass_of = vec![u32::MAX; BUCKETS];
    let mut passes = 0u32;
    let mut fill = 0u64;
    let budget = budget.max(1) as u64;
    for (b, &n) in sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        if fill > 0 && fill + n > budget {
            passes += 1;
            fill = 0;
        }
        pass_of[b] = passes;
        fill += n;
    }
    let total_passes = if fill > 0 { passes as usize + 1 } else { passes as usize };

    let mut board = Scoreboard::new(m + 1);
    let mut distinct = 0usize;
    let mut occurrences = 0u64;
    for pass in 0..total_passes as u32 {
        let mut entries: Vec<(u64, u64)> = items
            .par_iter()
            .flat_map_iter(|it| {
                let seq = &seqs[it.seq];
                let bytes = seq.text().as_bytes();
                let mut out = Vec::new();
                for s in token_starts(seq, it.lo, it.hi) {
                    let (two, longer) = start_buckets(bytes, s);
                    let (in2, in3) = (pass_of[two] == pass, pass_of[longer] == pass);
                    if !in2 && !in3 {
                        continue;
                    }
                    walk_runs(seq, s, cfg.l_max, sep.as_ref(), Some(&hasher), |e, digest, chars| {
                        if (chars == 2 && in2) || (chars > 2 && in3) {
                            out.push((digest, pack(it.seq, s, e - s)));
                        }
                    });
                }
                out
            })
            .collect();
        occurrences += entries.len() as u64;
        entries.par_sort_unstable_by_key(|&(d, _)| d);
        let surface = |loc: u64| {
            let (q, s, e) = unpack(loc);
            &seqs[q].text().as_bytes()[s..e]
        };
        let mut i = 0;
        while i < entries.len() {
            let mut j = i + 1;
            while j < entries.len() && entries[j].0 == entries[i].0 {
                j += 1;
            }
            let group = &mut entries[i..j];
            let first = surface(group[0].1);
            if group.iter().all(|&(_, loc)| surface(loc) == first) {
                distinct += offer_group(&mut board, cfg, first, group.len() as u64);
            } else {
                group.sort_unstable_by(|a, b| surface(a.1).cmp(surface(b.1)));
                let mut a = 0;
                while a < group.len() {
                    let sa = surface(group[a].1);
                    let mut b = a + 1;
                    while b < group.len() && surface(group[b].1) == sa {
                        b += 1;
                    }
                    distinct += offer_group(&mut board, cfg, sa, (b - a) as u64);
                    a = b;
                }
            }
            i = j;
        }
    }

    let mut ranked = board.into_sorted();
    let threshold = if ranked.len() > m { ranked.pop() } else { None };
    Ok(TopCandidates {
        ranked,
        threshold,
        distinct,
        passes: total_passes,
        occurrences,
    })
}

fn offer_group(board: &mut Scoreboard, cfg: &CountingConfig, surface: &[u8], count: u64) -> usize {
    if count < cfg.min_freq {
        return 0;
    }
    // Surfaces are whole runs of tokens, so they are valid UTF-8.
    let surface = std::str::from_utf8(surface).expect("runs end on character boundaries");
    let char_len = char_count(surface.as_bytes());
    if board.admits(rank_parts(count, char_len, surface)) {
        board.offer(Candidate::new(surface, count));
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sorted(m: FxHashMap<String, u64>) -> BTreeMap<String, u64> {
        m.into_iter().collect()
    }

    fn chars(text: &str, l_max: usize) -> BTreeMap<String, u64> {
        let seq = TokenSequence::from_text(text);
        sorted(enumerate_candidates(&seq, &CountingConfig::with_l_max(l_max), RunFilter::All).unwrap())
    }

    #[test]
    fn spec_examples() {
        assert_eq!(chars("abab", 3), BTreeMap::from([("ab".to_string(), 2)]));
        assert_eq!(chars("aaaa", 2), BTreeMap::from([("aa".to_string(), 3)]));
        assert!(chars("xy", 16).is_empty());
    }

    #[test]
    fn runs_follow_current_tokens() {
        let seq = TokenSequence::from_tokens(&["ab", "c", "ab", "c"]);
        let counts = sorted(count_runs(&seq, &CountingConfig::with_l_max(16), RunFilter::All).unwrap());
        let expected: BTreeMap<String, u64> = [("abc", 2), ("cab", 1), ("abcab", 1), ("cabc", 1), ("abcabc", 1)]
            .into_iter()
            .map(|(s, c)| (s.to_string(), c))
            .collect();
        assert_eq!(counts, expected);
    }

    #[test]
    fn word_separated_filter() {
        let f = RunFilter::WordSeparated('_');
        assert!(f.accepts("the_"));
        assert!(f.accepts("cat"));
        assert!(!f.accepts("e_c"));
        assert!(!f.accepts("_a"));
        assert!(!f.accepts("a__"));
        let seq = TokenSequence::from_text("the_cat_the_cat_");
        let counts = enumerate_candidates(&seq, &CountingConfig::with_l_max(16), f).unwrap();
        assert!(counts.contains_key("the_"));
        assert!(counts.keys().all(|k| f.accepts(k)));
    }

    #[test]
    fn documents_do_not_join() {
        let seq = TokenSequence::from_documents(["ab", "ab"]);
        let counts = sorted(count_runs(&seq, &CountingConfig::with_l_max(16), RunFilter::All).unwrap());
        assert_eq!(counts, BTreeMap::from([("ab".to_string(), 2)]));
    }

    #[test]
    fn colliding_modulus_still_exact() {
        // A tiny modulus forces many digest collisions.
        let cfg = CountingConfig {
            hash_modulus: 257,
            hash_base: 3,
            ..CountingConfig::with_l_max(6)
        };
        let text = "abracadabra_abracadabra_cadabra";
        let seq = TokenSequence::from_text(text);
        let weak = sorted(count_runs(&seq, &cfg, RunFilter::All).unwrap());
        let strong = sorted(count_runs(&seq, &CountingConfig::with_l_max(6), RunFilter::All).unwrap());
        assert_eq!(weak, strong);
        let top = count_top(&[seq], &cfg, RunFilter::All, 1000, 7).unwrap();
        let got: BTreeMap<String, u64> = top.ranked.into_iter().map(|c| (c.surface, c.count)).collect();
        let want: BTreeMap<String, u64> = strong.into_iter().filter(|&(_, c)| c >= 2).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn validate_rejects_bad_config() {
        assert!(CountingConfig::with_l_max(1).validate().is_err());
        let cfg = CountingConfig {
            min_freq: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pack_round_trip() {
        assert_eq!(unpack(pack(3, 123_456_789, 4096)), (3, 123_456_789, 123_456_789 + 4096));
    }
}
