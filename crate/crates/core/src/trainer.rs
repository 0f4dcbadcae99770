//! Greedy vocabulary construction.
//!
//! Each round picks the admissible run with the best `count × char_len`
//! score, appends it to the vocabulary and merges its leftmost
//! non-overlapping occurrences in every shard.
//!
//! Two counting strategies give the same vocabulary:
//!
//! * [`TrainMode::Recount`] re-enumerates every shard each round and merges
//!   per-shard scoreboards. Simple, and exact while each shard has at most
//!   `scoreboard_size` distinct runs.
//! * [`TrainMode::Incremental`] counts once, keeps exact counts for the best
//!   `scoreboard_size` runs and decrements them as occurrences disappear.
//!   Merging only ever removes token starts, so counts never grow and no new
//!   run can appear; the best tracked run is therefore the true best as long
//!   as it outranks the best untracked run seen at the last count. When it
//!   does not, everything is recounted.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use memchr::memmem::Finder;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{corpus_digest, SentinelConfig, Shard};
use crate::counting::{count_runs, count_top, Candidate, CountingConfig, RunFilter};
use crate::hash::RollingHasher;
use crate::scoreboard::{merge_global, rank_parts, Scoreboard};
use crate::sequence::{is_char_start, TokenSequence};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Incremental,
    Recount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointPolicy {
    pub path: Option<PathBuf>,
    pub every_iterations: Option<usize>,
    pub every_secs: Option<u64>,
}

impl Default for CheckpointPolicy {
    fn default() -> Self {
        CheckpointPolicy {
            path: None,
            every_iterations: Some(500),
            every_secs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub counting: CountingConfig,
    pub sentinel: SentinelConfig,
    /// Candidates kept per scoreboard (M).
    pub scoreboard_size: usize,
    pub workers: usize,
    pub mode: TrainMode,
    /// Tokens accepted per round. Values above one trade exactness against
    /// the one-at-a-time loop for speed.
    pub batch: usize,
    /// Occurrence entries materialised per incremental counting pass.
    pub count_budget: usize,
    pub checkpoint: CheckpointPolicy,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            counting: CountingConfig::default(),
            sentinel: SentinelConfig::default(),
            scoreboard_size: 50_000,
            workers: 1,
            mode: TrainMode::Incremental,
            batch: 1,
            count_budget: 16 << 20,
            checkpoint: CheckpointPolicy::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.counting.validate()?;
        if self.scoreboard_size == 0 {
            return Err(Error::InvalidConfig("scoreboard size must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be positive".into()));
        }
        if self.batch == 0 || self.batch > self.scoreboard_size {
            return Err(Error::InvalidConfig(format!(
                "batch must be in 1..={}, got {}",
                self.scoreboard_size, self.batch
            )));
        }
        Ok(())
    }

    pub fn filter(&self) -> RunFilter {
        if self.sentinel.word_separated {
            RunFilter::WordSeparated(self.sentinel.sentinel)
        } else {
            RunFilter::All
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub id: u32,
    pub surface: String,
    pub count: u64,
    pub score: u64,
    /// Occurrences replaced.
    pub applied: u64,
    /// Characters per token after the replacement.
    pub ave_length: f64,
    /// Corpus token count after the replacement.
    pub tokens: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub counting_secs: f64,
    pub apply_secs: f64,
    pub checkpoint_secs: f64,
    pub total_secs: f64,
    pub recounts: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub chars: u64,
    pub initial_tokens: u64,
    pub records: Vec<IterationRecord>,
    /// Set when training stopped before the target size because no run
    /// occurs at least `min_freq` times.
    pub halted_early: bool,
    /// Set when a per-shard scoreboard overflowed in recount mode, so the
    /// chosen tokens may differ from the exact argmax.
    pub approximate: bool,
    pub timings: PhaseTimings,
}

/// Reports compare equal when everything except wall-clock data matches.
impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.chars == other.chars
            && self.initial_tokens == other.initial_tokens
            && self.records == other.records
            && self.halted_early == other.halted_early
            && self.approximate == other.approximate
    }
}

impl TrainReport {
    pub fn initial_ave_length(&self) -> f64 {
        ratio(self.chars, self.initial_tokens)
    }

    /// AveLength before the first and after every iteration.
    pub fn ave_lengths(&self) -> Vec<f64> {
        std::iter::once(self.initial_ave_length())
            .chain(self.records.iter().map(|r| r.ave_length))
            .collect()
    }

    /// JSON of the records without timings, for byte-level comparison.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings = PhaseTimings::default();
        serde_json::to_string(&copy).expect("report serializes")
    }
}

fn ratio(chars: u64, tokens: u64) -> f64 {
    if tokens == 0 {
        0.0
    } else {
        chars as f64 / tokens as f64
    }
}

/// Replaces every leftmost non-overlapping occurrence of `surface` that is
/// a run of whole tokens. Returns the number of replacements.
pub fn apply_token(seq: &mut TokenSequence, surface: &str) -> usize {
    seq.apply(surface)
}

/// Total characters over total tokens.
pub fn ave_length(seqs: &[TokenSequence]) -> f64 {
    let chars: usize = seqs.iter().map(TokenSequence::char_count).sum();
    let tokens: usize = seqs.iter().map(TokenSequence::token_count).sum();
    ratio(chars as u64, tokens as u64)
}

pub fn train(shards: &[Shard], k: usize, cfg: &TrainerConfig) -> Result<(Vocabulary, TrainReport)> {
    let mut t = Trainer::new(shards, k, cfg)?;
    t.run()?;
    Ok(t.finish())
}

/// [`train`] with candidates restricted to word-internal runs, optionally
/// ending in one separator.
pub fn train_word_separated(shards: &[Shard], k: usize, cfg: &TrainerConfig) -> Result<(Vocabulary, TrainReport)> {
    let mut cfg = cfg.clone();
    cfg.sentinel.word_separated = true;
    train(shards, k, &cfg)
}

/// Exact counts for the best tracked runs, with a lazily updated max-heap.
struct Tracked {
    hasher: RollingHasher,
    powers: Vec<u64>,
    surfaces: Vec<String>,
    counts: Vec<u64>,
    char_lens: Vec<usize>,
    lex: Vec<u32>,
    by_digest: FxHashMap<u64, u32>,
    chain: Vec<u32>,
    heap: BinaryHeap<(u64, u64, usize, Reverse<u32>, u32)>,
    threshold: Option<Candidate>,
}

const NIL: u32 = u32::MAX;

impl Tracked {
    fn new(hasher: RollingHasher, l_max: usize, ranked: Vec<Candidate>, threshold: Option<Candidate>) -> Self {
        let n = ranked.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| ranked[a as usize].surface.cmp(&ranked[b as usize].surface));
        let mut lex = vec![0; n];
        for (rank, &i) in order.iter().enumerate() {
            lex[i as usize] = rank as u32;
        }
        let mut by_digest = FxHashMap::default();
        let mut chain = vec![NIL; n];
        let mut heap = BinaryHeap::with_capacity(n);
        let mut surfaces = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        let mut char_lens = Vec::with_capacity(n);
        for (i, c) in ranked.into_iter().enumerate() {
            let d = hasher.hash(c.surface.as_bytes());
            if let Some(prev) = by_digest.insert(d, i as u32) {
                chain[i] = prev;
            }
            heap.push((c.score, c.count, c.char_len, Reverse(lex[i]), i as u32));
            surfaces.push(c.surface);
            counts.push(c.count);
            char_lens.push(c.char_len);
        }
        let mut powers = vec![1u64; 12 * l_max + 8];
        for i in 1..powers.len() {
            powers[i] = hasher.mul(powers[i - 1], hasher.base());
        }
        Tracked {
            hasher,
            powers,
            surfaces,
            counts,
            char_lens,
            lex,
            by_digest,
            chain,
            heap,
            threshold,
        }
    }

    fn lookup(&self, digest: u64, surface: &[u8]) -> Option<u32> {
        let mut i = *self.by_digest.get(&digest)?;
        while i != NIL {
            if self.surfaces[i as usize].as_bytes() == surface {
                return Some(i);
            }
            i = self.chain[i as usize];
        }
        None
    }

    fn key(&self, i: u32) -> (u64, u64, usize, Reverse<u32>, u32) {
        let i_ = i as usize;
        let c = self.counts[i_];
        (c * self.char_lens[i_] as u64, c, self.char_lens[i_], Reverse(self.lex[i_]), i)
    }

    /// Pops the best entry whose count is current and at least `min_freq`.
    fn pop_best(&mut self, min_freq: u64) -> Option<u32> {
        while let Some(top) = self.heap.pop() {
            let i = top.4;
            let cur = self.counts[i as usize];
            if cur < min_freq {
                continue;
            }
            if top.1 == cur {
                return Some(i);
            }
            self.heap.push(self.key(i));
        }
        None
    }

    fn push_back(&mut self, i: u32) {
        self.heap.push(self.key(i));
    }

    /// Whether tracked entry `i` provably outranks every untracked run.
    fn beats_threshold(&self, i: u32) -> bool {
        let i_ = i as usize;
        match &self.threshold {
            None => true,
            Some(t) => rank_parts(self.counts[i_], self.char_lens[i_], &self.surfaces[i_]) > t.key(),
        }
    }

    fn candidate(&self, i: u32) -> Candidate {
        Candidate::new(self.surfaces[i as usize].clone(), self.counts[i as usize])
    }

    /// Tracked runs that stop existing when `s..e` becomes one token:
    /// every run with an endpoint strictly inside `s..e`, and `s..e` itself.
    fn lost_runs(&self, seq: &TokenSequence, s: usize, e: usize, l_max: usize, out: &mut Vec<u32>) {
        let text = seq.text().as_bytes();
        // Region reachable by runs of at most l_max characters that touch s..e.
        let lo = {
            let floor = if seq.is_hard(s) { s } else { seq.prev_hard(s).unwrap_or(0) };
            let mut p = s;
            let mut n = 0;
            while p > floor && n < l_max {
                p -= 1;
                if is_char_start(text[p]) {
                    n += 1;
                }
            }
            p
        };
        let hi = {
            let ceil = seq.next_hard(e.saturating_sub(1)).unwrap_or(text.len());
            let mut p = e;
            let mut n = 0;
            while p < ceil && n < l_max {
                p += 1;
                while p < ceil && !is_char_start(text[p]) {
                    p += 1;
                }
                n += 1;
            }
            p
        };
        let region = &text[lo..hi];
        let mut ph = Vec::with_capacity(region.len() + 1);
        let mut pc = Vec::with_capacity(region.len() + 1);
        ph.push(0u64);
        pc.push(0u32);
        for &b in region {
            ph.push(self.hasher.push(*ph.last().unwrap(), b));
            pc.push(pc.last().unwrap() + is_char_start(b) as u32);
        }
        let chars = |a: usize, b: usize| (pc[b - lo] - pc[a - lo]) as usize;
        let mut visit = |a: usize, b: usize| {
            let (x, y) = (a - lo, b - lo);
            let h = &self.hasher;
            let stripped = h.mul(ph[x], self.powers[y - x]);
            let digest = if ph[y] >= stripped {
                ph[y] - stripped
            } else {
                ph[y] + h.modulus() - stripped
            };
            if let Some(i) = self.lookup(digest, &text[a..b]) {
                out.push(i);
            }
        };

        let mut r = seq.next_start(s).expect("merge span has an interior start");
        while r < e {
            // Runs ending at r.
            let mut a = seq.prev_start(r).expect("r > s");
            while !seq.is_hard(a) {
                a = seq.prev_start(a).expect("position 0 is hard");
                if a < lo || chars(a, r) > l_max {
                    break;
                }
                visit(a, r);
            }
            // Runs starting at r and ending at or after e.
            let mut b = seq.next_start(r).expect("r < e");
            while !seq.is_hard(b) {
                b = seq.next_start(b).expect("text end is hard");
                if b > hi || chars(r, b) > l_max {
                    break;
                }
                if b >= e {
                    visit(r, b);
                }
            }
            r = seq.next_start(r).expect("r < e");
        }
        visit(s, e);
    }
}

/// Surfaces overlap when one contains the other or a proper suffix of one
/// is a prefix of the other. Tokens with non-overlapping surfaces can never
/// cover intersecting spans of text.
pub fn surfaces_overlap(x: &str, y: &str) -> bool {
    if x.contains(y) || y.contains(x) {
        return true;
    }
    let edge = |a: &str, b: &str| {
        a.char_indices()
            .skip(1)
            .any(|(i, _)| b.starts_with(&a[i..]))
    };
    edge(x, y) || edge(y, x)
}

/// Keeps candidates, in rank order, that overlap none kept before them.
fn non_overlapping(ranked: Vec<Candidate>) -> (Vec<Candidate>, Vec<Candidate>) {
    let mut kept: Vec<Candidate> = Vec::new();
    let mut dropped = Vec::new();
    for c in ranked {
        if kept.iter().any(|k| surfaces_overlap(&k.surface, &c.surface)) {
            dropped.push(c);
        } else {
            kept.push(c);
        }
    }
    (kept, dropped)
}

pub struct Trainer {
    cfg: TrainerConfig,
    target: usize,
    seqs: Vec<TokenSequence>,
    vocab: Vocabulary,
    report: TrainReport,
    digest: String,
    pool: rayon::ThreadPool,
    tracked: Option<Tracked>,
    last_checkpoint: Instant,
    done: bool,
}

#[derive(Serialize, Deserialize)]
struct CheckpointBody {
    vocabulary: serde_json::Value,
    iteration: usize,
    target: usize,
    corpus_digest: String,
    report: TrainReport,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    #[serde(flatten)]
    body: CheckpointBody,
    checksum: String,
}

/// Decoded checkpoint contents.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub vocabulary: Vocabulary,
    pub iteration: usize,
    pub target: usize,
    pub corpus_digest: String,
    pub report: TrainReport,
}

fn checksum(body: &CheckpointBody) -> String {
    let bytes = serde_json::to_vec(body).expect("checkpoint serializes");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and verifies a checkpoint file.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(format!("unreadable: {e}")))?;
    if checksum(&file.body) != file.checksum {
        return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
    }
    let vocabulary = Vocabulary::from_json(&file.body.vocabulary.to_string())
        .map_err(|e| Error::CorruptCheckpoint(format!("vocabulary: {e}")))?;
    Ok(Checkpoint {
        vocabulary,
        iteration: file.body.iteration,
        target: file.body.target,
        corpus_digest: file.body.corpus_digest,
        report: file.body.report,
    })
}

impl Trainer {
    pub fn new(shards: &[Shard], k: usize, cfg: &TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        let seqs: Vec<TokenSequence> = pool.install(|| shards.par_iter().map(Shard::sequence).collect());
        let mut alphabet: Vec<char> = pool.install(|| {
            shards
                .par_iter()
                .map(|s| {
                    let mut v: Vec<char> = s.text.chars().collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                })
                .reduce(Vec::new, |mut a, b| {
                    a.extend(b);
                    a.sort_unstable();
                    a.dedup();
                    a
                })
        });
        alphabet.sort_unstable();
        let vocab = Vocabulary::with_alphabet(alphabet, &cfg.sentinel, cfg.counting.l_max);
        if k <= vocab.len() {
            return Err(Error::InvalidK { k, base: vocab.len() });
        }
        let chars: usize = seqs.iter().map(TokenSequence::char_count).sum();
        let tokens: usize = seqs.iter().map(TokenSequence::token_count).sum();
        let mut vocab = vocab;
        let digest = corpus_digest(shards);
        vocab.corpus_digest = Some(digest.clone());
        vocab.iterations = Some(0);
        Ok(Trainer {
            cfg: cfg.clone(),
            target: k,
            seqs,
            vocab,
            report: TrainReport {
                chars: chars as u64,
                initial_tokens: tokens as u64,
                records: Vec::new(),
                halted_early: false,
                approximate: false,
                timings: PhaseTimings::default(),
            },
            digest,
            pool,
            tracked: None,
            last_checkpoint: Instant::now(),
            done: false,
        })
    }

    /// Restores a trainer from a checkpoint written for the same corpus and
    /// configuration, replaying the learned tokens on fresh shards.
    pub fn resume(shards: &[Shard], cfg: &TrainerConfig, path: impl AsRef<Path>) -> Result<Self> {
        let ck = load_checkpoint(path)?;
        let mut t = Trainer::new(shards, ck.target, cfg)?;
        if ck.corpus_digest != t.digest {
            return Err(Error::CorruptCheckpoint("corpus digest mismatch".into()));
        }
        let v = &ck.vocabulary;
        if v.l_max != cfg.counting.l_max
            || v.sentinel != cfg.sentinel.sentinel
            || v.word_separated != cfg.sentinel.word_separated
        {
            return Err(Error::InvalidConfig(
                "checkpoint was written with a different l_max, sentinel or separation mode".into(),
            ));
        }
        if v.tokens()[..v.base_len()] != t.vocab.tokens()[..] || ck.report.records.len() != v.learned().len() {
            return Err(Error::CorruptCheckpoint("vocabulary does not match corpus".into()));
        }
        let learned: Vec<String> = v.learned().to_vec();
        let seqs = std::mem::take(&mut t.seqs);
        t.seqs = t.pool.install(|| {
            seqs.into_par_iter()
                .map(|mut seq| {
                    for tok in &learned {
                        seq.apply(tok);
                    }
                    seq
                })
                .collect()
        });
        t.vocab = ck.vocabulary;
        t.report = ck.report;
        t.report.timings = PhaseTimings::default();
        t.done = t.report.halted_early || t.vocab.len() >= t.target;
        Ok(t)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn sequences(&self) -> &[TokenSequence] {
        &self.seqs
    }

    pub fn iteration(&self) -> usize {
        self.report.records.len()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn ave_length(&self) -> f64 {
        ave_length(&self.seqs)
    }

    pub fn finish(self) -> (Vocabulary, TrainReport) {
        (self.vocab, self.report)
    }

    /// Runs rounds until the target size is reached or no candidate is left.
    pub fn run(&mut self) -> Result<()> {
        let started = Instant::now();
        while !self.done {
            self.step()?;
            self.maybe_checkpoint()?;
        }
        self.report.timings.total_secs += started.elapsed().as_secs_f64();
        Ok(())
    }

    /// Runs until at least `iteration` tokens have been learned.
    pub fn run_until(&mut self, iteration: usize) -> Result<()> {
        while !self.done && self.iteration() < iteration {
            self.step()?;
        }
        Ok(())
    }

    /// One round: select, append and apply up to `batch` tokens. Returns the
    /// number of tokens accepted (zero once training has finished).
    pub fn step(&mut self) -> Result<usize> {
        if self.done {
            return Ok(0);
        }
        let room = self.target - self.vocab.len();
        let want = self.cfg.batch.min(room);
        let t0 = Instant::now();
        let chosen = match self.cfg.mode {
            TrainMode::Incremental => self.select_incremental(want)?,
            TrainMode::Recount => self.select_recount(want)?,
        };
        self.report.timings.counting_secs += t0.elapsed().as_secs_f64();
        if chosen.is_empty() {
            self.report.halted_early = true;
            self.done = true;
            return Ok(0);
        }
        let t1 = Instant::now();
        let n = chosen.len();
        for c in chosen {
            self.accept(c)?;
        }
        self.report.timings.apply_secs += t1.elapsed().as_secs_f64();
        self.vocab.iterations = Some(self.iteration());
        if self.vocab.len() >= self.target {
            self.done = true;
        }
        Ok(n)
    }

    fn select_recount(&mut self, want: usize) -> Result<Vec<Candidate>> {
        let m = self.cfg.scoreboard_size;
        let counting = self.cfg.counting.clone();
        let filter = self.cfg.filter();
        let seqs = &self.seqs;
        let boards: Vec<(Scoreboard, bool)> = self.pool.install(|| {
            seqs.par_iter()
                .map(|seq| {
                    let counts = count_runs(seq, &counting, filter)?;
                    let overflow = counts.len() > m;
                    let mut board = Scoreboard::new(m);
                    for (s, c) in counts {
                        if board.admits(rank_parts(c, s.chars().count(), &s)) {
                            board.offer(Candidate::new(s, c));
                        }
                    }
                    Ok((board, overflow))
                })
                .collect::<Result<_>>()
        })?;
        self.report.timings.recounts += 1;
        if boards.iter().any(|(_, o)| *o) {
            self.report.approximate = true;
        }
        let boards: Vec<Scoreboard> = boards.into_iter().map(|(b, _)| b).collect();
        let merged = match merge_global(&boards) {
            Ok((_, merged)) => merged,
            Err(Error::EmptyBoards) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut ranked = merged.into_sorted();
        ranked.retain(|c| c.count >= self.cfg.counting.min_freq);
        ranked.truncate(want);
        Ok(non_overlapping(ranked).0)
    }

    fn recount(&mut self) -> Result<()> {
        let top = self.pool.install(|| {
            count_top(
                &self.seqs,
                &self.cfg.counting,
                self.cfg.filter(),
                self.cfg.scoreboard_size,
                self.cfg.count_budget,
            )
        })?;
        self.report.timings.recounts += 1;
        self.tracked = Some(Tracked::new(
            self.cfg.counting.hasher()?,
            self.cfg.counting.l_max,
            top.ranked,
            top.threshold,
        ));
        Ok(())
    }

    fn select_incremental(&mut self, want: usize) -> Result<Vec<Candidate>> {
        let min_freq = self.cfg.counting.min_freq;
        let mut fresh = false;
        loop {
            if self.tracked.is_none() {
                self.recount()?;
                fresh = true;
            }
            let tr = self.tracked.as_mut().expect("tracked after recount");
            let mut popped = Vec::with_capacity(want);
            while popped.len() < want {
                match tr.pop_best(min_freq) {
                    Some(i) => popped.push(i),
                    None => break,
                }
            }
            // The selection is exact when every popped entry outranks all
            // untracked runs, or when nothing untracked can qualify.
            let complete = popped.len() == want || tr.threshold.is_none();
            let exact = complete && popped.iter().all(|&i| tr.beats_threshold(i));
            if exact {
                let ranked: Vec<Candidate> = popped.iter().map(|&i| tr.candidate(i)).collect();
                let (kept, dropped) = non_overlapping(ranked);
                for c in &dropped {
                    let i = tr.lookup(tr.hasher.hash(c.surface.as_bytes()), c.surface.as_bytes());
                    tr.push_back(i.expect("dropped candidate is tracked"));
                }
                return Ok(kept);
            }
            if fresh {
                // A fresh count always satisfies the test above.
                unreachable!("fresh scoreboard failed the exactness test");
            }
            self.tracked = None;
        }
    }

    fn accept(&mut self, c: Candidate) -> Result<()> {
        let id = self.vocab.push(c.surface.clone())?;
        let l_max = self.cfg.counting.l_max;
        let tracked = self.tracked.as_ref();
        let seqs = std::mem::take(&mut self.seqs);
        let results: Vec<(TokenSequence, usize, Vec<u32>)> = self.pool.install(|| {
            seqs.into_par_iter()
                .map(|mut seq| {
                    let finder = Finder::new(c.surface.as_bytes());
                    let mut lost = Vec::new();
                    let mut applied = 0;
                    let mut from = 0;
                    while let Some((s, e)) = seq.next_occurrence(&finder, from) {
                        if let Some(tr) = tracked {
                            tr.lost_runs(&seq, s, e, l_max, &mut lost);
                        }
                        seq.merge_span(s, e);
                        applied += 1;
                        from = e;
                    }
                    (seq, applied, lost)
                })
                .collect()
        });
        let mut applied = 0;
        for (seq, n, lost) in results {
            self.seqs.push(seq);
            applied += n;
            if let Some(tr) = self.tracked.as_mut() {
                for i in lost {
                    tr.counts[i as usize] -= 1;
                }
            }
        }
        if let Some(tr) = &self.tracked {
            debug_assert!(tr
                .lookup(tr.hasher.hash(c.surface.as_bytes()), c.surface.as_bytes())
                .is_none_or(|i| tr.counts[i as usize] == 0));
        }
        let tokens: usize = self.seqs.iter().map(TokenSequence::token_count).sum();
        self.report.records.push(IterationRecord {
            iteration: self.report.records.len() + 1,
            id,
            surface: c.surface,
            count: c.count,
            score: c.score,
            applied: applied as u64,
            ave_length: ratio(self.report.chars, tokens as u64),
            tokens: tokens as u64,
        });
        Ok(())
    }

    fn maybe_checkpoint(&mut self) -> Result<()> {
        let policy = &self.cfg.checkpoint;
        let Some(path) = policy.path.clone() else {
            return Ok(());
        };
        let it = self.iteration();
        let by_count = policy.every_iterations.is_some_and(|n| n > 0 && it > 0 && it.is_multiple_of(n));
        let by_time = policy
            .every_secs
            .is_some_and(|s| self.last_checkpoint.elapsed().as_secs() >= s);
        if by_count || by_time || self.done {
            let t = Instant::now();
            self.checkpoint(&path)?;
            self.report.timings.checkpoint_secs += t.elapsed().as_secs_f64();
        }
        Ok(())
    }

    /// Writes the vocabulary, iteration counter, corpus digest and report.
    pub fn checkpoint(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let mut report = self.report.clone();
        report.timings = PhaseTimings::default();
        let body = CheckpointBody {
            vocabulary: serde_json::from_str(&self.vocab.to_json())?,
            iteration: self.iteration(),
            target: self.target,
            corpus_digest: self.digest.clone(),
            report,
        };
        let file = CheckpointFile {
            version: 1,
            checksum: checksum(&body),
            body,
        };
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&file)?)?;
        fs::rename(&tmp, path)?;
        self.last_checkpoint = Instant::now();
        Ok(())
    }
}
