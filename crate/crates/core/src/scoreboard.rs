//! Bounded best-M candidate collection.
//!
//! Candidates are ranked by score, then count, then character length, then
//! by the lexicographically smaller surface. The order is total, so the
//! contents of a board never depend on the order candidates were offered in.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::counting::Candidate;
use crate::{Error, Result};

/// Borrowed ranking key; `Greater` means ranks higher.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankKey<'a> {
    pub score: u64,
    pub count: u64,
    pub char_len: usize,
    pub surface: &'a str,
}

pub fn rank_parts(count: u64, char_len: usize, surface: &str) -> RankKey<'_> {
    RankKey {
        score: count * char_len as u64,
        count,
        char_len,
        surface,
    }
}

impl Ord for RankKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .cmp(&other.score)
            .then(self.count.cmp(&other.count))
            .then(self.char_len.cmp(&other.char_len))
            .then_with(|| other.surface.cmp(self.surface))
    }
}

impl PartialOrd for RankKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Candidate {
    pub fn key(&self) -> RankKey<'_> {
        RankKey {
            score: self.score,
            count: self.count,
            char_len: self.char_len,
            surface: &self.surface,
        }
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
pub struct Scoreboard {
    capacity: usize,
    // Min-heap on rank: the root is the weakest entry kept.
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl Scoreboard {
    pub fn new(capacity: usize) -> Self {
        Scoreboard {
            capacity,
            heap: BinaryHeap::with_capacity(capacity.min(1 << 20)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Whether a candidate with this key would be kept.
    pub fn admits(&self, key: RankKey<'_>) -> bool {
        if self.capacity == 0 {
            return false;
        }
        if self.heap.len() < self.capacity {
            return true;
        }
        self.heap.peek().is_some_and(|Reverse(min)| key > min.key())
    }

    /// Keeps `c` if it outranks the weakest entry or the board has room.
    /// Returns whether it was kept.
    pub fn offer(&mut self, c: Candidate) -> bool {
        if !self.admits(c.key()) {
            return false;
        }
        if self.heap.len() == self.capacity {
            self.heap.pop();
        }
        self.heap.push(Reverse(c));
        true
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.heap.iter().map(|Reverse(c)| c).max()
    }

    /// Weakest kept entry.
    pub fn weakest(&self) -> Option<&Candidate> {
        self.heap.peek().map(|Reverse(c)| c)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.heap.iter().map(|Reverse(c)| c)
    }

    /// Entries, best first.
    pub fn into_sorted(self) -> Vec<Candidate> {
        let mut v: Vec<Candidate> = self.heap.into_iter().map(|Reverse(c)| c).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }

    /// Tab-separated `surface count char_len score` lines, best first.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in self.clone().into_sorted() {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", c.surface, c.count, c.char_len, c.score));
        }
        out
    }
}

/// Sums counts per surface across boards, re-ranks, and returns the best
/// candidate with the merged board. The merged board keeps as many entries
/// as the largest input board.
pub fn merge_global(boards: &[Scoreboard]) -> Result<(Candidate, Scoreboard)> {
    let mut sums: FxHashMap<&str, u64> = FxHashMap::default();
    for c in boards.iter().flat_map(Scoreboard::iter) {
        *sums.entry(&c.surface).or_default() += c.count;
    }
    let capacity = boards.iter().map(Scoreboard::capacity).max().unwrap_or(0);
    let mut merged = Scoreboard::new(capacity);
    for (surface, count) in sums {
        merged.offer(Candidate::new(surface, count));
    }
    let best = merged.best().cloned().ok_or(Error::EmptyBoards)?;
    Ok((best, merged))
}
