//! Exhaustive and greedy solvers for the prefix-graph partition objective
//! `Σ_k |S_k| · W_min(S_k)` on small instances.
//!
//! `W[s][s']` is the longest common prefix of two sequences, in characters.
//! `W_min` of a block is its smallest pairwise weight; a singleton block
//! scores its own length. The objective is maximised.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_BRUTE_FORCE: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixGraph {
    pub sequences: Vec<String>,
    pub weights: Vec<Vec<usize>>,
}

pub fn lcp_chars(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

pub fn build_graph<S: AsRef<str>>(sequences: &[S]) -> PrefixGraph {
    let sequences: Vec<String> = sequences.iter().map(|s| s.as_ref().to_string()).collect();
    let n = sequences.len();
    let mut weights = vec![vec![0; n]; n];
    for i in 0..n {
        weights[i][i] = sequences[i].chars().count();
        for j in i + 1..n {
            let w = lcp_chars(&sequences[i], &sequences[j]);
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    PrefixGraph { sequences, weights }
}

/// Blocks of sequence indices; each block sorted, blocks ordered by their
/// smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Self {
        blocks.retain(|b| !b.is_empty());
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { blocks }
    }

    /// From a restricted growth string: `labels[i]` is the block of item `i`.
    fn from_labels(labels: &[usize], k: usize) -> Self {
        let mut blocks = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            blocks[l].push(i);
        }
        Partition::new(blocks)
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }
}

pub fn w_min(g: &PrefixGraph, block: &[usize]) -> usize {
    match block {
        [] => 0,
        [s] => g.weights[*s][*s],
        _ => {
            let mut m = usize::MAX;
            for (x, &i) in block.iter().enumerate() {
                for &j in &block[x + 1..] {
                    m = m.min(g.weights[i][j]);
                }
            }
            m
        }
    }
}

fn block_value(g: &PrefixGraph, block: &[usize]) -> u64 {
    (block.len() * w_min(g, block)) as u64
}

pub fn objective(p: &Partition, g: &PrefixGraph) -> u64 {
    p.blocks.iter().map(|b| block_value(g, b)).sum()
}

fn check(g: &PrefixGraph, k: usize) -> Result<()> {
    let n = g.sequences.len();
    if k == 0 || k > n {
        return Err(Error::InvalidBlockCount { k, n });
    }
    Ok(())
}

/// Best partition into exactly `k` blocks. Among equal objectives the
/// lexicographically smallest restricted growth string wins.
pub fn brute_force_best(g: &PrefixGraph, k: usize) -> Result<(Partition, u64)> {
    let n = g.sequences.len();
    if n > MAX_BRUTE_FORCE {
        return Err(Error::InstanceTooLarge {
            n,
            limit: MAX_BRUTE_FORCE,
        });
    }
    check(g, k)?;
    let mut labels = vec![0usize; n];
    let mut best: Option<(Partition, u64)> = None;
    enumerate(&mut labels, 0, 0, k, &mut |labels| {
        let p = Partition::from_labels(labels, k);
        let v = objective(&p, g);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((p, v));
        }
    });
    Ok(best.expect("at least one k-partition exists"))
}

/// Visits restricted growth strings with exactly `k` distinct labels in
/// lexicographic order.
fn enumerate(labels: &mut [usize], i: usize, used: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let n = labels.len();
    if i == n {
        if used == k {
            f(labels);
        }
        return;
    }
    // Not enough items left to open the remaining blocks.
    if k - used > n - i {
        return;
    }
    for l in 0..=used.min(k - 1) {
        labels[i] = l;
        enumerate(labels, i + 1, used.max(l + 1), k, f);
    }
}

/// Number of partitions of `n` items into `k` blocks.
pub fn stirling2(n: usize, k: usize) -> u64 {
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = j as u64 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    row[k]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedySplit {
    pub partition: Partition,
    pub objective: u64,
    /// Objective change of each split.
    pub deltas: Vec<i64>,
}

/// Starts from one block and performs `k - 1` splits, each the two-way split
/// of a single block with the largest objective change.
pub fn greedy_split(g: &PrefixGraph, k: usize) -> Result<GreedySplit> {
    let n = g.sequences.len();
    if n > 24 {
        return Err(Error::InstanceTooLarge { n, limit: 24 });
    }
    check(g, k)?;
    let mut blocks = vec![(0..n).collect::<Vec<usize>>()];
    let mut deltas = Vec::new();
    for _ in 1..k {
        let mut best: Option<(i64, usize, Vec<usize>, Vec<usize>)> = None;
        for (bi, block) in blocks.iter().enumerate() {
            let m = block.len();
            if m < 2 {
                continue;
            }
            let before = block_value(g, block) as i64;
            // The first member stays on the left, so each split is seen once.
            for mask in 0..(1u32 << (m - 1)) - 1 {
                let (mut left, mut right) = (vec![block[0]], Vec::new());
                for (t, &item) in block[1..].iter().enumerate() {
                    if mask >> t & 1 == 1 {
                        left.push(item);
                    } else {
                        right.push(item);
                    }
                }
                let delta = block_value(g, &left) as i64 + block_value(g, &right) as i64 - before;
                if best.as_ref().is_none_or(|b| delta > b.0) {
                    best = Some((delta, bi, left, right));
                }
            }
        }
        let (delta, bi, left, right) = best.expect("k <= n leaves a splittable block");
        blocks[bi] = left;
        blocks.push(right);
        deltas.push(delta);
    }
    let partition = Partition::new(blocks);
    let objective = objective(&partition, g);
    Ok(GreedySplit {
        partition,
        objective,
        deltas,
    })
}

/// The five-sequence toy instance: two "the quick" sentences sharing 16
/// characters, a third sharing 10, and two "she sells" sentences sharing 14.
pub fn toy_instance() -> PrefixGraph {
    build_graph(&[
        "the quick brown fox",
        "the quick brown dog",
        "the quick red car",
        "she sells sea shells",
        "she sells sea weeds",
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toy_weights() {
        let g = toy_instance();
        assert_eq!(g.weights[0][1], 16);
        assert_eq!(g.weights[0][2], 10);
        assert_eq!(g.weights[1][2], 10);
        assert_eq!(g.weights[3][4], 14);
        assert_eq!(g.weights[0][3], 0);
    }

    #[test]
    fn toy_optimum() {
        let g = toy_instance();
        let target = Partition::new(vec![vec![0, 1, 2], vec![3, 4]]);
        assert_eq!(objective(&target, &g), 58);
        let (p, v) = brute_force_best(&g, 2).unwrap();
        assert_eq!((p, v), (target.clone(), 58));
        let gs = greedy_split(&g, 2).unwrap();
        assert_eq!(gs.partition, target);
        assert_eq!(gs.deltas, [58]);
    }

    #[test]
    fn extremes() {
        let g = toy_instance();
        let (p, v) = brute_force_best(&g, 5).unwrap();
        assert_eq!(p.k(), 5);
        let lens: usize = g.sequences.iter().map(|s| s.chars().count()).sum();
        assert_eq!(v, lens as u64);
        let (p, v) = brute_force_best(&g, 1).unwrap();
        assert_eq!(p.blocks, [vec![0, 1, 2, 3, 4]]);
        assert_eq!(v, 0);
        assert!(greedy_split(&g, 1).unwrap().deltas.is_empty());
        assert!(brute_force_best(&g, 0).is_err());
        assert!(brute_force_best(&g, 6).is_err());
        assert!(brute_force_best(&build_graph(&vec!["a"; 13]), 2).is_err());
    }

    #[test]
    fn enumeration_counts_match_stirling() {
        for n in 1..=7 {
            for k in 1..=n {
                let mut labels = vec![0; n];
                let mut count = 0u64;
                enumerate(&mut labels, 0, 0, k, &mut |_| count += 1);
                assert_eq!(count, stirling2(n, k), "n={n} k={k}");
            }
        }
        assert_eq!(stirling2(5, 2), 15);
    }

    proptest! {
        #[test]
        fn greedy_never_beats_brute_force(seqs in proptest::collection::vec("[ab]{0,5}", 1..8), k in 1usize..8) {
            let g = build_graph(&seqs);
            let k = k.min(seqs.len());
            let (_, best) = brute_force_best(&g, k).unwrap();
            let greedy = greedy_split(&g, k).unwrap();
            prop_assert!(greedy.objective <= best);
            prop_assert_eq!(greedy.partition.k(), k);
        }

        #[test]
        fn optimum_never_decreases_with_k(seqs in proptest::collection::vec("[ab]{0,5}", 2..8)) {
            let g = build_graph(&seqs);
            let values: Vec<u64> = (1..=seqs.len()).map(|k| brute_force_best(&g, k).unwrap().1).collect();
            prop_assert!(values.windows(2).all(|w| w[0] <= w[1]), "{:?}", values);
        }

        #[test]
        fn weights_match_pairwise_scan(seqs in proptest::collection::vec("[ab\u{e9}]{0,6}", 1..6)) {
            let g = build_graph(&seqs);
            for i in 0..seqs.len() {
                for j in 0..seqs.len() {
                    let a: Vec<char> = seqs[i].chars().collect();
                    let b: Vec<char> = seqs[j].chars().collect();
                    let mut l = 0;
                    while l < a.len() && l < b.len() && a[l] == b[l] {
                        l += 1;
                    }
                    prop_assert_eq!(g.weights[i][j], l);
                    prop_assert!(g.weights[i][j] <= a.len().min(b.len()));
                }
            }
        }
    }
}
