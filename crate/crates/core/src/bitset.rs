//! Fixed-size bit set with fast forward and backward scans.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    /// Smallest set index strictly greater than `i`.
    #[inline]
    pub fn next_after(&self, i: usize) -> Option<usize> {
        let start = i + 1;
        if start >= self.len {
            return None;
        }
        let mut w = start >> 6;
        let mut word = self.words[w] & (!0u64 << (start & 63));
        loop {
            if word != 0 {
                let idx = (w << 6) + word.trailing_zeros() as usize;
                return (idx < self.len).then_some(idx);
            }
            w += 1;
            if w >= self.words.len() {
                return None;
            }
            word = self.words[w];
        }
    }

    /// Largest set index strictly smaller than `i`.
    #[inline]
    pub fn prev_before(&self, i: usize) -> Option<usize> {
        if i == 0 {
            return None;
        }
        let end = i - 1;
        let mut w = end >> 6;
        let shift = 63 - (end & 63);
        let mut word = (self.words[w] << shift) >> shift;
        loop {
            if word != 0 {
                return Some((w << 6) + 63 - word.leading_zeros() as usize);
            }
            if w == 0 {
                return None;
            }
            w -= 1;
            word = self.words[w];
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some((w << 6) + bit)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn scans_match_linear_search(len in 1usize..400, bits in proptest::collection::vec(0usize..400, 0..60), probe in 0usize..400) {
            let mut set = BitSet::new(len);
            for &b in &bits {
                if b < len {
                    set.set(b);
                }
            }
            let probe = probe % len;
            let next = (probe + 1..len).find(|&i| set.get(i));
            let prev = (0..probe).rev().find(|&i| set.get(i));
            prop_assert_eq!(set.next_after(probe), next);
            prop_assert_eq!(set.prev_before(probe), prev);
            prop_assert_eq!(set.iter_ones().count(), set.count_ones());
        }
    }

    #[test]
    fn clear_removes_bit() {
        let mut set = BitSet::new(130);
        set.set(0);
        set.set(129);
        assert_eq!(set.next_after(0), Some(129));
        set.clear(129);
        assert_eq!(set.next_after(0), None);
        assert_eq!(set.prev_before(130), Some(0));
    }
}
