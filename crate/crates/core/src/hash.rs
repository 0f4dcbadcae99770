//! Polynomial (Rabin-Karp) rolling hash over bytes.
//!
//! A window `w[0..n]` hashes to `Σ (w[i] + 1) · B^(n-1-i) mod P`. Byte values
//! are shifted by one so that leading zero bytes still change the digest.

use crate::{Error, Result};

/// The Mersenne prime 2^61 - 1, which admits a division-free reduction.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

pub const DEFAULT_BASE: u64 = 0x1ac4_5d2e_7f31_9b57;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RollingHasher {
    base: u64,
    modulus: u64,
}

impl Default for RollingHasher {
    fn default() -> Self {
        RollingHasher {
            base: DEFAULT_BASE,
            modulus: MERSENNE_61,
        }
    }
}

impl RollingHasher {
    pub fn new(base: u64, modulus: u64) -> Result<Self> {
        if modulus < 257 {
            return Err(Error::InvalidConfig(format!(
                "hash modulus {modulus} must exceed 256"
            )));
        }
        let base = base % modulus;
        if base < 2 {
            return Err(Error::InvalidConfig(format!(
                "hash base reduces to {base} modulo {modulus}"
            )));
        }
        Ok(RollingHasher { base, modulus })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let p = a as u128 * b as u128;
        if self.modulus == MERSENNE_61 {
            let lo = (p as u64) & MERSENNE_61;
            let hi = (p >> 61) as u64;
            let s = lo + hi;
            if s >= MERSENNE_61 {
                s - MERSENNE_61
            } else {
                s
            }
        } else {
            (p % self.modulus as u128) as u64
        }
    }

    #[inline(always)]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline(always)]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    /// Appends one byte to a digest.
    #[inline(always)]
    pub fn push(&self, digest: u64, byte: u8) -> u64 {
        self.add(self.mul(digest, self.base), byte as u64 + 1)
    }

    pub fn hash(&self, window: &[u8]) -> u64 {
        window.iter().fold(0, |h, &b| self.push(h, b))
    }

    pub fn pow(&self, mut exp: usize) -> u64 {
        let mut acc = 1;
        let mut b = self.base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Slides a window one byte. `lead` must be `B^(width-1)`.
    #[inline(always)]
    pub fn roll(&self, digest: u64, lead: u64, outgoing: u8, incoming: u8) -> u64 {
        let stripped = self.sub(digest, self.mul(outgoing as u64 + 1, lead));
        self.push(stripped, incoming)
    }
}

/// A fixed-width window that can be slid across a byte string.
#[derive(Clone, Debug)]
pub struct RollingWindow {
    hasher: RollingHasher,
    lead: u64,
    digest: u64,
}

impl RollingWindow {
    pub fn new(hasher: RollingHasher, window: &[u8]) -> Self {
        assert!(!window.is_empty(), "rolling window must be non-empty");
        RollingWindow {
            hasher,
            lead: hasher.pow(window.len() - 1),
            digest: hasher.hash(window),
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn roll(&mut self, outgoing: u8, incoming: u8) -> u64 {
        self.digest = self.hasher.roll(self.digest, self.lead, outgoing, incoming);
        self.digest
    }
}

/// Prefix digests of one byte string, giving any substring digest in O(1).
#[derive(Clone, Debug)]
pub struct PrefixHashes {
    hasher: RollingHasher,
    prefix: Vec<u64>,
    powers: Vec<u64>,
}

impl PrefixHashes {
    pub fn new(hasher: RollingHasher, bytes: &[u8]) -> Self {
        let mut prefix = Vec::with_capacity(bytes.len() + 1);
        let mut powers = Vec::with_capacity(bytes.len() + 1);
        prefix.push(0);
        powers.push(1);
        for &b in bytes {
            prefix.push(hasher.push(*prefix.last().unwrap(), b));
            powers.push(hasher.mul(*powers.last().unwrap(), hasher.base));
        }
        PrefixHashes {
            hasher,
            prefix,
            powers,
        }
    }

    /// Digest of `bytes[start..end]`.
    #[inline]
    pub fn range(&self, start: usize, end: usize) -> u64 {
        let h = &self.hasher;
        h.sub(self.prefix[end], h.mul(self.prefix[start], self.powers[end - start]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hashers() -> [RollingHasher; 2] {
        [
            RollingHasher::default(),
            RollingHasher::new(257, 1_000_000_007).unwrap(),
        ]
    }

    #[test]
    fn roll_ab_to_bc() {
        for h in hashers() {
            let mut w = RollingWindow::new(h, b"ab");
            assert_eq!(w.roll(b'a', b'c'), h.hash(b"bc"));
        }
    }

    #[test]
    fn leading_zero_bytes_matter() {
        let h = RollingHasher::default();
        assert_ne!(h.hash(b"\0a"), h.hash(b"a"));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(RollingHasher::new(1, MERSENNE_61).is_err());
        assert!(RollingHasher::new(7, 100).is_err());
    }

    proptest! {
        #[test]
        fn rolling_matches_direct(bytes in proptest::collection::vec(any::<u8>(), 2..200), width in 1usize..32) {
            let width = width.min(bytes.len() - 1);
            for h in hashers() {
                let mut w = RollingWindow::new(h, &bytes[..width]);
                for i in 0..bytes.len() - width {
                    let d = w.roll(bytes[i], bytes[i + width]);
                    prop_assert_eq!(d, h.hash(&bytes[i + 1..i + 1 + width]));
                }
            }
        }

        #[test]
        fn prefix_ranges_match_direct(bytes in proptest::collection::vec(any::<u8>(), 0..120), a in 0usize..120, b in 0usize..120) {
            let (a, b) = (a.min(b).min(bytes.len()), a.max(b).min(bytes.len()));
            for h in hashers() {
                let p = PrefixHashes::new(h, &bytes);
                prop_assert_eq!(p.range(a, b), h.hash(&bytes[a..b]));
            }
        }
    }
}
