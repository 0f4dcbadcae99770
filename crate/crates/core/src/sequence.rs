//! Token state of one shard.
//!
//! The text never changes during training. A token is the span between two
//! consecutive set bits of the start bitset, so merging adjacent tokens only
//! clears bits. Document starts are marked "hard": no token or candidate run
//! may contain a hard position in its interior.

use memchr::memmem::Finder;

use crate::bitset::BitSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    text: String,
    starts: BitSet,
    hard: BitSet,
    tokens: usize,
    chars: usize,
}

#[inline]
pub(crate) fn is_char_start(b: u8) -> bool {
    (b as i8) >= -0x40
}

/// Number of code points in a UTF-8 byte slice.
#[inline]
pub fn char_count(bytes: &[u8]) -> usize {
    bytes.iter().filter(|&&b| is_char_start(b)).count()
}

impl TokenSequence {
    /// Character-level sequence of a single document.
    pub fn from_text(text: &str) -> Self {
        Self::from_documents([text])
    }

    /// Character-level sequence over documents laid end to end.
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut text = String::new();
        let mut doc_starts = Vec::new();
        for doc in docs {
            doc_starts.push(text.len());
            text.push_str(doc);
        }
        let n = text.len();
        let mut starts = BitSet::new(n + 1);
        let mut hard = BitSet::new(n + 1);
        let mut chars = 0;
        for (i, &b) in text.as_bytes().iter().enumerate() {
            if is_char_start(b) {
                starts.set(i);
                chars += 1;
            }
        }
        starts.set(n);
        hard.set(n);
        for &d in &doc_starts {
            hard.set(d);
        }
        TokenSequence {
            text,
            starts,
            hard,
            tokens: chars,
            chars,
        }
    }

    /// Sequence with an explicit segmentation of a single document.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        let text: String = tokens.iter().map(|t| t.as_ref()).collect();
        let n = text.len();
        let mut starts = BitSet::new(n + 1);
        let mut hard = BitSet::new(n + 1);
        let mut pos = 0;
        let mut count = 0;
        for t in tokens {
            let t = t.as_ref();
            if t.is_empty() {
                continue;
            }
            starts.set(pos);
            pos += t.len();
            count += 1;
        }
        starts.set(n);
        hard.set(0);
        hard.set(n);
        TokenSequence {
            chars: char_count(text.as_bytes()),
            text,
            starts,
            hard,
            tokens: count,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn byte_len(&self) -> usize {
        self.text.len()
    }

    pub fn token_count(&self) -> usize {
        self.tokens
    }

    pub fn char_count(&self) -> usize {
        self.chars
    }

    #[inline]
    pub fn is_start(&self, pos: usize) -> bool {
        self.starts.get(pos)
    }

    #[inline]
    pub fn is_hard(&self, pos: usize) -> bool {
        self.hard.get(pos)
    }

    /// Next token start after `pos` (the text end counts as a start).
    #[inline]
    pub fn next_start(&self, pos: usize) -> Option<usize> {
        self.starts.next_after(pos)
    }

    #[inline]
    pub fn prev_start(&self, pos: usize) -> Option<usize> {
        self.starts.prev_before(pos)
    }

    #[inline]
    pub fn next_hard(&self, pos: usize) -> Option<usize> {
        self.hard.next_after(pos)
    }

    #[inline]
    pub fn prev_hard(&self, pos: usize) -> Option<usize> {
        self.hard.prev_before(pos)
    }

    /// Byte spans of the current tokens, in order.
    pub fn spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.text.len();
        let mut cur = if n == 0 { None } else { Some(0) };
        std::iter::from_fn(move || {
            let s = cur?;
            let e = self.starts.next_after(s).unwrap_or(n);
            cur = (e < n).then_some(e);
            Some((s, e))
        })
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> + '_ {
        self.spans().map(move |(s, e)| &self.text[s..e])
    }

    /// Whether `text[s..e]` is currently a run of at least two tokens that
    /// stays inside one document.
    #[inline]
    pub fn is_mergeable(&self, s: usize, e: usize) -> bool {
        e <= self.text.len()
            && self.starts.get(s)
            && self.starts.get(e)
            && self.starts.next_after(s).is_some_and(|b| b < e)
            && self.hard.next_after(s).is_none_or(|h| h >= e)
    }

    /// Leftmost mergeable occurrence of the finder's needle at or after `from`.
    pub fn next_occurrence(&self, finder: &Finder<'_>, from: usize) -> Option<(usize, usize)> {
        let hay = self.text.as_bytes();
        let len = finder.needle().len();
        let mut pos = from;
        while pos + len <= hay.len() {
            let p = pos + finder.find(&hay[pos..])?;
            if self.is_mergeable(p, p + len) {
                return Some((p, p + len));
            }
            pos = p + 1;
        }
        None
    }

    /// Collapses the tokens covering `s..e` into one token. Returns the
    /// number of tokens removed.
    pub fn merge_span(&mut self, s: usize, e: usize) -> usize {
        debug_assert!(self.is_mergeable(s, e));
        let mut removed = 0;
        let mut p = s;
        while let Some(b) = self.starts.next_after(p) {
            if b >= e {
                break;
            }
            self.starts.clear(b);
            removed += 1;
            p = b;
        }
        self.tokens -= removed;
        removed
    }

    /// Replaces every leftmost non-overlapping occurrence of `surface` by a
    /// single token. Returns the number of replacements.
    pub fn apply(&mut self, surface: &str) -> usize {
        if surface.is_empty() {
            return 0;
        }
        let finder = Finder::new(surface.as_bytes());
        let mut from = 0;
        let mut applied = 0;
        while let Some((s, e)) = self.next_occurrence(&finder, from) {
            self.merge_span(s, e);
            applied += 1;
            from = e;
        }
        applied
    }

    /// Mean characters per token.
    pub fn ave_length(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.chars as f64 / self.tokens as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(seq: &TokenSequence) -> Vec<&str> {
        seq.tokens().collect()
    }

    #[test]
    fn character_stage() {
        let seq = TokenSequence::from_text("h\u{e9}llo");
        assert_eq!(toks(&seq), ["h", "\u{e9}", "l", "l", "o"]);
        assert_eq!(seq.char_count(), 5);
        assert_eq!(seq.ave_length(), 1.0);
    }

    #[test]
    fn apply_is_leftmost_non_overlapping() {
        let mut seq = TokenSequence::from_text("aaaa");
        assert_eq!(seq.apply("aa"), 2);
        assert_eq!(toks(&seq), ["aa", "aa"]);

        let mut seq = TokenSequence::from_text("aaa");
        assert_eq!(seq.apply("aa"), 1);
        assert_eq!(toks(&seq), ["aa", "a"]);
    }

    #[test]
    fn apply_absent_is_noop() {
        let mut seq = TokenSequence::from_text("abab");
        let before = seq.clone();
        assert_eq!(seq.apply("zz"), 0);
        assert_eq!(seq, before);
    }

    #[test]
    fn apply_respects_current_tokens() {
        // "ab" is one token, so "bc" is not a run of whole tokens.
        let mut seq = TokenSequence::from_tokens(&["ab", "c", "b", "c"]);
        assert_eq!(seq.apply("bc"), 1);
        assert_eq!(toks(&seq), ["ab", "c", "bc"]);
    }

    #[test]
    fn documents_are_hard_boundaries() {
        let mut seq = TokenSequence::from_documents(["ab", "ab"]);
        assert_eq!(seq.apply("ba"), 0);
        assert_eq!(seq.apply("ab"), 2);
        assert_eq!(toks(&seq), ["ab", "ab"]);
    }

    #[test]
    fn empty_text() {
        let seq = TokenSequence::from_text("");
        assert_eq!(seq.token_count(), 0);
        assert_eq!(toks(&seq), Vec::<&str>::new());
        assert_eq!(seq.ave_length(), 0.0);
    }

    proptest! {
        #[test]
        fn apply_is_lossless_and_shrinks(text in "[ab\u{e9}]{0,40}", surface in "[ab\u{e9}]{2,4}") {
            let mut seq = TokenSequence::from_text(&text);
            let before = seq.token_count();
            let n = seq.apply(&surface);
            prop_assert_eq!(toks(&seq).concat(), text.clone());
            prop_assert_eq!(seq.token_count(), toks(&seq).len());
            prop_assert_eq!(before - seq.token_count(), n * (surface.chars().count() - 1));
            // No occurrence of the surface remains as a run of whole tokens.
            let finder = Finder::new(surface.as_bytes());
            prop_assert!(seq.next_occurrence(&finder, 0).is_none());
        }
    }
}
