//! Compression and distribution statistics for a tokenizer on a corpus.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::inject_noise;
use crate::encoder::{token_kind, TokenKind, Tokenizer};
use crate::{Error, Result};

/// Tokens per code point.
pub fn tpc(token_count: usize, char_count: usize) -> f64 {
    if char_count == 0 {
        0.0
    } else {
        token_count as f64 / char_count as f64
    }
}

/// Tokens per code point of `ids`, the encoding of `text`.
pub fn tpc_of(ids: &[u32], text: &str) -> f64 {
    tpc(ids.len(), text.chars().count())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Code points consumed by vocabulary tokens rather than byte escapes.
    pub coverage: f64,
    /// Emitted tokens that are byte escapes.
    pub oov_rate: f64,
    /// Emitted tokens that are single code points.
    pub fallback_rate: f64,
    pub tokens: u64,
    pub chars: u64,
}

/// Coverage statistics of one encoded, preprocessed text.
pub fn coverage_of(tok: &dyn Tokenizer, ids: &[u32]) -> Coverage {
    let vocab = tok.vocabulary();
    let mut escapes = 0u64;
    let mut singles = 0u64;
    let mut covered = 0u64;
    let mut escaped_chars = 0u64;
    for &id in ids {
        match token_kind(vocab, id) {
            Some(TokenKind::Escape) => {
                escapes += 1;
                let b = vocab.escape_byte(id).unwrap();
                // Count each escaped code point once, at its lead byte.
                if (b as i8) >= -0x40 {
                    escaped_chars += 1;
                }
            }
            Some(TokenKind::Char) => {
                singles += 1;
                covered += 1;
            }
            Some(_) => covered += vocab.get(id).map_or(0, |s| s.chars().count() as u64),
            None => {}
        }
    }
    let tokens = ids.len() as u64;
    let chars = covered + escaped_chars;
    Coverage {
        coverage: frac(covered, chars),
        oov_rate: frac(escapes, tokens),
        fallback_rate: frac(singles, tokens),
        tokens,
        chars,
    }
}

fn frac(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Encodes a preprocessed held-out text and reports coverage and OOV rate.
pub fn coverage_and_oov(tok: &dyn Tokenizer, heldout: &str) -> Coverage {
    coverage_of(tok, &tok.encode(heldout))
}

/// Coverage on clean text and on a copy with character substitution noise.
pub fn noise_delta(tok: &dyn Tokenizer, text: &str, rate: f64, seed: u64) -> Result<(Coverage, Coverage)> {
    let noisy = inject_noise(text, rate, seed, tok.vocabulary().sentinel)?;
    Ok((coverage_and_oov(tok, text), coverage_and_oov(tok, &noisy)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub used: usize,
    pub total: usize,
    pub fraction: f64,
}

/// Fraction of non-special vocabulary tokens emitted when encoding `texts`.
pub fn utilization<'a, I>(tok: &dyn Tokenizer, texts: I) -> Utilization
where
    I: IntoIterator<Item = &'a str>,
{
    let vocab = tok.vocabulary();
    let mut seen = vec![false; vocab.len()];
    for t in texts {
        for id in tok.encode(t) {
            if let Some(s) = seen.get_mut(id as usize) {
                *s = true;
            }
        }
    }
    let specials = vocab.special_count();
    let used = seen[specials..].iter().filter(|&&s| s).count();
    let total = vocab.len() - specials;
    Utilization {
        used,
        total,
        fraction: frac(used as u64, total as u64),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfFit {
    pub alpha: f64,
    pub r2: f64,
    /// All frequencies equal: the slope is zero and R² is reported as 0.
    pub degenerate: bool,
    pub ranks: usize,
}

pub const MIN_ZIPF_RANKS: usize = 10;

/// Least-squares fit of `ln f` against `ln rank`, frequencies sorted in
/// descending order. Zero frequencies are ignored.
pub fn zipf_fit(freqs: &[f64]) -> Result<ZipfFit> {
    let mut f: Vec<f64> = freqs.iter().copied().filter(|&x| x > 0.0).collect();
    if f.len() < MIN_ZIPF_RANKS {
        return Err(Error::TooFewTokens {
            needed: MIN_ZIPF_RANKS,
            got: f.len(),
        });
    }
    f.sort_by(|a, b| b.total_cmp(a));
    let n = f.len() as f64;
    let xs: Vec<f64> = (1..=f.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return Ok(ZipfFit {
            alpha: 0.0,
            r2: 0.0,
            degenerate: true,
            ranks: f.len(),
        });
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0);
    Ok(ZipfFit {
        alpha: -slope,
        r2,
        degenerate: false,
        ranks: f.len(),
    })
}

pub fn zipf_fit_counts(counts: &[u64]) -> Result<ZipfFit> {
    zipf_fit(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
}

/// Population variance of the `n` largest relative frequencies, where
/// relative frequency is a count over the total of all counts.
pub fn head_variance(counts: &[u64], n: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 || n == 0 {
        return 0.0;
    }
    let mut c = counts.to_vec();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c.truncate(n);
    let rel: Vec<f64> = c.iter().map(|&x| x as f64 / total as f64).collect();
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rel.len() as f64
}

/// Jensen-Shannon divergence in bits. Inputs are normalised first and padded
/// with zeros to a common length.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp <= 0.0 || sq <= 0.0 {
        return 0.0;
    }
    let n = p.len().max(q.len());
    let at = |v: &[f64], s: f64, i: usize| v.get(i).copied().unwrap_or(0.0) / s;
    let mut js = 0.0;
    for i in 0..n {
        let (a, b) = (at(p, sp, i), at(q, sq, i));
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    js.clamp(0.0, 1.0)
}

/// Divergence between the empirical tail (ranks beyond `head_skip`) and a
/// Zipf(`alpha`) law over the same ranks, both renormalised.
pub fn js_to_zipf(counts: &[u64], alpha: f64, head_skip: usize) -> f64 {
    let mut c: Vec<u64> = counts.iter().copied().filter(|&x| x > 0).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    if c.len() <= head_skip {
        return 0.0;
    }
    let tail: Vec<f64> = c[head_skip..].iter().map(|&x| x as f64).collect();
    let ideal: Vec<f64> = (head_skip + 1..=c.len())
        .map(|r| (r as f64).powf(-alpha))
        .collect();
    js_divergence(&tail, &ideal)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tpc: f64,
    pub coverage: f64,
    pub oov_rate: f64,
    pub fallback_rate: f64,
    pub utilization: f64,
    pub zipf_alpha: f64,
    pub zipf_r2: f64,
    pub zipf_degenerate: bool,
    pub head_variance: f64,
    pub js_divergence: f64,
    pub token_count: u64,
    pub char_count: u64,
}

#[derive(Clone, Debug)]
pub struct MetricsConfig {
    pub head_n: usize,
    pub head_skip: usize,
    pub zipf_alpha: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            head_n: 50,
            head_skip: 50,
            zipf_alpha: 1.0,
        }
    }
}

/// Encodes every document (preprocessed) and computes all statistics.
pub fn evaluate(tok: &dyn Tokenizer, docs: &[&str], cfg: &MetricsConfig) -> Result<MetricsReport> {
    if docs.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let encoded: Vec<Vec<u32>> = docs.par_iter().map(|d| tok.encode(d)).collect();
    let vocab = tok.vocabulary();
    let mut cov = Coverage::default();
    let mut covered = 0.0;
    let mut escapes = 0.0;
    let mut singles = 0.0;
    let mut freq: FxHashMap<u32, u64> = FxHashMap::default();
    let mut chars = 0u64;
    for (ids, doc) in encoded.iter().zip(docs) {
        let c = coverage_of(tok, ids);
        covered += c.coverage * c.chars as f64;
        escapes += c.oov_rate * c.tokens as f64;
        singles += c.fallback_rate * c.tokens as f64;
        cov.tokens += c.tokens;
        cov.chars += c.chars;
        chars += doc.chars().count() as u64;
        for &id in ids {
            *freq.entry(id).or_default() += 1;
        }
    }
    let mut seen = 0usize;
    for id in freq.keys() {
        if (*id as usize) < vocab.len() && !vocab.is_special(*id) {
            seen += 1;
        }
    }
    let counts: Vec<u64> = freq.values().copied().collect();
    let (zipf_alpha, zipf_r2, zipf_degenerate) = match zipf_fit_counts(&counts) {
        Ok(z) => (z.alpha, z.r2, z.degenerate),
        Err(Error::TooFewTokens { .. }) => (0.0, 0.0, true),
        Err(e) => return Err(e),
    };
    let div = |a: f64, b: u64| if b == 0 { 0.0 } else { a / b as f64 };
    Ok(MetricsReport {
        tpc: tpc(cov.tokens as usize, chars as usize),
        coverage: div(covered, cov.chars),
        oov_rate: div(escapes, cov.tokens),
        fallback_rate: div(singles, cov.tokens),
        utilization: frac(seen as u64, (vocab.len() - vocab.special_count()) as u64),
        zipf_alpha,
        zipf_r2,
        zipf_degenerate,
        head_variance: head_variance(&counts, cfg.head_n),
        js_divergence: js_to_zipf(&counts, cfg.zipf_alpha, cfg.head_skip),
        token_count: cov.tokens,
        char_count: chars,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub corpus: String,
    pub tokenizer: String,
    pub vocab_size: usize,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

/// Evaluates every tokenizer on every corpus.
pub fn compare(
    tokenizers: &[(&str, &dyn Tokenizer)],
    corpora: &[(&str, Vec<&str>)],
    cfg: &MetricsConfig,
) -> Result<Comparison> {
    let mut rows = Vec::new();
    for (cname, docs) in corpora {
        for (tname, tok) in tokenizers {
            rows.push(ComparisonRow {
                corpus: cname.to_string(),
                tokenizer: tname.to_string(),
                vocab_size: tok.vocabulary().len(),
                report: evaluate(*tok, docs, cfg)?,
            });
        }
    }
    Ok(Comparison { rows })
}

impl Comparison {
    fn columns(&self) -> Vec<(String, usize)> {
        let mut cols: Vec<(String, usize)> = Vec::new();
        for r in &self.rows {
            let c = (r.tokenizer.clone(), r.vocab_size);
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        cols
    }

    fn corpora(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.corpus) {
                out.push(r.corpus.clone());
            }
        }
        out
    }

    fn cell(&self, corpus: &str, col: &(String, usize)) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.corpus == corpus && r.tokenizer == col.0 && r.vocab_size == col.1)
            .map(|r| &r.report)
    }

    /// TPC grid: one row per corpus, one column per tokenizer and size.
    pub fn tpc_csv(&self) -> String {
        let cols = self.columns();
        let mut s = String::from("corpus");
        for (t, k) in &cols {
            let _ = write!(s, ",{t}@{k}");
        }
        s.push('\n');
        for c in self.corpora() {
            s.push_str(&c);
            for col in &cols {
                match self.cell(&c, col) {
                    Some(r) => {
                        let _ = write!(s, ",{:.4}", r.tpc);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    /// Aligned text table with every metric.
    pub fn to_table(&self) -> String {
        let header = [
            "corpus", "tokenizer", "K", "TPC", "coverage", "OOV", "fallback", "util", "alpha", "R2", "headvar",
            "JS",
        ];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
        for r in &self.rows {
            let m = &r.report;
            rows.push(vec![
                r.corpus.clone(),
                r.tokenizer.clone(),
                r.vocab_size.to_string(),
                format!("{:.4}", m.tpc),
                format!("{:.4}", m.coverage),
                format!("{:.4}", m.oov_rate),
                format!("{:.4}", m.fallback_rate),
                format!("{:.4}", m.utilization),
                format!("{:.3}", m.zipf_alpha),
                format!("{:.3}", m.zipf_r2),
                format!("{:.2e}", m.head_variance),
                format!("{:.4}", m.js_divergence),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            s.push_str(line.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentinelConfig;
    use crate::encoder::LengthMaxEncoder;
    use crate::vocab::Vocabulary;

    fn enc(tokens: &[&str]) -> LengthMaxEncoder {
        let v = Vocabulary::from_tokens(
            tokens.iter().map(|s| s.to_string()).collect(),
            &SentinelConfig::default(),
            16,
        )
        .unwrap();
        LengthMaxEncoder::new(v).unwrap()
    }

    #[test]
    fn tpc_examples() {
        assert!((tpc(214, 951) - 0.2250).abs() < 5e-5);
        assert!((tpc(193, 1038) - 0.1859).abs() < 5e-5);
        assert_eq!(tpc(5, 5), 1.0);
    }

    #[test]
    fn coverage_counts_escapes() {
        let e = enc(&["<eot>", "<pad>", "a", "b", "ab"]);
        let c = coverage_and_oov(&e, "abab");
        assert_eq!((c.oov_rate, c.coverage, c.tokens), (0.0, 1.0, 2));
        // "ab", "a", then two escape bytes for U+00E9.
        let c = coverage_and_oov(&e, "aba\u{e9}");
        assert_eq!(c.tokens, 4);
        assert_eq!(c.oov_rate, 0.5);
        assert_eq!(c.fallback_rate, 0.25);
        assert_eq!(c.coverage, 0.75);
    }

    #[test]
    fn noise_rate_zero_is_identity() {
        let e = enc(&["a", "b", "ab"]);
        let (clean, noisy) = noise_delta(&e, "abba", 0.0, 1).unwrap();
        assert_eq!(clean, noisy);
    }

    #[test]
    fn planted_power_laws() {
        for alpha in [0.8, 0.95, 1.0, 1.2] {
            let f: Vec<f64> = (1..=10_000).map(|r| 1e6 * (r as f64).powf(-alpha)).collect();
            let z = zipf_fit(&f).unwrap();
            assert!((z.alpha - alpha).abs() < 1e-9, "{alpha}: {z:?}");
            assert!(z.r2 > 0.9999);
        }
    }

    #[test]
    fn uniform_is_degenerate() {
        let z = zipf_fit(&[3.0; 20]).unwrap();
        assert!(z.degenerate);
        assert_eq!((z.alpha, z.r2), (0.0, 0.0));
        assert!(matches!(zipf_fit(&[1.0; 5]), Err(Error::TooFewTokens { needed: 10, got: 5 })));
    }

    #[test]
    fn head_variance_examples() {
        assert_eq!(head_variance(&[7, 7, 7, 7], 4), 0.0);
        assert!((head_variance(&[2, 1, 1], 3) - 1.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn js_bounds() {
        assert_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        let a = [0.1, 0.4, 0.5];
        let b = [0.3, 0.3, 0.4];
        assert!((js_divergence(&a, &b) - js_divergence(&b, &a)).abs() < 1e-15);
        let exact: Vec<u64> = (1..=2000u64).map(|r| (1e9 / r as f64).round() as u64).collect();
        assert!(js_to_zipf(&exact, 1.0, 50) < 1e-9);
    }

    #[test]
    fn compare_same_vocab_twice() {
        let e = enc(&["<eot>", "<pad>", "a", "b", "ab"]);
        let toks: [(&str, &dyn Tokenizer); 2] = [("x", &e), ("y", &e)];
        let cmp = compare(&toks, &[("c", vec!["abab", "ba"])], &MetricsConfig::default()).unwrap();
        assert_eq!(cmp.rows[0].report, cmp.rows[1].report);
        assert_eq!(cmp.tpc_csv().lines().count(), 2);
        assert!(compare(&toks, &[("empty", vec![])], &MetricsConfig::default()).is_err());
    }
}
