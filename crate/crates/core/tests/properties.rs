use std::collections::HashSet;

use proptest::prelude::*;

use lmtk_core::bpe::{train_bpe, BpeConfig, BpeEncoder};
use lmtk_core::corpus::shard;
use lmtk_core::metrics::{evaluate, MetricsConfig};
use lmtk_core::trainer::TrainMode;
use lmtk_core::{LengthMaxEncoder, RawCorpus, SentinelConfig, Shard, Tokenizer, Trainer, TrainerConfig};

fn docs() -> impl Strategy<Value = Vec<String>> {
    let word = prop::sample::select(vec!["the", "cat", "sat", "on", "a", "mat", "é", "naïve", "ab", "x"]);
    let doc = prop::collection::vec(word, 1..30).prop_map(|w| w.join(" "));
    prop::collection::vec(doc, 1..8)
}

fn shards(docs: &[String]) -> Vec<Shard> {
    shard(&RawCorpus::new(docs.to_vec()), 256, &SentinelConfig::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_state_invariants(docs in docs(), extra in 0usize..40, recount in any::<bool>()) {
        let shards = shards(&docs);
        let cfg = TrainerConfig {
            mode: if recount { TrainMode::Recount } else { TrainMode::Incremental },
            ..Default::default()
        };
        let base = Trainer::new(&shards, 1 << 20, &cfg).unwrap().vocabulary().len();
        let mut t = Trainer::new(&shards, base + 1 + extra, &cfg).unwrap();
        t.run().unwrap();

        let text: String = shards.iter().map(|s| s.text.as_str()).collect();
        let seg: String = t.sequences().iter().flat_map(|s| s.tokens()).collect();
        prop_assert_eq!(seg, text);
        for s in t.sequences() {
            for tok in s.tokens() {
                prop_assert!(t.vocabulary().contains(tok), "{tok:?}");
            }
        }

        let (vocab, report) = t.finish();
        let distinct: HashSet<&String> = vocab.tokens().iter().collect();
        prop_assert_eq!(distinct.len(), vocab.len());
        prop_assert!(vocab.len() <= base + 1 + extra);
        prop_assert!(report.halted_early || vocab.len() == base + 1 + extra);
        for w in report.ave_lengths().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for r in &report.records {
            prop_assert!(r.applied >= 1);
            prop_assert!(r.score == r.count * r.surface.chars().count() as u64);
        }
    }

    #[test]
    fn trained_tokenizers_round_trip(docs in docs(), k in 30usize..80, probe in "[^\u{2423}]{0,60}") {
        let shards = shards(&docs);
        let Ok((vocab, _)) = lmtk_core::trainer::train(&shards, k.max(40), &TrainerConfig::default()) else {
            return Ok(());
        };
        let lm = LengthMaxEncoder::new(vocab).unwrap();
        let bpe = BpeEncoder::new(train_bpe(&shards, k.max(40), &BpeConfig::default()).unwrap());
        for tok in [&lm as &dyn Tokenizer, &bpe] {
            for text in docs.iter().map(String::as_str).chain([probe.as_str()]) {
                let ids = tok.encode_raw(text).unwrap();
                prop_assert_eq!(tok.decode(&ids).unwrap(), text);
            }
        }
    }

    #[test]
    fn metric_fractions_are_bounded(docs in docs(), probe in "\\PC{1,40}") {
        let shards = shards(&docs);
        let Ok((vocab, _)) = lmtk_core::trainer::train(&shards, 60, &TrainerConfig::default()) else {
            return Ok(());
        };
        let lm = LengthMaxEncoder::new(vocab).unwrap();
        let texts: Vec<String> = docs.iter().map(|d| d.replace(' ', "\u{2423}")).chain([probe]).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let m = evaluate(&lm, &refs, &MetricsConfig::default()).unwrap();
        for f in [m.coverage, m.oov_rate, m.fallback_rate, m.utilization, m.zipf_r2, m.js_divergence] {
            prop_assert!((0.0..=1.0).contains(&f), "{m:?}");
        }
        prop_assert!((m.tpc - m.token_count as f64 / m.char_count as f64).abs() < 1e-12);
    }
}
