//! Length-weighted greedy tokenizer toolkit.
//!
//! Vocabularies are built by repeatedly accepting the candidate run of
//! adjacent tokens with the highest `count × char_len` score and rewriting the
//! corpus in place. A frozen vocabulary compiles into a longest-match
//! automaton for encoding. A frequency-only BPE baseline and a set of corpus
//! metrics (tokens per character, coverage, Zipf fit, head variance) are
//! provided for comparison.
//!
//! Typical flow:
//!
//! ```no_run
//! use lmtk_core::{corpus, trainer, encoder::LengthMaxEncoder, Tokenizer};
//!
//! let raw = corpus::RawCorpus::new(vec!["the cat sat on the mat".to_string()]);
//! let cfg = corpus::SentinelConfig::default();
//! let shards = corpus::shard(&raw, 1 << 20, &cfg).unwrap();
//! let (vocab, _report) = trainer::train(&shards, 64, &trainer::TrainerConfig::default()).unwrap();
//! let encoder = LengthMaxEncoder::new(vocab).unwrap();
//! let ids = encoder.encode_raw("the cat").unwrap();
//! assert_eq!(encoder.decode(&ids).unwrap(), "the cat");
//! ```

pub mod bitset;
pub mod bpe;
pub mod corpus;
pub mod counting;
pub mod encoder;
mod error;
pub mod hash;
pub mod metrics;
pub mod partition;
pub mod perf;
pub mod scoreboard;
pub mod sequence;
pub mod trainer;
pub mod vocab;

pub use crate::corpus::{RawCorpus, SentinelConfig, Shard};
pub use crate::counting::{Candidate, CountingConfig};
pub use crate::encoder::{LengthMaxEncoder, MatchAutomaton, TokenKind, Tokenizer};
pub use crate::error::{Error, Result};
pub use crate::scoreboard::Scoreboard;
pub use crate::sequence::TokenSequence;
pub use crate::trainer::{TrainReport, Trainer, TrainerConfig};
pub use crate::vocab::Vocabulary;
