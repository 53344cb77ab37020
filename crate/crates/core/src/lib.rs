//! Measurement of long-term syntactic adaptation in two-speaker dialogue.
//!
//! The pipeline reads parsed (or rule-level) conversations, splits each into
//! a PRIME and a TARGET section, samples binary repetition outcomes for rules
//! in TARGET against the partner's PRIME in the same conversation and in a
//! random other conversation, and fits a mixed-effects logistic regression.
//! Companion tools compute Jensen–Shannon trajectories between agents and
//! generate synthetic corpora with a planted adaptation effect.

pub mod corpus;
pub mod divergence;
pub mod glmm;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod treebank;

pub use corpus::{Conversation, Corpus, CorpusFormat, RuleOptions, SplitConfig, Utterance};
pub use treebank::{ProductionRule, SyntaxTree, TreeOptions};
