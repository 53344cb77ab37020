//! Synthetic rule-level corpora with a planted cross-speaker adaptation effect.
//!
//! Each speaker draws rules from a Zipf base distribution. After one speaker
//! emits a rule, the partner's weight on that rule is multiplied by `1 + λ`
//! for the rest of the conversation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Conversation, Corpus, Participant, Utterance};
use crate::rng::indexed_substream;
use crate::treebank::ProductionRule;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("vocabulary must have at least 2 rules, got {0}")]
    Vocabulary(usize),
    #[error("invalid parameter {name}: {value}")]
    Parameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Rule vocabulary size V.
    pub vocab: usize,
    pub zipf_s: f64,
    /// Adaptation strength λ.
    pub lambda: f64,
    pub conversations: usize,
    pub turns: usize,
    pub rules_per_turn: usize,
    pub words_per_turn: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab: 50,
            zipf_s: 1.1,
            lambda: 0.5,
            conversations: 500,
            turns: 10,
            rules_per_turn: 8,
            words_per_turn: 80,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.vocab < 2 {
            return Err(SynthError::Vocabulary(self.vocab));
        }
        let checks: [(&'static str, f64, bool); 5] = [
            ("zipf_s", self.zipf_s, self.zipf_s.is_finite() && self.zipf_s >= 0.0),
            ("lambda", self.lambda, self.lambda.is_finite() && self.lambda >= 0.0),
            ("turns", self.turns as f64, self.turns >= 1),
            ("rules_per_turn", self.rules_per_turn as f64, self.rules_per_turn >= 1),
            ("words_per_turn", self.words_per_turn as f64, self.words_per_turn >= 1),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(SynthError::Parameter { name, value });
            }
        }
        Ok(())
    }

    /// Normalized Zipf probabilities, rank 1 first.
    pub fn base_distribution(&self) -> Vec<f64> {
        let w: Vec<f64> = (1..=self.vocab).map(|r| (r as f64).powf(-self.zipf_s)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }
}

/// Opaque production for rule index `i`.
pub fn rule_name(i: usize) -> ProductionRule {
    ProductionRule::new(format!("X{}", i % 7), vec![format!("Y{i}"), format!("Z{i}")], false)
        .expect("generated symbols are valid")
}

/// Index drawn with probability proportional to `weights`.
pub fn sample_categorical(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Probability that a rule of probability `p` appears at least once in `n`
/// independent draws.
pub fn occurrence_probability(p: f64, n: u32) -> f64 {
    1.0 - (1.0 - p).powi(n as i32)
}

/// Increase in occurrence probability when the number of draws doubles from
/// one to two: 1 − (1−p)² − p = p(1−p).
pub fn expected_repetition_gain(p: f64) -> f64 {
    p - p * p
}

fn conversation(cfg: &SynthConfig, base: &[f64], index: usize) -> Conversation {
    let mut rng = indexed_substream(cfg.seed, "synth", index as u64);
    let mut weights = [base.to_vec(), base.to_vec()];
    let speakers = ["A", "B"];
    let mut utterances = Vec::with_capacity(cfg.turns);
    for t in 0..cfg.turns {
        let me = t % 2;
        let drawn: Vec<usize> = (0..cfg.rules_per_turn).map(|_| sample_categorical(&mut rng, &weights[me])).collect();
        for &r in &drawn {
            weights[1 - me][r] *= 1.0 + cfg.lambda;
        }
        let total: f64 = weights[1 - me].iter().sum();
        weights[1 - me].iter_mut().for_each(|w| *w /= total);
        utterances.push(Utterance::from_rules(speakers[me], t, drawn.into_iter().map(rule_name).collect(), cfg.words_per_turn));
    }
    let participants = speakers.map(|s| Participant { speaker: s.into(), persona: None });
    Conversation::new(format!("synth-{index:05}"), participants, utterances, None).expect("alternating turns")
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus, SynthError> {
    cfg.validate()?;
    let base = cfg.base_distribution();
    let conversations = (0..cfg.conversations).into_par_iter().map(|i| conversation(cfg, &base, i)).collect();
    Ok(Corpus::new(conversations))
}
