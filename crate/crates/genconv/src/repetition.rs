use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepetitionConfig {
    /// Word-trigram Jaccard similarity at or above which two turns repeat.
    pub threshold: f64,
    /// Trailing turns per speaker compared pairwise.
    pub window: usize,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        Self { threshold: 0.8, window: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionEvidence {
    pub turns: (usize, usize),
    pub similarity: f64,
    pub verbatim: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionVerdict {
    pub flagged: bool,
    pub evidence: Option<RepetitionEvidence>,
}

fn trigrams(text: &str) -> BTreeSet<[String; 3]> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    words.windows(3).map(|w| [w[0].clone(), w[1].clone(), w[2].clone()]).collect()
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Flags a transcript (turn texts in order, speakers alternating) whose
/// trailing same-speaker turns are near-duplicates, or in which any turn
/// repeats verbatim.
pub fn detect_repetition(turns: &[String], cfg: &RepetitionConfig) -> RepetitionVerdict {
    let normalized: Vec<String> = turns.iter().map(|t| t.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    for j in 0..normalized.len() {
        for i in 0..j {
            if !normalized[j].is_empty() && normalized[i] == normalized[j] {
                return RepetitionVerdict {
                    flagged: true,
                    evidence: Some(RepetitionEvidence { turns: (i, j), similarity: 1.0, verbatim: true }),
                };
            }
        }
    }
    let grams: Vec<_> = turns.iter().map(|t| trigrams(t)).collect();
    let mut best: Option<RepetitionEvidence> = None;
    for parity in 0..2 {
        let own: Vec<usize> = (parity..turns.len()).step_by(2).collect();
        let tail = &own[own.len().saturating_sub(cfg.window)..];
        for (x, &i) in tail.iter().enumerate() {
            for &j in &tail[x + 1..] {
                let s = jaccard(&grams[i], &grams[j]);
                if s >= cfg.threshold && best.as_ref().is_none_or(|b| s > b.similarity) {
                    best = Some(RepetitionEvidence { turns: (i, j), similarity: s, verbatim: false });
                }
            }
        }
    }
    RepetitionVerdict { flagged: best.is_some(), evidence: best }
}
