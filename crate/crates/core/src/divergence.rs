//! Rule distributions, Jensen–Shannon divergence and per-split trajectories.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, RuleBag, RuleOptions};
use crate::rng::indexed_substream;
use crate::treebank::ProductionRule;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("distribution has zero total count")]
    EmptyDistribution,
    #[error("need at least 2 agents, found {0}")]
    TooFewAgents(usize),
    #[error("agent {0:?} has no rule tokens")]
    EmptyAgent(String),
    #[error("conversation {conv_id:?} is not between {a:?} and {b:?}")]
    NotPair { conv_id: String, a: String, b: String },
    #[error("need at least {needed} conversations, found {found}")]
    TooFewConversations { needed: usize, found: usize },
    #[error("split width must be positive")]
    ZeroSplitWidth,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDistribution {
    probs: BTreeMap<ProductionRule, f64>,
}

impl RuleDistribution {
    pub fn from_counts(counts: &RuleBag) -> Result<Self, DivergenceError> {
        let total: usize = counts.values().sum();
        if total == 0 {
            return Err(DivergenceError::EmptyDistribution);
        }
        let probs = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(r, &c)| (r.clone(), c as f64 / total as f64))
            .collect();
        Ok(Self { probs })
    }

    pub fn prob(&self, rule: &ProductionRule) -> f64 {
        self.probs.get(rule).copied().unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProductionRule, f64)> {
        self.probs.iter().map(|(r, &p)| (r, p))
    }
}

pub fn rule_distribution(counts: &RuleBag) -> Result<RuleDistribution, DivergenceError> {
    RuleDistribution::from_counts(counts)
}

fn half_kl_term(a: f64, m: f64) -> f64 {
    if a > 0.0 {
        a * (a / m).log2()
    } else {
        0.0
    }
}

/// Base-2 Jensen–Shannon divergence, in [0, 1].
pub fn jsd(p: &RuleDistribution, q: &RuleDistribution) -> f64 {
    let mut a = p.probs.iter().peekable();
    let mut b = q.probs.iter().peekable();
    let mut sum = 0.0;
    loop {
        let (pa, qb) = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(&(_, &x)), None) => {
                a.next();
                (x, 0.0)
            }
            (None, Some(&(_, &y))) => {
                b.next();
                (0.0, y)
            }
            (Some(&(ra, &x)), Some(&(rb, &y))) => match ra.cmp(rb) {
                Ordering::Less => {
                    a.next();
                    (x, 0.0)
                }
                Ordering::Greater => {
                    b.next();
                    (0.0, y)
                }
                Ordering::Equal => {
                    a.next();
                    b.next();
                    (x, y)
                }
            },
        };
        let m = 0.5 * (pa + qb);
        sum += half_kl_term(pa, m) + half_kl_term(qb, m);
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdMatrix {
    pub agents: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl JsdMatrix {
    /// Largest off-diagonal entry.
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), DivergenceError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.agents.iter().cloned());
        w.write_record(&header)?;
        for (agent, row) in self.agents.iter().zip(&self.values) {
            let mut rec = vec![agent.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Per-agent rule distributions over all of that agent's utterances, and the
/// JSD between every pair.
pub fn pairwise_jsd_matrix(corpus: &Corpus, rules: &RuleOptions) -> Result<JsdMatrix, DivergenceError> {
    let mut counts: BTreeMap<String, RuleBag> = BTreeMap::new();
    for conv in &corpus.conversations {
        for p in &conv.participants {
            counts.entry(p.agent().to_string()).or_default();
        }
        for u in &conv.utterances {
            let idx = conv.speaker_index(&u.speaker).expect("validated speaker");
            let bag = counts.get_mut(conv.participants[idx].agent()).expect("registered agent");
            for r in u.rule_tokens(rules) {
                *bag.entry(r).or_insert(0) += 1;
            }
        }
    }
    if counts.len() < 2 {
        return Err(DivergenceError::TooFewAgents(counts.len()));
    }
    let mut dists = Vec::with_capacity(counts.len());
    for (agent, bag) in &counts {
        dists.push(RuleDistribution::from_counts(bag).map_err(|_| DivergenceError::EmptyAgent(agent.clone()))?);
    }
    let n = dists.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = jsd(&dists[i], &dists[j]);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(JsdMatrix { agents: counts.into_keys().collect(), values })
}

/// Rule counts of the two agents in one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitCounts {
    pub agents: [RuleBag; 2],
}

impl SplitCounts {
    fn add(&mut self, other: &SplitCounts) {
        for (mine, theirs) in self.agents.iter_mut().zip(&other.agents) {
            for (r, &c) in theirs {
                *mine.entry(r.clone()).or_insert(0) += c;
            }
        }
    }

    pub fn jsd(&self) -> Option<f64> {
        let p = RuleDistribution::from_counts(&self.agents[0]).ok()?;
        let q = RuleDistribution::from_counts(&self.agents[1]).ok()?;
        Some(jsd(&p, &q))
    }
}

/// Per-conversation split counts, indexed `[conversation][split]`.
fn conversation_splits(
    corpus: &Corpus,
    pair: (&str, &str),
    split_words: usize,
    rules: &RuleOptions,
) -> Result<Vec<Vec<SplitCounts>>, DivergenceError> {
    if split_words == 0 {
        return Err(DivergenceError::ZeroSplitWidth);
    }
    let wanted: BTreeSet<&str> = [pair.0, pair.1].into();
    corpus
        .conversations
        .iter()
        .map(|conv| {
            let agents: BTreeSet<&str> = conv.participants.iter().map(|p| p.agent()).collect();
            if agents != wanted || pair.0 == pair.1 {
                return Err(DivergenceError::NotPair {
                    conv_id: conv.id.clone(),
                    a: pair.0.to_string(),
                    b: pair.1.to_string(),
                });
            }
            let mut splits: Vec<SplitCounts> = Vec::new();
            for (u, (start, end)) in conv.utterances.iter().zip(conv.word_spans()) {
                let k = (start + end) / (2 * split_words);
                if splits.len() <= k {
                    splits.resize_with(k + 1, SplitCounts::default);
                }
                let idx = conv.speaker_index(&u.speaker).expect("validated speaker");
                let slot = usize::from(conv.participants[idx].agent() != pair.0);
                for r in u.rule_tokens(rules) {
                    *splits[k].agents[slot].entry(r).or_insert(0) += 1;
                }
            }
            Ok(splits)
        })
        .collect()
}

fn aggregate(per_conv: &[&Vec<SplitCounts>]) -> Vec<SplitCounts> {
    let n = per_conv.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut out = vec![SplitCounts::default(); n];
    for splits in per_conv {
        for (acc, s) in out.iter_mut().zip(splits.iter()) {
            acc.add(s);
        }
    }
    out
}

/// Splits every conversation into consecutive `split_words`-word sections
/// (an utterance belongs to the section holding its midpoint) and aggregates
/// each agent's rule counts per section across conversations. Agent slot 0 is
/// `pair.0`.
pub fn split_trajectory(
    corpus: &Corpus,
    pair: (&str, &str),
    split_words: usize,
    rules: &RuleOptions,
) -> Result<Vec<SplitCounts>, DivergenceError> {
    let per_conv = conversation_splits(corpus, pair, split_words, rules)?;
    Ok(aggregate(&per_conv.iter().collect::<Vec<_>>()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub split_index: usize,
    pub mean_jsd: f64,
    pub std_jsd: f64,
    /// Conversations long enough to reach this split.
    pub n_conversations: usize,
    /// JSD on the full corpus without resampling.
    pub point_jsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub agents: [String; 2],
    pub split_words: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub points: Vec<TrajectoryPoint>,
}

impl TrajectoryReport {
    pub fn write_csv(&self, out: impl Write) -> Result<(), DivergenceError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["split_index", "mean_jsd", "std_jsd", "n_conversations"])?;
        for p in &self.points {
            w.write_record([
                p.split_index.to_string(),
                format!("{:.6}", p.mean_jsd),
                format!("{:.6}", p.std_jsd),
                p.n_conversations.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Bootstrap over conversations: `b` resamples of the corpus size drawn with
/// replacement, each recomputing the per-split JSDs. Reports the mean and the
/// population standard deviation across resamples. Splits where no resample
/// has both agents present are omitted.
pub fn bootstrap_trajectory(
    corpus: &Corpus,
    pair: (&str, &str),
    split_words: usize,
    b: usize,
    seed: u64,
    rules: &RuleOptions,
) -> Result<TrajectoryReport, DivergenceError> {
    let n = corpus.len();
    if n < 2 {
        return Err(DivergenceError::TooFewConversations { needed: 2, found: n });
    }
    let per_conv = conversation_splits(corpus, pair, split_words, rules)?;
    let point = aggregate(&per_conv.iter().collect::<Vec<_>>());
    let width = point.len();

    let resamples: Vec<Vec<Option<f64>>> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = indexed_substream(seed, "bootstrap", r);
            let draw: Vec<&Vec<SplitCounts>> = (0..n).map(|_| &per_conv[rng.random_range(0..n)]).collect();
            let agg = aggregate(&draw);
            (0..width).map(|k| agg.get(k).and_then(SplitCounts::jsd)).collect()
        })
        .collect();

    let mut points = Vec::new();
    for k in 0..width {
        let vals: Vec<f64> = resamples.iter().filter_map(|r| r[k]).collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        points.push(TrajectoryPoint {
            split_index: k,
            mean_jsd: mean,
            std_jsd: var.sqrt(),
            n_conversations: per_conv.iter().filter(|s| s.len() > k).count(),
            point_jsd: point[k].jsd(),
        });
    }
    Ok(TrajectoryReport {
        agents: [pair.0.to_string(), pair.1.to_string()],
        split_words,
        bootstrap: b,
        seed,
        points,
    })
}
