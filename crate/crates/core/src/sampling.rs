//! Regression dataset construction.
//!
//! Each sampling unit is a (conversation, target speaker, rule type) with the
//! rule present in that speaker's TARGET. A unit yields two rows: one checking
//! the partner's PRIME in the same conversation (`same_conv = 1`) and one
//! checking the PRIME of a randomly drawn speaker from another conversation
//! (`same_conv = 0`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, RuleBag, RuleOptions, SplitConversation};
use crate::rng::substream;
use crate::treebank::ProductionRule;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("every rule was removed by frequency filtering")]
    NothingEligible,
    #[error("frequency table is empty")]
    EmptyTable,
    #[error("high-frequency exclusion fraction must lie in [0, 1), got {0}")]
    BadFraction(f64),
    #[error("no eligible foreign conversation to draw a prime from for conversation {0:?}")]
    NoForeignConversation(String),
    #[error("no samples were produced")]
    NoSamples,
    #[error("sample table I/O: {0}")]
    Csv(#[from] csv::Error),
}

/// Corpus-wide token counts per rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleFrequencyTable {
    counts: BTreeMap<ProductionRule, u64>,
    total: u64,
}

impl RuleFrequencyTable {
    pub fn count(&self, rule: &ProductionRule) -> u64 {
        self.counts.get(rule).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProductionRule, u64)> {
        self.counts.iter().map(|(r, &c)| (r, c))
    }
}

impl FromIterator<(ProductionRule, u64)> for RuleFrequencyTable {
    fn from_iter<I: IntoIterator<Item = (ProductionRule, u64)>>(iter: I) -> Self {
        let mut t = RuleFrequencyTable::default();
        for (r, c) in iter {
            if c > 0 {
                *t.counts.entry(r).or_default() += c;
                t.total += c;
            }
        }
        t
    }
}

/// Counts every rule token of every utterance in the corpus.
pub fn build_frequency_table(corpus: &Corpus, rules: &RuleOptions) -> RuleFrequencyTable {
    corpus
        .conversations
        .iter()
        .flat_map(|c| &c.utterances)
        .flat_map(|u| u.rule_tokens(rules))
        .map(|r| (r, 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HighFrequencyMode {
    /// Remove `ceil(fraction · #types)` of the most frequent rule types.
    #[default]
    TopTypes,
    /// Remove rules whose share of all tokens exceeds `fraction`.
    RelativeFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub seed: u64,
    pub exclude_hapax: bool,
    pub high_freq_exclusion_fraction: f64,
    pub high_freq_mode: HighFrequencyMode,
    /// `None` turns the exclusion on exactly when the corpus carries persona ids.
    pub exclude_same_persona_pairs: Option<bool>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            exclude_hapax: true,
            high_freq_exclusion_fraction: 0.003,
            high_freq_mode: HighFrequencyMode::TopTypes,
            exclude_same_persona_pairs: None,
        }
    }
}

impl SamplingConfig {
    /// Disables all frequency filtering.
    pub fn all_rules(mut self) -> Self {
        self.exclude_hapax = false;
        self.high_freq_exclusion_fraction = 0.0;
        self
    }
}

pub fn filter_rules(table: &RuleFrequencyTable, cfg: &SamplingConfig) -> Result<BTreeSet<ProductionRule>, SamplingError> {
    let frac = cfg.high_freq_exclusion_fraction;
    if !(0.0..1.0).contains(&frac) {
        return Err(SamplingError::BadFraction(frac));
    }
    if table.is_empty() {
        return Err(SamplingError::EmptyTable);
    }
    let mut kept: Vec<(&ProductionRule, u64, String)> = table
        .iter()
        .filter(|&(_, c)| !(cfg.exclude_hapax && c == 1))
        .map(|(r, c)| (r, c, r.to_string()))
        .collect();
    match cfg.high_freq_mode {
        HighFrequencyMode::TopTypes => {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
            let drop = (frac * kept.len() as f64 - 1e-9).ceil().max(0.0) as usize;
            kept.drain(..drop.min(kept.len()));
        }
        HighFrequencyMode::RelativeFrequency => {
            if frac > 0.0 {
                let total = table.total() as f64;
                kept.retain(|&(_, c, _)| c as f64 / total <= frac);
            }
        }
    }
    if kept.is_empty() {
        return Err(SamplingError::NothingEligible);
    }
    Ok(kept.into_iter().map(|(r, _, _)| r.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeSample {
    pub prime: u8,
    pub same_conv: u8,
    #[serde(rename = "ln_freq_c")]
    pub ln_freq: f64,
    #[serde(rename = "ln_size_c")]
    pub ln_size: f64,
    pub conv_id: String,
    pub speaker_id: String,
    pub rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SamplingReport {
    pub units: usize,
    pub rows: usize,
    pub skipped_empty_prime: usize,
    pub eligible_rules: usize,
}

/// Builds uncentered samples. `table` supplies ln(Freq); `eligible` restricts
/// which rule types form units.
pub fn build_samples(
    convs: &[SplitConversation<'_>],
    table: &RuleFrequencyTable,
    eligible: &BTreeSet<ProductionRule>,
    cfg: &SamplingConfig,
) -> Result<(Vec<PrimeSample>, SamplingReport), SamplingError> {
    let exclude_personas = cfg
        .exclude_same_persona_pairs
        .unwrap_or_else(|| convs.iter().any(|c| c.conversation.personas().next().is_some()));
    let mut report = SamplingReport { eligible_rules: eligible.len(), ..Default::default() };
    let mut rows = Vec::new();

    for (ci, sc) in convs.iter().enumerate() {
        let conv = sc.conversation;
        let candidates: Vec<(usize, usize)> = convs
            .iter()
            .enumerate()
            .filter(|&(oi, other)| {
                oi != ci
                    && !(exclude_personas && other.conversation.personas().any(|p| conv.personas().any(|q| p == q)))
            })
            .flat_map(|(oi, _)| [(oi, 0), (oi, 1)])
            .filter(|&(oi, os)| !convs[oi].sections.prime.speakers[os].is_empty())
            .collect();

        for target_speaker in 0..2 {
            let partner_prime = &sc.sections.prime.speakers[1 - target_speaker];
            let speaker_id = &conv.participants[target_speaker].speaker;
            for rule in sc.sections.target.speakers[target_speaker].keys().filter(|r| eligible.contains(*r)) {
                if candidates.is_empty() {
                    return Err(SamplingError::NoForeignConversation(conv.id.clone()));
                }
                let rule_str = rule.to_string();
                let mut rng = substream(cfg.seed, &[conv.id.as_bytes(), speaker_id.as_bytes(), rule_str.as_bytes()]);
                let (oi, os) = candidates[rng.random_range(0..candidates.len())];
                let foreign_prime = &convs[oi].sections.prime.speakers[os];
                if partner_prime.is_empty() {
                    report.skipped_empty_prime += 1;
                    continue;
                }
                let ln_freq = (table.count(rule).max(1) as f64).ln();
                let row = |set: &RuleBag, same: u8| PrimeSample {
                    prime: set.contains_key(rule) as u8,
                    same_conv: same,
                    ln_freq,
                    ln_size: (set.len() as f64).ln(),
                    conv_id: conv.id.clone(),
                    speaker_id: speaker_id.clone(),
                    rule: rule_str.clone(),
                };
                rows.push(row(partner_prime, 1));
                rows.push(row(foreign_prime, 0));
                report.units += 1;
            }
        }
    }
    report.rows = rows.len();
    Ok((rows, report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CenteringReport {
    pub ln_freq_mean: f64,
    pub ln_size_mean: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean-centers ln(Freq) and ln(Size); `same_conv` is left as is.
pub fn center(mut samples: Vec<PrimeSample>) -> (Vec<PrimeSample>, CenteringReport) {
    let report = CenteringReport {
        ln_freq_mean: mean(samples.iter().map(|s| s.ln_freq)),
        ln_size_mean: mean(samples.iter().map(|s| s.ln_size)),
    };
    for s in &mut samples {
        s.ln_freq -= report.ln_freq_mean;
        s.ln_size -= report.ln_size_mean;
    }
    (samples, report)
}

pub fn write_samples_csv(samples: &[PrimeSample], out: impl Write) -> Result<(), SamplingError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record(["prime", "same_conv", "ln_freq_c", "ln_size_c", "conv_id", "speaker_id", "rule"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_samples_csv(input: impl Read) -> Result<Vec<PrimeSample>, SamplingError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<PrimeSample>, _>>()?)
}
