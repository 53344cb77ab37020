//! Two-speaker conversations: JSONL ingestion, prime/target splitting and
//! descriptive statistics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{extract_rules, parse_with, ProductionRule, SyntaxTree, TreeError, TreeOptions};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: invalid JSON: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("conversation {conv_id:?} (line {line}): {message}")]
    Schema { conv_id: String, line: usize, message: String },
    #[error("conversation {conv_id:?} (line {line}): {source}")]
    Tree { conv_id: String, line: usize, source: TreeError },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("prime and gap fractions must satisfy 2·prime + gap = 1 with both in [0,1], got prime={prime}, gap={gap}")]
    InvalidFractions { prime: f64, gap: f64 },
    #[error("conversation {conv_id:?} is too short to place an utterance in both sections")]
    TooShort { conv_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    TranscriptJsonl,
    ParsedJsonl,
    RulesJsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transcript-jsonl" | "transcript" => Ok(Self::TranscriptJsonl),
            "parsed-jsonl" | "parsed" => Ok(Self::ParsedJsonl),
            "rules-jsonl" | "rules" => Ok(Self::RulesJsonl),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

/// Rule extraction settings shared by every stage that reads rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleOptions {
    pub include_lexical: bool,
}

impl Default for RuleOptions {
    fn default() -> Self {
        Self { include_lexical: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: String,
    pub index: usize,
    pub text: Option<String>,
    pub trees: Option<Vec<SyntaxTree>>,
    pub rules: Option<Vec<ProductionRule>>,
    word_count: usize,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

impl Utterance {
    pub fn from_text(speaker: impl Into<String>, index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { speaker: speaker.into(), index, word_count: word_count(&text), text: Some(text), trees: None, rules: None }
    }

    pub fn from_rules(speaker: impl Into<String>, index: usize, rules: Vec<ProductionRule>, word_count: usize) -> Self {
        Self { speaker: speaker.into(), index, text: None, trees: None, rules: Some(rules), word_count }
    }

    pub fn with_trees(mut self, trees: Vec<SyntaxTree>) -> Self {
        self.trees = Some(trees);
        self
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Rule tokens of this utterance. Trees take precedence over
    /// pre-extracted rules; text-only utterances carry none.
    pub fn rule_tokens(&self, opts: &RuleOptions) -> Vec<ProductionRule> {
        if let Some(trees) = &self.trees {
            trees.iter().flat_map(|t| extract_rules(t, opts.include_lexical)).collect()
        } else if let Some(rules) = &self.rules {
            rules.iter().filter(|r| opts.include_lexical || !r.is_lexical()).cloned().collect()
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub speaker: String,
    pub persona: Option<String>,
}

impl Participant {
    /// Agent identity used for divergence analyses: the persona when known.
    pub fn agent(&self) -> &str {
        self.persona.as_deref().unwrap_or(&self.speaker)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub participants: [Participant; 2],
    pub utterances: Vec<Utterance>,
    pub topic: Option<String>,
}

impl Conversation {
    /// Validates speaker alternation and turn numbering. Participants are
    /// ordered by first appearance.
    pub fn new(
        id: impl Into<String>,
        participants: [Participant; 2],
        utterances: Vec<Utterance>,
        topic: Option<String>,
    ) -> Result<Self, String> {
        let id = id.into();
        if participants[0].speaker == participants[1].speaker {
            return Err("both participants have the same speaker id".into());
        }
        for (i, u) in utterances.iter().enumerate() {
            if u.index != i {
                return Err(format!("utterance indices must be consecutive from 0, found {} at position {i}", u.index));
            }
            if u.speaker != participants[i % 2].speaker {
                return Err(format!("speakers must alternate: turn {i} is by {:?}", u.speaker));
            }
        }
        Ok(Self { id, participants, utterances, topic })
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(Utterance::word_count).sum()
    }

    pub fn speaker_index(&self, speaker: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.speaker == speaker)
    }

    pub fn personas(&self) -> impl Iterator<Item = &str> {
        self.participants.iter().filter_map(|p| p.persona.as_deref())
    }

    /// Half-open word spans `[start, end)` of every utterance.
    pub fn word_spans(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.utterances
            .iter()
            .map(|u| {
                let span = (start, start + u.word_count());
                start = span.1;
                span
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub conversations: Vec<Conversation>,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>) -> Self {
        Self { conversations }
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }
}

/// One line of any of the three JSONL schemas.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub conv_id: String,
    pub turn: usize,
    pub speaker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_count: Option<usize>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat, tree_opts: &TreeOptions) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    read_corpus(BufReader::new(file), format, tree_opts).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io { path: path.to_path_buf(), source },
        other => other,
    })
}

pub fn read_corpus(reader: impl BufRead, format: CorpusFormat, tree_opts: &TreeOptions) -> Result<Corpus, CorpusError> {
    let mut groups: IndexMap<String, Vec<(usize, JsonlRecord)>> = IndexMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io { path: PathBuf::new(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: line_no, source })?;
        groups.entry(rec.conv_id.clone()).or_default().push((line_no, rec));
    }
    let conversations = groups
        .into_iter()
        .map(|(id, records)| build_conversation(id, records, format, tree_opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(conversations))
}

fn build_conversation(
    id: String,
    mut records: Vec<(usize, JsonlRecord)>,
    format: CorpusFormat,
    tree_opts: &TreeOptions,
) -> Result<Conversation, CorpusError> {
    records.sort_by_key(|(_, r)| r.turn);
    let first_line = records[0].0;
    let schema = |line: usize, message: String| CorpusError::Schema { conv_id: id.clone(), line, message };

    let mut participants: Vec<Participant> = Vec::new();
    let mut topic = None;
    let mut utterances = Vec::with_capacity(records.len());
    for (pos, (line, rec)) in records.into_iter().enumerate() {
        if rec.turn != pos {
            return Err(schema(line, format!("turns must be consecutive from 0; expected {pos}, found {}", rec.turn)));
        }
        match participants.iter_mut().find(|p| p.speaker == rec.speaker) {
            Some(p) => {
                if rec.persona.is_some() && p.persona.is_some() && rec.persona != p.persona {
                    return Err(schema(line, format!("speaker {:?} changes persona", rec.speaker)));
                }
                if p.persona.is_none() {
                    p.persona = rec.persona.clone();
                }
            }
            None => {
                if participants.len() == 2 {
                    return Err(schema(line, format!("more than two speakers (third is {:?})", rec.speaker)));
                }
                participants.push(Participant { speaker: rec.speaker.clone(), persona: rec.persona.clone() });
            }
        }
        if topic.is_none() {
            topic = rec.topic.clone();
        }
        let utterance = match format {
            CorpusFormat::TranscriptJsonl | CorpusFormat::ParsedJsonl => {
                let text = rec.text.ok_or_else(|| schema(line, "missing \"text\"".into()))?;
                let mut u = Utterance::from_text(rec.speaker, pos, text);
                if format == CorpusFormat::ParsedJsonl {
                    let raw = rec.trees.ok_or_else(|| schema(line, "missing \"trees\"".into()))?;
                    let mut trees = Vec::with_capacity(raw.len());
                    for t in &raw {
                        match parse_with(t, tree_opts) {
                            Ok(tree) => trees.push(tree),
                            // sentences made only of empty elements carry no rules
                            Err(TreeError::OnlyEmptyElements) => {}
                            Err(source) => return Err(CorpusError::Tree { conv_id: id.clone(), line, source }),
                        }
                    }
                    u = u.with_trees(trees);
                }
                u
            }
            CorpusFormat::RulesJsonl => {
                let raw = rec.rules.ok_or_else(|| schema(line, "missing \"rules\"".into()))?;
                let wc = rec.word_count.ok_or_else(|| schema(line, "missing \"word_count\"".into()))?;
                let rules = raw
                    .iter()
                    .map(|r| r.parse::<ProductionRule>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| CorpusError::Tree { conv_id: id.clone(), line, source })?;
                Utterance::from_rules(rec.speaker, pos, rules, wc)
            }
        };
        utterances.push(utterance);
    }
    if participants.len() != 2 {
        return Err(schema(first_line, "a conversation needs exactly two speakers".into()));
    }
    let participants: [Participant; 2] = participants.try_into().expect("two participants");
    Conversation::new(id.clone(), participants, utterances, topic).map_err(|m| schema(first_line, m))
}

/// Converts a conversation into JSONL records of the given format.
pub fn to_records(conv: &Conversation, format: CorpusFormat) -> Vec<JsonlRecord> {
    conv.utterances
        .iter()
        .map(|u| {
            let persona = conv.speaker_index(&u.speaker).and_then(|i| conv.participants[i].persona.clone());
            let mut rec = JsonlRecord {
                conv_id: conv.id.clone(),
                turn: u.index,
                speaker: u.speaker.clone(),
                persona,
                topic: conv.topic.clone(),
                ..Default::default()
            };
            match format {
                CorpusFormat::TranscriptJsonl => rec.text = Some(u.text.clone().unwrap_or_default()),
                CorpusFormat::ParsedJsonl => {
                    rec.text = Some(u.text.clone().unwrap_or_default());
                    rec.trees = Some(u.trees.iter().flatten().map(SyntaxTree::serialize).collect());
                }
                CorpusFormat::RulesJsonl => {
                    rec.rules = Some(u.rule_tokens(&RuleOptions { include_lexical: true }).iter().map(ToString::to_string).collect());
                    rec.word_count = Some(u.word_count());
                }
            }
            rec
        })
        .collect()
}

pub fn write_jsonl(corpus: &Corpus, format: CorpusFormat, mut out: impl Write) -> std::io::Result<()> {
    for conv in &corpus.conversations {
        for rec in to_records(conv, format) {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub prime_frac: f64,
    pub gap_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { prime_frac: 0.49, gap_frac: 0.02 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        let ok = (0.0..=0.5).contains(&self.prime_frac)
            && (0.0..=1.0).contains(&self.gap_frac)
            && (2.0 * self.prime_frac + self.gap_frac - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(SplitError::InvalidFractions { prime: self.prime_frac, gap: self.gap_frac })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    Prime,
    Discarded,
    Target,
}

/// Rule multiset, ordered for deterministic iteration.
pub type RuleBag = BTreeMap<ProductionRule, usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct SectionRules {
    /// Per speaker, indexed like `Conversation::participants`.
    pub speakers: [RuleBag; 2],
    /// Utterance indices in this section.
    pub utterances: Vec<usize>,
    pub word_count: usize,
}

impl SectionRules {
    fn empty() -> Self {
        Self { speakers: [RuleBag::new(), RuleBag::new()], utterances: Vec::new(), word_count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSections {
    pub assignment: Vec<Section>,
    pub prime: SectionRules,
    pub target: SectionRules,
    pub discarded: SectionRules,
}

const POSITION_EPS: f64 = 1e-9;

/// Assigns every utterance to a section from word positions alone: PRIME if
/// its last word falls in the first `prime_frac` of words, TARGET if its first
/// word falls in the last `prime_frac`, discarded otherwise.
pub fn assign_sections(conv: &Conversation, cfg: &SplitConfig) -> Result<Vec<Section>, SplitError> {
    cfg.validate()?;
    let total = conv.word_count() as f64;
    let prime_end = cfg.prime_frac * total;
    let target_start = (cfg.prime_frac + cfg.gap_frac) * total;
    let assignment: Vec<Section> = conv
        .word_spans()
        .into_iter()
        .map(|(start, end)| {
            if end as f64 <= prime_end + POSITION_EPS {
                Section::Prime
            } else if start as f64 >= target_start - POSITION_EPS {
                Section::Target
            } else {
                Section::Discarded
            }
        })
        .collect();
    let has = |s: Section| assignment.contains(&s);
    if total == 0.0 || !has(Section::Prime) || !has(Section::Target) {
        return Err(SplitError::TooShort { conv_id: conv.id.clone() });
    }
    Ok(assignment)
}

pub fn split_prime_target(conv: &Conversation, cfg: &SplitConfig, rules: &RuleOptions) -> Result<SplitSections, SplitError> {
    let assignment = assign_sections(conv, cfg)?;
    let mut prime = SectionRules::empty();
    let mut target = SectionRules::empty();
    let mut discarded = SectionRules::empty();
    for (u, section) in conv.utterances.iter().zip(&assignment) {
        let bucket = match section {
            Section::Prime => &mut prime,
            Section::Target => &mut target,
            Section::Discarded => &mut discarded,
        };
        let s = conv.speaker_index(&u.speaker).expect("validated speaker");
        bucket.utterances.push(u.index);
        bucket.word_count += u.word_count();
        for r in u.rule_tokens(rules) {
            *bucket.speakers[s].entry(r).or_default() += 1;
        }
    }
    Ok(SplitSections { assignment, prime, target, discarded })
}

/// A conversation that passed the split, paired with its sections.
#[derive(Debug, Clone)]
pub struct SplitConversation<'a> {
    pub conversation: &'a Conversation,
    pub sections: SplitSections,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SplitReport {
    pub included: usize,
    pub excluded: Vec<String>,
}

/// Splits every conversation; conversations too short to split are
/// excluded and listed in the report.
pub fn split_corpus<'a>(
    corpus: &'a Corpus,
    cfg: &SplitConfig,
    rules: &RuleOptions,
) -> Result<(Vec<SplitConversation<'a>>, SplitReport), SplitError> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut report = SplitReport::default();
    for conv in &corpus.conversations {
        match split_prime_target(conv, cfg, rules) {
            Ok(sections) => out.push(SplitConversation { conversation: conv, sections }),
            Err(SplitError::TooShort { conv_id }) => report.excluded.push(conv_id),
            Err(e) => return Err(e),
        }
    }
    report.included = out.len();
    Ok((out, report))
}

/// Histogram-ready `(value, count)` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub conversation_lengths: Vec<(usize, usize)>,
    pub utterance_lengths: Vec<(usize, usize)>,
    pub speaker_turns: Vec<(usize, usize)>,
    pub conversations: usize,
    pub utterances: usize,
    pub words: usize,
    pub rule_types: usize,
    pub rule_tokens: usize,
}

fn histogram(values: impl IntoIterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

pub fn corpus_stats(corpus: &Corpus, rules: &RuleOptions) -> CorpusStats {
    let convs = &corpus.conversations;
    let mut types = std::collections::HashSet::new();
    let mut tokens = 0;
    for u in convs.iter().flat_map(|c| &c.utterances) {
        for r in u.rule_tokens(rules) {
            tokens += 1;
            types.insert(r);
        }
    }
    CorpusStats {
        conversation_lengths: histogram(convs.iter().map(Conversation::word_count)),
        utterance_lengths: histogram(convs.iter().flat_map(|c| c.utterances.iter().map(Utterance::word_count))),
        speaker_turns: histogram(convs.iter().flat_map(|c| {
            c.participants.iter().map(move |p| c.utterances.iter().filter(|u| u.speaker == p.speaker).count())
        })),
        conversations: convs.len(),
        utterances: convs.iter().map(|c| c.utterances.len()).sum(),
        words: convs.iter().map(Conversation::word_count).sum(),
        rule_types: types.len(),
        rule_tokens: tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    fn conv_with_lengths(lengths: &[usize]) -> Conversation {
        let utterances = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| Utterance::from_text(if i % 2 == 0 { "A" } else { "B" }, i, words(n)))
            .collect();
        let p = |s: &str| Participant { speaker: s.into(), persona: None };
        Conversation::new("c", [p("A"), p("B")], utterances, None).unwrap()
    }

    fn read(s: &str, format: CorpusFormat) -> Result<Corpus, CorpusError> {
        read_corpus(s.as_bytes(), format, &TreeOptions::default())
    }

    #[test]
    fn loads_two_line_transcript() {
        let c = read(
            "{\"conv_id\":\"x\",\"turn\":0,\"speaker\":\"A\",\"text\":\"hello there\"}\n\
             {\"conv_id\":\"x\",\"turn\":1,\"speaker\":\"B\",\"text\":\"hi\"}\n",
            CorpusFormat::TranscriptJsonl,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.conversations[0].utterances.len(), 2);
        assert_eq!(c.conversations[0].word_count(), 3);
    }

    #[test]
    fn rejects_three_speakers() {
        let err = read(
            "{\"conv_id\":\"x\",\"turn\":0,\"speaker\":\"A\",\"text\":\"a\"}\n\
             {\"conv_id\":\"x\",\"turn\":1,\"speaker\":\"B\",\"text\":\"b\"}\n\
             {\"conv_id\":\"x\",\"turn\":2,\"speaker\":\"C\",\"text\":\"c\"}\n",
            CorpusFormat::TranscriptJsonl,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Schema { ref conv_id, line: 3, .. } if conv_id == "x"), "{err}");
    }

    #[test]
    fn rejects_non_alternating_and_gaps() {
        let same = "{\"conv_id\":\"x\",\"turn\":0,\"speaker\":\"A\",\"text\":\"a\"}\n\
                    {\"conv_id\":\"x\",\"turn\":1,\"speaker\":\"A\",\"text\":\"b\"}\n\
                    {\"conv_id\":\"x\",\"turn\":2,\"speaker\":\"B\",\"text\":\"b\"}\n";
        assert!(read(same, CorpusFormat::TranscriptJsonl).unwrap_err().to_string().contains("alternate"));
        let gap = "{\"conv_id\":\"x\",\"turn\":0,\"speaker\":\"A\",\"text\":\"a\"}\n\
                   {\"conv_id\":\"x\",\"turn\":2,\"speaker\":\"B\",\"text\":\"b\"}\n";
        assert!(read(gap, CorpusFormat::TranscriptJsonl).is_err());
    }

    #[test]
    fn loads_rules_and_parsed_lines() {
        let c = read(
            "{\"conv_id\":\"r\",\"turn\":0,\"speaker\":\"A\",\"rules\":[\"S→NP VP\"],\"word_count\":4}\n\
             {\"conv_id\":\"r\",\"turn\":1,\"speaker\":\"B\",\"rules\":[],\"word_count\":2}\n",
            CorpusFormat::RulesJsonl,
        )
        .unwrap();
        let u = &c.conversations[0].utterances[0];
        assert_eq!(u.rule_tokens(&RuleOptions::default()).len(), 1);
        assert_eq!(u.word_count(), 4);

        let missing = "{\"conv_id\":\"r\",\"turn\":0,\"speaker\":\"A\",\"rules\":[]}\n";
        assert!(read(missing, CorpusFormat::RulesJsonl).unwrap_err().to_string().contains("word_count"));

        let parsed = read(
            "{\"conv_id\":\"p\",\"turn\":0,\"speaker\":\"A\",\"text\":\"I like tea\",\"trees\":[\"(S (NP (PRP I)) (VP (VBP like) (NP (NN tea))))\"]}\n\
             {\"conv_id\":\"p\",\"turn\":1,\"speaker\":\"B\",\"text\":\"me too\",\"trees\":[\"(FRAG (PRP me) (RB too))\"]}\n",
            CorpusFormat::ParsedJsonl,
        )
        .unwrap();
        let rules = parsed.conversations[0].utterances[0].rule_tokens(&RuleOptions::default());
        assert_eq!(rules.len(), 4);
        let with_lex = parsed.conversations[0].utterances[0].rule_tokens(&RuleOptions { include_lexical: true });
        assert_eq!(with_lex.len(), 7);

        let bad_tree = "{\"conv_id\":\"p\",\"turn\":0,\"speaker\":\"A\",\"text\":\"x\",\"trees\":[\"(S (NP\"]}\n";
        assert!(matches!(read(bad_tree, CorpusFormat::ParsedJsonl), Err(CorpusError::Tree { line: 1, .. })));
    }

    #[test]
    fn split_with_boundaries_on_utterance_edges() {
        let conv = conv_with_lengths(&[49, 2, 49]);
        let s = split_prime_target(&conv, &SplitConfig::default(), &RuleOptions::default()).unwrap();
        assert_eq!(s.assignment, [Section::Prime, Section::Discarded, Section::Target]);
        assert_eq!((s.prime.word_count, s.discarded.word_count, s.target.word_count), (49, 2, 49));
    }

    #[test]
    fn straddling_utterance_is_discarded() {
        // utterance 2 covers words 45..55 and straddles the prime boundary
        let conv = conv_with_lengths(&[45, 10, 45]);
        let s = assign_sections(&conv, &SplitConfig::default()).unwrap();
        assert_eq!(s, [Section::Prime, Section::Discarded, Section::Target]);
    }

    #[test]
    fn too_short_and_bad_fractions() {
        let conv = conv_with_lengths(&[10, 10]);
        assert!(matches!(assign_sections(&conv, &SplitConfig::default()), Err(SplitError::TooShort { .. })));
        let bad = SplitConfig { prime_frac: 0.4, gap_frac: 0.1 };
        assert!(matches!(assign_sections(&conv, &bad), Err(SplitError::InvalidFractions { .. })));
    }

    #[test]
    fn stats_tables() {
        let c = Corpus::new(vec![conv_with_lengths(&[4, 6])]);
        let s = corpus_stats(&c, &RuleOptions::default());
        assert_eq!(s.conversation_lengths, [(10, 1)]);
        assert_eq!(s.utterance_lengths, [(4, 1), (6, 1)]);
        assert_eq!(s.speaker_turns, [(1, 2)]);
        let empty = corpus_stats(&Corpus::default(), &RuleOptions::default());
        assert!(empty.conversation_lengths.is_empty() && empty.utterance_lengths.is_empty() && empty.speaker_turns.is_empty());
    }

    #[test]
    fn jsonl_writer_round_trips() {
        let c = read(
            "{\"conv_id\":\"r\",\"turn\":0,\"speaker\":\"A\",\"persona\":\"5\",\"rules\":[\"S→NP VP\",\"NP→NN\"],\"word_count\":4}\n\
             {\"conv_id\":\"r\",\"turn\":1,\"speaker\":\"B\",\"persona\":\"6\",\"rules\":[\"NP→NN\"],\"word_count\":2}\n",
            CorpusFormat::RulesJsonl,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_jsonl(&c, CorpusFormat::RulesJsonl, &mut buf).unwrap();
        let again = read_corpus(buf.as_slice(), CorpusFormat::RulesJsonl, &TreeOptions::default()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.conversations[0].participants[1].agent(), "6");
    }
}
