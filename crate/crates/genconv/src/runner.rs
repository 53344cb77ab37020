use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adaptometer_core::corpus::{word_count, Conversation, Corpus, Participant, Utterance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persona::PersonaSpec;
use crate::prompt::{build_system_prompt, DEFAULT_TOPIC};
use crate::repetition::{detect_repetition, RepetitionConfig, RepetitionVerdict};
use crate::transport::{ChatMessage, ChatRequest, RetryPolicy, Role, SamplingParams, Transport};

#[derive(Debug, Error, PartialEq)]
pub enum GenerationError {
    #[error("need at least 2 personas, got {0}")]
    TooFewPersonas(usize),
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub topic: String,
    /// Generation stops after the first turn that takes the transcript past
    /// this many words.
    pub word_threshold: usize,
    pub max_turns: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
    /// Conversations generated concurrently.
    pub concurrency: usize,
    pub sampling: SamplingParams,
    pub repetition: RepetitionConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-2024-08-06".into(),
            api_key_env: "ADAPTOMETER_API_KEY".into(),
            topic: DEFAULT_TOPIC.into(),
            word_threshold: 800,
            max_turns: 100,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            concurrency: 4,
            sampling: SamplingParams::default(),
            repetition: RepetitionConfig::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let fail = |m: &str| Err(GenerationError::Config(m.to_string()));
        if self.word_threshold == 0 {
            return fail("word_threshold must be positive");
        }
        if self.retry.max_attempts == 0 {
            return fail("retry.max_attempts must be at least 1");
        }
        if self.max_turns == 0 {
            return fail("max_turns must be positive");
        }
        if self.concurrency == 0 {
            return fail("concurrency must be positive");
        }
        if self.model.trim().is_empty() {
            return fail("model is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversationOutcome {
    pub conversation: Conversation,
    /// Set when generation was aborted; the transcript is partial.
    pub error: Option<String>,
}

/// Messages sent to the agent in slot `me` (0 = A) before turn `turns.len()`.
pub fn build_messages(system: &str, turns: &[String], me: usize) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage { role: Role::System, content: system.to_string() }];
    messages.extend(turns.iter().enumerate().map(|(i, text)| ChatMessage {
        role: if i % 2 == me { Role::Assistant } else { Role::User },
        content: text.clone(),
    }));
    messages
}

/// Alternating two-agent conversation, agent A first.
pub fn run_conversation(
    conv_id: &str,
    a: &PersonaSpec,
    b: &PersonaSpec,
    cfg: &GenerationConfig,
    transport: &dyn Transport,
) -> ConversationOutcome {
    let prompts = [build_system_prompt(a, &cfg.topic), build_system_prompt(b, &cfg.topic)];
    let mut turns: Vec<String> = Vec::new();
    let mut words = 0;
    let mut error = None;
    while turns.len() < cfg.max_turns && words <= cfg.word_threshold {
        let me = turns.len() % 2;
        let request = ChatRequest {
            model: cfg.model.clone(),
            messages: build_messages(&prompts[me], &turns, me),
            sampling: cfg.sampling.clone(),
        };
        match transport.complete(&request) {
            Ok(text) => {
                let text = text.trim().to_string();
                words += word_count(&text);
                turns.push(text);
            }
            Err(e) => {
                error = Some(format!("turn {}: {e}", turns.len()));
                break;
            }
        }
    }
    let participants = [
        Participant { speaker: "A".into(), persona: Some(a.id.to_string()) },
        Participant { speaker: "B".into(), persona: Some(b.id.to_string()) },
    ];
    let utterances = turns
        .into_iter()
        .enumerate()
        .map(|(i, text)| Utterance::from_text(if i % 2 == 0 { "A" } else { "B" }, i, text))
        .collect();
    let conversation =
        Conversation::new(conv_id, participants, utterances, Some(cfg.topic.clone())).expect("alternating turns");
    ConversationOutcome { conversation, error }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub conv_id: String,
    pub personas: (u8, u8),
    pub turns: usize,
    pub words: usize,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<RepetitionVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub attempted: usize,
    pub included: usize,
    pub excluded: Vec<ExclusionEntry>,
}

#[derive(Debug, Clone)]
pub struct GenerationRun {
    /// Every generated transcript, including excluded ones.
    pub raw: Corpus,
    /// Transcripts kept for analysis.
    pub corpus: Corpus,
    pub report: ExclusionReport,
}

/// Unordered persona pairs in registry order.
pub fn round_robin_pairs(personas: &[PersonaSpec]) -> Vec<(PersonaSpec, PersonaSpec)> {
    let mut out = Vec::new();
    for i in 0..personas.len() {
        for j in i + 1..personas.len() {
            out.push((personas[i], personas[j]));
        }
    }
    out
}

fn run_jobs(jobs: Vec<(String, PersonaSpec, PersonaSpec)>, cfg: &GenerationConfig, transport: &dyn Transport) -> GenerationRun {
    let n = jobs.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<ConversationOutcome>>> = Mutex::new(vec![None; n]);
    std::thread::scope(|scope| {
        for _ in 0..cfg.concurrency.min(n).max(1) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, a, b)) = jobs.get(k) else { break };
                let outcome = run_conversation(id, a, b, cfg, transport);
                results.lock().expect("results lock")[k] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<ConversationOutcome> =
        results.into_inner().expect("results lock").into_iter().map(|o| o.expect("every job ran")).collect();

    let mut report = ExclusionReport { attempted: n, ..Default::default() };
    let mut raw = Vec::with_capacity(n);
    let mut kept = Vec::new();
    for (outcome, (_, a, b)) in outcomes.into_iter().zip(&jobs) {
        let conv = outcome.conversation;
        let texts: Vec<String> = conv.utterances.iter().map(|u| u.text.clone().unwrap_or_default()).collect();
        let entry = |reason: &str, verdict: Option<RepetitionVerdict>, error: Option<String>| ExclusionEntry {
            conv_id: conv.id.clone(),
            personas: (a.id, b.id),
            turns: conv.utterances.len(),
            words: conv.word_count(),
            reason: reason.to_string(),
            verdict,
            error,
        };
        if outcome.error.is_some() {
            report.excluded.push(entry("aborted", None, outcome.error));
        } else {
            let verdict = detect_repetition(&texts, &cfg.repetition);
            if verdict.flagged {
                report.excluded.push(entry("repetition", Some(verdict), None));
            } else {
                kept.push(conv.clone());
            }
        }
        raw.push(conv);
    }
    report.included = kept.len();
    GenerationRun { raw: Corpus::new(raw), corpus: Corpus::new(kept), report }
}

/// One conversation per unordered persona pair.
pub fn generate_round_robin(
    personas: &[PersonaSpec],
    cfg: &GenerationConfig,
    transport: &dyn Transport,
) -> Result<GenerationRun, GenerationError> {
    cfg.validate()?;
    if personas.len() < 2 {
        return Err(GenerationError::TooFewPersonas(personas.len()));
    }
    let jobs = round_robin_pairs(personas)
        .into_iter()
        .map(|(a, b)| (format!("p{:02}-p{:02}", a.id, b.id), a, b))
        .collect();
    Ok(run_jobs(jobs, cfg, transport))
}

/// `n` conversations between the same two personas.
pub fn generate_fixed_pair(
    a: &PersonaSpec,
    b: &PersonaSpec,
    n: usize,
    cfg: &GenerationConfig,
    transport: &dyn Transport,
) -> Result<GenerationRun, GenerationError> {
    cfg.validate()?;
    let jobs = (0..n).map(|k| (format!("p{:02}-p{:02}-{k:04}", a.id, b.id), *a, *b)).collect();
    Ok(run_jobs(jobs, cfg, transport))
}
