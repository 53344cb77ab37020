//! Persona-conditioned two-agent conversation generation.

pub mod persona;
pub mod prompt;
pub mod repetition;
pub mod runner;
pub mod transport;

pub use persona::{persona, PersonaSpec, PERSONAS};
pub use prompt::{build_system_prompt, DEFAULT_TOPIC};
pub use repetition::{detect_repetition, RepetitionConfig, RepetitionEvidence, RepetitionVerdict};
pub use runner::{
    build_messages, generate_fixed_pair, generate_round_robin, round_robin_pairs, run_conversation,
    ConversationOutcome, ExclusionEntry, ExclusionReport, GenerationConfig, GenerationError, GenerationRun,
};
pub use transport::{
    CannedTransport, ChatMessage, ChatRequest, HttpTransport, RateLimited, RetryPolicy, Retrying, Role,
    SamplingParams, Transport, TransportError,
};
