use adaptometer_core::corpus::{CorpusError, SplitError};
use adaptometer_core::divergence::DivergenceError;
use adaptometer_core::glmm::FitError;
use adaptometer_core::sampling::SamplingError;
use adaptometer_core::synth::SynthError;
use adaptometer_genconv::GenerationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data { .. } | CliError::Output { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn data(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Data { stage, message: e.to_string() }
    }

    pub fn corpus(e: CorpusError) -> Self {
        Self::data("load", e)
    }

    pub fn split(e: SplitError) -> Self {
        match e {
            SplitError::InvalidFractions { .. } => CliError::Config(format!("split: {e}")),
            other => Self::data("split", other),
        }
    }

    pub fn sampling(e: SamplingError) -> Self {
        match e {
            SamplingError::BadFraction(_) => CliError::Config(format!("sample: {e}")),
            other => Self::data("sample", other),
        }
    }

    pub fn fit(e: FitError) -> Self {
        match e {
            FitError::Formula(_) => CliError::Config(format!("fit: {e}")),
            FitError::Separation | FitError::Singular => CliError::Numerical { stage: "fit", message: e.to_string() },
            other => Self::data("fit", other),
        }
    }

    pub fn divergence(e: DivergenceError) -> Self {
        match e {
            DivergenceError::ZeroSplitWidth => CliError::Config(format!("jsd: {e}")),
            other => Self::data("jsd", other),
        }
    }

    pub fn synth(e: SynthError) -> Self {
        CliError::Config(format!("synth: {e}"))
    }

    pub fn generation(e: GenerationError) -> Self {
        CliError::Config(format!("generate: {e}"))
    }
}
