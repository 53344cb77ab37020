use std::path::{Path, PathBuf};

use adaptometer_core::corpus::{CorpusFormat, RuleOptions, SplitConfig};
use adaptometer_core::sampling::SamplingConfig;
use adaptometer_core::synth::SynthConfig;
use adaptometer_core::treebank::TreeOptions;
use adaptometer_genconv::GenerationConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusInput {
    pub paths: Vec<PathBuf>,
    pub format: CorpusFormat,
    pub trees: TreeOptions,
}

impl Default for CorpusInput {
    fn default() -> Self {
        Self { paths: Vec::new(), format: CorpusFormat::ParsedJsonl, trees: TreeOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub formula: String,
    pub alpha: f64,
    /// Skips hapax and high-frequency filtering.
    pub all_rules: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { formula: adaptometer_core::glmm::ModelFormula::full().to_string(), alpha: 0.05, all_rules: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceConfig {
    pub split_words: usize,
    pub bootstrap: usize,
    /// Agent pair for trajectories; inferred when the corpus has exactly two agents.
    pub agents: Option<[String; 2]>,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self { split_words: 200, bootstrap: 100, agents: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Persona ids for round-robin mode.
    pub personas: Vec<u8>,
    /// Fixed-pair mode: persona ids and number of conversations.
    pub fixed_pair: Option<[u8; 2]>,
    pub fixed_pair_count: usize,
    pub dry_run: bool,
    /// Words per reply from the offline transport.
    pub dry_run_words: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            personas: (1..=17).collect(),
            fixed_pair: None,
            fixed_pair_count: 520,
            dry_run: false,
            dry_run_words: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed for every stochastic stage.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub corpus: CorpusInput,
    pub rules: RuleOptions,
    pub split: SplitConfig,
    pub sampling: SamplingConfig,
    pub analysis: AnalysisConfig,
    pub divergence: DivergenceConfig,
    /// Model endpoint and conversation protocol.
    pub generation: GenerationConfig,
    /// Which conversations to generate.
    pub generate: GenerateConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            threads: 0,
            corpus: CorpusInput::default(),
            rules: RuleOptions::default(),
            split: SplitConfig::default(),
            sampling: SamplingConfig::default(),
            analysis: AnalysisConfig::default(),
            divergence: DivergenceConfig::default(),
            generation: GenerationConfig::default(),
            generate: GenerateConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Pushes the root seed into every stage that draws random numbers.
    pub fn propagate_seed(&mut self) {
        self.sampling.seed = self.seed;
        self.synth.seed = self.seed;
    }

    pub fn sampling_config(&self) -> SamplingConfig {
        let cfg = SamplingConfig { seed: self.seed, ..self.sampling.clone() };
        if self.analysis.all_rules {
            cfg.all_rules()
        } else {
            cfg
        }
    }

    pub fn require_corpus(&self) -> Result<(), CliError> {
        if self.corpus.paths.is_empty() {
            return Err(CliError::Config("no corpus path given (use --corpus or [corpus] paths)".into()));
        }
        for p in &self.corpus.paths {
            if !p.is_file() {
                return Err(CliError::Config(format!("corpus file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}
