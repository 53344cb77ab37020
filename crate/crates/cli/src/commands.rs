use std::collections::BTreeSet;
use std::time::Duration;

use adaptometer_core::corpus::{corpus_stats, load_corpus, split_corpus, write_jsonl, Corpus, CorpusFormat, CorpusStats};
use adaptometer_core::divergence::{bootstrap_trajectory, pairwise_jsd_matrix, JsdMatrix, TrajectoryReport};
use adaptometer_core::glmm::{backward_select, wald_report, FitReport, FitResult, GlmmOptions, ModelFormula};
use adaptometer_core::sampling::{build_frequency_table, build_samples, center, filter_rules, write_samples_csv, CenteringReport, SamplingError, SamplingReport};
use adaptometer_core::synth::generate_corpus;
use adaptometer_genconv::{
    generate_fixed_pair, generate_round_robin, persona, CannedTransport, ExclusionReport, HttpTransport, PersonaSpec,
    RateLimited, Retrying, Transport,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{OutputDir, OutputFile};

/// Concatenates every configured corpus file.
pub fn load_inputs(cfg: &RunConfig) -> Result<Corpus, CliError> {
    cfg.require_corpus()?;
    let mut conversations = Vec::new();
    for path in &cfg.corpus.paths {
        let corpus = load_corpus(path, cfg.corpus.format, &cfg.corpus.trees).map_err(CliError::corpus)?;
        conversations.extend(corpus.conversations);
    }
    let mut seen = BTreeSet::new();
    for c in &conversations {
        if !seen.insert(c.id.as_str()) {
            return Err(CliError::data("load", format!("conversation id {:?} appears in more than one input", c.id)));
        }
    }
    Ok(Corpus::new(conversations))
}

fn histogram_csv(header: [&str; 2], rows: &[(usize, usize)]) -> Vec<u8> {
    let mut out = format!("{},{}\n", header[0], header[1]);
    for (v, n) in rows {
        out.push_str(&format!("{v},{n}\n"));
    }
    out.into_bytes()
}

pub struct StatsOutcome {
    pub stats: CorpusStats,
    pub files: Vec<OutputFile>,
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsOutcome, CliError> {
    let corpus = load_inputs(cfg)?;
    let stats = corpus_stats(&corpus, &cfg.rules);
    let mut out = OutputDir::create(&cfg.out_dir)?;
    out.write("conversation_lengths.csv", &histogram_csv(["words", "conversations"], &stats.conversation_lengths))?;
    out.write("utterance_lengths.csv", &histogram_csv(["words", "utterances"], &stats.utterance_lengths))?;
    out.write("speaker_turns.csv", &histogram_csv(["turns", "speakers"], &stats.speaker_turns))?;
    out.write_json("stats_summary.json", &serde_json::json!({
        "conversations": stats.conversations,
        "utterances": stats.utterances,
        "words": stats.words,
        "rule_types": stats.rule_types,
        "rule_tokens": stats.rule_tokens,
    }))?;
    let files = out.finish("stats", cfg)?;
    Ok(StatsOutcome { stats, files })
}

#[derive(Debug, Serialize)]
struct SampleSummary<'a> {
    conversations_included: usize,
    conversations_excluded: &'a [String],
    rule_types: usize,
    rule_tokens: u64,
    #[serde(flatten)]
    sampling: &'a SamplingReport,
    centering: CenteringReport,
}

pub struct AnalyzeOutcome {
    pub fit: FitResult,
    pub report: FitReport,
    pub table: String,
    pub units: usize,
    pub files: Vec<OutputFile>,
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeOutcome, CliError> {
    let formula: ModelFormula = cfg.analysis.formula.parse().map_err(|e| CliError::Config(format!("formula: {e}")))?;
    cfg.split.validate().map_err(CliError::split)?;
    let corpus = load_inputs(cfg)?;
    let mut out = OutputDir::create(&cfg.out_dir)?;

    let table = build_frequency_table(&corpus, &cfg.rules);
    if table.is_empty() {
        return Err(CliError::data("load", "corpus carries no syntactic rules; supply parsed-jsonl or rules-jsonl input"));
    }
    let (split, split_report) = split_corpus(&corpus, &cfg.split, &cfg.rules).map_err(CliError::split)?;
    let mut freq = String::from("rule,count\n");
    for (rule, count) in table.iter() {
        freq.push_str(&format!("\"{}\",{count}\n", rule.to_string().replace('"', "\"\"")));
    }
    out.write("frequency_table.csv", freq.as_bytes())?;

    let scfg = cfg.sampling_config();
    let eligible = filter_rules(&table, &scfg).map_err(CliError::sampling)?;
    let (rows, sampling) = build_samples(&split, &table, &eligible, &scfg).map_err(CliError::sampling)?;
    if rows.is_empty() {
        return Err(CliError::sampling(SamplingError::NoSamples));
    }
    let (rows, centering) = center(rows);
    out.write_with("samples.csv", "sample", |buf| write_samples_csv(&rows, buf))?;
    out.write_json(
        "sampling_report.json",
        &SampleSummary {
            conversations_included: split_report.included,
            conversations_excluded: &split_report.excluded,
            rule_types: table.len(),
            rule_tokens: table.total(),
            sampling: &sampling,
            centering,
        },
    )?;

    let selection =
        backward_select(&rows, &formula, cfg.analysis.alpha, &GlmmOptions::default()).map_err(CliError::fit)?;
    let (report, text) = wald_report(&selection.fit);
    out.write_json("fit_report.json", &report)?;
    out.write("fit_report.txt", text.as_bytes())?;
    out.write_json(
        "selection_trace.json",
        &serde_json::json!({ "full": formula.to_string(), "final": selection.formula.to_string(), "steps": selection.trace }),
    )?;
    let files = out.finish("analyze", cfg)?;
    Ok(AnalyzeOutcome { fit: selection.fit, report, table: text, units: sampling.units, files })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsdMode {
    Matrix,
    Trajectory,
}

pub enum JsdOutcome {
    Matrix(JsdMatrix, Vec<OutputFile>),
    Trajectory(TrajectoryReport, Vec<OutputFile>),
}

/// The configured agent pair, or the only two agents present in the corpus.
pub fn trajectory_agents(cfg: &RunConfig, corpus: &Corpus) -> Result<[String; 2], CliError> {
    if let Some(pair) = &cfg.divergence.agents {
        return Ok(pair.clone());
    }
    let agents: BTreeSet<&str> =
        corpus.conversations.iter().flat_map(|c| c.participants.iter().map(|p| p.agent())).collect();
    match agents.into_iter().collect::<Vec<_>>()[..] {
        [a, b] => Ok([a.to_string(), b.to_string()]),
        ref many => Err(CliError::Config(format!(
            "corpus has {} agents; choose a pair with --agents or [divergence] agents",
            many.len()
        ))),
    }
}

pub fn cmd_jsd(cfg: &RunConfig, mode: JsdMode) -> Result<JsdOutcome, CliError> {
    let corpus = load_inputs(cfg)?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    match mode {
        JsdMode::Matrix => {
            let m = pairwise_jsd_matrix(&corpus, &cfg.rules).map_err(CliError::divergence)?;
            out.write_with("jsd_matrix.csv", "jsd", |buf| m.write_csv(buf))?;
            out.write_json("jsd_matrix.json", &m)?;
            Ok(JsdOutcome::Matrix(m, out.finish("jsd matrix", cfg)?))
        }
        JsdMode::Trajectory => {
            let d = &cfg.divergence;
            if d.bootstrap == 0 {
                return Err(CliError::Config("bootstrap count must be at least 1".into()));
            }
            let [a, b] = trajectory_agents(cfg, &corpus)?;
            let report = bootstrap_trajectory(&corpus, (&a, &b), d.split_words, d.bootstrap, cfg.seed, &cfg.rules)
                .map_err(CliError::divergence)?;
            out.write_with("trajectory.csv", "jsd", |buf| report.write_csv(buf))?;
            out.write_json("trajectory.json", &report)?;
            Ok(JsdOutcome::Trajectory(report, out.finish("jsd trajectory", cfg)?))
        }
    }
}

pub struct GenerateOutcome {
    pub attempted: usize,
    pub report: ExclusionReport,
    pub files: Vec<OutputFile>,
}

fn resolve_personas(ids: &[u8]) -> Result<Vec<PersonaSpec>, CliError> {
    ids.iter()
        .map(|&id| persona(id).copied().ok_or_else(|| CliError::Config(format!("unknown persona id {id} (valid: 1-17)"))))
        .collect()
}

fn http_transport(cfg: &RunConfig) -> Result<Box<dyn Transport>, CliError> {
    let g = &cfg.generation;
    let key = std::env::var(&g.api_key_env)
        .ok()
        .filter(|k| !k.trim().is_empty())
        .ok_or_else(|| CliError::Config(format!("environment variable {} is not set", g.api_key_env)))?;
    let http = HttpTransport::new(g.endpoint.clone(), key, Duration::from_secs(g.timeout_secs));
    Ok(match g.requests_per_minute {
        Some(rpm) => Box::new(Retrying::new(RateLimited::new(http, rpm), g.retry)),
        None => Box::new(Retrying::new(http, g.retry)),
    })
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateOutcome, CliError> {
    let g = &cfg.generate;
    cfg.generation.validate().map_err(CliError::generation)?;
    let transport: Box<dyn Transport> =
        if g.dry_run { Box::new(CannedTransport::new(g.dry_run_words)) } else { http_transport(cfg)? };
    let run = match g.fixed_pair {
        Some([a, b]) => {
            let pair = resolve_personas(&[a, b])?;
            generate_fixed_pair(&pair[0], &pair[1], g.fixed_pair_count, &cfg.generation, &*transport)
        }
        None => generate_round_robin(&resolve_personas(&g.personas)?, &cfg.generation, &*transport),
    }
    .map_err(CliError::generation)?;

    let mut out = OutputDir::create(&cfg.out_dir)?;
    out.write_with("transcripts_raw.jsonl", "generate", |buf| write_jsonl(&run.raw, CorpusFormat::TranscriptJsonl, buf))?;
    out.write_with("transcripts.jsonl", "generate", |buf| write_jsonl(&run.corpus, CorpusFormat::TranscriptJsonl, buf))?;
    out.write_json("exclusion_report.json", &run.report)?;
    let files = out.finish(if g.dry_run { "generate --dry-run" } else { "generate" }, cfg)?;
    Ok(GenerateOutcome { attempted: run.report.attempted, report: run.report, files })
}

pub struct SynthOutcome {
    pub conversations: usize,
    pub files: Vec<OutputFile>,
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutcome, CliError> {
    let scfg = adaptometer_core::synth::SynthConfig { seed: cfg.seed, ..cfg.synth.clone() };
    let corpus = generate_corpus(&scfg).map_err(CliError::synth)?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    out.write_with("synth_corpus.jsonl", "synth", |buf| write_jsonl(&corpus, CorpusFormat::RulesJsonl, buf))?;
    out.write_json("synth_config.json", &scfg)?;
    let files = out.finish("synth", cfg)?;
    Ok(SynthOutcome { conversations: corpus.len(), files })
}
