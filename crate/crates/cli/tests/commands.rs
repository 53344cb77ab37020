use std::path::Path;
use std::process::Command;

use adaptometer_cli::commands::JsdOutcome;
use adaptometer_cli::{cmd_analyze, cmd_generate, cmd_jsd, cmd_stats, cmd_synth, JsdMode, RunConfig};
use adaptometer_core::corpus::CorpusFormat;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adaptometer"))
}

fn synth_corpus(dir: &Path, conversations: usize, lambda: f64, seed: u64) -> std::path::PathBuf {
    let mut cfg = RunConfig { seed, out_dir: dir.join("synth"), ..Default::default() };
    cfg.synth.conversations = conversations;
    cfg.synth.lambda = lambda;
    cmd_synth(&cfg).unwrap();
    dir.join("synth/synth_corpus.jsonl")
}

fn corpus_config(dir: &Path, corpus: &Path, out: &str) -> RunConfig {
    let mut cfg = RunConfig { out_dir: dir.join(out), ..Default::default() };
    cfg.corpus.paths = vec![corpus.to_path_buf()];
    cfg.corpus.format = CorpusFormat::RulesJsonl;
    cfg
}

#[test]
fn stats_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 20, 0.5, 1);
    let out = cmd_stats(&corpus_config(dir.path(), &corpus, "stats")).unwrap();
    assert_eq!(out.stats.conversations, 20);
    for f in ["conversation_lengths.csv", "utterance_lengths.csv", "speaker_turns.csv", "provenance.json"] {
        assert!(dir.path().join("stats").join(f).is_file(), "{f}");
    }
    let lengths = std::fs::read_to_string(dir.path().join("stats/conversation_lengths.csv")).unwrap();
    assert_eq!(lengths, "words,conversations\n800,20\n");
}

#[test]
fn missing_corpus_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    let out = bin().args(["--out-dir"]).arg(dir.path()).arg("stats").arg("--corpus").arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn malformed_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{not json\n").unwrap();
    let out = bin().arg("--out-dir").arg(dir.path()).args(["stats", "--corpus"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["synth", "--lambda", "x"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[synth]\nvocab = 1\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("--out-dir").arg(dir.path()).arg("synth").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&cfg, "nonsense = true\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("synth").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[synth]\nconversations = 4\nturns = 4\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path().join("o"))
        .args(["--seed", "11", "synth", "--conversations", "6"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/synth_config.json")).unwrap()).unwrap();
    assert_eq!(sc["seed"], 11);
    assert_eq!(sc["conversations"], 6);
    assert_eq!(sc["turns"], 4);
    let prov: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 11);
}

#[test]
fn analyze_writes_all_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 120, 0.5, 4);
    let a = cmd_analyze(&corpus_config(dir.path(), &corpus, "a")).unwrap();
    cmd_analyze(&corpus_config(dir.path(), &corpus, "b")).unwrap();
    assert!(a.units > 0);
    for f in ["frequency_table.csv", "samples.csv", "sampling_report.json", "fit_report.json", "fit_report.txt", "selection_trace.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let header = std::fs::read_to_string(dir.path().join("a/samples.csv")).unwrap();
    assert!(header.starts_with("prime,same_conv,ln_freq_c,ln_size_c,conv_id,speaker_id,rule\n"));
}

#[test]
fn analyze_rejects_plain_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    std::fs::write(
        &path,
        "{\"conv_id\":\"x\",\"turn\":0,\"speaker\":\"A\",\"text\":\"hello there\"}\n{\"conv_id\":\"x\",\"turn\":1,\"speaker\":\"B\",\"text\":\"hi\"}\n",
    )
    .unwrap();
    let mut cfg = corpus_config(dir.path(), &path, "o");
    cfg.corpus.format = CorpusFormat::TranscriptJsonl;
    let err = cmd_analyze(&cfg).err().unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bad_formula_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 10, 0.0, 0);
    let mut cfg = corpus_config(dir.path(), &corpus, "o");
    cfg.analysis.formula = "prime ~ banana".into();
    assert_eq!(cmd_analyze(&cfg).err().unwrap().exit_code(), 1);
}

#[test]
fn single_bootstrap_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 30, 0.5, 2);
    let mut cfg = corpus_config(dir.path(), &corpus, "j");
    cfg.divergence.bootstrap = 1;
    let JsdOutcome::Trajectory(report, _) = cmd_jsd(&cfg, JsdMode::Trajectory).unwrap() else { panic!() };
    assert!(!report.points.is_empty());
    assert!(report.points.iter().all(|p| p.std_jsd == 0.0));
    let csv = std::fs::read_to_string(dir.path().join("j/trajectory.csv")).unwrap();
    assert!(csv.starts_with("split_index,mean_jsd,std_jsd,n_conversations\n"));
}

#[test]
fn jsd_matrix_over_generated_personas() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig { out_dir: dir.path().join("g"), ..Default::default() };
    cfg.generate.dry_run = true;
    cfg.generate.personas = vec![1, 2, 3];
    let out = cmd_generate(&cfg).unwrap();
    assert_eq!(out.attempted, 3);
    let raw = std::fs::read_to_string(dir.path().join("g/transcripts_raw.jsonl")).unwrap();
    let convs: std::collections::BTreeSet<String> = raw
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["conv_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(convs.len(), 3);
    assert!(raw.contains("\"persona\":\"2\""));
}

#[test]
fn generate_without_key_fails_fast() {
    let out = bin()
        .args(["generate", "--personas", "1,2"])
        .env("ADAPTOMETER_API_KEY", "")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ADAPTOMETER_API_KEY"));
}

#[test]
fn dry_run_binary_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .args(["generate", "--dry-run", "--personas", "4,5,6", "--word-threshold", "150"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("3 conversations attempted"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("exclusion_report.json")).unwrap()).unwrap();
    assert_eq!(report["attempted"], 3);
}

#[test]
fn readme_config_example_parses() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml\n").unwrap() + 8;
    let end = start + readme[start..].find("```").unwrap();
    let cfg = RunConfig::from_toml_str(&readme[start..end]).unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.generate.personas.len(), 17);
    assert_eq!(cfg.divergence.agents, Some(["5".to_string(), "6".to_string()]));
}
