use std::path::PathBuf;
use std::process::ExitCode;

use adaptometer_cli::commands::JsdOutcome;
use adaptometer_cli::output::OutputFile;
use adaptometer_cli::{cmd_analyze, cmd_generate, cmd_jsd, cmd_stats, cmd_synth, configure_threads, CliError, JsdMode, RunConfig};
use adaptometer_core::corpus::CorpusFormat;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adaptometer", version, about = "Long-term syntactic adaptation in two-speaker dialogue")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CorpusArgs {
    /// Corpus JSONL file; repeat to concatenate.
    #[arg(long = "corpus")]
    corpus: Vec<PathBuf>,
    /// transcript-jsonl, parsed-jsonl or rules-jsonl.
    #[arg(long)]
    format: Option<CorpusFormat>,
    /// Count preterminal rules as well.
    #[arg(long)]
    include_lexical: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus composition tables.
    Stats(CorpusArgs),
    /// Sample, fit and report the adaptation regression.
    Analyze {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Disable hapax and high-frequency rule filtering.
        #[arg(long)]
        all_rules: bool,
        /// Significance level for dropping interactions.
        #[arg(long)]
        alpha: Option<f64>,
        /// Full model formula before selection.
        #[arg(long)]
        formula: Option<String>,
    },
    /// Jensen-Shannon divergence between agents.
    Jsd {
        #[command(subcommand)]
        mode: JsdCommand,
    },
    /// Generate conversations between persona-prompted agents.
    Generate {
        /// Use an offline canned transport instead of the API.
        #[arg(long)]
        dry_run: bool,
        /// Comma-separated persona ids for round-robin mode.
        #[arg(long, value_delimiter = ',')]
        personas: Option<Vec<u8>>,
        /// Two persona ids for fixed-pair mode.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        fixed_pair: Option<Vec<u8>>,
        /// Conversations in fixed-pair mode.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        word_threshold: Option<usize>,
        #[arg(long)]
        concurrency: Option<usize>,
    },
    /// Write a synthetic rules-level corpus.
    Synth {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        conversations: Option<usize>,
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        turns: Option<usize>,
        #[arg(long)]
        rules_per_turn: Option<usize>,
        #[arg(long)]
        zipf_s: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum JsdCommand {
    /// Pairwise matrix over all agents.
    Matrix(CorpusArgs),
    /// Bootstrapped JSD per fixed-width split for one agent pair.
    Trajectory {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        split_words: Option<usize>,
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        agents: Option<Vec<String>>,
    },
}

fn apply_corpus(cfg: &mut RunConfig, args: &CorpusArgs) {
    if !args.corpus.is_empty() {
        cfg.corpus.paths = args.corpus.clone();
    }
    if let Some(f) = args.format {
        cfg.corpus.format = f;
    }
    if args.include_lexical {
        cfg.rules.include_lexical = true;
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn print_files(files: &[OutputFile], cfg: &RunConfig) {
    for f in files {
        println!("  wrote {}", cfg.out_dir.join(&f.file).display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out_dir, cli.out_dir);
    set(&mut cfg.threads, cli.threads);
    cfg.propagate_seed();
    configure_threads(cfg.threads)?;

    match cli.command {
        Command::Stats(args) => {
            apply_corpus(&mut cfg, &args);
            let out = cmd_stats(&cfg)?;
            let s = &out.stats;
            println!(
                "{} conversations, {} utterances, {} words, {} rule types",
                s.conversations, s.utterances, s.words, s.rule_types
            );
            print_files(&out.files, &cfg);
        }
        Command::Analyze { corpus, all_rules, alpha, formula } => {
            apply_corpus(&mut cfg, &corpus);
            cfg.analysis.all_rules |= all_rules;
            set(&mut cfg.analysis.alpha, alpha);
            set(&mut cfg.analysis.formula, formula);
            let out = cmd_analyze(&cfg)?;
            println!("{} sampling units", out.units);
            print!("{}", out.table);
            if !out.fit.converged {
                eprintln!("warning: optimizer did not converge; estimates may be unreliable");
            }
            print_files(&out.files, &cfg);
        }
        Command::Jsd { mode } => {
            let mode = match mode {
                JsdCommand::Matrix(args) => {
                    apply_corpus(&mut cfg, &args);
                    JsdMode::Matrix
                }
                JsdCommand::Trajectory { corpus, split_words, bootstrap, agents } => {
                    apply_corpus(&mut cfg, &corpus);
                    set(&mut cfg.divergence.split_words, split_words);
                    set(&mut cfg.divergence.bootstrap, bootstrap);
                    if let Some(a) = agents {
                        cfg.divergence.agents = Some([a[0].clone(), a[1].clone()]);
                    }
                    JsdMode::Trajectory
                }
            };
            match cmd_jsd(&cfg, mode)? {
                JsdOutcome::Matrix(m, files) => {
                    println!("{} agents, max JSD {:.6}", m.agents.len(), m.max());
                    print_files(&files, &cfg);
                }
                JsdOutcome::Trajectory(r, files) => {
                    println!("agents {} / {}, {} splits", r.agents[0], r.agents[1], r.points.len());
                    for p in &r.points {
                        println!("  split {:>3}  mean {:.6}  std {:.6}  n={}", p.split_index, p.mean_jsd, p.std_jsd, p.n_conversations);
                    }
                    print_files(&files, &cfg);
                }
            }
        }
        Command::Generate { dry_run, personas, fixed_pair, count, model, endpoint, word_threshold, concurrency } => {
            cfg.generate.dry_run |= dry_run;
            set(&mut cfg.generate.personas, personas);
            if let Some(p) = fixed_pair {
                cfg.generate.fixed_pair = Some([p[0], p[1]]);
            }
            set(&mut cfg.generate.fixed_pair_count, count);
            set(&mut cfg.generation.model, model);
            set(&mut cfg.generation.endpoint, endpoint);
            set(&mut cfg.generation.word_threshold, word_threshold);
            set(&mut cfg.generation.concurrency, concurrency);
            let out = cmd_generate(&cfg)?;
            println!(
                "{} conversations attempted, {} kept, {} excluded",
                out.attempted,
                out.report.included,
                out.report.excluded.len()
            );
            print_files(&out.files, &cfg);
        }
        Command::Synth { lambda, conversations, vocab, turns, rules_per_turn, zipf_s } => {
            let s = &mut cfg.synth;
            set(&mut s.lambda, lambda);
            set(&mut s.conversations, conversations);
            set(&mut s.vocab, vocab);
            set(&mut s.turns, turns);
            set(&mut s.rules_per_turn, rules_per_turn);
            set(&mut s.zipf_s, zipf_s);
            let out = cmd_synth(&cfg)?;
            println!("{} synthetic conversations", out.conversations);
            print_files(&out.files, &cfg);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
