use adaptometer_core::corpus::{split_corpus, Corpus, RuleBag, RuleOptions, SplitConfig};
use adaptometer_core::divergence::{jsd, rule_distribution};
use adaptometer_core::glmm::{fit_glmm, ModelFormula};
use adaptometer_core::rng::indexed_substream;
use adaptometer_core::sampling::{build_frequency_table, build_samples, center, filter_rules, SamplingConfig};
use adaptometer_core::synth::{
    expected_repetition_gain, generate_corpus, occurrence_probability, sample_categorical, SynthConfig,
};

/// Fraction of `trials` size-`n` draw sets that contain outcome 0.
fn occurrence_rate(p: f64, n: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "occurrence", (p * 1e6) as u64);
    let weights = [p, 1.0 - p];
    let hits = (0..trials).filter(|_| (0..n).any(|_| sample_categorical(&mut rng, &weights) == 0)).count();
    hits as f64 / trials as f64
}

#[test]
fn null_draws_follow_occurrence_law() {
    for p in [0.05, 0.2, 0.5] {
        for n in [1, 2, 5, 8] {
            let trials = 200_000;
            let expect = occurrence_probability(p, n as u32);
            let se = (expect * (1.0 - expect) / trials as f64).sqrt();
            let got = occurrence_rate(p, n, trials, 17);
            assert!((got - expect).abs() <= 3.0 * se, "p={p} n={n}: {got} vs {expect}");
        }
    }
}

#[test]
fn doubling_draws_gains_p_times_one_minus_p() {
    let p = 0.3;
    let trials = 1_000_000;
    let one = occurrence_rate(p, 1, trials, 1);
    let two = occurrence_rate(p, 2, trials, 2);
    let gain = two - one;
    let se = ((one * (1.0 - one) + two * (1.0 - two)) / trials as f64).sqrt();
    assert!((gain - expected_repetition_gain(p)).abs() <= 3.0 * se, "{gain}");
    assert!((expected_repetition_gain(p) - 0.21).abs() < 1e-12);
}

#[test]
fn null_speakers_match_the_base_distribution() {
    let cfg = SynthConfig { lambda: 0.0, conversations: 2000, ..Default::default() };
    let corpus = generate_corpus(&cfg).unwrap();
    let mut bags: [RuleBag; 2] = Default::default();
    for conv in &corpus.conversations {
        for (i, u) in conv.utterances.iter().enumerate() {
            for r in u.rule_tokens(&RuleOptions::default()) {
                *bags[i % 2].entry(r).or_insert(0usize) += 1;
            }
        }
    }
    let a = rule_distribution(&bags[0]).unwrap();
    let b = rule_distribution(&bags[1]).unwrap();
    assert!(jsd(&a, &b) < 2e-3);
    let base = cfg.base_distribution();
    let top = adaptometer_core::synth::rule_name(0);
    assert!((a.prob(&top) - base[0]).abs() < 0.01);
}

fn same_conv_beta(corpus: &Corpus, seed: u64) -> f64 {
    let rules = RuleOptions::default();
    let (split, _) = split_corpus(corpus, &SplitConfig::default(), &rules).unwrap();
    let table = build_frequency_table(corpus, &rules);
    let cfg = SamplingConfig { seed, ..Default::default() };
    let eligible = filter_rules(&table, &cfg).unwrap();
    let (rows, _) = build_samples(&split, &table, &eligible, &cfg).unwrap();
    let (rows, _) = center(rows);
    let f: ModelFormula = "prime ~ ln_freq + same_conv + ln_size + (1 | conv_id)".parse().unwrap();
    fit_glmm(&rows, &f).unwrap().term("same_conv").unwrap().beta
}

#[test]
fn stronger_adaptation_gives_larger_effect() {
    let mut means = Vec::new();
    for lambda in [0.0, 0.25, 0.5] {
        let total: f64 = (0..20)
            .map(|seed| {
                let corpus = generate_corpus(&SynthConfig { lambda, seed, conversations: 200, ..Default::default() }).unwrap();
                same_conv_beta(&corpus, seed)
            })
            .sum();
        means.push(total / 20.0);
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn null_speakers_are_exchangeable() {
    let betas: Vec<f64> = (0..20)
        .map(|seed| {
            let corpus =
                generate_corpus(&SynthConfig { lambda: 0.0, seed: 500 + seed, conversations: 200, ..Default::default() })
                    .unwrap();
            let mut swapped = corpus.clone();
            for conv in &mut swapped.conversations {
                for p in &mut conv.participants {
                    p.speaker = if p.speaker == "A" { "B".into() } else { "A".into() };
                }
                for u in &mut conv.utterances {
                    u.speaker = if u.speaker == "A" { "B".into() } else { "A".into() };
                }
            }
            same_conv_beta(&swapped, seed)
        })
        .collect();
    let mean = betas.iter().sum::<f64>() / betas.len() as f64;
    let sd = (betas.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (betas.len() - 1) as f64).sqrt();
    assert!(mean.abs() < 3.0 * sd / (betas.len() as f64).sqrt(), "mean {mean} sd {sd}");
}
