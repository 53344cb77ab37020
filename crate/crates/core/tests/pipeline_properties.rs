use std::collections::BTreeMap;

use adaptometer_core::corpus::{
    split_corpus, split_prime_target, Conversation, Corpus, Participant, RuleBag, RuleOptions, SplitConfig, Utterance,
};
use adaptometer_core::divergence::{bootstrap_trajectory, split_trajectory};
use adaptometer_core::sampling::{build_frequency_table, build_samples, filter_rules, SamplingConfig};
use adaptometer_core::synth::{generate_corpus, SynthConfig};
use adaptometer_core::treebank::ProductionRule;
use proptest::prelude::*;

fn rule(i: usize) -> ProductionRule {
    if i % 4 == 3 {
        ProductionRule::new(format!("T{}", i % 3), vec![format!("w{i}")], true).unwrap()
    } else {
        ProductionRule::new(format!("N{}", i % 5), vec![format!("A{i}"), "B".into()], false).unwrap()
    }
}

type TurnSpec = (usize, Vec<usize>);

fn conversation(id: usize, turns: &[TurnSpec]) -> Conversation {
    let utterances = turns
        .iter()
        .enumerate()
        .map(|(i, (words, rules))| {
            Utterance::from_rules(if i % 2 == 0 { "A" } else { "B" }, i, rules.iter().map(|&r| rule(r)).collect(), *words)
        })
        .collect();
    let p = |s: &str| Participant { speaker: s.into(), persona: None };
    Conversation::new(format!("c{id}"), [p("A"), p("B")], utterances, None).unwrap()
}

fn turns() -> impl Strategy<Value = Vec<TurnSpec>> {
    prop::collection::vec((1usize..40, prop::collection::vec(0usize..16, 0..6)), 4..14)
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(turns(), 3..7)
        .prop_map(|convs| Corpus::new(convs.iter().enumerate().map(|(i, t)| conversation(i, t)).collect()))
}

fn split_cfg() -> impl Strategy<Value = SplitConfig> {
    (0.2f64..0.5).prop_map(|p| SplitConfig { prime_frac: p, gap_frac: 1.0 - 2.0 * p })
}

fn add(acc: &mut RuleBag, other: &RuleBag) {
    for (r, c) in other {
        *acc.entry(r.clone()).or_default() += c;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sections_partition_words_and_rules(t in turns(), cfg in split_cfg(), lexical in any::<bool>()) {
        let conv = conversation(0, &t);
        let opts = RuleOptions { include_lexical: lexical };
        let Ok(s) = split_prime_target(&conv, &cfg, &opts) else { return Ok(()) };
        prop_assert_eq!(s.prime.word_count + s.target.word_count + s.discarded.word_count, conv.word_count());

        let mut seen: Vec<usize> = [&s.prime, &s.target, &s.discarded].iter().flat_map(|x| x.utterances.clone()).collect();
        seen.sort();
        prop_assert_eq!(seen, (0..conv.utterances.len()).collect::<Vec<_>>());

        for section in [&s.prime, &s.target, &s.discarded] {
            let mut expect: [RuleBag; 2] = Default::default();
            for &i in &section.utterances {
                let u = &conv.utterances[i];
                for r in u.rule_tokens(&opts) {
                    *expect[i % 2].entry(r).or_default() += 1;
                }
            }
            prop_assert_eq!(&section.speakers, &expect);
        }

        let other = split_prime_target(&conv, &cfg, &RuleOptions { include_lexical: !lexical }).unwrap();
        prop_assert_eq!(&other.assignment, &s.assignment);
        prop_assert_eq!(other.prime.word_count, s.prime.word_count);
        prop_assert_eq!(split_prime_target(&conv, &cfg, &opts).unwrap(), s);
    }

    #[test]
    fn sample_tables_are_balanced_eligible_and_seeded(c in corpus(), seed in any::<u64>()) {
        let opts = RuleOptions::default();
        let (split, _) = split_corpus(&c, &SplitConfig::default(), &opts).unwrap();
        prop_assume!(split.len() >= 2);
        let table = build_frequency_table(&c, &opts);
        let cfg = SamplingConfig { seed, ..SamplingConfig::default().all_rules() };
        let Ok(eligible) = filter_rules(&table, &cfg) else { return Ok(()) };
        let (rows, report) = build_samples(&split, &table, &eligible, &cfg).unwrap();
        prop_assert_eq!(rows.len(), 2 * report.units);
        prop_assert_eq!(rows.iter().filter(|r| r.same_conv == 1).count() * 2, rows.len());
        prop_assert!(rows.iter().all(|r| eligible.iter().any(|e| e.to_string() == r.rule)));
        let (again, _) = build_samples(&split, &table, &eligible, &cfg).unwrap();
        prop_assert_eq!(again, rows);
    }

    #[test]
    fn aggregated_splits_sum_conversation_splits(c in corpus(), width in 5usize..60) {
        let opts = RuleOptions { include_lexical: true };
        let total = split_trajectory(&c, ("A", "B"), width, &opts).unwrap();
        let mut sum: Vec<[RuleBag; 2]> = Vec::new();
        for conv in &c.conversations {
            let one = split_trajectory(&Corpus::new(vec![conv.clone()]), ("A", "B"), width, &opts).unwrap();
            if sum.len() < one.len() {
                sum.resize_with(one.len(), Default::default);
            }
            for (acc, s) in sum.iter_mut().zip(&one) {
                add(&mut acc[0], &s.agents[0]);
                add(&mut acc[1], &s.agents[1]);
            }
        }
        let got: Vec<[RuleBag; 2]> = total.into_iter().map(|s| s.agents).collect();
        prop_assert_eq!(got, sum);
    }
}

#[test]
fn bootstrap_mean_approaches_point_estimate() {
    let corpus = generate_corpus(&SynthConfig { lambda: 0.5, conversations: 200, seed: 8, ..Default::default() }).unwrap();
    let opts = RuleOptions::default();
    let gap = |b: usize| -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for seed in 0..4 {
            let r = bootstrap_trajectory(&corpus, ("A", "B"), 200, b, seed, &opts).unwrap();
            for p in &r.points {
                total += (p.mean_jsd - p.point_jsd.unwrap()).abs();
                n += 1;
            }
        }
        total / n as f64
    };
    let gaps: BTreeMap<usize, f64> = [10, 100, 1000].into_iter().map(|b| (b, gap(b))).collect();
    assert!(gaps[&10] > gaps[&100] && gaps[&100] > gaps[&1000], "{gaps:?}");
}
