use std::collections::BTreeMap;

use adaptometer_core::corpus::RuleBag;
use adaptometer_core::divergence::{jsd, rule_distribution};
use adaptometer_core::treebank::{extract_rules, parse_bracketed, SyntaxTree};
use proptest::prelude::*;

fn symbol() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["S", "NP", "VP", "PP", "SBAR", "NP-SBJ", "ADJP", "-LRB-", "PRP$", "WHNP-1"])
            .prop_map(String::from),
        "[A-Z][A-Z0-9$-]{0,4}",
    ]
}

fn word() -> impl Strategy<Value = String> {
    "[a-z0-9.,'!?&$-]{1,8}"
}

/// Trees of depth ≤ 8 and fanout ≤ 5.
fn tree() -> impl Strategy<Value = SyntaxTree> {
    let leaf = (symbol(), word()).prop_map(|(l, w)| SyntaxTree::leaf(l, w).unwrap());
    leaf.prop_recursive(7, 64, 5, |inner| {
        (symbol(), prop::collection::vec(inner, 1..=5)).prop_map(|(l, kids)| SyntaxTree::node(l, kids).unwrap())
    })
}

fn depth(t: &SyntaxTree) -> usize {
    1 + t.children().iter().map(depth).max().unwrap_or(0)
}

fn distribution() -> impl Strategy<Value = RuleBag> {
    prop::collection::btree_map(0usize..12, 1usize..50, 1..8).prop_map(|m| {
        m.into_iter().map(|(k, c)| (format!("S→R{k}").parse().unwrap(), c)).collect::<BTreeMap<_, _>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialized_trees_parse_back(t in tree()) {
        prop_assert!(depth(&t) <= 8);
        let text = t.serialize();
        prop_assert_eq!(parse_bracketed(&text).unwrap(), t.clone());
        prop_assert_eq!(extract_rules(&t, true).len(), t.node_count());
    }

    #[test]
    fn rule_extraction_survives_reserialization(t in tree()) {
        let again = parse_bracketed(&t.serialize()).unwrap();
        prop_assert_eq!(extract_rules(&again, true), extract_rules(&t, true));
        prop_assert_eq!(extract_rules(&again, false), extract_rules(&t, false));
    }

    #[test]
    fn structural_rules_are_a_sub_multiset(t in tree()) {
        let mut all: BTreeMap<String, usize> = BTreeMap::new();
        for r in extract_rules(&t, true) {
            *all.entry(format!("{r}/{}", r.is_lexical())).or_default() += 1;
        }
        for r in extract_rules(&t, false) {
            let slot = all.get_mut(&format!("{r}/{}", r.is_lexical()));
            prop_assert!(slot.as_ref().is_some_and(|c| **c > 0), "{} missing", r);
            *slot.unwrap() -= 1;
        }
    }

    #[test]
    fn jsd_is_a_bounded_symmetric_divergence(a in distribution(), b in distribution()) {
        let p = rule_distribution(&a).unwrap();
        let q = rule_distribution(&b).unwrap();
        let d = jsd(&p, &q);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, jsd(&q, &p));
        prop_assert_eq!(jsd(&p, &p), 0.0);
        if d < 1e-12 {
            for (r, v) in p.iter() {
                prop_assert!((v - q.prob(r)).abs() < 1e-9);
            }
        }
        let total: f64 = p.iter().map(|(_, v)| v).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
