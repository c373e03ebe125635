mod common;

use common::trees::*;
use proptest::prelude::*;
use qprobe::metrics::{
    avg_dependency_length, avg_subordinate_chain, avg_verbal_edges, compute_profile, lexical_density,
    max_tree_depth, normalize_corpus, profile_corpus, token_count, MetricConfig, NormalizationGroup,
};

const UPOS: [&str; 8] = ["VERB", "NOUN", "AUX", "ADJ", "DET", "PUNCT", "ADV", "PRON"];
const RELS: [&str; 8] = ["ccomp", "obj", "advcl", "acl:relcl", "xcomp", "nsubj", "csubj:pass", "amod"];

/// Random tree over up to `max` tokens: a shuffled order where every token
/// attaches to one that comes earlier in it.
fn tree(max: usize) -> impl Strategy<Value = (Vec<&'static str>, Vec<usize>, Vec<&'static str>)> {
    (1..=max)
        .prop_flat_map(|n| {
            (
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                proptest::collection::vec(any::<prop::sample::Index>(), n),
                proptest::collection::vec(0..UPOS.len(), n),
                proptest::collection::vec(0..RELS.len(), n),
            )
        })
        .prop_map(|(order, picks, upos, rels)| {
            let n = order.len();
            let mut heads = vec![0; n];
            for k in 1..n {
                heads[order[k]] = order[picks[k].index(k)] + 1;
            }
            let upos: Vec<&str> = upos.into_iter().map(|u| UPOS[u]).collect();
            let rels: Vec<&str> = (0..n)
                .map(|i| if heads[i] == 0 { "root" } else { RELS[rels[i]] })
                .collect();
            (upos, heads, rels)
        })
}

proptest! {
    #[test]
    fn metrics_match_oracles((upos, heads, rels) in tree(6)) {
        let s = build(&upos, &heads, &rels);
        let cfg = MetricConfig::default();
        prop_assert_eq!(token_count(&s), upos.len());
        prop_assert_eq!(max_tree_depth(&s).unwrap(), mtd_oracle(&upos, &heads));
        prop_assert_eq!(avg_verbal_edges(&s), ve_oracle(&upos, &heads));
        prop_assert_eq!(avg_subordinate_chain(&s, &cfg), asc_oracle(&rels, &heads));
        prop_assert_eq!(avg_dependency_length(&s).ok(), adl_oracle(&upos, &heads));
        prop_assert_eq!(lexical_density(&s, &cfg).ok(), ld_oracle(&upos));
    }

    #[test]
    fn inserting_punctuation_changes_only_token_count(
        (upos, heads, rels) in tree(6),
        at in any::<prop::sample::Index>(),
        attach in any::<prop::sample::Index>(),
    ) {
        let n = upos.len();
        let cfg = MetricConfig::default();
        let before = build(&upos, &heads, &rels);
        // new token lands at 0-based position p; later indices shift by one
        let p = at.index(n + 1);
        let shift = |h: usize| if h > p { h + 1 } else { h };
        let mut up2 = upos.clone();
        let mut h2: Vec<usize> = heads.iter().map(|&h| shift(h)).collect();
        let mut r2 = rels.clone();
        up2.insert(p, "PUNCT");
        h2.insert(p, shift(attach.index(n) + 1));
        r2.insert(p, "punct");
        let after = build(&up2, &h2, &r2);

        prop_assert_eq!(token_count(&after), token_count(&before) + 1);
        prop_assert_eq!(lexical_density(&after, &cfg).ok(), lexical_density(&before, &cfg).ok());
        prop_assert_eq!(avg_dependency_length(&after).ok(), avg_dependency_length(&before).ok());
        prop_assert_eq!(max_tree_depth(&after).unwrap(), max_tree_depth(&before).unwrap());
        prop_assert_eq!(avg_verbal_edges(&after), avg_verbal_edges(&before));
        prop_assert_eq!(avg_subordinate_chain(&after, &cfg), avg_subordinate_chain(&before, &cfg));
    }

    #[test]
    fn normalized_values_stay_in_unit_interval(trees in proptest::collection::vec(tree(6), 2..12)) {
        let sentences: Vec<_> = trees
            .iter()
            .enumerate()
            .map(|(i, (u, h, r))| {
                let mut s = build(u, h, r);
                s.id = format!("s{i}");
                s
            })
            .collect();
        let profiles = profile_corpus(&sentences, &MetricConfig::default());
        prop_assume!(!profiles.is_empty());
        for p in normalize_corpus(&profiles, NormalizationGroup::PerLanguage).unwrap() {
            let v = p.normalized.unwrap();
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
            let mean = v.iter().sum::<f64>() / 6.0;
            prop_assert!((p.combined.unwrap() - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn exhaustive_small_trees() {
    let cfg = MetricConfig::default();
    let mut checked = 0;
    for n in 1..=6 {
        for heads in all_trees(n) {
            for pattern in 0..3 {
                let (upos, rels) = labels_for(n, &heads, pattern);
                let s = build(&upos, &heads, &rels);
                assert_eq!(avg_dependency_length(&s).ok(), adl_oracle(&upos, &heads), "{heads:?} {upos:?}");
                assert_eq!(max_tree_depth(&s).unwrap(), mtd_oracle(&upos, &heads), "{heads:?}");
                assert_eq!(avg_subordinate_chain(&s, &cfg), asc_oracle(&rels, &heads), "{heads:?} {rels:?}");
                checked += 1;
            }
        }
    }
    // rooted labelled trees: n^(n-1) for each n
    assert_eq!(checked, 3 * (1 + 2 + 9 + 64 + 625 + 7776));
}

#[test]
fn worked_example_values() {
    let s = worked_example();
    let p = compute_profile(&s, &MetricConfig::default()).unwrap();
    assert_eq!(p.token_count, 8);
    assert!((p.lexical_density - 3.0 / 7.0).abs() < 1e-12);
    assert!((p.avg_dep_length - 2.0).abs() < 1e-12);
    assert_eq!(p.max_tree_depth, 2);
    assert!((p.avg_verbal_edges - 3.0).abs() < 1e-12);
    assert_eq!(p.avg_sub_chain, 0.0);
}

#[test]
fn nested_and_independent_chains() {
    // root verb with a ccomp that holds an advcl, plus an acl under a noun
    let s = sentence(
        "asc",
        &[
            ("VERB", 0, "root"),
            ("VERB", 1, "ccomp"),
            ("VERB", 2, "advcl"),
            ("NOUN", 1, "obj"),
            ("VERB", 4, "acl"),
        ],
    );
    assert_eq!(avg_subordinate_chain(&s, &MetricConfig::default()), 1.5);
}

#[test]
fn adl_with_links_of_one_one_three() {
    let s = sentence(
        "adl",
        &[("NOUN", 2, "nsubj"), ("VERB", 0, "root"), ("NOUN", 2, "obj"), ("ADV", 1, "advmod")],
    );
    assert!((avg_dependency_length(&s).unwrap() - 5.0 / 3.0).abs() < 1e-12);
}
