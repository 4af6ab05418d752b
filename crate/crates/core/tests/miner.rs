mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;

use feedpath_core::graph::{build_graph, InteractionGraph};
use feedpath_core::paths::{enumerate_paths, is_valid, ExplanationPath, FeedItem};

use support::{brute_paths, random_graph, random_schema, PathKey};

fn keys(g: &InteractionGraph, paths: &[ExplanationPath]) -> Vec<PathKey> {
    paths
        .iter()
        .map(|p| {
            (
                p.nodes.iter().map(|&n| g.node(n).id.clone()).collect(),
                p.edges.iter().map(|&e| g.kind_name(g.edge(e).kind)).collect(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), max_len in 1usize..=5) {
        let rg = random_graph(seed, 30, 60);
        let g = build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap();
        let item = rg.feed_item(seed);
        let got = enumerate_paths(&g, &rg.user, &item, max_len).unwrap();
        let listed = keys(&g, &got);
        let set: BTreeSet<PathKey> = listed.iter().cloned().collect();
        prop_assert_eq!(set.len(), listed.len(), "duplicates in miner output");
        prop_assert_eq!(set, brute_paths(&rg.nodes, &rg.edges, &rg.user, &item, max_len));
        for p in &got {
            prop_assert!(is_valid(&g, p, item.seen_at));
        }
        prop_assert!(got.windows(2).all(|w| (w[0].len(), w[0].id) <= (w[1].len(), w[1].id)));
    }

    #[test]
    fn monotone_in_max_len(seed in any::<u64>(), k in 1usize..5) {
        let rg = random_graph(seed, 20, 40);
        let g = build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap();
        let item = rg.feed_item(seed);
        let short: BTreeSet<_> = enumerate_paths(&g, &rg.user, &item, k).unwrap().into_iter().map(|p| p.id).collect();
        let long: BTreeSet<_> = enumerate_paths(&g, &rg.user, &item, k + 1).unwrap().into_iter().map(|p| p.id).collect();
        prop_assert!(short.is_subset(&long));
    }

    #[test]
    fn monotone_in_viewing_time(seed in any::<u64>()) {
        let rg = random_graph(seed, 20, 40);
        let g = build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap();
        let item = rg.feed_item(seed);
        let later = FeedItem { seen_at: item.seen_at + 3, ..item.clone() };
        let early: BTreeSet<_> = enumerate_paths(&g, &rg.user, &item, 4).unwrap().into_iter().map(|p| p.id).collect();
        let late: BTreeSet<_> = enumerate_paths(&g, &rg.user, &later, 4).unwrap().into_iter().map(|p| p.id).collect();
        prop_assert!(early.is_subset(&late));
    }

    #[test]
    fn deterministic_across_record_order(seed in any::<u64>()) {
        let rg = random_graph(seed, 30, 60);
        let g = build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap();
        let mut nodes = rg.nodes.clone();
        let mut edges = rg.edges.clone();
        nodes[1..].reverse();
        edges.reverse();
        let h = build_graph(random_schema(), nodes, edges).unwrap();
        let item = rg.feed_item(seed);
        let a = enumerate_paths(&g, &rg.user, &item, 5).unwrap();
        let b = enumerate_paths(&g, &rg.user, &item, 5).unwrap();
        let c = enumerate_paths(&h, &rg.user, &item, 5).unwrap();
        prop_assert_eq!(&a, &b);
        let ids = |ps: &[ExplanationPath]| ps.iter().map(|p| p.id).collect::<Vec<_>>();
        prop_assert_eq!(ids(&a), ids(&c));
    }
}

#[test]
fn random_graphs_exercise_the_miner() {
    let mut nonempty = 0;
    let mut pruned = 0;
    for seed in 0..200u64 {
        let rg = random_graph(seed, 30, 60);
        let item = rg.feed_item(seed);
        let found = brute_paths(&rg.nodes, &rg.edges, &rg.user, &item, 5);
        let untimed = FeedItem { seen_at: i64::MAX, ..item.clone() };
        let all = brute_paths(&rg.nodes, &rg.edges, &rg.user, &untimed, 5);
        nonempty += usize::from(!found.is_empty());
        pruned += usize::from(found.len() < all.len());
    }
    assert!(nonempty >= 100, "only {nonempty} graphs had paths");
    assert!(pruned >= 50, "only {pruned} graphs lost paths to the time filter");
}
