mod support;

use proptest::prelude::*;

use feedpath_core::baselines::{pra_score, pra_walk, rex_global_score, CenterRule, Espresso, RwrConfig};
use feedpath_core::graph::{build_graph, InteractionGraph};
use feedpath_core::paths::{enumerate_paths, ExplanationPath};
use feedpath_core::pattern::{pattern_of, PatternStats};

use support::{brute_paths, espresso_oracle, pattern_key, pattern_walks, random_graph, random_schema, DenseRwr, RandomGraph};

fn build(rg: &RandomGraph) -> InteractionGraph {
    build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap()
}

/// Walk `ids` through `g`, picking the edge with the given label at each step.
fn resolve(g: &InteractionGraph, ids: &[String], labels: &[String]) -> (Vec<u32>, Vec<u32>) {
    let nodes: Vec<u32> = ids.iter().map(|n| g.node_ix(n).unwrap()).collect();
    let edges = nodes
        .windows(2)
        .zip(labels)
        .map(|(w, l)| {
            *g.out_edges(w[0])
                .iter()
                .find(|&&e| g.edge(e).target == w[1] && &g.kind_name(g.edge(e).kind) == l)
                .unwrap()
        })
        .collect();
    (nodes, edges)
}

fn mined(rg: &RandomGraph, g: &InteractionGraph, seed: u64) -> Vec<ExplanationPath> {
    enumerate_paths(g, &rg.user, &rg.feed_item(seed), 4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pra_mass_is_conserved(seed in any::<u64>()) {
        let rg = random_graph(seed, 20, 40);
        let g = build(&rg);
        for p in mined(&rg, &g, seed) {
            let pat = pattern_of(&g, &p).unwrap();
            let walks = pattern_walks(&rg.nodes, &rg.edges, &rg.user, &pat.node_types, &pat.edge_types);
            let mut total = walks.stranded;
            for ((ids, labels), mass) in &walks.complete {
                let (ns, es) = resolve(&g, ids, labels);
                let lib = pra_walk(&g, &ns, &es).unwrap();
                prop_assert!((lib - mass).abs() < 1e-12);
                total += lib;
            }
            prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
            let s = pra_score(&g, &p).unwrap();
            prop_assert!(s > 0.0 && s <= 1.0);
        }
    }

    #[test]
    fn rex_is_one_minus_brute_confidence(seed in any::<u64>()) {
        let rg = random_graph(seed, 16, 32);
        let g = build(&rg);
        let items: Vec<_> = (0..4).map(|k| rg.feed_item(seed.wrapping_add(k))).collect();
        let per_item: Vec<Vec<ExplanationPath>> = items.iter().map(|f| enumerate_paths(&g, &rg.user, f, 4).unwrap()).collect();
        let stats = PatternStats::build(&g, per_item.iter().enumerate().map(|(k, ps)| (format!("pair{k}"), ps.as_slice()))).unwrap();
        let brute: Vec<Vec<_>> = items
            .iter()
            .map(|f| brute_paths(&rg.nodes, &rg.edges, &rg.user, f, 4).iter().map(|k| pattern_key(&rg, k)).collect())
            .collect();
        for p in per_item.iter().flatten() {
            let pat = pattern_of(&g, p).unwrap();
            let key = (pat.node_types.clone(), pat.edge_types.clone());
            let conf = brute.iter().filter(|pats| pats.contains(&key)).count() as f64 / items.len() as f64;
            prop_assert!((rex_global_score(&stats, p, &g).unwrap() - (1.0 - conf)).abs() < 1e-12);
        }
    }

    #[test]
    fn espresso_matches_oracle_and_is_reversible(seed in any::<u64>()) {
        let rg = random_graph(seed, 20, 40);
        let g = build(&rg);
        let esp = Espresso::new(&g, RwrConfig::default(), CenterRule::Min);
        let rw = DenseRwr::new(&rg.nodes, &rg.edges, 0.15, 10);
        for p in mined(&rg, &g, seed) {
            let ids: Vec<String> = p.nodes.iter().map(|&n| g.node(n).id.clone()).collect();
            let got = esp.score(&p).unwrap();
            prop_assert!((got - espresso_oracle(&rw, &ids)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&got));

            let rev_nodes: Vec<u32> = p.nodes.iter().rev().copied().collect();
            let rev_edges: Vec<u32> = p.edges.iter().rev().map(|&e| g.inverse_of(e)).collect();
            let rev = ExplanationPath::new(&g, rev_nodes, rev_edges);
            prop_assert!((esp.score(&rev).unwrap() - got).abs() < 1e-12);
        }
    }
}

#[test]
fn pra_branching_lowers_the_score() {
    for seed in 0..50 {
        let rg = random_graph(seed, 20, 40);
        let g = build(&rg);
        for p in mined(&rg, &g, seed) {
            let base = pra_score(&g, &p).unwrap();
            // Add a sibling of the first hop's target and an edge to it.
            let first = g.edge(p.edges[0]);
            if first.is_inverse() {
                continue;
            }
            let mut nodes = rg.nodes.clone();
            let mut twin = nodes.iter().find(|n| n.id == g.node(first.target).id).unwrap().clone();
            twin.id = "twin".into();
            twin.is_user = false;
            nodes.push(twin);
            let mut edges = rg.edges.clone();
            edges.push(feedpath_core::graph::EdgeRecord {
                src: g.node(first.source).id.clone(),
                dst: "twin".into(),
                edge_type: g.base_name(first.kind).to_owned(),
                weight: 1.0,
                ts: None,
                id: None,
            });
            let h = build_graph(random_schema(), nodes, edges).unwrap();
            let ids: Vec<String> = p.nodes.iter().map(|&n| g.node(n).id.clone()).collect();
            let labels: Vec<String> = p.edges.iter().map(|&e| g.kind_name(g.edge(e).kind)).collect();
            let (ns, es) = resolve(&h, &ids, &labels);
            let q = ExplanationPath::new(&h, ns, es);
            assert!(pra_score(&h, &q).unwrap() < base);
            return;
        }
    }
    panic!("no path starting with a forward edge");
}
