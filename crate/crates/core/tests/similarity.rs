mod support;

use std::collections::HashMap;

use proptest::prelude::*;

use feedpath_core::graph::build_graph;
use feedpath_core::similarity::SimilarityProvider;

use support::{random_graph, random_schema};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn similarities_are_bounded_and_symmetric(seed in any::<u64>(), dims in prop::collection::vec(-1.0f64..1.0, 3)) {
        let rg = random_graph(seed, 20, 40);
        let g = build_graph(random_schema(), rg.nodes.clone(), rg.edges.clone()).unwrap();
        let mut vectors = HashMap::new();
        for (i, n) in rg.nodes.iter().enumerate().filter(|(_, n)| n.node_type == "category") {
            let k = i as f64;
            vectors.insert(n.id.clone(), vec![dims[0] + k, dims[1] - k, dims[2] * k]);
        }
        let tax = SimilarityProvider::taxonomic(&g);
        let emb = SimilarityProvider::embedding(vectors, Some(SimilarityProvider::taxonomic(&g)));
        let n = g.node_count() as u32;
        for a in 0..n {
            for b in 0..n {
                for p in [&tax, &emb] {
                    let s = p.similarity(&g, a, b);
                    prop_assert!((0.0..=1.0).contains(&s), "{} {}", p.kind(), s);
                    prop_assert!((s - p.similarity(&g, b, a)).abs() < 1e-12);
                }
            }
            prop_assert_eq!(tax.similarity(&g, a, a), 1.0);
        }
    }
}
