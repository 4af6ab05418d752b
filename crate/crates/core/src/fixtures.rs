//! A small hand-built network used by tests, docs and the CLI smoke runs.
//!
//! Alice follows Bob and the Health category and asked a food question; Bob
//! follows Charlie, who follows Sam and Chemistry and upvoted Sam's health
//! post at time 14. Sam asked the bomb post, which sits in Chemistry and
//! Organics. Taxonomy: Food < Organics, Chemistry < Science, Health < Science.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::graph::{build_graph, EdgeRecord, InteractionGraph, NodeRecord};
use crate::paths::FeedItem;
use crate::schema::Schema;

pub const TOY_SCHEMA: &str = r#"{
  "platform": "toy",
  "node_types": ["user", "category", "post"],
  "edge_types": ["follows", "asks", "upvotes", "posts", "belongs to"],
  "triples": [
    ["user", "follows", "user"],
    ["user", "follows", "category"],
    ["user", "asks", "post"],
    ["user", "upvotes", "post"],
    ["user", "posts", "post"],
    ["post", "belongs to", "category"],
    ["category", "belongs to", "category"]
  ],
  "repeatable": []
}"#;

/// Time at which Alice saw the bomb post.
pub const BOMB_SEEN_AT: i64 = 13;

pub fn toy_schema() -> Schema {
    Schema::from_json(TOY_SCHEMA).expect("toy schema is valid")
}

fn attrs(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn toy_node_records() -> Vec<NodeRecord> {
    let n = |id: &str, t: &str, w: f64, a: &[(&str, Value)]| NodeRecord {
        id: id.into(),
        node_type: t.into(),
        weight: w,
        attrs: attrs(a),
        is_user: id == "Alice",
    };
    vec![
        n("Alice", "user", 3.0, &[("followers", json!(3)), ("followees", json!(2))]),
        n("Bob", "user", 10.0, &[("followers", json!(10)), ("followees", json!(5))]),
        n("Charlie", "user", 4.0, &[("followers", json!(4)), ("followees", json!(0))]),
        n("Sam", "user", 30.0, &[("followers", json!(30)), ("followees", json!(3))]),
        n("Health", "category", 100.0, &[("followers", json!(100)), ("posts", json!(1200))]),
        n("Chemistry", "category", 50.0, &[("followers", json!(50)), ("posts", json!(400))]),
        n("Food", "category", 20.0, &[("followers", json!(20)), ("posts", json!(90))]),
        n("Organics", "category", 40.0, &[("followers", json!(40)), ("posts", json!(300))]),
        n("Science", "category", 500.0, &[("followers", json!(500)), ("posts", json!(9000))]),
        n("health-post", "post", 12.0, &[("label", json!("Is fasting healthy?"))]),
        n("food-post", "post", 30.0, &[("label", json!("Best organic snacks?"))]),
        n("bomb-post", "post", 7.0, &[("label", json!("How are bombs made?"))]),
    ]
}

pub fn toy_edge_records() -> Vec<EdgeRecord> {
    let e = |s: &str, t: &str, d: &str, ts: Option<i64>| EdgeRecord {
        src: s.into(),
        dst: d.into(),
        edge_type: t.into(),
        weight: 1.0,
        ts,
        id: None,
    };
    vec![
        e("Alice", "follows", "Bob", Some(2)),
        e("Alice", "follows", "Health", Some(1)),
        e("Alice", "asks", "food-post", Some(8)),
        e("Bob", "follows", "Charlie", Some(5)),
        e("Charlie", "follows", "Sam", Some(6)),
        e("Charlie", "follows", "Chemistry", Some(7)),
        e("Charlie", "upvotes", "health-post", Some(14)),
        e("Sam", "posts", "health-post", Some(3)),
        e("Sam", "asks", "bomb-post", Some(10)),
        e("health-post", "belongs to", "Health", None),
        e("food-post", "belongs to", "Food", None),
        e("bomb-post", "belongs to", "Chemistry", None),
        e("bomb-post", "belongs to", "Organics", None),
        e("Food", "belongs to", "Organics", None),
        e("Chemistry", "belongs to", "Science", None),
        e("Health", "belongs to", "Science", None),
    ]
}

pub fn toy_graph() -> InteractionGraph {
    build_graph(Arc::new(toy_schema()), toy_node_records(), toy_edge_records())
        .expect("toy graph is valid")
}

pub fn bomb_item() -> FeedItem {
    FeedItem {
        node: "bomb-post".into(),
        seen_at: BOMB_SEEN_AT,
        session: None,
    }
}
