//! Platform schemas: which node types, edge (action) types and typed
//! relationships an interaction graph may contain.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Suffix appended to an edge type name to denote the synthesized inverse relation.
pub const INVERSE_MARKER: &str = "⁻¹";

const QUORA: &str = include_str!("../schemas/quora.json");
const LASTFM: &str = include_str!("../schemas/lastfm.json");

/// Semantic roles the feature extractors need to know about. Defaults are
/// derived from conventional type names and can be overridden in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub user: String,
    pub categories: Vec<String>,
    pub membership: String,
    pub follow: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    platform: String,
    node_types: Vec<String>,
    edge_types: Vec<String>,
    triples: Vec<[String; 3]>,
    #[serde(default)]
    repeatable: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roles: Option<Roles>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub platform: String,
    node_types: Vec<String>,
    edge_types: Vec<String>,
    triples: BTreeSet<(String, String, String)>,
    repeatable: BTreeSet<String>,
    roles: Roles,
    explicit_roles: bool,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SchemaFile = serde_json::from_str(text).map_err(|e| Error::parse("schema", e))?;
        Self::from_file(raw)
    }

    /// One of the schemas shipped with the crate: `quora` or `lastfm`.
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "quora" => Self::from_json(QUORA),
            "lastfm" => Self::from_json(LASTFM),
            other => Err(Error::Schema(format!("no bundled schema named `{other}`"))),
        }
    }

    fn from_file(raw: SchemaFile) -> Result<Self> {
        if raw.node_types.is_empty() {
            return Err(Error::Schema("no node types declared".into()));
        }
        if raw.edge_types.is_empty() {
            return Err(Error::Schema("no edge types declared".into()));
        }
        check_names("node", &raw.node_types)?;
        check_names("edge", &raw.edge_types)?;
        let nodes: HashSet<&str> = raw.node_types.iter().map(String::as_str).collect();
        let edges: HashSet<&str> = raw.edge_types.iter().map(String::as_str).collect();

        let mut triples = BTreeSet::new();
        for [src, edge, dst] in &raw.triples {
            for n in [src, dst] {
                if !nodes.contains(n.as_str()) {
                    return Err(Error::Schema(format!(
                        "triple ({src}, {edge}, {dst}) references undeclared node type `{n}`"
                    )));
                }
            }
            if !edges.contains(edge.as_str()) {
                return Err(Error::Schema(format!(
                    "triple ({src}, {edge}, {dst}) references undeclared edge type `{edge}`"
                )));
            }
            triples.insert((src.clone(), edge.clone(), dst.clone()));
        }
        for r in &raw.repeatable {
            if !edges.contains(r.as_str()) {
                return Err(Error::Schema(format!(
                    "repeatable edge type `{r}` is not declared"
                )));
            }
        }

        let explicit_roles = raw.roles.is_some();
        let roles = match raw.roles {
            Some(r) => r,
            None => default_roles(&raw.node_types, &raw.edge_types),
        };
        if !nodes.contains(roles.user.as_str()) && explicit_roles {
            return Err(Error::Schema(format!("role user type `{}` undeclared", roles.user)));
        }
        for c in &roles.categories {
            if !nodes.contains(c.as_str()) {
                return Err(Error::Schema(format!("role category type `{c}` undeclared")));
            }
        }

        Ok(Schema {
            platform: raw.platform,
            node_types: raw.node_types,
            edge_types: raw.edge_types,
            triples,
            repeatable: raw.repeatable.into_iter().collect(),
            roles,
            explicit_roles,
        })
    }

    pub fn to_json(&self) -> String {
        let raw = SchemaFile {
            platform: self.platform.clone(),
            node_types: self.node_types.clone(),
            edge_types: self.edge_types.clone(),
            triples: self
                .triples
                .iter()
                .map(|(a, b, c)| [a.clone(), b.clone(), c.clone()])
                .collect(),
            repeatable: self.repeatable.iter().cloned().collect(),
            roles: self.explicit_roles.then(|| self.roles.clone()),
        };
        serde_json::to_string_pretty(&raw).expect("schema serializes")
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[String] {
        &self.edge_types
    }

    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.triples
            .iter()
            .map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str()))
    }

    pub fn permits(&self, src_type: &str, edge_type: &str, dst_type: &str) -> bool {
        self.triples
            .contains(&(src_type.to_owned(), edge_type.to_owned(), dst_type.to_owned()))
    }

    pub fn has_node_type(&self, t: &str) -> bool {
        self.node_types.iter().any(|n| n == t)
    }

    pub fn edge_type_index(&self, t: &str) -> Option<usize> {
        self.edge_types.iter().position(|e| e == t)
    }

    pub fn node_type_index(&self, t: &str) -> Option<usize> {
        self.node_types.iter().position(|n| n == t)
    }

    pub fn is_repeatable(&self, edge_type: &str) -> bool {
        self.repeatable.contains(edge_type)
    }

    pub fn has_repeatable(&self) -> bool {
        !self.repeatable.is_empty()
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn is_user_type(&self, t: &str) -> bool {
        self.roles.user == t
    }

    pub fn is_category_type(&self, t: &str) -> bool {
        self.roles.categories.iter().any(|c| c == t)
    }

    /// Content items: every node type that is neither the user type nor a category type.
    pub fn is_item_type(&self, t: &str) -> bool {
        !self.is_user_type(t) && !self.is_category_type(t)
    }

    /// Edge types a user may perform, in declaration order.
    pub fn user_action_types(&self) -> Vec<&str> {
        self.edge_types
            .iter()
            .filter(|e| {
                self.triples
                    .iter()
                    .any(|(s, t, _)| t == *e && *s == self.roles.user)
            })
            .map(String::as_str)
            .collect()
    }
}

fn check_names(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.trim().is_empty() {
            return Err(Error::Schema(format!("empty {kind} type name")));
        }
        if n.contains(INVERSE_MARKER) {
            return Err(Error::Schema(format!(
                "{kind} type `{n}` contains the reserved inverse marker"
            )));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Schema(format!("duplicate {kind} type `{n}`")));
        }
    }
    Ok(())
}

fn default_roles(node_types: &[String], edge_types: &[String]) -> Roles {
    let user = node_types
        .iter()
        .find(|t| *t == "user")
        .unwrap_or(&node_types[0])
        .clone();
    let categories = node_types
        .iter()
        .filter(|t| matches!(t.as_str(), "category" | "tag"))
        .cloned()
        .collect();
    let membership = edge_types
        .iter()
        .find(|e| matches!(e.as_str(), "belongs to" | "belongs-to" | "belongs_to"))
        .cloned()
        .unwrap_or_else(|| "belongs to".to_owned());
    let follow = edge_types
        .iter()
        .find(|e| *e == "follows")
        .cloned()
        .unwrap_or_else(|| "follows".to_owned());
    Roles {
        user,
        categories,
        membership,
        follow,
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schema::from_json(&text)
}
