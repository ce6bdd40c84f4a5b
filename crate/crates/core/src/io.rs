//! Reading and writing graphs as JSON documents, plus DOT export.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError, Label};

pub const FORMAT: &str = "bipartite/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported document format {0:?}")]
    BadFormat(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// On-disk description of a bipartite graph.
#[derive(Serialize, Deserialize)]
pub struct GraphDocument {
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub left: usize,
    pub right: Vec<Label>,
    pub edges: Vec<(usize, usize)>,
}

pub fn parse_graph(text: &str) -> Result<Graph, IoError> {
    let doc: GraphDocument = serde_json::from_str(text)?;
    if doc.format != FORMAT {
        return Err(IoError::BadFormat(doc.format));
    }
    Ok(Graph::new(doc.left, doc.right, &doc.edges)?)
}

/// Pretty JSON with edges in (left, right) lexicographic order; ends with a
/// newline.
pub fn serialize_graph(g: &Graph, name: Option<&str>) -> String {
    let doc = GraphDocument {
        format: FORMAT.to_string(),
        name: name.map(str::to_string),
        left: g.left_size(),
        right: g.labels().to_vec(),
        edges: g.edges(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

pub(crate) fn label_text(label: &[u32]) -> String {
    let parts: Vec<String> = label.iter().map(u32::to_string).collect();
    format!("<{}>", parts.join(","))
}

/// Deterministic DOT rendering: circle nodes L0.. on the left, box nodes
/// R0.. labelled by their sequences on the right, edges in lexicographic
/// order.
pub fn export_dot(g: &Graph, name: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("graph {name} {{\n"));
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle];\n");
    for x in 0..g.left_size() {
        out.push_str(&format!("  L{x};\n"));
    }
    out.push_str("  node [shape=box];\n");
    for u in 0..g.right_size() {
        out.push_str(&format!("  R{u} [label=\"{}\"];\n", label_text(g.label(u))));
    }
    for (x, u) in g.edges() {
        out.push_str(&format!("  L{x} -- R{u};\n"));
    }
    out.push_str("}\n");
    out
}
