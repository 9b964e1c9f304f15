//! Node-link JSON and Graphviz DOT renderings.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::PackageAttrGraph;
use crate::packages::Manager;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkNode {
    pub id: String,
    pub manager: Manager,
    pub name: String,
    pub version: String,
    pub depth: Option<u32>,
    pub d_p: f64,
    pub vulns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLinkEdge {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLink {
    pub directed: bool,
    pub nodes: Vec<NodeLinkNode>,
    pub links: Vec<NodeLinkEdge>,
}

pub fn to_node_link(g: &PackageAttrGraph) -> NodeLink {
    NodeLink {
        directed: true,
        nodes: g
            .nodes
            .iter()
            .map(|(k, a)| NodeLinkNode {
                id: k.to_string(),
                manager: k.manager,
                name: k.name.clone(),
                version: k.version.clone(),
                depth: a.depth,
                d_p: a.d_p,
                vulns: a.vuln_count,
            })
            .collect(),
        links: g
            .edges
            .iter()
            .map(|(a, b)| NodeLinkEdge {
                source: a.to_string(),
                target: b.to_string(),
            })
            .collect(),
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Labels carry name, depth, d_p and vulnerability count.
pub fn to_dot(g: &PackageAttrGraph) -> String {
    let mut out = String::from("digraph packages {\n  node [shape=box];\n");
    for (k, a) in &g.nodes {
        let depth = a.depth.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        let label = format!("{}\\nD={} d_p={:.2} |V|={}", k.name, depth, a.d_p, a.vuln_count);
        writeln!(out, "  {} [label={}];", quote(&k.to_string()), quote(&label).replace("\\\\n", "\\n")).unwrap();
    }
    for (a, b) in &g.edges {
        writeln!(out, "  {} -> {};", quote(&a.to_string()), quote(&b.to_string())).unwrap();
    }
    out.push_str("}\n");
    out
}
