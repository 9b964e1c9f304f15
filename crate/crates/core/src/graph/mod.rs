//! Package attribute graph: BFS depth from directly-accessed packages,
//! PD/PR closures and their aggregates.

mod export;
mod resolve;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packages::{Catalog, Manager, PackageKey};

pub use export::{to_dot, to_node_link, NodeLink, NodeLinkEdge, NodeLinkNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeAttrs {
    pub d_p: f64,
    pub vuln_count: usize,
    /// 1 for directly-accessed packages; shortest distance + 1 otherwise.
    pub depth: Option<u32>,
}

/// Dependent → dependency edges over packages reachable from `{d_p < 1}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphRepr", from = "GraphRepr")]
pub struct PackageAttrGraph {
    pub nodes: BTreeMap<PackageKey, NodeAttrs>,
    pub edges: BTreeSet<(PackageKey, PackageKey)>,
    /// Declared dependencies (of reachable packages) matching nothing installed.
    pub dangling: usize,
    /// Catalog packages left out because nothing reaches them.
    pub unreachable: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphNode {
    key: PackageKey,
    #[serde(flatten)]
    attrs: NodeAttrs,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<GraphNode>,
    edges: Vec<(PackageKey, PackageKey)>,
    dangling: usize,
    unreachable: usize,
}

impl From<PackageAttrGraph> for GraphRepr {
    fn from(g: PackageAttrGraph) -> Self {
        Self {
            nodes: g.nodes.into_iter().map(|(key, attrs)| GraphNode { key, attrs }).collect(),
            edges: g.edges.into_iter().collect(),
            dangling: g.dangling,
            unreachable: g.unreachable,
        }
    }
}

impl From<GraphRepr> for PackageAttrGraph {
    fn from(r: GraphRepr) -> Self {
        Self {
            nodes: r.nodes.into_iter().map(|n| (n.key, n.attrs)).collect(),
            edges: r.edges.into_iter().collect(),
            dangling: r.dangling,
            unreachable: r.unreachable,
        }
    }
}

/// Per-node inputs for [`build_from_adjacency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeInput {
    pub d_p: f64,
    pub vuln_count: usize,
}

/// BFS over an already-resolved adjacency. Start nodes are those with
/// `d_p < 1`, visited in key order; neighbours in key order.
pub fn build_from_adjacency(
    nodes: &BTreeMap<PackageKey, NodeInput>,
    deps: &BTreeMap<PackageKey, BTreeSet<PackageKey>>,
) -> PackageAttrGraph {
    let mut g = PackageAttrGraph::default();
    let mut queue = VecDeque::new();
    for (k, n) in nodes {
        if n.d_p < 1.0 {
            g.nodes.insert(k.clone(), attrs(n, 1));
            queue.push_back(k.clone());
        }
    }
    while let Some(u) = queue.pop_front() {
        let du = g.nodes[&u].depth.unwrap_or(1);
        for v in deps.get(&u).into_iter().flatten() {
            if *v == u {
                continue;
            }
            let Some(n) = nodes.get(v) else { continue };
            g.edges.insert((u.clone(), v.clone()));
            if !g.nodes.contains_key(v) {
                g.nodes.insert(v.clone(), attrs(n, du + 1));
                queue.push_back(v.clone());
            }
        }
    }
    g.unreachable = nodes.len() - g.nodes.len();
    g
}

fn attrs(n: &NodeInput, depth: u32) -> NodeAttrs {
    NodeAttrs {
        d_p: n.d_p,
        vuln_count: n.vuln_count,
        depth: Some(depth),
    }
}

/// Builds the graph for a catalog. Packages missing from `d_p` count as
/// unused (1.0); missing from `vulns`, as having none.
pub fn build_graph(
    catalog: &Catalog,
    d_p: &BTreeMap<PackageKey, f64>,
    vulns: &BTreeMap<PackageKey, usize>,
) -> PackageAttrGraph {
    let resolver = resolve::Resolver::new(catalog);
    let mut nodes = BTreeMap::new();
    let mut deps = BTreeMap::new();
    let mut dangling = BTreeMap::new();
    for p in catalog.iter() {
        let k = p.key();
        let r = resolver.resolve(p);
        nodes.insert(
            k.clone(),
            NodeInput {
                d_p: d_p.get(&k).copied().unwrap_or(1.0),
                vuln_count: vulns.get(&k).copied().unwrap_or(0),
            },
        );
        dangling.insert(k.clone(), r.dangling);
        deps.insert(k, r.deps);
    }
    let mut g = build_from_adjacency(&nodes, &deps);
    g.dangling = g.nodes.keys().map(|k| dangling[k]).sum();
    g
}

impl PackageAttrGraph {
    pub fn contains(&self, k: &PackageKey) -> bool {
        self.nodes.contains_key(k)
    }

    fn adjacency(&self, reverse: bool) -> BTreeMap<&PackageKey, Vec<&PackageKey>> {
        let mut adj: BTreeMap<&PackageKey, Vec<&PackageKey>> = BTreeMap::new();
        for (a, b) in &self.edges {
            let (from, to) = if reverse { (b, a) } else { (a, b) };
            adj.entry(from).or_default().push(to);
        }
        adj
    }

    fn closure(&self, p: &PackageKey, reverse: bool) -> Result<BTreeSet<PackageKey>> {
        if !self.contains(p) {
            return Err(Error::UnknownPackage(p.to_string()));
        }
        let adj = self.adjacency(reverse);
        let mut seen = BTreeSet::new();
        let mut stack = vec![p];
        while let Some(u) = stack.pop() {
            for &v in adj.get(u).into_iter().flatten() {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.remove(p);
        Ok(seen.into_iter().cloned().collect())
    }
}

/// Packages `p` depends on, directly or transitively.
pub fn pd_set(g: &PackageAttrGraph, p: &PackageKey) -> Result<BTreeSet<PackageKey>> {
    g.closure(p, false)
}

/// Packages depending on `p`, directly or transitively.
pub fn pr_set(g: &PackageAttrGraph, p: &PackageKey) -> Result<BTreeSet<PackageKey>> {
    g.closure(p, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdAggregate {
    pub avg_d_p: Option<f64>,
    pub total_vulns: usize,
}

pub fn pd_aggregate(g: &PackageAttrGraph, p: &PackageKey) -> Result<PdAggregate> {
    let pd = pd_set(g, p)?;
    let attrs: Vec<&NodeAttrs> = pd.iter().map(|k| &g.nodes[k]).collect();
    Ok(PdAggregate {
        avg_d_p: (!attrs.is_empty()).then(|| attrs.iter().map(|a| a.d_p).sum::<f64>() / attrs.len() as f64),
        total_vulns: attrs.iter().map(|a| a.vuln_count).sum(),
    })
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Depth and closure sizes of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub key: PackageKey,
    pub depth: Option<u32>,
    pub d_p: f64,
    pub vuln_count: usize,
    pub pd: usize,
    pub pr: usize,
    pub pd_avg_d_p: Option<f64>,
    pub pd_vulns: usize,
}

pub fn node_summaries(g: &PackageAttrGraph) -> Vec<NodeSummary> {
    g.nodes
        .iter()
        .map(|(k, a)| {
            let agg = pd_aggregate(g, k).expect("node exists");
            NodeSummary {
                key: k.clone(),
                depth: a.depth,
                d_p: a.d_p,
                vuln_count: a.vuln_count,
                pd: pd_set(g, k).expect("node exists").len(),
                pr: pr_set(g, k).expect("node exists").len(),
                pd_avg_d_p: agg.avg_d_p,
                pd_vulns: agg.total_vulns,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCorrelations {
    pub nodes: usize,
    pub cor_d_pd: Option<f64>,
    pub cor_d_pr: Option<f64>,
}

/// Correlation of depth with |PD| and |PR| over nodes of `manager`, or all
/// nodes when `None`.
pub fn depth_correlations(g: &PackageAttrGraph, manager: Option<Manager>) -> DepthCorrelations {
    correlations_of(&node_summaries(g), manager)
}

pub fn correlations_of(summaries: &[NodeSummary], manager: Option<Manager>) -> DepthCorrelations {
    let rows: Vec<&NodeSummary> = summaries
        .iter()
        .filter(|s| manager.is_none_or(|m| s.key.manager == m))
        .filter(|s| s.depth.is_some())
        .collect();
    let d: Vec<f64> = rows.iter().map(|s| s.depth.unwrap_or(0) as f64).collect();
    let pd: Vec<f64> = rows.iter().map(|s| s.pd as f64).collect();
    let pr: Vec<f64> = rows.iter().map(|s| s.pr as f64).collect();
    DepthCorrelations {
        nodes: rows.len(),
        cor_d_pd: pearson(&d, &pd),
        cor_d_pr: pearson(&d, &pr),
    }
}
