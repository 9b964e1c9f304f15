//! CSV tables and plot-ready JSON, computed from an [`AnalysisBundle`] only.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::stats::{bloat_degree_histogram, cdf_points, pareto_files, violin_series};
use super::{round6, AnalysisBundle};
use crate::error::Result;
use crate::graph::{correlations_of, node_summaries, to_dot, to_node_link};
use crate::packages::{
    category_breakdown, quartile_summary, size_reduction, Breakdown, Functionality, Manager, OwnerIndex,
    PackageMetric,
};
use crate::vuln::severity_table;

/// Share of total size the Pareto series cover.
pub const PARETO_FRACTION: f64 = 0.8;

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn opt6(x: Option<f64>) -> String {
    x.map(f6).unwrap_or_default()
}

fn csv_of(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn json_of<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plot data serializes");
    s.push('\n');
    s
}

/// `ALL` followed by each manager that has packages.
fn groups(metrics: &[PackageMetric]) -> Vec<(String, Vec<&PackageMetric>)> {
    let mut out = vec![("ALL".to_string(), metrics.iter().collect::<Vec<_>>())];
    for m in Manager::ALL {
        let sel: Vec<_> = metrics.iter().filter(|p| p.key.manager == m).collect();
        if !sel.is_empty() {
            out.push((m.as_str().to_string(), sel));
        }
    }
    out
}

fn breakdowns(bundle: &AnalysisBundle) -> Vec<(&'static str, Breakdown)> {
    let catalog = &bundle.packages.catalog;
    let index = OwnerIndex::build(catalog);
    vec![
        ("original", category_breakdown(&bundle.original_files(), &index, catalog)),
        ("retained", category_breakdown(&bundle.debloat.retained, &index, catalog)),
        ("bloat", category_breakdown(&bundle.debloat.bloat, &index, catalog)),
    ]
}

pub fn render_tables(bundle: &AnalysisBundle) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let d = &bundle.debloat;
    let metrics = &bundle.packages.metrics;

    out.insert(
        "container.csv".into(),
        csv_of(
            &["container", "s_c", "s_c_prime", "d_c", "files", "retained_files", "bloat_files", "accessed_paths"],
            vec![vec![
                bundle.container_id.clone(),
                d.s_c.to_string(),
                d.s_c_prime.to_string(),
                f6(d.d_c),
                (d.retained.len() + d.bloat.len()).to_string(),
                d.retained.len().to_string(),
                d.bloat.len().to_string(),
                bundle.accessed_paths.to_string(),
            ]],
        ),
    );

    let vulns = bundle.vuln_counts();
    out.insert(
        "packages.csv".into(),
        csv_of(
            &["manager", "name", "version", "functionality", "files", "size", "d_p", "vulns"],
            metrics
                .iter()
                .map(|m| {
                    vec![
                        m.key.manager.to_string(),
                        m.key.name.clone(),
                        m.key.version.clone(),
                        m.functionality.as_str().to_string(),
                        m.files.to_string(),
                        m.size.to_string(),
                        f6(m.d_p),
                        vulns.get(&m.key).copied().unwrap_or(0).to_string(),
                    ]
                })
                .collect(),
        ),
    );

    let mut q_rows = Vec::new();
    let mut r_rows = Vec::new();
    for (label, sel) in groups(metrics) {
        let values: Vec<f64> = sel.iter().map(|m| m.d_p).collect();
        if let Some(q) = quartile_summary(&values) {
            q_rows.push(vec![label.clone(), q.count.to_string(), f6(q.mean), f6(q.q1), f6(q.q2), f6(q.q3)]);
        }
        let pairs: Vec<(u64, f64)> = sel.iter().map(|m| (m.size, m.d_p)).collect();
        let total: u64 = pairs.iter().map(|p| p.0).sum();
        r_rows.push(vec![label, sel.len().to_string(), total.to_string(), opt6(size_reduction(&pairs))]);
    }
    out.insert("quartiles.csv".into(), csv_of(&["manager", "count", "mean", "q1", "q2", "q3"], q_rows));
    out.insert("size_reduction.csv".into(), csv_of(&["manager", "packages", "size", "r"], r_rows));

    let mut b_rows = Vec::new();
    for (scope, b) in breakdowns(bundle) {
        for (axis, bytes) in [("manager", &b.manager_bytes), ("functionality", &b.functionality_bytes)] {
            for (cat, n) in bytes {
                let share = if b.total_size == 0 {
                    if cat == "NON-PACKAGE" { 1.0 } else { 0.0 }
                } else {
                    *n as f64 / b.total_size as f64
                };
                b_rows.push(vec![scope.to_string(), axis.to_string(), cat.clone(), n.to_string(), f6(share)]);
            }
        }
        b_rows.push(vec![scope.to_string(), "overlap".into(), "FILES".into(), b.overlap.to_string(), String::new()]);
    }
    out.insert("breakdown.csv".into(), csv_of(&["scope", "axis", "category", "bytes", "share"], b_rows));

    if let Some(v) = &bundle.vuln {
        out.insert("severity.csv".into(), severity_table(&v.diff).to_csv());
        let mut rows = Vec::new();
        for (status, list) in [("removed", &v.diff.removed), ("retained", &v.diff.retained)] {
            for m in list {
                let locs: Vec<&str> = m.locations.iter().map(String::as_str).collect();
                rows.push(vec![
                    m.cve_id.clone(),
                    m.severity.to_string(),
                    m.pkg_name.clone(),
                    m.pkg_version.clone(),
                    status.to_string(),
                    locs.join(";"),
                ]);
            }
        }
        rows.sort();
        out.insert(
            "cves.csv".into(),
            csv_of(&["cve", "severity", "package", "version", "status", "locations"], rows),
        );
    }

    let summaries = node_summaries(&bundle.graph);
    out.insert(
        "graph_nodes.csv".into(),
        csv_of(
            &["manager", "name", "version", "depth", "d_p", "vulns", "pd", "pr", "pd_avg_d_p", "pd_vulns"],
            summaries
                .iter()
                .map(|s| {
                    vec![
                        s.key.manager.to_string(),
                        s.key.name.clone(),
                        s.key.version.clone(),
                        s.depth.map(|d| d.to_string()).unwrap_or_default(),
                        f6(s.d_p),
                        s.vuln_count.to_string(),
                        s.pd.to_string(),
                        s.pr.to_string(),
                        opt6(s.pd_avg_d_p),
                        s.pd_vulns.to_string(),
                    ]
                })
                .collect(),
        ),
    );
    let mut c_rows = Vec::new();
    for (label, m) in [("ALL", None), ("APT", Some(Manager::Apt)), ("PIP", Some(Manager::Pip)), ("CONDA", Some(Manager::Conda))] {
        let c = correlations_of(&summaries, m);
        c_rows.push(vec![label.to_string(), c.nodes.to_string(), opt6(c.cor_d_pd), opt6(c.cor_d_pr)]);
    }
    out.insert("correlations.csv".into(), csv_of(&["manager", "nodes", "cor_d_pd", "cor_d_pr"], c_rows));
    out.insert(
        "graph_summary.csv".into(),
        csv_of(
            &["nodes", "edges", "dangling", "unreachable"],
            vec![vec![
                bundle.graph.nodes.len().to_string(),
                bundle.graph.edges.len().to_string(),
                bundle.graph.dangling.to_string(),
                bundle.graph.unreachable.to_string(),
            ]],
        ),
    );
    Ok(out)
}

fn cdf_json(values: &[f64]) -> Value {
    json!(cdf_points(values)
        .into_iter()
        .map(|(v, p)| [round6(v), round6(p)])
        .collect::<Vec<_>>())
}

pub fn render_plots(bundle: &AnalysisBundle) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let metrics = &bundle.packages.metrics;

    let pareto = |fs| -> Result<Value> {
        Ok(json!(pareto_files(fs, PARETO_FRACTION)?
            .into_iter()
            .map(|e| json!({"path": e.path, "size": e.size, "cumulative": round6(e.cumulative)}))
            .collect::<Vec<_>>()))
    };
    let original = bundle.original_files();
    out.insert(
        "pareto.json".into(),
        json_of(&json!({
            "fraction": PARETO_FRACTION,
            "original": pareto(&original)?,
            "retained": pareto(&bundle.debloat.retained)?,
        })),
    );

    let mut hist = serde_json::Map::new();
    let mut dp_cdf = serde_json::Map::new();
    let mut by_manager = Vec::new();
    for (label, sel) in groups(metrics) {
        let values: Vec<f64> = sel.iter().map(|m| m.d_p).collect();
        hist.insert(label.clone(), json!(bloat_degree_histogram(&values)?));
        dp_cdf.insert(label.clone(), cdf_json(&values));
        by_manager.push(violin_series(label, &values));
    }
    let edges: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    out.insert("dp_histogram.json".into(), json_of(&json!({"bin_edges": edges, "counts": hist})));

    let summaries = node_summaries(&bundle.graph);
    let series = |f: &dyn Fn(&crate::graph::NodeSummary) -> f64| -> Vec<f64> { summaries.iter().map(f).collect() };
    out.insert(
        "cdf.json".into(),
        json_of(&json!({
            "d_p": dp_cdf,
            "depth": cdf_json(&series(&|s| s.depth.unwrap_or(0) as f64)),
            "pd": cdf_json(&series(&|s| s.pd as f64)),
            "pr": cdf_json(&series(&|s| s.pr as f64)),
        })),
    );

    let by_functionality: Vec<_> = [Functionality::Ml, Functionality::Generic]
        .into_iter()
        .map(|f| {
            let values: Vec<f64> = metrics.iter().filter(|m| m.functionality == f).map(|m| m.d_p).collect();
            violin_series(f.as_str(), &values)
        })
        .collect();
    out.insert(
        "violin.json".into(),
        json_of(&json!({"by_manager": by_manager, "by_functionality": by_functionality})),
    );

    let b: BTreeMap<&str, Value> = breakdowns(bundle)
        .into_iter()
        .map(|(scope, b)| {
            (
                scope,
                json!({
                    "total_size": b.total_size,
                    "by_manager": {
                        "APT": round6(b.by_manager.apt),
                        "PIP": round6(b.by_manager.pip),
                        "CONDA": round6(b.by_manager.conda),
                        "NON-PACKAGE": round6(b.by_manager.non_package),
                    },
                    "by_functionality": {
                        "ML": round6(b.by_functionality.ml),
                        "GENERIC": round6(b.by_functionality.generic),
                        "NON-PACKAGE": round6(b.by_functionality.non_package),
                    },
                    "overlap": b.overlap,
                }),
            )
        })
        .collect();
    out.insert("breakdown.json".into(), json_of(&b));

    if let Some(v) = &bundle.vuln {
        out.insert("severity.json".into(), json_of(&severity_table(&v.diff)));
    }
    out.insert("graph.json".into(), json_of(&to_node_link(&bundle.graph)));
    out.insert("graph.dot".into(), to_dot(&bundle.graph));
    Ok(out)
}
