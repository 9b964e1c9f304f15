//! Builds a package attribute graph from an adjacency map and prints the
//! closures of one node, the depth correlations and a DOT rendering.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::Result;
use bloatlens::graph::{build_from_adjacency, depth_correlations, pd_aggregate, pd_set, pr_set, to_dot, NodeInput};
use bloatlens::packages::{Manager, PackageKey};

fn main() -> Result<()> {
    let k = |n: &str| PackageKey::new(Manager::Apt, n, "1");
    let nodes: BTreeMap<PackageKey, NodeInput> = [
        ("app", 0.2, 1),
        ("libssl", 0.7, 5),
        ("libz", 0.9, 2),
        ("libc", 0.1, 3),
        ("perl", 1.0, 4),
    ]
    .into_iter()
    .map(|(n, d_p, vuln_count)| (k(n), NodeInput { d_p, vuln_count }))
    .collect();
    let mut deps: BTreeMap<PackageKey, BTreeSet<PackageKey>> = BTreeMap::new();
    deps.insert(k("app"), [k("libssl"), k("libc")].into());
    deps.insert(k("libssl"), [k("libz"), k("libc"), k("perl")].into());
    deps.insert(k("libz"), [k("libc")].into());

    let g = build_from_adjacency(&nodes, &deps);
    let ssl = k("libssl");
    println!("PD(libssl) = {:?}", pd_set(&g, &ssl)?.iter().map(|p| &p.name).collect::<Vec<_>>());
    println!("PR(libssl) = {:?}", pr_set(&g, &ssl)?.iter().map(|p| &p.name).collect::<Vec<_>>());
    println!("{:?}", pd_aggregate(&g, &ssl)?);
    println!("{:?}", depth_correlations(&g, None));
    print!("{}", to_dot(&g));
    Ok(())
}
