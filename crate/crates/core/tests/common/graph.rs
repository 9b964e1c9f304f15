//! Brute-force reachability and shortest paths for graph checks.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bloatlens::graph::{build_from_adjacency, pd_aggregate, pd_set, pr_set, NodeInput};
use bloatlens::packages::{Manager, PackageKey};

pub fn key(i: usize) -> PackageKey {
    PackageKey::new(Manager::Apt, format!("p{i:03}"), "1")
}

/// Reachability by repeated squaring of the boolean adjacency matrix.
#[allow(clippy::needless_range_loop)]
pub fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    loop {
        let mut next = r.clone();
        for i in 0..n {
            for k in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

/// All-pairs shortest path lengths (Floyd-Warshall).
pub fn distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<u32>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        d[a][b] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

struct Case {
    n: usize,
    edges: Vec<(usize, usize)>,
    d_p: Vec<f64>,
    vulns: Vec<usize>,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(1..=100);
    let p = rng.gen_range(0.0..0.08);
    let mut edges = super::random_dag(rng, n, p);
    // Relabel so edges do not always point to higher indices.
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    for e in &mut edges {
        *e = (perm[e.0], perm[e.1]);
    }
    let d_p = (0..n)
        .map(|_| if rng.gen_bool(0.2) { (rng.gen_range(0..100) as f64) / 100.0 } else { 1.0 })
        .collect();
    let vulns = (0..n).map(|_| rng.gen_range(0..5)).collect();
    Case { n, edges, d_p, vulns }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

/// `cases` random DAGs of at most 100 nodes: node set, edges, depths,
/// PD/PR sets, PD aggregates and duality. Returns how many nodes had a
/// nonempty PD.
pub fn run_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nontrivial = 0;
    for case in 0..cases {
        let c = random_case(&mut rng);
        let nodes: BTreeMap<PackageKey, NodeInput> = (0..c.n)
            .map(|i| (key(i), NodeInput { d_p: c.d_p[i], vuln_count: c.vulns[i] }))
            .collect();
        let mut deps: BTreeMap<PackageKey, BTreeSet<PackageKey>> = BTreeMap::new();
        for &(a, b) in &c.edges {
            deps.entry(key(a)).or_default().insert(key(b));
        }
        let g = build_from_adjacency(&nodes, &deps);

        let reach = closure(c.n, &c.edges);
        let dist = distances(c.n, &c.edges);
        let starts: Vec<usize> = (0..c.n).filter(|&i| c.d_p[i] < 1.0).collect();
        let depth = |v: usize| starts.iter().filter_map(|&s| dist[s][v]).min().map(|d| d + 1);

        let members: BTreeSet<usize> = (0..c.n).filter(|&v| depth(v).is_some()).collect();
        let got_members: BTreeSet<usize> = g.nodes.keys().map(|k| k.name[1..].parse().unwrap()).collect();
        ensure!(got_members == members, "case {case}: node set");
        let want_edges: BTreeSet<(PackageKey, PackageKey)> = c
            .edges
            .iter()
            .filter(|(a, _)| members.contains(a))
            .map(|&(a, b)| (key(a), key(b)))
            .collect();
        ensure!(g.edges == want_edges, "case {case}: edges");

        let mut pd_of = BTreeMap::new();
        let mut pr_of = BTreeMap::new();
        for &p in &members {
            let kp = key(p);
            ensure!(g.nodes[&kp].depth == depth(p), "case {case}: depth of {p}");
            let pd: BTreeSet<PackageKey> = (0..c.n).filter(|&q| q != p && reach[p][q]).map(key).collect();
            let got_pd = pd_set(&g, &kp).map_err(|e| e.to_string())?;
            ensure!(got_pd == pd, "case {case}: PD({p})");
            let pr: BTreeSet<PackageKey> = members
                .iter()
                .copied()
                .filter(|&q| q != p && reach[q][p])
                .map(key)
                .collect();
            let got_pr = pr_set(&g, &kp).map_err(|e| e.to_string())?;
            ensure!(got_pr == pr, "case {case}: PR({p})");

            let agg = pd_aggregate(&g, &kp).map_err(|e| e.to_string())?;
            let idx: Vec<usize> = (0..c.n).filter(|&q| q != p && reach[p][q]).collect();
            ensure!(
                agg.total_vulns == idx.iter().map(|&q| c.vulns[q]).sum::<usize>(),
                "case {case}: PD vulns of {p}"
            );
            match agg.avg_d_p {
                None => ensure!(idx.is_empty(), "case {case}: PD average of {p} absent"),
                Some(a) => {
                    let want = idx.iter().map(|&q| c.d_p[q]).sum::<f64>() / idx.len() as f64;
                    ensure!((a - want).abs() < 1e-12, "case {case}: PD average of {p}");
                }
            }
            if !idx.is_empty() {
                nontrivial += 1;
            }
            pd_of.insert(kp.clone(), got_pd);
            pr_of.insert(kp, got_pr);
        }
        for (a, pd_a) in &pd_of {
            for (b, pr_b) in &pr_of {
                ensure!(pd_a.contains(b) == pr_b.contains(a), "case {case}: duality {a} {b}");
            }
        }
    }
    Ok(nontrivial)
}
