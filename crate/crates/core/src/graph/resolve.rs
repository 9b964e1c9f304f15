//! Maps declared dependencies onto installed catalog packages.

use std::collections::{BTreeMap, BTreeSet};

use crate::packages::{canonical_name, Catalog, DependencySpec, Manager, PackageKey, PackageRecord};

/// Multi-arch records are named `pkg:arch`; dependencies name `pkg`.
fn apt_base(name: &str) -> &str {
    name.split(':').next().unwrap_or(name)
}

fn lookup_name(m: Manager, name: &str) -> String {
    match m {
        Manager::Apt => apt_base(name).to_string(),
        Manager::Pip => canonical_name(name),
        Manager::Conda => name.to_ascii_lowercase(),
    }
}

pub(crate) struct Resolver<'a> {
    by_name: BTreeMap<(Manager, String), Vec<&'a PackageRecord>>,
    provides: BTreeMap<String, Vec<&'a PackageRecord>>,
}

/// What one package's declared dependencies resolved to.
pub(crate) struct Resolved {
    pub deps: BTreeSet<PackageKey>,
    pub dangling: usize,
}

impl<'a> Resolver<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        let mut by_name: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut provides: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for p in catalog.iter() {
            by_name.entry((p.manager, lookup_name(p.manager, &p.name))).or_default().push(p);
            if p.manager == Manager::Apt {
                for v in &p.provides {
                    provides.entry(apt_base(v).to_string()).or_default().push(p);
                }
            }
        }
        Self { by_name, provides }
    }

    fn candidates(&self, from: &PackageRecord, name: &str) -> Vec<&'a PackageRecord> {
        let key = (from.manager, lookup_name(from.manager, name));
        let mut found = self.by_name.get(&key).cloned().unwrap_or_default();
        match from.manager {
            Manager::Apt => {
                if found.is_empty() {
                    found = self.provides.get(&key.1).cloned().unwrap_or_default();
                }
            }
            Manager::Pip | Manager::Conda => {
                let local: Vec<_> = found.iter().copied().filter(|p| p.location == from.location).collect();
                if !local.is_empty() {
                    found = local;
                }
            }
        }
        found
    }

    pub fn resolve(&self, from: &PackageRecord) -> Resolved {
        let me = from.key();
        let mut deps = BTreeSet::new();
        let mut dangling = 0;
        for spec in &from.declared_deps {
            let hits = self.resolve_spec(from, spec);
            if hits.is_empty() {
                dangling += 1;
            }
            deps.extend(hits.into_iter().filter(|k| *k != me));
        }
        Resolved { deps, dangling }
    }

    /// Every installed alternative is linked.
    fn resolve_spec(&self, from: &PackageRecord, spec: &DependencySpec) -> BTreeSet<PackageKey> {
        spec.alternatives
            .iter()
            .flat_map(|a| self.candidates(from, &a.name))
            .map(PackageRecord::key)
            .collect()
    }
}
