//! End-to-end pipeline, the analysis bundle, and the tables and plot data
//! derived from it.

mod stats;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::debloat::{self, materialize, DebloatResult, KeepList, Manifest, OutputFormat};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::fs::{FileSet, ImageSource, Origin};
use crate::graph::{build_graph, PackageAttrGraph};
use crate::packages::{self, Catalog, PackageKey, PackageMetric, Rules};
use crate::trace::{self, TraceOptions, TraceStats};
use crate::vuln::{self, ReportFormat, VulnDiff};

pub use stats::{bloat_degree_histogram, cdf_points, pareto_files, violin_series, ParetoEntry, ViolinSeries};
pub use tables::{render_plots, render_tables, PARETO_FRACTION};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds to 6 decimals, the precision of every ratio in serialized output.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    /// Hex SHA-256 of the file, or of the inventory manifest for a directory.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub inputs: Vec<InputRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageSection {
    pub catalog: Catalog,
    pub metrics: Vec<PackageMetric>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageVulns {
    pub key: PackageKey,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnSection {
    pub diff: VulnDiff,
    pub per_package: Vec<PackageVulns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub container_id: String,
    pub provenance: Provenance,
    pub trace: TraceStats,
    pub accessed_paths: usize,
    pub debloat: DebloatResult,
    pub packages: PackageSection,
    #[serde(default)]
    pub vuln: Option<VulnSection>,
    pub graph: PackageAttrGraph,
    pub diagnostics: Diagnostics,
}

impl AnalysisBundle {
    /// The pre-debloat inventory, rebuilt as retained ∪ bloat.
    pub fn original_files(&self) -> FileSet {
        FileSet::from_entries(
            Origin::Derived,
            self.debloat.retained.iter().chain(self.debloat.bloat.iter()).cloned(),
        )
    }

    pub fn vuln_counts(&self) -> BTreeMap<PackageKey, usize> {
        self.vuln
            .iter()
            .flat_map(|v| &v.per_package)
            .map(|p| (p.key.clone(), p.count))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            location: format!("$.{}", e.path()),
            message: e.inner().to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: ImageSource,
    pub trace: PathBuf,
    pub trace_options: TraceOptions,
    pub vuln_report: Option<PathBuf>,
    /// Guessed from the document when unset.
    pub vuln_format: Option<ReportFormat>,
    /// Bundled ML rules when unset.
    pub rules: Option<PathBuf>,
    pub keep: Vec<String>,
    /// Output directory; `None` skips writing.
    pub out: Option<PathBuf>,
    pub write_tar: bool,
    /// Defaults to a digest of the inputs.
    pub container_id: Option<String>,
    /// RFC 3339; falls back to `SOURCE_DATE_EPOCH`, then the clock.
    pub timestamp: Option<String>,
    /// Input paths are recorded relative to this directory when set.
    pub path_base: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(source: ImageSource, trace: impl Into<PathBuf>) -> Self {
        Self {
            source,
            trace: trace.into(),
            trace_options: TraceOptions::default(),
            vuln_report: None,
            vuln_format: None,
            rules: None,
            keep: Vec::new(),
            out: None,
            write_tar: false,
            container_id: None,
            timestamp: None,
            path_base: None,
        }
    }
}

fn read_input(role: &str, path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingInput(format!("{role} {}", path.display())));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(h.finalize()))
}

fn display_path(p: &Path, base: Option<&Path>) -> String {
    base.and_then(|b| p.strip_prefix(b).ok())
        .unwrap_or(p)
        .to_string_lossy()
        .into_owned()
}

fn timestamp(pinned: Option<&str>) -> String {
    if let Some(t) = pinned {
        return t.to_string();
    }
    let epoch = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| Utc.timestamp_opt(s, 0).single());
    epoch
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Runs every stage and, when `config.out` is set, writes the output tree.
/// Fatal errors abort; everything else lands in `bundle.diagnostics`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisBundle> {
    let bundle = analyze(config)?;
    if let Some(out) = &config.out {
        write_outputs(&bundle, out)?;
        if config.write_tar {
            let mut diag = Diagnostics::new();
            materialize(&bundle.debloat.retained, &config.source, &out.join("debloated.tar"), OutputFormat::Tar, &mut diag)?;
        }
    }
    Ok(bundle)
}

/// The pipeline without writing anything.
pub fn analyze(config: &PipelineConfig) -> Result<AnalysisBundle> {
    let mut diag = Diagnostics::new();
    let base = config.path_base.as_deref();
    let mut inputs = Vec::new();

    for p in config.source.input_paths() {
        if !p.exists() {
            return Err(Error::MissingInput(format!("image {}", p.display())));
        }
    }
    let original = config.source.load(&mut diag)?;
    match &config.source {
        ImageSource::Rootfs(dir) => inputs.push(InputRecord {
            role: "rootfs".into(),
            path: display_path(dir, base),
            sha256: sha256_hex(Manifest::of(&original).render().as_bytes()),
        }),
        ImageSource::Tar(p) => inputs.push(InputRecord {
            role: "tar".into(),
            path: display_path(p, base),
            sha256: file_digest(p)?,
        }),
        ImageSource::Layers(ps) => {
            for (i, p) in ps.iter().enumerate() {
                inputs.push(InputRecord {
                    role: format!("layer{i}"),
                    path: display_path(p, base),
                    sha256: file_digest(p)?,
                });
            }
        }
    }

    let trace_bytes = read_input("--trace", &config.trace)?;
    inputs.push(InputRecord {
        role: "trace".into(),
        path: display_path(&config.trace, base),
        sha256: sha256_hex(&trace_bytes),
    });
    let access = trace::parse_trace(BufReader::new(trace_bytes.as_slice()), &config.trace_options, &mut diag)?;

    let keep = KeepList::new(&config.keep)?;
    let mut result = debloat::debloat(&original, &access, &keep, &mut diag)?;
    result.d_c = round6(result.d_c);

    let rules = match &config.rules {
        Some(p) => {
            let bytes = read_input("--rules", p)?;
            inputs.push(InputRecord {
                role: "rules".into(),
                path: display_path(p, base),
                sha256: sha256_hex(&bytes),
            });
            Rules::parse(&String::from_utf8_lossy(&bytes))?
        }
        None => Rules::bundled(),
    };
    let catalog = packages::detect_from_source(&original, &config.source, &rules, &mut diag)?;
    let mut metrics = packages::package_metrics(&catalog, &result.bloat);
    for m in &mut metrics {
        m.d_p = round6(m.d_p);
    }

    let vuln = match &config.vuln_report {
        Some(p) => {
            let bytes = read_input("--vuln-report", p)?;
            inputs.push(InputRecord {
                role: "vuln-report".into(),
                path: display_path(p, base),
                sha256: sha256_hex(&bytes),
            });
            let text = String::from_utf8_lossy(&bytes);
            let format = config.vuln_format.unwrap_or_else(|| vuln::detect_format(&text));
            let matches = vuln::load_report_as(&text, format, &mut diag)?;
            let mut diff = vuln::surviving_cves(&matches, &result.bloat, &catalog, &mut diag);
            diff.reduction = diff.reduction.map(round6);
            let per_package = vuln::vuln_counts(&matches, &catalog)
                .into_iter()
                .map(|(key, count)| PackageVulns { key, count })
                .collect();
            Some(VulnSection { diff, per_package })
        }
        None => None,
    };

    let d_p: BTreeMap<PackageKey, f64> = metrics.iter().map(|m| (m.key.clone(), m.d_p)).collect();
    let counts: BTreeMap<PackageKey, usize> = vuln
        .iter()
        .flat_map(|v| &v.per_package)
        .map(|p| (p.key.clone(), p.count))
        .collect();
    let graph = build_graph(&catalog, &d_p, &counts);

    let container_id = config.container_id.clone().unwrap_or_else(|| {
        let joined: Vec<&str> = inputs.iter().map(|i| i.sha256.as_str()).collect();
        sha256_hex(joined.join("\n").as_bytes())[..12].to_string()
    });

    Ok(AnalysisBundle {
        container_id,
        provenance: Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            timestamp: timestamp(config.timestamp.as_deref()),
            inputs,
        },
        trace: access.stats.clone(),
        accessed_paths: access.len(),
        debloat: result,
        packages: PackageSection { catalog, metrics },
        vuln,
        graph,
        diagnostics: diag,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `bundle.json`, `manifest.tsv`, `tables/*.csv` and `plots/*`
/// under `out`, returning the written paths relative to it.
pub fn write_outputs(bundle: &AnalysisBundle, out: &Path) -> Result<Vec<String>> {
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    files.insert("bundle.json".into(), bundle.to_json());
    files.insert("manifest.tsv".into(), Manifest::of(&bundle.debloat.retained).render());
    for (name, body) in render_tables(bundle)? {
        files.insert(format!("tables/{name}"), body);
    }
    for (name, body) in render_plots(bundle)? {
        files.insert(format!("plots/{name}"), body);
    }
    for (name, body) in &files {
        write_file(&out.join(name), body)?;
    }
    Ok(files.into_keys().collect())
}

/// Regenerates tables and plots from a saved bundle alone.
pub fn write_derived(bundle: &AnalysisBundle, out: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for (name, body) in render_tables(bundle)? {
        write_file(&out.join("tables").join(&name), &body)?;
        written.push(format!("tables/{name}"));
    }
    for (name, body) in render_plots(bundle)? {
        write_file(&out.join("plots").join(&name), &body)?;
        written.push(format!("plots/{name}"));
    }
    Ok(written)
}
