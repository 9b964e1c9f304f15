use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use bloatlens::debloat::{self, materialize, KeepList, OutputFormat};
use bloatlens::fs::ImageSource;
use bloatlens::graph::{to_dot, to_node_link};
use bloatlens::packages::{self, Rules};
use bloatlens::report::{self, AnalysisBundle, PipelineConfig};
use bloatlens::trace::{self, TraceOptions};
use bloatlens::vuln::severity_table;
use bloatlens::{Diagnostics, Error, Result};

#[derive(Parser)]
#[command(name = "bloatlens", version, about = "Container bloat analysis driven by a syscall trace")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ImageArgs {
    /// Unpacked root filesystem directory.
    #[arg(long)]
    rootfs: Option<PathBuf>,
    /// Flat filesystem tar.
    #[arg(long)]
    tar: Option<PathBuf>,
    /// Layer tars, lowest first.
    #[arg(long, num_args = 1..)]
    layers: Vec<PathBuf>,
}

impl ImageArgs {
    fn source(&self) -> ImageSource {
        match (&self.rootfs, &self.tar) {
            (Some(d), _) => ImageSource::Rootfs(d.clone()),
            (_, Some(t)) => ImageSource::Tar(t.clone()),
            _ => ImageSource::Layers(self.layers.clone()),
        }
    }
}

#[derive(Args)]
struct TraceArgs {
    /// strace log recorded with -f.
    #[arg(long)]
    trace: PathBuf,
    /// Host path of the container root in the trace.
    #[arg(long, default_value = "/")]
    root_prefix: String,
    /// Count failed calls as accesses.
    #[arg(long)]
    include_failed: bool,
    /// Glob of paths to retain regardless of the trace; repeatable.
    #[arg(long)]
    keep: Vec<String>,
}

impl TraceArgs {
    fn options(&self) -> TraceOptions {
        TraceOptions {
            root_prefix: self.root_prefix.clone(),
            include_failed: self.include_failed,
            initial_cwd: None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DebloatFormat {
    Dir,
    Tar,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the bundle, tables and plot data.
    Analyze {
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        trace: TraceArgs,
        /// Grype or Trivy JSON report.
        #[arg(long)]
        vuln_report: Option<PathBuf>,
        /// ML classification rule file.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write out/debloated.tar.
        #[arg(long = "emit-tar")]
        emit_tar: bool,
        #[arg(long)]
        container_id: Option<String>,
    },
    /// Materialize the debloated filesystem.
    Debloat {
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "tar")]
        format: DebloatFormat,
    },
    /// List detected packages as JSON.
    Packages {
        #[command(flatten)]
        image: ImageArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Severity table of CVEs before and after debloating.
    Vulns {
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        vuln_report: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
    },
    /// Package attribute graph.
    Graph {
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        vuln_report: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: GraphFormat,
    },
    /// Regenerate tables and plot data from a saved bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(image: &ImageArgs, t: &TraceArgs, vuln: Option<PathBuf>, rules: Option<PathBuf>) -> PipelineConfig {
    let mut c = PipelineConfig::new(image.source(), t.trace.clone());
    c.trace_options = t.options();
    c.keep = t.keep.clone();
    c.vuln_report = vuln;
    c.rules = rules;
    c
}

fn print_summary(b: &AnalysisBundle) {
    let d = &b.debloat;
    println!("container {}", b.container_id);
    println!("  size {} -> {} bytes, d_c {:.2}", d.s_c, d.s_c_prime, d.d_c);
    println!(
        "  files {} retained, {} bloat; {} accessed paths",
        d.retained.len(),
        d.bloat.len(),
        b.accessed_paths
    );
    println!("  packages {}, graph nodes {}", b.packages.metrics.len(), b.graph.nodes.len());
    if let Some(v) = &b.vuln {
        let t = severity_table(&v.diff);
        let pct = t.reduction_percent.map(|p| format!("{p}%")).unwrap_or_else(|| "-".into());
        println!("  CVEs {} -> {} ({pct})", t.total_before, t.total_after);
    }
}

fn warned(diag: &Diagnostics) -> bool {
    diag.has_warnings()
}

/// Returns whether any warning was raised.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze {
            image,
            trace,
            vuln_report,
            rules,
            out,
            emit_tar,
            container_id,
        } => {
            let mut c = config(&image, &trace, vuln_report, rules);
            c.out = Some(out);
            c.write_tar = emit_tar;
            c.container_id = container_id;
            let b = report::run_pipeline(&c)?;
            print_summary(&b);
            Ok(warned(&b.diagnostics))
        }
        Command::Debloat {
            image,
            trace,
            out,
            format,
        } => {
            let mut diag = Diagnostics::new();
            let source = image.source();
            let fs = source.load(&mut diag)?;
            let file = fs::File::open(&trace.trace).map_err(|_| Error::MissingInput(format!("--trace {}", trace.trace.display())))?;
            let access = trace::parse_trace(BufReader::new(file), &trace.options(), &mut diag)?;
            let keep = KeepList::new(&trace.keep)?;
            let r = debloat::debloat(&fs, &access, &keep, &mut diag)?;
            let format = match format {
                DebloatFormat::Dir => OutputFormat::Directory,
                DebloatFormat::Tar => OutputFormat::Tar,
            };
            materialize(&r.retained, &source, &out, format, &mut diag)?;
            let summary = json!({
                "s_c": r.s_c,
                "s_c_prime": r.s_c_prime,
                "d_c": report::round6(r.d_c),
                "retained_files": r.retained.len(),
                "bloat_files": r.bloat.len(),
                "output": out.to_string_lossy(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            Ok(warned(&diag))
        }
        Command::Packages { image, rules } => {
            let mut diag = Diagnostics::new();
            let source = image.source();
            let fs = source.load(&mut diag)?;
            let rules = match rules {
                Some(p) => Rules::parse(&fs::read_to_string(&p).map_err(|_| Error::MissingInput(format!("--rules {}", p.display())))?)?,
                None => Rules::bundled(),
            };
            let catalog = packages::detect_from_source(&fs, &source, &rules, &mut diag)?;
            println!("{}", serde_json::to_string_pretty(&catalog).expect("json"));
            Ok(warned(&diag))
        }
        Command::Vulns {
            image,
            trace,
            vuln_report,
            format,
        } => {
            let b = report::analyze(&config(&image, &trace, Some(vuln_report), None))?;
            let table = severity_table(&b.vuln.as_ref().expect("report given").diff);
            match format {
                TableFormat::Csv => print!("{}", table.to_csv()),
                TableFormat::Json => println!("{}", serde_json::to_string_pretty(&table).expect("json")),
            }
            Ok(warned(&b.diagnostics))
        }
        Command::Graph {
            image,
            trace,
            vuln_report,
            rules,
            format,
        } => {
            let b = report::analyze(&config(&image, &trace, vuln_report, rules))?;
            match format {
                GraphFormat::Json => println!("{}", serde_json::to_string_pretty(&to_node_link(&b.graph)).expect("json")),
                GraphFormat::Dot => print!("{}", to_dot(&b.graph)),
            }
            Ok(warned(&b.diagnostics))
        }
        Command::Report { bundle, out } => {
            let text = fs::read_to_string(&bundle).map_err(|_| Error::MissingInput(format!("--bundle {}", bundle.display())))?;
            let b = AnalysisBundle::from_json(&text)?;
            for p in report::write_derived(&b, &out)? {
                println!("{p}");
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BLOATLENS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(4),
        Err(e) => {
            let record = json!({"error": {"kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()}});
            let _ = writeln!(std::io::stderr(), "{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
