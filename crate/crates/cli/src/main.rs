//! `graphod`: generate graphs, inject outliers, run detectors and benchmarks.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when a benchmark had
//! failed trials (results are still written), 1 for other I/O errors.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphod::bundle;
use graphod::detectors::{self, DetectorKind, ParamMap};
use graphod::metrics;
use graphod::rng;
use graphod::synth::{InjectionParams, InjectionStep, PartitionGraphConfig, Recipe};
use graphod_bench::report;
use graphod_bench::{aggregate, run_benchmark, scalability_sweep, Dataset, GridSpace};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl From<graphod::Error> for CliError {
    fn from(e: graphod::Error) -> Self {
        match e {
            graphod::Error::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<graphod_bench::Error> for CliError {
    fn from(e: graphod_bench::Error) -> Self {
        match e {
            graphod_bench::Error::Core(c) => c.into(),
            graphod_bench::Error::Grid(_) | graphod_bench::Error::Results { .. } => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Io(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "graphod", version, about = "Node outlier detection on attributed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectType {
    Structural,
    Contextual,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random partition graph and save it as a bundle.
    Generate {
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long)]
        nodes_per_class: usize,
        #[arg(long, default_value_t = 0.5)]
        homophily: f64,
        #[arg(long, default_value_t = 5.0)]
        avg_degree: f64,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject structural and/or contextual outliers into a bundle.
    Inject {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "type", value_enum)]
        kind: InjectType,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Let the two injectors pick the same node (with --type both).
        #[arg(long)]
        allow_overlap: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every node of a bundle with one detector.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        algo: DetectorKind,
        /// Hyperparameters as KEY=VAL.
        #[arg(long, num_args = 0..)]
        params: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scores file (node_id,score).
        #[arg(long, default_value = "scores.csv")]
        out: PathBuf,
    },
    /// Random-grid benchmark over bundles and detectors.
    Benchmark {
        #[arg(long, num_args = 1.., required = true)]
        datasets: Vec<PathBuf>,
        /// Comma-separated detector names, or "all".
        #[arg(long, default_value = "all")]
        algos: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override grid candidates as KEY=V1,V2,...
        #[arg(long, num_args = 0..)]
        grid: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summarize a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Add contextual and structural AUC columns.
        #[arg(long)]
        per_type: bool,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runtime and peak heap over growing graphs.
    Scale {
        /// Comma-separated ascending node counts.
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value = "all")]
        algos: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hyperparameters as KEY=VAL, applied where accepted.
        #[arg(long, num_args = 0..)]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_algos(list: &str) -> Result<Vec<DetectorKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(DetectorKind::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.trim().parse().map_err(|e: graphod::Error| CliError::Invalid(e.to_string())))
        .collect()
}

fn parse_sizes(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad size '{s}'")))
        })
        .collect()
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn generate(cfg: PartitionGraphConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let recipe = Recipe {
        generator: cfg,
        injections: Vec::new(),
    };
    let (graph, _) = recipe.build()?;
    bundle::save(out, &graph, None, Some(&recipe))?;
    println!(
        "wrote {} nodes, {} edges to {}",
        graph.num_nodes(),
        graph.num_edges(),
        out.display()
    );
    Ok(())
}

fn inject(input: &Path, step: InjectionStep, out: &Path) -> Result<()> {
    let b = bundle::load(input)?;
    let injected = step.apply(&b.graph)?;
    let labels = match &b.labels {
        Some(l) => l.merged(&injected.labels),
        None => injected.labels.clone(),
    };
    let provenance = b.meta.provenance.map(|mut r| {
        r.injections.push(step);
        r
    });
    bundle::save(out, &injected.graph, Some(&labels), provenance.as_ref())?;
    println!(
        "wrote {} outliers ({} structural, {} contextual) to {}",
        labels.num_outliers(),
        labels.structural_mask().iter().filter(|&&s| s).count(),
        labels.contextual_mask().iter().filter(|&&c| c).count(),
        out.display()
    );
    Ok(())
}

fn detect(input: &Path, kind: DetectorKind, params: &[String], seed: u64, out: &Path) -> Result<()> {
    let params = ParamMap::parse(params)?;
    let b = bundle::load(input)?;
    let scores = detectors::run(kind, &b.graph, &params, seed)?;
    let mut w = create(out)?;
    let mut text = String::from("node_id,score\n");
    for (i, s) in scores.as_slice().iter().enumerate() {
        text.push_str(&format!("{i},{s:?}\n"));
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| io_error(out, e))?;
    if let Some(labels) = b.labels.filter(|l| l.num_outliers() > 0) {
        let m = metrics::evaluate(&scores, &labels)?;
        println!("auc={:.4}", m.auc);
        println!("ap={:.4}", m.ap);
        println!("recall_at_k={:.4}", m.recall_at_k);
        if let Some(c) = m.auc_contextual {
            println!("auc_contextual={c:.4}");
        }
        if let Some(s) = m.auc_structural {
            println!("auc_structural={s:.4}");
        }
    }
    Ok(())
}

fn grid_override(grid: &mut GridSpace, arg: &str) -> Result<()> {
    let (key, values) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("expected KEY=V1,V2, got '{arg}'")))?;
    let values: Vec<&str> = values.split(',').map(str::trim).collect();
    grid.set(key.trim(), &values)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn benchmark(
    dirs: &[PathBuf],
    algos: &str,
    trials: usize,
    seed: u64,
    overrides: &[String],
    workers: usize,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<ExitCode> {
    let algos = parse_algos(algos)?;
    let mut grid = GridSpace::standard(trials, seed);
    for o in overrides {
        grid_override(&mut grid, o)?;
    }
    grid.validate()?;
    let datasets = dirs
        .iter()
        .map(|d| Dataset::load(d))
        .collect::<graphod_bench::Result<Vec<_>>>()?;
    let results = run_benchmark(&datasets, &algos, &grid, workers)?;
    report::save_results(out, &results)?;
    if let Some(path) = report_path {
        let md = report::markdown_report(&aggregate(&results), true);
        fs::write(path, md).map_err(|e| io_error(path, e))?;
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.is_ok()).collect();
    for r in &failed {
        eprintln!(
            "{} / {} trial {}: {} ({})",
            r.dataset,
            r.algorithm,
            r.trial,
            r.status,
            r.message.as_deref().unwrap_or("")
        );
    }
    println!("{} trials, {} failed", results.len(), failed.len());
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn report_cmd(results: &Path, format: Format, per_type: bool, out: Option<&Path>) -> Result<()> {
    let rows = aggregate(&report::load_results(results)?);
    let mut buf = Vec::new();
    match format {
        Format::Md => buf.extend(report::markdown_report(&rows, per_type).into_bytes()),
        Format::Csv => report::aggregate_csv(&mut buf, &rows).map_err(|e| CliError::Io(e.to_string()))?,
    }
    match out {
        Some(p) => fs::write(p, buf).map_err(|e| io_error(p, e)),
        None => io::stdout().write_all(&buf).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn scale(sizes: &str, algos: &str, seed: u64, params: &[String], out: &Path) -> Result<()> {
    let sizes = parse_sizes(sizes)?;
    let algos = parse_algos(algos)?;
    let params = ParamMap::parse(params)?;
    let rows = scalability_sweep(&sizes, &algos, &params, seed)?;
    let w = create(out)?;
    graphod_bench::scale::write_scale(w, &rows).map_err(|e| io_error(out, e))?;
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} nodes / {}: {}", r.num_nodes, r.algorithm, r.status);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            classes,
            nodes_per_class,
            homophily,
            avg_degree,
            channels,
            seed,
            out,
        } => generate(
            PartitionGraphConfig {
                num_classes: classes,
                nodes_per_class,
                homophily,
                avg_degree,
                num_channels: channels,
                seed,
            },
            &out,
        )?,
        Command::Inject {
            input,
            kind,
            m,
            n,
            seed,
            allow_overlap,
            out,
        } => {
            let step = match kind {
                InjectType::Structural => InjectionStep::Structural(InjectionParams::new(m, n, seed)),
                InjectType::Contextual => InjectionStep::Contextual(InjectionParams::new(m, n, seed)),
                InjectType::Both => InjectionStep::Combined {
                    structural: InjectionParams::new(m, n, rng::derive(seed, "inject-s")),
                    contextual: InjectionParams::new(m, n, rng::derive(seed, "inject-c")),
                    allow_overlap,
                },
            };
            inject(&input, step, &out)?
        }
        Command::Detect {
            input,
            algo,
            params,
            seed,
            out,
        } => detect(&input, algo, &params, seed, &out)?,
        Command::Benchmark {
            datasets,
            algos,
            trials,
            seed,
            grid,
            workers,
            out,
            report,
        } => {
            return benchmark(&datasets, &algos, trials, seed, &grid, workers, &out, report.as_deref())
        }
        Command::Report {
            results,
            format,
            per_type,
            out,
        } => report_cmd(&results, format, per_type, out.as_deref())?,
        Command::Scale {
            sizes,
            algos,
            seed,
            params,
            out,
        } => scale(&sizes, &algos, seed, &params, &out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Invalid(_) => ExitCode::from(2),
                CliError::Io(_) => ExitCode::from(1),
            }
        }
    }
}
