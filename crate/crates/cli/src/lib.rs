//! `phc` command implementations.
//!
//! Every JSON document the tool writes embeds the tool version, the seed and
//! the full [`RunConfig`] it was produced with. Documents contain no
//! timestamps or timings, so repeating a command gives identical bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use phc_core::dataset::{load_dataset, DatasetSchema, SchemaFile};
use phc_core::harness::{self, HarnessDocument, HarnessOptions};
use phc_core::metric::Metric;
use phc_core::self_organiser::{self, classify, ClusterModel, SelfOrgConfig};
use phc_core::teaching::{run_teaching, Confidence, SamplingMode, TeachingReport, TeachingSession};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] phc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "phc", version, about = "Pattern-hierarchy classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Self-organise a dataset into clusters and sub-clusters.
    Cluster(ClusterArgs),
    /// Simulate a teaching session against a clustered dataset.
    Teach(TeachArgs),
    /// Re-run the benchmark datasets and compare with reference figures.
    Report(ReportArgs),
    /// Place a single row in a saved model.
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 2)]
    pub exemplar_threshold: usize,
    #[arg(long, default_value = "l2")]
    pub metric: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to the schema stored in the model.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Maximum oracle queries; defaults to the number of rows.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub smart_sampling: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "iris,wine,zoo,liver,abalone"
    )]
    pub datasets: Vec<String>,
    /// Directory holding `<name>.data` and `<name>.json`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub allow_missing: bool,
    /// Also run a uniform teaching session on each dataset.
    #[arg(long)]
    pub with_teaching: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 2)]
    pub exemplar_threshold: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["row", "row_file", "row_id"])))]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One CSV row: every column, or the feature columns only.
    #[arg(long, allow_hyphen_values = true)]
    pub row: Option<String>,
    /// File whose first non-empty line is the row.
    #[arg(long)]
    pub row_file: Option<PathBuf>,
    /// Row index into `--data`.
    #[arg(long, requires = "data")]
    pub row_id: Option<usize>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Teaching report used to attach a category and confidence.
    #[arg(long)]
    pub teach_report: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything that influenced a run, echoed into its output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<String>,
    pub schema: Option<String>,
    pub model: Option<String>,
    pub seed: u64,
    pub max_iterations: Option<usize>,
    pub exemplar_threshold: Option<usize>,
    pub metric: Option<Metric>,
    pub budget: Option<usize>,
    pub sampling: Option<SamplingMode>,
    pub datasets: Option<Vec<String>>,
    pub allow_missing: Option<bool>,
    pub with_teaching: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub schema_file: SchemaFile,
    pub schema: DatasetSchema,
    pub model: ClusterModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachDocument {
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub report: TeachingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub table: HarnessDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyDocument {
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub row_id: Option<usize>,
    pub cluster: usize,
    pub subcluster: usize,
    pub category: Option<usize>,
    pub category_name: Option<String>,
    pub confidence: Option<Confidence>,
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialise");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn load_model(path: &Path) -> CliResult<ModelDocument> {
    let doc: ModelDocument = read_json(path)?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported model format version {}",
            path.display(),
            doc.format_version
        )));
    }
    Ok(doc)
}

fn parse_metric(s: &str) -> CliResult<Metric> {
    s.parse::<Metric>()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_cluster(args: &ClusterArgs) -> CliResult<()> {
    let metric = parse_metric(&args.metric)?;
    let config = SelfOrgConfig {
        exemplar_threshold: args.exemplar_threshold,
        max_iterations: args.max_iter,
        metric,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let schema_file = SchemaFile::from_path(&args.schema)?;
    let ds = load_dataset(&args.data, &args.schema)?;
    let model = self_organiser::run(&ds.rows, config)?;
    log::info!(
        "{} rows -> {} clusters, {} sub-clusters after {} iterations",
        ds.len(),
        model.cluster_count(),
        model.subcluster_count(),
        model.iterations
    );
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        tool_version: TOOL_VERSION.into(),
        seed: args.seed,
        config: RunConfig {
            command: "cluster".into(),
            data: Some(path_string(&args.data)),
            schema: Some(path_string(&args.schema)),
            seed: args.seed,
            max_iterations: Some(args.max_iter),
            exemplar_threshold: Some(args.exemplar_threshold),
            metric: Some(metric),
            ..RunConfig::default()
        },
        schema_file,
        schema: ds.schema,
        model,
    };
    write_json(&doc, args.out.as_deref())
}

fn cmd_teach(args: &TeachArgs) -> CliResult<()> {
    let doc = load_model(&args.model)?;
    let schema_file = match &args.schema {
        Some(p) => SchemaFile::from_path(p)?,
        None => doc.schema_file.clone(),
    };
    let text = fs::read_to_string(&args.data).map_err(|source| CliError::Io {
        path: args.data.clone(),
        source,
    })?;
    let ds = phc_core::dataset::parse_dataset(&text, &schema_file)?;
    if ds.schema != doc.schema || ds.len() != doc.model.row_count() {
        return Err(CliError::Data(format!(
            "{} does not match the data the model was built from",
            args.data.display()
        )));
    }
    let mode = if args.smart_sampling {
        SamplingMode::Smart
    } else {
        SamplingMode::Uniform
    };
    let budget = args.budget.unwrap_or(ds.len());
    let mut session = TeachingSession::start(&doc.model, &ds.rows, args.seed, mode)?;
    let report = run_teaching(&mut session, &ds.oracle, budget)?;
    log::info!(
        "{} queries, accuracy {:.4}",
        report.queries_used,
        report.accuracy
    );
    let out = TeachDocument {
        tool_version: TOOL_VERSION.into(),
        seed: args.seed,
        config: RunConfig {
            command: "teach".into(),
            data: Some(path_string(&args.data)),
            schema: args.schema.as_deref().map(path_string),
            model: Some(path_string(&args.model)),
            seed: args.seed,
            budget: Some(budget),
            sampling: Some(mode),
            ..RunConfig::default()
        },
        report,
    };
    write_json(&out, args.out.as_deref())
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let config = SelfOrgConfig {
        exemplar_threshold: args.exemplar_threshold,
        max_iterations: args.max_iter,
        metric: Metric::L2,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let names: Vec<&str> = args
        .datasets
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    let dir = args.data_dir.clone().unwrap_or_else(harness::data_dir);
    let options = HarnessOptions {
        config,
        allow_missing: args.allow_missing,
        teach_seed: args.with_teaching.then_some(args.seed),
    };
    let started = Instant::now();
    let table = harness::table1_harness(&names, &dir, &options)?;
    log::info!("report finished in {:.2?}", started.elapsed());
    eprint!("{}", harness::render_text(&table));
    let doc = ReportDocument {
        tool_version: TOOL_VERSION.into(),
        seed: args.seed,
        config: RunConfig {
            command: "report".into(),
            seed: args.seed,
            max_iterations: Some(args.max_iter),
            exemplar_threshold: Some(args.exemplar_threshold),
            metric: Some(Metric::L2),
            datasets: Some(names.iter().map(|s| s.to_string()).collect()),
            allow_missing: Some(args.allow_missing),
            with_teaching: Some(args.with_teaching),
            ..RunConfig::default()
        },
        table,
    };
    write_json(&doc, args.out.as_deref())
}

fn split_row(line: &str) -> CliResult<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(str::to_string).collect()),
        Some(Err(e)) => Err(CliError::Data(format!("bad row: {e}"))),
        None => Err(CliError::Data("empty row".into())),
    }
}

fn cmd_classify(args: &ClassifyArgs) -> CliResult<()> {
    let doc = load_model(&args.model)?;
    let (row_id, features) = if let Some(line) = &args.row {
        (None, doc.schema.encode_raw(&split_row(line)?)?)
    } else if let Some(path) = &args.row_file {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| CliError::Data(format!("{}: no row", path.display())))?;
        (None, doc.schema.encode_raw(&split_row(line)?)?)
    } else {
        let id = args.row_id.expect("clap enforces one input");
        let data = args.data.as_ref().expect("clap enforces --data");
        let text = fs::read_to_string(data).map_err(|source| CliError::Io {
            path: data.clone(),
            source,
        })?;
        let ds = phc_core::dataset::parse_dataset(&text, &doc.schema_file)?;
        if ds.schema != doc.schema {
            return Err(CliError::Data(format!(
                "{} does not match the data the model was built from",
                data.display()
            )));
        }
        let row = ds.rows.get(id).ok_or_else(|| {
            CliError::Data(format!(
                "row id {id} out of range (dataset has {} rows)",
                ds.len()
            ))
        })?;
        (Some(id), row.features.clone())
    };
    if features.len() != doc.schema.dim() {
        return Err(CliError::Data(format!(
            "row encodes to {} dimensions, model expects {}",
            features.len(),
            doc.schema.dim()
        )));
    }
    let (cluster, subcluster) = classify(&doc.model, &features)?;

    let (mut category, mut confidence, mut category_name) = (None, None, None);
    if let Some(path) = &args.teach_report {
        let teach: TeachDocument = read_json(path)?;
        let report = &teach.report;
        let (cat, conf) = match row_id.and_then(|id| report.labels.get(id)) {
            Some(label) => (label.category, label.confidence),
            None => report.knowledge.infer(subcluster, &features),
        };
        category = cat;
        confidence = Some(conf);
        category_name = cat
            .and_then(|c| report.per_category.get(&c))
            .map(|s| s.name.clone());
    }
    let out = ClassifyDocument {
        tool_version: TOOL_VERSION.into(),
        seed: doc.seed,
        config: RunConfig {
            command: "classify".into(),
            data: args.data.as_deref().map(path_string),
            model: Some(path_string(&args.model)),
            seed: doc.seed,
            ..RunConfig::default()
        },
        row_id,
        cluster,
        subcluster,
        category,
        category_name,
        confidence,
    };
    write_json(&out, args.out.as_deref())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Teach(a) => cmd_teach(a),
        Command::Report(a) => cmd_report(a),
        Command::Classify(a) => cmd_classify(a),
    }
}

/// Parse arguments, run, and map failures to exit codes:
/// 0 success, 1 usage error, 2 data error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
