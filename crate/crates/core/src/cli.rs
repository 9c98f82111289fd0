//! The `adscreen` command line.
//!
//! Exit codes: 0 success, 2 usage or unsupported combination, 3 data error,
//! 70 internal invariant violation. Failures print one line to stderr of the
//! form `error[<Class>]: <message>`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::chat;
use crate::dataset::{Dataset, Variant};
use crate::error::{Error, Result};
use crate::eval::experiment::{
    load_transcripts, predictions_csv, render_outputs, run_stage, summary_text, DataSection,
    FoldsSection, GridPreset, GridSection, MetricsFile, ModelSection, OutputSection, RunConfig,
    SavedModel, SeedSection, Stage, VariantSection,
};
use crate::eval::grid::ParamValue;
use crate::eval::pipelines::{predict_dataset, ModelKind};
use crate::eval::report::{compare_reference, render_comparison};
use crate::eval::search::{Scoring, Task};
use crate::io;
use crate::linear::load_embeddings;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Parser)]
#[command(
    name = "adscreen",
    version,
    about = "Dementia screening from CHAT speech transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of .cha files into transcript JSON lines.
    Parse(ParseArgs),
    /// Build dataset variants from parsed transcripts.
    Build(BuildArgs),
    /// Fit one configuration on all data and save the model.
    Train(RunArgs),
    /// Select hyperparameters by k-fold grid search and save the refit winner.
    #[command(alias = "grid-search")]
    Gridsearch(RunArgs),
    /// Cross-validate one configuration.
    Evaluate(RunArgs),
    /// Grid search, cross-validate the winner, save the refit model.
    Run(RunArgs),
    /// Apply a saved model to new data.
    Predict(PredictArgs),
    /// Summarize metrics files, optionally against reference scores.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Directory containing .cha files.
    pub dir: PathBuf,
    /// Output JSON-lines file.
    #[arg(long)]
    pub out: PathBuf,
    /// `@ID` slot layout: `default` or e.g. `age=3,sex=4,group=5,mmse=8`.
    #[arg(long, default_value = "default")]
    pub id_layout: String,
    /// Accept files without an @Begin/@End envelope (with a warning).
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Variant(s) to build, or `all`. Repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub variant: Vec<String>,
    /// Transcript JSON lines, or a directory of .cha files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory; one `<VARIANT>.jsonl` per variant.
    #[arg(long)]
    pub out: PathBuf,
    /// `@ID` slot layout when reading .cha files.
    #[arg(long, default_value = "default")]
    pub id_layout: String,
    /// Accept .cha files without an @Begin/@End envelope.
    #[arg(long)]
    pub lenient: bool,
}

/// Every key of the run configuration file has a flag here; flags override
/// the file.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML or JSON run configuration.
    pub config: Option<PathBuf>,

    /// data.chat_dir: directory of .cha files.
    #[arg(long, help_heading = "Data")]
    pub chat_dir: Option<PathBuf>,
    /// data.transcripts: transcript JSON lines.
    #[arg(long, help_heading = "Data")]
    pub transcripts: Option<PathBuf>,
    /// data.dataset: dataset JSON lines.
    #[arg(long, help_heading = "Data")]
    pub dataset: Option<PathBuf>,
    /// data.embeddings: embedding CSV (sidecar JSON next to it).
    #[arg(long, help_heading = "Data")]
    pub embeddings: Option<PathBuf>,
    /// data.id_layout: `@ID` slot layout.
    #[arg(long, help_heading = "Data")]
    pub id_layout: Option<String>,
    /// data.lenient: accept .cha files without an envelope.
    #[arg(long, help_heading = "Data")]
    pub lenient: bool,

    /// variant.name: PAR, PAR_INV, PAR_TIME, PAR_SPLT, PAR_SPLT_T, PAR_SPLT_T_D.
    #[arg(long, help_heading = "Model")]
    pub variant: Option<Variant>,
    /// model.kind: svm, gbdt, svm_crf, gbdt_crf, embed_logistic, embed_lasso.
    #[arg(long, help_heading = "Model")]
    pub model: Option<ModelKind>,
    /// model.task: classify or regress.
    #[arg(long, value_parser = parse_task, help_heading = "Model")]
    pub task: Option<Task>,
    /// model.params: fixed parameter KEY=VALUE. Repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_kv, help_heading = "Model")]
    pub params: Vec<(String, String)>,
    /// model.scoring: accuracy, macro_f1 or neg_rmse.
    #[arg(long, value_parser = parse_scoring, help_heading = "Model")]
    pub scoring: Option<Scoring>,

    /// grid.preset: default or none.
    #[arg(long, value_parser = parse_preset, help_heading = "Grid")]
    pub grid_preset: Option<GridPreset>,
    /// grid.axes: value axis NAME=V1,V2,... Repeatable.
    #[arg(long = "axis", value_name = "NAME=V1,V2", value_parser = parse_kv, help_heading = "Grid")]
    pub axes: Vec<(String, String)>,
    /// grid.exponential: exponential axis NAME=SCALE. Repeatable.
    #[arg(long = "exp", value_name = "NAME=SCALE", value_parser = parse_kv, help_heading = "Grid")]
    pub exponential: Vec<(String, String)>,
    /// grid.draws: number of exponential draws.
    #[arg(long, help_heading = "Grid")]
    pub draws: Option<usize>,

    /// folds.select_k: folds for hyperparameter selection.
    #[arg(long, help_heading = "Folds")]
    pub select_k: Option<usize>,
    /// folds.report_k: folds for reported CV metrics.
    #[arg(long, help_heading = "Folds")]
    pub report_k: Option<usize>,

    /// seed.value; falls back to ADSCREEN_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// output.dir: directory for run artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags of [`RunArgs`] that mirror configuration keys.
pub const CONFIG_FLAGS: [&str; 19] = [
    "--chat-dir",
    "--transcripts",
    "--dataset",
    "--embeddings",
    "--id-layout",
    "--lenient",
    "--variant",
    "--model",
    "--task",
    "--param",
    "--scoring",
    "--grid-preset",
    "--axis",
    "--exp",
    "--draws",
    "--select-k",
    "--report-k",
    "--seed",
    "--out",
];

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Saved model (model.json).
    #[arg(long)]
    pub model: PathBuf,
    /// Transcript JSON lines, dataset JSON lines, or a directory of .cha files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Embedding CSV for embedding models.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output CSV with columns id, prediction.
    #[arg(long)]
    pub out: PathBuf,
    /// `@ID` slot layout when reading .cha files.
    #[arg(long, default_value = "default")]
    pub id_layout: String,
    /// Accept .cha files without an envelope.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// metrics.json files or run directories (searched recursively).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Reference table to compare against.
    #[arg(long, value_parser = ["table2"])]
    pub compare: Option<String>,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got `{s}`")),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(
        s.trim().to_ascii_lowercase().replace('-', "_"),
    ))
    .map_err(|e| e.to_string())
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    parse_enum(s)
}

fn parse_scoring(s: &str) -> std::result::Result<Scoring, String> {
    parse_enum(s)
}

fn parse_preset(s: &str) -> std::result::Result<GridPreset, String> {
    parse_enum(s)
}

impl RunArgs {
    /// The configuration file (if any) with every given flag applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig {
                data: DataSection::default(),
                variant: VariantSection {
                    name: self.variant.ok_or_else(|| {
                        Error::Config("--variant is required without a config file".into())
                    })?,
                },
                model: ModelSection {
                    kind: self.model.ok_or_else(|| {
                        Error::Config("--model is required without a config file".into())
                    })?,
                    task: Task::Classify,
                    params: Default::default(),
                    scoring: None,
                },
                grid: GridSection::default(),
                folds: FoldsSection::default(),
                seed: SeedSection::default(),
                output: OutputSection {
                    dir: self.out.clone().ok_or_else(|| {
                        Error::Config("--out is required without a config file".into())
                    })?,
                },
            },
        };

        let d = &mut cfg.data;
        if self.chat_dir.is_some() || self.transcripts.is_some() || self.dataset.is_some() {
            d.chat_dir = self.chat_dir.clone();
            d.transcripts = self.transcripts.clone();
            d.dataset = self.dataset.clone();
        }
        if self.embeddings.is_some() {
            d.embeddings = self.embeddings.clone();
        }
        if self.id_layout.is_some() {
            d.id_layout = self.id_layout.clone();
        }
        d.lenient |= self.lenient;

        if let Some(v) = self.variant {
            cfg.variant.name = v;
        }
        if let Some(k) = self.model {
            cfg.model.kind = k;
        }
        if let Some(t) = self.task {
            cfg.model.task = t;
        }
        for (k, v) in &self.params {
            cfg.model.params.set(k, ParamValue::parse(v));
        }
        if self.scoring.is_some() {
            cfg.model.scoring = self.scoring;
        }

        if let Some(p) = self.grid_preset {
            cfg.grid.preset = p;
        }
        for (name, values) in &self.axes {
            let values = values
                .split(',')
                .map(|v| ParamValue::parse(v.trim()))
                .collect();
            cfg.grid.axes.insert(name.clone(), values);
        }
        for (name, scale) in &self.exponential {
            let scale: f64 = scale
                .parse()
                .map_err(|_| Error::Config(format!("--exp {name}: `{scale}` is not a number")))?;
            cfg.grid.exponential.insert(name.clone(), scale);
        }
        if self.draws.is_some() {
            cfg.grid.draws = self.draws;
        }

        if let Some(k) = self.select_k {
            cfg.folds.select_k = k;
        }
        if let Some(k) = self.report_k {
            cfg.folds.report_k = k;
        }
        if self.seed.is_some() {
            cfg.seed.value = self.seed;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        Ok(cfg)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unsupported(_) | Error::Config(_) | Error::InvalidParams(_) => EXIT_USAGE,
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_DATA,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error[Usage]: {}", one_line(first));
            return EXIT_USAGE;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), one_line(&e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Parse(a) => parse(&a),
        Command::Build(a) => build(&a),
        Command::Train(a) => experiment(&a, Stage::Train),
        Command::Gridsearch(a) => experiment(&a, Stage::GridSearch),
        Command::Evaluate(a) => experiment(&a, Stage::Evaluate),
        Command::Run(a) => experiment(&a, Stage::Run),
        Command::Predict(a) => predict(&a),
        Command::Report(a) => report(&a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => io::create_dir_all(p),
        _ => Ok(()),
    }
}

fn data_section(input: &Path, id_layout: &str, lenient: bool) -> DataSection {
    let mut d = DataSection {
        id_layout: (id_layout != "default").then(|| id_layout.to_string()),
        lenient,
        ..Default::default()
    };
    if input.is_dir() {
        d.chat_dir = Some(input.to_path_buf());
    } else {
        d.transcripts = Some(input.to_path_buf());
    }
    d
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn parse(a: &ParseArgs) -> Result<()> {
    if !a.dir.is_dir() {
        return Err(Error::Data(format!(
            "{} is not a directory",
            a.dir.display()
        )));
    }
    let (transcripts, warnings) = load_transcripts(&data_section(&a.dir, &a.id_layout, a.lenient))?;
    warn_all(&warnings);
    let text = chat::to_jsonl(&transcripts)?;
    ensure_parent(&a.out)?;
    io::write_atomic(&a.out, text.as_bytes())?;
    println!("{} transcripts -> {}", transcripts.len(), a.out.display());
    Ok(())
}

fn build(a: &BuildArgs) -> Result<()> {
    let mut variants = Vec::new();
    for v in &a.variant {
        if v.eq_ignore_ascii_case("all") {
            variants.extend(Variant::ALL);
        } else {
            variants.push(v.parse::<Variant>()?);
        }
    }
    variants.dedup();
    let (transcripts, warnings) =
        load_transcripts(&data_section(&a.input, &a.id_layout, a.lenient))?;
    warn_all(&warnings);
    let mut files = Vec::new();
    for v in variants {
        let (d, w) = Dataset::build(v, &transcripts);
        warn_all(&w);
        if d.is_empty() {
            return Err(Error::Data(format!("variant {v} produced no records")));
        }
        files.push((
            a.out.join(format!("{}.jsonl", v.name())),
            d.to_jsonl()?,
            d.len(),
        ));
    }
    io::create_dir_all(&a.out)?;
    for (path, text, n) in files {
        io::write_atomic(&path, text.as_bytes())?;
        println!("{n} records -> {}", path.display());
    }
    Ok(())
}

fn experiment(a: &RunArgs, stage: Stage) -> Result<()> {
    let cfg = a.resolve()?;
    let out = run_stage(&cfg, stage)?;
    warn_all(&out.warnings);
    let files = render_outputs(&out)?;
    io::create_dir_all(&cfg.output.dir)?;
    for (name, bytes) in &files {
        io::write_atomic(&cfg.output.dir.join(name), bytes)?;
    }
    match (&out.metrics, &out.model) {
        (Some(m), _) => print!("{}", summary_text(m)),
        (None, Some(m)) => println!("config: {}", m.config),
        _ => {}
    }
    println!(
        "wrote {} files to {}",
        files.len(),
        cfg.output.dir.display()
    );
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let saved = SavedModel::load(&a.model)?;
    let dataset = if a.input.is_dir() {
        let (ts, w) = load_transcripts(&data_section(&a.input, &a.id_layout, a.lenient))?;
        warn_all(&w);
        Dataset::build(saved.variant, &ts).0
    } else {
        let text = io::read_to_string(&a.input)?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let is_dataset = serde_json::from_str::<serde_json::Value>(first)
            .map(|v| v.get("variant").is_some())
            .unwrap_or(false);
        if is_dataset {
            let d = Dataset::from_jsonl(&text)?;
            if d.variant() != saved.variant {
                return Err(Error::Config(format!(
                    "model was trained on {} but the dataset holds {}",
                    saved.variant,
                    d.variant()
                )));
            }
            d
        } else {
            let (d, w) = Dataset::build(saved.variant, &chat::from_jsonl(&text)?);
            warn_all(&w);
            d
        }
    };
    if dataset.is_empty() {
        return Err(Error::Data(format!(
            "no {} records to predict",
            saved.variant
        )));
    }
    let emb = a.embeddings.as_deref().map(load_embeddings).transpose()?;
    let preds = predict_dataset(&saved.fitted, &dataset, emb.as_ref())?;
    let rows: Vec<(String, Option<f64>, f64)> =
        preds.into_iter().map(|(id, p)| (id, None, p)).collect();
    let csv = predictions_csv(&rows)?;
    ensure_parent(&a.out)?;
    io::write_atomic(&a.out, csv.as_bytes())?;
    println!("{} predictions -> {}", rows.len(), a.out.display());
    Ok(())
}

fn collect_metrics(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() || p.file_name().is_some_and(|n| n == "metrics.json") {
                collect_metrics(&p, out)?;
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut paths = Vec::new();
    for p in &a.inputs {
        if !p.exists() {
            return Err(Error::Data(format!("{} does not exist", p.display())));
        }
        collect_metrics(p, &mut paths)?;
    }
    if paths.is_empty() {
        return Err(Error::Data("no metrics.json files found".into()));
    }
    let runs = paths
        .iter()
        .map(|p| io::read_json::<MetricsFile>(p))
        .collect::<Result<Vec<_>>>()?;
    let text = match (a.compare.is_some(), a.json) {
        (true, false) => render_comparison(&compare_reference(&runs)),
        (true, true) => format!(
            "{}\n",
            serde_json::to_string_pretty(&compare_reference(&runs))?
        ),
        (false, false) => runs.iter().map(summary_text).collect::<Vec<_>>().join("\n"),
        (false, true) => format!("{}\n", serde_json::to_string_pretty(&runs)?),
    };
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            io::write_atomic(p, text.as_bytes())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
