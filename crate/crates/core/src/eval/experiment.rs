//! End-to-end runs driven by a TOML (or JSON) configuration:
//! load data, build the variant, select hyperparameters with k-fold grid
//! search, report k-fold CV of the winner and refit it on all data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::folds::{make_folds, Fold, FoldSpec, FoldStrategy};
use super::grid::{Axis, Config, GridSpec, ParamValue};
use super::pipelines::{AnyPipeline, Fitted, ModelKind};
use super::search::{
    cross_validate, grid_search, ConfigOutcome, CvReport, FoldResult, Pipeline, Scores, Scoring,
    Task,
};
use crate::chat::{self, IdFieldLayout, ParseOptions, Transcript};
use crate::dataset::{Dataset, Variant};
use crate::error::{Error, Result};
use crate::io;
use crate::linear::{load_embeddings, EmbeddingMatrix};

pub const SEED_ENV: &str = "ADSCREEN_SEED";
pub const SAVED_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Directory of `.cha` files.
    pub chat_dir: Option<PathBuf>,
    /// Transcript JSONL written by `parse`.
    pub transcripts: Option<PathBuf>,
    /// Dataset JSONL written by `build`.
    pub dataset: Option<PathBuf>,
    /// Embedding CSV for `embed_*` models.
    pub embeddings: Option<PathBuf>,
    /// `@ID` slot layout, e.g. `age=3,sex=4,group=5,mmse=8`.
    pub id_layout: Option<String>,
    #[serde(default)]
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: Variant,
}

fn default_task() -> Task {
    Task::Classify
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default = "default_task")]
    pub task: Task,
    /// Fixed parameters, layered under every grid point. For CRF models
    /// these also configure the base text model.
    #[serde(default)]
    pub params: Config,
    pub scoring: Option<Scoring>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    /// The model's standard search space.
    #[default]
    Default,
    /// Start from an empty space.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub preset: GridPreset,
    /// Value axes; replace preset axes of the same name.
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<ParamValue>>,
    /// Exponential axes by scale; replace preset axes of the same name.
    #[serde(default)]
    pub exponential: BTreeMap<String, f64>,
    pub draws: Option<usize>,
}

fn default_select_k() -> usize {
    5
}
fn default_report_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldsSection {
    #[serde(default = "default_select_k")]
    pub select_k: usize,
    #[serde(default = "default_report_k")]
    pub report_k: usize,
}

impl Default for FoldsSection {
    fn default() -> Self {
        FoldsSection {
            select_k: 5,
            report_k: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub value: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    pub variant: VariantSection,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub folds: FoldsSection,
    #[serde(default)]
    pub seed: SeedSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    /// Reads TOML, or JSON when the extension is `.json`. Relative paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = io::read_to_string(path)?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            Self::from_toml(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut self.data.chat_dir);
        fix(&mut self.data.transcripts);
        fix(&mut self.data.dataset);
        fix(&mut self.data.embeddings);
        if self.output.dir.is_relative() {
            self.output.dir = base.join(&self.output.dir);
        }
    }

    /// Config seed, else `ADSCREEN_SEED`, else 0.
    pub fn seed(&self) -> Result<u64> {
        if let Some(s) = self.seed.value {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        self.model
            .kind
            .check_compatible(self.model.task, self.variant.name)?;
        let sources = [
            &self.data.chat_dir,
            &self.data.transcripts,
            &self.data.dataset,
        ]
        .iter()
        .filter(|p| p.is_some())
        .count();
        if sources != 1 {
            return Err(Error::Config(
                "exactly one of data.chat_dir, data.transcripts, data.dataset is required".into(),
            ));
        }
        if self.model.kind.is_embedding() && self.data.embeddings.is_none() {
            return Err(Error::Config(format!(
                "{} needs data.embeddings",
                self.model.kind
            )));
        }
        for (name, k) in [
            ("select_k", self.folds.select_k),
            ("report_k", self.folds.report_k),
        ] {
            if k < 2 {
                return Err(Error::Config(format!("folds.{name} must be at least 2")));
            }
        }
        if let Some(l) = &self.data.id_layout {
            l.parse::<IdFieldLayout>()?;
        }
        for (name, scale) in &self.grid.exponential {
            if !(*scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!(
                    "grid.exponential.{name} must be positive"
                )));
            }
        }
        if self.model.scoring == Some(Scoring::NegRmse) && self.model.task == Task::Classify
            || matches!(
                self.model.scoring,
                Some(Scoring::Accuracy | Scoring::MacroF1)
            ) && self.model.task == Task::Regress
        {
            return Err(Error::Config("scoring does not match task".into()));
        }
        self.seed()?;
        self.search_space()?;
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        let mut spec = match self.grid.preset {
            GridPreset::Default => self.model.kind.default_grid(),
            GridPreset::None => GridSpec::empty(),
        };
        let mut put = |axis: Axis| match spec.axes.iter_mut().find(|a| a.name() == axis.name()) {
            Some(slot) => *slot = axis,
            None => spec.axes.push(axis),
        };
        for (name, values) in &self.grid.axes {
            put(Axis::values(name, values.clone()));
        }
        for (name, scale) in &self.grid.exponential {
            put(Axis::exponential(name, *scale));
        }
        if let Some(d) = self.grid.draws {
            spec.draws = d;
        }
        spec
    }

    /// Every configuration to evaluate, fixed params underneath.
    pub fn search_space(&self) -> Result<Vec<Config>> {
        let spec = self.grid_spec();
        if spec.axes.is_empty() {
            return Ok(vec![self.model.params.clone()]);
        }
        let seeds = Seeds::derive(self.seed()?);
        let configs = spec.configs(seeds.grid)?;
        if configs.is_empty() {
            return Err(Error::Config("search space is empty (draws = 0?)".into()));
        }
        Ok(configs
            .iter()
            .map(|c| self.model.params.merged(c))
            .collect())
    }

    pub fn scoring(&self) -> Scoring {
        self.model
            .scoring
            .unwrap_or(Scoring::default_for(self.model.task))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub select_folds: u64,
    pub report_folds: u64,
    pub grid: u64,
    pub model: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Seeds {
        Seeds {
            master,
            select_folds: master,
            report_folds: master.wrapping_add(1),
            grid: master.wrapping_add(2),
            model: master.wrapping_add(3),
        }
    }
}

pub fn load_transcripts(data: &DataSection) -> Result<(Vec<Transcript>, Vec<String>)> {
    let mut opts = ParseOptions::default();
    if let Some(l) = &data.id_layout {
        opts.layout = l.parse()?;
    }
    opts.strict_envelope = !data.lenient;
    if let Some(dir) = &data.chat_dir {
        let parsed = chat::parse_dir(dir, &opts)?;
        let mut warnings = parsed.warnings;
        for (file, e) in &parsed.failures {
            warnings.push(format!("{file}: {} {e}", e.class()));
        }
        if parsed.transcripts.is_empty() {
            return Err(Error::Data(format!(
                "no usable transcripts in {}",
                dir.display()
            )));
        }
        Ok((parsed.transcripts, warnings))
    } else if let Some(p) = &data.transcripts {
        Ok((chat::from_jsonl(&io::read_to_string(p)?)?, Vec::new()))
    } else {
        Err(Error::Config("no transcript source".into()))
    }
}

/// The dataset variant and, for embedding models, the embedding matrix.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Option<EmbeddingMatrix>, Vec<String>)> {
    let (dataset, warnings) = if let Some(p) = &cfg.data.dataset {
        let d = Dataset::from_jsonl(&io::read_to_string(p)?)?;
        if d.variant() != cfg.variant.name {
            return Err(Error::Config(format!(
                "dataset file holds {} but variant.name is {}",
                d.variant(),
                cfg.variant.name
            )));
        }
        (d, Vec::new())
    } else {
        let (ts, mut w) = load_transcripts(&cfg.data)?;
        let (d, w2) = Dataset::build(cfg.variant.name, &ts);
        w.extend(w2);
        (d, w)
    };
    if dataset.is_empty() {
        return Err(Error::Data(format!(
            "variant {} produced no records",
            cfg.variant.name
        )));
    }
    let emb = match (&cfg.data.embeddings, cfg.model.kind.is_embedding()) {
        (Some(p), true) => Some(load_embeddings(p)?),
        _ => None,
    };
    Ok((dataset, emb, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub task: Task,
    pub variant: Variant,
    pub config: Config,
    pub fitted: Fitted,
}

impl SavedModel {
    pub fn load(path: &Path) -> Result<SavedModel> {
        let m: SavedModel = io::read_json(path)?;
        if m.format_version != SAVED_MODEL_VERSION {
            return Err(Error::Data(format!(
                "{}: model format {} (expected {SAVED_MODEL_VERSION})",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// How much of the protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Fit `model.params` on every unit.
    Train,
    /// Select on `select_k` folds and refit the winner.
    GridSearch,
    /// `report_k`-fold CV of `model.params`.
    Evaluate,
    /// Selection, CV of the winner, refit.
    Run,
}

impl Stage {
    fn selects(self) -> bool {
        matches!(self, Stage::GridSearch | Stage::Run)
    }

    fn reports(self) -> bool {
        matches!(self, Stage::Evaluate | Stage::Run)
    }

    fn fits(self) -> bool {
        self != Stage::Evaluate
    }

    /// Files written by [`write_outputs`] for this stage.
    pub fn outputs(self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.reports() {
            v.extend([
                "metrics.json",
                "folds.csv",
                "summary.txt",
                "predictions.csv",
            ]);
        }
        if self.selects() {
            v.push("selection.csv");
        }
        if self.fits() {
            v.push("model.json");
        }
        v.push("manifest.json");
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub scoring: Scoring,
    pub k: usize,
    pub n_configs: usize,
    pub n_failed: usize,
    pub best_index: usize,
    pub best_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub variant: Variant,
    pub model: ModelKind,
    pub task: Task,
    pub embedding_model: Option<String>,
    pub n_units: usize,
    pub config: Config,
    pub selection: Option<SelectionSummary>,
    pub k: usize,
    pub mean: Scores,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stage: Stage,
    pub config_hash: String,
    pub seeds: Seeds,
    pub model_format_version: u32,
    pub variant: Variant,
    pub model: ModelKind,
    pub task: Task,
    pub n_units: usize,
    pub n_configs: usize,
    pub config: Config,
    pub fold_metrics: Vec<Scores>,
    pub mean: Option<Scores>,
    pub files: Vec<String>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub stage: Stage,
    pub manifest: Manifest,
    pub metrics: Option<MetricsFile>,
    pub model: Option<SavedModel>,
    pub ranked: Option<Vec<ConfigOutcome>>,
    pub report: Option<CvReport>,
    pub ids: Vec<String>,
    pub targets: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn build_pipeline(
    cfg: &RunConfig,
    dataset: &Dataset,
    emb: Option<&EmbeddingMatrix>,
    seed: u64,
) -> Result<AnyPipeline> {
    AnyPipeline::build(
        cfg.model.kind,
        cfg.model.task,
        dataset,
        emb,
        Some(&cfg.model.params),
        seed,
    )
}

pub fn stratified(pipeline: &AnyPipeline, k: usize, seed: u64) -> Result<Vec<Fold>> {
    make_folds(
        &pipeline.labels(),
        None,
        &FoldSpec {
            k,
            strategy: FoldStrategy::Stratified,
            seed,
        },
    )
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    run_stage(cfg, Stage::Run)
}

pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let seeds = Seeds::derive(cfg.seed()?);
    let (dataset, emb, warnings) = load_data(cfg)?;
    let pipeline = build_pipeline(cfg, &dataset, emb.as_ref(), seeds.model)?;
    let mut need = 1;
    if stage.selects() {
        need = need.max(cfg.folds.select_k);
    }
    if stage.reports() {
        need = need.max(cfg.folds.report_k);
    }
    if pipeline.len() < need {
        return Err(Error::TooFewSamples {
            k: need,
            samples: pipeline.len(),
        });
    }

    let mut config = cfg.model.params.clone();
    let mut n_configs = 1;
    let mut ranked = None;
    let mut selection = None;
    let mut fitted = None;
    if stage.selects() {
        let configs = cfg.search_space()?;
        n_configs = configs.len();
        log::info!("{} units, {} configs", pipeline.len(), n_configs);
        let folds = stratified(&pipeline, cfg.folds.select_k, seeds.select_folds)?;
        let g = grid_search(&pipeline, &configs, &folds, cfg.scoring())?;
        selection = Some(SelectionSummary {
            scoring: g.scoring,
            k: cfg.folds.select_k,
            n_configs,
            n_failed: g.ranked.iter().filter(|o| o.error.is_some()).count(),
            best_index: g.best_index,
            best_score: g.ranked[0].mean_score,
        });
        config = g.best_config;
        fitted = Some(g.best_model);
        ranked = Some(g.ranked);
    } else if stage.fits() {
        let all: Vec<usize> = (0..pipeline.len()).collect();
        pipeline.prepare(std::slice::from_ref(&config), &[all.as_slice()]);
        fitted = Some(pipeline.fit(&config, &all)?);
    }

    let report = if stage.reports() {
        let folds = stratified(&pipeline, cfg.folds.report_k, seeds.report_folds)?;
        Some(cross_validate(&pipeline, &config, &folds)?)
    } else {
        None
    };

    let metrics = report.as_ref().map(|r| MetricsFile {
        variant: cfg.variant.name,
        model: cfg.model.kind,
        task: cfg.model.task,
        embedding_model: emb
            .as_ref()
            .and_then(|e| e.provenance.as_ref())
            .map(|p| p.model_name.clone()),
        n_units: pipeline.len(),
        config: config.clone(),
        selection: selection.clone(),
        k: cfg.folds.report_k,
        mean: r.mean.clone(),
        folds: r.folds.clone(),
    });
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage,
        config_hash: cfg.hash()?,
        seeds,
        model_format_version: SAVED_MODEL_VERSION,
        variant: cfg.variant.name,
        model: cfg.model.kind,
        task: cfg.model.task,
        n_units: pipeline.len(),
        n_configs,
        config: config.clone(),
        fold_metrics: report
            .iter()
            .flat_map(|r| r.folds.iter().map(|f| f.scores.clone()))
            .collect(),
        mean: report.as_ref().map(|r| r.mean.clone()),
        files: stage.outputs().into_iter().map(String::from).collect(),
    };
    let model = fitted.map(|fitted| SavedModel {
        format_version: SAVED_MODEL_VERSION,
        kind: cfg.model.kind,
        task: cfg.model.task,
        variant: cfg.variant.name,
        config,
        fitted,
    });
    Ok(ExperimentOutcome {
        stage,
        manifest,
        metrics,
        model,
        ranked,
        report,
        ids: pipeline.ids().to_vec(),
        targets: pipeline.targets().to_vec(),
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn folds_csv(folds: &[FoldResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "fold",
        "n_train",
        "n_valid",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "rmse",
    ])?;
    for f in folds {
        let s = &f.scores;
        w.write_record([
            f.fold.to_string(),
            f.n_train.to_string(),
            f.n_valid.to_string(),
            opt(s.accuracy),
            opt(s.precision),
            opt(s.recall),
            opt(s.f1),
            opt(s.rmse),
        ])?;
    }
    finish(w)
}

pub fn selection_csv(ranked: &[ConfigOutcome]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "index", "mean_score", "config", "error"])?;
    for (rank, o) in ranked.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            o.index.to_string(),
            opt(o.mean_score),
            o.config.to_string(),
            o.error.clone().unwrap_or_default(),
        ])?;
    }
    finish(w)
}

pub fn predictions_csv(rows: &[(String, Option<f64>, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "gold", "prediction"])?;
    for (id, gold, p) in rows {
        w.write_record([
            id.clone(),
            gold.map_or(String::new(), |g| g.to_string()),
            p.to_string(),
        ])?;
    }
    finish(w)
}

/// Acc / Prec / Recall / F1 / RMSE row plus protocol details.
pub fn summary_text(m: &MetricsFile) -> String {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<16} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "Dataset", "Model", "Acc", "Prec", "Recall", "F1", "RMSE"
    );
    let _ = writeln!(
        s,
        "{:<14} {:<16} {:>6} {:>6} {:>6} {:>6} {:>6}",
        super::report::dataset_label(m.variant),
        super::report::model_label(m),
        f(m.mean.accuracy),
        f(m.mean.precision),
        f(m.mean.recall),
        f(m.mean.f1),
        f(m.mean.rmse)
    );
    let _ = writeln!(
        s,
        "\n{}-fold CV over {} units; config: {}",
        m.k, m.n_units, m.config
    );
    if let Some(sel) = &m.selection {
        let _ = writeln!(
            s,
            "selected by {}-fold {:?} over {} configs ({} failed)",
            sel.k, sel.scoring, sel.n_configs, sel.n_failed
        );
    }
    s
}

/// Renders every artifact for the outcome's stage, in memory.
pub fn render_outputs(out: &ExperimentOutcome) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = Vec::new();
    if let (Some(m), Some(r)) = (&out.metrics, &out.report) {
        files.push(("metrics.json", pretty(m)?));
        files.push(("folds.csv", folds_csv(&m.folds)?.into_bytes()));
        files.push(("summary.txt", summary_text(m).into_bytes()));
        let rows: Vec<(String, Option<f64>, f64)> = r
            .out_of_fold
            .iter()
            .map(|&(i, p)| (out.ids[i].clone(), Some(out.targets[i]), p))
            .collect();
        files.push(("predictions.csv", predictions_csv(&rows)?.into_bytes()));
    }
    if let Some(ranked) = &out.ranked {
        files.push(("selection.csv", selection_csv(ranked)?.into_bytes()));
    }
    if let Some(m) = &out.model {
        files.push(("model.json", pretty(m)?));
    }
    files.push(("manifest.json", pretty(&out.manifest)?));
    Ok(files)
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the stage's artifacts under `dir`. Everything is rendered before
/// the first file is touched and each file is replaced atomically.
pub fn write_outputs(out: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let files = render_outputs(out)?;
    io::create_dir_all(dir)?;
    for (name, bytes) in files {
        io::write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}
