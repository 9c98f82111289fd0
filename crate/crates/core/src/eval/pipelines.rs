//! Concrete pipelines: TF-IDF text models, CRF stacks over utterance
//! sequences, and linear heads over embeddings.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldSpec, FoldStrategy};
use super::grid::{Config, GridSpec, ParamValue};
use super::metrics::clamp_mmse;
use super::search::{Pipeline, Task};
use crate::crf::{crf_train, CrfModel, CrfParams, FeatureSequence};
use crate::dataset::{
    group_segments, Dataset, DocumentRecord, Label, SegmentGroup, SegmentRecord, TemporalFeatures,
    Variant,
};
use crate::error::{Error, Result};
use crate::gbdt::{train_gbdt, GbdtModel, GbdtParams, Loss};
use crate::linear::{train_lasso, train_logistic, EmbeddingMatrix, LinearModel, Standardizer};
use crate::sparse::SparseMatrix;
use crate::svm::{train_svc, train_svc_calibrated, train_svr, Gamma, Kernel, SvmModel, SvmParams};
use crate::tfidf::{fit_tfidf, Analyzer, StopWords, TfidfModel, TfidfParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Gbdt,
    SvmCrf,
    GbdtCrf,
    EmbedLogistic,
    EmbedLasso,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Svm,
        ModelKind::Gbdt,
        ModelKind::SvmCrf,
        ModelKind::GbdtCrf,
        ModelKind::EmbedLogistic,
        ModelKind::EmbedLasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Gbdt => "gbdt",
            ModelKind::SvmCrf => "svm_crf",
            ModelKind::GbdtCrf => "gbdt_crf",
            ModelKind::EmbedLogistic => "embed_logistic",
            ModelKind::EmbedLasso => "embed_lasso",
        }
    }

    pub fn is_crf(self) -> bool {
        matches!(self, ModelKind::SvmCrf | ModelKind::GbdtCrf)
    }

    pub fn is_embedding(self) -> bool {
        matches!(self, ModelKind::EmbedLogistic | ModelKind::EmbedLasso)
    }

    fn family(self) -> Family {
        match self {
            ModelKind::Svm | ModelKind::SvmCrf => Family::Svm,
            _ => Family::Gbdt,
        }
    }

    /// Rejects model/task/variant combinations that have no meaning.
    pub fn check_compatible(self, task: Task, variant: Variant) -> Result<()> {
        let bad = |why: String| {
            Err(Error::Unsupported(format!(
                "{} with task={task:?} on {variant}: {why}",
                self.name()
            )))
        };
        match (self, task) {
            (k, Task::Regress) if k.is_crf() => {
                return bad("CRF models do not support regression".into())
            }
            (ModelKind::EmbedLogistic, Task::Regress) => {
                return bad("use embed_lasso for MMSE".into())
            }
            (ModelKind::EmbedLasso, Task::Classify) => {
                return bad("use embed_logistic for classification".into())
            }
            _ => {}
        }
        if self.is_crf() && !variant.is_utterance_level() {
            return bad("CRF models need an utterance-level variant".into());
        }
        if !self.is_crf() && variant.is_utterance_level() {
            return bad("utterance-level variants are scored through a CRF".into());
        }
        Ok(())
    }

    /// Default search space for this model.
    pub fn default_grid(self) -> GridSpec {
        match self {
            ModelKind::Svm => GridSpec::svm_default(),
            ModelKind::Gbdt => GridSpec::gbdt_default(),
            ModelKind::SvmCrf | ModelKind::GbdtCrf => GridSpec::crf(15),
            ModelKind::EmbedLogistic => GridSpec::regularization("l2_lambda"),
            ModelKind::EmbedLasso => GridSpec::regularization("l1_alpha"),
        }
    }

    /// Base-model settings used under a CRF: the reported optimal cells.
    pub fn default_base_config(self) -> Config {
        let mut c = Config::default();
        c.set(
            "max_features",
            ParamValue::Int(if self == ModelKind::GbdtCrf {
                1000
            } else {
                100
            }),
        );
        c.set(
            "stop_words",
            ParamValue::Str(
                if self == ModelKind::GbdtCrf {
                    "english"
                } else {
                    "none"
                }
                .into(),
            ),
        );
        c.set("analyzer", "word".into());
        c.set("sublinear_tf", true.into());
        match self {
            ModelKind::SvmCrf => {
                c.set("kernel", "sigmoid".into());
                c.set("c", 1.0.into());
            }
            ModelKind::GbdtCrf => {
                c.set("n_estimators", ParamValue::Int(100));
                c.set("max_depth", ParamValue::Int(5));
            }
            _ => {}
        }
        c
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '+'], "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Svm,
    Gbdt,
}

pub fn tfidf_params(c: &Config) -> Result<TfidfParams> {
    let analyzer = match c.str_or("analyzer", "word")? {
        "word" => Analyzer::Word,
        "char" => Analyzer::Char,
        other => return Err(Error::Config(format!("analyzer `{other}`"))),
    };
    let mut p = TfidfParams::with_analyzer(analyzer);
    p.stop_words = match c
        .str_or("stop_words", "none")?
        .to_ascii_lowercase()
        .as_str()
    {
        "english" => StopWords::English,
        "none" => StopWords::None,
        other => return Err(Error::Config(format!("stop_words `{other}`"))),
    };
    p.max_features = c.usize_or("max_features", p.max_features)?;
    p.sublinear_tf = c.bool_or("sublinear_tf", p.sublinear_tf)?;
    p.ngram_range = (
        c.usize_or("ngram_lo", p.ngram_range.0)?,
        c.usize_or("ngram_hi", p.ngram_range.1)?,
    );
    p.validate()?;
    Ok(p)
}

pub fn svm_params(c: &Config) -> Result<SvmParams> {
    let d = SvmParams::default();
    let kernel = match c.str_or("kernel", "rbf")? {
        "rbf" => Kernel::Rbf,
        "sigmoid" => Kernel::Sigmoid,
        other => return Err(Error::Config(format!("kernel `{other}`"))),
    };
    let gamma = match c.get("gamma") {
        None => Gamma::Auto,
        Some(ParamValue::Str(s)) if s == "auto" => Gamma::Auto,
        Some(_) => Gamma::Value(c.f64_or("gamma", 1.0)?),
    };
    Ok(SvmParams {
        kernel,
        c: c.f64_or("c", d.c)?,
        gamma,
        coef0: c.f64_or("coef0", d.coef0)?,
        epsilon: c.f64_or("epsilon", d.epsilon)?,
        tol: c.f64_or("tol", d.tol)?,
        max_iter: c.usize_or("max_iter", d.max_iter)?,
    })
}

pub fn gbdt_params(c: &Config, seed: u64) -> Result<GbdtParams> {
    let d = GbdtParams::default();
    Ok(GbdtParams {
        n_estimators: c.usize_or("n_estimators", d.n_estimators)?,
        max_depth: c.usize_or("max_depth", d.max_depth)?,
        learning_rate: c.f64_or("learning_rate", d.learning_rate)?,
        min_samples_leaf: c.usize_or("min_samples_leaf", d.min_samples_leaf)?,
        subsample: c.f64_or("subsample", d.subsample)?,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Svc(SvmModel),
    Svr(SvmModel),
    Gbdt(GbdtModel),
}

/// TF-IDF features (plus optional standardized dense extras) feeding one
/// learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextModel {
    pub tfidf: TfidfModel,
    pub extras: Option<Standardizer>,
    pub learner: Learner,
}

fn features(
    tfidf: &TfidfModel,
    extras: Option<&Standardizer>,
    docs: &[&str],
    dense: Option<&[Vec<f64>]>,
) -> Result<SparseMatrix> {
    let x = tfidf.transform(docs);
    match (extras, dense) {
        (Some(st), Some(d)) => {
            let mut e = SparseMatrix::empty(st.mean.len());
            for row in d {
                e.push_row(st.transform_row(row).into_iter().enumerate().collect());
            }
            x.hstack(&e)
        }
        (None, _) => Ok(x),
        (Some(_), None) => Err(Error::DimensionMismatch(
            "model expects dense extra features".into(),
        )),
    }
}

impl TextModel {
    fn fit(
        family: Family,
        task: Task,
        calibrated: bool,
        config: &Config,
        docs: &[&str],
        dense: Option<&[Vec<f64>]>,
        targets: &[f64],
        seed: u64,
    ) -> Result<TextModel> {
        let tfidf = fit_tfidf(docs, &tfidf_params(config)?)?;
        let x = tfidf.transform(docs);
        Self::fit_on(
            family, task, calibrated, config, tfidf, x, dense, targets, seed,
        )
    }

    /// Fits the learner on already computed TF-IDF rows of the training docs.
    #[allow(clippy::too_many_arguments)]
    fn fit_on(
        family: Family,
        task: Task,
        calibrated: bool,
        config: &Config,
        tfidf: TfidfModel,
        x_text: SparseMatrix,
        dense: Option<&[Vec<f64>]>,
        targets: &[f64],
        seed: u64,
    ) -> Result<TextModel> {
        let extras = dense.map(Standardizer::fit);
        let x = match (&extras, dense) {
            (Some(st), Some(d)) => {
                let mut e = SparseMatrix::empty(st.mean.len());
                for row in d {
                    e.push_row(st.transform_row(row).into_iter().enumerate().collect());
                }
                x_text.hstack(&e)?
            }
            _ => x_text,
        };
        let learner = match (family, task) {
            (Family::Svm, Task::Classify) => {
                let y: Vec<f64> = targets
                    .iter()
                    .map(|&t| if t >= 0.5 { 1.0 } else { -1.0 })
                    .collect();
                let p = svm_params(config)?;
                Learner::Svc(if calibrated {
                    train_svc_calibrated(&x, &y, &p, seed)?
                } else {
                    train_svc(&x, &y, &p, seed)?
                })
            }
            (Family::Svm, Task::Regress) => {
                Learner::Svr(train_svr(&x, targets, &svm_params(config)?, seed)?)
            }
            (Family::Gbdt, Task::Classify) => Learner::Gbdt(train_gbdt(
                &x,
                targets,
                Loss::Logistic,
                &gbdt_params(config, seed)?,
            )?),
            (Family::Gbdt, Task::Regress) => Learner::Gbdt(train_gbdt(
                &x,
                targets,
                Loss::Squared,
                &gbdt_params(config, seed)?,
            )?),
        };
        Ok(TextModel {
            tfidf,
            extras,
            learner,
        })
    }

    /// 0/1 labels for classifiers, clamped MMSE for regressors.
    pub fn predict(&self, docs: &[&str], dense: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
        let x = features(&self.tfidf, self.extras.as_ref(), docs, dense)?;
        Ok(match &self.learner {
            Learner::Svc(m) => m
                .predict_labels(&x)
                .into_iter()
                .map(|v| if v > 0.0 { 1.0 } else { 0.0 })
                .collect(),
            Learner::Svr(m) => m.predict_svr(&x).into_iter().map(clamp_mmse).collect(),
            Learner::Gbdt(m) => match m.loss {
                Loss::Logistic => m
                    .predict(&x)
                    .into_iter()
                    .map(|p| if p >= 0.5 { 1.0 } else { 0.0 })
                    .collect(),
                Loss::Squared => m.predict(&x).into_iter().map(clamp_mmse).collect(),
            },
        })
    }

    /// AD probability (calibrated SVC or logistic GBDT).
    pub fn probability(&self, docs: &[&str]) -> Result<Vec<f64>> {
        let x = features(&self.tfidf, self.extras.as_ref(), docs, None)?;
        match &self.learner {
            Learner::Svc(m) => m.predict_proba(&x),
            Learner::Gbdt(m) if m.loss == Loss::Logistic => Ok(m.predict(&x)),
            _ => Err(Error::Unsupported("probabilities from a regressor".into())),
        }
    }
}

/// Transcript-level TF-IDF pipeline over PAR, PAR_INV or PAR_TIME documents.
pub struct TextPipeline {
    family: Family,
    task: Task,
    pub ids: Vec<String>,
    docs: Vec<String>,
    dense: Option<Vec<Vec<f64>>>,
    targets: Vec<f64>,
    seed: u64,
    cache: Mutex<HashMap<(Vec<usize>, TfidfParams), Arc<(TfidfModel, SparseMatrix)>>>,
}

fn target_of(task: Task, label: Label, mmse: Option<u32>) -> Option<f64> {
    match task {
        Task::Classify => Some(if label.is_ad() { 1.0 } else { 0.0 }),
        Task::Regress => mmse.map(f64::from),
    }
}

impl TextPipeline {
    pub fn new(
        kind: ModelKind,
        task: Task,
        variant: Variant,
        records: &[DocumentRecord],
        seed: u64,
    ) -> Result<Self> {
        let mut p = TextPipeline {
            family: kind.family(),
            task,
            ids: Vec::new(),
            docs: Vec::new(),
            dense: (variant == Variant::ParTime).then(Vec::new),
            targets: Vec::new(),
            seed,
            cache: Mutex::new(HashMap::new()),
        };
        let mut skipped = 0;
        for r in records {
            let Some(t) = target_of(task, r.label, r.mmse) else {
                skipped += 1;
                continue;
            };
            p.ids.push(r.transcript_id.clone());
            p.docs.push(r.text.clone());
            p.targets.push(t);
            if let Some(d) = &mut p.dense {
                d.push(
                    r.aggregates
                        .map(|a| a.to_vec())
                        .unwrap_or_else(|| vec![0.0; 5]),
                );
            }
        }
        if skipped > 0 {
            log::warn!("{skipped} transcripts without MMSE left out of regression");
        }
        Ok(p)
    }

    /// TF-IDF fitted on `train`, cached per (rows, parameters) since many
    /// grid points share the same text features.
    fn text_features(
        &self,
        params: &TfidfParams,
        train: &[usize],
    ) -> Result<Arc<(TfidfModel, SparseMatrix)>> {
        let key = (train.to_vec(), *params);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let docs: Vec<&str> = train.iter().map(|&i| self.docs[i].as_str()).collect();
        let model = fit_tfidf(&docs, params)?;
        let x = model.transform(&docs);
        let built = Arc::new((model, x));
        Ok(self
            .cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(built)
            .clone())
    }

    fn subset(&self, rows: &[usize]) -> (Vec<&str>, Option<Vec<Vec<f64>>>) {
        let docs = rows.iter().map(|&i| self.docs[i].as_str()).collect();
        let dense = self
            .dense
            .as_ref()
            .map(|d| rows.iter().map(|&i| d[i].clone()).collect());
        (docs, dense)
    }
}

impl Pipeline for TextPipeline {
    type Model = TextModel;

    fn task(&self) -> Task {
        self.task
    }
    fn len(&self) -> usize {
        self.ids.len()
    }
    fn targets(&self) -> &[f64] {
        &self.targets
    }
    fn prepare(&self, configs: &[Config], train_sets: &[&[usize]]) {
        let mut params: Vec<TfidfParams> = configs
            .iter()
            .filter_map(|c| tfidf_params(c).ok())
            .collect();
        params.sort_by_key(|p| format!("{p:?}"));
        params.dedup();
        let jobs: Vec<(&TfidfParams, &[usize])> = params
            .iter()
            .flat_map(|p| train_sets.iter().map(move |t| (p, *t)))
            .collect();
        jobs.par_iter().for_each(|(p, t)| {
            if let Err(e) = self.text_features(p, t) {
                log::debug!("tf-idf features failed: {e}");
            }
        });
    }
    fn fit(&self, config: &Config, train: &[usize]) -> Result<TextModel> {
        let (_, dense) = self.subset(train);
        let y: Vec<f64> = train.iter().map(|&i| self.targets[i]).collect();
        let text = self.text_features(&tfidf_params(config)?, train)?;
        TextModel::fit_on(
            self.family,
            self.task,
            false,
            config,
            text.0.clone(),
            text.1.clone(),
            dense.as_deref(),
            &y,
            self.seed,
        )
    }
    fn predict(&self, model: &TextModel, rows: &[usize]) -> Result<Vec<f64>> {
        let (docs, dense) = self.subset(rows);
        model.predict(&docs, dense.as_deref())
    }
}

/// Base text model under a CRF plus the CRF over per-utterance features:
/// `[p_AD, z-scored timing..., demographics..., 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfStackModel {
    pub base: TextModel,
    pub temporal: Option<Standardizer>,
    pub age: Option<Standardizer>,
    pub crf: CrfModel,
}

fn step_features(
    p_ad: f64,
    seg: &SegmentRecord,
    temporal: Option<&Standardizer>,
    age: Option<&Standardizer>,
) -> Vec<f64> {
    let mut v = vec![p_ad];
    if let Some(st) = temporal {
        let raw = seg
            .temporal
            .map(|t| t.to_vec())
            .unwrap_or_else(|| vec![0.0; TemporalFeatures::NAMES.len()]);
        v.extend(st.transform_row(&raw));
    }
    if let Some(st) = age {
        let d = seg
            .demographics
            .expect("demographic variant rows carry demographics");
        v.push(st.transform_row(&[d.age_years])[0]);
        v.push(d.sex_indicator);
    }
    v.push(1.0);
    v
}

fn step_names(temporal: bool, demographics: bool) -> Vec<String> {
    let mut names = vec!["p_ad".to_string()];
    if temporal {
        names.extend(TemporalFeatures::NAMES.iter().map(|n| format!("z_{n}")));
    }
    if demographics {
        names.push("z_age".into());
        names.push("sex".into());
    }
    names.push("bias".into());
    names
}

impl CrfStackModel {
    /// One 0/1 prediction per group, from the last Viterbi state.
    pub fn predict_groups(
        &self,
        segments: &[SegmentRecord],
        groups: &[SegmentGroup],
    ) -> Result<Vec<f64>> {
        let rows: Vec<usize> = groups.iter().flat_map(|g| g.rows.iter().copied()).collect();
        let docs: Vec<&str> = rows.iter().map(|&i| segments[i].text.as_str()).collect();
        let probs: HashMap<usize, f64> = rows
            .into_iter()
            .zip(self.base.probability(&docs)?)
            .collect();
        groups
            .iter()
            .map(|g| {
                let seq = FeatureSequence {
                    transcript_id: g.transcript_id.clone(),
                    steps: g
                        .rows
                        .iter()
                        .map(|&i| {
                            step_features(
                                probs[&i],
                                &segments[i],
                                self.temporal.as_ref(),
                                self.age.as_ref(),
                            )
                        })
                        .collect(),
                };
                Ok(if self.crf.transcript_prediction(&seq)?.is_ad() {
                    1.0
                } else {
                    0.0
                })
            })
            .collect()
    }
}

/// Per-training-set stacking inputs shared by every CRF configuration.
struct Stack {
    base: TextModel,
    oof: HashMap<usize, f64>,
    temporal: Option<Standardizer>,
    age: Option<Standardizer>,
}

pub struct CrfPipeline {
    family: Family,
    pub ids: Vec<String>,
    segments: Vec<SegmentRecord>,
    groups: Vec<SegmentGroup>,
    targets: Vec<f64>,
    base_config: Config,
    temporal: bool,
    demographics: bool,
    inner_k: usize,
    seed: u64,
    cache: Mutex<HashMap<(Vec<usize>, String), Arc<Stack>>>,
}

const CRF_KEYS: [&str; 4] = ["c1", "c2", "max_iter", "tol"];

impl CrfPipeline {
    pub fn new(
        kind: ModelKind,
        variant: Variant,
        segments: Vec<SegmentRecord>,
        base_config: Config,
        seed: u64,
    ) -> Result<Self> {
        let groups = group_segments(&segments);
        Ok(CrfPipeline {
            family: kind.family(),
            ids: groups.iter().map(|g| g.transcript_id.clone()).collect(),
            targets: groups
                .iter()
                .map(|g| if g.label.is_ad() { 1.0 } else { 0.0 })
                .collect(),
            groups,
            segments,
            base_config,
            temporal: variant != Variant::ParSplt,
            demographics: variant == Variant::ParSpltTD,
            inner_k: 5,
            seed,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn base_part(&self, config: &Config) -> Config {
        let mut c = self.base_config.clone();
        for (k, v) in &config.0 {
            if !CRF_KEYS.contains(&k.as_str()) {
                c.set(k, v.clone());
            }
        }
        c
    }

    fn build_stack(&self, base: &Config, train: &[usize]) -> Result<Stack> {
        let rows: Vec<usize> = train
            .iter()
            .flat_map(|&g| self.groups[g].rows.iter().copied())
            .collect();
        let docs: Vec<&str> = rows
            .iter()
            .map(|&i| self.segments[i].text.as_str())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|&i| {
                if self.segments[i].label.is_ad() {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let labels: Vec<Label> = rows.iter().map(|&i| self.segments[i].label).collect();
        let gids: Vec<String> = rows
            .iter()
            .map(|&i| self.segments[i].transcript_id.clone())
            .collect();

        let k = self.inner_k.min(train.len());
        let inner = make_folds(
            &labels,
            Some(&gids),
            &FoldSpec {
                k,
                strategy: FoldStrategy::Grouped,
                seed: self.seed,
            },
        )?;
        let parts: Vec<Result<Vec<(usize, f64)>>> = inner
            .par_iter()
            .map(|f| {
                let d: Vec<&str> = f.train.iter().map(|&i| docs[i]).collect();
                let t: Vec<f64> = f.train.iter().map(|&i| y[i]).collect();
                let m = TextModel::fit(
                    self.family,
                    Task::Classify,
                    true,
                    base,
                    &d,
                    None,
                    &t,
                    self.seed,
                )?;
                let v: Vec<&str> = f.valid.iter().map(|&i| docs[i]).collect();
                Ok(f.valid
                    .iter()
                    .map(|&i| rows[i])
                    .zip(m.probability(&v)?)
                    .collect())
            })
            .collect();
        let mut oof = HashMap::new();
        for p in parts {
            oof.extend(p?);
        }
        let full = TextModel::fit(
            self.family,
            Task::Classify,
            true,
            base,
            &docs,
            None,
            &y,
            self.seed,
        )?;

        let temporal = self.temporal.then(|| {
            let raw: Vec<Vec<f64>> = rows
                .iter()
                .map(|&i| {
                    self.segments[i]
                        .temporal
                        .map(|t| t.to_vec())
                        .unwrap_or_else(|| vec![0.0; TemporalFeatures::NAMES.len()])
                })
                .collect();
            Standardizer::fit(&raw)
        });
        let age = self.demographics.then(|| {
            let raw: Vec<Vec<f64>> = rows
                .iter()
                .map(|&i| vec![self.segments[i].demographics.map_or(0.0, |d| d.age_years)])
                .collect();
            Standardizer::fit(&raw)
        });
        Ok(Stack {
            base: full,
            oof,
            temporal,
            age,
        })
    }

    /// Cached per (training set, base config); built without holding the lock.
    fn stack(&self, base: &Config, train: &[usize]) -> Result<Arc<Stack>> {
        let key = (train.to_vec(), base.to_string());
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let built = Arc::new(self.build_stack(base, train)?);
        Ok(self
            .cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(built)
            .clone())
    }
}

impl Pipeline for CrfPipeline {
    type Model = CrfStackModel;

    fn task(&self) -> Task {
        Task::Classify
    }
    fn len(&self) -> usize {
        self.groups.len()
    }
    fn targets(&self) -> &[f64] {
        &self.targets
    }
    fn prepare(&self, configs: &[Config], train_sets: &[&[usize]]) {
        let mut bases: Vec<Config> = configs.iter().map(|c| self.base_part(c)).collect();
        bases.dedup_by(|a, b| a.to_string() == b.to_string());
        let jobs: Vec<(&Config, &[usize])> = bases
            .iter()
            .flat_map(|b| train_sets.iter().map(move |t| (b, *t)))
            .collect();
        jobs.par_iter().for_each(|(b, t)| {
            if let Err(e) = self.stack(b, t) {
                log::warn!("stacking inputs failed: {e}");
            }
        });
    }
    fn fit(&self, config: &Config, train: &[usize]) -> Result<CrfStackModel> {
        let base = self.base_part(config);
        let stack = self.stack(&base, train)?;
        let mut seqs = Vec::with_capacity(train.len());
        let mut labels = Vec::with_capacity(train.len());
        for &g in train {
            let grp = &self.groups[g];
            seqs.push(FeatureSequence {
                transcript_id: grp.transcript_id.clone(),
                steps: grp
                    .rows
                    .iter()
                    .map(|&i| {
                        step_features(
                            stack.oof[&i],
                            &self.segments[i],
                            stack.temporal.as_ref(),
                            stack.age.as_ref(),
                        )
                    })
                    .collect(),
            });
            labels.push(vec![grp.label; grp.rows.len()]);
        }
        let d = CrfParams::default();
        let params = CrfParams {
            c1: config.f64_or("c1", d.c1)?,
            c2: config.f64_or("c2", d.c2)?,
            max_iter: config.usize_or("max_iter", d.max_iter)?,
            tol: config.f64_or("tol", d.tol)?,
            seed: self.seed,
        };
        let crf = crf_train(
            &seqs,
            &labels,
            step_names(self.temporal, self.demographics),
            &params,
        )?;
        Ok(CrfStackModel {
            base: stack.base.clone(),
            temporal: stack.temporal.clone(),
            age: stack.age.clone(),
            crf,
        })
    }
    fn predict(&self, model: &CrfStackModel, rows: &[usize]) -> Result<Vec<f64>> {
        let groups: Vec<SegmentGroup> = rows.iter().map(|&g| self.groups[g].clone()).collect();
        model.predict_groups(&self.segments, &groups)
    }
}

/// Logistic (AD) or LASSO (MMSE) head over a fixed embedding matrix.
pub struct EmbedPipeline {
    task: Task,
    pub ids: Vec<String>,
    x: Vec<Vec<f64>>,
    targets: Vec<f64>,
    seed: u64,
}

impl EmbedPipeline {
    pub fn new(
        task: Task,
        records: &[DocumentRecord],
        embeddings: &EmbeddingMatrix,
        seed: u64,
    ) -> Result<Self> {
        let all_ids: Vec<String> = records.iter().map(|r| r.transcript_id.clone()).collect();
        let aligned = embeddings.align(&all_ids)?;
        let mut p = EmbedPipeline {
            task,
            ids: Vec::new(),
            x: Vec::new(),
            targets: Vec::new(),
            seed,
        };
        for (r, row) in records.iter().zip(aligned.values) {
            if let Some(t) = target_of(task, r.label, r.mmse) {
                p.ids.push(r.transcript_id.clone());
                p.x.push(row);
                p.targets.push(t);
            }
        }
        Ok(p)
    }
}

pub fn predict_linear(model: &LinearModel, x: &[Vec<f64>]) -> Vec<f64> {
    match model.kind {
        crate::linear::LinearKind::Logistic => model
            .predict(x)
            .into_iter()
            .map(|p| if p >= 0.5 { 1.0 } else { 0.0 })
            .collect(),
        crate::linear::LinearKind::Lasso => model.predict(x).into_iter().map(clamp_mmse).collect(),
    }
}

impl Pipeline for EmbedPipeline {
    type Model = LinearModel;

    fn task(&self) -> Task {
        self.task
    }
    fn len(&self) -> usize {
        self.ids.len()
    }
    fn targets(&self) -> &[f64] {
        &self.targets
    }
    fn fit(&self, config: &Config, train: &[usize]) -> Result<LinearModel> {
        let x: Vec<Vec<f64>> = train.iter().map(|&i| self.x[i].clone()).collect();
        match self.task {
            Task::Classify => {
                let y: Vec<bool> = train.iter().map(|&i| self.targets[i] >= 0.5).collect();
                train_logistic(&x, &y, config.f64_or("l2_lambda", 1e-2)?, self.seed)
            }
            Task::Regress => {
                let y: Vec<f64> = train.iter().map(|&i| self.targets[i]).collect();
                train_lasso(&x, &y, config.f64_or("l1_alpha", 1e-2)?, self.seed)
            }
        }
    }
    fn predict(&self, model: &LinearModel, rows: &[usize]) -> Result<Vec<f64>> {
        let x: Vec<Vec<f64>> = rows.iter().map(|&i| self.x[i].clone()).collect();
        Ok(predict_linear(model, &x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Fitted {
    Text(TextModel),
    Crf(CrfStackModel),
    Linear(LinearModel),
}

/// Any of the pipelines above, selected at runtime.
pub enum AnyPipeline {
    Text(TextPipeline),
    Crf(CrfPipeline),
    Embed(EmbedPipeline),
}

impl AnyPipeline {
    pub fn build(
        kind: ModelKind,
        task: Task,
        dataset: &Dataset,
        embeddings: Option<&EmbeddingMatrix>,
        base_config: Option<&Config>,
        seed: u64,
    ) -> Result<AnyPipeline> {
        kind.check_compatible(task, dataset.variant())?;
        match dataset {
            Dataset::Documents { variant, records } if kind.is_embedding() => {
                let emb = embeddings
                    .ok_or_else(|| Error::Config(format!("{kind} needs an embedding file")))?;
                let _ = variant;
                Ok(AnyPipeline::Embed(EmbedPipeline::new(
                    task, records, emb, seed,
                )?))
            }
            Dataset::Documents { variant, records } => Ok(AnyPipeline::Text(TextPipeline::new(
                kind, task, *variant, records, seed,
            )?)),
            Dataset::Segments { variant, records } => {
                let base = kind
                    .default_base_config()
                    .merged(base_config.unwrap_or(&Config::default()));
                Ok(AnyPipeline::Crf(CrfPipeline::new(
                    kind,
                    *variant,
                    records.clone(),
                    base,
                    seed,
                )?))
            }
        }
    }

    pub fn ids(&self) -> &[String] {
        match self {
            AnyPipeline::Text(p) => &p.ids,
            AnyPipeline::Crf(p) => &p.ids,
            AnyPipeline::Embed(p) => &p.ids,
        }
    }

    /// Class of every unit, used for stratification.
    pub fn labels(&self) -> Vec<Label> {
        match self {
            AnyPipeline::Crf(p) => p.groups.iter().map(|g| g.label).collect(),
            _ => {
                let t = self.targets();
                match self.task() {
                    Task::Classify => t.iter().map(|&v| Label::from_bool(v >= 0.5)).collect(),
                    // stratify regression folds on the clinical MMSE cut-off
                    Task::Regress => t.iter().map(|&v| Label::from_bool(v < 24.0)).collect(),
                }
            }
        }
    }
}

impl Pipeline for AnyPipeline {
    type Model = Fitted;

    fn task(&self) -> Task {
        match self {
            AnyPipeline::Text(p) => p.task(),
            AnyPipeline::Crf(p) => p.task(),
            AnyPipeline::Embed(p) => p.task(),
        }
    }
    fn len(&self) -> usize {
        self.ids().len()
    }
    fn targets(&self) -> &[f64] {
        match self {
            AnyPipeline::Text(p) => p.targets(),
            AnyPipeline::Crf(p) => p.targets(),
            AnyPipeline::Embed(p) => p.targets(),
        }
    }
    fn prepare(&self, configs: &[Config], train_sets: &[&[usize]]) {
        match self {
            AnyPipeline::Text(p) => p.prepare(configs, train_sets),
            AnyPipeline::Crf(p) => p.prepare(configs, train_sets),
            AnyPipeline::Embed(_) => {}
        }
    }
    fn fit(&self, config: &Config, train: &[usize]) -> Result<Fitted> {
        Ok(match self {
            AnyPipeline::Text(p) => Fitted::Text(p.fit(config, train)?),
            AnyPipeline::Crf(p) => Fitted::Crf(p.fit(config, train)?),
            AnyPipeline::Embed(p) => Fitted::Linear(p.fit(config, train)?),
        })
    }
    fn predict(&self, model: &Fitted, rows: &[usize]) -> Result<Vec<f64>> {
        match (self, model) {
            (AnyPipeline::Text(p), Fitted::Text(m)) => p.predict(m, rows),
            (AnyPipeline::Crf(p), Fitted::Crf(m)) => p.predict(m, rows),
            (AnyPipeline::Embed(p), Fitted::Linear(m)) => p.predict(m, rows),
            _ => Err(Error::Internal("model does not match pipeline".into())),
        }
    }
}

/// Predictions of a fitted model on a freshly built dataset, keyed by
/// transcript id.
pub fn predict_dataset(
    fitted: &Fitted,
    dataset: &Dataset,
    embeddings: Option<&EmbeddingMatrix>,
) -> Result<Vec<(String, f64)>> {
    match (fitted, dataset) {
        (Fitted::Text(m), Dataset::Documents { variant, records }) => {
            let docs: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
            let dense: Option<Vec<Vec<f64>>> = (*variant == Variant::ParTime).then(|| {
                records
                    .iter()
                    .map(|r| {
                        r.aggregates
                            .map(|a| a.to_vec())
                            .unwrap_or_else(|| vec![0.0; 5])
                    })
                    .collect()
            });
            let preds = m.predict(&docs, dense.as_deref())?;
            Ok(records
                .iter()
                .map(|r| r.transcript_id.clone())
                .zip(preds)
                .collect())
        }
        (Fitted::Crf(m), Dataset::Segments { records, .. }) => {
            let groups = group_segments(records);
            let preds = m.predict_groups(records, &groups)?;
            Ok(groups
                .into_iter()
                .map(|g| g.transcript_id)
                .zip(preds)
                .collect())
        }
        (Fitted::Linear(m), Dataset::Documents { records, .. }) => {
            let emb = embeddings
                .ok_or_else(|| Error::Config("embedding model needs --embeddings".into()))?;
            let ids: Vec<String> = records.iter().map(|r| r.transcript_id.clone()).collect();
            let aligned = emb.align(&ids)?;
            Ok(ids
                .into_iter()
                .zip(predict_linear(m, &aligned.values))
                .collect())
        }
        _ => Err(Error::Unsupported(
            "model does not fit this dataset variant".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_rules() {
        assert!(matches!(
            ModelKind::SvmCrf.check_compatible(Task::Regress, Variant::ParSplt),
            Err(Error::Unsupported(_))
        ));
        assert!(ModelKind::SvmCrf
            .check_compatible(Task::Classify, Variant::ParSpltT)
            .is_ok());
        assert!(ModelKind::Svm
            .check_compatible(Task::Classify, Variant::ParSplt)
            .is_err());
        assert!(ModelKind::Gbdt
            .check_compatible(Task::Regress, Variant::ParInv)
            .is_ok());
        assert!(ModelKind::EmbedLasso
            .check_compatible(Task::Classify, Variant::Par)
            .is_err());
        assert_eq!("svm+crf".parse::<ModelKind>().unwrap(), ModelKind::SvmCrf);
    }

    #[test]
    fn params_from_config() {
        let c = ModelKind::SvmCrf.default_base_config();
        let t = tfidf_params(&c).unwrap();
        assert_eq!(
            (t.max_features, t.sublinear_tf, t.stop_words),
            (100, true, StopWords::None)
        );
        let s = svm_params(&c).unwrap();
        assert_eq!((s.kernel, s.c), (Kernel::Sigmoid, 1.0));
        let mut bad = Config::default();
        bad.set("kernel", "linear".into());
        assert!(svm_params(&bad).is_err());
    }
}
