//! Evaluation protocol: folds, search spaces, metrics, pipelines and
//! end-to-end experiments.

pub mod experiment;
pub mod folds;
pub mod grid;
pub mod metrics;
pub mod pipelines;
pub mod report;
pub mod sampling;
pub mod search;

pub use experiment::{run_experiment, run_stage, write_outputs, RunConfig, SavedModel, Stage};
pub use folds::{make_folds, Fold, FoldSpec, FoldStrategy};
pub use grid::{Axis, Config, GridSpec, ParamValue};
pub use metrics::{classification_metrics, rmse, ClassificationReport, ConfusionMatrix};
pub use pipelines::{AnyPipeline, Fitted, ModelKind};
pub use sampling::sample_exponential;
pub use search::{cross_validate, grid_search, CvReport, Pipeline, Scores, Scoring, Task};
