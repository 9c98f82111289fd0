//! Grid search over TF-IDF and SVM settings with stratified folds, then a
//! cross-validated report for the winning configuration.
//!
//! `cargo run --release --example grid_search`

mod common;

use adscreen::dataset::Variant;
use adscreen::eval::pipelines::TextPipeline;
use adscreen::eval::{
    cross_validate, grid_search, make_folds, Axis, FoldSpec, FoldStrategy, GridSpec, ModelKind,
    ParamValue, Pipeline, Scoring, Task,
};

fn main() -> adscreen::Result<()> {
    let docs = common::documents(&common::corpus(60, 29), Variant::Par);
    let pipeline = TextPipeline::new(ModelKind::Svm, Task::Classify, Variant::Par, &docs, 0)?;
    let labels: Vec<_> = docs.iter().map(|d| d.label).collect();
    let folds = |k, seed| {
        make_folds(
            &labels,
            None,
            &FoldSpec {
                k,
                strategy: FoldStrategy::Stratified,
                seed,
            },
        )
    };

    let mut spec = GridSpec::empty();
    spec.axes
        .push(Axis::values("kernel", vec!["rbf".into(), "sigmoid".into()]));
    spec.axes.push(Axis::values(
        "c",
        vec![
            ParamValue::Float(0.1),
            ParamValue::Float(1.0),
            ParamValue::Float(10.0),
        ],
    ));
    spec.axes.push(Axis::values(
        "max_features",
        vec![ParamValue::Int(50), ParamValue::Int(500)],
    ));
    let configs = spec.configs(0)?;
    let result = grid_search(&pipeline, &configs, &folds(5, 1)?, Scoring::Accuracy)?;
    println!("{} configurations, top five:", configs.len());
    for o in result.ranked.iter().take(5) {
        println!("  {:.3}  {}", o.mean_score.unwrap_or(f64::NAN), o.config);
    }

    let report = cross_validate(&pipeline, &result.best_config, &folds(10, 2)?)?;
    let m = report.mean;
    println!(
        "best config on {} units, 10-fold: accuracy {:.3} precision {:.3} recall {:.3} F1 {:.3}",
        pipeline.len(),
        m.accuracy.unwrap_or(f64::NAN),
        m.precision.unwrap_or(f64::NAN),
        m.recall.unwrap_or(f64::NAN),
        m.f1.unwrap_or(f64::NAN)
    );
    Ok(())
}
