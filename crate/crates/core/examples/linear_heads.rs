//! Logistic and LASSO heads over a precomputed embedding matrix, the same
//! CSV + JSON sidecar layout the embedding exporter writes.
//!
//! `cargo run --example linear_heads`

mod common;

use adscreen::dataset::{Label, Variant};
use adscreen::eval::pipelines::EmbedPipeline;
use adscreen::eval::{
    cross_validate, make_folds, Config, FoldSpec, FoldStrategy, ParamValue, Task,
};
use adscreen::linear::{lasso_alpha_max, load_embeddings_for, train_lasso};

fn main() -> adscreen::Result<()> {
    let corpus = common::corpus(80, 23);
    let dir = tempfile::tempdir().map_err(|e| adscreen::Error::Internal(e.to_string()))?;
    let csv = dir.path().join("embeddings.csv");
    corpus.write_embeddings(&csv)?;
    let docs = common::documents(&corpus, Variant::Par);
    let ids: Vec<String> = docs.iter().map(|d| d.transcript_id.clone()).collect();
    let emb = load_embeddings_for(&csv, &ids)?;
    println!(
        "{} rows x {} dims from {:?}",
        emb.len(),
        emb.h,
        emb.provenance.as_ref().map(|p| &p.model_name)
    );

    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let folds = make_folds(
        &labels,
        None,
        &FoldSpec {
            k: 5,
            strategy: FoldStrategy::Stratified,
            seed: 0,
        },
    )?;
    for (task, key, value) in [
        (Task::Classify, "l2_lambda", 1e-2),
        (Task::Regress, "l1_alpha", 1e-2),
    ] {
        let pipeline = EmbedPipeline::new(task, &docs, &emb, 0)?;
        let mut config = Config::default();
        config.set(key, ParamValue::Float(value));
        let report = cross_validate(&pipeline, &config, &folds)?;
        let m = report.mean;
        match task {
            Task::Classify => println!(
                "logistic {key}={value}: accuracy {:.3}",
                m.accuracy.unwrap_or(f64::NAN)
            ),
            Task::Regress => println!(
                "lasso {key}={value}: MMSE RMSE {:.3}",
                m.rmse.unwrap_or(f64::NAN)
            ),
        }
    }

    let mmse: Vec<f64> = docs
        .iter()
        .map(|d| f64::from(d.mmse.unwrap_or(0)))
        .collect();
    let alpha_max = lasso_alpha_max(&emb.values, &mmse);
    println!("LASSO path (alpha_max = {alpha_max:.3}):");
    for frac in [1.0, 0.5, 0.1, 0.01] {
        let m = train_lasso(&emb.values, &mmse, alpha_max * frac, 0)?;
        println!(
            "  alpha={:.4} nonzero={} bias={:.2}",
            alpha_max * frac,
            m.n_nonzero(),
            m.bias
        );
    }
    Ok(())
}
