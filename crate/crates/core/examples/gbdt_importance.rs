//! Gradient-boosted trees on TF-IDF features, listing the terms that carry
//! the most split gain.
//!
//! `cargo run --example gbdt_importance`

mod common;

use adscreen::dataset::Variant;
use adscreen::gbdt::{train_gbdt, GbdtParams, Loss};
use adscreen::tfidf::{fit_tfidf, TfidfParams};

fn main() -> adscreen::Result<()> {
    let docs = common::documents(&common::corpus(90, 13), Variant::Par);
    let (train, test) = common::holdout(docs.len());
    let texts = |rows: &[usize]| {
        rows.iter()
            .map(|&i| docs[i].text.clone())
            .collect::<Vec<_>>()
    };
    let y = |rows: &[usize]| {
        rows.iter()
            .map(|&i| f64::from(u8::from(docs[i].label.is_ad())))
            .collect::<Vec<_>>()
    };

    let tfidf = fit_tfidf(&texts(&train), &TfidfParams::default())?;
    let params = GbdtParams {
        n_estimators: 100,
        max_depth: 3,
        learning_rate: 0.1,
        ..GbdtParams::default()
    };
    let model = train_gbdt(
        &tfidf.transform(&texts(&train)),
        &y(&train),
        Loss::Logistic,
        &params,
    )?;
    let probs = model.predict(&tfidf.transform(&texts(&test)));
    let correct = probs
        .iter()
        .zip(y(&test))
        .filter(|(p, g)| (**p >= 0.5) == (*g > 0.5))
        .count();
    println!("holdout accuracy {correct}/{}", test.len());
    let names = tfidf.feature_names();
    for (feature, gain) in model.top_features(10) {
        println!("  {:<20} {gain:.4}", names[feature]);
    }
    Ok(())
}
