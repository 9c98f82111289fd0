//! TF-IDF + calibrated SVM on the PAR variant with a simple holdout split.
//!
//! `cargo run --example svm_classifier -- [kernel]`

mod common;

use adscreen::dataset::Variant;
use adscreen::sparse::SparseMatrix;
use adscreen::svm::{train_svc_calibrated, Gamma, Kernel, SvmParams};
use adscreen::tfidf::{fit_tfidf, TfidfParams};

fn main() -> adscreen::Result<()> {
    let kernel: Kernel = serde_json::from_value(serde_json::Value::String(
        std::env::args().nth(1).unwrap_or("rbf".into()),
    ))?;
    let docs = common::documents(&common::corpus(90, 5), Variant::Par);
    let (train, test) = common::holdout(docs.len());
    let texts = |rows: &[usize]| {
        rows.iter()
            .map(|&i| docs[i].text.clone())
            .collect::<Vec<_>>()
    };
    let y = |rows: &[usize]| {
        rows.iter()
            .map(|&i| docs[i].label.sign())
            .collect::<Vec<_>>()
    };

    let tfidf = fit_tfidf(&texts(&train), &TfidfParams::default())?;
    let x_train: SparseMatrix = tfidf.transform(&texts(&train));
    let x_test = tfidf.transform(&texts(&test));
    let params = SvmParams {
        kernel,
        c: 1.0,
        gamma: Gamma::Auto,
        ..SvmParams::default()
    };
    let model = train_svc_calibrated(&x_train, &y(&train), &params, 0)?;
    let decisions = model.predict_decision(&x_test);
    let probs = model.predict_proba(&x_test)?;
    let gold = y(&test);
    let correct = decisions
        .iter()
        .zip(&gold)
        .filter(|(d, g)| (**d >= 0.0) == (**g > 0.0))
        .count();
    println!(
        "{kernel:?} kernel, {} support vectors",
        model.dual_coef.len()
    );
    println!("holdout accuracy {correct}/{}", gold.len());
    for i in 0..5 {
        println!(
            "  {:<8} gold={:+} decision={:+.3} p(AD)={:.3}",
            docs[test[i]].transcript_id, gold[i], decisions[i], probs[i]
        );
    }
    Ok(())
}
