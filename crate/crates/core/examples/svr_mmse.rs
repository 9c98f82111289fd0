//! Epsilon-SVR predicting MMSE from TF-IDF features.
//!
//! `cargo run --example svr_mmse`

mod common;

use adscreen::dataset::Variant;
use adscreen::eval::rmse;
use adscreen::svm::{train_svr, Kernel, SvmParams};
use adscreen::tfidf::{fit_tfidf, TfidfParams};

fn main() -> adscreen::Result<()> {
    let docs = common::documents(&common::corpus(90, 9), Variant::Par);
    let (train, test) = common::holdout(docs.len());
    let texts = |rows: &[usize]| {
        rows.iter()
            .map(|&i| docs[i].text.clone())
            .collect::<Vec<_>>()
    };
    let mmse = |rows: &[usize]| {
        rows.iter()
            .map(|&i| f64::from(docs[i].mmse.expect("synthetic rows carry MMSE")))
            .collect::<Vec<_>>()
    };

    let tfidf = fit_tfidf(&texts(&train), &TfidfParams::default())?;
    let params = SvmParams {
        kernel: Kernel::Rbf,
        c: 10.0,
        epsilon: 0.5,
        ..SvmParams::default()
    };
    let model = train_svr(&tfidf.transform(&texts(&train)), &mmse(&train), &params, 0)?;
    let preds = model.predict_svr(&tfidf.transform(&texts(&test)));
    let gold = mmse(&test);
    let mean = mmse(&train).iter().sum::<f64>() / train.len() as f64;
    println!("SVR holdout RMSE {:.2}", rmse(&preds, &gold)?);
    println!(
        "predict-the-mean RMSE {:.2}",
        rmse(&vec![mean; gold.len()], &gold)?
    );
    for i in 0..5 {
        println!(
            "  {:<8} gold={:>2} predicted={:.1}",
            docs[test[i]].transcript_id, gold[i], preds[i]
        );
    }
    Ok(())
}
