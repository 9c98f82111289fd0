//! Fits word and character TF-IDF vocabularies on a generated corpus and
//! prints the heaviest terms of one AD and one control transcript.
//!
//! `cargo run --example tfidf_features`

mod common;

use adscreen::dataset::Variant;
use adscreen::tfidf::{fit_tfidf, Analyzer, StopWords, TfidfParams};

fn main() -> adscreen::Result<()> {
    let docs = common::documents(&common::corpus(40, 3), Variant::Par);
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    for (analyzer, ngram_range) in [(Analyzer::Word, (1, 2)), (Analyzer::Char, (2, 4))] {
        let params = TfidfParams {
            analyzer,
            ngram_range,
            stop_words: StopWords::English,
            max_features: 500,
            sublinear_tf: true,
        };
        let model = fit_tfidf(&texts, &params)?;
        let x = model.transform(&texts);
        let names = model.feature_names();
        println!("{analyzer:?} {ngram_range:?}: {} features", names.len());
        for i in [0, 1] {
            let row = x.row(i);
            let mut terms: Vec<(f64, &str)> = row
                .indices
                .iter()
                .zip(row.values)
                .map(|(&c, &v)| (v, names[c].as_str()))
                .collect();
            terms.sort_by(|a, b| b.0.total_cmp(&a.0));
            let top: Vec<String> = terms
                .iter()
                .take(6)
                .map(|(v, t)| format!("{t:?}={v:.3}"))
                .collect();
            println!(
                "  {} ({:?}): {}",
                docs[i].transcript_id,
                docs[i].label,
                top.join(" ")
            );
        }
    }
    Ok(())
}
