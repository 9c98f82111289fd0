use adscreen::chat::clean_utterance;
use adscreen::dataset::Label;
use adscreen::eval::{classification_metrics, make_folds, ConfusionMatrix, FoldSpec, FoldStrategy};
use adscreen::sparse::SparseMatrix;
use adscreen::tfidf::{fit_tfidf, Analyzer, StopWords, TfidfParams};
use proptest::prelude::*;

fn labels(bits: &[bool]) -> Vec<Label> {
    bits.iter().map(|&b| Label::from_bool(b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cleaning_is_idempotent(raw in "[a-z &=+/:.()\\[\\]<>*\u{15}0-9_-]{0,60}") {
        let (once, _) = clean_utterance(&raw);
        prop_assert_eq!(&clean_utterance(&once).0, &once);
        let markup = ['[', ']', '<', '>', '\u{15}'];
        prop_assert!(!once.contains(markup), "markup left in {:?}", once);
    }

    #[test]
    fn stratified_folds_partition_rows(bits in prop::collection::vec(any::<bool>(), 4..60), k in 2usize..5, seed: u64) {
        let y = labels(&bits);
        let spec = FoldSpec { k, strategy: FoldStrategy::Stratified, seed };
        if let Ok(folds) = make_folds(&y, None, &spec) {
            prop_assert_eq!(folds.len(), k);
            let mut seen = vec![0; y.len()];
            for f in &folds {
                for &i in &f.valid { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.valid.len(), y.len());
                prop_assert!(f.train.iter().all(|i| !f.valid.contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let pos = bits.iter().filter(|&&b| b).count();
            for f in &folds {
                let p = f.valid.iter().filter(|&&i| bits[i]).count();
                prop_assert!((p as f64 - pos as f64 / k as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval(pred in prop::collection::vec(any::<bool>(), 1..50), gold_seed in prop::collection::vec(any::<bool>(), 50)) {
        let p = labels(&pred);
        let g = labels(&gold_seed[..pred.len()]);
        let cm = ConfusionMatrix::from_labels(&p, &g).unwrap();
        prop_assert_eq!(cm.total(), pred.len());
        let r = classification_metrics(&cm);
        for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn tfidf_rows_are_unit_or_empty(docs in prop::collection::vec("[a-d ]{0,20}", 1..8), sublinear: bool) {
        let params = TfidfParams {
            analyzer: Analyzer::Word,
            ngram_range: (1, 2),
            stop_words: StopWords::None,
            max_features: 50,
            sublinear_tf: sublinear,
        };
        if let Ok(model) = fit_tfidf(&docs, &params) {
            let x = model.transform(&docs);
            for i in 0..docs.len() {
                let n = x.row(i).norm_sq();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
                prop_assert!(x.row(i).values.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn sparse_dense_round_trip(rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 3), 0..10)) {
        let m = SparseMatrix::from_dense(&rows);
        prop_assert_eq!(m.to_dense(), rows.clone());
        prop_assert_eq!(m.nnz(), rows.iter().flatten().filter(|&&v| v != 0.0).count());
    }
}
