//! Utterance-level base model stacked under a linear-chain CRF: the base
//! model's out-of-fold p(AD) per utterance (plus timing features on
//! PAR_SPLT_T) feeds the CRF, and the last Viterbi state labels the
//! transcript.
//!
//! `cargo run --release --example crf_stacking -- [svm_crf|gbdt_crf]`

mod common;

use adscreen::dataset::Variant;
use adscreen::eval::pipelines::CrfPipeline;
use adscreen::eval::{
    cross_validate, make_folds, Config, FoldSpec, FoldStrategy, ModelKind, ParamValue, Pipeline,
};

fn main() -> adscreen::Result<()> {
    let kind: ModelKind = std::env::args()
        .nth(1)
        .unwrap_or("svm_crf".into())
        .parse()?;
    let corpus = common::corpus(60, 17);
    for variant in [Variant::ParSplt, Variant::ParSpltT] {
        let pipeline = CrfPipeline::new(
            kind,
            variant,
            common::segments(&corpus, variant),
            kind.default_base_config(),
            0,
        )?;
        let labels: Vec<_> = pipeline
            .targets()
            .iter()
            .map(|&t| adscreen::dataset::Label::from_bool(t > 0.5))
            .collect();
        let folds = make_folds(
            &labels,
            None,
            &FoldSpec {
                k: 5,
                strategy: FoldStrategy::Stratified,
                seed: 1,
            },
        )?;
        let mut config = Config::default();
        config.set("c1", ParamValue::Float(0.1));
        config.set("c2", ParamValue::Float(0.05));
        let report = cross_validate(&pipeline, &config, &folds)?;
        println!(
            "{kind} on {}: {} transcripts, 5-fold accuracy {:.3}, macro F1 {:.3}",
            variant.name(),
            pipeline.len(),
            report.mean.accuracy.unwrap_or(f64::NAN),
            report.mean.f1.unwrap_or(f64::NAN)
        );

        let all: Vec<usize> = (0..pipeline.len()).collect();
        let model = pipeline.fit(&config, &all)?;
        let crf = &model.crf;
        for (j, name) in crf.feature_names.iter().enumerate() {
            println!(
                "  state weight {name:<18} control={:+.3} AD={:+.3}",
                crf.state_weights[0][j], crf.state_weights[1][j]
            );
        }
        let t = crf.transition_weights;
        println!(
            "  transitions  C->C={:+.3} C->AD={:+.3} AD->C={:+.3} AD->AD={:+.3}",
            t[0][0], t[0][1], t[1][0], t[1][1]
        );
    }
    Ok(())
}
