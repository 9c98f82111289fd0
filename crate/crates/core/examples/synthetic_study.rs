//! Runs the full protocol on a generated corpus: TF-IDF + SVM on PAR,
//! SVM + CRF on PAR_SPLT and a LASSO head for MMSE over embeddings.
//!
//! `cargo run --release --example synthetic_study -- [seed]`

use std::time::Instant;

use adscreen::dataset::Variant;
use adscreen::eval::experiment::{
    run_experiment, summary_text, DataSection, FoldsSection, GridSection, ModelSection,
    OutputSection, RunConfig, SeedSection, VariantSection,
};
use adscreen::eval::{ModelKind, Task};
use adscreen::synth::{generate, SynthConfig};

fn config(
    chat_dir: &std::path::Path,
    emb: &std::path::Path,
    variant: Variant,
    kind: ModelKind,
    task: Task,
    seed: u64,
) -> RunConfig {
    RunConfig {
        data: DataSection {
            chat_dir: Some(chat_dir.to_path_buf()),
            embeddings: kind.is_embedding().then(|| emb.to_path_buf()),
            ..Default::default()
        },
        variant: VariantSection { name: variant },
        model: ModelSection {
            kind,
            task,
            params: Default::default(),
            scoring: None,
        },
        grid: GridSection::default(),
        folds: FoldsSection::default(),
        seed: SeedSection { value: Some(seed) },
        output: OutputSection {
            dir: "unused".into(),
        },
    }
}

fn main() -> adscreen::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let corpus = generate(&SynthConfig {
        seed,
        ..Default::default()
    })?;
    let dir = tempfile::tempdir().map_err(|e| adscreen::Error::Internal(e.to_string()))?;
    let chat_dir = dir.path().join("chat");
    let emb = dir.path().join("emb.csv");
    corpus.write_chat_dir(&chat_dir)?;
    corpus.write_embeddings(&emb)?;

    for (variant, kind, task) in [
        (Variant::Par, ModelKind::Svm, Task::Classify),
        (Variant::ParSplt, ModelKind::SvmCrf, Task::Classify),
        (Variant::Par, ModelKind::EmbedLasso, Task::Regress),
    ] {
        let t = Instant::now();
        let out = run_experiment(&config(&chat_dir, &emb, variant, kind, task, seed))?;
        print!(
            "{}",
            summary_text(out.metrics.as_ref().expect("run reports metrics"))
        );
        println!("({:.1}s)\n", t.elapsed().as_secs_f64());
    }
    Ok(())
}
