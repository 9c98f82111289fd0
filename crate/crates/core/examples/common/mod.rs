//! Shared helpers for the examples: a generated corpus parsed in memory.
#![allow(dead_code)]

use std::path::PathBuf;

use adscreen::chat::{parse_transcript, ParseOptions, Transcript};
use adscreen::dataset::{Dataset, DocumentRecord, SegmentRecord, Variant};
use adscreen::synth::{generate, SynthConfig, SynthCorpus};

pub fn corpus(n: usize, seed: u64) -> SynthCorpus {
    generate(&SynthConfig {
        n_transcripts: n,
        seed,
        ..SynthConfig::default()
    })
    .expect("valid synthetic config")
}

pub fn transcripts(corpus: &SynthCorpus) -> Vec<Transcript> {
    corpus
        .transcripts
        .iter()
        .map(|t| {
            parse_transcript(&t.id, &t.chat, &ParseOptions::default())
                .expect("generated CHAT parses")
                .transcript
        })
        .collect()
}

pub fn documents(corpus: &SynthCorpus, variant: Variant) -> Vec<DocumentRecord> {
    match Dataset::build(variant, &transcripts(corpus)).0 {
        Dataset::Documents { records, .. } => records,
        Dataset::Segments { .. } => panic!("{variant} is utterance level"),
    }
}

pub fn segments(corpus: &SynthCorpus, variant: Variant) -> Vec<SegmentRecord> {
    match Dataset::build(variant, &transcripts(corpus)).0 {
        Dataset::Segments { records, .. } => records,
        Dataset::Documents { .. } => panic!("{variant} is transcript level"),
    }
}

/// Every third unit held out.
pub fn holdout(n: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|i| i % 3 != 0)
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/chat")
}
