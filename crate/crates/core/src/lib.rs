//! Screening for Alzheimer's dementia from spontaneous-speech transcripts.
//!
//! The crate covers the full text-only pipeline:
//!
//! - [`chat`]: CHAT transcript parsing and cleaning
//! - [`dataset`]: transcript-level (PAR, PAR_INV, PAR_TIME) and utterance-level
//!   (PAR_SPLT, PAR_SPLT_T, PAR_SPLT_T_D) dataset variants
//! - [`tfidf`]: TF-IDF features over [`sparse::SparseMatrix`]
//! - [`svm`]: SMO-trained kernel SVC and epsilon-SVR with Platt calibration
//! - [`gbdt`]: gradient-boosted regression trees
//! - [`crf`]: linear-chain CRF stacked on per-utterance probabilities
//! - [`linear`]: logistic regression and LASSO heads over embedding matrices
//! - [`eval`]: folds, grid search, metrics and end-to-end experiments
//! - [`cli`]: the `adscreen` command line
//!
//! Runnable walkthroughs live in `examples/`.

pub mod chat;
pub mod cli;
pub mod crf;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod io;
pub mod linear;
pub mod sparse;
pub mod svm;
pub mod synth;
pub mod tfidf;

pub use error::{Error, Result};
