//! TF-IDF vectorizer.
//!
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`; cells are `tf * idf` with
//! `tf` the raw count or `1 + ln(count)`, and every row is L2-normalized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    Word,
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopWords {
    English,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TfidfParams {
    pub analyzer: Analyzer,
    pub ngram_range: (usize, usize),
    pub stop_words: StopWords,
    pub max_features: usize,
    pub sublinear_tf: bool,
}

impl Default for TfidfParams {
    fn default() -> Self {
        TfidfParams {
            analyzer: Analyzer::Word,
            ngram_range: (1, 1),
            stop_words: StopWords::None,
            max_features: 1000,
            sublinear_tf: false,
        }
    }
}

impl TfidfParams {
    /// Word analyzer defaults to unigrams, char analyzer to 2..=4-grams.
    pub fn with_analyzer(analyzer: Analyzer) -> Self {
        TfidfParams {
            analyzer,
            ngram_range: match analyzer {
                Analyzer::Word => (1, 1),
                Analyzer::Char => (2, 4),
            },
            ..TfidfParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if lo < 1 || lo > hi {
            return Err(Error::InvalidParams(format!("ngram_range ({lo}, {hi})")));
        }
        if self.max_features == 0 {
            return Err(Error::InvalidParams("max_features must be positive".into()));
        }
        Ok(())
    }
}

/// The fixed English stop-word list shipped with the crate (318 entries).
pub fn english_stop_words() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        include_str!("stop_words_en.txt")
            .split_whitespace()
            .collect()
    })
}

/// Lowercased runs of alphanumeric characters.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Terms of one document under `params`. Stop words are dropped before word
/// n-grams are formed; the char analyzer ignores the stop-word setting.
pub fn analyze(text: &str, params: &TfidfParams) -> Vec<String> {
    let mut terms = Vec::new();
    for_each_term(text, params, |t| terms.push(t.to_string()));
    terms
}

/// Calls `f` on every term of `text`, in the order [`analyze`] returns them.
fn for_each_term(text: &str, params: &TfidfParams, mut f: impl FnMut(&str)) {
    let (lo, hi) = params.ngram_range;
    match params.analyzer {
        Analyzer::Word => {
            let mut tokens = word_tokens(text);
            if params.stop_words == StopWords::English {
                let stop = english_stop_words();
                tokens.retain(|t| !stop.contains(t.as_str()));
            }
            let mut buf = String::new();
            for n in lo..=hi {
                for w in tokens.windows(n) {
                    if n == 1 {
                        f(&w[0]);
                    } else {
                        buf.clear();
                        for (i, tok) in w.iter().enumerate() {
                            if i > 0 {
                                buf.push(' ');
                            }
                            buf.push_str(tok);
                        }
                        f(&buf);
                    }
                }
            }
        }
        Analyzer::Char => {
            let lower = text.to_lowercase();
            let bounds: Vec<usize> = lower
                .char_indices()
                .map(|(i, _)| i)
                .chain([lower.len()])
                .collect();
            let chars = bounds.len() - 1;
            for n in lo..=hi {
                for i in 0..(chars + 1).saturating_sub(n) {
                    f(&lower[bounds[i]..bounds[i + n]]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub params: TfidfParams,
}

pub fn fit_tfidf<S: AsRef<str>>(corpus: &[S], params: &TfidfParams) -> Result<TfidfModel> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidParams("empty corpus".into()));
    }
    // term -> (total count, document frequency, last document seen)
    let mut stats: HashMap<String, (u64, u64, usize)> = HashMap::new();
    for (d, doc) in corpus.iter().enumerate() {
        for_each_term(doc.as_ref(), params, |t| match stats.get_mut(t) {
            Some(e) => {
                e.0 += 1;
                if e.2 != d {
                    e.1 += 1;
                    e.2 = d;
                }
            }
            None => {
                stats.insert(t.to_string(), (1, 1, d));
            }
        });
    }
    if stats.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let df: HashMap<&str, u64> = stats.iter().map(|(t, e)| (t.as_str(), e.1)).collect();

    let mut ranked: Vec<(String, u64)> = stats.iter().map(|(t, e)| (t.clone(), e.0)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(params.max_features);
    let mut kept: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
    kept.sort();

    let n = corpus.len() as f64;
    let idf = kept
        .iter()
        .map(|t| ((1.0 + n) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0)
        .collect();
    let vocabulary = kept.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
    Ok(TfidfModel {
        vocabulary,
        idf,
        params: *params,
    })
}

impl TfidfModel {
    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    pub fn transform<S: AsRef<str>>(&self, docs: &[S]) -> SparseMatrix {
        let vocab: HashMap<&str, usize> = self
            .vocabulary
            .iter()
            .map(|(t, &i)| (t.as_str(), i))
            .collect();
        let mut m = SparseMatrix::empty(self.n_features());
        for doc in docs {
            let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
            for_each_term(doc.as_ref(), &self.params, |t| {
                if let Some(&col) = vocab.get(t) {
                    *counts.entry(col).or_default() += 1;
                }
            });
            let mut row: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(col, c)| {
                    let c = c as f64;
                    let tf = if self.params.sublinear_tf {
                        1.0 + c.ln()
                    } else {
                        c
                    };
                    (col, tf * self.idf[col])
                })
                .collect();
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for e in &mut row {
                    e.1 /= norm;
                }
            }
            m.push_row(row);
        }
        m
    }

    /// Column index to term.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.n_features()];
        for (t, &i) in &self.vocabulary {
            names[i] = t.clone();
        }
        names
    }
}

pub fn transform_tfidf<S: AsRef<str>>(model: &TfidfModel, docs: &[S]) -> SparseMatrix {
    model.transform(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(max_features: usize, sublinear_tf: bool) -> TfidfParams {
        TfidfParams {
            max_features,
            sublinear_tf,
            ..TfidfParams::default()
        }
    }

    #[test]
    fn idf_by_hand() {
        let m = fit_tfidf(&["a b a", "b c"], &plain(100, false)).unwrap();
        let idf = |t: &str| m.idf[m.vocabulary[t]];
        let expected = (1.5f64).ln() + 1.0;
        assert!((idf("a") - expected).abs() < 1e-12);
        assert!((idf("c") - expected).abs() < 1e-12);
        assert!((idf("a") - 1.4054651081081644).abs() < 1e-12);
        assert_eq!(idf("b"), 1.0);
    }

    #[test]
    fn sublinear_transform_by_hand() {
        let m = fit_tfidf(&["a b a", "b c"], &plain(100, true)).unwrap();
        let x = m.transform(&["a a b"]);
        let a = (1.0 + 2f64.ln()) * (1.5f64.ln() + 1.0);
        let norm = (a * a + 1.0).sqrt();
        assert!((x.row(0).get(m.vocabulary["a"]) - a / norm).abs() < 1e-12);
        assert!((x.row(0).get(m.vocabulary["a"]) - 0.9219).abs() < 1e-4);
        assert!((x.row(0).get(m.vocabulary["b"]) - 0.3874).abs() < 1e-4);
    }

    #[test]
    fn all_stop_words_is_empty_vocabulary() {
        let p = TfidfParams {
            stop_words: StopWords::English,
            ..TfidfParams::default()
        };
        assert!(matches!(
            fit_tfidf(&["the the the"], &p),
            Err(Error::EmptyVocabulary)
        ));
        assert_eq!(english_stop_words().len(), 318);
    }

    #[test]
    fn max_features_keeps_most_frequent() {
        let m = fit_tfidf(&["a a b", "a c"], &plain(1, false)).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["a"]);
        // tie between b and c broken lexicographically
        let m = fit_tfidf(&["a a b", "a c"], &plain(2, false)).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn oov_rows_are_zero_and_rows_unit_norm() {
        let corpus = [
            "the boy um fell",
            "uh the cookie jar &=laughs",
            "mother um dishes",
        ];
        let m = fit_tfidf(&corpus, &plain(50, true)).unwrap();
        let x = m.transform(&["zzz"]);
        assert_eq!(x.row(0).indices.len(), 0);
        let x = m.transform(&corpus);
        for i in 0..x.rows {
            assert!((x.row(i).norm_sq() - 1.0).abs() < 1e-12);
        }
        assert!(m.vocabulary.contains_key("um"));
        assert!(m.vocabulary.contains_key("laughs"));
    }

    #[test]
    fn char_and_bigram_analyzers() {
        let p = TfidfParams::with_analyzer(Analyzer::Char);
        assert_eq!(p.ngram_range, (2, 4));
        let terms = analyze(
            "Ab c",
            &TfidfParams {
                ngram_range: (2, 2),
                ..p
            },
        );
        assert_eq!(terms, vec!["ab", "b ", " c"]);
        let p = TfidfParams {
            ngram_range: (1, 2),
            stop_words: StopWords::English,
            ..TfidfParams::default()
        };
        assert_eq!(analyze("the boy fell", &p), vec!["boy", "fell", "boy fell"]);
        assert!(TfidfParams {
            ngram_range: (2, 1),
            ..p
        }
        .validate()
        .is_err());
    }

    #[test]
    fn idf_decreases_with_document_frequency() {
        let m = fit_tfidf(&["x y z", "x y", "x"], &plain(10, false)).unwrap();
        let idf = |t: &str| m.idf[m.vocabulary[t]];
        assert!(idf("z") > idf("y") && idf("y") > idf("x"));
        assert!(m.idf.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn scaling_counts_keeps_direction_for_raw_tf() {
        let m = fit_tfidf(&["a b b c", "c d"], &plain(10, false)).unwrap();
        let x = m.transform(&["a b b", "a a b b b b"]);
        for c in 0..m.n_features() {
            assert!((x.row(0).get(c) - x.row(1).get(c)).abs() < 1e-12);
        }
    }
}
