//! Synthetic picture-description corpus with planted class signal.
//!
//! AD transcripts use fillers ("um", "uh"), paralinguistic codes and pause
//! markers far more often, speak more slowly and have lower MMSE. The
//! companion embedding matrix makes MMSE linear in `e0`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chat::{Diagnosis, Sex};
use crate::error::Result;
use crate::io;
use crate::linear::{sidecar_path, EmbeddingMatrix, Provenance};

const CONTENT: [&str; 32] = [
    "the",
    "boy",
    "is",
    "on",
    "stool",
    "reaching",
    "for",
    "cookie",
    "jar",
    "girl",
    "wants",
    "one",
    "mother",
    "washing",
    "dishes",
    "water",
    "overflowing",
    "sink",
    "floor",
    "wet",
    "window",
    "curtains",
    "outside",
    "garden",
    "plate",
    "cup",
    "falling",
    "over",
    "she",
    "he",
    "and",
    "kitchen",
];

const MARKERS: [&str; 6] = ["um", "uh", "&=laughs", "(...)", "&-um", "+..."];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_transcripts: usize,
    pub min_utterances: usize,
    pub max_utterances: usize,
    /// Probability that a given AD utterance carries at least one marker.
    pub ad_marker_rate: f64,
    pub control_marker_rate: f64,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_transcripts: 100,
            min_utterances: 5,
            max_utterances: 20,
            ad_marker_rate: 0.75,
            control_marker_rate: 0.05,
            embedding_dim: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTranscript {
    pub id: String,
    pub diagnosis: Diagnosis,
    pub age: u32,
    pub sex: Sex,
    pub mmse: u32,
    pub chat: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub transcripts: Vec<SynthTranscript>,
    pub embeddings: EmbeddingMatrix,
}

fn utterance(rng: &mut ChaCha8Rng, marker_rate: f64) -> String {
    let len = rng.gen_range(4..=9);
    let mut words: Vec<&str> = (0..len).map(|_| *CONTENT.choose(rng).unwrap()).collect();
    if rng.gen_bool(marker_rate) {
        for _ in 0..rng.gen_range(1..=3) {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, MARKERS.choose(rng).unwrap());
        }
    }
    // occasional retracing markup, stripped by cleaning
    if rng.gen_bool(0.1) && words.len() > 2 {
        words[1] = "<the> [/]";
    }
    words.join(" ") + " ."
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut transcripts = Vec::with_capacity(cfg.n_transcripts);
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for i in 0..cfg.n_transcripts {
        let ad = i % 2 == 0;
        let id = format!("SYN{:03}", i + 1);
        let mmse: u32 = if ad {
            rng.gen_range(8..=24)
        } else {
            rng.gen_range(25..=30)
        };
        let age = rng.gen_range(55..=85);
        let sex = if rng.gen_bool(0.5) {
            Sex::Male
        } else {
            Sex::Female
        };
        let (group, rate) = if ad {
            ("ProbableAD", cfg.ad_marker_rate)
        } else {
            ("Control", cfg.control_marker_rate)
        };
        let mut chat = String::new();
        chat.push_str("@UTF8\n@Begin\n@Languages:\teng\n");
        chat.push_str("@Participants:\tPAR Participant, INV Investigator\n");
        let sex_s = if sex == Sex::Male { "male" } else { "female" };
        chat.push_str(&format!(
            "@ID:\teng|Synth|PAR|{age};|{sex_s}|{group}||Participant|{mmse}||\n"
        ));
        chat.push_str("@ID:\teng|Synth|INV|||||Investigator|||\n");
        chat.push_str(&format!("@Media:\t{id}, audio\n"));
        chat.push_str("*INV:\ttell me everything you see going on in that picture .\n");
        let mut clock: u64 = 2_000;
        let n_utt = rng.gen_range(cfg.min_utterances..=cfg.max_utterances);
        for _ in 0..n_utt {
            let pause: u64 = if ad {
                rng.gen_range(800..3_000)
            } else {
                rng.gen_range(100..900)
            };
            let dur: u64 = if ad {
                rng.gen_range(2_500..6_000)
            } else {
                rng.gen_range(1_500..3_500)
            };
            let start = clock + pause;
            let end = start + dur;
            clock = end;
            chat.push_str(&format!(
                "*PAR:\t{} \u{15}{start}_{end}\u{15}\n",
                utterance(&mut rng, rate)
            ));
            if rng.gen_bool(0.15) {
                chat.push_str("%mor:\tdet|the n|boy\n");
            }
            if rng.gen_bool(0.1) {
                chat.push_str("*INV:\tmhm .\n");
            }
        }
        chat.push_str("@End\n");

        let mut row = vec![(mmse as f64 - 20.0) / 5.0 + rng.gen_range(-0.02..0.02)];
        row.extend((1..cfg.embedding_dim).map(|_| rng.gen_range(-1.0..1.0)));
        rows.push(row);
        ids.push(id.clone());
        transcripts.push(SynthTranscript {
            id,
            diagnosis: if ad {
                Diagnosis::AD
            } else {
                Diagnosis::Control
            },
            age,
            sex,
            mmse,
            chat,
        });
    }
    let provenance = Provenance {
        model_name: "synthetic".into(),
        pooling: "none".into(),
        layer: 0,
        h: cfg.embedding_dim,
    };
    let embeddings = EmbeddingMatrix::new(ids, rows, Some(provenance))?;
    Ok(SynthCorpus {
        transcripts,
        embeddings,
    })
}

impl SynthCorpus {
    /// Writes `<dir>/<id>.cha` for every transcript.
    pub fn write_chat_dir(&self, dir: &Path) -> Result<()> {
        io::create_dir_all(dir)?;
        for t in &self.transcripts {
            io::write_atomic(&dir.join(format!("{}.cha", t.id)), t.chat.as_bytes())?;
        }
        Ok(())
    }

    /// Writes the embedding CSV and its JSON sidecar.
    pub fn write_embeddings(&self, csv_path: &Path) -> Result<()> {
        io::write_atomic(csv_path, self.embeddings.to_csv()?.as_bytes())?;
        io::write_json(&sidecar_path(csv_path), &self.embeddings.provenance)
    }
}
