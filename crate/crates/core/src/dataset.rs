//! Transcript-level and utterance-level dataset variants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chat::{Diagnosis, Sex, Speaker, Transcript};
use crate::error::{Error, Result};

/// Binary target. `Control` is the negative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Control,
    AD,
}

impl Label {
    pub fn from_diagnosis(d: Diagnosis) -> Option<Label> {
        match d {
            Diagnosis::AD => Some(Label::AD),
            Diagnosis::Control => Some(Label::Control),
            Diagnosis::Unknown => None,
        }
    }

    pub fn is_ad(self) -> bool {
        self == Label::AD
    }

    pub fn from_bool(ad: bool) -> Label {
        if ad {
            Label::AD
        } else {
            Label::Control
        }
    }

    /// `+1.0` for AD, `-1.0` for Control.
    pub fn sign(self) -> f64 {
        if self.is_ad() {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PAR")]
    Par,
    #[serde(rename = "PAR_INV")]
    ParInv,
    #[serde(rename = "PAR_TIME")]
    ParTime,
    #[serde(rename = "PAR_SPLT")]
    ParSplt,
    #[serde(rename = "PAR_SPLT_T")]
    ParSpltT,
    #[serde(rename = "PAR_SPLT_T_D")]
    ParSpltTD,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Par,
        Variant::ParInv,
        Variant::ParTime,
        Variant::ParSplt,
        Variant::ParSpltT,
        Variant::ParSpltTD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Par => "PAR",
            Variant::ParInv => "PAR_INV",
            Variant::ParTime => "PAR_TIME",
            Variant::ParSplt => "PAR_SPLT",
            Variant::ParSpltT => "PAR_SPLT_T",
            Variant::ParSpltTD => "PAR_SPLT_T_D",
        }
    }

    pub fn is_utterance_level(self) -> bool {
        matches!(
            self,
            Variant::ParSplt | Variant::ParSpltT | Variant::ParSpltTD
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('+', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAggregates {
    pub mean_dur_ms: f64,
    pub min_dur_ms: f64,
    pub max_dur_ms: f64,
    pub median_dur_ms: f64,
    pub mean_gap_ms: f64,
}

impl TimeAggregates {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.mean_dur_ms,
            self.min_dur_ms,
            self.max_dur_ms,
            self.median_dur_ms,
            self.mean_gap_ms,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub transcript_id: String,
    pub text: String,
    pub label: Label,
    pub mmse: Option<u32>,
    pub aggregates: Option<TimeAggregates>,
}

/// Per-utterance timing. Raw milliseconds; scaling happens fold-locally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalFeatures {
    pub duration_ms: f64,
    pub gap_before_ms: f64,
    pub mean_dur_ms: f64,
    pub max_dur_ms: f64,
    pub min_dur_ms: f64,
    /// Set when this utterance had no time code; timing values are then 0.
    pub missing: bool,
}

impl TemporalFeatures {
    pub const NAMES: [&'static str; 6] = [
        "duration_ms",
        "gap_before_ms",
        "mean_dur_ms",
        "max_dur_ms",
        "min_dur_ms",
        "time_missing",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.duration_ms,
            self.gap_before_ms,
            self.mean_dur_ms,
            self.max_dur_ms,
            self.min_dur_ms,
            if self.missing { 1.0 } else { 0.0 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_years: f64,
    /// male = 0, female = 1
    pub sex_indicator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub transcript_id: String,
    pub utterance_index: usize,
    pub text: String,
    pub label: Label,
    pub mmse: Option<u32>,
    pub temporal: Option<TemporalFeatures>,
    pub demographics: Option<Demographics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Built<T> {
    pub records: Vec<T>,
    pub warnings: Vec<String>,
}

fn labelled(t: &Transcript, warnings: &mut Vec<String>) -> Option<Label> {
    let label = Label::from_diagnosis(t.meta.diagnosis);
    if label.is_none() {
        warnings.push(format!("MissingLabel: transcript {} skipped", t.id()));
    }
    label
}

fn durations_and_gaps(t: &Transcript) -> (Vec<f64>, Vec<f64>) {
    let mut durations = Vec::new();
    let mut gaps = Vec::new();
    let mut prev_end: Option<u64> = None;
    for u in t.participant_utterances() {
        if let Some(iv) = u.interval {
            durations.push(iv.duration_ms() as f64);
            if let Some(end) = prev_end {
                gaps.push(iv.start_ms as f64 - end as f64);
            }
            prev_end = Some(iv.end_ms);
        }
    }
    (durations, gaps)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Duration statistics over the participant utterances that carry time codes.
pub fn time_aggregates(t: &Transcript) -> Option<TimeAggregates> {
    let (durations, gaps) = durations_and_gaps(t);
    if durations.is_empty() {
        return None;
    }
    Some(TimeAggregates {
        mean_dur_ms: mean(&durations),
        min_dur_ms: durations.iter().copied().fold(f64::INFINITY, f64::min),
        max_dur_ms: durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        median_dur_ms: median(&durations),
        mean_gap_ms: mean(&gaps),
    })
}

/// PAR, PAR+INV and PAR+TIME documents: one paragraph per transcript.
pub fn build_transcript_dataset(
    transcripts: &[Transcript],
    include_interviewer: bool,
    include_time_aggregates: bool,
) -> Built<DocumentRecord> {
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    for t in transcripts {
        let Some(label) = labelled(t, &mut warnings) else {
            continue;
        };
        let text = t
            .utterances
            .iter()
            .filter(|u| include_interviewer || u.speaker == Speaker::PAR)
            .map(|u| u.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let aggregates = if include_time_aggregates {
            let agg = time_aggregates(t);
            if agg.is_none() {
                warnings.push(format!("transcript {} has no time codes", t.id()));
            }
            agg
        } else {
            None
        };
        records.push(DocumentRecord {
            transcript_id: t.id().to_string(),
            text,
            label,
            mmse: t.meta.mmse,
            aggregates,
        });
    }
    Built { records, warnings }
}

/// PAR_SPLT family: one record per participant utterance, ordered per transcript.
pub fn build_utterance_dataset(
    transcripts: &[Transcript],
    with_temporal: bool,
    with_demographics: bool,
) -> Built<SegmentRecord> {
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    for t in transcripts {
        let Some(label) = labelled(t, &mut warnings) else {
            continue;
        };
        let demographics = if with_demographics {
            let sex = match t.meta.sex {
                Sex::Male => Some(0.0),
                Sex::Female => Some(1.0),
                Sex::Unknown => None,
            };
            match (t.meta.age, sex) {
                (Some(age), Some(sex_indicator)) => Some(Demographics {
                    age_years: age as f64,
                    sex_indicator,
                }),
                _ => {
                    warnings.push(format!(
                        "transcript {} excluded: unknown age or sex for demographic features",
                        t.id()
                    ));
                    continue;
                }
            }
        } else {
            None
        };

        let (durations, _) = durations_and_gaps(t);
        let (mean_d, min_d, max_d) = if durations.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            (
                mean(&durations),
                durations.iter().copied().fold(f64::INFINITY, f64::min),
                durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };

        let mut prev_end: Option<u64> = None;
        for u in t.participant_utterances() {
            let temporal = with_temporal.then(|| match u.interval {
                Some(iv) => {
                    let gap = prev_end.map_or(0.0, |e| iv.start_ms as f64 - e as f64);
                    prev_end = Some(iv.end_ms);
                    TemporalFeatures {
                        duration_ms: iv.duration_ms() as f64,
                        gap_before_ms: gap,
                        mean_dur_ms: mean_d,
                        max_dur_ms: max_d,
                        min_dur_ms: min_d,
                        missing: false,
                    }
                }
                None => TemporalFeatures {
                    duration_ms: 0.0,
                    gap_before_ms: 0.0,
                    mean_dur_ms: mean_d,
                    max_dur_ms: max_d,
                    min_dur_ms: min_d,
                    missing: true,
                },
            });
            records.push(SegmentRecord {
                transcript_id: t.id().to_string(),
                utterance_index: u.index,
                text: u.text.clone(),
                label,
                mmse: t.meta.mmse,
                temporal,
                demographics,
            });
        }
    }
    Built { records, warnings }
}

/// A materialized dataset variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Documents {
        variant: Variant,
        records: Vec<DocumentRecord>,
    },
    Segments {
        variant: Variant,
        records: Vec<SegmentRecord>,
    },
}

impl Dataset {
    pub fn build(variant: Variant, transcripts: &[Transcript]) -> (Dataset, Vec<String>) {
        match variant {
            Variant::Par | Variant::ParInv | Variant::ParTime => {
                let b = build_transcript_dataset(
                    transcripts,
                    variant == Variant::ParInv,
                    variant == Variant::ParTime,
                );
                (
                    Dataset::Documents {
                        variant,
                        records: b.records,
                    },
                    b.warnings,
                )
            }
            Variant::ParSplt | Variant::ParSpltT | Variant::ParSpltTD => {
                let b = build_utterance_dataset(
                    transcripts,
                    variant != Variant::ParSplt,
                    variant == Variant::ParSpltTD,
                );
                (
                    Dataset::Segments {
                        variant,
                        records: b.records,
                    },
                    b.warnings,
                )
            }
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Dataset::Documents { variant, .. } | Dataset::Segments { variant, .. } => *variant,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Documents { records, .. } => records.len(),
            Dataset::Segments { records, .. } => records.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the header line `{"variant": ...}` followed by one record per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Header {
            variant: self.variant(),
        })?;
        out.push('\n');
        match self {
            Dataset::Documents { records, .. } => {
                for r in records {
                    out.push_str(&serde_json::to_string(r)?);
                    out.push('\n');
                }
            }
            Dataset::Segments { records, .. } => {
                for r in records {
                    out.push_str(&serde_json::to_string(r)?);
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Dataset> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Header = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Data("empty dataset file".into()))?,
        )?;
        let variant = header.variant;
        if variant.is_utterance_level() {
            let records = lines
                .map(serde_json::from_str)
                .collect::<std::result::Result<Vec<SegmentRecord>, _>>()?;
            Ok(Dataset::Segments { variant, records })
        } else {
            let records = lines
                .map(serde_json::from_str)
                .collect::<std::result::Result<Vec<DocumentRecord>, _>>()?;
            Ok(Dataset::Documents { variant, records })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
}

/// Segments grouped back into per-transcript sequences, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGroup {
    pub transcript_id: String,
    pub label: Label,
    pub mmse: Option<u32>,
    /// Indices into the segment list, in utterance order.
    pub rows: Vec<usize>,
}

pub fn group_segments(records: &[SegmentRecord]) -> Vec<SegmentGroup> {
    let mut order: Vec<SegmentGroup> = Vec::new();
    let mut pos: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let g = *pos.entry(r.transcript_id.as_str()).or_insert_with(|| {
            order.push(SegmentGroup {
                transcript_id: r.transcript_id.clone(),
                label: r.label,
                mmse: r.mmse,
                rows: Vec::new(),
            });
            order.len() - 1
        });
        order[g].rows.push(i);
    }
    for g in &mut order {
        g.rows.sort_by_key(|&i| records[i].utterance_index);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{Interval, TranscriptMeta, Utterance};

    fn transcript(
        id: &str,
        diagnosis: Diagnosis,
        tiers: &[(Speaker, &str, Option<(u64, u64)>)],
    ) -> Transcript {
        Transcript {
            meta: TranscriptMeta {
                transcript_id: id.into(),
                age: Some(70),
                sex: Sex::Female,
                diagnosis,
                mmse: Some(20),
            },
            utterances: tiers
                .iter()
                .enumerate()
                .map(|(index, (speaker, text, iv))| Utterance {
                    speaker: *speaker,
                    text: text.to_string(),
                    interval: iv.map(|(s, e)| Interval {
                        start_ms: s,
                        end_ms: e,
                    }),
                    index,
                })
                .collect(),
        }
    }

    fn sample() -> Transcript {
        transcript(
            "t1",
            Diagnosis::AD,
            &[
                (Speaker::PAR, "a .", None),
                (Speaker::INV, "b ?", None),
                (Speaker::PAR, "c .", None),
            ],
        )
    }

    #[test]
    fn paragraph_concatenation() {
        let t = [sample()];
        assert_eq!(
            build_transcript_dataset(&t, false, false).records[0].text,
            "a . c ."
        );
        assert_eq!(
            build_transcript_dataset(&t, true, false).records[0].text,
            "a . b ? c ."
        );
    }

    #[test]
    fn unknown_diagnosis_is_skipped() {
        let t = transcript("u", Diagnosis::Unknown, &[(Speaker::PAR, "x", None)]);
        let built = build_transcript_dataset(&[t.clone()], false, false);
        assert!(built.records.is_empty());
        assert_eq!(built.warnings.len(), 1);
        assert!(build_utterance_dataset(&[t], false, false)
            .records
            .is_empty());
    }

    #[test]
    fn segment_counts_and_grouping() {
        let tiers = [
            (Speaker::PAR, "x", None),
            (Speaker::INV, "q", None),
            (Speaker::PAR, "y", None),
            (Speaker::PAR, "z", None),
        ];
        let ts = [
            transcript("t1", Diagnosis::AD, &tiers),
            transcript("t2", Diagnosis::Control, &tiers),
        ];
        let built = build_utterance_dataset(&ts, false, false);
        assert_eq!(built.records.len(), 6);
        let groups = group_segments(&built.records);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].rows, vec![0, 1, 2]);
        assert_eq!(groups[1].label, Label::Control);
        assert!(built.records.iter().all(|r| r.mmse == Some(20)));
    }

    #[test]
    fn temporal_features_by_hand() {
        let t = transcript(
            "t",
            Diagnosis::AD,
            &[
                (Speaker::PAR, "x", Some((0, 1000))),
                (Speaker::INV, "q", Some((1100, 1200))),
                (Speaker::PAR, "y", Some((1500, 2500))),
            ],
        );
        let recs = build_utterance_dataset(&[t], true, false).records;
        let f: Vec<_> = recs.iter().map(|r| r.temporal.unwrap()).collect();
        assert_eq!((f[0].duration_ms, f[1].duration_ms), (1000.0, 1000.0));
        assert_eq!((f[0].gap_before_ms, f[1].gap_before_ms), (0.0, 500.0));
        assert_eq!(
            (f[0].mean_dur_ms, f[0].max_dur_ms, f[0].min_dur_ms),
            (1000.0, 1000.0, 1000.0)
        );
        assert!(!f[0].missing);
    }

    #[test]
    fn missing_interval_is_imputed_and_flagged() {
        let t = transcript(
            "t",
            Diagnosis::AD,
            &[
                (Speaker::PAR, "x", Some((0, 400))),
                (Speaker::PAR, "y", None),
            ],
        );
        let recs = build_utterance_dataset(&[t], true, false).records;
        let f = recs[1].temporal.unwrap();
        assert!(f.missing);
        assert_eq!(
            (f.duration_ms, f.gap_before_ms, f.mean_dur_ms),
            (0.0, 0.0, 400.0)
        );
    }

    #[test]
    fn demographics_need_known_sex() {
        let mut t = sample();
        let recs = build_utterance_dataset(&[t.clone()], true, true).records;
        assert_eq!(recs[0].demographics.unwrap().sex_indicator, 1.0);
        t.meta.sex = Sex::Unknown;
        let built = build_utterance_dataset(&[t], true, true);
        assert!(built.records.is_empty());
        assert_eq!(built.warnings.len(), 1);
    }

    #[test]
    fn aggregates_include_median() {
        let t = transcript(
            "t",
            Diagnosis::Control,
            &[
                (Speaker::PAR, "x", Some((0, 100))),
                (Speaker::PAR, "y", Some((200, 500))),
                (Speaker::PAR, "z", Some((600, 1600))),
            ],
        );
        let agg = time_aggregates(&t).unwrap();
        assert_eq!(agg.median_dur_ms, 300.0);
        assert_eq!((agg.min_dur_ms, agg.max_dur_ms), (100.0, 1000.0));
        assert_eq!(agg.mean_gap_ms, 100.0);
        let built = build_transcript_dataset(&[t], false, true);
        assert!(built.records[0].aggregates.is_some());
    }

    #[test]
    fn dataset_jsonl_round_trip() {
        let (ds, _) = Dataset::build(Variant::ParSpltT, &[sample()]);
        let text = ds.to_jsonl().unwrap();
        assert!(text.starts_with("{\"variant\":\"PAR_SPLT_T\"}\n"));
        assert_eq!(Dataset::from_jsonl(&text).unwrap(), ds);
        assert_eq!("par+inv".parse::<Variant>().unwrap(), Variant::ParInv);
    }
}
