//! CHAT transcript parsing.
//!
//! Reads `@`-headers, `*SPK:` main tiers and tab-indented continuation lines,
//! keeps the participant (`PAR`) and interviewer (`INV`) tiers and cleans each
//! one with [`clean_utterance`]. Dependent tiers (`%mor`, `%gra`, ...) and
//! other speakers are skipped.
//!
//! Cleaning deletes the characters `[`, `]`, `<`, `>`, strips time-alignment
//! codes and normalizes whitespace. Everything else is kept verbatim, which
//! includes fillers such as `um`, pause codes like `(...)` and `+...`, and
//! paralinguistic events like `&=laughs`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    AD,
    Control,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    PAR,
    INV,
}

impl Speaker {
    fn from_code(code: &str) -> Option<Self> {
        match code {
            "PAR" => Some(Speaker::PAR),
            "INV" => Some(Speaker::INV),
            _ => None,
        }
    }
}

/// Time alignment of an utterance in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Interval {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub transcript_id: String,
    pub age: Option<u32>,
    pub sex: Sex,
    pub diagnosis: Diagnosis,
    pub mmse: Option<u32>,
}

impl TranscriptMeta {
    pub fn unknown(transcript_id: impl Into<String>) -> Self {
        TranscriptMeta {
            transcript_id: transcript_id.into(),
            age: None,
            sex: Sex::Unknown,
            diagnosis: Diagnosis::Unknown,
            mmse: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub interval: Option<Interval>,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub meta: TranscriptMeta,
    pub utterances: Vec<Utterance>,
}

impl Transcript {
    pub fn id(&self) -> &str {
        &self.meta.transcript_id
    }

    pub fn participant_utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(|u| u.speaker == Speaker::PAR)
    }
}

/// Pipe-separated slot positions inside an `@ID` header.
///
/// The default matches `language|corpus|speaker|age|sex|group|SES|role|slot8|custom`
/// with the MMSE score in slot 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdFieldLayout {
    pub speaker: usize,
    pub age: usize,
    pub sex: usize,
    pub group: usize,
    pub mmse: usize,
}

impl Default for IdFieldLayout {
    fn default() -> Self {
        IdFieldLayout {
            speaker: 2,
            age: 3,
            sex: 4,
            group: 5,
            mmse: 8,
        }
    }
}

impl FromStr for IdFieldLayout {
    type Err = Error;

    /// Accepts `default` or a comma list such as `age=3,sex=4,group=5,mmse=8`;
    /// keys that are not mentioned keep their default slot.
    fn from_str(s: &str) -> Result<Self> {
        let mut layout = IdFieldLayout::default();
        if s.trim().eq_ignore_ascii_case("default") {
            return Ok(layout);
        }
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("id layout entry `{part}` is not key=slot"))
            })?;
            let slot: usize = value.trim().parse().map_err(|_| {
                Error::Config(format!("id layout slot `{value}` is not an integer"))
            })?;
            match key.trim() {
                "speaker" => layout.speaker = slot,
                "age" => layout.age = slot,
                "sex" => layout.sex = slot,
                "group" => layout.group = slot,
                "mmse" => layout.mmse = slot,
                other => return Err(Error::Config(format!("unknown id layout key `{other}`"))),
            }
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub layout: IdFieldLayout,
    /// Reject files without an `@Begin` ... `@End` envelope instead of warning.
    pub strict_envelope: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            layout: IdFieldLayout::default(),
            strict_envelope: true,
        }
    }
}

/// Participant fields read from one `@ID` row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantFields {
    pub age: Option<u32>,
    pub sex: Sex,
    pub diagnosis: Diagnosis,
    pub mmse: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdHeader {
    /// `None` for rows that describe a speaker other than `PAR`.
    pub participant: Option<ParticipantFields>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub transcript: Transcript,
    pub warnings: Vec<String>,
}

fn time_code_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("\u{15}([0-9]+)_([0-9]+)\u{15}|•([0-9]+)_([0-9]+)•").unwrap())
}

fn is_deleted_char(c: char) -> bool {
    matches!(c, '[' | ']' | '<' | '>' | '\u{15}')
}

/// Cleans the body of a main tier.
///
/// Time codes (`\x15start_end\x15` or `•start_end•`) are removed and the last
/// one is returned as the interval. Deletions are repeated until nothing
/// changes so the result is a fixed point of this function.
pub fn clean_utterance(raw: &str) -> (String, Option<Interval>) {
    let re = time_code_re();
    let mut text = raw.to_string();
    let mut interval = None;
    loop {
        let before = text.len();
        let mut last = None;
        let stripped = re.replace_all(&text, |caps: &regex::Captures<'_>| {
            let (s, e) = match (caps.get(1), caps.get(2)) {
                (Some(s), Some(e)) => (s, e),
                _ => (caps.get(3).unwrap(), caps.get(4).unwrap()),
            };
            last = Some((s.as_str().parse::<u64>(), e.as_str().parse::<u64>()));
            " "
        });
        let next: String = stripped.chars().filter(|&c| !is_deleted_char(c)).collect();
        if interval.is_none() {
            if let Some((Ok(start_ms), Ok(end_ms))) = last {
                if end_ms >= start_ms {
                    interval = Some(Interval { start_ms, end_ms });
                }
            }
        }
        text = next;
        if text.len() == before {
            break;
        }
    }
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    (text, interval)
}

fn slot<'a>(fields: &[&'a str], i: usize) -> &'a str {
    fields.get(i).map(|s| s.trim()).unwrap_or("")
}

/// Reads participant metadata from an `@ID:` line.
pub fn parse_id_header(line: &str, layout: &IdFieldLayout) -> IdHeader {
    let body = line
        .trim_start()
        .strip_prefix("@ID:")
        .unwrap_or(line)
        .trim();
    let fields: Vec<&str> = body.split('|').collect();
    let mut header = IdHeader::default();
    if slot(&fields, layout.speaker) != "PAR" {
        return header;
    }

    let age_raw = slot(&fields, layout.age);
    let age = if age_raw.is_empty() {
        None
    } else {
        let years = age_raw.split([';', '.']).next().unwrap_or("").trim();
        match years.parse::<u32>() {
            Ok(a) if (1..=120).contains(&a) => Some(a),
            Ok(a) => {
                header
                    .warnings
                    .push(format!("UnparseableAge: {a} outside 1..=120"));
                None
            }
            Err(_) => {
                header.warnings.push(format!("UnparseableAge: `{age_raw}`"));
                None
            }
        }
    };

    let sex = match slot(&fields, layout.sex).to_ascii_lowercase().as_str() {
        "male" => Sex::Male,
        "female" => Sex::Female,
        _ => Sex::Unknown,
    };
    let diagnosis = match slot(&fields, layout.group).to_ascii_lowercase().as_str() {
        "probablead" => Diagnosis::AD,
        "control" => Diagnosis::Control,
        _ => Diagnosis::Unknown,
    };

    let mmse_raw = slot(&fields, layout.mmse);
    let mmse = if mmse_raw.is_empty() {
        None
    } else {
        match mmse_raw.parse::<u32>() {
            Ok(m) if m <= 30 => Some(m),
            _ => {
                header
                    .warnings
                    .push(format!("UnparseableMmse: `{mmse_raw}`"));
                None
            }
        }
    };

    header.participant = Some(ParticipantFields {
        age,
        sex,
        diagnosis,
        mmse,
    });
    header
}

enum Tier {
    Main {
        speaker: Option<Speaker>,
        body: String,
    },
    Other,
}

/// Parses a complete CHAT file.
pub fn parse_transcript(id: &str, raw: &str, opts: &ParseOptions) -> Result<Parsed> {
    let mut warnings = Vec::new();
    let mut meta = TranscriptMeta::unknown(id);
    let mut seen_participant = false;
    let mut begin = false;
    let mut end = false;
    let mut tiers: Vec<(Speaker, String)> = Vec::new();
    let mut current = Tier::Other;

    let flush = |tier: &mut Tier, tiers: &mut Vec<(Speaker, String)>| {
        if let Tier::Main {
            speaker: Some(sp),
            body,
        } = std::mem::replace(tier, Tier::Other)
        {
            tiers.push((sp, body));
        }
    };

    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if let Some(cont) = line.strip_prefix('\t') {
            if let Tier::Main { body, .. } = &mut current {
                body.push(' ');
                body.push_str(cont);
            }
            continue;
        }
        flush(&mut current, &mut tiers);
        if let Some(rest) = line.strip_prefix('*') {
            let Some((code, body)) = rest.split_once(':') else {
                warnings.push(format!("tier without colon: `{line}`"));
                continue;
            };
            current = Tier::Main {
                speaker: Speaker::from_code(code.trim()),
                body: body.to_string(),
            };
        } else if line.starts_with("@Begin") {
            begin = true;
        } else if line.starts_with("@End") {
            end = begin;
        } else if line.starts_with("@ID:") {
            let header = parse_id_header(line, &opts.layout);
            warnings.extend(header.warnings);
            if let Some(p) = header.participant {
                if seen_participant {
                    warnings.push("duplicate PAR @ID row ignored".to_string());
                } else {
                    seen_participant = true;
                    meta.age = p.age;
                    meta.sex = p.sex;
                    meta.diagnosis = p.diagnosis;
                    meta.mmse = p.mmse;
                }
            }
        }
    }
    flush(&mut current, &mut tiers);

    if !(begin && end) {
        if opts.strict_envelope {
            return Err(Error::MalformedHeader { id: id.to_string() });
        }
        warnings.push("MalformedHeader: missing @Begin/@End envelope".to_string());
    }

    let mut utterances = Vec::with_capacity(tiers.len());
    for (speaker, body) in tiers {
        let (text, interval) = clean_utterance(&body);
        if text.is_empty() {
            warnings.push(format!("dropped empty {speaker:?} utterance"));
            continue;
        }
        let index = utterances.len();
        utterances.push(Utterance {
            speaker,
            text,
            interval,
            index,
        });
    }
    if !utterances.iter().any(|u| u.speaker == Speaker::PAR) {
        return Err(Error::NoParticipantSpeech { id: id.to_string() });
    }

    Ok(Parsed {
        transcript: Transcript { meta, utterances },
        warnings,
    })
}

/// Parses one `.cha` file; the transcript id is the file stem.
pub fn parse_file(path: &Path, opts: &ParseOptions) -> Result<Parsed> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_transcript(&id, &raw, opts)
}

/// Outcome of parsing every `.cha` file in a directory (sorted by file name).
#[derive(Debug, Default)]
pub struct DirectoryParse {
    pub transcripts: Vec<Transcript>,
    pub warnings: Vec<String>,
    pub failures: Vec<(String, Error)>,
}

pub fn parse_dir(dir: &Path, opts: &ParseOptions) -> Result<DirectoryParse> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "cha") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut out = DirectoryParse::default();
    for path in paths {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        match parse_file(&path, opts) {
            Ok(parsed) => {
                out.warnings
                    .extend(parsed.warnings.into_iter().map(|w| format!("{name}: {w}")));
                out.transcripts.push(parsed.transcript);
            }
            Err(e) => out.failures.push((name, e)),
        }
    }
    Ok(out)
}

/// One line of the transcripts JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub id: String,
    pub age: Option<u32>,
    pub sex: Sex,
    pub diagnosis: Diagnosis,
    pub mmse: Option<u32>,
    pub utterances: Vec<UtteranceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub speaker: Speaker,
    pub text: String,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
}

impl From<&Transcript> for TranscriptRecord {
    fn from(t: &Transcript) -> Self {
        TranscriptRecord {
            id: t.meta.transcript_id.clone(),
            age: t.meta.age,
            sex: t.meta.sex,
            diagnosis: t.meta.diagnosis,
            mmse: t.meta.mmse,
            utterances: t
                .utterances
                .iter()
                .map(|u| UtteranceRecord {
                    speaker: u.speaker,
                    text: u.text.clone(),
                    start_ms: u.interval.map(|i| i.start_ms),
                    end_ms: u.interval.map(|i| i.end_ms),
                })
                .collect(),
        }
    }
}

impl TryFrom<TranscriptRecord> for Transcript {
    type Error = Error;

    fn try_from(r: TranscriptRecord) -> Result<Self> {
        let invalid = |msg: String| Error::Data(format!("transcript {}: {msg}", r.id));
        if r.mmse.is_some_and(|m| m > 30) {
            return Err(invalid("mmse outside 0..=30".into()));
        }
        if r.age.is_some_and(|a| !(1..=120).contains(&a)) {
            return Err(invalid("age outside 1..=120".into()));
        }
        let mut utterances = Vec::with_capacity(r.utterances.len());
        for (index, u) in r.utterances.into_iter().enumerate() {
            let interval = match (u.start_ms, u.end_ms) {
                (Some(start_ms), Some(end_ms)) if end_ms >= start_ms => {
                    Some(Interval { start_ms, end_ms })
                }
                (None, None) => None,
                _ => return Err(invalid(format!("bad interval on utterance {index}"))),
            };
            if u.text.is_empty() {
                return Err(invalid(format!("empty text on utterance {index}")));
            }
            utterances.push(Utterance {
                speaker: u.speaker,
                text: u.text,
                interval,
                index,
            });
        }
        if !utterances.iter().any(|u| u.speaker == Speaker::PAR) {
            return Err(Error::NoParticipantSpeech { id: r.id });
        }
        Ok(Transcript {
            meta: TranscriptMeta {
                transcript_id: r.id,
                age: r.age,
                sex: r.sex,
                diagnosis: r.diagnosis,
                mmse: r.mmse,
            },
            utterances,
        })
    }
}

pub fn to_jsonl(transcripts: &[Transcript]) -> Result<String> {
    let mut out = String::new();
    for t in transcripts {
        out.push_str(&serde_json::to_string(&TranscriptRecord::from(t))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<Transcript>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Transcript::try_from(serde_json::from_str::<TranscriptRecord>(l)?))
        .collect()
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wrap(body: &str) -> String {
        format!("@UTF8\n@Begin\n@Languages:\teng\n{body}@End\n")
    }

    #[test]
    fn two_tiers_in_order() {
        let raw = wrap("*PAR:\tthe boy fell .\n*INV:\tmhm .\n");
        let t = parse_transcript("t", &raw, &ParseOptions::default())
            .unwrap()
            .transcript;
        let speakers: Vec<_> = t.utterances.iter().map(|u| u.speaker).collect();
        assert_eq!(speakers, vec![Speaker::PAR, Speaker::INV]);
        assert_eq!(t.utterances[0].text, "the boy fell .");
        assert_eq!(t.utterances[1].index, 1);
    }

    #[test]
    fn only_dependent_tiers_is_an_error() {
        let raw = wrap("%mor:\tn|boy v|fall-PAST .\n");
        let err = parse_transcript("t", &raw, &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoParticipantSpeech { .. }));
    }

    #[test]
    fn retracing_and_bullet_time_code() {
        let raw = wrap("*PAR:\tand then <the stool> [//] the chair •1500_4200•\n");
        let t = parse_transcript("t", &raw, &ParseOptions::default())
            .unwrap()
            .transcript;
        assert_eq!(t.utterances[0].text, "and then the stool // the chair");
        assert_eq!(
            t.utterances[0].interval,
            Some(Interval {
                start_ms: 1500,
                end_ms: 4200
            })
        );
    }

    #[test]
    fn continuation_lines_join_with_single_space() {
        let raw = wrap("*PAR:\tthe water is\n\toverflowing . \u{15}10_20\u{15}\n%mor:\tx\n\ty\n");
        let t = parse_transcript("t", &raw, &ParseOptions::default())
            .unwrap()
            .transcript;
        assert_eq!(t.utterances.len(), 1);
        assert_eq!(t.utterances[0].text, "the water is overflowing .");
        assert_eq!(t.utterances[0].interval.unwrap().end_ms, 20);
    }

    #[test]
    fn clean_examples() {
        assert_eq!(
            clean_utterance("well um the water (...) overflows . \u{15}1200_5300\u{15}"),
            (
                "well um the water (...) overflows .".to_string(),
                Some(Interval {
                    start_ms: 1200,
                    end_ms: 5300
                })
            )
        );
        assert_eq!(clean_utterance("ok ."), ("ok .".to_string(), None));
        assert_eq!(clean_utterance("  a\t b  "), ("a b".to_string(), None));
    }

    #[test]
    fn last_time_code_wins() {
        let (text, iv) = clean_utterance("a •1_2• b •30_40•");
        assert_eq!(text, "a b");
        assert_eq!(iv.unwrap().start_ms, 30);
    }

    #[test]
    fn markers_are_kept() {
        let (text, _) = clean_utterance("&=laughs (be)cause +... &-uh um");
        assert_eq!(text, "&=laughs (be)cause +... &-uh um");
    }

    #[test]
    fn id_header_examples() {
        let layout = IdFieldLayout::default();
        let h = parse_id_header("@ID:\teng|corp|PAR|62;|female|ProbableAD|||13||", &layout);
        assert_eq!(
            h.participant,
            Some(ParticipantFields {
                age: Some(62),
                sex: Sex::Female,
                diagnosis: Diagnosis::AD,
                mmse: Some(13)
            })
        );
        let h = parse_id_header("@ID: eng|corp|INV|||||Investigator|||", &layout);
        assert_eq!(h, IdHeader::default());
        let h = parse_id_header("@ID: eng|corp|PAR|62;|female|Control||||", &layout);
        let p = h.participant.unwrap();
        assert_eq!(p.diagnosis, Diagnosis::Control);
        assert_eq!(p.mmse, None);
        assert!(h.warnings.is_empty());
    }

    #[test]
    fn bad_id_fields_warn_and_stay_empty() {
        let h = parse_id_header(
            "@ID: eng|c|PAR|sixty;|male|control|||x||",
            &IdFieldLayout::default(),
        );
        let p = h.participant.unwrap();
        assert_eq!((p.age, p.mmse, p.sex), (None, None, Sex::Male));
        assert_eq!(p.diagnosis, Diagnosis::Control);
        assert_eq!(h.warnings.len(), 2);
        let h = parse_id_header(
            "@ID: eng|c|PAR|62;|male|Control|||31||",
            &IdFieldLayout::default(),
        );
        assert_eq!(h.participant.unwrap().mmse, None);
    }

    #[test]
    fn custom_layout() {
        let layout: IdFieldLayout = "mmse=9".parse().unwrap();
        let h = parse_id_header("@ID: eng|c|PAR|70;|male|ProbableAD||||22|", &layout);
        assert_eq!(h.participant.unwrap().mmse, Some(22));
        assert!("bogus=1".parse::<IdFieldLayout>().is_err());
    }

    #[test]
    fn envelope_strict_and_lenient() {
        let raw = "*PAR:\thello .\n";
        assert!(matches!(
            parse_transcript("m", raw, &ParseOptions::default()),
            Err(Error::MalformedHeader { .. })
        ));
        let lenient = ParseOptions {
            strict_envelope: false,
            ..ParseOptions::default()
        };
        let parsed = parse_transcript("m", raw, &lenient).unwrap();
        assert_eq!(parsed.transcript.utterances.len(), 1);
        assert!(parsed
            .warnings
            .iter()
            .any(|w| w.starts_with("MalformedHeader")));
    }

    #[test]
    fn unknown_speakers_and_empty_utterances_dropped() {
        let raw = wrap("*BRO:\thi .\n*PAR:\t[+ exc]\n*PAR:\tyes .\n");
        let parsed = parse_transcript("t", &raw, &ParseOptions::default()).unwrap();
        assert_eq!(parsed.transcript.utterances.len(), 2);
        assert_eq!(parsed.transcript.utterances[0].text, "+ exc");
        let raw = wrap("*PAR:\t<> []\n*PAR:\tyes .\n");
        let parsed = parse_transcript("t", &raw, &ParseOptions::default()).unwrap();
        assert_eq!(parsed.transcript.utterances.len(), 1);
        assert_eq!(parsed.transcript.utterances[0].index, 0);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let raw =
            wrap("@ID:\teng|c|PAR|62;|female|ProbableAD|||13||\n*PAR:\ta . •0_10•\n*INV:\tb ?\n");
        let t = parse_transcript("x", &raw, &ParseOptions::default())
            .unwrap()
            .transcript;
        let line = to_jsonl(std::slice::from_ref(&t)).unwrap();
        assert_eq!(
            line,
            "{\"id\":\"x\",\"age\":62,\"sex\":\"female\",\"diagnosis\":\"AD\",\"mmse\":13,\"utterances\":[{\"speaker\":\"PAR\",\"text\":\"a .\",\"start_ms\":0,\"end_ms\":10},{\"speaker\":\"INV\",\"text\":\"b ?\",\"start_ms\":null,\"end_ms\":null}]}\n"
        );
        assert_eq!(from_jsonl(&line).unwrap(), vec![t]);
    }

    fn marker_string() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            Just("um".to_string()),
            Just("&=laughs".to_string()),
            Just("+...".to_string()),
            Just("(...)".to_string()),
            Just("[//]".to_string()),
            Just("<".to_string()),
            Just(">".to_string()),
            Just("\t".to_string()),
            Just("\u{15}".to_string()),
            Just("•".to_string()),
            Just("_".to_string()),
            "[0-9]{1,3}",
            "[a-z ]{0,4}",
        ];
        prop::collection::vec(piece, 0..12).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(s in marker_string()) {
            let (once, _) = clean_utterance(&s);
            let (twice, _) = clean_utterance(&once);
            prop_assert_eq!(&once, &twice);
            let forbidden = ['[', ']', '<', '>', '\t', '\n', '\u{15}'];
            prop_assert!(!once.contains(forbidden), "forbidden char in {:?}", once);
        }

        #[test]
        fn markers_survive(prefix in "[a-z ]{0,5}", suffix in "[a-z ]{0,5}") {
            for marker in ["um", "&=laughs", "+...", "(...)"] {
                let (out, _) = clean_utterance(&format!("{prefix} {marker} {suffix}"));
                prop_assert!(out.contains(marker));
            }
        }
    }
}
