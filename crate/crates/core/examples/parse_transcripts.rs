//! Parses a directory of CHAT files and prints what was recovered.
//!
//! `cargo run --example parse_transcripts -- [dir] [--lenient]`

mod common;

use adscreen::chat::{self, ParseOptions};

fn main() -> adscreen::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map_or_else(common::fixture_dir, Into::into);
    let opts = ParseOptions {
        strict_envelope: !args.iter().any(|a| a == "--lenient"),
        ..ParseOptions::default()
    };
    let parsed = chat::parse_dir(&dir, &opts)?;
    for t in &parsed.transcripts {
        let par: Vec<_> = t.participant_utterances().collect();
        let timed = par.iter().filter(|u| u.interval.is_some()).count();
        println!(
            "{:<16} {:?} mmse={:<4} PAR utterances={} timed={}",
            t.id(),
            t.meta.diagnosis,
            t.meta.mmse.map_or("-".into(), |m| m.to_string()),
            par.len(),
            timed
        );
        if let Some(u) = par.first() {
            println!("  first: {}", u.text);
        }
    }
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    for (name, err) in &parsed.failures {
        println!("skipped {name}: {err}");
    }
    Ok(())
}
