//! Builds every dataset variant from parsed transcripts and shows one record
//! of each.
//!
//! `cargo run --example build_datasets -- [chat dir]`

mod common;

use adscreen::chat::{self, ParseOptions};
use adscreen::dataset::{Dataset, Variant};

fn main() -> adscreen::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(common::fixture_dir, Into::into);
    let transcripts = chat::parse_dir(&dir, &ParseOptions::default())?.transcripts;
    for v in Variant::ALL {
        let (d, warnings) = Dataset::build(v, &transcripts);
        println!(
            "{:<14} {} records, {} warnings",
            v.name(),
            d.len(),
            warnings.len()
        );
        let jsonl = d.to_jsonl()?;
        if let Some(first) = jsonl.lines().nth(1) {
            let mut line = first.to_string();
            if line.len() > 160 {
                let cut = (0..=160)
                    .rev()
                    .find(|&i| line.is_char_boundary(i))
                    .unwrap_or(0);
                line.truncate(cut);
                line.push_str(" ...");
            }
            println!("  {line}");
        }
    }
    Ok(())
}
