//! RTTM speaker-segment files:
//! `SPEAKER <file> 1 <start> <duration> <NA> <NA> <speaker> <NA> <NA>`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::types::{DomainError, TimeSpan};

#[derive(Debug, Clone, PartialEq)]
pub struct RttmSegment {
    pub file: String,
    pub span: TimeSpan,
    pub speaker: String,
}

pub fn write_rttm<W: Write>(mut out: W, segments: &[RttmSegment]) -> Result<(), DomainError> {
    for s in segments {
        writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            s.file,
            s.span.start,
            s.span.duration(),
            s.speaker
        )?;
    }
    Ok(())
}

pub fn read_rttm<R: BufRead>(input: R) -> Result<Vec<RttmSegment>, DomainError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() || f[0].starts_with(';') || f[0] != "SPEAKER" {
            continue;
        }
        let bad = |msg: &str| DomainError::Parse { line: i + 1, msg: msg.to_string() };
        if f.len() < 8 {
            return Err(bad("RTTM line needs at least 8 fields"));
        }
        let start: f64 = f[3].parse().map_err(|_| bad("bad start time"))?;
        let dur: f64 = f[4].parse().map_err(|_| bad("bad duration"))?;
        out.push(RttmSegment {
            file: f[1].to_string(),
            span: TimeSpan::new(start, start + dur)?,
            speaker: f[7].to_string(),
        });
    }
    Ok(out)
}

/// Segments grouped by file name, each list as `(span, speaker)`.
pub fn by_file(segments: Vec<RttmSegment>) -> BTreeMap<String, Vec<(TimeSpan, String)>> {
    let mut m: BTreeMap<String, Vec<(TimeSpan, String)>> = BTreeMap::new();
    for s in segments {
        m.entry(s.file).or_default().push((s.span, s.speaker));
    }
    m
}
