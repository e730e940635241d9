//! Domain model shared by every pipeline stage.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{GlobalCodeName, GroupCode, RawMiscCode};

/// Wall-clock time in seconds from the start of the recording.
pub type Seconds = f64;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid time span [{start}, {end}]")]
    InvalidSpan { start: f64, end: f64 },
    #[error("frame step must be positive, got {0}")]
    InvalidFrameStep(f64),
    #[error("frame {index} has dimension {found}, expected {expected}")]
    RaggedFrames {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("empty token")]
    EmptyToken,
    #[error("utterance has no tokens")]
    EmptyUtterance,
    #[error("global score {0} outside [1, 5]")]
    ScoreOutOfRange(f64),
    #[error("transcript line {line}: {source}")]
    Transcript {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: Seconds,
    pub end: Seconds,
}

impl TimeSpan {
    pub fn new(start: Seconds, end: Seconds) -> Result<Self, DomainError> {
        if !(start >= 0.0 && end > start && end.is_finite()) {
            return Err(DomainError::InvalidSpan { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> Seconds {
        self.end - self.start
    }

    pub fn midpoint(&self) -> Seconds {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, t: Seconds) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn overlap(&self, other: &TimeSpan) -> Seconds {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Anonymous diarization cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cluster {
    A,
    B,
}

impl Cluster {
    pub fn other(self) -> Cluster {
        match self {
            Cluster::A => Cluster::B,
            Cluster::B => Cluster::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cluster::A => "A",
            Cluster::B => "B",
        }
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Therapist,
    Client,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Therapist => Role::Client,
            Role::Client => Role::Therapist,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Therapist => "therapist",
            Role::Client => "client",
        })
    }
}

/// Per-frame feature vectors on a fixed clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrack {
    pub frame_step: Seconds,
    pub window: Seconds,
    pub values: Vec<Vec<f64>>,
}

impl FrameTrack {
    pub const DEFAULT_STEP: Seconds = 0.010;
    pub const DEFAULT_WINDOW: Seconds = 0.025;

    pub fn new(frame_step: Seconds, window: Seconds, values: Vec<Vec<f64>>) -> Result<Self, DomainError> {
        if !(frame_step > 0.0) {
            return Err(DomainError::InvalidFrameStep(frame_step));
        }
        if let Some(first) = values.first() {
            let dim = first.len();
            if let Some((index, v)) = values.iter().enumerate().find(|(_, v)| v.len() != dim) {
                return Err(DomainError::RaggedFrames {
                    index,
                    found: v.len(),
                    expected: dim,
                });
            }
        }
        Ok(Self {
            frame_step,
            window,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> Seconds {
        self.values.len() as f64 * self.frame_step
    }

    /// Frame index containing time `t` (floored).
    pub fn frame_at(&self, t: Seconds) -> usize {
        (t / self.frame_step + 1e-9).floor().max(0.0) as usize
    }

    /// Frames whose start lies in `span`.
    pub fn slice(&self, span: &TimeSpan) -> &[Vec<f64>] {
        let lo = self.frame_at(span.start).min(self.len());
        let hi = self.frame_at(span.end).min(self.len()).max(lo);
        &self.values[lo..hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub span: TimeSpan,
    pub cluster: Option<Cluster>,
}

impl Segment {
    pub fn unlabeled(span: TimeSpan) -> Self {
        Self { span, cluster: None }
    }

    pub fn labeled(span: TimeSpan, cluster: Cluster) -> Self {
        Self {
            span,
            cluster: Some(cluster),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<TimeSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Word {
    pub fn new(token: impl Into<String>) -> Result<Self, DomainError> {
        let token = token.into();
        if token.is_empty() {
            return Err(DomainError::EmptyToken);
        }
        Ok(Self {
            token,
            span: None,
            confidence: None,
        })
    }

    pub fn timed(token: impl Into<String>, span: TimeSpan) -> Result<Self, DomainError> {
        let mut w = Self::new(token)?;
        w.span = Some(span);
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub cluster: Cluster,
    pub role: Option<Role>,
    pub words: Vec<Word>,
    pub span: TimeSpan,
}

impl SpeakerTurn {
    pub fn new(cluster: Cluster, span: TimeSpan) -> Self {
        Self {
            cluster,
            role: None,
            words: Vec::new(),
            span,
        }
    }

    /// Word timings lie inside the turn and never go backwards.
    pub fn word_timing_consistent(&self) -> bool {
        let mut last = self.span.start;
        for w in &self.words {
            if let Some(s) = w.span {
                if s.start < last - 1e-9 || s.end > self.span.end + 1e-9 {
                    return false;
                }
                last = s.start;
            }
        }
        true
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.token.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub role: Role,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<TimeSpan>,
    /// Reference codes; more than one when codes were stacked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_codes: Option<BTreeSet<RawMiscCode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_code: Option<GroupCode>,
}

impl Utterance {
    pub fn new(index: usize, role: Role, tokens: Vec<String>) -> Result<Self, DomainError> {
        if tokens.is_empty() {
            return Err(DomainError::EmptyUtterance);
        }
        Ok(Self {
            index,
            role,
            tokens,
            span: None,
            ref_codes: None,
            pred_code: None,
        })
    }

    /// Grouped reference labels, NC dropped.
    pub fn ref_groups(&self) -> BTreeSet<GroupCode> {
        self.ref_codes
            .iter()
            .flatten()
            .filter_map(|&c| crate::taxonomy::map_raw_to_group(c).ok())
            .collect()
    }

    /// True when the only reference code is NC.
    pub fn is_uncodable(&self) -> bool {
        matches!(&self.ref_codes, Some(codes) if !codes.is_empty() && self.ref_groups().is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalScore {
    pub name: GlobalCodeName,
    pub score: f64,
}

impl GlobalScore {
    pub fn new(name: GlobalCodeName, score: f64) -> Result<Self, DomainError> {
        if !(1.0..=5.0).contains(&score) {
            return Err(DomainError::ScoreOutOfRange(score));
        }
        Ok(Self { name, score })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameTrack>,
    pub segments: Vec<Segment>,
    pub turns: Vec<SpeakerTurn>,
    pub utterances: Vec<Utterance>,
    pub total_duration: Seconds,
}

impl Session {
    pub fn is_consistent(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.span.end <= self.total_duration + 1e-9)
    }
}

/// One line of the transcript interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub session: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Seconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Seconds>,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub codes: Vec<RawMiscCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_code: Option<GroupCode>,
}

impl TranscriptRecord {
    pub fn from_utterance(session: &str, u: &Utterance) -> Self {
        Self {
            session: session.to_string(),
            role: u.role,
            start: u.span.map(|s| s.start),
            end: u.span.map(|s| s.end),
            tokens: u.tokens.clone(),
            codes: u.ref_codes.iter().flatten().copied().collect(),
            pred_code: u.pred_code,
        }
    }

    pub fn to_utterance(&self, index: usize) -> Result<Utterance, DomainError> {
        let mut u = Utterance::new(index, self.role, self.tokens.clone())?;
        if let (Some(s), Some(e)) = (self.start, self.end) {
            u.span = Some(TimeSpan::new(s, e)?);
        }
        if !self.codes.is_empty() {
            u.ref_codes = Some(self.codes.iter().copied().collect());
        }
        u.pred_code = self.pred_code;
        Ok(u)
    }
}

pub fn write_transcript<W: Write>(
    mut out: W,
    session: &str,
    utterances: &[Utterance],
) -> Result<(), DomainError> {
    for u in utterances {
        let line = serde_json::to_string(&TranscriptRecord::from_utterance(session, u))
            .map_err(|source| DomainError::Transcript { line: u.index + 1, source })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parse a JSON-lines transcript; blank lines are skipped.
pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<TranscriptRecord>, DomainError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|source| DomainError::Transcript { line: i + 1, source })?;
        records.push(rec);
    }
    Ok(records)
}
