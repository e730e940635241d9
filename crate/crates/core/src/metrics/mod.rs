//! Evaluation metrics for every pipeline stage.

mod agreement;
mod classify;
mod der;
mod wer;

pub use agreement::{krippendorff_alpha, within_one_collapse, Level, RaterMatrix};
pub use classify::{f1_per_class, resolve_stacked, spearman, vad_frame_metrics, ClassScore, F1Report, VadFrameMetrics};
pub use der::{der, DerBreakdown};
pub use wer::{align, wer_session, AlignOp, EditCounts, WerBreakdown};

use num_rational::Rational64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("input is empty")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("statistic not computable: {0}")]
    NotComputable(&'static str),
    #[error("cannot parse `{0}` as a decimal")]
    BadDecimal(String),
}

/// Parse a plain decimal like `13.7` or `-0.25` into an exact rational.
pub fn decimal_ratio(s: &str) -> Result<Rational64, MetricError> {
    let bad = || MetricError::BadDecimal(s.to_string());
    let t = s.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 15 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let denom = 10i64.pow(frac.len() as u32);
    let r = Rational64::new(numer, denom);
    Ok(if neg { -r } else { r })
}
