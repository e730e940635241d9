use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn percentages<T: Scalar>(&self) -> Result<WerBreakdown<T>, MetricError> {
        if self.reference_len == 0 {
            return Err(MetricError::EmptyReference);
        }
        let n = T::from_usize_lossy(self.reference_len);
        let pct = |c: usize| T::from_usize_lossy(100 * c) / n.clone();
        Ok(WerBreakdown::from_components(pct(self.substitutions), pct(self.deletions), pct(self.insertions)))
    }
}

impl std::ops::Add for EditCounts {
    type Output = EditCounts;
    fn add(self, o: EditCounts) -> EditCounts {
        EditCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            reference_len: self.reference_len + o.reference_len,
        }
    }
}

/// Word error components in percent of reference length; `wer` is their exact sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown<T> {
    pub substitutions: T,
    pub deletions: T,
    pub insertions: T,
    pub wer: T,
}

impl<T: Scalar> WerBreakdown<T> {
    pub fn from_components(substitutions: T, deletions: T, insertions: T) -> Self {
        let wer = substitutions.clone() + deletions.clone() + insertions.clone();
        Self {
            substitutions,
            deletions,
            insertions,
            wer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Minimum edit alignment. Among equally cheap alignments the backtrace
/// prefers the diagonal, then deletion, then insertion.
pub fn align<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> Vec<AlignOp> {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                ops.push(if same { AlignOp::Match } else { AlignOp::Substitute });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(AlignOp::Delete);
            i -= 1;
        } else {
            ops.push(AlignOp::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Edit counts for a whole session treated as one token stream.
pub fn wer_session<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> Result<EditCounts, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let mut c = EditCounts {
        reference_len: reference.len(),
        ..EditCounts::default()
    };
    for op in align(reference, hypothesis) {
        match op {
            AlignOp::Match => {}
            AlignOp::Substitute => c.substitutions += 1,
            AlignOp::Delete => c.deletions += 1,
            AlignOp::Insert => c.insertions += 1,
        }
    }
    Ok(c)
}
