use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::scalar::Scalar;
use crate::types::{Seconds, TimeSpan};

/// Diarization error components in percent of scored reference speech.
/// `der` is always the exact sum of the three components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerBreakdown<T> {
    pub false_alarm: T,
    pub missed_speech: T,
    pub speaker_error: T,
    pub der: T,
}

impl<T: Scalar> DerBreakdown<T> {
    pub fn from_components(false_alarm: T, missed_speech: T, speaker_error: T) -> Self {
        let der = false_alarm.clone() + missed_speech.clone() + speaker_error.clone();
        Self {
            false_alarm,
            missed_speech,
            speaker_error,
            der,
        }
    }
}

struct Piece {
    dur: Seconds,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

fn intern<S: Ord + Clone>(labels: &mut Vec<S>, s: &S) -> usize {
    match labels.iter().position(|x| x == s) {
        Some(i) => i,
        None => {
            labels.push(s.clone());
            labels.len() - 1
        }
    }
}

/// Best total overlap over injective hypothesis-to-reference label maps.
fn best_mapping(overlap: &[Vec<Seconds>], h: usize, used: &mut Vec<bool>) -> Seconds {
    if h == overlap.len() {
        return 0.0;
    }
    let mut best = best_mapping(overlap, h + 1, used);
    for r in 0..used.len() {
        if !used[r] && overlap[h][r] > 0.0 {
            used[r] = true;
            best = best.max(overlap[h][r] + best_mapping(overlap, h + 1, used));
            used[r] = false;
        }
    }
    best
}

/// Frame-free diarization error rate with a no-score collar around every
/// reference boundary and the optimal speaker mapping.
pub fn der<R: Ord + Clone, H: Ord + Clone>(
    reference: &[(TimeSpan, R)],
    hypothesis: &[(TimeSpan, H)],
    collar: Seconds,
) -> Result<DerBreakdown<f64>, MetricError> {
    let mut ref_labels: Vec<R> = Vec::new();
    let mut hyp_labels: Vec<H> = Vec::new();
    let refs: Vec<(TimeSpan, usize)> = reference.iter().map(|(s, l)| (*s, intern(&mut ref_labels, l))).collect();
    let hyps: Vec<(TimeSpan, usize)> = hypothesis.iter().map(|(s, l)| (*s, intern(&mut hyp_labels, l))).collect();

    let ref_bounds: Vec<Seconds> = refs.iter().flat_map(|(s, _)| [s.start, s.end]).collect();
    let mut cuts: Vec<Seconds> = ref_bounds
        .iter()
        .flat_map(|&b| [b - collar, b, b + collar])
        .chain(hyps.iter().flat_map(|(s, _)| [s.start, s.end]))
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if b - a <= 0.0 || ref_bounds.iter().any(|&x| (mid - x).abs() < collar) {
            continue;
        }
        let active = |segs: &[(TimeSpan, usize)]| -> Vec<usize> {
            let mut v: Vec<usize> = segs.iter().filter(|(s, _)| s.start <= mid && mid < s.end).map(|(_, l)| *l).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        pieces.push(Piece { dur: b - a, refs: active(&refs), hyps: active(&hyps) });
    }

    let mut scored = 0.0;
    let mut miss = 0.0;
    let mut fa = 0.0;
    let mut matched_cap = 0.0;
    let mut overlap = vec![vec![0.0; ref_labels.len()]; hyp_labels.len()];
    for p in &pieces {
        let (nr, nh) = (p.refs.len() as f64, p.hyps.len() as f64);
        scored += p.dur * nr;
        miss += p.dur * (nr - nh).max(0.0);
        fa += p.dur * (nh - nr).max(0.0);
        matched_cap += p.dur * nr.min(nh);
        for &h in &p.hyps {
            for &r in &p.refs {
                overlap[h][r] += p.dur;
            }
        }
    }
    if scored <= 0.0 {
        return Err(MetricError::EmptyReference);
    }
    let correct = best_mapping(&overlap, 0, &mut vec![false; ref_labels.len()]);
    let confusion = (matched_cap - correct).max(0.0);
    let pct = |x: f64| 100.0 * x / scored;
    Ok(DerBreakdown::from_components(pct(fa), pct(miss), pct(confusion)))
}
