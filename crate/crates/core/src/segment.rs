//! Talk-turn assembly and utterance segmentation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Role, Seconds, SpeakerTurn, TimeSpan, Utterance, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("boundary {boundary} invalid for a turn of {len} tokens")]
    InvalidBoundary { boundary: usize, len: usize },
    #[error("turn {0} has no role")]
    UnlabeledTurn(usize),
    #[error("invalid segmenter config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub pause_split: Seconds,
    pub max_tokens: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            pause_split: 0.6,
            max_tokens: 60,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.pause_split > 0.0) {
            return Err(SegmentError::Config("pause_split must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(SegmentError::Config("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Splits a talk-turn into utterances. Returned positions `b` mean "a new
/// utterance starts at word `b`", so valid values satisfy `0 < b < len`.
pub trait BoundaryDetector {
    fn detect(&self, words: &[Word]) -> Vec<usize>;
}

/// Pause and length rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct PauseLengthDetector {
    pub cfg: SegmenterConfig,
}

impl BoundaryDetector for PauseLengthDetector {
    fn detect(&self, words: &[Word]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut run = 0usize;
        for i in 0..words.len() {
            run += 1;
            if i + 1 == words.len() {
                break;
            }
            let pause = match (&words[i].span, &words[i + 1].span) {
                (Some(a), Some(b)) => b.start - a.end,
                _ => 0.0,
            };
            if run >= self.cfg.max_tokens || pause >= self.cfg.pause_split - 1e-9 {
                out.push(i + 1);
                run = 0;
            }
        }
        out
    }
}

/// Merge consecutive turns with the same role, whatever the gap between them.
pub fn assemble_talk_turns(turns: &[SpeakerTurn]) -> Vec<SpeakerTurn> {
    let mut out: Vec<SpeakerTurn> = Vec::new();
    for t in turns {
        match out.last_mut() {
            Some(last) if last.role == t.role => {
                last.span.end = last.span.end.max(t.span.end);
                last.words.extend(t.words.iter().cloned());
            }
            _ => out.push(t.clone()),
        }
    }
    out
}

fn check_boundaries(b: &[usize], len: usize) -> Result<(), SegmentError> {
    let mut prev = 0;
    for &x in b {
        if x <= prev || x >= len {
            return Err(SegmentError::InvalidBoundary { boundary: x, len });
        }
        prev = x;
    }
    Ok(())
}

/// Cut every talk-turn into utterances with session-wide indices.
pub fn split_utterances<D: BoundaryDetector + ?Sized>(
    turns: &[SpeakerTurn],
    detector: &D,
) -> Result<Vec<Utterance>, SegmentError> {
    let mut out = Vec::new();
    for (ti, turn) in turns.iter().enumerate() {
        let role: Role = turn.role.ok_or(SegmentError::UnlabeledTurn(ti))?;
        if turn.words.is_empty() {
            continue;
        }
        let bounds = detector.detect(&turn.words);
        check_boundaries(&bounds, turn.words.len())?;
        let mut cuts = vec![0];
        cuts.extend(bounds);
        cuts.push(turn.words.len());
        for w in cuts.windows(2) {
            let words = &turn.words[w[0]..w[1]];
            let span = match (words.first().and_then(|x| x.span), words.last().and_then(|x| x.span)) {
                (Some(a), Some(b)) => TimeSpan::new(a.start, b.end).ok(),
                _ => None,
            };
            out.push(Utterance {
                index: out.len(),
                role,
                tokens: words.iter().map(|x| x.token.clone()).collect(),
                span,
                ref_codes: None,
                pred_code: None,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Cluster;
    use proptest::prelude::*;

    fn turn(role: Role, start: f64, n: usize, gap: f64) -> SpeakerTurn {
        let mut t = 0.0 + start;
        let words = (0..n)
            .map(|i| {
                let w = Word::timed(format!("t{i}"), TimeSpan::new(t, t + 0.3).unwrap()).unwrap();
                t += 0.3 + gap;
                w
            })
            .collect::<Vec<_>>();
        let end = words.last().map_or(start + 0.1, |w| w.span.unwrap().end);
        let mut turn = SpeakerTurn::new(Cluster::A, TimeSpan::new(start, end).unwrap());
        turn.role = Some(role);
        turn.words = words;
        turn
    }

    #[test]
    fn adjacency_merge() {
        let ts = [turn(Role::Therapist, 0.0, 2, 0.1), turn(Role::Therapist, 5.0, 2, 0.1), turn(Role::Client, 9.0, 1, 0.1)];
        let m = assemble_talk_turns(&ts);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].words.len(), 4);
        let alt = [turn(Role::Therapist, 0.0, 1, 0.1), turn(Role::Client, 2.0, 1, 0.1), turn(Role::Therapist, 4.0, 1, 0.1), turn(Role::Client, 6.0, 1, 0.1)];
        assert_eq!(assemble_talk_turns(&alt).len(), 4);
        let same = [turn(Role::Therapist, 0.0, 1, 0.1), turn(Role::Therapist, 30.0, 1, 0.1), turn(Role::Therapist, 200.0, 1, 0.1)];
        assert_eq!(assemble_talk_turns(&same).len(), 1);
    }

    #[test]
    fn baseline_rules() {
        let d = PauseLengthDetector::default();
        assert!(d.detect(&turn(Role::Client, 0.0, 5, 0.1).words).is_empty());
        let mut t = turn(Role::Client, 0.0, 6, 0.1);
        for w in &mut t.words[3..] {
            let s = w.span.unwrap();
            w.span = Some(TimeSpan::new(s.start + 0.7, s.end + 0.7).unwrap());
        }
        assert_eq!(d.detect(&t.words), vec![3]);
        let long = turn(Role::Client, 0.0, 130, 0.05);
        let b = d.detect(&long.words);
        assert_eq!(b, vec![60, 120]);
        let u = split_utterances(&[long], &d).unwrap();
        assert_eq!(u.iter().map(|x| x.tokens.len()).collect::<Vec<_>>(), vec![60, 60, 10]);
    }

    struct Fixed(Vec<usize>);
    impl BoundaryDetector for Fixed {
        fn detect(&self, _: &[Word]) -> Vec<usize> {
            self.0.clone()
        }
    }

    #[test]
    fn fixed_boundaries() {
        let ts = [turn(Role::Therapist, 0.0, 6, 0.1), turn(Role::Client, 5.0, 6, 0.1)];
        let u = split_utterances(&ts, &Fixed(vec![])).unwrap();
        assert_eq!(u.len(), 2);
        let u = split_utterances(&ts, &Fixed(vec![3])).unwrap();
        assert_eq!(u.iter().map(|x| x.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(u[2].role, Role::Client);
        assert_eq!(u[0].tokens.len(), 3);
        for bad in [vec![0], vec![6], vec![4, 2], vec![2, 2]] {
            assert!(matches!(split_utterances(&ts, &Fixed(bad)), Err(SegmentError::InvalidBoundary { .. })));
        }
    }

    proptest! {
        #[test]
        fn tokens_conserved_and_ordered(
            sizes in prop::collection::vec(1usize..40, 1..6),
            max_tokens in 1usize..20,
            gap in 0.0f64..1.0,
        ) {
            let turns: Vec<SpeakerTurn> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| turn(if i % 2 == 0 { Role::Therapist } else { Role::Client }, i as f64 * 100.0, n, gap))
                .collect();
            let d = PauseLengthDetector { cfg: SegmenterConfig { pause_split: 0.6, max_tokens } };
            let u = split_utterances(&turns, &d).unwrap();
            let flat: Vec<&String> = u.iter().flat_map(|x| x.tokens.iter()).collect();
            let orig: Vec<&String> = turns.iter().flat_map(|t| t.words.iter().map(|w| &w.token)).collect();
            prop_assert_eq!(flat, orig);
            for w in u.windows(2) {
                prop_assert!(w[0].index < w[1].index);
                prop_assert!(w[0].span.unwrap().start < w[1].span.unwrap().start);
            }
            prop_assert!(u.iter().all(|x| x.tokens.len() <= max_tokens));
        }
    }
}
