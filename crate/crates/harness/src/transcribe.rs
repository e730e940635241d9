//! Transcription stage. Speech recognition itself is out of scope; the
//! oracle transcriber reads ground-truth words, optionally corrupted.

use mifi_core::types::{SpeakerTurn, TimeSpan, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corrupt::{inject_errors, WerRates};

pub trait Transcriber: Send + Sync {
    /// Words spoken inside `turn`, with timings clipped to the turn span.
    fn transcribe(&self, turn: &SpeakerTurn) -> Vec<Word>;
}

/// Returns the reference words whose midpoint falls inside the turn.
#[derive(Debug, Clone)]
pub struct OracleTranscriber {
    words: Vec<Word>,
    rates: WerRates,
    pool: Vec<String>,
    seed: u64,
}

impl OracleTranscriber {
    /// `words` must carry timings.
    pub fn new(mut words: Vec<Word>) -> Self {
        words.retain(|w| w.span.is_some());
        words.sort_by(|a, b| a.span.unwrap().start.total_cmp(&b.span.unwrap().start));
        Self {
            words,
            rates: WerRates::default(),
            pool: Vec::new(),
            seed: 0,
        }
    }

    /// Corrupt every turn's words. The error stream of a turn depends only on
    /// `seed` and the turn start, so results do not depend on call order.
    pub fn with_errors(mut self, rates: WerRates, pool: Vec<String>, seed: u64) -> Self {
        self.rates = rates;
        self.pool = pool;
        self.seed = seed;
        self
    }
}

fn clip(span: TimeSpan, turn: &TimeSpan) -> TimeSpan {
    let start = span.start.clamp(turn.start, turn.end);
    let end = span.end.clamp(turn.start, turn.end);
    if end > start {
        TimeSpan { start, end }
    } else {
        // a word straddling the edge with its midpoint inside keeps a
        // positive length, so this only guards degenerate turns
        TimeSpan {
            start: turn.start,
            end: turn.end,
        }
    }
}

impl Transcriber for OracleTranscriber {
    fn transcribe(&self, turn: &SpeakerTurn) -> Vec<Word> {
        let lo = self
            .words
            .partition_point(|w| w.span.unwrap().midpoint() < turn.span.start);
        let words: Vec<Word> = self.words[lo..]
            .iter()
            .take_while(|w| w.span.unwrap().midpoint() <= turn.span.end)
            .map(|w| {
                let mut w = w.clone();
                w.span = w.span.map(|s| clip(s, &turn.span));
                w
            })
            .collect();
        if self.rates.is_zero() {
            return words;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ turn.span.start.to_bits());
        inject_errors(&words, &self.rates, &self.pool, &mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_session, SynthConfig};
    use mifi_core::types::Cluster;

    #[test]
    fn oracle_reproduces_reference_turns() {
        let s = generate_session(&SynthConfig::default(), 0).unwrap();
        let tr = OracleTranscriber::new(s.words());
        for t in &s.turns {
            let got = tr.transcribe(&SpeakerTurn::new(t.cluster, t.span));
            assert_eq!(got, t.words);
        }
    }

    #[test]
    fn midpoint_assignment_and_clipping() {
        let w = |tok: &str, a: f64, b: f64| Word::timed(tok, TimeSpan::new(a, b).unwrap()).unwrap();
        let tr = OracleTranscriber::new(vec![w("x", 0.0, 1.0), w("y", 1.2, 2.0), w("z", 2.5, 3.5)]);
        let turn = SpeakerTurn::new(Cluster::A, TimeSpan::new(0.6, 3.2).unwrap());
        let got = tr.transcribe(&turn);
        let toks: Vec<&str> = got.iter().map(|w| w.token.as_str()).collect();
        assert_eq!(toks, ["y", "z"]);
        let mut t = turn.clone();
        t.words = got;
        assert!(t.word_timing_consistent());
        assert_eq!(t.words[1].span.unwrap().end, 3.2);
    }

    #[test]
    fn error_stream_is_order_independent() {
        let cfg = SynthConfig::default();
        let s = generate_session(&cfg, 1).unwrap();
        let tr = OracleTranscriber::new(s.words()).with_errors(WerRates::new(0.2, 0.1, 0.05), cfg.token_pool(), 5);
        let fwd: Vec<_> = s.turns.iter().map(|t| tr.transcribe(t)).collect();
        let mut rev: Vec<_> = s.turns.iter().rev().map(|t| tr.transcribe(t)).collect();
        rev.reverse();
        assert_eq!(fwd, rev);
    }
}
