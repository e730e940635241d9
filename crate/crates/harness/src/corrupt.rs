//! Controlled transcription and diarization errors.

use mifi_core::types::{Cluster, SpeakerTurn, Word};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Per-reference-word error rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WerRates {
    pub substitution: f64,
    pub deletion: f64,
    /// Mean number of words inserted after each reference word.
    pub insertion: f64,
}

impl WerRates {
    pub fn new(substitution: f64, deletion: f64, insertion: f64) -> Self {
        Self {
            substitution,
            deletion,
            insertion,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.substitution == 0.0 && self.deletion == 0.0 && self.insertion == 0.0
    }
}

/// Corrupt a word sequence. Each word is deleted with probability
/// `deletion`, otherwise replaced by a different pool word with probability
/// `substitution`; after every reference word a Poisson(`insertion`) number
/// of pool words is inserted. Inserted words reuse the timing of the word
/// they follow.
pub fn inject_errors<R: Rng>(words: &[Word], rates: &WerRates, pool: &[String], rng: &mut R) -> Vec<Word> {
    if rates.is_zero() || pool.is_empty() {
        return words.to_vec();
    }
    let poisson = (rates.insertion > 0.0).then(|| Poisson::new(rates.insertion).expect("positive rate"));
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let u: f64 = rng.random();
        if u < rates.deletion {
            // dropped
        } else if u < rates.deletion + rates.substitution {
            let mut sub = w.clone();
            sub.token = loop {
                let cand = pool.choose(rng).expect("non-empty pool");
                if *cand != w.token || pool.len() == 1 {
                    break cand.clone();
                }
            };
            out.push(sub);
        } else {
            out.push(w.clone());
        }
        if let Some(p) = &poisson {
            let n = p.sample(rng) as usize;
            for _ in 0..n {
                let mut ins = w.clone();
                ins.token = pool.choose(rng).expect("non-empty pool").clone();
                out.push(ins);
            }
        }
    }
    out
}

/// Flip each turn's cluster independently with probability `p`.
pub fn confuse_turns<R: Rng>(turns: &mut [SpeakerTurn], p: f64, rng: &mut R) -> usize {
    let mut flipped = 0;
    for t in turns.iter_mut() {
        if rng.random::<f64>() < p {
            t.cluster = match t.cluster {
                Cluster::A => Cluster::B,
                Cluster::B => Cluster::A,
            };
            flipped += 1;
        }
    }
    flipped
}
