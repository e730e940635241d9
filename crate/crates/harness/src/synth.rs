//! Synthetic two-party sessions with full ground truth.
//!
//! Role separation is lexical: each role draws filler words from its own
//! vocabulary, therapist utterances carry a short keyword phrase for their
//! group code, and each global rating is planted as a pair of high/low
//! signal words whose mix tracks the score.

use std::collections::{BTreeMap, BTreeSet};

use mifi_core::rttm::RttmSegment;
use mifi_core::taxonomy::{group_members, GlobalCodeName, GroupCode, RawMiscCode, TRAIN_GROUP_COUNTS};
use mifi_core::types::{Cluster, Role, Seconds, Segment, Session, SpeakerTurn, TimeSpan, Utterance, Word};
use mifi_core::code::GlobalExample;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrupt::WerRates;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("{name} = {value} is not a probability")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("code distribution sums to {0}, expected 1")]
    Unnormalized(f64),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Filler vocabulary of one role with a Zipf rank distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleVocabulary {
    pub words: Vec<String>,
    pub zipf_exponent: f64,
}

impl RoleVocabulary {
    /// CVCV pseudo-words whose first consonant is drawn from `onsets`.
    pub fn pseudo_words(onsets: &str, n: usize) -> Self {
        let vowels = ['a', 'e', 'i', 'o', 'u'];
        let codas = ['r', 's', 't', 'v', 'z'];
        let mut words = Vec::with_capacity(n);
        'outer: for o in onsets.chars() {
            for &v1 in &vowels {
                for &c in &codas {
                    for &v2 in &vowels {
                        if words.len() == n {
                            break 'outer;
                        }
                        words.push(format!("{o}{v1}{c}{v2}"));
                    }
                }
            }
        }
        Self {
            words,
            zipf_exponent: 1.0,
        }
    }
}

/// Inclusive range for uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T> Range<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }
}

impl Range<f64> {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..self.max)
        } else {
            self.min
        }
    }
}

impl Range<usize> {
    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(self.min..=self.max.max(self.min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurnTiming {
    pub turns: Range<usize>,
    pub utterances_per_turn: Range<usize>,
    pub therapist_filler: Range<usize>,
    pub client_tokens: Range<usize>,
    pub word_duration: Range<f64>,
    /// Silence between words of one utterance.
    pub word_gap: Range<f64>,
    /// Silence between utterances of one turn.
    pub utterance_gap: Range<f64>,
    /// Silence between turns.
    pub turn_gap: Range<f64>,
}

impl Default for TurnTiming {
    fn default() -> Self {
        Self {
            turns: Range::new(30, 80),
            utterances_per_turn: Range::new(1, 3),
            therapist_filler: Range::new(2, 10),
            client_tokens: Range::new(3, 15),
            word_duration: Range::new(0.25, 0.35),
            word_gap: Range::new(0.05, 0.25),
            utterance_gap: Range::new(0.65, 0.9),
            turn_gap: Range::new(0.7, 1.5),
        }
    }
}

/// Per-group keyword phrases and per-global (high, low) signal words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub code_phrases: BTreeMap<GroupCode, Vec<String>>,
    pub global_signals: BTreeMap<GlobalCodeName, (String, String)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        use GlobalCodeName as G;
        use GroupCode as C;
        let phrase = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let code_phrases = [
            (C::Fa, "mhm gotcha alright"),
            (C::Gi, "research shows percent"),
            (C::Quc, "did yesterday drink"),
            (C::Quo, "tell what about"),
            (C::Rec, "deep inside feeling"),
            (C::Res, "sounds like saying"),
            (C::Min, "must stop warn"),
            (C::Mia, "appreciate honesty effort"),
            (C::St, "today agenda minutes"),
        ]
        .into_iter()
        .map(|(c, p)| (c, phrase(p)))
        .collect();
        let global_signals = [
            (G::Acceptance, "accepting", "judging"),
            (G::Empathy, "understand", "dismiss"),
            (G::Direction, "focus", "wander"),
            (G::AutonomySupport, "choice", "insist"),
            (G::Collaboration, "together", "alone"),
            (G::Evocation, "motivation", "lecture"),
        ]
        .into_iter()
        .map(|(g, hi, lo)| (g, (hi.to_string(), lo.to_string())))
        .collect();
        Self {
            code_phrases,
            global_signals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_sessions: usize,
    pub therapist_vocabulary: RoleVocabulary,
    pub client_vocabulary: RoleVocabulary,
    pub code_distribution: BTreeMap<GroupCode, f64>,
    /// Each session rescales every group probability by a factor drawn from
    /// `[1 - j, 1 + j]` before renormalizing, so sessions differ in profile.
    pub code_jitter: f64,
    pub lexicon: Lexicon,
    pub timing: TurnTiming,
    /// Chance that a therapist utterance carries the signal word of a given
    /// global code.
    pub signal_rate: f64,
    pub wer_injection: WerRates,
    pub speaker_confusion: f64,
}

pub fn default_code_distribution() -> BTreeMap<GroupCode, f64> {
    let total: u32 = TRAIN_GROUP_COUNTS.iter().map(|(_, n)| n).sum();
    TRAIN_GROUP_COUNTS
        .iter()
        .map(|&(g, n)| (g, n as f64 / total as f64))
        .collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            num_sessions: 20,
            therapist_vocabulary: RoleVocabulary::pseudo_words("bdfg", 150),
            client_vocabulary: RoleVocabulary::pseudo_words("klmn", 150),
            code_distribution: default_code_distribution(),
            code_jitter: 0.0,
            lexicon: Lexicon::default(),
            timing: TurnTiming::default(),
            signal_rate: 1.0,
            wer_injection: WerRates::default(),
            speaker_confusion: 0.0,
        }
    }
}

fn check_prob(name: &'static str, value: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SynthError::NotAProbability { name, value })
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("code_jitter", self.code_jitter),
            ("signal_rate", self.signal_rate),
            ("speaker_confusion", self.speaker_confusion),
            ("wer_injection.substitution", self.wer_injection.substitution),
            ("wer_injection.deletion", self.wer_injection.deletion),
            ("wer_injection.insertion", self.wer_injection.insertion),
        ] {
            check_prob(name, v)?;
        }
        if self.wer_injection.substitution + self.wer_injection.deletion > 1.0 {
            return Err(SynthError::Config("substitution + deletion exceeds 1".into()));
        }
        for &p in self.code_distribution.values() {
            check_prob("code_distribution", p)?;
        }
        let sum: f64 = self.code_distribution.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::Unnormalized(sum));
        }
        for g in GroupCode::ALL {
            if self.code_distribution.get(g).copied().unwrap_or(0.0) > 0.0
                && self.lexicon.code_phrases.get(g).is_none_or(Vec::is_empty)
            {
                return Err(SynthError::Config(format!("no keyword phrase for {g}")));
            }
        }
        if self.therapist_vocabulary.words.is_empty() || self.client_vocabulary.words.is_empty() {
            return Err(SynthError::Config("empty role vocabulary".into()));
        }
        let t: BTreeSet<&String> = self.therapist_vocabulary.words.iter().collect();
        if self.client_vocabulary.words.iter().any(|w| t.contains(w)) {
            return Err(SynthError::Config("role vocabularies overlap".into()));
        }
        let tm = &self.timing;
        if tm.turns.min < 2 || tm.utterances_per_turn.min == 0 || tm.client_tokens.min == 0 {
            return Err(SynthError::Config("timing ranges must allow non-empty turns".into()));
        }
        if !(tm.word_duration.min > 0.0) {
            return Err(SynthError::Config("word duration must be positive".into()));
        }
        Ok(())
    }

    /// Every token the generator can emit, sorted; used as the substitution
    /// and insertion pool for error injection.
    pub fn token_pool(&self) -> Vec<String> {
        let mut s: BTreeSet<String> = BTreeSet::new();
        s.extend(self.therapist_vocabulary.words.iter().cloned());
        s.extend(self.client_vocabulary.words.iter().cloned());
        s.extend(self.lexicon.code_phrases.values().flatten().cloned());
        for (hi, lo) in self.lexicon.global_signals.values() {
            s.insert(hi.clone());
            s.insert(lo.clone());
        }
        s.into_iter().collect()
    }
}

/// One generated session and its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSession {
    pub id: String,
    pub total_duration: Seconds,
    pub therapist_cluster: Cluster,
    /// Role-labeled turns with timed words.
    pub turns: Vec<SpeakerTurn>,
    /// Therapist utterances carry one raw code in `ref_codes`.
    pub utterances: Vec<Utterance>,
    pub globals: BTreeMap<GlobalCodeName, f64>,
}

impl SynthSession {
    pub fn cluster_of(&self, role: Role) -> Cluster {
        match role {
            Role::Therapist => self.therapist_cluster,
            Role::Client => self.therapist_cluster.other(),
        }
    }

    /// Voiced regions: each utterance is continuous speech.
    pub fn voiced_segments(&self) -> Vec<Segment> {
        self.utterances
            .iter()
            .filter_map(|u| Some(Segment::labeled(u.span?, self.cluster_of(u.role))))
            .collect()
    }

    /// Reference diarization: turns without words or roles.
    pub fn diarization(&self) -> Vec<SpeakerTurn> {
        self.turns
            .iter()
            .map(|t| SpeakerTurn::new(t.cluster, t.span))
            .collect()
    }

    pub fn words(&self) -> Vec<Word> {
        self.turns.iter().flat_map(|t| t.words.iter().cloned()).collect()
    }

    pub fn true_group(u: &Utterance) -> Option<GroupCode> {
        u.ref_groups().into_iter().next()
    }

    /// Therapist utterance count per group.
    pub fn true_counts(&self) -> BTreeMap<GroupCode, usize> {
        let mut m: BTreeMap<GroupCode, usize> = GroupCode::ALL.iter().map(|&g| (g, 0)).collect();
        for u in self.utterances.iter().filter(|u| u.role == Role::Therapist) {
            if let Some(g) = Self::true_group(u) {
                *m.entry(g).or_default() += 1;
            }
        }
        m
    }

    pub fn to_session(&self) -> Session {
        Session {
            id: self.id.clone(),
            frames: None,
            segments: self.voiced_segments(),
            turns: self.turns.clone(),
            utterances: self.utterances.clone(),
            total_duration: self.total_duration,
        }
    }

    pub fn rttm(&self) -> Vec<RttmSegment> {
        self.turns
            .iter()
            .map(|t| RttmSegment {
                file: self.id.clone(),
                span: t.span,
                speaker: t.cluster.to_string(),
            })
            .collect()
    }

    pub fn global_example(&self) -> GlobalExample {
        GlobalExample {
            utterances: self.utterances.iter().map(|u| u.tokens.clone()).collect(),
            scores: self.globals.clone(),
        }
    }

    pub fn coder_examples(&self) -> impl Iterator<Item = (Vec<String>, GroupCode)> + '_ {
        self.utterances
            .iter()
            .filter(|u| u.role == Role::Therapist)
            .filter_map(|u| Some((u.tokens.clone(), Self::true_group(u)?)))
    }
}

/// Independent per-session stream derived from the corpus seed.
pub fn session_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    therapist: Zipf<f64>,
    client: Zipf<f64>,
    codes: Vec<GroupCode>,
    code_weights: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn new<R: Rng>(cfg: &'a SynthConfig, rng: &mut R) -> Result<Self, SynthError> {
        let zipf = |v: &RoleVocabulary| {
            Zipf::new(v.words.len() as f64, v.zipf_exponent).map_err(|e| SynthError::Config(e.to_string()))
        };
        let codes: Vec<GroupCode> = cfg.code_distribution.keys().copied().collect();
        let weights: Vec<f64> = cfg
            .code_distribution
            .values()
            .map(|&p| {
                let j = cfg.code_jitter;
                if j > 0.0 {
                    p * rng.random_range(1.0 - j..=1.0 + j)
                } else {
                    p
                }
            })
            .collect();
        let code_weights = WeightedIndex::new(&weights).map_err(|e| SynthError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            therapist: zipf(&cfg.therapist_vocabulary)?,
            client: zipf(&cfg.client_vocabulary)?,
            codes,
            code_weights,
        })
    }

    fn filler<R: Rng>(&self, role: Role, rng: &mut R) -> String {
        let (vocab, dist) = match role {
            Role::Therapist => (&self.cfg.therapist_vocabulary, &self.therapist),
            Role::Client => (&self.cfg.client_vocabulary, &self.client),
        };
        let rank = dist.sample(rng) as usize;
        vocab.words[rank.clamp(1, vocab.words.len()) - 1].clone()
    }

    fn therapist_utterance<R: Rng>(
        &self,
        globals: &BTreeMap<GlobalCodeName, f64>,
        rng: &mut R,
    ) -> (Vec<String>, RawMiscCode) {
        let group = self.codes[self.code_weights.sample(rng)];
        let raw = *group_members(group).choose(rng).expect("every group has members");
        let n = self.cfg.timing.therapist_filler.draw(rng);
        let mut body: Vec<String> = (0..n).map(|_| self.filler(Role::Therapist, rng)).collect();
        for (g, (hi, lo)) in &self.cfg.lexicon.global_signals {
            if rng.random::<f64>() < self.cfg.signal_rate {
                let score = globals.get(g).copied().unwrap_or(3.0);
                let word = if rng.random::<f64>() < (score - 1.0) / 4.0 { hi } else { lo };
                let at = rng.random_range(0..=body.len());
                body.insert(at, word.clone());
            }
        }
        let at = rng.random_range(0..=body.len());
        let phrase = &self.cfg.lexicon.code_phrases[&group];
        body.splice(at..at, phrase.iter().cloned());
        (body, raw)
    }

    fn client_utterance<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let n = self.cfg.timing.client_tokens.draw(rng);
        (0..n).map(|_| self.filler(Role::Client, rng)).collect()
    }
}

fn span(start: f64, end: f64) -> TimeSpan {
    TimeSpan::new(start, end).expect("generator produces ordered spans")
}

/// Generate the `index`-th session of the corpus described by `cfg`.
pub fn generate_session(cfg: &SynthConfig, index: usize) -> Result<SynthSession, SynthError> {
    cfg.validate()?;
    let mut rng = session_rng(cfg.seed, index);
    let sampler = Sampler::new(cfg, &mut rng)?;
    let tm = &cfg.timing;

    let globals: BTreeMap<GlobalCodeName, f64> = GlobalCodeName::ALL
        .iter()
        .map(|&g| (g, rng.random_range(1..=5u8) as f64))
        .collect();
    let therapist_cluster = if rng.random::<bool>() { Cluster::A } else { Cluster::B };
    let mut role = if rng.random::<bool>() { Role::Therapist } else { Role::Client };
    let n_turns = tm.turns.draw(&mut rng);

    let mut t = rng.random_range(0.5..1.5);
    let mut turns = Vec::with_capacity(n_turns);
    let mut utterances = Vec::new();
    for _ in 0..n_turns {
        let cluster = match role {
            Role::Therapist => therapist_cluster,
            Role::Client => therapist_cluster.other(),
        };
        let turn_start = t;
        let mut words = Vec::new();
        let n_utts = tm.utterances_per_turn.draw(&mut rng);
        for k in 0..n_utts {
            if k > 0 {
                t += tm.utterance_gap.draw(&mut rng);
            }
            let (tokens, raw) = match role {
                Role::Therapist => {
                    let (tokens, raw) = sampler.therapist_utterance(&globals, &mut rng);
                    (tokens, Some(raw))
                }
                Role::Client => (sampler.client_utterance(&mut rng), None),
            };
            let utt_start = t;
            for (i, tok) in tokens.iter().enumerate() {
                if i > 0 {
                    t += tm.word_gap.draw(&mut rng);
                }
                let d = tm.word_duration.draw(&mut rng);
                words.push(Word::timed(tok.clone(), span(t, t + d)).expect("non-empty token"));
                t += d;
            }
            let mut u = Utterance::new(utterances.len(), role, tokens).expect("non-empty utterance");
            u.span = Some(span(utt_start, t));
            u.ref_codes = raw.map(|r| [r].into_iter().collect());
            utterances.push(u);
        }
        let mut turn = SpeakerTurn::new(cluster, span(turn_start, t));
        turn.role = Some(role);
        turn.words = words;
        turns.push(turn);
        t += tm.turn_gap.draw(&mut rng);
        role = role.other();
    }
    let total_duration = t + rng.random_range(0.0..1.0);

    Ok(SynthSession {
        id: format!("synth{index:04}"),
        total_duration,
        therapist_cluster,
        turns,
        utterances,
        globals,
    })
}

/// Generate `cfg.num_sessions` sessions. Deterministic given the seed.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthSession>, SynthError> {
    (0..cfg.num_sessions).map(|i| generate_session(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mifi_core::code::stopwords;

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig {
            num_sessions: 3,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 2, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn default_code_frequencies_follow_training_counts() {
        let cfg = SynthConfig::default();
        let mut counts: BTreeMap<GroupCode, usize> = BTreeMap::new();
        let mut total = 0;
        let mut i = 0;
        while total < 10_000 {
            let s = generate_session(&cfg, i).unwrap();
            for (g, n) in s.true_counts() {
                *counts.entry(g).or_default() += n;
                total += n;
            }
            i += 1;
        }
        for (g, p) in default_code_distribution() {
            let f = counts[&g] as f64 / total as f64;
            assert!((f - p).abs() <= 0.02, "{g}: {f} vs {p}");
        }
    }

    #[test]
    fn structure_and_timing() {
        let cfg = SynthConfig::default();
        let s = generate_session(&cfg, 0).unwrap();
        assert!(s.total_duration > 60.0);
        assert!(s.turns.windows(2).all(|w| w[0].role != w[1].role));
        for t in &s.turns {
            assert!(t.word_timing_consistent());
            assert_eq!(t.cluster, s.cluster_of(t.role.unwrap()));
        }
        let words: usize = s.turns.iter().map(|t| t.words.len()).sum();
        let tokens: usize = s.utterances.iter().map(|u| u.tokens.len()).sum();
        assert_eq!(words, tokens);
        for u in &s.utterances {
            assert!(u.tokens.len() <= 60);
            assert_eq!(u.ref_codes.is_some(), u.role == Role::Therapist);
        }
        for w in s.turns.iter().flat_map(|t| t.words.windows(2)) {
            assert!(w[1].span.unwrap().start > w[0].span.unwrap().end);
        }
    }

    #[test]
    fn vocabularies_are_disjoint_and_signals_survive_stopwords() {
        let cfg = SynthConfig::default();
        cfg.validate().unwrap();
        let stop = stopwords();
        for (hi, lo) in cfg.lexicon.global_signals.values() {
            assert!(!stop.contains(hi) && !stop.contains(lo));
        }
        let pool = cfg.token_pool();
        let expected = 300
            + cfg.lexicon.code_phrases.values().map(Vec::len).sum::<usize>()
            + 2 * cfg.lexicon.global_signals.len();
        assert_eq!(pool.len(), expected, "no token is shared between lexicon parts");
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SynthConfig::default();
        cfg.code_distribution.insert(GroupCode::Fa, 0.9);
        assert!(matches!(cfg.validate(), Err(SynthError::Unnormalized(_))));
        let cfg = SynthConfig {
            speaker_confusion: 1.5,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(SynthError::NotAProbability { .. })));
    }
}
