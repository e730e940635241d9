//! Pipeline inputs prepared from synthetic sessions, plus the scoring
//! helpers shared by the CLI and the test suites.

use std::collections::BTreeMap;

use mifi_core::metrics::{spearman, MetricError};
use mifi_core::taxonomy::GroupCode;
use mifi_core::types::{FrameTrack, Role, Seconds, Segment, SpeakerTurn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corrupt::{confuse_turns, WerRates};
use crate::pipeline::{Audio, PipelineOutput, SessionInput};
use crate::signal::{session_frames, SignalConfig};
use crate::synth::SynthSession;
use crate::transcribe::OracleTranscriber;

/// Owned inputs for one pipeline run.
pub struct Prepared {
    pub id: String,
    pub total_duration: Seconds,
    pub voiced: Vec<Segment>,
    /// Oracle diarization, after any injected speaker confusion.
    pub turns: Vec<SpeakerTurn>,
    pub frames: Option<FrameTrack>,
    pub transcriber: OracleTranscriber,
}

#[derive(Debug, Clone, Default)]
pub struct Corruption {
    pub wer: WerRates,
    pub speaker_confusion: f64,
    pub pool: Vec<String>,
    pub seed: u64,
}

impl Prepared {
    /// Transcript mode: reference voiced regions and turns.
    pub fn oracle(s: &SynthSession, c: &Corruption) -> Self {
        let mut turns = s.diarization();
        if c.speaker_confusion > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x5eed_c0f5);
            confuse_turns(&mut turns, c.speaker_confusion, &mut rng);
        }
        Self {
            id: s.id.clone(),
            total_duration: s.total_duration,
            voiced: s.voiced_segments(),
            turns,
            frames: None,
            transcriber: Self::transcriber(s, c),
        }
    }

    /// Signal mode: rendered feature frames, VAD and diarization run on them.
    pub fn signal(s: &SynthSession, signal: &SignalConfig, c: &Corruption) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0xf7a3_e5);
        Self {
            id: s.id.clone(),
            total_duration: s.total_duration,
            voiced: Vec::new(),
            turns: Vec::new(),
            frames: Some(session_frames(s, signal, &mut rng)),
            transcriber: Self::transcriber(s, c),
        }
    }

    fn transcriber(s: &SynthSession, c: &Corruption) -> OracleTranscriber {
        OracleTranscriber::new(s.words()).with_errors(c.wer, c.pool.clone(), c.seed)
    }

    pub fn input(&self) -> SessionInput<'_> {
        let audio = match &self.frames {
            Some(f) => Audio::Frames(f),
            None => Audio::Oracle {
                total_duration: self.total_duration,
                voiced: &self.voiced,
                turns: &self.turns,
            },
        };
        SessionInput {
            id: &self.id,
            audio,
            transcriber: &self.transcriber,
        }
    }
}

/// Whether the reference therapist's cluster was labeled Therapist. Only
/// meaningful when cluster names come from the reference (transcript mode).
pub fn roles_correct(s: &SynthSession, out: &PipelineOutput) -> bool {
    out.roles.role_of(s.therapist_cluster) == Role::Therapist
}

/// Spearman correlation per group between reference and predicted
/// per-session therapist code counts.
pub fn count_correlations(
    truth: &[BTreeMap<GroupCode, usize>],
    pred: &[BTreeMap<GroupCode, usize>],
) -> BTreeMap<GroupCode, Result<f64, MetricError>> {
    GroupCode::ALL
        .iter()
        .map(|&g| {
            let col = |m: &[BTreeMap<GroupCode, usize>]| -> Vec<f64> {
                m.iter().map(|c| c.get(&g).copied().unwrap_or(0) as f64).collect()
            };
            (g, spearman(&col(truth), &col(pred)))
        })
        .collect()
}
