//! Stage orchestration: VAD, gate 1, diarization, gate 2, transcription,
//! role recognition, segmentation, coding and the report. The run stops at
//! the first gate that does not pass.

use std::collections::BTreeMap;

use mifi_core::code::{predict_codes, CodeError};
use mifi_core::diarize::{self, CosineScorer, DiarizeError, StatsPoolingEmbedder};
use mifi_core::gate::{check_stage1, check_stage2, GateMeasurements, GateVerdict};
use mifi_core::report::{build_report, EmitError, SessionReport};
use mifi_core::roles::{label_turns, RoleError};
use mifi_core::segment::{assemble_talk_turns, split_utterances, PauseLengthDetector, SegmentError};
use mifi_core::taxonomy::GlobalCodeName;
use mifi_core::types::{FrameTrack, Seconds, Segment, SpeakerTurn, Utterance};
use mifi_core::vad::{detect_segments, EnergyThresholdClassifier, VadError};
use mifi_core::RoleAssignment;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::models::Models;
use crate::transcribe::Transcriber;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("voice activity detection: {0}")]
    Vad(#[from] VadError),
    #[error("diarization: {0}")]
    Diarize(#[from] DiarizeError),
    #[error("role recognition: {0}")]
    Roles(#[from] RoleError),
    #[error("segmentation: {0}")]
    Segment(#[from] SegmentError),
    #[error("coding: {0}")]
    Code(#[from] CodeError),
    #[error("report: {0}")]
    Report(#[from] EmitError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Vad(_) => "vad",
            PipelineError::Diarize(_) => "diarize",
            PipelineError::Roles(_) => "roles",
            PipelineError::Segment(_) => "segment",
            PipelineError::Code(_) => "code",
            PipelineError::Report(_) => "report",
        }
    }
}

/// Where the speech regions and speaker turns come from.
#[derive(Debug, Clone, Copy)]
pub enum Audio<'a> {
    /// Feature frames: run VAD and diarization.
    Frames(&'a FrameTrack),
    /// Precomputed voiced regions and cluster-labeled turns.
    Oracle {
        total_duration: Seconds,
        voiced: &'a [Segment],
        turns: &'a [SpeakerTurn],
    },
}

pub struct SessionInput<'a> {
    pub id: &'a str,
    pub audio: Audio<'a>,
    pub transcriber: &'a dyn Transcriber,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: SessionReport,
    /// Diarized turns with words and roles.
    pub turns: Vec<SpeakerTurn>,
    pub talk_turns: Vec<SpeakerTurn>,
    pub utterances: Vec<Utterance>,
    pub roles: RoleAssignment,
    pub globals: BTreeMap<GlobalCodeName, f64>,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed(Box<PipelineOutput>),
    Halted(GateVerdict),
}

impl RunOutcome {
    pub fn verdict(&self) -> GateVerdict {
        match self {
            RunOutcome::Completed(o) => o.report.verdict,
            RunOutcome::Halted(v) => *v,
        }
    }

    pub fn output(&self) -> Option<&PipelineOutput> {
        match self {
            RunOutcome::Completed(o) => Some(o),
            RunOutcome::Halted(_) => None,
        }
    }
}

fn merge_measurements(a: GateMeasurements, b: GateMeasurements) -> GateMeasurements {
    GateMeasurements {
        duration: b.duration.or(a.duration),
        voiced_fraction: b.voiced_fraction.or(a.voiced_fraction),
        mean_voiced_segment: b.mean_voiced_segment.or(a.mean_voiced_segment),
        min_speaker_fraction: b.min_speaker_fraction.or(a.min_speaker_fraction),
    }
}

pub fn run_pipeline(input: &SessionInput, models: &Models, cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    let (total, voiced) = match input.audio {
        Audio::Frames(f) => {
            let clf = EnergyThresholdClassifier {
                quantile: cfg.vad.threshold_quantile,
            };
            (f.duration(), detect_segments(f, &clf, &cfg.vad)?)
        }
        Audio::Oracle {
            total_duration, voiced, ..
        } => (total_duration, voiced.to_vec()),
    };
    let v1 = check_stage1(total, &voiced, &cfg.gate);
    log::debug!("{}: stage 1 {}", input.id, v1.outcome);
    if !v1.is_pass() {
        return Ok(RunOutcome::Halted(v1));
    }

    let mut turns = match input.audio {
        Audio::Frames(f) => {
            let embedder = StatsPoolingEmbedder {
                skip_dims: cfg.embed_skip_dims,
            };
            diarize::diarize(f, &voiced, &embedder, &CosineScorer, &cfg.diarize)?.turns
        }
        Audio::Oracle { turns, .. } => turns.iter().map(|t| SpeakerTurn::new(t.cluster, t.span)).collect(),
    };
    let v2 = check_stage2(&turns, &cfg.gate);
    log::debug!("{}: stage 2 {}", input.id, v2.outcome);
    let verdict = GateVerdict {
        outcome: v2.outcome,
        measured: merge_measurements(v1.measured, v2.measured),
    };
    if !verdict.is_pass() {
        return Ok(RunOutcome::Halted(verdict));
    }

    for t in turns.iter_mut() {
        t.words = input.transcriber.transcribe(t);
    }
    let roles = label_turns(&mut turns, &models.therapist_lm, &models.client_lm)?;
    let talk_turns = assemble_talk_turns(&turns);
    let mut utterances = split_utterances(&talk_turns, &PauseLengthDetector { cfg: cfg.segmenter })?;
    predict_codes(&mut utterances, &models.coder);
    let globals = match &models.globals {
        Some(g) => {
            let text: Vec<Vec<String>> = utterances.iter().map(|u| u.tokens.clone()).collect();
            g.predict(&text)?
        }
        None => BTreeMap::new(),
    };
    let report = build_report(input.id, verdict, &talk_turns, &utterances, globals.clone(), &cfg.report)?;
    Ok(RunOutcome::Completed(Box::new(PipelineOutput {
        report,
        turns,
        talk_turns,
        utterances,
        roles,
        globals,
    })))
}

/// Run many sessions concurrently on `cfg.workers` threads; results keep
/// input order.
pub fn run_batch(
    inputs: &[SessionInput],
    models: &Models,
    cfg: &PipelineConfig,
) -> Vec<Result<RunOutcome, PipelineError>> {
    let work = || inputs.par_iter().map(|i| run_pipeline(i, models, cfg)).collect();
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}), running on the global pool");
            work()
        }
    }
}
