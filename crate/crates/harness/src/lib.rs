//! Synthetic sessions with ground truth, controlled error injection, the
//! oracle transcriber and the stage orchestrator behind the `mifi` command.

pub mod config;
pub mod corrupt;
pub mod experiment;
pub mod io;
pub mod models;
pub mod pipeline;
pub mod signal;
pub mod synth;
pub mod transcribe;

pub use config::PipelineConfig;
pub use corrupt::{inject_errors, WerRates};
pub use models::{Models, TrainingConfig, TrainingData};
pub use pipeline::{run_batch, run_pipeline, Audio, PipelineError, RunOutcome, SessionInput};
pub use synth::{generate, generate_session, SynthConfig, SynthSession};
pub use transcribe::{OracleTranscriber, Transcriber};
