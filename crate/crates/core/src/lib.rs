//! Automated rich transcription and behavior coding of dyadic counseling
//! sessions: voice activity detection, diarization, speaker role
//! recognition, utterance segmentation, quality gating, utterance and
//! session-level coding, evaluation metrics, and the feedback report.
//!
//! The numeric core is generic over the scalar type. `f64` is the working
//! precision; exact rationals are used where aggregate identities must hold
//! without rounding.

pub mod code;
pub mod diarize;
pub mod gate;
pub mod lm;
pub mod metrics;
pub mod report;
pub mod roles;
pub mod rttm;
pub mod scalar;
pub mod segment;
pub mod taxonomy;
pub mod types;
pub mod vad;

pub use num_rational::Rational64;
pub use scalar::{Real, Scalar};

pub type NgramModel = lm::NgramModel<f64>;
pub type NgramModelF32 = lm::NgramModel<f32>;
pub type InterpolatedModel = lm::InterpolatedModel<f64>;
pub type AffinityMatrix = diarize::AffinityMatrix<f64>;
pub type HacResult = diarize::HacResult<f64>;
pub type RoleAssignment = roles::RoleAssignment<f64>;
pub type DerResult = metrics::DerBreakdown<f64>;
pub type ExactDer = metrics::DerBreakdown<Rational64>;
pub type WerResult = metrics::WerBreakdown<f64>;
pub type ExactWer = metrics::WerBreakdown<Rational64>;
pub type RaterMatrix = metrics::RaterMatrix<f64>;
