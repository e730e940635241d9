//! Quality-assurance gate. Checks run in a fixed order and the first
//! violation halts processing for the session.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{Cluster, Seconds, Segment, SpeakerTurn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateThresholds {
    pub min_duration: Seconds,
    pub max_duration: Seconds,
    pub min_voiced_fraction: f64,
    pub max_mean_voiced_segment: Seconds,
    pub min_speaker_fraction: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            min_duration: 60.0,
            max_duration: 18000.0,
            min_voiced_fraction: 0.25,
            max_mean_voiced_segment: 20.0,
            min_speaker_fraction: 0.10,
        }
    }
}

impl GateThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_duration < self.max_duration) {
            return Err("min_duration must be below max_duration".into());
        }
        for (name, f) in [
            ("min_voiced_fraction", self.min_voiced_fraction),
            ("min_speaker_fraction", self.min_speaker_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(format!("{name} must lie in (0, 1)"));
            }
        }
        if !(self.max_mean_voiced_segment > 0.0) {
            return Err("max_mean_voiced_segment must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateOutcome {
    Pass,
    DurationOutOfRange,
    InsufficientVoiced,
    OverlongVoicedSegments,
    SpeakerImbalance,
}

impl GateOutcome {
    pub fn exit_code(self) -> i32 {
        match self {
            GateOutcome::Pass => 0,
            GateOutcome::DurationOutOfRange => 10,
            GateOutcome::InsufficientVoiced => 11,
            GateOutcome::OverlongVoicedSegments => 12,
            GateOutcome::SpeakerImbalance => 13,
        }
    }

    pub fn is_pass(self) -> bool {
        self == GateOutcome::Pass
    }
}

impl fmt::Display for GateOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateOutcome::Pass => "pass",
            GateOutcome::DurationOutOfRange => "session duration out of range",
            GateOutcome::InsufficientVoiced => "too little voiced audio",
            GateOutcome::OverlongVoicedSegments => "voiced segments too long on average",
            GateOutcome::SpeakerImbalance => "one speaker barely talks",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GateMeasurements {
    pub duration: Option<Seconds>,
    pub voiced_fraction: Option<f64>,
    pub mean_voiced_segment: Option<Seconds>,
    pub min_speaker_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub outcome: GateOutcome,
    pub measured: GateMeasurements,
}

impl GateVerdict {
    pub fn is_pass(&self) -> bool {
        self.outcome.is_pass()
    }
}

/// Conditions on duration, voiced fraction and mean voiced-segment length.
pub fn check_stage1(total_duration: Seconds, voiced: &[Segment], t: &GateThresholds) -> GateVerdict {
    let voiced_time: Seconds = voiced.iter().map(|s| s.span.duration()).sum();
    let fraction = if total_duration > 0.0 { voiced_time / total_duration } else { 0.0 };
    let mean = if voiced.is_empty() { 0.0 } else { voiced_time / voiced.len() as f64 };
    let measured = GateMeasurements {
        duration: Some(total_duration),
        voiced_fraction: Some(fraction),
        mean_voiced_segment: Some(mean),
        min_speaker_fraction: None,
    };
    let outcome = if total_duration < t.min_duration || total_duration > t.max_duration {
        GateOutcome::DurationOutOfRange
    } else if fraction < t.min_voiced_fraction {
        GateOutcome::InsufficientVoiced
    } else if mean > t.max_mean_voiced_segment {
        GateOutcome::OverlongVoicedSegments
    } else {
        GateOutcome::Pass
    };
    GateVerdict { outcome, measured }
}

/// Speaking time per cluster, summed over turns.
pub fn speaking_time(turns: &[SpeakerTurn]) -> [Seconds; 2] {
    let mut out = [0.0; 2];
    for t in turns {
        out[match t.cluster {
            Cluster::A => 0,
            Cluster::B => 1,
        }] += t.span.duration();
    }
    out
}

/// Condition on the minority speaker's share of speaking time.
pub fn check_stage2(turns: &[SpeakerTurn], t: &GateThresholds) -> GateVerdict {
    let [a, b] = speaking_time(turns);
    let total = a + b;
    let frac = if total > 0.0 { a.min(b) / total } else { 0.0 };
    // shares like 10/100 land a few ulps under 0.1 in floating point
    let outcome = if frac < t.min_speaker_fraction - 1e-12 {
        GateOutcome::SpeakerImbalance
    } else {
        GateOutcome::Pass
    };
    GateVerdict {
        outcome,
        measured: GateMeasurements {
            min_speaker_fraction: Some(frac),
            ..GateMeasurements::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimeSpan;
    use proptest::prelude::*;

    fn segs(n: usize, len: f64, every: f64) -> Vec<Segment> {
        (0..n)
            .map(|i| Segment::unlabeled(TimeSpan::new(i as f64 * every, i as f64 * every + len).unwrap()))
            .collect()
    }

    fn turns(a: f64, b: f64) -> Vec<SpeakerTurn> {
        vec![
            SpeakerTurn::new(Cluster::A, TimeSpan::new(0.0, a).unwrap()),
            SpeakerTurn::new(Cluster::B, TimeSpan::new(a, a + b).unwrap()),
        ]
    }

    #[test]
    fn stage1_examples() {
        let t = GateThresholds::default();
        assert_eq!(check_stage1(3000.0, &segs(450, 4.0, 6.6), &t).outcome, GateOutcome::Pass);
        assert_eq!(check_stage1(30.0, &segs(5, 4.0, 6.0), &t).outcome, GateOutcome::DurationOutOfRange);
        assert_eq!(check_stage1(3000.0, &segs(75, 4.0, 40.0), &t).outcome, GateOutcome::InsufficientVoiced);
        assert_eq!(check_stage1(3000.0, &segs(60, 25.0, 50.0), &t).outcome, GateOutcome::OverlongVoicedSegments);
        // bounds are inclusive
        assert_eq!(check_stage1(60.0, &segs(1, 20.0, 60.0), &t).outcome, GateOutcome::Pass);
        assert_eq!(check_stage1(18000.0, &segs(300, 20.0, 60.0), &t).outcome, GateOutcome::Pass);
        assert_eq!(check_stage1(18000.5, &segs(300, 20.0, 60.0), &t).outcome, GateOutcome::DurationOutOfRange);
    }

    #[test]
    fn first_violation_wins() {
        let t = GateThresholds::default();
        // too short and barely voiced: duration is reported
        assert_eq!(check_stage1(20.0, &[], &t).outcome, GateOutcome::DurationOutOfRange);
    }

    #[test]
    fn stage2_examples() {
        let t = GateThresholds::default();
        assert_eq!(check_stage2(&turns(55.0, 45.0), &t).outcome, GateOutcome::Pass);
        assert_eq!(check_stage2(&turns(92.0, 8.0), &t).outcome, GateOutcome::SpeakerImbalance);
        assert_eq!(check_stage2(&turns(90.0, 10.0), &t).outcome, GateOutcome::Pass);
        assert_eq!(check_stage2(&turns(9.0, 1.0), &t).outcome, GateOutcome::Pass);
        assert_eq!(GateOutcome::SpeakerImbalance.exit_code(), 13);
    }

    proptest! {
        #[test]
        fn more_minority_time_never_fails(a in 1.0f64..1000.0, b in 1.0f64..1000.0, extra in 0.0f64..500.0) {
            let t = GateThresholds::default();
            let before = check_stage2(&turns(a, b), &t);
            let after = if a < b { check_stage2(&turns(a + extra, b), &t) } else { check_stage2(&turns(a, b + extra), &t) };
            if before.is_pass() && (a - b).abs() > extra {
                prop_assert!(after.is_pass());
            }
        }
    }
}
