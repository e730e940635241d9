//! Signal-mode inputs: feature tracks and waveforms rendered from voiced
//! regions. Silence is digital silence, so its log-energy sits at the
//! feature floor.

use mifi_core::types::{Cluster, FrameTrack, Seconds, TimeSpan};
use mifi_core::vad::NUM_BANDS;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::synth::SynthSession;

/// Log-energy of an all-zero frame as produced by the feature frontend.
pub const SILENCE_FLOOR: f64 = -23.025850929940457;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalConfig {
    pub frame_step: Seconds,
    pub window: Seconds,
    pub voiced_energy: f64,
    pub energy_noise: f64,
    /// Mean log band energies of speaker A and speaker B.
    pub speaker_bands: [[f64; NUM_BANDS]; 2],
    pub band_noise: f64,
    pub sample_rate: u32,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            frame_step: FrameTrack::DEFAULT_STEP,
            window: FrameTrack::DEFAULT_WINDOW,
            voiced_energy: -3.0,
            energy_noise: 0.5,
            speaker_bands: [[0.0, -2.0, 0.0, -2.0], [-2.0, 0.0, -2.0, 0.0]],
            band_noise: 0.4,
            sample_rate: 16_000,
        }
    }
}

/// Voiced region and the cluster speaking in it.
pub type VoicedRegion = (TimeSpan, Cluster);

fn cluster_index(c: Cluster) -> usize {
    match c {
        Cluster::A => 0,
        Cluster::B => 1,
    }
}

/// Feature frames: `[log-energy, band_1 .. band_NUM_BANDS]`. A frame is
/// voiced when its centre lies inside a region.
pub fn render_frames<R: Rng>(total: Seconds, regions: &[VoicedRegion], cfg: &SignalConfig, rng: &mut R) -> FrameTrack {
    let n = (total / cfg.frame_step).floor() as usize;
    let mut regions = regions.to_vec();
    regions.sort_by(|a, b| a.0.start.total_cmp(&b.0.start));
    let energy = Normal::new(cfg.voiced_energy, cfg.energy_noise).expect("finite noise");
    let band = Normal::new(0.0, cfg.band_noise).expect("finite noise");
    let mut values = Vec::with_capacity(n);
    let mut r = 0;
    for i in 0..n {
        let centre = (i as f64 + 0.5) * cfg.frame_step;
        while r < regions.len() && regions[r].0.end <= centre {
            r += 1;
        }
        let speaker = regions
            .get(r)
            .filter(|(s, _)| s.start <= centre)
            .map(|&(_, c)| cluster_index(c));
        let v = match speaker {
            Some(k) => {
                let mut v = Vec::with_capacity(1 + NUM_BANDS);
                v.push(energy.sample(rng).max(SILENCE_FLOOR + 1.0));
                v.extend(cfg.speaker_bands[k].iter().map(|m| m + band.sample(rng)));
                v
            }
            None => vec![SILENCE_FLOOR; 1 + NUM_BANDS],
        };
        values.push(v);
    }
    FrameTrack::new(cfg.frame_step, cfg.window, values).expect("uniform frame dimension")
}

/// Utterance spans of a synthetic session, each spoken continuously.
pub fn session_regions(s: &SynthSession) -> Vec<VoicedRegion> {
    s.voiced_segments()
        .into_iter()
        .map(|seg| (seg.span, seg.cluster.expect("labeled")))
        .collect()
}

pub fn session_frames<R: Rng>(s: &SynthSession, cfg: &SignalConfig, rng: &mut R) -> FrameTrack {
    render_frames(s.total_duration, &session_regions(s), cfg, rng)
}

/// Waveform with band-limited noise per speaker: speaker A occupies the
/// first and third spectral quarter, speaker B the second and fourth.
pub fn render_audio<R: Rng>(total: Seconds, regions: &[VoicedRegion], cfg: &SignalConfig, rng: &mut R) -> Vec<f32> {
    let sr = cfg.sample_rate as f64;
    let n = (total * sr).floor() as usize;
    let mut out = vec![0.0f32; n];
    let nyquist = sr / 2.0;
    let quarter = nyquist / 4.0;
    for &(span, c) in regions {
        let k = cluster_index(c);
        let tones: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let q = if k == 0 { [0.0, 2.0] } else { [1.0, 3.0] }[i % 2];
                let f = quarter * (q + rng.random_range(0.15..0.85));
                (f, rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let lo = (span.start * sr) as usize;
        let hi = ((span.end * sr) as usize).min(n);
        for (j, s) in out[lo..hi].iter_mut().enumerate() {
            let t = (lo + j) as f64 / sr;
            let v: f64 = tones.iter().map(|(f, ph)| (std::f64::consts::TAU * f * t + ph).sin()).sum();
            *s = (0.05 * v) as f32;
        }
    }
    out
}
