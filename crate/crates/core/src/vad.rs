//! Voice activity detection: frame classification, median smoothing and
//! conversion of the binary frame track into merged voiced segments.

use std::io::{BufRead, Write};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DomainError, FrameTrack, Seconds, Segment, TimeSpan};

#[derive(Debug, Error)]
pub enum VadError {
    #[error("empty frame track")]
    EmptyInput,
    #[error("median filter needs an odd tap count, got {0}")]
    EvenTaps(usize),
    #[error("threshold quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("feature file: {0}")]
    FeatureFile(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub median_taps: usize,
    pub merge_gap: Seconds,
    pub frame_step: Seconds,
    /// Quantile of session log-energies used by the baseline classifier.
    pub threshold_quantile: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            median_taps: 31,
            merge_gap: 0.5,
            frame_step: FrameTrack::DEFAULT_STEP,
            threshold_quantile: 0.5,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<(), VadError> {
        if self.median_taps % 2 == 0 {
            return Err(VadError::EvenTaps(self.median_taps));
        }
        if !(0.0..=1.0).contains(&self.threshold_quantile) {
            return Err(VadError::InvalidQuantile(self.threshold_quantile));
        }
        if !(self.frame_step > 0.0) {
            return Err(DomainError::InvalidFrameStep(self.frame_step).into());
        }
        Ok(())
    }
}

/// Per-frame speech probability estimator.
pub trait FrameClassifier: Send + Sync {
    /// One probability in `[0, 1]` per input frame.
    fn classify(&self, frames: &FrameTrack) -> Result<Vec<f64>, VadError>;
}

/// Adaptive energy threshold: a frame is voiced when its log-energy (first
/// feature) is strictly above the given quantile of the session's energies.
#[derive(Debug, Clone, Copy)]
pub struct EnergyThresholdClassifier {
    pub quantile: f64,
}

impl FrameClassifier for EnergyThresholdClassifier {
    fn classify(&self, frames: &FrameTrack) -> Result<Vec<f64>, VadError> {
        baseline_classify(frames, self.quantile)
    }
}

/// Lower nearest-rank quantile: `sorted[floor(q * (n - 1))]`.
pub fn energy_threshold(energies: &[f64], quantile: f64) -> Result<f64, VadError> {
    if energies.is_empty() {
        return Err(VadError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(VadError::InvalidQuantile(quantile));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (quantile * (sorted.len() - 1) as f64).floor() as usize;
    Ok(sorted[idx])
}

pub fn baseline_classify(frames: &FrameTrack, quantile: f64) -> Result<Vec<f64>, VadError> {
    if frames.is_empty() || frames.dim() == 0 {
        return Err(VadError::EmptyInput);
    }
    let energies: Vec<f64> = frames.values.iter().map(|v| v[0]).collect();
    let threshold = energy_threshold(&energies, quantile)?;
    Ok(energies
        .iter()
        .map(|&e| if e > threshold { 1.0 } else { 0.0 })
        .collect())
}

/// Median filter over a binary track with replicated edges.
///
/// For binary input the window median is the majority value; with an odd
/// window there is never a tie.
pub fn median_smooth(bits: &[bool], taps: usize) -> Result<Vec<bool>, VadError> {
    if taps % 2 == 0 {
        return Err(VadError::EvenTaps(taps));
    }
    let n = bits.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = taps / 2;
    let at = |i: isize| -> usize { bits[i.clamp(0, n as isize - 1) as usize] as usize };

    let mut out = Vec::with_capacity(n);
    let mut ones: usize = (-(half as isize)..=half as isize).map(at).sum();
    for i in 0..n as isize {
        out.push(2 * ones > taps);
        ones = ones + at(i + half as isize + 1) - at(i - half as isize);
    }
    Ok(out)
}

pub fn threshold_probs(probs: &[f64], threshold: f64) -> Vec<bool> {
    probs.iter().map(|&p| p >= threshold).collect()
}

/// Maximal voiced runs, with runs separated by less than `merge_gap` of
/// silence merged together.
pub fn frames_to_segments(bits: &[bool], cfg: &VadConfig) -> Vec<Segment> {
    let step = cfg.frame_step;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < bits.len() {
        if bits[i] {
            let start = i;
            while i < bits.len() && bits[i] {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }

    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(last) if ((run.0 - last.1) as f64) * step < cfg.merge_gap - 1e-9 => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    merged
        .into_iter()
        .map(|(s, e)| Segment::unlabeled(TimeSpan {
            start: s as f64 * step,
            end: e as f64 * step,
        }))
        .collect()
}

/// Classify, smooth and segment a track in one call.
pub fn detect_segments(
    frames: &FrameTrack,
    classifier: &dyn FrameClassifier,
    cfg: &VadConfig,
) -> Result<Vec<Segment>, VadError> {
    cfg.validate()?;
    let probs = classifier.classify(frames)?;
    let bits = threshold_probs(&probs, 0.5);
    let smoothed = median_smooth(&bits, cfg.median_taps)?;
    let cfg = VadConfig {
        frame_step: frames.frame_step,
        ..*cfg
    };
    Ok(frames_to_segments(&smoothed, &cfg))
}

/// Number of band energies appended after the log-energy.
pub const NUM_BANDS: usize = 4;

/// Framed log-energy followed by log band energies over equal-width
/// spectral bands.
pub fn extract_features(
    samples: &[f32],
    sample_rate: u32,
    frame_step: Seconds,
    window: Seconds,
) -> Result<FrameTrack, VadError> {
    let hop = (frame_step * sample_rate as f64).round() as usize;
    let win = (window * sample_rate as f64).round() as usize;
    if hop == 0 || win == 0 {
        return Err(DomainError::InvalidFrameStep(frame_step).into());
    }
    if samples.len() < win {
        return Err(VadError::EmptyInput);
    }
    let fft_len = win.next_power_of_two();
    let fft = FftPlanner::<f32>::new().plan_fft_forward(fft_len);
    let hann: Vec<f32> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f32::consts::PI * i as f32 / win as f32).cos())
        .collect();

    let n_frames = (samples.len() - win) / hop + 1;
    let mut values = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0f32, 0.0); fft_len];
    let half = fft_len / 2;
    for f in 0..n_frames {
        let chunk = &samples[f * hop..f * hop + win];
        let energy: f64 = chunk.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / win as f64;
        for (slot, (x, w)) in buf.iter_mut().zip(chunk.iter().zip(&hann)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in buf.iter_mut().skip(win) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        let mut v = Vec::with_capacity(1 + NUM_BANDS);
        v.push((energy + 1e-10).ln());
        let band = half / NUM_BANDS;
        for b in 0..NUM_BANDS {
            let p: f64 = buf[b * band..(b + 1) * band]
                .iter()
                .map(|c| c.norm_sqr() as f64)
                .sum::<f64>()
                / band.max(1) as f64;
            v.push((p + 1e-10).ln());
        }
        values.push(v);
    }
    Ok(FrameTrack::new(frame_step, window, values)?)
}

/// Write a feature file: a `# frame_step=<s> window=<s>` header, then one
/// whitespace-separated vector per line.
pub fn write_feature_file<W: Write>(mut out: W, track: &FrameTrack) -> Result<(), VadError> {
    writeln!(out, "# frame_step={} window={}", track.frame_step, track.window)?;
    for v in &track.values {
        let line: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_feature_file<R: BufRead>(input: R) -> Result<FrameTrack, VadError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| VadError::FeatureFile("missing header".into()))??;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| VadError::FeatureFile("header must start with '#'".into()))?;
    let mut step = None;
    let mut window = FrameTrack::DEFAULT_WINDOW;
    for kv in header.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| VadError::FeatureFile(format!("bad header field `{kv}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| VadError::FeatureFile(format!("bad number `{v}`")))?;
        match k {
            "frame_step" => step = Some(v),
            "window" => window = v,
            _ => {}
        }
    }
    let step = step.ok_or_else(|| VadError::FeatureFile("header lacks frame_step".into()))?;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| VadError::FeatureFile(format!("line {}: {e}", i + 2)))?;
        values.push(v);
    }
    Ok(FrameTrack::new(step, window, values)?)
}
