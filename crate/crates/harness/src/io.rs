//! File formats owned by the harness: WAV audio, synthetic session bundles
//! and transcript directories.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mifi_core::rttm::write_rttm;
use mifi_core::types::{read_transcript, write_transcript, TranscriptRecord};
use mifi_core::vad::write_feature_file;
use mifi_core::types::FrameTrack;

use crate::synth::SynthSession;

/// Mono samples in [-1, 1]. Multi-channel files are averaged.
pub fn read_wav(path: &Path) -> Result<(Vec<f32>, u32)> {
    let mut r = hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = r.spec();
    let ch = spec.channels.max(1) as usize;
    let raw: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => r.samples::<f32>().collect::<Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()?
        }
    };
    let mono = raw.chunks(ch).map(|c| c.iter().sum::<f32>() / ch as f32).collect();
    Ok((mono, spec.sample_rate))
}

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f32) as i16)?;
    }
    w.finalize()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer(BufWriter::new(f), value)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Write `<id>.session.json`, `<id>.jsonl` (reference transcript) and
/// `<id>.rttm` (reference diarization), plus `<id>.feat` when frames are
/// given.
pub fn write_session_bundle(dir: &Path, s: &SynthSession, frames: Option<&FrameTrack>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(format!("{}.session.json", s.id)), s)?;
    let f = fs::File::create(dir.join(format!("{}.jsonl", s.id)))?;
    write_transcript(BufWriter::new(f), &s.id, &s.utterances)?;
    let f = fs::File::create(dir.join(format!("{}.rttm", s.id)))?;
    write_rttm(BufWriter::new(f), &s.rttm())?;
    if let Some(frames) = frames {
        let f = fs::File::create(dir.join(format!("{}.feat", s.id)))?;
        write_feature_file(BufWriter::new(f), frames)?;
    }
    Ok(())
}

/// Files in `dir` ending in `suffix`, sorted by name.
pub fn list_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(suffix)))
        .collect();
    out.sort();
    Ok(out)
}

pub fn read_sessions(dir: &Path) -> Result<Vec<SynthSession>> {
    let files = list_files(dir, ".session.json")?;
    if files.is_empty() {
        bail!("no *.session.json files in {}", dir.display());
    }
    files.iter().map(|p| read_json(p)).collect()
}

pub fn read_transcript_file(path: &Path) -> Result<Vec<TranscriptRecord>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_transcript(BufReader::new(f))?)
}
