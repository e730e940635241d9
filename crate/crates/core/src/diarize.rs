//! Two-speaker diarization: uniform subsegmentation of voiced segments,
//! per-subsegment embeddings, an affinity matrix, average-link agglomerative
//! clustering down to two clusters, and speaker-turn formation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::types::{Cluster, FrameTrack, Seconds, Segment, SpeakerTurn, TimeSpan};

#[derive(Debug, Error, PartialEq)]
pub enum DiarizeError {
    #[error("need at least {needed} subsegments, got {found}")]
    TooFewSubsegments { needed: usize, found: usize },
    #[error("only two-speaker diarization is supported, got {0}")]
    UnsupportedSpeakerCount(usize),
    #[error("segment {0} has no subsegment")]
    UncoveredSegment(usize),
    #[error("label count {labels} does not match subsegment count {subsegments}")]
    LabelMismatch { labels: usize, subsegments: usize },
    #[error("subsegment shift must be positive and at most the subsegment length")]
    InvalidTiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiarConfig {
    pub sub_len: Seconds,
    pub sub_shift: Seconds,
    pub num_speakers: usize,
    /// Largest in-turn silence bridged when concatenating same-speaker segments.
    pub turn_gap: Seconds,
}

impl Default for DiarConfig {
    fn default() -> Self {
        Self {
            sub_len: 1.5,
            sub_shift: 0.25,
            num_speakers: 2,
            turn_gap: 1.0,
        }
    }
}

impl DiarConfig {
    pub fn validate(&self) -> Result<(), DiarizeError> {
        if !(self.sub_shift > 0.0 && self.sub_shift <= self.sub_len) {
            return Err(DiarizeError::InvalidTiling);
        }
        if self.num_speakers != 2 {
            return Err(DiarizeError::UnsupportedSpeakerCount(self.num_speakers));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subsegment {
    pub span: TimeSpan,
    /// Index of the voiced segment this window was cut from.
    pub parent: usize,
}

const EPS: f64 = 1e-9;

/// Tile every segment with `sub_len` windows at `sub_shift` stride. A segment
/// shorter than `sub_len` becomes one window; an uncovered tail after the last
/// full window gets one shorter window ending at the segment end.
pub fn subsegment(segments: &[Segment], cfg: &DiarConfig) -> Vec<Subsegment> {
    let mut out = Vec::new();
    for (parent, seg) in segments.iter().enumerate() {
        let (s, e) = (seg.span.start, seg.span.end);
        if e - s <= cfg.sub_len + EPS {
            out.push(Subsegment { span: seg.span, parent });
            continue;
        }
        let mut k = 0usize;
        loop {
            let start = s + k as f64 * cfg.sub_shift;
            if start + cfg.sub_len > e + EPS {
                break;
            }
            out.push(Subsegment {
                span: TimeSpan {
                    start,
                    end: (start + cfg.sub_len).min(e),
                },
                parent,
            });
            k += 1;
        }
        let last_end = s + (k - 1) as f64 * cfg.sub_shift + cfg.sub_len;
        if e - last_end > EPS {
            out.push(Subsegment {
                span: TimeSpan {
                    start: s + k as f64 * cfg.sub_shift,
                    end: e,
                },
                parent,
            });
        }
    }
    out
}

/// Fixed-dimension speaker representation of a run of frames.
pub trait Embedder: Send + Sync {
    fn embed(&self, frames: &[Vec<f64>]) -> Vec<f64>;
}

/// Mean and standard deviation of each feature dimension, concatenated.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatsPoolingEmbedder {
    /// Skip this many leading feature dimensions (e.g. log-energy).
    pub skip_dims: usize,
}

impl Embedder for StatsPoolingEmbedder {
    fn embed(&self, frames: &[Vec<f64>]) -> Vec<f64> {
        let dim = frames.first().map_or(0, |f| f.len()).saturating_sub(self.skip_dims);
        let n = frames.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for f in frames {
            for (m, x) in mean.iter_mut().zip(&f[self.skip_dims..]) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for f in frames {
            for ((s, x), m) in std.iter_mut().zip(&f[self.skip_dims..]).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        mean.extend(std);
        mean
    }
}

/// Subtract the session mean from every embedding, then scale each to unit
/// length (zero vectors stay zero).
pub fn normalize_embeddings<T: Real>(vectors: &mut [Vec<T>]) {
    let Some(dim) = vectors.first().map(Vec::len) else {
        return;
    };
    let n = T::from_usize_lossy(vectors.len());
    let mut mean = vec![T::zero(); dim];
    for v in vectors.iter() {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m = *m + x;
        }
    }
    for m in mean.iter_mut() {
        *m = *m / n;
    }
    for v in vectors.iter_mut() {
        for (x, &m) in v.iter_mut().zip(&mean) {
            *x = *x - m;
        }
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm > T::zero() {
            v.iter_mut().for_each(|x| *x = *x / norm);
        }
    }
}

/// Symmetric pairwise similarity between embeddings.
pub trait AffinityScorer<T: Real>: Send + Sync {
    fn score(&self, a: &[T], b: &[T]) -> T;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CosineScorer;

impl<T: Real> AffinityScorer<T> for CosineScorer {
    fn score(&self, a: &[T], b: &[T]) -> T {
        let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
        let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
        let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
        if na == T::zero() || nb == T::zero() {
            T::zero()
        } else {
            dot / (na * nb)
        }
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> AffinityMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

pub fn affinity_matrix<T: Real>(
    vectors: &[Vec<T>],
    scorer: &dyn AffinityScorer<T>,
) -> Result<AffinityMatrix<T>, DiarizeError> {
    if vectors.len() < 2 {
        return Err(DiarizeError::TooFewSubsegments {
            needed: 2,
            found: vectors.len(),
        });
    }
    Ok(AffinityMatrix::from_fn(vectors.len(), |i, j| {
        scorer.score(&vectors[i], &vectors[j])
    }))
}

/// One agglomeration step: clusters identified by their smallest member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge<T> {
    pub left: usize,
    pub right: usize,
    pub similarity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HacResult<T> {
    /// Cluster id per item; ids are ordered by each cluster's smallest member.
    pub labels: Vec<usize>,
    pub merges: Vec<Merge<T>>,
}

/// Absolute slack under which a linkage value counts as tied with the
/// maximum `m`.
pub fn linkage_tie_tolerance<T: Real>(m: T) -> T {
    T::lit(1e-12) * (T::one() + m.abs() + m.abs())
}

/// Average-link agglomerative clustering on similarities.
///
/// Each step merges the pair of clusters with the highest mean inter-cluster
/// similarity until `k` clusters remain. Pairs within
/// [`linkage_tie_tolerance`] of the maximum are tied and the one with the
/// lowest (smaller member, larger member) index pair wins, where clusters
/// are indexed by their smallest member. Cluster similarities follow the
/// size-weighted Lance-Williams update and each row caches its maximum, so
/// a step usually costs O(n); memory is O(n^2).
pub fn cluster_hac<T: Real>(m: &AffinityMatrix<T>, k: usize) -> Result<HacResult<T>, DiarizeError> {
    let n = m.len();
    if k == 0 || k > n {
        return Err(DiarizeError::TooFewSubsegments { needed: k.max(1), found: n });
    }
    let mut sim = m.data.clone();
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - k);
    // row p caches the maximum of sim[p][q] over alive q > p
    let mut row_max: Vec<Option<(T, usize)>> = vec![None; n];
    let recompute = |p: usize, sim: &[T], alive: &[bool]| -> Option<(T, usize)> {
        let mut best: Option<(T, usize)> = None;
        for q in p + 1..n {
            if alive[q] && best.is_none_or(|(b, _)| sim[p * n + q] > b) {
                best = Some((sim[p * n + q], q));
            }
        }
        best
    };
    for p in 0..n {
        row_max[p] = recompute(p, &sim, &alive);
    }

    for _ in k..n {
        let top = (0..n)
            .filter(|&p| alive[p])
            .filter_map(|p| row_max[p].map(|(v, _)| v))
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
            .expect("at least two alive clusters");
        let thr = top - linkage_tie_tolerance(top);
        let p = (0..n)
            .find(|&p| alive[p] && row_max[p].is_some_and(|(v, _)| v >= thr))
            .expect("row holding the maximum");
        let q = (p + 1..n).find(|&q| alive[q] && sim[p * n + q] >= thr).expect("pair at the maximum");
        let s = sim[p * n + q];

        let (np, nq) = (T::from_usize_lossy(size[p]), T::from_usize_lossy(size[q]));
        for r in 0..n {
            if !alive[r] || r == p || r == q {
                continue;
            }
            let v = (np * sim[p * n + r] + nq * sim[q * n + r]) / (np + nq);
            sim[p * n + r] = v;
            sim[r * n + p] = v;
        }
        size[p] += size[q];
        alive[q] = false;
        for o in owner.iter_mut() {
            if *o == q {
                *o = p;
            }
        }
        merges.push(Merge { left: p, right: q, similarity: s });

        row_max[q] = None;
        row_max[p] = recompute(p, &sim, &alive);
        for r in 0..p {
            if !alive[r] {
                continue;
            }
            match row_max[r] {
                Some((_, c)) if c == p || c == q => row_max[r] = recompute(r, &sim, &alive),
                Some((v, _)) if sim[r * n + p] > v => row_max[r] = Some((sim[r * n + p], p)),
                _ => {}
            }
        }
        for r in p + 1..q {
            if alive[r] && row_max[r].is_some_and(|(_, c)| c == q) {
                row_max[r] = recompute(r, &sim, &alive);
            }
        }
    }

    let reps: Vec<usize> = (0..n).filter(|&p| alive[p]).collect();
    let labels = owner
        .iter()
        .map(|o| reps.iter().position(|a| a == o).expect("owner is alive"))
        .collect();
    Ok(HacResult { labels, merges })
}

/// Two-way clustering mapped to named clusters; the cluster holding item 0 is A.
pub fn cluster_two_speakers<T: Real>(m: &AffinityMatrix<T>) -> Result<Vec<Cluster>, DiarizeError> {
    let res = cluster_hac(m, 2)?;
    Ok(res
        .labels
        .iter()
        .map(|&l| if l == 0 { Cluster::A } else { Cluster::B })
        .collect())
}

/// Give each segment the majority cluster of its subsegments; a tie goes to
/// the cluster of the segment's first subsegment.
pub fn project_labels(
    segments: &[Segment],
    subsegments: &[Subsegment],
    labels: &[Cluster],
) -> Result<Vec<Segment>, DiarizeError> {
    if labels.len() != subsegments.len() {
        return Err(DiarizeError::LabelMismatch {
            labels: labels.len(),
            subsegments: subsegments.len(),
        });
    }
    let mut votes = vec![(0usize, 0usize, None::<Cluster>); segments.len()];
    for (sub, &label) in subsegments.iter().zip(labels) {
        let v = &mut votes[sub.parent];
        match label {
            Cluster::A => v.0 += 1,
            Cluster::B => v.1 += 1,
        }
        v.2.get_or_insert(label);
    }
    segments
        .iter()
        .zip(votes)
        .enumerate()
        .map(|(i, (seg, (a, b, first)))| {
            let first = first.ok_or(DiarizeError::UncoveredSegment(i))?;
            let cluster = match a.cmp(&b) {
                std::cmp::Ordering::Greater => Cluster::A,
                std::cmp::Ordering::Less => Cluster::B,
                std::cmp::Ordering::Equal => first,
            };
            Ok(Segment::labeled(seg.span, cluster))
        })
        .collect()
}

/// Concatenate consecutive same-cluster segments separated by at most
/// `turn_gap` of silence. Unlabeled segments are skipped.
pub fn merge_turns(labeled: &[Segment], cfg: &DiarConfig) -> Vec<SpeakerTurn> {
    let mut turns: Vec<SpeakerTurn> = Vec::new();
    for seg in labeled {
        let Some(cluster) = seg.cluster else { continue };
        match turns.last_mut() {
            Some(t) if t.cluster == cluster && seg.span.start - t.span.end <= cfg.turn_gap + EPS => {
                t.span.end = t.span.end.max(seg.span.end);
            }
            _ => turns.push(SpeakerTurn::new(cluster, seg.span)),
        }
    }
    turns
}

pub fn label_and_merge(
    segments: &[Segment],
    subsegments: &[Subsegment],
    labels: &[Cluster],
    cfg: &DiarConfig,
) -> Result<Vec<SpeakerTurn>, DiarizeError> {
    Ok(merge_turns(&project_labels(segments, subsegments, labels)?, cfg))
}

/// Output of [`diarize`]: cluster-labeled voiced segments and merged turns.
#[derive(Debug, Clone, PartialEq)]
pub struct Diarization {
    pub segments: Vec<Segment>,
    pub turns: Vec<SpeakerTurn>,
}

/// Full diarization of a session's voiced segments.
pub fn diarize(
    frames: &FrameTrack,
    segments: &[Segment],
    embedder: &dyn Embedder,
    scorer: &dyn AffinityScorer<f64>,
    cfg: &DiarConfig,
) -> Result<Diarization, DiarizeError> {
    cfg.validate()?;
    let subs = subsegment(segments, cfg);
    if subs.len() < 2 {
        return Err(DiarizeError::TooFewSubsegments {
            needed: 2,
            found: subs.len(),
        });
    }
    let mut vectors: Vec<Vec<f64>> = subs.iter().map(|s| embedder.embed(frames.slice(&s.span))).collect();
    normalize_embeddings(&mut vectors);
    let m = affinity_matrix(&vectors, scorer)?;
    let labels = cluster_two_speakers(&m)?;
    let labeled = project_labels(segments, &subs, &labels)?;
    let turns = merge_turns(&labeled, cfg);
    Ok(Diarization {
        segments: labeled,
        turns,
    })
}
