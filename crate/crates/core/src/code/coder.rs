use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_header, CodeError, MODEL_FORMAT, MODEL_VERSION};
use crate::taxonomy::GroupCode;
use crate::types::{Role, Utterance};

/// Sorted `(index, value)` pairs with unique indices.
pub type SparseVec = Vec<(u32, f64)>;

pub(crate) fn sparse_from_map(m: BTreeMap<u32, f64>) -> SparseVec {
    m.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Hashed unigram and bigram counts plus a constant bias feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureHasher {
    pub bits: u32,
}

impl Default for FeatureHasher {
    fn default() -> Self {
        Self { bits: 16 }
    }
}

impl FeatureHasher {
    pub fn dims(&self) -> usize {
        1 << self.bits
    }

    fn slot(&self, key: &str) -> u32 {
        (fnv1a(key.as_bytes()) & ((1u64 << self.bits) - 1)) as u32
    }

    pub fn features<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVec {
        let mut m: BTreeMap<u32, f64> = BTreeMap::new();
        *m.entry(self.slot("\u{1}bias")).or_default() += 1.0;
        for t in tokens {
            *m.entry(self.slot(&format!("1\u{1}{}", t.as_ref()))).or_default() += 1.0;
        }
        for w in tokens.windows(2) {
            let key = format!("2\u{1}{}\u{1}{}", w[0].as_ref(), w[1].as_ref());
            *m.entry(self.slot(&key)).or_default() += 1.0;
        }
        sparse_from_map(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoderConfig {
    pub hasher: FeatureHasher,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Explicit per-class weights; inverse class frequency when absent.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for CoderConfig {
    fn default() -> Self {
        Self {
            hasher: FeatureHasher::default(),
            epochs: 20,
            learning_rate: 0.2,
            l2: 1e-5,
            seed: 7,
            class_weights: None,
        }
    }
}

/// `N / (K * count_c)` for every class.
pub fn class_weights(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n as f64 / (k * c as f64) })
        .collect()
}

/// Multinomial logistic regression trained by weighted SGD with L2 decay.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub n_classes: usize,
    pub dims: usize,
    pub class_weights: Vec<f64>,
    /// `weights[k * dims + f]`
    weights: Vec<f64>,
}

impl LinearClassifier {
    pub fn train(
        examples: &[(SparseVec, usize)],
        n_classes: usize,
        dims: usize,
        cfg: &CoderConfig,
    ) -> Result<Self, CodeError> {
        let mut counts = vec![0usize; n_classes];
        for (_, y) in examples {
            if *y >= n_classes {
                return Err(CodeError::Config(format!("label {y} out of range")));
            }
            counts[*y] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(CodeError::MissingClass(k.to_string()));
        }
        let cw = match &cfg.class_weights {
            Some(w) if w.len() == n_classes => w.clone(),
            Some(w) => return Err(CodeError::Config(format!("{} class weights for {n_classes} classes", w.len()))),
            None => class_weights(&counts),
        };
        let mut v = vec![0.0; n_classes * dims];
        let mut scale = 1.0f64;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut t = 0usize;
        let mut probs = vec![0.0; n_classes];
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (x, y) = &examples[i];
                let lr = cfg.learning_rate / (1.0 + cfg.learning_rate * cfg.l2 * t as f64);
                t += 1;
                for (k, p) in probs.iter_mut().enumerate() {
                    *p = scale * x.iter().map(|&(f, val)| v[k * dims + f as usize] * val).sum::<f64>();
                }
                softmax(&mut probs);
                scale *= 1.0 - lr * cfg.l2;
                let step = lr * cw[*y] / scale;
                for (k, p) in probs.iter().enumerate() {
                    let g = p - f64::from(u8::from(k == *y));
                    if g != 0.0 {
                        for &(f, val) in x {
                            v[k * dims + f as usize] -= step * g * val;
                        }
                    }
                }
                if scale < 1e-6 {
                    v.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
            }
        }
        v.iter_mut().for_each(|w| *w *= scale);
        Ok(Self {
            n_classes,
            dims,
            class_weights: cw,
            weights: v,
        })
    }

    pub fn scores(&self, x: &[(u32, f64)]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| x.iter().map(|&(f, val)| self.weights[k * self.dims + f as usize] * val).sum())
            .collect()
    }

    /// Highest-scoring class; the lowest index wins ties.
    pub fn predict(&self, x: &[(u32, f64)]) -> usize {
        let s = self.scores(x);
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        best
    }

    fn nonzero(&self) -> Vec<(usize, u32, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i / self.dims, (i % self.dims) as u32, *w))
            .collect()
    }

    fn from_nonzero(n_classes: usize, dims: usize, class_weights: Vec<f64>, nz: &[(usize, u32, f64)]) -> Result<Self, CodeError> {
        let mut weights = vec![0.0; n_classes * dims];
        for &(k, f, w) in nz {
            if k >= n_classes || f as usize >= dims {
                return Err(CodeError::ModelFile("weight index out of range".into()));
            }
            weights[k * dims + f as usize] = w;
        }
        Ok(Self { n_classes, dims, class_weights, weights })
    }
}

fn softmax(s: &mut [f64]) {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in s.iter_mut() {
        *x = (*x - m).exp();
        z += *x;
    }
    s.iter_mut().for_each(|x| *x /= z);
}

/// Assigns one group code to a therapist utterance.
pub trait UtteranceCoder {
    fn predict(&self, tokens: &[String]) -> GroupCode;
}

/// Fill `pred_code` on every therapist utterance; client utterances keep
/// whatever they had. Returns the number of coded utterances.
pub fn predict_codes<C: UtteranceCoder + ?Sized>(utterances: &mut [Utterance], coder: &C) -> usize {
    let mut n = 0;
    for u in utterances.iter_mut().filter(|u| u.role == Role::Therapist) {
        u.pred_code = Some(coder.predict(&u.tokens));
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCoder {
    pub hasher: FeatureHasher,
    pub classifier: LinearClassifier,
}

#[derive(Serialize, Deserialize)]
struct CoderFile {
    format: String,
    version: u32,
    kind: String,
    hasher: FeatureHasher,
    classes: Vec<GroupCode>,
    class_weights: Vec<f64>,
    weights: Vec<(usize, u32, f64)>,
}

impl BaselineCoder {
    pub fn train(data: &[(Vec<String>, GroupCode)], cfg: &CoderConfig) -> Result<Self, CodeError> {
        let mut present = [false; 9];
        for (_, g) in data {
            present[g.index()] = true;
        }
        if let Some(i) = present.iter().position(|p| !p) {
            return Err(CodeError::MissingClass(GroupCode::ALL[i].to_string()));
        }
        let examples: Vec<(SparseVec, usize)> = data
            .iter()
            .map(|(t, g)| (cfg.hasher.features(t), g.index()))
            .collect();
        let classifier = LinearClassifier::train(&examples, GroupCode::ALL.len(), cfg.hasher.dims(), cfg)?;
        Ok(Self {
            hasher: cfg.hasher,
            classifier,
        })
    }

    pub fn to_json(&self) -> Result<String, CodeError> {
        let f = CoderFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: "utterance-coder".into(),
            hasher: self.hasher,
            classes: GroupCode::ALL.to_vec(),
            class_weights: self.classifier.class_weights.clone(),
            weights: self.classifier.nonzero(),
        };
        Ok(serde_json::to_string(&f)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CodeError> {
        let f: CoderFile = serde_json::from_str(s)?;
        check_header(&f.format, f.version, &f.kind, "utterance-coder")?;
        if f.classes != GroupCode::ALL {
            return Err(CodeError::ModelFile("class list differs from the group codes".into()));
        }
        let classifier = LinearClassifier::from_nonzero(9, f.hasher.dims(), f.class_weights, &f.weights)?;
        Ok(Self {
            hasher: f.hasher,
            classifier,
        })
    }
}

impl UtteranceCoder for BaselineCoder {
    fn predict(&self, tokens: &[String]) -> GroupCode {
        GroupCode::ALL[self.classifier.predict(&self.hasher.features(tokens))]
    }
}
