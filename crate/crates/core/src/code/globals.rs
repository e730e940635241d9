use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svr::{Kernel, Svr, SvrConfig};
use super::tfidf::{TfidfConfig, TfidfVectorizer};
use super::{check_header, CodeError, MODEL_FORMAT, MODEL_VERSION};
use crate::metrics::f1_per_class;
use crate::taxonomy::GlobalCodeName;

pub const MIN_TRAIN_SESSIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalsConfig {
    pub tfidf: TfidfConfig,
    pub svr: SvrConfig,
    pub kernels: BTreeMap<GlobalCodeName, Kernel>,
}

impl Default for GlobalsConfig {
    fn default() -> Self {
        use GlobalCodeName as G;
        let poly = Kernel::Poly { degree: 4, gamma: 1.0, coef0: 1.0 };
        let kernels = [
            (G::Acceptance, poly),
            (G::AutonomySupport, poly),
            (G::Empathy, Kernel::Linear),
            (G::Collaboration, Kernel::Linear),
            (G::Evocation, Kernel::Linear),
            (G::Direction, Kernel::Rbf { gamma: None }),
        ]
        .into_iter()
        .collect();
        Self {
            tfidf: TfidfConfig::default(),
            svr: SvrConfig::default(),
            kernels,
        }
    }
}

/// One session: its utterances (both speakers) and the human global scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExample {
    pub utterances: Vec<Vec<String>>,
    pub scores: BTreeMap<GlobalCodeName, f64>,
}

/// Nearest integer in 1..=5.
pub fn round_score(raw: f64) -> u8 {
    raw.clamp(1.0, 5.0).round() as u8
}

/// Evaluation view where classes 1 and 2 are one class.
pub fn collapse_low(score: u8) -> u8 {
    score.max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRegressor {
    pub vectorizer: TfidfVectorizer,
    pub models: BTreeMap<GlobalCodeName, Svr>,
}

#[derive(Serialize, Deserialize)]
struct RegressorFile {
    format: String,
    version: u32,
    kind: String,
    #[serde(flatten)]
    model: GlobalRegressor,
}

impl GlobalRegressor {
    pub fn train(data: &[GlobalExample], cfg: &GlobalsConfig) -> Result<Self, CodeError> {
        if data.len() < MIN_TRAIN_SESSIONS {
            return Err(CodeError::TooFewSessions {
                needed: MIN_TRAIN_SESSIONS,
                got: data.len(),
            });
        }
        let docs: Vec<Vec<Vec<String>>> = data.iter().map(|d| d.utterances.clone()).collect();
        let vectorizer = TfidfVectorizer::fit(&docs, &cfg.tfidf);
        let xs = docs.iter().map(|d| vectorizer.transform(d)).collect::<Result<Vec<_>, _>>()?;
        let mut models = BTreeMap::new();
        for (&code, &kernel) in &cfg.kernels {
            let ys = data
                .iter()
                .map(|d| {
                    let s = *d.scores.get(&code).ok_or_else(|| CodeError::Config(format!("missing {code} score")))?;
                    if !(1.0..=5.0).contains(&s) {
                        return Err(CodeError::ScoreOutOfRange(s));
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<f64>, CodeError>>()?;
            models.insert(code, Svr::train(&xs, &ys, kernel, &cfg.svr)?);
        }
        Ok(Self { vectorizer, models })
    }

    /// Raw predictions clipped to [1, 5].
    pub fn predict(&self, utterances: &[Vec<String>]) -> Result<BTreeMap<GlobalCodeName, f64>, CodeError> {
        let x = self.vectorizer.transform(utterances)?;
        Ok(self
            .models
            .iter()
            .map(|(&c, m)| (c, m.predict(&x).clamp(1.0, 5.0)))
            .collect())
    }

    pub fn to_json(&self) -> Result<String, CodeError> {
        Ok(serde_json::to_string(&RegressorFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: "global-regressor".into(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self, CodeError> {
        let f: RegressorFile = serde_json::from_str(s)?;
        check_header(&f.format, f.version, &f.kind, "global-regressor")?;
        Ok(f.model)
    }
}

/// Seeded, balanced, session-disjoint folds. The first `n % k` folds hold
/// one extra session; indices inside a fold are sorted.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, CodeError> {
    if k < 2 {
        return Err(CodeError::Config("need at least 2 folds".into()));
    }
    if n < k {
        return Err(CodeError::TooFewSessions { needed: k, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CodeCvMetrics {
    /// Exact match after merging classes 1 and 2.
    pub accuracy: f64,
    /// Rounded prediction within one point of the rounded truth.
    pub within_one: f64,
    pub macro_f1: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Vec<usize>>,
    pub per_code: BTreeMap<GlobalCodeName, CodeCvMetrics>,
    /// Held-out raw predictions, indexed like the dataset.
    pub predictions: Vec<BTreeMap<GlobalCodeName, f64>>,
}

/// Metrics of rounded predictions against true scores.
pub fn score_metrics(pred: &[f64], truth: &[f64]) -> CodeCvMetrics {
    let pr: Vec<u8> = pred.iter().map(|&p| round_score(p)).collect();
    let tr: Vec<u8> = truth.iter().map(|&t| round_score(t)).collect();
    let n = pr.len() as f64;
    let pc: Vec<u8> = pr.iter().map(|&x| collapse_low(x)).collect();
    let tc: Vec<u8> = tr.iter().map(|&x| collapse_low(x)).collect();
    let accuracy = pc.iter().zip(&tc).filter(|(a, b)| a == b).count() as f64 / n;
    let within_one = pr.iter().zip(&tr).filter(|(a, b)| a.abs_diff(**b) <= 1).count() as f64 / n;
    let macro_f1 = f1_per_class(&pc, &tc).map(|r| r.macro_f1).unwrap_or(0.0);
    let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    CodeCvMetrics { accuracy, within_one, macro_f1, mae }
}

/// k-fold cross-validation; the tf-idf vocabulary is refit on every
/// training split and metrics are averaged over folds.
pub fn crossvalidate_globals(
    data: &[GlobalExample],
    cfg: &GlobalsConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport, CodeError> {
    let folds = fold_assignment(data.len(), k, seed)?;
    let mut sums: BTreeMap<GlobalCodeName, CodeCvMetrics> = BTreeMap::new();
    let mut predictions = vec![BTreeMap::new(); data.len()];
    for fold in &folds {
        let train: Vec<GlobalExample> = (0..data.len())
            .filter(|i| fold.binary_search(i).is_err())
            .map(|i| data[i].clone())
            .collect();
        let model = GlobalRegressor::train(&train, cfg)?;
        let mut per: BTreeMap<GlobalCodeName, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for &i in fold {
            let p = model.predict(&data[i].utterances)?;
            for (&c, &v) in &p {
                let e = per.entry(c).or_default();
                e.0.push(v);
                e.1.push(data[i].scores[&c]);
            }
            predictions[i] = p;
        }
        for (c, (p, t)) in per {
            let m = score_metrics(&p, &t);
            let s = sums.entry(c).or_default();
            s.accuracy += m.accuracy;
            s.within_one += m.within_one;
            s.macro_f1 += m.macro_f1;
            s.mae += m.mae;
        }
    }
    let kf = folds.len() as f64;
    let per_code = sums
        .into_iter()
        .map(|(c, s)| {
            (
                c,
                CodeCvMetrics {
                    accuracy: s.accuracy / kf,
                    within_one: s.within_one / kf,
                    macro_f1: s.macro_f1 / kf,
                    mae: s.mae / kf,
                },
            )
        })
        .collect();
    Ok(CvReport { folds, per_code, predictions })
}
