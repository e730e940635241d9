use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadFrameMetrics {
    pub accuracy: f64,
    /// 0 when nothing is predicted voiced
    pub precision: f64,
    pub recall: f64,
    /// mean recall over the classes present in the reference
    pub uar: f64,
}

pub fn vad_frame_metrics(reference: &[bool], hypothesis: &[bool]) -> Result<VadFrameMetrics, MetricError> {
    if reference.len() != hypothesis.len() {
        return Err(MetricError::LengthMismatch(reference.len(), hypothesis.len()));
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&r, &h) in reference.iter().zip(hypothesis) {
        match (r, h) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let recall = ratio(tp, tp + fneg);
    let specificity = ratio(tn, tn + fp);
    let recalls: Vec<f64> = [(tp + fneg > 0, recall), (tn + fp > 0, specificity)]
        .into_iter()
        .filter_map(|(present, r)| present.then_some(r))
        .collect();
    Ok(VadFrameMetrics {
        accuracy: ratio(tp + tn, reference.len()),
        precision: ratio(tp, tp + fp),
        recall,
        uar: recalls.iter().sum::<f64>() / recalls.len() as f64,
    })
}

/// Average ranks, 1-based, ties share the mean of their positions.
fn fractional_ranks<T: Real>(x: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = T::lit((i + j) as f64 / 2.0 + 1.0);
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(MetricError::NotComputable("constant input"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation (Pearson correlation of fractional ranks).
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(MetricError::TooShort { needed: 3, got: x.len() });
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report<L: Ord> {
    pub per_class: BTreeMap<L, ClassScore>,
    /// support-weighted mean F1
    pub weighted: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Map a prediction against a set of acceptable reference labels onto a
/// single reference label: the prediction itself when it is acceptable,
/// otherwise the smallest acceptable label.
pub fn resolve_stacked<L: Ord + Copy>(pred: L, reference: &BTreeSet<L>) -> Option<L> {
    if reference.contains(&pred) {
        Some(pred)
    } else {
        reference.iter().next().copied()
    }
}

pub fn f1_per_class<L: Ord + Copy>(pred: &[L], reference: &[L]) -> Result<F1Report<L>, MetricError> {
    if pred.len() != reference.len() {
        return Err(MetricError::LengthMismatch(pred.len(), reference.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut counts: BTreeMap<L, (usize, usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (&p, &r) in pred.iter().zip(reference) {
        if p == r {
            counts.entry(p).or_default().0 += 1;
            correct += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(r).or_default().2 += 1;
        }
    }
    let mut per_class = BTreeMap::new();
    let (mut wsum, mut msum) = (0.0, 0.0);
    for (&c, &(tp, fp, fneg)) in &counts {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let support = tp + fneg;
        wsum += f1 * support as f64;
        msum += f1;
        per_class.insert(c, ClassScore { precision, recall, f1, support });
    }
    Ok(F1Report {
        weighted: wsum / reference.len() as f64,
        macro_f1: msum / per_class.len() as f64,
        accuracy: correct as f64 / pred.len() as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vad_examples() {
        let r = [true, false, true, false];
        let m = vad_frame_metrics(&r, &r).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.uar), (1.0, 1.0, 1.0, 1.0));
        let m = vad_frame_metrics(&r, &[true; 4]).unwrap();
        assert_eq!((m.recall, m.uar), (1.0, 0.5));
        assert_eq!(vad_frame_metrics(&r, &[true]), Err(MetricError::LengthMismatch(4, 1)));
    }

    proptest! {
        #[test]
        fn vad_counts(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1000)) {
            let (r, h): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let m = vad_frame_metrics(&r, &h).unwrap();
            let count = |a: bool, b: bool| r.iter().zip(&h).filter(|(x, y)| **x == a && **y == b).count() as f64;
            let (tp, fp, tn, fneg) = (count(true, true), count(false, true), count(false, false), count(true, false));
            prop_assert!((m.accuracy - (tp + tn) / 1000.0).abs() < 1e-12);
            prop_assert!((m.precision - tp / (tp + fp)).abs() < 1e-12);
            prop_assert!((m.recall - tp / (tp + fneg)).abs() < 1e-12);
            prop_assert!((m.uar - 0.5 * (tp / (tp + fneg) + tn / (tn + fp))).abs() < 1e-12);
        }

        #[test]
        fn spearman_monotone_invariance(x in prop::collection::vec(-100.0f64..100.0, 3..20), seed in any::<u64>()) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| ((i as u64).wrapping_mul(seed | 1) % 17) as f64 + v * 0.01).collect();
            if let Ok(a) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 5.0).collect();
                let ty: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
                let b = spearman(&tx, &ty).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!(a <= 1.0 + 1e-12 && a >= -1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0f64, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0f64, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // ranks of x: 1, 2.5, 2.5, 4, 5; ranks of y: 2, 1, 4, 4, 4
        let x = [1.0, 2.0, 2.0, 3.0, 7.0];
        let y = [5.0, 1.0, 9.0, 9.0, 9.0];
        let rx = [1.0, 2.5, 2.5, 4.0, 5.0];
        let ry = [2.0, 1.0, 4.0, 4.0, 4.0];
        let mean = 3.0;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mean) * (a - mean)).sum();
        let syy: f64 = ry.iter().map(|a| (a - mean) * (a - mean)).sum();
        let expected = sxy / (sxx * syy).sqrt();
        assert!((spearman(&x, &y).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricError::NotComputable(_))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(MetricError::TooShort { .. })));
    }

    #[test]
    fn f1_examples() {
        let r = [0, 1, 2, 1, 0];
        let rep = f1_per_class(&r, &r).unwrap();
        assert!(rep.per_class.values().all(|c| c.f1 == 1.0));
        assert!(!rep.per_class.contains_key(&3));
        // 20-sample toy confusion
        let reference = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2];
        let pred = [0, 0, 0, 0, 0, 1, 1, 2, 1, 1, 1, 1, 0, 2, 2, 2, 2, 0, 0, 1];
        let rep = f1_per_class(&pred, &reference).unwrap();
        // class 0: tp 5, fp 3, fn 3; class 1: tp 4, fp 3, fn 2; class 2: tp 3, fp 2, fn 3
        let f = |tp: f64, fp: f64, fneg: f64| {
            let (p, r) = (tp / (tp + fp), tp / (tp + fneg));
            2.0 * p * r / (p + r)
        };
        let (f0, f1, f2) = (f(5.0, 3.0, 3.0), f(4.0, 3.0, 2.0), f(3.0, 2.0, 3.0));
        assert!((rep.per_class[&0].f1 - f0).abs() < 1e-12);
        assert!((rep.per_class[&1].f1 - f1).abs() < 1e-12);
        assert!((rep.per_class[&2].f1 - f2).abs() < 1e-12);
        assert!((rep.weighted - (8.0 * f0 + 6.0 * f1 + 6.0 * f2) / 20.0).abs() < 1e-12);
        assert!(matches!(f1_per_class::<u8>(&[], &[]), Err(MetricError::EmptyInput)));
    }

    #[test]
    fn stacked_reference() {
        let set: BTreeSet<u8> = [2, 5].into_iter().collect();
        assert_eq!(resolve_stacked(5, &set), Some(5));
        assert_eq!(resolve_stacked(7, &set), Some(2));
    }
}
