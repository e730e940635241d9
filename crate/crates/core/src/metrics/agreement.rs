use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

/// Items by raters; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterMatrix<T> {
    pub items: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> RaterMatrix<T> {
    pub fn new(items: Vec<Vec<Option<T>>>) -> Self {
        Self { items }
    }

    /// Build from complete rows.
    pub fn complete(rows: Vec<Vec<T>>) -> Self {
        Self {
            items: rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
        }
    }

    fn pairable_units(&self) -> Vec<Vec<T>> {
        self.items
            .iter()
            .map(|row| row.iter().flatten().cloned().collect::<Vec<T>>())
            .filter(|u| u.len() >= 2)
            .collect()
    }
}

fn sort_values<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    sort_values(&mut v);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].clone()
    } else {
        (v[n / 2 - 1].clone() + v[n / 2].clone()) / T::from_usize_lossy(2)
    }
}

/// Replace every rating within one point of its item's median by that
/// median, so that one-point disagreements stop counting.
pub fn within_one_collapse<T: Scalar>(m: &RaterMatrix<T>) -> RaterMatrix<T> {
    let one = T::one();
    let items = m
        .items
        .iter()
        .map(|row| {
            let present: Vec<T> = row.iter().flatten().cloned().collect();
            if present.is_empty() {
                return row.clone();
            }
            let med = median(present);
            row.iter()
                .map(|v| {
                    v.as_ref().map(|x| {
                        if (x.clone() - med.clone()).abs_val() <= one {
                            med.clone()
                        } else {
                            x.clone()
                        }
                    })
                })
                .collect()
        })
        .collect();
    RaterMatrix { items }
}

struct Metric<T> {
    level: Level,
    distinct: Vec<T>,
    /// running totals of value frequencies, `cum[i]` covers `distinct[..=i]`
    cum: Vec<T>,
    freq: Vec<T>,
}

impl<T: Scalar> Metric<T> {
    fn new(level: Level, pooled: &[T]) -> Self {
        let mut distinct = pooled.to_vec();
        sort_values(&mut distinct);
        distinct.dedup();
        let mut freq = vec![T::zero(); distinct.len()];
        for v in pooled {
            let i = distinct.iter().position(|d| d == v).unwrap_or(0);
            freq[i] = freq[i].clone() + T::one();
        }
        let mut cum = Vec::with_capacity(freq.len());
        let mut acc = T::zero();
        for f in &freq {
            acc = acc + f.clone();
            cum.push(acc.clone());
        }
        Self { level, distinct, cum, freq }
    }

    fn rank(&self, v: &T) -> usize {
        self.distinct.iter().position(|d| d == v).unwrap_or(0)
    }

    fn delta(&self, a: &T, b: &T) -> T {
        match self.level {
            Level::Nominal => {
                if a == b {
                    T::zero()
                } else {
                    T::one()
                }
            }
            Level::Interval => {
                let d = a.clone() - b.clone();
                d.clone() * d
            }
            Level::Ratio => {
                let s = a.clone() + b.clone();
                if s == T::zero() {
                    return T::zero();
                }
                let r = (a.clone() - b.clone()) / s;
                r.clone() * r
            }
            Level::Ordinal => {
                let (mut i, mut j) = (self.rank(a), self.rank(b));
                if i == j {
                    return T::zero();
                }
                if i > j {
                    std::mem::swap(&mut i, &mut j);
                }
                let below = if i == 0 { T::zero() } else { self.cum[i - 1].clone() };
                let span = self.cum[j].clone() - below;
                let half = (self.freq[i].clone() + self.freq[j].clone()) / T::from_usize_lossy(2);
                let x = span - half;
                x.clone() * x
            }
        }
    }
}

/// Krippendorff's alpha, `1 - D_o / D_e`, over pairable ratings only.
pub fn krippendorff_alpha<T: Scalar>(m: &RaterMatrix<T>, level: Level) -> Result<T, MetricError> {
    let units = m.pairable_units();
    let pooled: Vec<T> = units.iter().flatten().cloned().collect();
    if pooled.len() < 2 {
        return Err(MetricError::NotComputable("no pairable values"));
    }
    let metric = Metric::new(level, &pooled);
    let mut observed = T::zero();
    for u in &units {
        let mut s = T::zero();
        for (i, a) in u.iter().enumerate() {
            for (j, b) in u.iter().enumerate() {
                if i != j {
                    s = s + metric.delta(a, b);
                }
            }
        }
        observed = observed + s / T::from_usize_lossy(u.len() - 1);
    }
    let mut expected = T::zero();
    for (i, a) in pooled.iter().enumerate() {
        for (j, b) in pooled.iter().enumerate() {
            if i != j {
                expected = expected + metric.delta(a, b);
            }
        }
    }
    if expected == T::zero() {
        return Err(MetricError::NotComputable("no expected disagreement"));
    }
    let n1 = T::from_usize_lossy(pooled.len() - 1);
    Ok(T::one() - n1 * observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    #[test]
    fn perfect_agreement_is_one() {
        let m = RaterMatrix::complete(vec![vec![1.0, 1.0, 1.0], vec![3.0, 3.0, 3.0], vec![2.0, 2.0, 2.0]]);
        for level in [Level::Nominal, Level::Ordinal, Level::Interval, Level::Ratio] {
            assert_eq!(krippendorff_alpha(&m, level).unwrap(), 1.0);
        }
    }

    #[test]
    fn constant_is_not_computable() {
        let m = RaterMatrix::complete(vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        assert!(matches!(krippendorff_alpha(&m, Level::Ratio), Err(MetricError::NotComputable(_))));
        let lonely = RaterMatrix::new(vec![vec![Some(1.0), None], vec![None, Some(2.0)]]);
        assert!(matches!(krippendorff_alpha(&lonely, Level::Interval), Err(MetricError::NotComputable(_))));
    }

    #[test]
    fn ordinal_hand_evaluation() {
        // two raters on (1,1) (2,2) (3,3) (3,4). Pooled counts n1=2 n2=2 n3=3 n4=1, n=8.
        // Only the (3,4) unit disagrees: o_34 = o_43 = 1.
        // delta(3,4) = (n3 + n4 - (n3 + n4)/2)^2 = 4.
        // D_o numerator: 2 * 4 = 8 (over ordered pairs, m_u - 1 = 1).
        // D_e numerator: sum_{c != k} n_c n_k delta(c, k)
        //   (1,2): (2+2-2)^2 = 4        * 2*2 = 16
        //   (1,3): (2+2+3-2.5)^2 = 20.25 * 2*3 = 121.5
        //   (1,4): (8-1.5)^2 = 42.25    * 2*1 = 84.5
        //   (2,3): (2+3-2.5)^2 = 6.25   * 2*3 = 37.5
        //   (2,4): (2+3+1-1.5)^2 = 20.25 * 2*1 = 40.5
        //   (3,4): 4                    * 3*1 = 12
        //   total 312, doubled for ordered pairs = 624
        // alpha = 1 - 7 * 8 / 624
        let m = RaterMatrix::complete(vec![vec![r(1), r(1)], vec![r(2), r(2)], vec![r(3), r(3)], vec![r(3), r(4)]]);
        let a = krippendorff_alpha(&m, Level::Ordinal).unwrap();
        assert_eq!(a, r(1) - Rational64::new(56, 624));
    }

    #[test]
    fn classic_nominal_reference() {
        // 4 coders, 12 units, nominal; published alpha = 0.743
        let x = None;
        let rows = vec![
            vec![Some(1), Some(1), x, Some(1)],
            vec![Some(2), Some(2), Some(3), Some(2)],
            vec![Some(3), Some(3), Some(3), Some(3)],
            vec![Some(3), Some(3), Some(3), Some(3)],
            vec![Some(2), Some(2), Some(2), Some(2)],
            vec![Some(1), Some(2), Some(3), Some(4)],
            vec![Some(4), Some(4), Some(4), Some(4)],
            vec![Some(1), Some(1), Some(2), Some(1)],
            vec![Some(2), Some(2), Some(2), Some(2)],
            vec![x, Some(5), Some(5), Some(5)],
            vec![x, x, Some(1), Some(1)],
            vec![x, x, Some(3), x],
        ];
        let m = RaterMatrix::new(rows.into_iter().map(|r| r.into_iter().map(|v| v.map(|v: i32| v as f64)).collect()).collect());
        let a = krippendorff_alpha(&m, Level::Nominal).unwrap();
        assert!((a - 0.743).abs() < 5e-4, "{a}");
        let a = krippendorff_alpha(&m, Level::Interval).unwrap();
        assert!((a - 0.849).abs() < 5e-4, "{a}");
    }

    #[test]
    fn collapse_rules() {
        let m = RaterMatrix::complete(vec![vec![4.0, 5.0], vec![2.0, 5.0], vec![3.0, 3.0, 4.0]]);
        let c = within_one_collapse(&m);
        assert_eq!(c.items[0], vec![Some(4.5), Some(4.5)]);
        assert_eq!(c.items[1], vec![Some(2.0), Some(5.0)]);
        assert_eq!(c.items[2], vec![Some(3.0), Some(3.0), Some(3.0)]);
    }
}
