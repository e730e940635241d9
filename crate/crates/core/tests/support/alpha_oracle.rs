//! Krippendorff's alpha through the coincidence matrix of observed values.

#![allow(dead_code)]

#[derive(Clone, Copy)]
pub enum OracleLevel {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

pub fn coincidence_alpha(items: &[Vec<Option<f64>>], level: OracleLevel) -> Option<f64> {
    let mut values: Vec<f64> = items.iter().flatten().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let v = values.len();
    let idx = |x: f64| values.iter().position(|&y| y == x).unwrap();
    let mut o = vec![vec![0.0; v]; v];
    for row in items {
        let present: Vec<f64> = row.iter().flatten().copied().collect();
        let m = present.len();
        if m < 2 {
            continue;
        }
        for (a, &x) in present.iter().enumerate() {
            for (b, &y) in present.iter().enumerate() {
                if a != b {
                    o[idx(x)][idx(y)] += 1.0 / (m - 1) as f64;
                }
            }
        }
    }
    let nc: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = nc.iter().sum();
    if n < 2.0 {
        return None;
    }
    let delta = |c: usize, k: usize| -> f64 {
        let (vc, vk) = (values[c], values[k]);
        match level {
            OracleLevel::Nominal => f64::from(u8::from(c != k)),
            OracleLevel::Interval => (vc - vk).powi(2),
            OracleLevel::Ratio => {
                if vc + vk == 0.0 {
                    0.0
                } else {
                    ((vc - vk) / (vc + vk)).powi(2)
                }
            }
            OracleLevel::Ordinal => {
                let (lo, hi) = (c.min(k), c.max(k));
                let s: f64 = nc[lo..=hi].iter().sum();
                (s - (nc[c] + nc[k]) / 2.0).powi(2)
            }
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..v {
        for k in 0..v {
            num += o[c][k] * delta(c, k);
            den += nc[c] * nc[k] * delta(c, k);
        }
    }
    if den == 0.0 {
        return None;
    }
    Some(1.0 - (n - 1.0) * num / den)
}
