use serde::{Deserialize, Serialize};

use super::coder::SparseVec;
use super::CodeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Poly { degree: u32, gamma: f64, coef0: f64 },
    /// `gamma: None` picks `1 / (2 * median_distance^2)` on the training set.
    Rbf { gamma: Option<f64> },
}

pub(crate) fn dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

fn sq_dist(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    (dot(a, a) + dot(b, b) - 2.0 * dot(a, b)).max(0.0)
}

impl Kernel {
    fn eval(&self, a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Poly { degree, gamma, coef0 } => (gamma * dot(a, b) + coef0).powi(degree as i32),
            Kernel::Rbf { gamma } => (-gamma.unwrap_or(1.0) * sq_dist(a, b)).exp(),
        }
    }

    /// Replace a heuristic bandwidth by its value on `xs`.
    fn resolve(self, xs: &[SparseVec]) -> Kernel {
        match self {
            Kernel::Rbf { gamma: None } => {
                let mut d: Vec<f64> = Vec::new();
                for i in 0..xs.len() {
                    for j in i + 1..xs.len() {
                        d.push(sq_dist(&xs[i], &xs[j]).sqrt());
                    }
                }
                d.sort_by(f64::total_cmp);
                let med = if d.is_empty() {
                    0.0
                } else if d.len() % 2 == 1 {
                    d[d.len() / 2]
                } else {
                    0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
                };
                let gamma = if med > 0.0 { 1.0 / (2.0 * med * med) } else { 1.0 };
                Kernel::Rbf { gamma: Some(gamma) }
            }
            k => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            tolerance: 1e-6,
            max_iter: 1_000_000,
        }
    }
}

/// Epsilon-insensitive support vector regression solved in the dual by SMO
/// with second-order working-set selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svr {
    pub kernel: Kernel,
    pub support: Vec<SparseVec>,
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Set when every training target was equal; the model then returns it.
    pub constant: Option<f64>,
}

impl Svr {
    pub fn train(xs: &[SparseVec], ys: &[f64], kernel: Kernel, cfg: &SvrConfig) -> Result<Self, CodeError> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(CodeError::Config("need matching, non-empty features and targets".into()));
        }
        let kernel = kernel.resolve(xs);
        if ys.iter().all(|&y| y == ys[0]) {
            log::warn!("constant regression target {}; predicting it unconditionally", ys[0]);
            return Ok(Self {
                kernel,
                support: Vec::new(),
                coef: Vec::new(),
                rho: -ys[0],
                constant: Some(ys[0]),
            });
        }
        let l = xs.len();
        let mut k = vec![0.0; l * l];
        for i in 0..l {
            for j in i..l {
                let v = kernel.eval(&xs[i], &xs[j]);
                k[i * l + j] = v;
                k[j * l + i] = v;
            }
        }
        let beta = solve(&k, ys, cfg);
        let (alpha, rho) = beta;
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..l {
            let c = alpha[i] - alpha[i + l];
            if c != 0.0 {
                support.push(xs[i].clone());
                coef.push(c);
            }
        }
        Ok(Self {
            kernel,
            support,
            coef,
            rho,
            constant: None,
        })
    }

    pub fn predict(&self, x: &[(u32, f64)]) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * self.kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

/// Minimise `1/2 b'Qb + p'b` subject to `y'b = 0`, `0 <= b <= C` over the
/// 2l-variable epsilon-SVR dual. Returns the variables and the offset rho.
fn solve(k: &[f64], z: &[f64], cfg: &SvrConfig) -> (Vec<f64>, f64) {
    let l = z.len();
    let n = 2 * l;
    let c = cfg.c;
    let y: Vec<f64> = (0..n).map(|i| if i < l { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..n).map(|i| if i < l { cfg.epsilon - z[i] } else { cfg.epsilon + z[i - l] }).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i % l) * l + (j % l)];
    let mut a = vec![0.0; n];
    let mut g = p.clone();
    let tau = 1e-12;
    let upper = |a: &[f64], t: usize| a[t] >= c;
    let lower = |a: &[f64], t: usize| a[t] <= 0.0;

    for _ in 0..cfg.max_iter {
        // i: most violating index in the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { !upper(&a, t) } else { !lower(&a, t) };
            if up && -y[t] * g[t] >= gmax {
                if -y[t] * g[t] > gmax || i == usize::MAX {
                    gmax = -y[t] * g[t];
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { !lower(&a, t) } else { !upper(&a, t) };
            if !low {
                continue;
            }
            let v = -y[t] * g[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut quad = q(i, i) + q(t, t) - 2.0 * y[i] * y[t] * q(i, t);
                if quad <= 0.0 {
                    quad = tau;
                }
                let obj = -(b * b) / quad;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < cfg.tolerance || j == usize::MAX {
            break;
        }
        let (ai, aj) = (a[i], a[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - ai, a[j] - aj);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(&a, t) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(&a, t) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { 0.5 * (ub + lb) };
    (a, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(v: &[f64]) -> SparseVec {
        v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i as u32, *x)).collect()
    }

    #[test]
    fn constant_target() {
        let xs: Vec<SparseVec> = (0..12).map(|i| dense(&[i as f64, 1.0])).collect();
        let m = Svr::train(&xs, &[4.0; 12], Kernel::Linear, &SvrConfig::default()).unwrap();
        assert_eq!(m.constant, Some(4.0));
        assert_eq!(m.predict(&dense(&[100.0, 3.0])), 4.0);
    }

    #[test]
    fn fits_a_line_within_the_tube() {
        let xs: Vec<SparseVec> = (0..20).map(|i| dense(&[i as f64 / 10.0, 1.0])).collect();
        let ys: Vec<f64> = (0..20).map(|i| 1.0 + 1.5 * i as f64 / 10.0).collect();
        let cfg = SvrConfig { c: 100.0, ..SvrConfig::default() };
        let m = Svr::train(&xs, &ys, Kernel::Linear, &cfg).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.predict(x) - y).abs() <= cfg.epsilon + 1e-4, "{} vs {}", m.predict(x), y);
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<SparseVec> = (0..30).map(|_| dense(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + x.iter().map(|p| p.1).sum::<f64>() + rng.random_range(-0.3..0.3)).collect();
        let cfg = SvrConfig::default();
        let m = Svr::train(&xs, &ys, Kernel::Rbf { gamma: None }, &cfg).unwrap();
        let coef_sum: f64 = m.coef.iter().sum();
        assert!(coef_sum.abs() < 1e-9, "equality constraint: {coef_sum}");
        assert!(m.coef.iter().all(|c| c.abs() <= cfg.c + 1e-12));
        // points strictly inside the tube carry no weight
        for (x, y) in xs.iter().zip(&ys) {
            let r = (m.predict(x) - y).abs();
            if r < cfg.epsilon - 1e-3 {
                assert!(!m.support.contains(x));
            }
        }
    }

    #[test]
    fn rbf_beats_linear_on_radial_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut gen = |n: usize| -> (Vec<SparseVec>, Vec<f64>) {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for _ in 0..n {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                xs.push(dense(&[a, b]));
                ys.push(1.0 + 4.0 * (-(a * a + b * b) * 2.0).exp());
            }
            (xs, ys)
        };
        let (xtr, ytr) = gen(80);
        let (xte, yte) = gen(60);
        let mae = |k: Kernel| {
            let m = Svr::train(&xtr, &ytr, k, &SvrConfig::default()).unwrap();
            xte.iter().zip(&yte).map(|(x, y)| (m.predict(x) - y).abs()).sum::<f64>() / yte.len() as f64
        };
        let (rbf, lin) = (mae(Kernel::Rbf { gamma: None }), mae(Kernel::Linear));
        assert!(rbf < lin, "rbf {rbf} linear {lin}");
    }

    #[test]
    fn median_bandwidth() {
        let xs = vec![dense(&[0.0]), dense(&[1.0]), dense(&[3.0])];
        // distances 1, 2, 3: median 2
        match (Kernel::Rbf { gamma: None }).resolve(&xs) {
            Kernel::Rbf { gamma: Some(g) } => assert!((g - 1.0 / 8.0).abs() < 1e-15),
            k => panic!("{k:?}"),
        }
    }
}
