//! Reference agglomerator: every step recomputes each cluster-pair average
//! linkage from the original matrix.

#![allow(dead_code)]

pub fn reference_hac(m: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = m.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += m[i][j];
                    }
                }
                pairs.push((a, b, s / (clusters[a].len() * clusters[b].len()) as f64));
            }
        }
        let top = pairs.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        let thr = top - 1e-12 * (1.0 + 2.0 * top.abs());
        // pairs are generated in ascending (smaller member, larger member) order
        let &(a, b, _) = pairs.iter().find(|p| p.2 >= thr).unwrap();
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
    }
    // clusters stay ordered by smallest member because merges keep the lower index
    let mut labels = vec![0; n];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            labels[i] = c;
        }
    }
    labels
}

/// Symmetric similarity matrix with unit diagonal. `levels > 0` draws from a
/// small grid so that ties are frequent.
pub fn random_similarity(rng: &mut impl FnMut() -> f64, n: usize, levels: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let u = rng();
            let v = if levels > 0 {
                (u * levels as f64).floor() / levels as f64
            } else {
                2.0 * u - 1.0
            };
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}
