//! Direct Kneser-Ney evaluation from corpus counts: every quantity is
//! recounted by scanning the padded sentences, with no stored tables.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

pub struct KnOracle {
    pub order: usize,
    pub discount: f64,
    sentences: Vec<Vec<String>>,
    pub vocab: Vec<String>,
}

impl KnOracle {
    pub fn new(corpus: &[Vec<String>], order: usize, discount: f64, replace_singletons: bool) -> Self {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for w in corpus.iter().flatten() {
            *freq.entry(w).or_default() += 1;
        }
        let sentences: Vec<Vec<String>> = corpus
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                let mut p = vec!["<s>".to_string()];
                for w in s {
                    if replace_singletons && freq[w.as_str()] == 1 {
                        p.push("<unk>".into());
                    } else {
                        p.push(w.clone());
                    }
                }
                p.push("</s>".into());
                p
            })
            .collect();
        let mut vocab: BTreeSet<String> = ["</s>", "<unk>"].iter().map(|s| s.to_string()).collect();
        for s in &sentences {
            vocab.extend(s.iter().filter(|w| *w != "<s>").cloned());
        }
        Self { order, discount, sentences, vocab: vocab.into_iter().collect() }
    }

    fn raw(&self, g: &[String]) -> usize {
        if g.len() == 1 && g[0] == "<s>" {
            return 0;
        }
        self.sentences
            .iter()
            .map(|s| s.windows(g.len()).filter(|win| *win == g).count())
            .sum()
    }

    fn adjusted(&self, g: &[String]) -> usize {
        if g.len() == self.order || g[0] == "<s>" {
            return self.raw(g);
        }
        let mut left: BTreeSet<&str> = BTreeSet::new();
        for s in &self.sentences {
            for win in s.windows(g.len() + 1) {
                if win[1..] == *g {
                    left.insert(&win[0]);
                }
            }
        }
        left.len()
    }

    pub fn prob(&self, history: &[String], w: &str) -> f64 {
        let keep = history.len().min(self.order - 1);
        let known = |t: &str| t == "<s>" || self.vocab.iter().any(|v| v == t);
        let h: Vec<String> = history[history.len() - keep..]
            .iter()
            .map(|t| if known(t) { t.clone() } else { "<unk>".to_string() })
            .collect();
        let w = if known(w) { w } else { "<unk>" };
        let lower = if h.is_empty() {
            1.0 / self.vocab.len() as f64
        } else {
            self.prob(&h[1..], w)
        };
        let mut denom = 0usize;
        let mut types = 0usize;
        let mut own = 0usize;
        for v in &self.vocab {
            let mut g = h.clone();
            g.push(v.clone());
            let a = self.adjusted(&g);
            denom += a;
            types += usize::from(a > 0);
            if v == w {
                own = a;
            }
        }
        if denom == 0 {
            return lower;
        }
        let d = self.discount;
        (own as f64 - d).max(0.0) / denom as f64 + d * types as f64 / denom as f64 * lower
    }

    pub fn perplexity(&self, text: &[Vec<String>]) -> f64 {
        let mut lp = 0.0;
        let mut n = 0usize;
        for s in text.iter().filter(|s| !s.is_empty()) {
            let mut h = vec!["<s>".to_string()];
            for w in s.iter().map(String::as_str).chain(["</s>"]) {
                lp += self.prob(&h, w).ln();
                n += 1;
                h.push(w.to_string());
            }
        }
        (-lp / n as f64).exp()
    }
}

/// Small random corpus over a `vocab`-letter alphabet.
pub fn random_corpus(rng: &mut impl FnMut(usize) -> usize, vocab: usize) -> Vec<Vec<String>> {
    let n_sent = 1 + rng(8);
    (0..n_sent)
        .map(|_| {
            let len = 1 + rng(9);
            (0..len).map(|_| format!("w{}", rng(vocab))).collect()
        })
        .collect()
}
