use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::coder::{sparse_from_map, SparseVec};
use super::CodeError;

static STOPWORDS_TXT: &str = include_str!("../../data/stopwords.txt");

/// The shipped English stop-word list.
pub fn stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub max_n: usize,
    /// Drop terms seen in fewer training sessions than this.
    pub min_df: usize,
    pub remove_stopwords: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            max_n: 3,
            min_df: 1,
            remove_stopwords: true,
        }
    }
}

/// Session-level tf-idf over 1..=max_n grams, never crossing utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    pub config: TfidfConfig,
    pub vocab: BTreeMap<String, u32>,
    pub idf: Vec<f64>,
}

impl TfidfVectorizer {
    fn terms(cfg: &TfidfConfig, session: &[Vec<String>]) -> Vec<String> {
        let stop = stopwords();
        let mut out = Vec::new();
        for utt in session {
            let kept: Vec<&str> = utt
                .iter()
                .map(String::as_str)
                .filter(|t| !(cfg.remove_stopwords && stop.contains(*t)))
                .collect();
            for n in 1..=cfg.max_n {
                out.extend(kept.windows(n).map(|w| w.join(" ")));
            }
        }
        out
    }

    pub fn fit(sessions: &[Vec<Vec<String>>], cfg: &TfidfConfig) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for s in sessions {
            let uniq: HashSet<String> = Self::terms(cfg, s).into_iter().collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = sessions.len() as f64;
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::new();
        for (t, d) in df.into_iter().filter(|(_, d)| *d >= cfg.min_df) {
            vocab.insert(t, idf.len() as u32);
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
        }
        Self {
            config: cfg.clone(),
            vocab,
            idf,
        }
    }

    pub fn dims(&self) -> usize {
        self.idf.len()
    }

    /// Unit-norm tf-idf vector. A session whose terms are all unseen maps to
    /// the zero vector.
    pub fn transform(&self, session: &[Vec<String>]) -> Result<SparseVec, CodeError> {
        if session.iter().all(Vec::is_empty) {
            return Err(CodeError::EmptySession);
        }
        let mut m: BTreeMap<u32, f64> = BTreeMap::new();
        for t in Self::terms(&self.config, session) {
            if let Some(&i) = self.vocab.get(&t) {
                *m.entry(i).or_default() += 1.0;
            }
        }
        for (i, v) in m.iter_mut() {
            *v *= self.idf[*i as usize];
        }
        let norm = m.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            m.values_mut().for_each(|v| *v /= norm);
        }
        Ok(sparse_from_map(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sess(utts: &[&str]) -> Vec<Vec<String>> {
        utts.iter().map(|u| u.split_whitespace().map(str::to_string).collect()).collect()
    }

    #[test]
    fn stopword_list_loaded() {
        let s = stopwords();
        assert!(s.len() >= 140);
        assert!(s.contains("the") && s.contains("you") && !s.contains("drink"));
    }

    #[test]
    fn hand_computed_table() {
        let cfg = TfidfConfig { max_n: 1, min_df: 1, remove_stopwords: false };
        let docs = vec![sess(&["cat dog"]), sess(&["cat cat"]), sess(&["fish"])];
        let v = TfidfVectorizer::fit(&docs, &cfg);
        let idf = |df: f64| (4.0 / (1.0 + df)).ln() + 1.0;
        assert_eq!(v.vocab.keys().collect::<Vec<_>>(), vec!["cat", "dog", "fish"]);
        assert!((v.idf[0] - idf(2.0)).abs() < 1e-15);
        assert!((v.idf[1] - idf(1.0)).abs() < 1e-15);
        let x = v.transform(&docs[0]).unwrap();
        let (a, b) = (idf(2.0), idf(1.0));
        let n = (a * a + b * b).sqrt();
        assert!((x[0].1 - a / n).abs() < 1e-12 && (x[1].1 - b / n).abs() < 1e-12);
        let y = v.transform(&docs[1]).unwrap();
        assert_eq!(y.len(), 1);
        assert!((y[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_document_uses_counts_only() {
        let cfg = TfidfConfig { max_n: 1, min_df: 1, remove_stopwords: false };
        let docs = vec![sess(&["a a b", "c"])];
        let v = TfidfVectorizer::fit(&docs, &cfg);
        assert!(v.idf.iter().all(|&x| x == v.idf[0]));
        let x = v.transform(&docs[0]).unwrap();
        let n = 6f64.sqrt();
        let expected = [2.0 / n, 1.0 / n, 1.0 / n];
        for (got, want) in x.iter().zip(expected) {
            assert!((got.1 - want).abs() < 1e-12);
        }
    }

    #[test]
    fn ngrams_stay_inside_utterances() {
        let cfg = TfidfConfig::default();
        let v = TfidfVectorizer::fit(&[sess(&["drinking problem", "weekend plans"])], &cfg);
        assert!(v.vocab.contains_key("drinking problem"));
        assert!(!v.vocab.contains_key("problem weekend"));
        // stop words vanish before n-grams form
        let v = TfidfVectorizer::fit(&[sess(&["drinking is a problem"])], &cfg);
        assert!(v.vocab.contains_key("drinking problem"));
        assert!(!v.vocab.contains_key("is"));
    }

    #[test]
    fn empty_and_unseen() {
        let v = TfidfVectorizer::fit(&[sess(&["hello there friend"])], &TfidfConfig::default());
        assert!(matches!(v.transform(&[vec![]]), Err(CodeError::EmptySession)));
        assert!(v.transform(&sess(&["zebra"])).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn unit_norm_and_order_invariance(
            utts in prop::collection::vec(prop::collection::vec(0usize..12, 1..8), 1..6),
        ) {
            let words = ["drink", "week", "job", "wife", "stress", "sleep", "beer", "run", "plan", "goal", "talk", "home"];
            let s: Vec<Vec<String>> = utts.iter().map(|u| u.iter().map(|&i| words[i].to_string()).collect()).collect();
            let other = sess(&["drink beer home", "job stress"]);
            let v = TfidfVectorizer::fit(&[s.clone(), other], &TfidfConfig::default());
            let x = v.transform(&s).unwrap();
            let norm: f64 = x.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
            let mut rev = s.clone();
            rev.reverse();
            prop_assert_eq!(v.transform(&rev).unwrap(), x);
        }
    }
}
