//! N-gram language models with interpolated Kneser-Ney smoothing, linear
//! mixing of two models, perplexity, and ARPA serialization.
//!
//! A trained model is stored the way ARPA files describe it: every seen
//! n-gram carries its fully interpolated probability, and every seen context
//! carries the interpolation weight of its lower order as a backoff weight.
//! Querying an unseen n-gram then reduces to `bow(h) * P(w | h')`, which is
//! exactly the interpolated estimate, so training and scoring share one
//! lookup path and models read from ARPA files score identically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("discount must lie in (0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("model order must be at least 1")]
    InvalidOrder,
    #[error("models disagree on order ({0} vs {1})")]
    ModelMismatch(usize, usize),
    #[error("mixing weight {0} outside [0, 1]")]
    InvalidWeight(f64),
    #[error("no tokens to score")]
    EmptyText,
    #[error("zero probability for `{token}`")]
    ModelUnderflow { token: String },
    #[error("ARPA line {line}: {msg}")]
    Arpa { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase, split on whitespace, drop punctuation except in-word apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let t: String = raw
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'')
                .flat_map(char::to_lowercase)
                .collect();
            let t = t.trim_matches('\'').to_string();
            (!t.is_empty()).then_some(t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub order: usize,
    pub discount: f64,
    /// Map words seen once to `<unk>` so the unknown token gets real mass.
    pub replace_singletons: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            order: 3,
            discount: 0.75,
            replace_singletons: true,
        }
    }
}

/// Probability and backoff weight of one stored n-gram (linear, not log).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry<T> {
    pub prob: T,
    pub backoff: T,
}

/// Anything that assigns conditional token probabilities.
pub trait LanguageModel<T: Real> {
    fn order(&self) -> usize;

    /// `P(token | history)`; only the last `order - 1` history tokens matter.
    /// Out-of-vocabulary tokens are scored as `<unk>`.
    fn prob(&self, history: &[&str], token: &str) -> T;

    fn in_vocabulary(&self, token: &str) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel<T> {
    order: usize,
    words: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[n - 1]` holds the n-grams.
    tables: Vec<HashMap<Vec<u32>, Entry<T>>>,
}

impl<T: Real> NgramModel<T> {
    pub fn train(corpus: &[Vec<String>], cfg: &TrainConfig) -> Result<Self, LmError> {
        if corpus.iter().all(|s| s.is_empty()) {
            return Err(LmError::EmptyCorpus);
        }
        if !(cfg.discount > 0.0 && cfg.discount < 1.0) {
            return Err(LmError::InvalidDiscount(cfg.discount));
        }
        if cfg.order == 0 {
            return Err(LmError::InvalidOrder);
        }
        let order = cfg.order;
        let discount = T::lit(cfg.discount);

        let mut freq: HashMap<&str, usize> = HashMap::new();
        for s in corpus {
            for w in s {
                *freq.entry(w.as_str()).or_default() += 1;
            }
        }
        let map_word = |w: &str| -> String {
            if cfg.replace_singletons && freq.get(w) == Some(&1) {
                UNK.to_string()
            } else {
                w.to_string()
            }
        };

        let mut vocab: BTreeSet<String> = [BOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
        let mut sentences = Vec::with_capacity(corpus.len());
        for s in corpus.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![BOS.to_string()];
            padded.extend(s.iter().map(|w| map_word(w)));
            padded.push(EOS.to_string());
            vocab.extend(padded.iter().cloned());
            sentences.push(padded);
        }
        let mut model = Self::with_vocabulary(order, vocab);
        let bos = model.ids[BOS];

        // raw counts per order
        let mut raw: Vec<HashMap<Vec<u32>, usize>> = vec![HashMap::new(); order];
        for s in &sentences {
            let ids: Vec<u32> = s.iter().map(|w| model.ids[w]).collect();
            for n in 1..=order {
                for g in ids.windows(n) {
                    if n == 1 && g[0] == bos {
                        continue;
                    }
                    *raw[n - 1].entry(g.to_vec()).or_default() += 1;
                }
            }
        }

        // adjusted counts: raw for the top order and for n-grams opening a
        // sentence, distinct left extensions otherwise
        let mut adjusted: Vec<HashMap<Vec<u32>, usize>> = vec![HashMap::new(); order];
        for n in 1..=order {
            if n == order {
                adjusted[n - 1] = raw[n - 1].clone();
                continue;
            }
            let mut adj: HashMap<Vec<u32>, usize> = HashMap::new();
            for g in raw[n].keys() {
                *adj.entry(g[1..].to_vec()).or_default() += 1;
            }
            for (g, &c) in &raw[n - 1] {
                if g[0] == bos {
                    adj.insert(g.clone(), c);
                }
            }
            adjusted[n - 1] = adj;
        }

        // context totals: sum of adjusted counts and number of distinct followers
        let predictable = (model.words.len() - 1) as f64;
        for n in 1..=order {
            let mut ctx: HashMap<&[u32], (usize, usize)> = HashMap::new();
            for (g, &a) in &adjusted[n - 1] {
                let e = ctx.entry(&g[..n - 1]).or_default();
                e.0 += a;
                e.1 += 1;
            }
            let mut level: HashMap<Vec<u32>, Entry<T>> = HashMap::new();
            let mut ordered: Vec<(&Vec<u32>, &usize)> = adjusted[n - 1].iter().collect();
            ordered.sort();
            for (g, &a) in ordered {
                let (total, types) = ctx[&g[..n - 1]];
                let total_t = T::from_usize_lossy(total);
                let gamma = discount * T::from_usize_lossy(types) / total_t;
                let lower = if n == 1 {
                    T::one() / T::lit(predictable)
                } else {
                    model.lookup(&g[1..n - 1], g[n - 1])
                };
                let own = (T::from_usize_lossy(a) - discount).max(T::zero()) / total_t;
                level.insert(
                    g.clone(),
                    Entry {
                        prob: own + gamma * lower,
                        backoff: T::one(),
                    },
                );
            }
            if n == 1 {
                let (total, types) = ctx.get(&[][..]).copied().unwrap_or((0, 0));
                let gamma = discount * T::from_usize_lossy(types) / T::from_usize_lossy(total);
                for (id, w) in model.words.iter().enumerate() {
                    let id = id as u32;
                    if w == BOS {
                        level.insert(vec![id], Entry { prob: T::zero(), backoff: T::one() });
                    } else {
                        level
                            .entry(vec![id])
                            .or_insert(Entry { prob: gamma / T::lit(predictable), backoff: T::one() });
                    }
                }
            }
            model.tables[n - 1] = level;
            // backoff weights live on the context n-gram one order down
            if n > 1 {
                for (h, (total, types)) in ctx {
                    let gamma = discount * T::from_usize_lossy(types) / T::from_usize_lossy(total);
                    if let Some(e) = model.tables[n - 2].get_mut(h) {
                        e.backoff = gamma;
                    }
                }
            }
        }
        Ok(model)
    }

    fn with_vocabulary(order: usize, vocab: BTreeSet<String>) -> Self {
        let words: Vec<String> = vocab.into_iter().collect();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self {
            order,
            words,
            ids,
            tables: vec![HashMap::new(); order],
        }
    }

    /// Vocabulary in sorted order, including `<s>`, `</s>` and `<unk>`.
    pub fn vocabulary(&self) -> &[String] {
        &self.words
    }

    /// Tokens that can be predicted (everything except `<s>`).
    pub fn predictable(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str).filter(|w| *w != BOS)
    }

    pub fn num_ngrams(&self, n: usize) -> usize {
        self.tables.get(n.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    /// Histories stored as contexts (n-grams with a non-unit backoff).
    pub fn contexts(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .tables
            .iter()
            .take(self.order.saturating_sub(1))
            .flat_map(|t| t.iter())
            .filter(|(_, e)| e.backoff != T::one())
            .map(|(g, _)| g.iter().map(|&i| self.words[i as usize].clone()).collect())
            .collect();
        out.push(Vec::new());
        out.sort();
        out
    }

    pub fn entry(&self, ngram: &[&str]) -> Option<Entry<T>> {
        let ids: Option<Vec<u32>> = ngram.iter().map(|w| self.ids.get(*w).copied()).collect();
        self.tables.get(ngram.len().checked_sub(1)?)?.get(&ids?).copied()
    }

    fn word_id(&self, w: &str) -> u32 {
        self.ids.get(w).or_else(|| self.ids.get(UNK)).copied().unwrap_or(u32::MAX)
    }

    fn lookup(&self, ctx: &[u32], w: u32) -> T {
        let n = ctx.len() + 1;
        if n <= self.order {
            let mut key = ctx.to_vec();
            key.push(w);
            if let Some(e) = self.tables[n - 1].get(&key) {
                return e.prob;
            }
        }
        if ctx.is_empty() {
            return T::zero();
        }
        let bow = self
            .tables
            .get(ctx.len() - 1)
            .and_then(|t| t.get(ctx))
            .map_or(T::one(), |e| e.backoff);
        bow * self.lookup(&ctx[1..], w)
    }

    pub fn write_arpa<W: Write>(&self, mut out: W) -> Result<(), LmError> {
        writeln!(out, "\n\\data\\")?;
        for n in 1..=self.order {
            writeln!(out, "ngram {}={}", n, self.tables[n - 1].len())?;
        }
        for n in 1..=self.order {
            writeln!(out, "\n\\{n}-grams:")?;
            let mut rows: Vec<(Vec<&str>, &Entry<T>)> = self.tables[n - 1]
                .iter()
                .map(|(g, e)| (g.iter().map(|&i| self.words[i as usize].as_str()).collect(), e))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (g, e) in rows {
                let lp = e.prob.to_f64().unwrap_or(0.0);
                let lp = if lp > 0.0 { lp.log10() } else { -99.0 };
                write!(out, "{lp}\t{}", g.join(" "))?;
                let bow = e.backoff.to_f64().unwrap_or(1.0);
                if n < self.order && bow != 1.0 {
                    write!(out, "\t{}", bow.log10())?;
                }
                writeln!(out)?;
            }
        }
        writeln!(out, "\n\\end\\")?;
        Ok(())
    }

    pub fn read_arpa<R: BufRead>(input: R) -> Result<Self, LmError> {
        let err = |line: usize, msg: &str| LmError::Arpa { line, msg: msg.to_string() };
        let mut declared: BTreeMap<usize, usize> = BTreeMap::new();
        let mut rows: Vec<(usize, Vec<String>, f64, f64)> = Vec::new();
        let mut section: Option<usize> = None;
        let mut in_data = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                break;
            }
            if let Some(n) = line.strip_prefix('\\').and_then(|r| r.strip_suffix("-grams:")) {
                section = Some(n.parse().map_err(|_| err(lineno, "bad section header"))?);
                in_data = false;
                continue;
            }
            if in_data {
                let spec = line
                    .strip_prefix("ngram ")
                    .ok_or_else(|| err(lineno, "expected `ngram N=count`"))?;
                let (n, c) = spec.split_once('=').ok_or_else(|| err(lineno, "expected `=`"))?;
                let n = n.trim().parse().map_err(|_| err(lineno, "bad order"))?;
                let c = c.trim().parse().map_err(|_| err(lineno, "bad count"))?;
                declared.insert(n, c);
                continue;
            }
            let n = section.ok_or_else(|| err(lineno, "n-gram outside a section"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < n + 1 {
                return Err(err(lineno, "too few fields"));
            }
            let lp: f64 = fields[0].parse().map_err(|_| err(lineno, "bad log-probability"))?;
            let words: Vec<String> = fields[1..=n].iter().map(|s| s.to_string()).collect();
            let lb: f64 = match fields.get(n + 1) {
                Some(b) => b.parse().map_err(|_| err(lineno, "bad backoff"))?,
                None => 0.0,
            };
            rows.push((n, words, lp, lb));
        }
        let order = declared.keys().copied().max().ok_or_else(|| err(0, "missing \\data\\ section"))?;
        for (&n, &c) in &declared {
            let found = rows.iter().filter(|r| r.0 == n).count();
            if found != c {
                return Err(err(0, &format!("declared {c} {n}-grams, found {found}")));
            }
        }
        let vocab: BTreeSet<String> = rows
            .iter()
            .filter(|r| r.0 == 1)
            .map(|r| r.1[0].clone())
            .chain([UNK.to_string()])
            .collect();
        let mut model = Self::with_vocabulary(order, vocab);
        for (n, words, lp, lb) in rows {
            let ids: Option<Vec<u32>> = words.iter().map(|w| model.ids.get(w).copied()).collect();
            let ids = ids.ok_or_else(|| err(0, "n-gram uses a word missing from the unigrams"))?;
            let prob = if lp <= -99.0 { 0.0 } else { 10f64.powf(lp) };
            model.tables[n - 1].insert(
                ids,
                Entry {
                    prob: T::lit(prob),
                    backoff: T::lit(10f64.powf(lb)),
                },
            );
        }
        Ok(model)
    }
}

impl<T: Real> LanguageModel<T> for NgramModel<T> {
    fn order(&self) -> usize {
        self.order
    }

    fn prob(&self, history: &[&str], token: &str) -> T {
        let keep = history.len().min(self.order - 1);
        let ctx: Vec<u32> = history[history.len() - keep..]
            .iter()
            .map(|w| self.word_id(w))
            .collect();
        self.lookup(&ctx, self.word_id(token))
    }

    fn in_vocabulary(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }
}

/// Linear mixture `w * P_first + (1 - w) * P_second`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedModel<T> {
    pub components: [NgramModel<T>; 2],
    pub weights: [T; 2],
}

pub fn interpolate<T: Real>(
    p: NgramModel<T>,
    q: NgramModel<T>,
    w: f64,
) -> Result<InterpolatedModel<T>, LmError> {
    if p.order != q.order {
        return Err(LmError::ModelMismatch(p.order, q.order));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(LmError::InvalidWeight(w));
    }
    let w = T::lit(w);
    Ok(InterpolatedModel {
        components: [p, q],
        weights: [w, T::one() - w],
    })
}

impl<T: Real> LanguageModel<T> for InterpolatedModel<T> {
    fn order(&self) -> usize {
        self.components[0].order
    }

    fn prob(&self, history: &[&str], token: &str) -> T {
        self.components
            .iter()
            .zip(self.weights)
            .filter(|(_, w)| *w != T::zero())
            .map(|(m, w)| w * m.prob(history, token))
            .fold(T::zero(), |a, b| a + b)
    }

    fn in_vocabulary(&self, token: &str) -> bool {
        self.components.iter().any(|m| m.in_vocabulary(token))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityStats<T> {
    pub log_prob: T,
    pub tokens: usize,
    pub oov: usize,
    pub perplexity: T,
}

/// `exp(-(1/N) * sum ln P)` over all sentences; `count_eos` adds one `</s>`
/// prediction per sentence.
pub fn perplexity_stats<T: Real, M: LanguageModel<T> + ?Sized>(
    model: &M,
    text: &[Vec<String>],
    count_eos: bool,
) -> Result<PerplexityStats<T>, LmError> {
    let mut log_prob = T::zero();
    let mut tokens = 0usize;
    let mut oov = 0usize;
    for sentence in text.iter().filter(|s| !s.is_empty()) {
        let mut history: Vec<&str> = vec![BOS];
        let targets = sentence
            .iter()
            .map(String::as_str)
            .chain(count_eos.then_some(EOS));
        for tok in targets {
            if !model.in_vocabulary(tok) {
                oov += 1;
            }
            let p = model.prob(&history, tok);
            if !(p > T::zero()) || !p.is_finite() {
                return Err(LmError::ModelUnderflow { token: tok.to_string() });
            }
            log_prob = log_prob + p.ln();
            tokens += 1;
            history.push(tok);
        }
    }
    if tokens == 0 {
        return Err(LmError::EmptyText);
    }
    let perplexity = (-log_prob / T::from_usize_lossy(tokens)).exp();
    Ok(PerplexityStats {
        log_prob,
        tokens,
        oov,
        perplexity,
    })
}

pub fn perplexity<T: Real, M: LanguageModel<T> + ?Sized>(model: &M, text: &[Vec<String>]) -> Result<T, LmError> {
    perplexity_stats(model, text, true).map(|s| s.perplexity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    fn no_unk(order: usize) -> TrainConfig {
        TrainConfig {
            order,
            discount: 0.75,
            replace_singletons: false,
        }
    }

    #[test]
    fn tokenizer_normalizes() {
        assert_eq!(tokenize("Tell me, about YOUR family!"), vec!["tell", "me", "about", "your", "family"]);
        assert_eq!(tokenize("don't -- 'quoted'"), vec!["don't", "quoted"]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(NgramModel::<f64>::train(&[], &TrainConfig::default()), Err(LmError::EmptyCorpus)));
        let c = corpus(&["a b"]);
        let cfg = TrainConfig { discount: 1.0, ..TrainConfig::default() };
        assert!(matches!(NgramModel::<f64>::train(&c, &cfg), Err(LmError::InvalidDiscount(_))));
    }

    #[test]
    fn repeated_token_limit() {
        let c = corpus(&["a a a a", "a a a a", "a a a a"]);
        for d in [0.1, 0.01, 0.001] {
            let cfg = TrainConfig { order: 3, discount: d, replace_singletons: false };
            let m = NgramModel::<f64>::train(&c, &cfg).unwrap();
            let p = m.prob(&[BOS], "a");
            assert!((1.0 - p) < 2.0 * d, "d={d} p={p}");
        }
    }

    #[test]
    fn uniform_unigram_perplexity() {
        // four distinct tokens, scored without sentence-end predictions
        let m = NgramModel::<f64>::train(&corpus(&["a b c d"]), &no_unk(1)).unwrap();
        let text = corpus(&["a b c d"]);
        let s = perplexity_stats(&m, &text, false).unwrap();
        // every seen token gets (1 - D)/5 + D/6: same for all four
        let p = 0.25 / 5.0 + 0.75 / 6.0;
        assert!((s.perplexity - 1.0 / p).abs() < 1e-12);
        // vocabulary size is 6 (four words, </s>, <unk>): perplexity close to it
        assert!((s.perplexity - 6.0).abs() < 0.5);
    }

    #[test]
    fn exact_uniform_model_from_arpa() {
        let arpa = "\\data\\\nngram 1=4\n\n\\1-grams:\n-0.6020599913279624\tw\n-0.6020599913279624\tx\n-0.6020599913279624\ty\n-0.6020599913279624\tz\n\n\\end\\\n";
        let m = NgramModel::<f64>::read_arpa(arpa.as_bytes()).unwrap();
        let ppl = perplexity_stats(&m, &corpus(&["w x y z z"]), false).unwrap().perplexity;
        assert!((ppl - 4.0).abs() < 1e-9);
    }

    #[test]
    fn training_text_beats_shuffled_cross_domain() {
        let train = corpus(&[
            "how do you feel about that",
            "tell me more about your family",
            "how do you feel about your drinking",
            "tell me about your week",
        ]);
        let m = NgramModel::<f64>::train(&train, &TrainConfig::default()).unwrap();
        let other = corpus(&["week your drinking that feel tell", "family more how about you"]);
        assert!(perplexity(&m, &train).unwrap() < perplexity(&m, &other).unwrap());
    }

    #[test]
    fn interpolation_extremes() {
        let p = NgramModel::<f64>::train(&corpus(&["a b a b c"]), &no_unk(3)).unwrap();
        let q = NgramModel::<f64>::train(&corpus(&["c c b d"]), &no_unk(3)).unwrap();
        let one = interpolate(p.clone(), q.clone(), 1.0).unwrap();
        let zero = interpolate(p.clone(), q.clone(), 0.0).unwrap();
        for (h, w) in [(vec![BOS], "a"), (vec!["a", "b"], "a"), (vec!["c"], "d")] {
            assert_eq!(one.prob(&h, w), p.prob(&h, w));
            assert_eq!(zero.prob(&h, w), q.prob(&h, w));
        }
        let mix = interpolate(p.clone(), q.clone(), 0.8).unwrap();
        for (h, w) in [(vec![BOS], "a"), (vec!["a", "b"], "a"), (vec!["c"], "d"), (vec!["b"], "zzz")] {
            let expected = 0.8 * p.prob(&h, w) + 0.2 * q.prob(&h, w);
            assert!((mix.prob(&h, w) - expected).abs() < 1e-15);
        }
        let bigram = NgramModel::<f64>::train(&corpus(&["a b"]), &no_unk(2)).unwrap();
        assert!(matches!(interpolate(p, bigram, 0.5), Err(LmError::ModelMismatch(3, 2))));
    }

    #[test]
    fn arpa_round_trip_scores_match() {
        let c = corpus(&["the cat sat on the mat", "the dog sat", "a cat and a dog"]);
        let m = NgramModel::<f64>::train(&c, &TrainConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.write_arpa(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\\3-grams:"));
        let back = NgramModel::<f64>::read_arpa(buf.as_slice()).unwrap();
        let test = corpus(&["the cat sat", "a dog on the mat", "zebra"]);
        let a = perplexity(&m, &test).unwrap();
        let b = perplexity(&back, &test).unwrap();
        assert!((a - b).abs() / a < 1e-9);
    }

    #[test]
    fn single_precision_model() {
        let c = corpus(&["one two three", "two three four"]);
        let m = NgramModel::<f32>::train(&c, &no_unk(3)).unwrap();
        let total: f32 = m.predictable().map(|w| m.prob(&["two"], w)).sum();
        assert!((total - 1.0).abs() < 1e-5);
    }

    #[test]
    fn unknown_words_get_mass() {
        let c = corpus(&["a b c", "a b d", "a b"]);
        let m = NgramModel::<f64>::train(&c, &TrainConfig::default()).unwrap();
        assert!(m.in_vocabulary(UNK));
        assert!(!m.in_vocabulary("c"), "singletons are folded into <unk>");
        assert!(m.prob(&["a", "b"], "never-seen") > 0.0);
        assert_eq!(m.prob(&["a", "b"], "never-seen"), m.prob(&["a", "b"], UNK));
    }
}
