mod support;

use mifi_core::lm::{perplexity, tokenize, LanguageModel, NgramModel, TrainConfig, BOS};
use proptest::prelude::*;
use support::kn_oracle::KnOracle;

fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec((0usize..6).prop_map(|i| format!("w{i}")), 1..9), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trained_model_matches_count_oracle(
        corpus in corpus_strategy(),
        order in 1usize..=3,
        discount in 0.1f64..0.95,
        unk in any::<bool>(),
    ) {
        let cfg = TrainConfig { order, discount, replace_singletons: unk };
        let model = NgramModel::<f64>::train(&corpus, &cfg).unwrap();
        let oracle = KnOracle::new(&corpus, order, discount, unk);
        let mut histories: Vec<Vec<String>> = vec![vec![BOS.into()], vec![]];
        for s in &corpus {
            for i in 0..s.len() {
                histories.push(s[..=i].to_vec());
            }
        }
        for h in &histories {
            let hs: Vec<&str> = h.iter().map(String::as_str).collect();
            let mut total = 0.0;
            for w in model.predictable() {
                let p = model.prob(&hs, w);
                let q = oracle.prob(h, w);
                prop_assert!((p - q).abs() <= 1e-12 * q.max(1e-300), "h={h:?} w={w} {p} vs {q}");
                total += p;
            }
            prop_assert!((total - 1.0).abs() < 1e-9, "h={h:?} sums to {total}");
        }
        let test: Vec<Vec<String>> = vec![corpus[0].iter().rev().cloned().collect(), vec!["w9".into(), "w0".into()]];
        let a = perplexity(&model, &test).unwrap();
        let b = oracle.perplexity(&test);
        prop_assert!((a - b).abs() / b < 1e-9);
    }

    #[test]
    fn relabeling_tokens_preserves_perplexity(corpus in corpus_strategy()) {
        let cfg = TrainConfig { order: 3, discount: 0.7, replace_singletons: false };
        let rename = |c: &[Vec<String>]| -> Vec<Vec<String>> {
            c.iter().map(|s| s.iter().map(|w| format!("zz{}", w.chars().rev().collect::<String>())).collect()).collect()
        };
        let a = NgramModel::<f64>::train(&corpus, &cfg).unwrap();
        let renamed = rename(&corpus);
        let b = NgramModel::<f64>::train(&renamed, &cfg).unwrap();
        let pa = perplexity(&a, &corpus).unwrap();
        let pb = perplexity(&b, &renamed).unwrap();
        prop_assert!((pa - pb).abs() / pa < 1e-12);
    }
}

#[test]
fn every_stored_context_normalizes() {
    let text = [
        "so what brings you in today",
        "i guess my wife thinks i drink too much",
        "what do you think about that",
        "i think she worries too much",
        "you think she worries more than she needs to",
    ];
    let corpus: Vec<Vec<String>> = text.iter().map(|t| tokenize(t)).collect();
    let model = NgramModel::<f64>::train(&corpus, &TrainConfig::default()).unwrap();
    for ctx in model.contexts() {
        let h: Vec<&str> = ctx.iter().map(String::as_str).collect();
        let total: f64 = model.predictable().map(|w| model.prob(&h, w)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{ctx:?}: {total}");
    }
}
