//! Word- and sentence-level evaluation: contextual similarity metrics,
//! Spearman correlation, nearest neighbors, accuracy and F1.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{context_vector, Sentence};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::senses::{select_sense, sense_probabilities, soft_sense_vector};
use crate::tensor::cosine_or_zero;

/// One contextual word-similarity judgment: two words, the contexts
/// they occur in (with the target position marked), and a human score.
#[derive(Clone, Debug)]
pub struct SimilarityItem {
    pub word1: String,
    pub word2: String,
    pub context1: Vec<String>,
    pub target1: usize,
    pub context2: Vec<String>,
    pub target2: usize,
    pub human_score: f64,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}\t{:.6}\t{}", self.metric, self.value, self.n)
    }
}

/// Parse a context whose target token is wrapped as `<t>word</t>`.
fn parse_context(raw: &str, lineno: usize) -> Result<(Vec<String>, usize, String)> {
    let mut tokens = Vec::new();
    let mut target = None;
    for tok in raw.split_whitespace() {
        if let Some(inner) = tok
            .strip_prefix("<t>")
            .and_then(|t| t.strip_suffix("</t>"))
        {
            if target.is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "context marks more than one target".into(),
                });
            }
            target = Some(tokens.len());
            tokens.push(inner.to_string());
        } else {
            tokens.push(tok.to_string());
        }
    }
    match target {
        Some(t) => {
            let word = tokens[t].clone();
            Ok((tokens, t, word))
        }
        None => Err(Error::Parse {
            line: lineno,
            msg: "context has no <t>…</t> target".into(),
        }),
    }
}

/// Load a `word1<TAB>word2<TAB>context1<TAB>context2<TAB>score` file.
pub fn load_similarity_file(path: &Path) -> Result<Vec<SimilarityItem>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 5 tab-separated columns, got {}", cols.len()),
            });
        }
        let (context1, target1, marked1) = parse_context(cols[2], lineno + 1)?;
        let (context2, target2, marked2) = parse_context(cols[3], lineno + 1)?;
        if marked1 != cols[0] || marked2 != cols[1] {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "marked target does not match the word column".into(),
            });
        }
        let human_score: f64 = cols[4].trim().parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad score {}", cols[4]),
        })?;
        items.push(SimilarityItem {
            word1: cols[0].to_string(),
            word2: cols[1].to_string(),
            context1,
            target1,
            context2,
            target2,
            human_score,
        });
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(items)
}

/// Similarity of the two context-independent main vectors. Unknown
/// words fall back to the reserved unknown entry.
pub fn global_sim(model: &Model, w1: &str, w2: &str) -> f64 {
    let a = model.main_value(model.vocab.id(w1));
    let b = model.main_value(model.vocab.id(w2));
    cosine_or_zero(a, b)
}

fn side_context(model: &Model, tokens: &[String], target: usize, window: usize) -> (usize, crate::tensor::Tensor) {
    let ids: Vec<usize> = tokens.iter().map(|t| model.vocab.id(t)).collect();
    let word = ids[target];
    let sentence = Sentence { token_ids: ids };
    let ctx = context_vector(&sentence, target, window, model.dim, |w| model.main_value(w));
    (word, ctx)
}

/// Similarity of the context-selected sense vectors.
pub fn local_sim(model: &Model, item: &SimilarityItem, window: usize) -> f64 {
    let (w1, ctx1) = side_context(model, &item.context1, item.target1, window);
    let (w2, ctx2) = side_context(model, &item.context2, item.target2, window);
    let c1 = select_sense(&model.store, &model.entries[w1], w1, &ctx1);
    let c2 = select_sense(&model.store, &model.entries[w2], w2, &ctx2);
    cosine_or_zero(
        model.sense_value(w1, c1.sense_index),
        model.sense_value(w2, c2.sense_index),
    )
}

/// Similarity of the probability-weighted sense mixtures.
pub fn avg_sim(model: &Model, item: &SimilarityItem, window: usize) -> f64 {
    let beta = model.beta_value();
    let (w1, ctx1) = side_context(model, &item.context1, item.target1, window);
    let (w2, ctx2) = side_context(model, &item.context2, item.target2, window);
    let p1 = sense_probabilities(&model.store, &model.entries[w1], &ctx1, beta);
    let p2 = sense_probabilities(&model.store, &model.entries[w2], &ctx2, beta);
    let v1 = soft_sense_vector(&model.store, &model.entries[w1], &p1);
    let v2 = soft_sense_vector(&model.store, &model.entries[w2], &p2);
    cosine_or_zero(&v1, &v2)
}

/// Average ranks with ties shared (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant input to correlation"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInput("need at least two points"));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborSpace {
    Main,
    Sense,
}

impl NeighborSpace {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(NeighborSpace::Main),
            "sense" => Ok(NeighborSpace::Sense),
            other => Err(Error::Config(format!("unknown space {other}"))),
        }
    }
}

/// A ranked neighbor: token, sense index within its word, similarity.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub token: String,
    pub sense: usize,
    pub similarity: f64,
}

/// Top-k nearest tokens by cosine in the chosen space.
///
/// The query word is excluded, and in sense space so are all of the
/// query's own senses; the reserved unknown entry never appears. Ties
/// break by vocabulary id, then sense index.
pub fn nearest_neighbors(
    model: &Model,
    word: &str,
    k: usize,
    space: NeighborSpace,
    anchor_sense: usize,
) -> Result<Vec<Neighbor>> {
    let query = model
        .vocab
        .lookup(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let anchor = match space {
        NeighborSpace::Main => model.main_value(query),
        NeighborSpace::Sense => {
            if anchor_sense >= model.n_senses {
                return Err(Error::Config(format!(
                    "sense {anchor_sense} out of range (model has {})",
                    model.n_senses
                )));
            }
            model.sense_value(query, anchor_sense)
        }
    };
    let mut scored: Vec<Neighbor> = Vec::new();
    for w in 0..model.vocab.size() {
        if w == query || w == model.vocab.unk_id() {
            continue;
        }
        match space {
            NeighborSpace::Main => scored.push(Neighbor {
                token: model.vocab.token(w).to_string(),
                sense: 0,
                similarity: cosine_or_zero(anchor, model.main_value(w)),
            }),
            NeighborSpace::Sense => {
                for s in 0..model.n_senses {
                    scored.push(Neighbor {
                        token: model.vocab.token(w).to_string(),
                        sense: s,
                        similarity: cosine_or_zero(anchor, model.sense_value(w, s)),
                    });
                }
            }
        }
    }
    scored.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap()
            .then_with(|| model.vocab.id(&a.token).cmp(&model.vocab.id(&b.token)))
            .then_with(|| a.sense.cmp(&b.sense))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Accuracy and F1 of the positive class; zero predicted positives give
/// F1 = 0 by convention.
pub fn accuracy_f1(preds: &[bool], gold: &[bool]) -> Result<(f64, f64)> {
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gold.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fnn = 0usize;
    let mut correct = 0usize;
    for (&p, &g) in preds.iter().zip(gold) {
        if p == g {
            correct += 1;
        }
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let accuracy = correct as f64 / preds.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fnn) as f64;
        2.0 * precision * recall / (precision + recall)
    };
    Ok((accuracy, f1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Vocabulary, UNK_TOKEN};
    use crate::model::EncoderKind;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    fn test_model(n_senses: usize) -> Model {
        let vocab = Vocabulary::from_entries(vec![
            (UNK_TOKEN.into(), 0),
            ("apple".into(), 5),
            ("banana".into(), 4),
            ("carrot".into(), 3),
            ("daisy".into(), 2),
            ("elm".into(), 1),
        ])
        .unwrap();
        Model::init(vocab, 4, n_senses, 3, EncoderKind::Rnn, 99)
    }

    fn set_main(model: &mut Model, word: &str, v: Vec<f64>) {
        let id = model.vocab.id(word);
        let pid = model.entries[id].main;
        model.store.slot_mut(pid).value = Tensor::vector(v).unwrap();
    }

    #[test]
    fn global_sim_identity_and_orthogonal() {
        let mut m = test_model(2);
        assert!((global_sim(&m, "apple", "apple") - 1.0).abs() < 1e-12);
        set_main(&mut m, "apple", vec![1.0, 0.0, 0.0, 0.0]);
        set_main(&mut m, "banana", vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(global_sim(&m, "apple", "banana"), 0.0);
        // Both out-of-vocabulary: cosine of the unknown entry with itself.
        assert!((global_sim(&m, "zzz", "qqq") - 1.0).abs() < 1e-12);
    }

    fn item(w1: &str, c1: &str, w2: &str, c2: &str, score: f64) -> SimilarityItem {
        let parse = |raw: &str| {
            let toks: Vec<String> = raw.split_whitespace().map(str::to_string).collect();
            let t = toks
                .iter()
                .position(|x| x.starts_with("<t>"))
                .expect("target");
            let mut toks2 = toks.clone();
            toks2[t] = toks[t]
                .trim_start_matches("<t>")
                .trim_end_matches("</t>")
                .to_string();
            (toks2, t)
        };
        let (context1, target1) = parse(c1);
        let (context2, target2) = parse(c2);
        SimilarityItem {
            word1: w1.into(),
            word2: w2.into(),
            context1,
            target1,
            context2,
            target2,
            human_score: score,
        }
    }

    #[test]
    fn local_sim_on_single_sense_model_is_sense_cosine() {
        let m = test_model(1);
        let it = item(
            "apple",
            "the <t>apple</t> fell",
            "banana",
            "a ripe <t>banana</t>",
            5.0,
        );
        let got = local_sim(&m, &it, 0);
        let want = cosine_or_zero(
            m.sense_value(m.vocab.id("apple"), 0),
            m.sense_value(m.vocab.id("banana"), 0),
        );
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn local_sim_follows_steered_centroids() {
        let mut m = test_model(2);
        // Context of apple = {banana}; context of carrot = {daisy}.
        set_main(&mut m, "banana", vec![1.0, 0.0, 0.0, 0.0]);
        set_main(&mut m, "daisy", vec![0.0, 1.0, 0.0, 0.0]);
        let wa = m.vocab.id("apple");
        let wc = m.vocab.id("carrot");
        // Steer apple sense 1 to the banana direction, carrot sense 0 to daisy.
        let ca1 = m.entries[wa].centroids[1];
        m.store.slot_mut(ca1).value = Tensor::vector(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let ca0 = m.entries[wa].centroids[0];
        m.store.slot_mut(ca0).value = Tensor::vector(vec![-1.0, 0.0, 0.0, 0.0]).unwrap();
        let cc0 = m.entries[wc].centroids[0];
        m.store.slot_mut(cc0).value = Tensor::vector(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let cc1 = m.entries[wc].centroids[1];
        m.store.slot_mut(cc1).value = Tensor::vector(vec![0.0, -1.0, 0.0, 0.0]).unwrap();

        let it = item(
            "apple",
            "<t>apple</t> banana",
            "carrot",
            "<t>carrot</t> daisy",
            5.0,
        );
        let got = local_sim(&m, &it, 0);
        let want = cosine_or_zero(m.sense_value(wa, 1), m.sense_value(wc, 0));
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn avg_sim_matches_recomposed_oracle() {
        let m = test_model(3);
        let it = item(
            "apple",
            "the <t>apple</t> fell far",
            "carrot",
            "a <t>carrot</t> grew",
            5.0,
        );
        let got = avg_sim(&m, &it, 0);
        // Independent recomputation through the senses module ops.
        let beta = m.beta_value();
        let (w1, ctx1) = super::side_context(&m, &it.context1, it.target1, 0);
        let (w2, ctx2) = super::side_context(&m, &it.context2, it.target2, 0);
        let p1 = sense_probabilities(&m.store, &m.entries[w1], &ctx1, beta);
        let p2 = sense_probabilities(&m.store, &m.entries[w2], &ctx2, beta);
        let v1 = soft_sense_vector(&m.store, &m.entries[w1], &p1);
        let v2 = soft_sense_vector(&m.store, &m.entries[w2], &p2);
        assert_eq!(got, cosine_or_zero(&v1, &v2));
    }

    #[test]
    fn similarity_metrics_are_symmetric() {
        let m = test_model(2);
        let a = item(
            "apple",
            "red <t>apple</t> pie",
            "banana",
            "<t>banana</t> split now",
            1.0,
        );
        let b = item(
            "banana",
            "<t>banana</t> split now",
            "apple",
            "red <t>apple</t> pie",
            1.0,
        );
        assert!((global_sim(&m, "apple", "banana") - global_sim(&m, "banana", "apple")).abs() < 1e-12);
        assert!((local_sim(&m, &a, 0) - local_sim(&m, &b, 0)).abs() < 1e-12);
        assert!((avg_sim(&m, &a, 0) - avg_sim(&m, &b, 0)).abs() < 1e-12);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let same = spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        let rev = spearman(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((rev + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_degenerate_input() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn nearest_neighbor_finds_planted_duplicate() {
        let mut m = test_model(1);
        set_main(&mut m, "apple", vec![0.3, 0.4, 0.5, 0.6]);
        set_main(&mut m, "elm", vec![0.3, 0.4, 0.5, 0.6]);
        let out = nearest_neighbors(&m, "apple", 1, NeighborSpace::Main, 0).unwrap();
        assert_eq!(out[0].token, "elm");
        assert!((out[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbors_exclude_query_and_match_exhaustive_sort() {
        let m = test_model(2);
        for space in [NeighborSpace::Main, NeighborSpace::Sense] {
            let out = nearest_neighbors(&m, "apple", 50, space, 0).unwrap();
            assert!(out.iter().all(|n| n.token != "apple"));
            // Brute-force oracle.
            let anchor = match space {
                NeighborSpace::Main => m.main_value(m.vocab.id("apple")).clone(),
                NeighborSpace::Sense => m.sense_value(m.vocab.id("apple"), 0).clone(),
            };
            let mut oracle = Vec::new();
            for w in 1..m.vocab.size() {
                if w == m.vocab.id("apple") {
                    continue;
                }
                match space {
                    NeighborSpace::Main => {
                        oracle.push((w, 0, cosine_or_zero(&anchor, m.main_value(w))))
                    }
                    NeighborSpace::Sense => {
                        for s in 0..m.n_senses {
                            oracle.push((w, s, cosine_or_zero(&anchor, m.sense_value(w, s))));
                        }
                    }
                }
            }
            oracle.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            assert_eq!(out.len(), oracle.len().min(50));
            for (n, o) in out.iter().zip(&oracle) {
                assert_eq!(m.vocab.id(&n.token), o.0);
                assert_eq!(n.sense, o.1);
            }
        }
    }

    #[test]
    fn unknown_query_word_errors() {
        let m = test_model(1);
        assert!(matches!(
            nearest_neighbors(&m, "zzz", 3, NeighborSpace::Main, 0),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn accuracy_f1_cases() {
        let (acc, f1) = accuracy_f1(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!((acc, f1), (1.0, 1.0));

        // All-positive predictions at positive rate 0.665.
        let n = 1000;
        let pos = 665;
        let gold: Vec<bool> = (0..n).map(|i| i < pos).collect();
        let preds = vec![true; n];
        let (acc, f1) = accuracy_f1(&preds, &gold).unwrap();
        assert!((acc - 0.665).abs() < 1e-12);
        assert!((f1 - 0.799).abs() < 1e-3);

        // No predicted positives.
        let (_, f1) = accuracy_f1(&[false, false], &[true, false]).unwrap();
        assert_eq!(f1, 0.0);

        assert!(matches!(
            accuracy_f1(&[true], &[true, false]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn spearman_is_monotone_invariant(
            xs in proptest::collection::vec(-100.0f64..100.0, 5..30),
            ys in proptest::collection::vec(-100.0f64..100.0, 5..30),
        ) {
            let n = xs.len().min(ys.len());
            let xs = &xs[..n];
            let ys = &ys[..n];
            if let Ok(base) = spearman(xs, ys) {
                // exp is strictly monotone; ranks are unchanged.
                let tx: Vec<f64> = xs.iter().map(|v| (v * 0.01).exp()).collect();
                let got = spearman(&tx, ys).unwrap();
                prop_assert!((base - got).abs() < 1e-9);
            }
        }

        #[test]
        fn all_positive_f1_identity(p in 0.05f64..0.95) {
            // F1 = 2p/(p+1) for all-positive predictions at rate p.
            let n = 400usize;
            let pos = ((n as f64) * p).round() as usize;
            prop_assume!(pos > 0 && pos < n);
            let gold: Vec<bool> = (0..n).map(|i| i < pos).collect();
            let (acc, f1) = accuracy_f1(&vec![true; n], &gold).unwrap();
            let rate = pos as f64 / n as f64;
            prop_assert!((acc - rate).abs() < 1e-12);
            prop_assert!((f1 - 2.0 * rate / (rate + 1.0)).abs() < 1e-12);
        }
    }
}
