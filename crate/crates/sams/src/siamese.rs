//! Task-specific refinement: dynamic sense disambiguation inside a twin
//! network with shared parameters, both contrastive cost functions, the
//! surface-feature classifier and ensembling.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::composition::{average_pool, encode_recnn, encode_rnn};
use crate::corpus::{load_tree, ParseNode, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::model::{Encoder, Model};
use crate::optim::{AdaDeltaConfig, ParamId};
use crate::rng::{stream, tags};
use crate::senses::{sense_probabilities_node, soft_sense_node};
use crate::tensor::{cosine_or_zero, sigmoid, Tensor};

/// Scaling and shifting parameters of the cosine head.
#[derive(Clone, Copy, Debug)]
pub struct CosineCostParams {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    Cosine,
    L2,
}

impl CostKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CostKind::Cosine => "cosine",
            CostKind::L2 => "l2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(CostKind::Cosine),
            "l2" => Ok(CostKind::L2),
            other => Err(Error::Config(format!("unknown cost {other}"))),
        }
    }
}

/// How per-word input vectors are chosen during encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisambiguationMode {
    /// Main vectors only (the single-sense pathway).
    Ambiguous,
    /// One-shot sense selection; sense vectors stay frozen.
    Prior,
    /// Most plausible sense selected; that sense vector is trainable.
    Hard,
    /// Probability-weighted sense mixture; gate and senses trainable.
    Soft,
}

impl DisambiguationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisambiguationMode::Ambiguous => "ambiguous",
            DisambiguationMode::Prior => "prior",
            DisambiguationMode::Hard => "hard",
            DisambiguationMode::Soft => "soft",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ambiguous" => Ok(DisambiguationMode::Ambiguous),
            "prior" => Ok(DisambiguationMode::Prior),
            "hard" => Ok(DisambiguationMode::Hard),
            "soft" => Ok(DisambiguationMode::Soft),
            other => Err(Error::Config(format!("unknown mode {other}"))),
        }
    }
}

/// Binary logistic regression over a small feature vector.
#[derive(Clone, Debug)]
pub struct LogisticClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticClassifier {
    pub fn zeros(n_features: usize) -> Self {
        LogisticClassifier {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn probability(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.weights.len());
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }

    /// Full-batch gradient descent on the logistic loss; deterministic.
    pub fn fit(xs: &[Vec<f64>], ys: &[bool], iterations: usize, learning_rate: f64) -> Self {
        assert!(!xs.is_empty());
        let n_features = xs[0].len();
        let mut clf = LogisticClassifier::zeros(n_features);
        let n = xs.len() as f64;
        for _ in 0..iterations {
            let mut gw = vec![0.0; n_features];
            let mut gb = 0.0;
            for (x, &y) in xs.iter().zip(ys) {
                let p = clf.probability(x);
                let err = p - if y { 1.0 } else { 0.0 };
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += err * xi;
                }
                gb += err;
            }
            for (w, g) in clf.weights.iter_mut().zip(&gw) {
                *w -= learning_rate * g / n;
            }
            clf.bias -= learning_rate * gb / n;
        }
        clf
    }
}

/// Settings baked into a trained task model; persisted with checkpoints
/// so evaluation reconstructs the same prediction path.
#[derive(Clone, Debug)]
pub struct TaskState {
    pub cost: CostKind,
    pub mode: DisambiguationMode,
    pub pooling: bool,
    pub l2_margin: f64,
    /// Sharpness of the distance-to-probability calibration for the L2
    /// head, fit on validation.
    pub l2_calibration: f64,
    pub c1: Option<LogisticClassifier>,
}

impl Default for TaskState {
    fn default() -> Self {
        TaskState {
            cost: CostKind::Cosine,
            mode: DisambiguationMode::Soft,
            pooling: false,
            l2_margin: 1.0,
            l2_calibration: 1.0,
            c1: None,
        }
    }
}

/// One labeled sentence pair; raw tokens are kept for surface features.
#[derive(Clone, Debug)]
pub struct ParaphrasePair {
    pub s1: Sentence,
    pub s2: Sentence,
    pub tree1: Option<ParseNode>,
    pub tree2: Option<ParseNode>,
    pub raw1: Vec<String>,
    pub raw2: Vec<String>,
    pub label: bool,
}

/// Read a `label<TAB>sentence1<TAB>sentence2` TSV, with optional
/// line-aligned tree files for the tree encoder.
pub fn load_pairs(
    path: &Path,
    vocab: &Vocabulary,
    trees1: Option<&Path>,
    trees2: Option<&Path>,
) -> Result<Vec<ParaphrasePair>> {
    let read_trees = |p: Option<&Path>| -> Result<Option<Vec<ParseNode>>> {
        match p {
            None => Ok(None),
            Some(p) => {
                let f = File::open(p).map_err(|e| Error::io(p, e))?;
                let mut out = Vec::new();
                for (lineno, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|e| Error::io(p, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let (tree, _) = load_tree(&line).map_err(|e| match e {
                        Error::Parse { msg, .. } => Error::Parse {
                            line: lineno + 1,
                            msg,
                        },
                        other => other,
                    })?;
                    out.push(tree);
                }
                Ok(Some(out))
            }
        }
    };
    let t1 = read_trees(trees1)?;
    let t2 = read_trees(trees2)?;

    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (label, c1, c2) = match (cols.next(), cols.next(), cols.next()) {
            (Some(l), Some(a), Some(b)) => (l, a, b),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected label<TAB>sentence1<TAB>sentence2".into(),
                })
            }
        };
        let label = match label.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("label must be 0 or 1, got {other}"),
                })
            }
        };
        let raw1: Vec<String> = c1.split_whitespace().map(str::to_string).collect();
        let raw2: Vec<String> = c2.split_whitespace().map(str::to_string).collect();
        if raw1.is_empty() || raw2.is_empty() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "empty sentence".into(),
            });
        }
        let idx = pairs.len();
        let tree_for = |trees: &Option<Vec<ParseNode>>, len: usize| -> Result<Option<ParseNode>> {
            match trees {
                None => Ok(None),
                Some(ts) => {
                    let t = ts.get(idx).ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        msg: "missing tree for pair".into(),
                    })?;
                    if t.leaf_count() != len {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            msg: format!(
                                "tree has {} leaves for a {}-token sentence",
                                t.leaf_count(),
                                len
                            ),
                        });
                    }
                    Ok(Some(t.clone()))
                }
            }
        };
        let tree1 = tree_for(&t1, raw1.len())?;
        let tree2 = tree_for(&t2, raw2.len())?;
        pairs.push(ParaphrasePair {
            s1: Sentence::new(raw1.iter().map(|t| vocab.id(t)).collect())?,
            s2: Sentence::new(raw2.iter().map(|t| vocab.id(t)).collect())?,
            tree1,
            tree2,
            raw1,
            raw2,
            label,
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(pairs)
}

/// Encode one sentence under a disambiguation mode.
///
/// Returns the sentence representation and the per-word input vectors
/// that fed the encoder (the pooling operands). Gradient flow follows
/// the mode: main vectors train in `Ambiguous`, selected sense vectors
/// in `Hard`, gate plus senses in `Soft`; `Prior` freezes embeddings.
pub fn encode_sentence(
    g: &mut Graph,
    model: &Model,
    s: &Sentence,
    tree: Option<&ParseNode>,
    mode: DisambiguationMode,
    pooling: bool,
    context_window: usize,
) -> Result<(NodeId, Vec<NodeId>)> {
    let mut leaves = Vec::with_capacity(s.len());
    for pos in 0..s.len() {
        let word = s.token_ids[pos];
        let entry = &model.entries[word];
        let leaf = match mode {
            // Embeddings are refined only under dynamic disambiguation;
            // ambiguous and prior encodings read them as constants.
            DisambiguationMode::Ambiguous => g.input(model.store.value(entry.main).clone()),
            DisambiguationMode::Prior => {
                let (choice, _) = model.choose_sense(s, pos, context_window);
                g.input(model.store.value(entry.senses[choice.sense_index]).clone())
            }
            DisambiguationMode::Hard => {
                let (choice, _) = model.choose_sense(s, pos, context_window);
                let sid = entry.senses[choice.sense_index];
                g.param(sid, model.store.value(sid))
            }
            DisambiguationMode::Soft => {
                let ctx = model.context_for(s, pos, context_window);
                let probs =
                    sense_probabilities_node(g, &model.store, entry, &ctx, model.beta)?;
                soft_sense_node(g, &model.store, entry, probs)
            }
        };
        leaves.push(leaf);
    }

    let root = match &model.encoder {
        Encoder::RecNn(layer) => {
            let owned;
            let t = match tree {
                Some(t) => t,
                None => {
                    owned = ParseNode::right_linear(s.len());
                    &owned
                }
            };
            encode_recnn(g, &model.store, layer, &leaves, t)?.root
        }
        Encoder::Rnn(cell) => encode_rnn(g, &model.store, cell, &leaves)?.root,
    };
    let root = if pooling {
        let pooled = average_pool(g, &leaves)?;
        g.add(root, pooled)
    } else {
        root
    };
    Ok((root, leaves))
}

/// Contrastive cost on Euclidean distance:
/// `½‖v1−v2‖²` for paraphrases, `½·max(0, m−‖v1−v2‖)²` otherwise.
pub fn l2_contrastive_cost(g: &mut Graph, v1: NodeId, v2: NodeId, y: bool, margin: f64) -> NodeId {
    let diff = g.sub(v1, v2);
    if y {
        let sq = g.square(diff);
        let s = g.sum_all(sq);
        g.scale(s, 0.5)
    } else {
        let d = g.norm(diff);
        let nd = g.scale(d, -1.0);
        let shifted = g.add_const(nd, margin);
        let r = g.relu(shifted);
        let sq = g.square(r);
        g.scale(sq, 0.5)
    }
}

/// Squared error between the label and a sigmoid of scaled-shifted
/// cosine similarity: `½(y − σ(w·d + b))²`.
pub fn cosine_cost(
    g: &mut Graph,
    model: &Model,
    v1: NodeId,
    v2: NodeId,
    y: bool,
) -> Result<NodeId> {
    let d = g.cosine(v1, v2)?;
    let w = g.param(model.cos_head.w, model.store.value(model.cos_head.w));
    let b = g.param(model.cos_head.b, model.store.value(model.cos_head.b));
    let wd = g.mul(w, d);
    let z = g.add(wd, b);
    let s = g.sigmoid(z);
    let e = g.add_const(s, -(if y { 1.0 } else { 0.0 }));
    let sq = g.square(e);
    Ok(g.scale(sq, 0.5))
}

/// Hand-engineered pair features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceFeatures {
    pub length_diff: usize,
    /// Jaccard overlap of the token sets, in [0, 1].
    pub unigram_overlap: f64,
    pub has_numbers_1: bool,
    pub has_numbers_2: bool,
    /// Multisets of digit-bearing tokens are equal.
    pub numbers_equal: bool,
}

pub fn extract_surface_features(s1: &[String], s2: &[String]) -> SurfaceFeatures {
    use std::collections::HashSet;
    let set1: HashSet<&str> = s1.iter().map(String::as_str).collect();
    let set2: HashSet<&str> = s2.iter().map(String::as_str).collect();
    let inter = set1.intersection(&set2).count();
    let union = set1.union(&set2).count();
    let overlap = if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    };
    let is_number = |t: &str| t.chars().any(|c| c.is_ascii_digit());
    let mut nums1: Vec<&str> = s1.iter().map(String::as_str).filter(|t| is_number(t)).collect();
    let mut nums2: Vec<&str> = s2.iter().map(String::as_str).filter(|t| is_number(t)).collect();
    nums1.sort_unstable();
    nums2.sort_unstable();
    SurfaceFeatures {
        length_diff: s1.len().abs_diff(s2.len()),
        unigram_overlap: overlap,
        has_numbers_1: !nums1.is_empty(),
        has_numbers_2: !nums2.is_empty(),
        numbers_equal: nums1 == nums2,
    }
}

/// Feature vector for the surface classifier: symmetric encodings only,
/// plus the model's similarity score, so predictions commute with
/// swapping the two sentences.
pub fn c1_feature_vector(f: &SurfaceFeatures, similarity: f64) -> Vec<f64> {
    vec![
        f.length_diff as f64 / 10.0,
        f.unigram_overlap,
        (f.has_numbers_1 as u8 + f.has_numbers_2 as u8) as f64 * 0.5,
        f.numbers_equal as u8 as f64,
        similarity,
    ]
}

#[derive(Clone, Debug)]
pub struct ParaphraseTrainConfig {
    pub cost: CostKind,
    pub mode: DisambiguationMode,
    pub pooling: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adadelta: AdaDeltaConfig,
    pub l2_margin: f64,
    pub validation_fraction: f64,
    pub train_c1: bool,
    pub context_window: usize,
}

impl Default for ParaphraseTrainConfig {
    fn default() -> Self {
        ParaphraseTrainConfig {
            cost: CostKind::Cosine,
            mode: DisambiguationMode::Soft,
            pooling: false,
            epochs: 10,
            batch_size: 32,
            seed: 42,
            adadelta: AdaDeltaConfig::default(),
            l2_margin: 1.0,
            validation_fraction: 0.2,
            train_c1: false,
            context_window: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParaphraseEpochStats {
    pub epoch: usize,
    pub mean_cost: f64,
    pub validation_accuracy: f64,
}

impl std::fmt::Display for ParaphraseEpochStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch {} cost {:.6} val-accuracy {:.4}",
            self.epoch, self.mean_cost, self.validation_accuracy
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParaphraseOutcome {
    pub best_epoch: usize,
    pub validation_accuracy: f64,
}

/// Sentence vectors of both branches under the model's task settings.
fn encode_pair(model: &Model, pair: &ParaphrasePair, cfg: &ParaphraseTrainConfig) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let (v1, _) = encode_sentence(
        &mut g,
        model,
        &pair.s1,
        pair.tree1.as_ref(),
        cfg.mode,
        cfg.pooling,
        cfg.context_window,
    )?;
    let (v2, _) = encode_sentence(
        &mut g,
        model,
        &pair.s2,
        pair.tree2.as_ref(),
        cfg.mode,
        cfg.pooling,
        cfg.context_window,
    )?;
    Ok((g.value(v1).clone(), g.value(v2).clone()))
}

fn decision(model: &Model, cfg: &ParaphraseTrainConfig, v1: &Tensor, v2: &Tensor) -> bool {
    match cfg.cost {
        CostKind::Cosine => {
            let d = cosine_or_zero(v1, v2);
            let w = model.store.value(model.cos_head.w).item();
            let b = model.store.value(model.cos_head.b).item();
            sigmoid(w * d + b) >= 0.5
        }
        CostKind::L2 => v1.sub(v2).norm() <= cfg.l2_margin / 2.0,
    }
}

/// Siamese training with shared weights: both branches of every pair
/// read the same parameter slots, so their gradients sum into one
/// storage. Validation accuracy drives epoch selection; the surface
/// classifier is fit afterwards on the training split.
pub fn train_paraphrase(
    model: &mut Model,
    pairs: &[ParaphrasePair],
    cfg: &ParaphraseTrainConfig,
    mut log: impl FnMut(ParaphraseEpochStats),
) -> Result<ParaphraseOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("paraphrase pairs".into()));
    }
    model.task.cost = cfg.cost;
    model.task.mode = cfg.mode;
    model.task.pooling = cfg.pooling;
    model.task.l2_margin = cfg.l2_margin;

    // Deterministic validation split.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut split_rng = stream(cfg.seed, tags::PAIR_SPLIT, 0);
    for i in (1..order.len()).rev() {
        let j = split_rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_val = ((pairs.len() as f64 * cfg.validation_fraction).round() as usize)
        .min(pairs.len().saturating_sub(1));
    let (val_idx, train_idx) = order.split_at(n_val);

    let val_accuracy = |m: &Model| -> Result<f64> {
        if val_idx.is_empty() {
            return Ok(0.0);
        }
        let correct: usize = val_idx
            .iter()
            .map(|&i| {
                let (v1, v2) = encode_pair(m, &pairs[i], cfg)?;
                Ok(usize::from(decision(m, cfg, &v1, &v2) == pairs[i].label))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum();
        Ok(correct as f64 / val_idx.len() as f64)
    };

    let mut best_epoch = 0usize;
    let mut best_acc = -1.0f64;
    let mut best_values = model.store.snapshot_values();

    for epoch in 0..cfg.epochs {
        let mut epoch_order: Vec<usize> = train_idx.to_vec();
        let mut rng = stream(cfg.seed, tags::EPOCH_SHUFFLE, 1_000_000 + epoch as u64);
        for i in (1..epoch_order.len()).rev() {
            let j = rng.gen_range(0..=i);
            epoch_order.swap(i, j);
        }
        let mut epoch_cost = 0.0;
        for batch in epoch_order.chunks(cfg.batch_size.max(1)) {
            let results: Vec<Result<(f64, crate::graph::GradMap)>> = batch
                .par_iter()
                .map(|&i| {
                    let pair = &pairs[i];
                    let mut g = Graph::new();
                    let (v1, _) = encode_sentence(
                        &mut g,
                        model,
                        &pair.s1,
                        pair.tree1.as_ref(),
                        cfg.mode,
                        cfg.pooling,
                        cfg.context_window,
                    )?;
                    let (v2, _) = encode_sentence(
                        &mut g,
                        model,
                        &pair.s2,
                        pair.tree2.as_ref(),
                        cfg.mode,
                        cfg.pooling,
                        cfg.context_window,
                    )?;
                    let cost = match cfg.cost {
                        CostKind::Cosine => cosine_cost(&mut g, model, v1, v2, pair.label)?,
                        CostKind::L2 => {
                            l2_contrastive_cost(&mut g, v1, v2, pair.label, cfg.l2_margin)
                        }
                    };
                    Ok((g.scalar(cost), g.backward(cost)))
                })
                .collect();
            for r in results {
                let (cost, grads) = r?;
                epoch_cost += cost;
                model.store.accumulate(&grads);
            }
            model.store.step_all(&cfg.adadelta);
        }
        let acc = val_accuracy(model)?;
        if acc > best_acc {
            best_acc = acc;
            best_epoch = epoch + 1;
            best_values = model.store.snapshot_values();
        }
        log(ParaphraseEpochStats {
            epoch,
            mean_cost: if train_idx.is_empty() {
                0.0
            } else {
                epoch_cost / train_idx.len() as f64
            },
            validation_accuracy: acc,
        });
    }
    if cfg.epochs > 0 {
        model.store.restore_values(&best_values);
    }

    // Calibrate the L2 head's probability mapping on validation by
    // grid-searched log-likelihood (the decision threshold itself is
    // unaffected: σ(a·(m/2−D)) ≥ ½ iff D ≤ m/2 for every a > 0).
    if cfg.cost == CostKind::L2 && !val_idx.is_empty() {
        let mut best_a = 1.0;
        let mut best_ll = f64::NEG_INFINITY;
        let distances: Vec<(f64, bool)> = val_idx
            .iter()
            .map(|&i| {
                let (v1, v2) = encode_pair(model, &pairs[i], cfg)?;
                Ok((v1.sub(&v2).norm(), pairs[i].label))
            })
            .collect::<Result<_>>()?;
        for a in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let ll: f64 = distances
                .iter()
                .map(|&(d, y)| {
                    let p = sigmoid(a * (cfg.l2_margin / 2.0 - d)).clamp(1e-12, 1.0 - 1e-12);
                    if y {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                })
                .sum();
            if ll > best_ll {
                best_ll = ll;
                best_a = a;
            }
        }
        model.task.l2_calibration = best_a;
    }

    if cfg.train_c1 {
        let split = if train_idx.is_empty() { val_idx } else { train_idx };
        let mut xs = Vec::with_capacity(split.len());
        let mut ys = Vec::with_capacity(split.len());
        for &i in split {
            let pair = &pairs[i];
            let (v1, v2) = encode_pair(model, pair, cfg)?;
            let f = extract_surface_features(&pair.raw1, &pair.raw2);
            xs.push(c1_feature_vector(&f, cosine_or_zero(&v1, &v2)));
            ys.push(pair.label);
        }
        model.task.c1 = Some(LogisticClassifier::fit(&xs, &ys, 2000, 0.5));
    }

    Ok(ParaphraseOutcome {
        best_epoch,
        validation_accuracy: val_accuracy(model)?,
    })
}

/// Probability and label for one pair under the model's trained heads.
///
/// With `ensemble`, the base probability is averaged with the surface
/// classifier's probability.
pub fn predict_paraphrase(
    model: &Model,
    pair: &ParaphrasePair,
    ensemble: bool,
) -> Result<(f64, bool)> {
    let cfg = ParaphraseTrainConfig {
        cost: model.task.cost,
        mode: model.task.mode,
        pooling: model.task.pooling,
        l2_margin: model.task.l2_margin,
        ..ParaphraseTrainConfig::default()
    };
    let (v1, v2) = encode_pair(model, pair, &cfg)?;
    let similarity = cosine_or_zero(&v1, &v2);
    let base = match model.task.cost {
        CostKind::Cosine => {
            let w = model.store.value(model.cos_head.w).item();
            let b = model.store.value(model.cos_head.b).item();
            sigmoid(w * similarity + b)
        }
        CostKind::L2 => {
            let d = v1.sub(&v2).norm();
            sigmoid(model.task.l2_calibration * (model.task.l2_margin / 2.0 - d))
        }
    };
    let p = if ensemble {
        let c1 = model.task.c1.as_ref().ok_or_else(|| {
            Error::Config("ensemble prediction needs a trained surface classifier".into())
        })?;
        let f = extract_surface_features(&pair.raw1, &pair.raw2);
        let pc1 = c1.probability(&c1_feature_vector(&f, similarity));
        (base + pc1) / 2.0
    } else {
        base
    };
    Ok((p, p >= 0.5))
}
