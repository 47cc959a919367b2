//! Multi-sense embedding store: main vectors, cluster centroids, sense
//! vectors, cosine-based sense selection, and the soft-max sense gate.

use rand::Rng;

use crate::corpus::Sentence;
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::{cosine_or_zero, softmax, Tensor};

/// Per-word bundle of one main vector, `n` cluster centroids and `n`
/// sense vectors (parameter ids into the shared store), plus the number
/// of additive updates each centroid has received.
///
/// For single-sense models the sense vector aliases the main vector, so
/// "ambiguous" and disambiguated encodings coincide exactly.
#[derive(Clone, Debug)]
pub struct MultiSenseEntry {
    pub main: ParamId,
    pub centroids: Vec<ParamId>,
    pub senses: Vec<ParamId>,
    pub centroid_counts: Vec<u64>,
}

impl MultiSenseEntry {
    pub fn n_senses(&self) -> usize {
        self.senses.len()
    }

    /// Allocate and initialize the slots for one word.
    ///
    /// Main vectors are uniform in ±0.5/d; sense vectors start at the
    /// main vector plus uniform noise of the same magnitude; centroids
    /// are uniform random scaled to unit norm.
    pub fn init(
        store: &mut ParamStore,
        word: usize,
        dim: usize,
        n_senses: usize,
        rng: &mut impl Rng,
    ) -> MultiSenseEntry {
        assert!(n_senses >= 1);
        let half = 0.5 / dim as f64;
        let uniform = |rng: &mut dyn rand::RngCore, scale: f64| -> Vec<f64> {
            (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
        };
        let main_vals = Tensor::from_parts(vec![dim], uniform(rng, half));
        let main = store.add(format!("main/{word}"), main_vals.clone());
        let mut centroids = Vec::with_capacity(n_senses);
        let mut senses = Vec::with_capacity(n_senses);
        for k in 0..n_senses {
            let raw = Tensor::from_parts(vec![dim], uniform(rng, 0.5));
            let norm = raw.norm();
            let unit = if norm > 0.0 { raw.scale(1.0 / norm) } else { raw };
            centroids.push(store.add(format!("centroid/{word}/{k}"), unit));
        }
        if n_senses == 1 {
            senses.push(main);
        } else {
            for k in 0..n_senses {
                let noise = Tensor::from_parts(vec![dim], uniform(rng, half));
                senses.push(store.add(format!("sense/{word}/{k}"), main_vals.add(&noise)));
            }
        }
        MultiSenseEntry {
            main,
            centroids,
            senses,
            centroid_counts: vec![0; n_senses],
        }
    }
}

/// Result of routing one word occurrence to a sense.
#[derive(Clone, Debug)]
pub struct SenseChoice {
    pub word_id: usize,
    pub sense_index: usize,
    /// Cosine of the context to the winning centroid.
    pub score: f64,
    pub probs: Option<Tensor>,
}

/// Pick the sense whose centroid is closest to the context by cosine.
///
/// Zero contexts and untouched (zero) centroids score 0.0, so a fully
/// degenerate case falls back to sense 0; ties break to the lowest index.
pub fn select_sense(
    store: &ParamStore,
    entry: &MultiSenseEntry,
    word_id: usize,
    context: &Tensor,
) -> SenseChoice {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (k, &cid) in entry.centroids.iter().enumerate() {
        let c = cosine_or_zero(context, store.value(cid));
        if c > best_score {
            best = k;
            best_score = c;
        }
    }
    SenseChoice {
        word_id,
        sense_index: best,
        score: best_score,
        probs: None,
    }
}

/// Add the context vector to the selected centroid (the clustering step
/// of generic training) and bump its update count.
pub fn update_centroid(
    store: &mut ParamStore,
    entry: &mut MultiSenseEntry,
    sense_index: usize,
    context: &Tensor,
) {
    let slot = store.slot_mut(entry.centroids[sense_index]);
    slot.value.add_assign(context);
    entry.centroid_counts[sense_index] += 1;
}

/// Centroid as the mean of its accumulated contexts (variant behind the
/// `--centroid-mode mean` flag); raw sums otherwise.
pub fn centroid_for_selection(
    store: &ParamStore,
    entry: &MultiSenseEntry,
    k: usize,
    mean_mode: bool,
) -> Tensor {
    let raw = store.value(entry.centroids[k]).clone();
    if mean_mode && entry.centroid_counts[k] > 0 {
        raw.scale(1.0 / entry.centroid_counts[k] as f64)
    } else {
        raw
    }
}

/// Soft sense distribution: softmax over `beta · cos(context, centroidᵢ)`.
///
/// A zero context gives the uniform distribution.
pub fn sense_probabilities(
    store: &ParamStore,
    entry: &MultiSenseEntry,
    context: &Tensor,
    beta: f64,
) -> Tensor {
    let scores: Vec<f64> = entry
        .centroids
        .iter()
        .map(|&cid| beta * cosine_or_zero(context, store.value(cid)))
        .collect();
    softmax(&Tensor::from_parts(vec![scores.len()], scores))
}

/// Probability-weighted mixture of the sense vectors.
pub fn soft_sense_vector(store: &ParamStore, entry: &MultiSenseEntry, probs: &Tensor) -> Tensor {
    debug_assert_eq!(probs.len(), entry.senses.len());
    let dim = store.value(entry.senses[0]).len();
    let mut out = Tensor::zeros(vec![dim]);
    for (k, &sid) in entry.senses.iter().enumerate() {
        let p = probs.data()[k];
        for (o, v) in out.data_mut().iter_mut().zip(store.value(sid).data()) {
            *o += p * v;
        }
    }
    out
}

/// One-shot sense selection for every position of a sentence, using the
/// average of the other words' main vectors as context. Pure read.
pub fn prior_disambiguate(
    store: &ParamStore,
    entries: &[MultiSenseEntry],
    s: &Sentence,
    window: usize,
    dim: usize,
) -> Vec<SenseChoice> {
    s.token_ids
        .iter()
        .enumerate()
        .map(|(pos, &word)| {
            let ctx = crate::corpus::context_vector(s, pos, window, dim, |w| {
                store.value(entries[w].main)
            });
            select_sense(store, &entries[word], word, &ctx)
        })
        .collect()
}

/// Graph version of [`sense_probabilities`]: gradients flow to the
/// centroids and to `beta`; the context is treated as a constant.
pub fn sense_probabilities_node(
    g: &mut Graph,
    store: &ParamStore,
    entry: &MultiSenseEntry,
    context: &Tensor,
    beta: ParamId,
) -> Result<NodeId> {
    let ctx_zero = context.norm() == 0.0;
    let ctx_node = g.input(context.clone());
    let mut cos_nodes = Vec::with_capacity(entry.centroids.len());
    for &cid in &entry.centroids {
        if ctx_zero || store.value(cid).norm() == 0.0 {
            cos_nodes.push(g.input(Tensor::scalar(0.0)));
        } else {
            let c = g.param(cid, store.value(cid));
            cos_nodes.push(g.cosine(ctx_node, c)?);
        }
    }
    let stacked = g.stack_scalars(&cos_nodes);
    let beta_node = g.param(beta, store.value(beta));
    let scaled = g.mul_scalar(stacked, beta_node);
    Ok(g.softmax(scaled))
}

/// Graph version of [`soft_sense_vector`]: gradients flow to the sense
/// vectors and to the probabilities.
pub fn soft_sense_node(
    g: &mut Graph,
    store: &ParamStore,
    entry: &MultiSenseEntry,
    probs: NodeId,
) -> NodeId {
    let vectors: Vec<NodeId> = entry
        .senses
        .iter()
        .map(|&sid| g.param(sid, store.value(sid)))
        .collect();
    g.mix_vectors(probs, &vectors)
}
