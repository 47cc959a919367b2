//! The full model: vocabulary, multi-sense embedding table, encoder,
//! plausibility scorer and task heads, all backed by one parameter store.

use crate::composition::{CompositionLayer, LstmCell};
use crate::corpus::{context_vector, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::objective::PlausibilityScorer;
use crate::optim::{ParamId, ParamStore};
use crate::rng::{stream, tags};
use crate::senses::{select_sense, MultiSenseEntry, SenseChoice};
use crate::siamese::{CosineCostParams, TaskState};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    RecNn,
    Rnn,
}

impl EncoderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::RecNn => "recnn",
            EncoderKind::Rnn => "rnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "recnn" => Ok(EncoderKind::RecNn),
            "rnn" => Ok(EncoderKind::Rnn),
            other => Err(Error::Config(format!("unknown encoder kind {other}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Encoder {
    RecNn(CompositionLayer),
    Rnn(LstmCell),
}

impl Encoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::RecNn(_) => EncoderKind::RecNn,
            Encoder::Rnn(_) => EncoderKind::Rnn,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub dim: usize,
    pub n_senses: usize,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub entries: Vec<MultiSenseEntry>,
    pub encoder: Encoder,
    pub scorer: PlausibilityScorer,
    /// Learnable sharpness of the soft sense gate.
    pub beta: ParamId,
    pub cos_head: CosineCostParams,
    pub task: TaskState,
}

impl Model {
    /// Seeded initialization. Slot allocation order is fixed (embeddings
    /// per word, then encoder, scorer, gate, head) so identical seeds
    /// give bit-identical models.
    pub fn init(
        vocab: Vocabulary,
        dim: usize,
        n_senses: usize,
        hidden: usize,
        kind: EncoderKind,
        seed: u64,
    ) -> Model {
        assert!(dim >= 1 && n_senses >= 1 && hidden >= 1);
        let mut rng = stream(seed, tags::INIT, 0);
        let mut store = ParamStore::new();
        let entries: Vec<MultiSenseEntry> = (0..vocab.size())
            .map(|w| MultiSenseEntry::init(&mut store, w, dim, n_senses, &mut rng))
            .collect();
        let encoder = match kind {
            EncoderKind::RecNn => Encoder::RecNn(CompositionLayer::init(&mut store, dim, &mut rng)),
            EncoderKind::Rnn => Encoder::Rnn(LstmCell::init(&mut store, dim, &mut rng)),
        };
        let scorer = PlausibilityScorer::init(&mut store, dim, hidden, &mut rng);
        let beta = store.add("beta", Tensor::scalar(1.0));
        let cos_head = CosineCostParams {
            w: store.add("cos_w", Tensor::scalar(1.0)),
            b: store.add("cos_b", Tensor::scalar(0.0)),
        };
        Model {
            dim,
            n_senses,
            vocab,
            store,
            entries,
            encoder,
            scorer,
            beta,
            cos_head,
            task: TaskState::default(),
        }
    }

    pub fn main_value(&self, word: usize) -> &Tensor {
        self.store.value(self.entries[word].main)
    }

    pub fn sense_value(&self, word: usize, sense: usize) -> &Tensor {
        self.store.value(self.entries[word].senses[sense])
    }

    pub fn beta_value(&self) -> f64 {
        self.store.value(self.beta).item()
    }

    /// Context vector for one position, averaged over main vectors.
    pub fn context_for(&self, s: &Sentence, position: usize, window: usize) -> Tensor {
        context_vector(s, position, window, self.dim, |w| self.main_value(w))
    }

    /// Hard sense choice for one position plus the context it was based on.
    pub fn choose_sense(&self, s: &Sentence, position: usize, window: usize) -> (SenseChoice, Tensor) {
        let ctx = self.context_for(s, position, window);
        let word = s.token_ids[position];
        let choice = select_sense(&self.store, &self.entries[word], word, &ctx);
        (choice, ctx)
    }
}
