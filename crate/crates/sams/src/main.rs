use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sams::checkpoint::{load_model, save_model};
use sams::corpus::build_vocab_from_lines;
use sams::error::{Error, Result};
use sams::eval::{
    accuracy_f1, avg_sim, global_sim, load_similarity_file, local_sim, nearest_neighbors,
    spearman, EvalReport, NeighborSpace,
};
use sams::model::{EncoderKind, Model};
use sams::objective::{train_generic, GenericTrainConfig, HingeConfig, NodeAgg};
use sams::optim::AdaDeltaConfig;
use sams::selfcheck::run_grad_checks;
use sams::siamese::{
    load_pairs, predict_paraphrase, train_paraphrase, CostKind, DisambiguationMode,
    ParaphraseTrainConfig,
};

#[derive(Parser)]
#[command(
    name = "sams",
    about = "Syntax-aware multi-sense embeddings with compositional sentence encoders",
    version
)]
struct Cli {
    /// Cap the number of worker threads (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct AdaDeltaArgs {
    /// AdaDelta decay ρ.
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    /// AdaDelta ε.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Extra multiplier on every update.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

impl AdaDeltaArgs {
    fn config(&self) -> AdaDeltaConfig {
        AdaDeltaConfig {
            decay_rho: self.rho,
            epsilon: self.eps,
            scale: self.scale,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings, encoder and scorer on a plain corpus.
    TrainGeneric {
        /// One tokenized sentence per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Bracketed parse trees, line-aligned with the corpus.
        #[arg(long)]
        trees: Option<PathBuf>,
        #[arg(long, default_value = "recnn")]
        encoder: String,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        senses: usize,
        /// Hidden units of the plausibility scorer.
        #[arg(long, default_value_t = 150)]
        hidden: usize,
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Substitution negatives per sentence.
        #[arg(long, default_value_t = 5)]
        k_sub: usize,
        /// Shuffle negatives per sentence.
        #[arg(long, default_value_t = 1)]
        k_shuf: usize,
        /// Relative weight of the shuffle objective.
        #[arg(long, default_value_t = 1.0)]
        shuffle_weight: f64,
        /// How per-node scores aggregate into a sentence score.
        #[arg(long, default_value = "sum")]
        node_agg: String,
        /// Sample substitutes uniformly instead of by frequency.
        #[arg(long)]
        uniform_substitution: bool,
        /// Context window for sense selection (0 = whole sentence).
        #[arg(long, default_value_t = 0)]
        context_window: usize,
        /// Truncate sentences longer than this many tokens.
        #[arg(long, default_value_t = 64)]
        max_len: usize,
        /// Minimum token frequency to stay out of the unknown bucket.
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[command(flatten)]
        adadelta: AdaDeltaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a model on labeled sentence pairs with a siamese objective.
    TrainParaphrase {
        /// TSV: label<TAB>sentence1<TAB>sentence2.
        #[arg(long)]
        pairs: PathBuf,
        /// Checkpoint to start from; omit to train from scratch.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Trees for the first sentences (tree encoder only).
        #[arg(long)]
        trees1: Option<PathBuf>,
        /// Trees for the second sentences (tree encoder only).
        #[arg(long)]
        trees2: Option<PathBuf>,
        #[arg(long, default_value = "cosine")]
        cost: String,
        #[arg(long, default_value = "soft")]
        mode: String,
        /// Add sense-level average pooling to the sentence vectors.
        #[arg(long)]
        pooling: bool,
        /// Also train the surface-feature classifier for ensembling.
        #[arg(long)]
        ensemble: bool,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Margin of the L2 contrastive cost.
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        /// Context window for sense selection (0 = whole sentence).
        #[arg(long, default_value_t = 0)]
        context_window: usize,
        /// Without --init: embedding dimension.
        #[arg(long, default_value_t = 300)]
        dim: usize,
        /// Without --init: senses per word.
        #[arg(long, default_value_t = 3)]
        senses: usize,
        /// Without --init: scorer hidden units.
        #[arg(long, default_value_t = 150)]
        hidden: usize,
        /// Without --init: encoder kind.
        #[arg(long, default_value = "recnn")]
        encoder: String,
        #[command(flatten)]
        adadelta: AdaDeltaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contextual word-similarity evaluation (Spearman against human scores).
    EvalSimilarity {
        #[arg(long)]
        model: PathBuf,
        /// TSV: word1, word2, context1, context2, score; targets marked <t>…</t>.
        #[arg(long)]
        data: PathBuf,
        /// global, local, avg, or all.
        #[arg(long, default_value = "all")]
        metric: String,
        /// Tokens each side of the target that count as context (0 = all).
        #[arg(long, default_value_t = 5)]
        context_window: usize,
    },
    /// Accuracy and F1 on labeled sentence pairs.
    EvalParaphrase {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        trees1: Option<PathBuf>,
        #[arg(long)]
        trees2: Option<PathBuf>,
        /// Average the head probability with the surface classifier.
        #[arg(long)]
        ensemble: bool,
    },
    /// Nearest neighbors of a word by cosine similarity.
    Neighbors {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
        /// main or sense.
        #[arg(long, default_value = "main")]
        space: String,
        /// Anchor sense index when --space sense.
        #[arg(long, default_value_t = 0)]
        sense: usize,
    },
    /// Verify analytic gradients against central differences.
    GradCheck {
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        hidden: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainGeneric {
            corpus,
            trees,
            encoder,
            dim,
            senses,
            hidden,
            margin,
            epochs,
            batch,
            seed,
            k_sub,
            k_shuf,
            shuffle_weight,
            node_agg,
            uniform_substitution,
            context_window,
            max_len,
            min_count,
            adadelta,
            out,
        } => {
            if margin <= 0.0 {
                return Err(Error::Config("margin must be positive".into()));
            }
            let cfg = GenericTrainConfig {
                dim,
                n_senses: senses,
                hidden,
                epochs,
                batch_size: batch,
                seed,
                encoder: EncoderKind::parse(&encoder)?,
                adadelta: adadelta.config(),
                hinge: HingeConfig {
                    margin,
                    k_sub,
                    k_shuf,
                    shuffle_weight,
                },
                node_agg: match node_agg.as_str() {
                    "sum" => NodeAgg::Sum,
                    "mean" => NodeAgg::Mean,
                    other => {
                        return Err(Error::Config(format!("unknown node aggregation {other}")))
                    }
                },
                uniform_substitution,
                context_window,
                max_len,
                min_count,
            };
            let model = train_generic(&corpus, trees.as_deref(), &cfg, |stats| {
                println!("{stats}");
            })?;
            save_model(&model, &out)?;
            eprintln!("saved checkpoint to {}", out.display());
            Ok(())
        }
        Command::TrainParaphrase {
            pairs,
            init,
            trees1,
            trees2,
            cost,
            mode,
            pooling,
            ensemble,
            epochs,
            batch,
            seed,
            margin,
            val_fraction,
            context_window,
            dim,
            senses,
            hidden,
            encoder,
            adadelta,
            out,
        } => {
            if margin <= 0.0 {
                return Err(Error::Config("margin must be positive".into()));
            }
            if !(0.0..1.0).contains(&val_fraction) {
                return Err(Error::Config("val-fraction must be in [0, 1)".into()));
            }
            let mut model = match &init {
                Some(path) => load_model(path)?,
                None => {
                    // One-step variant: fresh model over the pair vocabulary.
                    let vocab = build_pair_vocab(&pairs)?;
                    Model::init(vocab, dim, senses, hidden, EncoderKind::parse(&encoder)?, seed)
                }
            };
            let data = load_pairs(&pairs, &model.vocab, trees1.as_deref(), trees2.as_deref())?;
            let cfg = ParaphraseTrainConfig {
                cost: CostKind::parse(&cost)?,
                mode: DisambiguationMode::parse(&mode)?,
                pooling,
                epochs,
                batch_size: batch,
                seed,
                adadelta: adadelta.config(),
                l2_margin: margin,
                validation_fraction: val_fraction,
                train_c1: ensemble,
                context_window,
            };
            let outcome = train_paraphrase(&mut model, &data, &cfg, |stats| {
                println!("{stats}");
            })?;
            println!(
                "best-epoch {} val-accuracy {:.4}",
                outcome.best_epoch, outcome.validation_accuracy
            );
            save_model(&model, &out)?;
            eprintln!("saved checkpoint to {}", out.display());
            Ok(())
        }
        Command::EvalSimilarity {
            model,
            data,
            metric,
            context_window,
        } => {
            let model = load_model(&model)?;
            let items = load_similarity_file(&data)?;
            let humans: Vec<f64> = items.iter().map(|i| i.human_score).collect();
            let mut reports = Vec::new();
            let mut add = |name: &str, scores: Vec<f64>| -> Result<()> {
                reports.push(EvalReport {
                    metric: name.to_string(),
                    value: spearman(&scores, &humans)?,
                    n: items.len(),
                });
                Ok(())
            };
            if metric == "global" || metric == "all" {
                add(
                    "globalSim",
                    items
                        .iter()
                        .map(|i| global_sim(&model, &i.word1, &i.word2))
                        .collect(),
                )?;
            }
            if metric == "local" || metric == "all" {
                add(
                    "localSim",
                    items
                        .iter()
                        .map(|i| local_sim(&model, i, context_window))
                        .collect(),
                )?;
            }
            if metric == "avg" || metric == "all" {
                add(
                    "avgSim",
                    items
                        .iter()
                        .map(|i| avg_sim(&model, i, context_window))
                        .collect(),
                )?;
            }
            if reports.is_empty() {
                return Err(Error::Config(format!("unknown metric {metric}")));
            }
            for r in reports {
                println!("{r}");
            }
            Ok(())
        }
        Command::EvalParaphrase {
            model,
            data,
            trees1,
            trees2,
            ensemble,
        } => {
            let model = load_model(&model)?;
            if ensemble && model.task.c1.is_none() {
                return Err(Error::Config(
                    "--ensemble needs a model trained with --ensemble".into(),
                ));
            }
            let pairs = load_pairs(&data, &model.vocab, trees1.as_deref(), trees2.as_deref())?;
            let mut preds = Vec::with_capacity(pairs.len());
            let mut gold = Vec::with_capacity(pairs.len());
            for pair in &pairs {
                let (_, label) = predict_paraphrase(&model, pair, ensemble)?;
                preds.push(label);
                gold.push(pair.label);
            }
            let (acc, f1) = accuracy_f1(&preds, &gold)?;
            println!(
                "{}",
                EvalReport {
                    metric: "accuracy".into(),
                    value: acc,
                    n: pairs.len()
                }
            );
            println!(
                "{}",
                EvalReport {
                    metric: "f1".into(),
                    value: f1,
                    n: pairs.len()
                }
            );
            Ok(())
        }
        Command::Neighbors {
            model,
            word,
            k,
            space,
            sense,
        } => {
            let model = load_model(&model)?;
            let space = NeighborSpace::parse(&space)?;
            let neighbors = nearest_neighbors(&model, &word, k, space, sense)?;
            for n in neighbors {
                match space {
                    NeighborSpace::Main => println!("{}\t{:.6}", n.token, n.similarity),
                    NeighborSpace::Sense => {
                        println!("{}\t{}\t{:.6}", n.token, n.sense, n.similarity)
                    }
                }
            }
            Ok(())
        }
        Command::GradCheck { dim, hidden, seed } => {
            let reports = run_grad_checks(dim, hidden, seed)?;
            let mut worst: f64 = 0.0;
            for r in &reports {
                println!("{}\t{:.3e}", r.name, r.max_relative_error);
                worst = worst.max(r.max_relative_error);
            }
            println!("max-relative-error\t{worst:.3e}");
            if worst < 1e-4 {
                Ok(())
            } else {
                Err(Error::DegenerateInput("gradient check failed"))
            }
        }
    }
}

/// Vocabulary over both sentence columns of a pairs file.
fn build_pair_vocab(path: &std::path::Path) -> Result<sams::corpus::Vocabulary> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (_, s1, s2) = match (cols.next(), cols.next(), cols.next()) {
            (Some(l), Some(a), Some(b)) => (l, a, b),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected label<TAB>sentence1<TAB>sentence2".into(),
                })
            }
        };
        sentences.push(s1);
        sentences.push(s2);
    }
    build_vocab_from_lines(sentences.into_iter(), 1).map_err(|e| match e {
        Error::EmptyCorpus(_) => Error::EmptyDataset(path.to_path_buf()),
        other => other,
    })
}
