//! Vocabulary, sentences, parse trees, context vectors, and the two
//! corruption operators that build the negative-example sets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const UNK_TOKEN: &str = "<unk>";

/// Token inventory with frequency counts for negative sampling.
///
/// Ids are assigned by descending count (ties broken lexicographically),
/// with the unknown token fixed at id 0, so construction is deterministic.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
    /// Cumulative counts for unigram sampling.
    cumulative: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    /// Build from `(token, count)` pairs in final id order. The caller is
    /// responsible for including the unknown token at position 0.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.is_empty() || entries[0].0 != UNK_TOKEN {
            return Err(Error::Format(format!(
                "vocabulary must start with {UNK_TOKEN}"
            )));
        }
        let mut token_to_id = HashMap::with_capacity(entries.len());
        let mut id_to_token = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (id, (token, count)) in entries.into_iter().enumerate() {
            if token_to_id.insert(token.clone(), id).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {token}")));
            }
            id_to_token.push(token);
            counts.push(count);
        }
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0u64;
        for &c in &counts {
            total += c;
            cumulative.push(total);
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            counts,
            cumulative,
            total,
        })
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn unk_id(&self) -> usize {
        0
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id
            .get(token)
            .copied()
            .unwrap_or_else(|| self.unk_id())
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.id_to_token
            .iter()
            .map(|t| t.as_str())
            .zip(self.counts.iter().copied())
    }

    /// Draw one id from the unigram distribution.
    pub fn sample_unigram(&self, rng: &mut impl Rng) -> usize {
        debug_assert!(self.total > 0);
        let x = rng.gen_range(0..self.total);
        // First id whose cumulative count exceeds x.
        match self.cumulative.binary_search(&x) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Draw uniformly over ids with positive count.
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> usize {
        let candidates: Vec<usize> = (0..self.size()).filter(|&i| self.counts[i] > 0).collect();
        candidates[rng.gen_range(0..candidates.len())]
    }

    fn has_substitute_for(&self, original: usize) -> bool {
        (0..self.size()).any(|i| i != original && self.counts[i] > 0)
    }
}

/// Build a vocabulary from tokenized lines.
///
/// Tokens with frequency `>= min_count` get ids; the rest fold their
/// counts into the unknown token so unigram sampling mass is preserved.
pub fn build_vocab_from_lines<'a>(
    lines: impl Iterator<Item = &'a str>,
    min_count: u64,
) -> Result<Vocabulary> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in lines {
        for token in line.split_whitespace() {
            *counts.entry(token.to_string()).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus(PathBuf::from("<lines>")));
    }
    let mut kept: Vec<(String, u64)> = Vec::new();
    let mut unk_count = 0u64;
    for (token, count) in counts {
        if count >= min_count && token != UNK_TOKEN {
            kept.push((token, count));
        } else {
            unk_count += count;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut entries = Vec::with_capacity(kept.len() + 1);
    entries.push((UNK_TOKEN.to_string(), unk_count));
    entries.extend(kept);
    Vocabulary::from_entries(entries)
}

/// Read a one-sentence-per-line corpus file and build the vocabulary.
pub fn build_vocab(path: &Path, min_count: u64) -> Result<Vocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| Error::io(path, e))?);
    }
    build_vocab_from_lines(lines.iter().map(String::as_str), min_count)
        .map_err(|e| match e {
            Error::EmptyCorpus(_) => Error::EmptyCorpus(path.to_path_buf()),
            other => other,
        })
}

/// A tokenized sentence as vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub token_ids: Vec<usize>,
}

impl Sentence {
    pub fn new(token_ids: Vec<usize>) -> Result<Self> {
        if token_ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Sentence { token_ids })
    }

    pub fn from_tokens(tokens: &[&str], vocab: &Vocabulary) -> Result<Self> {
        Sentence::new(tokens.iter().map(|t| vocab.id(t)).collect())
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Strictly binary parse tree over token positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseNode {
    Leaf(usize),
    Internal(Box<ParseNode>, Box<ParseNode>),
}

impl ParseNode {
    pub fn leaf_count(&self) -> usize {
        match self {
            ParseNode::Leaf(_) => 1,
            ParseNode::Internal(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn leaves_in_order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            ParseNode::Leaf(p) => out.push(*p),
            ParseNode::Internal(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Restrict the tree to leaves `0..keep`, contracting unary chains.
    /// Used when over-long sentences are truncated for training.
    pub fn truncate(&self, keep: usize) -> Option<ParseNode> {
        match self {
            ParseNode::Leaf(p) => (*p < keep).then_some(ParseNode::Leaf(*p)),
            ParseNode::Internal(l, r) => match (l.truncate(keep), r.truncate(keep)) {
                (Some(l), Some(r)) => Some(ParseNode::Internal(Box::new(l), Box::new(r))),
                (Some(l), None) => Some(l),
                (None, Some(r)) => Some(r),
                (None, None) => None,
            },
        }
    }

    /// Right-binarized linear tree over `len` positions. This is what a
    /// flat (unparsed) sentence binarizes to.
    pub fn right_linear(len: usize) -> ParseNode {
        assert!(len >= 1);
        let mut node = ParseNode::Leaf(len - 1);
        for p in (0..len - 1).rev() {
            node = ParseNode::Internal(Box::new(ParseNode::Leaf(p)), Box::new(node));
        }
        node
    }
}

enum RawTree {
    Token(String),
    Node(Vec<RawTree>),
}

/// Parse one bracketed tree line, e.g. `(( kids ) (( play ) ( ball )))`.
///
/// Returns the binary tree (n-ary nodes right-binarized, unary nodes
/// contracted) plus the leaf tokens in order.
pub fn load_tree(line: &str) -> Result<(ParseNode, Vec<String>)> {
    let raw = parse_raw(line)?;
    let mut tokens = Vec::new();
    let node = binarize(&raw, &mut tokens)?;
    Ok((node, tokens))
}

fn parse_raw(line: &str) -> Result<RawTree> {
    let mut items = Vec::new();
    let mut chars = line.chars().peekable();
    let err = |msg: &str| Error::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    fn parse_node(
        chars: &mut std::iter::Peekable<std::str::Chars>,
    ) -> std::result::Result<RawTree, String> {
        // Caller consumed '('.
        let mut children = Vec::new();
        loop {
            match chars.peek() {
                None => return Err("unbalanced parentheses".into()),
                Some(c) if c.is_whitespace() => {
                    chars.next();
                }
                Some('(') => {
                    chars.next();
                    children.push(parse_node(chars)?);
                }
                Some(')') => {
                    chars.next();
                    if children.is_empty() {
                        return Err("empty node".into());
                    }
                    return Ok(RawTree::Node(children));
                }
                Some(_) => {
                    let mut token = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() || c == '(' || c == ')' {
                            break;
                        }
                        token.push(c);
                        chars.next();
                    }
                    children.push(RawTree::Token(token));
                }
            }
        }
    }
    loop {
        match chars.peek() {
            None => break,
            Some(c) if c.is_whitespace() => {
                chars.next();
            }
            Some('(') => {
                chars.next();
                items.push(
                    parse_node(&mut chars).map_err(|msg| Error::Parse { line: 0, msg })?,
                );
            }
            Some(_) => return Err(err("tokens outside parentheses")),
        }
    }
    match items.len() {
        0 => Err(err("empty tree")),
        1 => Ok(items.pop().unwrap()),
        _ => Ok(RawTree::Node(items)),
    }
}

fn binarize(raw: &RawTree, tokens: &mut Vec<String>) -> Result<ParseNode> {
    match raw {
        RawTree::Token(t) => {
            tokens.push(t.clone());
            Ok(ParseNode::Leaf(tokens.len() - 1))
        }
        RawTree::Node(children) => {
            debug_assert!(!children.is_empty());
            let parts: Vec<ParseNode> = children
                .iter()
                .map(|c| binarize(c, tokens))
                .collect::<Result<_>>()?;
            // Fold pairwise from the right: (a b c) -> (a (b c)).
            let mut iter = parts.into_iter().rev();
            let mut node = iter.next().unwrap();
            for left in iter {
                node = ParseNode::Internal(Box::new(left), Box::new(node));
            }
            Ok(node)
        }
    }
}

/// Substitute one uniformly chosen position with a token drawn from the
/// vocabulary's unigram distribution (resampling until it differs).
pub fn corrupt_substitute(
    s: &Sentence,
    vocab: &Vocabulary,
    uniform: bool,
    rng: &mut impl Rng,
) -> Result<(Sentence, usize)> {
    let position = rng.gen_range(0..s.len());
    let original = s.token_ids[position];
    if !vocab.has_substitute_for(original) {
        return Err(Error::VocabularyTooSmall);
    }
    let replacement = loop {
        let cand = if uniform {
            vocab.sample_uniform(rng)
        } else {
            vocab.sample_unigram(rng)
        };
        if cand != original {
            break cand;
        }
    };
    let mut token_ids = s.token_ids.clone();
    token_ids[position] = replacement;
    Ok((Sentence { token_ids }, position))
}

/// Uniform random non-identity permutation of the tokens.
///
/// Returns `Ok(None)` when every token is identical (no distinguishable
/// shuffle exists); errors with `TooShort` below two tokens.
pub fn corrupt_shuffle(s: &Sentence, rng: &mut impl Rng) -> Result<Option<Sentence>> {
    if s.len() < 2 {
        return Err(Error::TooShort);
    }
    if s.token_ids.iter().all(|&t| t == s.token_ids[0]) {
        return Ok(None);
    }
    let mut shuffled = s.token_ids.clone();
    loop {
        // Fisher-Yates.
        for i in (1..shuffled.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        if shuffled != s.token_ids {
            return Ok(Some(Sentence {
                token_ids: shuffled,
            }));
        }
    }
}

/// Mean of the main vectors of the words around `position`.
///
/// `window == 0` means the whole sentence; otherwise only positions
/// within `window` tokens each side count. A single-word sentence (or an
/// empty effective window) yields the zero vector, which downstream sense
/// selection treats as the default-sense case.
pub fn context_vector<'a, F>(
    s: &Sentence,
    position: usize,
    window: usize,
    dim: usize,
    main: F,
) -> Tensor
where
    F: Fn(usize) -> &'a Tensor,
{
    let mut acc = Tensor::zeros(vec![dim]);
    let mut n = 0usize;
    for (i, &tok) in s.token_ids.iter().enumerate() {
        if i == position {
            continue;
        }
        if window > 0 && (i.abs_diff(position)) > window {
            continue;
        }
        acc.add_assign(main(tok));
        n += 1;
    }
    if n == 0 {
        acc
    } else {
        acc.scale(1.0 / n as f64)
    }
}

/// Line-aligned plain corpus (and optional tree file) loaded into memory.
pub struct LoadedCorpus {
    pub sentences: Vec<Sentence>,
    pub trees: Option<Vec<ParseNode>>,
}

/// Load sentences (and trees when given), validating alignment.
pub fn load_corpus(
    corpus_path: &Path,
    tree_path: Option<&Path>,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<LoadedCorpus> {
    let file = File::open(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    let mut sentences = Vec::new();
    let mut raw_lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(corpus_path, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        sentences.push(Sentence::from_tokens(&tokens, vocab)?);
        raw_lines.push(tokens.into_iter().map(str::to_string).collect::<Vec<_>>());
    }
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus(corpus_path.to_path_buf()));
    }

    let trees = match tree_path {
        None => None,
        Some(tp) => {
            let tf = File::open(tp).map_err(|e| Error::io(tp, e))?;
            let mut trees = Vec::new();
            let mut idx = 0usize;
            for (lineno, line) in BufReader::new(tf).lines().enumerate() {
                let line = line.map_err(|e| Error::io(tp, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let (tree, tokens) = load_tree(&line).map_err(|e| match e {
                    Error::Parse { msg, .. } => Error::Parse {
                        line: lineno + 1,
                        msg,
                    },
                    other => other,
                })?;
                if idx >= sentences.len() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "more trees than sentences".into(),
                    });
                }
                if tokens != raw_lines[idx] {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!(
                            "tree leaves do not match sentence {} of the corpus",
                            idx + 1
                        ),
                    });
                }
                trees.push(tree);
                idx += 1;
            }
            if idx != sentences.len() {
                return Err(Error::Parse {
                    line: 0,
                    msg: "fewer trees than sentences".into(),
                });
            }
            Some(trees)
        }
    };

    // Truncate over-long sentences (and their trees) for training cost.
    let mut out_sentences = Vec::with_capacity(sentences.len());
    let mut out_trees = trees.as_ref().map(|_| Vec::with_capacity(sentences.len()));
    for (i, s) in sentences.into_iter().enumerate() {
        if max_len > 0 && s.len() > max_len {
            let truncated = Sentence {
                token_ids: s.token_ids[..max_len].to_vec(),
            };
            out_sentences.push(truncated);
            if let (Some(ts), Some(list)) = (&trees, &mut out_trees) {
                list.push(ts[i].truncate(max_len).expect("non-empty truncation"));
            }
        } else {
            out_sentences.push(s);
            if let (Some(ts), Some(list)) = (&trees, &mut out_trees) {
                list.push(ts[i].clone());
            }
        }
    }
    Ok(LoadedCorpus {
        sentences: out_sentences,
        trees: out_trees,
    })
}
