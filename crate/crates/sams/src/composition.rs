//! Sentence encoders: the pairwise tanh composition layer driven by a
//! parse tree, the LSTM sequence encoder, and sense-level average pooling.

use rand::Rng;

use crate::corpus::ParseNode;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Parameters of `p = tanh(W [x1; x2] + b)` with output dimension equal
/// to the input dimension (the recursion requirement).
#[derive(Clone, Debug)]
pub struct CompositionLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub dim: usize,
}

impl CompositionLayer {
    pub fn init(store: &mut ParamStore, dim: usize, rng: &mut impl Rng) -> Self {
        let w = store.add("comp_w", xavier(dim, 2 * dim, rng));
        let b = store.add("comp_b", Tensor::zeros(vec![dim]));
        CompositionLayer { w, b, dim }
    }
}

/// Gate parameters of a standard LSTM cell acting on `[x_t; h_{t-1}]`,
/// with hidden size equal to the input size.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_i: ParamId,
    pub w_f: ParamId,
    pub w_o: ParamId,
    pub w_c: ParamId,
    pub b_i: ParamId,
    pub b_f: ParamId,
    pub b_o: ParamId,
    pub b_c: ParamId,
    pub dim: usize,
}

impl LstmCell {
    /// Forget-gate bias starts at +1 so early cell state is carried.
    pub fn init(store: &mut ParamStore, dim: usize, rng: &mut impl Rng) -> Self {
        let w_i = store.add("lstm_wi", xavier(dim, 2 * dim, rng));
        let w_f = store.add("lstm_wf", xavier(dim, 2 * dim, rng));
        let w_o = store.add("lstm_wo", xavier(dim, 2 * dim, rng));
        let w_c = store.add("lstm_wc", xavier(dim, 2 * dim, rng));
        let b_i = store.add("lstm_bi", Tensor::zeros(vec![dim]));
        let b_f = store.add(
            "lstm_bf",
            Tensor::from_parts(vec![dim], vec![1.0; dim]),
        );
        let b_o = store.add("lstm_bo", Tensor::zeros(vec![dim]));
        let b_c = store.add("lstm_bc", Tensor::zeros(vec![dim]));
        LstmCell {
            w_i,
            w_f,
            w_o,
            w_c,
            b_i,
            b_f,
            b_o,
            b_c,
            dim,
        }
    }
}

pub(crate) fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_parts(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
    )
}

/// Encoder output: the root vector plus every internal node (or time
/// step) in the order it was produced; `pooled` is set when sense-level
/// average pooling is enabled.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub root: NodeId,
    pub node_vectors: Vec<NodeId>,
    pub pooled: Option<NodeId>,
}

/// One composition: `tanh(W [x1; x2] + b)`.
pub fn compose_pair(
    g: &mut Graph,
    store: &ParamStore,
    layer: &CompositionLayer,
    x1: NodeId,
    x2: NodeId,
) -> Result<NodeId> {
    if g.value(x1).len() != layer.dim || g.value(x2).len() != layer.dim {
        return Err(Error::DimensionMismatch {
            expected: layer.dim,
            got: g.value(x1).len().max(g.value(x2).len()),
        });
    }
    let w = g.param(layer.w, store.value(layer.w));
    let b = g.param(layer.b, store.value(layer.b));
    let x = g.concat(x1, x2);
    let wx = g.matvec(w, x);
    let z = g.add(wx, b);
    Ok(g.tanh(z))
}

/// Post-order application of [`compose_pair`] over a parse tree. A
/// single-leaf tree returns the leaf vector as root with no node vectors.
pub fn encode_recnn(
    g: &mut Graph,
    store: &ParamStore,
    layer: &CompositionLayer,
    leaves: &[NodeId],
    tree: &ParseNode,
) -> Result<Encoding> {
    if tree.leaf_count() != leaves.len() {
        return Err(Error::ShapeMismatch(format!(
            "tree has {} leaves but {} vectors were given",
            tree.leaf_count(),
            leaves.len()
        )));
    }
    let mut node_vectors = Vec::new();
    let root = encode_subtree(g, store, layer, leaves, tree, &mut node_vectors)?;
    Ok(Encoding {
        root,
        node_vectors,
        pooled: None,
    })
}

fn encode_subtree(
    g: &mut Graph,
    store: &ParamStore,
    layer: &CompositionLayer,
    leaves: &[NodeId],
    tree: &ParseNode,
    out: &mut Vec<NodeId>,
) -> Result<NodeId> {
    match tree {
        ParseNode::Leaf(p) => Ok(leaves[*p]),
        ParseNode::Internal(l, r) => {
            let lv = encode_subtree(g, store, layer, leaves, l, out)?;
            let rv = encode_subtree(g, store, layer, leaves, r, out)?;
            let p = compose_pair(g, store, layer, lv, rv)?;
            out.push(p);
            Ok(p)
        }
    }
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_step(
    g: &mut Graph,
    store: &ParamStore,
    cell: &LstmCell,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    if g.value(x).len() != cell.dim || g.value(h_prev).len() != cell.dim {
        return Err(Error::DimensionMismatch {
            expected: cell.dim,
            got: g.value(x).len(),
        });
    }
    let xh = g.concat(x, h_prev);
    let gate = |g: &mut Graph, w: ParamId, b: ParamId| {
        let wn = g.param(w, store.value(w));
        let bn = g.param(b, store.value(b));
        let wx = g.matvec(wn, xh);
        g.add(wx, bn)
    };
    let i_pre = gate(g, cell.w_i, cell.b_i);
    let i = g.sigmoid(i_pre);
    let f_pre = gate(g, cell.w_f, cell.b_f);
    let f = g.sigmoid(f_pre);
    let o_pre = gate(g, cell.w_o, cell.b_o);
    let o = g.sigmoid(o_pre);
    let c_tilde_pre = gate(g, cell.w_c, cell.b_c);
    let c_tilde = g.tanh(c_tilde_pre);
    let fc = g.mul(f, c_prev);
    let ic = g.mul(i, c_tilde);
    let c = g.add(fc, ic);
    let tc = g.tanh(c);
    let h = g.mul(o, tc);
    Ok((h, c))
}

/// Left-to-right fold of [`lstm_step`] starting from zero states; the
/// root is the final hidden state and every `h_t` is a node vector.
pub fn encode_rnn(
    g: &mut Graph,
    store: &ParamStore,
    cell: &LstmCell,
    inputs: &[NodeId],
) -> Result<Encoding> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut h = g.input(Tensor::zeros(vec![cell.dim]));
    let mut c = g.input(Tensor::zeros(vec![cell.dim]));
    let mut node_vectors = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let (nh, nc) = lstm_step(g, store, cell, x, h, c)?;
        h = nh;
        c = nc;
        node_vectors.push(h);
    }
    Ok(Encoding {
        root: h,
        node_vectors,
        pooled: None,
    })
}

/// Elementwise mean of the per-word input vectors; the caller adds it to
/// the root to form the final sentence representation.
pub fn average_pool(g: &mut Graph, inputs: &[NodeId]) -> Result<NodeId> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(g.mean_many(inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::finite_diff_check;
    use crate::rng::{stream, tags};

    fn input_vec(g: &mut Graph, data: Vec<f64>) -> NodeId {
        g.input(Tensor::vector(data).unwrap())
    }

    #[test]
    fn compose_zero_weights_gives_zero() {
        let mut store = ParamStore::new();
        let layer = CompositionLayer {
            w: store.add("w", Tensor::zeros(vec![2, 4])),
            b: store.add("b", Tensor::zeros(vec![2])),
            dim: 2,
        };
        let mut g = Graph::new();
        let x1 = input_vec(&mut g, vec![0.7, -0.3]);
        let x2 = input_vec(&mut g, vec![1.0, 2.0]);
        let p = compose_pair(&mut g, &store, &layer, x1, x2).unwrap();
        assert_eq!(g.value(p).data(), &[0.0, 0.0]);
    }

    #[test]
    fn compose_scalar_case() {
        // d=1, W=[1,1], b=0, x1=x2=0.5 -> tanh(1).
        let mut store = ParamStore::new();
        let layer = CompositionLayer {
            w: store.add("w", Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap()),
            b: store.add("b", Tensor::zeros(vec![1])),
            dim: 1,
        };
        let mut g = Graph::new();
        let x1 = input_vec(&mut g, vec![0.5]);
        let x2 = input_vec(&mut g, vec![0.5]);
        let p = compose_pair(&mut g, &store, &layer, x1, x2).unwrap();
        assert!((g.value(p).data()[0] - 0.76159416).abs() < 1e-8);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let mut store = ParamStore::new();
        let layer = CompositionLayer {
            w: store.add("w", Tensor::zeros(vec![2, 4])),
            b: store.add("b", Tensor::zeros(vec![2])),
            dim: 2,
        };
        let mut g = Graph::new();
        let x1 = input_vec(&mut g, vec![0.7]);
        let x2 = input_vec(&mut g, vec![1.0, 2.0]);
        assert!(matches!(
            compose_pair(&mut g, &store, &layer, x1, x2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compose_gradient_matches_finite_differences() {
        let mut rng = stream(11, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 3, &mut rng);
        let ids = [layer.w, layer.b];
        let err = finite_diff_check(
            &mut store,
            &ids,
            |s| {
                let mut g = Graph::new();
                let x1 = g.input(Tensor::vector(vec![0.3, -0.8, 0.5]).unwrap());
                let x2 = g.input(Tensor::vector(vec![-0.2, 0.4, 0.9]).unwrap());
                let p = compose_pair(&mut g, s, &layer, x1, x2).unwrap();
                let loss = g.sum_all(p);
                (g.scalar(loss), g.backward(loss))
            },
            1e-5,
        );
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn recnn_single_leaf_is_identity() {
        let mut rng = stream(3, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 2, &mut rng);
        let mut g = Graph::new();
        let leaf = input_vec(&mut g, vec![0.1, 0.2]);
        let enc = encode_recnn(&mut g, &store, &layer, &[leaf], &ParseNode::Leaf(0)).unwrap();
        assert_eq!(enc.root, leaf);
        assert!(enc.node_vectors.is_empty());
    }

    #[test]
    fn recnn_two_leaves_is_one_composition() {
        let mut rng = stream(4, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 2, &mut rng);
        let tree = ParseNode::Internal(Box::new(ParseNode::Leaf(0)), Box::new(ParseNode::Leaf(1)));
        let mut g = Graph::new();
        let l0 = input_vec(&mut g, vec![0.1, 0.2]);
        let l1 = input_vec(&mut g, vec![-0.4, 0.6]);
        let enc = encode_recnn(&mut g, &store, &layer, &[l0, l1], &tree).unwrap();
        let direct = compose_pair(&mut g, &store, &layer, l0, l1).unwrap();
        assert_eq!(g.value(enc.root).data(), g.value(direct).data());
        assert_eq!(enc.node_vectors.len(), 1);
    }

    #[test]
    fn recnn_right_branching_matches_hand_unroll() {
        let mut rng = stream(5, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 2, &mut rng);
        let tree = ParseNode::right_linear(3);
        let xs = [
            vec![0.1, -0.2],
            vec![0.3, 0.4],
            vec![-0.5, 0.6],
        ];
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = xs.iter().map(|x| input_vec(&mut g, x.clone())).collect();
        let enc = encode_recnn(&mut g, &store, &layer, &leaves, &tree).unwrap();

        // Hand unroll: compose(x1, compose(x2, x3)).
        let inner = compose_pair(&mut g, &store, &layer, leaves[1], leaves[2]).unwrap();
        let outer = compose_pair(&mut g, &store, &layer, leaves[0], inner).unwrap();
        for (a, b) in g.value(enc.root).data().iter().zip(g.value(outer).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(enc.node_vectors.len(), 2);
    }

    #[test]
    fn recnn_is_order_sensitive() {
        // Left-linear vs right-linear composition over the same leaves
        // must differ for a generic layer.
        let mut rng = stream(6, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 3, &mut rng);
        let right = ParseNode::right_linear(3);
        let left = ParseNode::Internal(
            Box::new(ParseNode::Internal(
                Box::new(ParseNode::Leaf(0)),
                Box::new(ParseNode::Leaf(1)),
            )),
            Box::new(ParseNode::Leaf(2)),
        );
        let xs = [
            vec![0.4, -0.2, 0.9],
            vec![0.1, 0.8, -0.3],
            vec![-0.6, 0.2, 0.5],
        ];
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = xs.iter().map(|x| input_vec(&mut g, x.clone())).collect();
        let r = encode_recnn(&mut g, &store, &layer, &leaves, &right).unwrap();
        let l = encode_recnn(&mut g, &store, &layer, &leaves, &left).unwrap();
        let diff: f64 = g
            .value(r.root)
            .data()
            .iter()
            .zip(g.value(l.root).data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-6, "tree shape must matter");
    }

    #[test]
    fn encoder_outputs_stay_in_tanh_range() {
        let mut rng = stream(7, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 4, &mut rng);
        let tree = ParseNode::right_linear(5);
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = (0..5)
            .map(|i| {
                let data = (0..4).map(|j| ((i * 7 + j * 3) as f64 * 0.931).sin()).collect();
                g.input(Tensor::vector(data).unwrap())
            })
            .collect();
        let enc = encode_recnn(&mut g, &store, &layer, &leaves, &tree).unwrap();
        for &n in &enc.node_vectors {
            assert!(g.value(n).data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn lstm_zero_cell_gives_zero_state() {
        let mut store = ParamStore::new();
        let dim = 3;
        let zero_mat = || Tensor::zeros(vec![dim, 2 * dim]);
        let zero_vec = || Tensor::zeros(vec![dim]);
        let cell = LstmCell {
            w_i: store.add("wi", zero_mat()),
            w_f: store.add("wf", zero_mat()),
            w_o: store.add("wo", zero_mat()),
            w_c: store.add("wc", zero_mat()),
            b_i: store.add("bi", zero_vec()),
            b_f: store.add("bf", zero_vec()),
            b_o: store.add("bo", zero_vec()),
            b_c: store.add("bc", zero_vec()),
            dim,
        };
        let mut g = Graph::new();
        let x = input_vec(&mut g, vec![0.5, -0.5, 1.0]);
        let h0 = g.input(Tensor::zeros(vec![dim]));
        let c0 = g.input(Tensor::zeros(vec![dim]));
        let (h, c) = lstm_step(&mut g, &store, &cell, x, h0, c0).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0, 0.0]);
        assert_eq!(g.value(c).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn lstm_carry_behavior_with_saturated_gates() {
        // f ≈ 1 and i ≈ 0 carries the previous cell state through.
        let mut store = ParamStore::new();
        let dim = 2;
        let zero_mat = || Tensor::zeros(vec![dim, 2 * dim]);
        let cell = LstmCell {
            w_i: store.add("wi", zero_mat()),
            w_f: store.add("wf", zero_mat()),
            w_o: store.add("wo", zero_mat()),
            w_c: store.add("wc", zero_mat()),
            b_i: store.add("bi", Tensor::vector(vec![-30.0, -30.0]).unwrap()),
            b_f: store.add("bf", Tensor::vector(vec![30.0, 30.0]).unwrap()),
            b_o: store.add("bo", Tensor::zeros(vec![dim])),
            b_c: store.add("bc", Tensor::zeros(vec![dim])),
            dim,
        };
        let mut g = Graph::new();
        let x = input_vec(&mut g, vec![0.3, 0.4]);
        let h0 = g.input(Tensor::zeros(vec![dim]));
        let c0 = g.input(Tensor::vector(vec![0.7, -0.2]).unwrap());
        let (_, c) = lstm_step(&mut g, &store, &cell, x, h0, c0).unwrap();
        assert!((g.value(c).data()[0] - 0.7).abs() < 1e-9);
        assert!((g.value(c).data()[1] + 0.2).abs() < 1e-9);
    }

    #[test]
    fn rnn_single_step_equals_lstm_step() {
        let mut rng = stream(9, tags::INIT, 0);
        let mut store = ParamStore::new();
        let cell = LstmCell::init(&mut store, 2, &mut rng);
        let mut g = Graph::new();
        let x = input_vec(&mut g, vec![0.2, -0.7]);
        let enc = encode_rnn(&mut g, &store, &cell, &[x]).unwrap();
        let h0 = g.input(Tensor::zeros(vec![2]));
        let c0 = g.input(Tensor::zeros(vec![2]));
        let (h, _) = lstm_step(&mut g, &store, &cell, x, h0, c0).unwrap();
        assert_eq!(g.value(enc.root).data(), g.value(h).data());
    }

    #[test]
    fn rnn_three_steps_match_hand_unroll() {
        let mut rng = stream(10, tags::INIT, 0);
        let mut store = ParamStore::new();
        let cell = LstmCell::init(&mut store, 2, &mut rng);
        let xs = [vec![0.2, -0.7], vec![0.5, 0.1], vec![-0.9, 0.4]];
        let mut g = Graph::new();
        let inputs: Vec<NodeId> = xs.iter().map(|x| input_vec(&mut g, x.clone())).collect();
        let enc = encode_rnn(&mut g, &store, &cell, &inputs).unwrap();

        let mut h = g.input(Tensor::zeros(vec![2]));
        let mut c = g.input(Tensor::zeros(vec![2]));
        for &x in &inputs {
            let (nh, nc) = lstm_step(&mut g, &store, &cell, x, h, c).unwrap();
            h = nh;
            c = nc;
        }
        for (a, b) in g.value(enc.root).data().iter().zip(g.value(h).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(enc.node_vectors.len(), 3);
    }

    #[test]
    fn lstm_gradients_through_ten_steps() {
        let mut rng = stream(12, tags::INIT, 0);
        let mut store = ParamStore::new();
        let cell = LstmCell::init(&mut store, 2, &mut rng);
        let ids = [
            cell.w_i, cell.w_f, cell.w_o, cell.w_c, cell.b_i, cell.b_f, cell.b_o, cell.b_c,
        ];
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|t| vec![(t as f64 * 0.37).sin(), (t as f64 * 0.71).cos() * 0.5])
            .collect();
        let err = finite_diff_check(
            &mut store,
            &ids,
            |s| {
                let mut g = Graph::new();
                let inputs: Vec<NodeId> = xs
                    .iter()
                    .map(|x| g.input(Tensor::vector(x.clone()).unwrap()))
                    .collect();
                let enc = encode_rnn(&mut g, s, &cell, &inputs).unwrap();
                let loss = g.sum_all(enc.root);
                (g.scalar(loss), g.backward(loss))
            },
            1e-5,
        );
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn recnn_backward_matches_finite_differences() {
        let mut rng = stream(13, tags::INIT, 0);
        let mut store = ParamStore::new();
        let layer = CompositionLayer::init(&mut store, 2, &mut rng);
        let leaf0 = store.add("leaf0", Tensor::vector(vec![0.3, -0.4]).unwrap());
        let leaf1 = store.add("leaf1", Tensor::vector(vec![0.8, 0.1]).unwrap());
        let leaf2 = store.add("leaf2", Tensor::vector(vec![-0.5, 0.6]).unwrap());
        let tree = ParseNode::right_linear(3);
        let ids = [layer.w, layer.b, leaf0, leaf1, leaf2];
        let err = finite_diff_check(
            &mut store,
            &ids,
            |s| {
                let mut g = Graph::new();
                let leaves = vec![
                    g.param(leaf0, s.value(leaf0)),
                    g.param(leaf1, s.value(leaf1)),
                    g.param(leaf2, s.value(leaf2)),
                ];
                let enc = encode_recnn(&mut g, s, &layer, &leaves, &tree).unwrap();
                let loss = g.sum_all(enc.root);
                (g.scalar(loss), g.backward(loss))
            },
            1e-5,
        );
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn average_pool_mean_and_permutation_invariance() {
        let mut g = Graph::new();
        let a = input_vec(&mut g, vec![1.0, 0.0]);
        let b = input_vec(&mut g, vec![0.0, 1.0]);
        let p = average_pool(&mut g, &[a, b]).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5]);
        let q = average_pool(&mut g, &[b, a]).unwrap();
        assert_eq!(g.value(q).data(), g.value(p).data());

        let single = average_pool(&mut g, &[a]).unwrap();
        assert_eq!(g.value(single).data(), &[1.0, 0.0]);

        assert!(matches!(average_pool(&mut g, &[]), Err(Error::EmptyInput)));
    }
}
