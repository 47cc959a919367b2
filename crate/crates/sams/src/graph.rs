//! Reverse-mode gradient propagation over an eagerly evaluated tape.
//!
//! Forward values are computed at node construction; `backward` sweeps the
//! tape once in reverse and accumulates gradients into the parameter
//! leaves. Node construction order gives a valid topological order, and
//! gradients are summed in fixed index order, so runs are bit-identical
//! for identical inputs.

use std::collections::{BTreeMap, HashMap};

use crate::error::Result;
use crate::optim::ParamId;
use crate::tensor::{sigmoid, softmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Constant leaf; no gradient is kept for it.
    Input,
    /// Parameter leaf; backward deposits its gradient under the id.
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    /// Matrix [r,c] times vector [c].
    MatVec(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Square(NodeId),
    Dot(NodeId, NodeId),
    Norm(NodeId),
    Cosine(NodeId, NodeId),
    Softmax(NodeId),
    SumAll(NodeId),
    SumMany(Vec<NodeId>),
    MeanMany(Vec<NodeId>),
    /// Vector scaled by a `[1]` node.
    MulScalar(NodeId, NodeId),
    /// Collect `[1]` nodes into one vector.
    StackScalars(Vec<NodeId>),
    /// weights [n] against n vectors [d]: Σ wᵢ·vᵢ.
    MixVectors(NodeId, Vec<NodeId>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients keyed by parameter, in parameter-id order.
#[derive(Debug, Default, Clone)]
pub struct GradMap {
    grads: BTreeMap<ParamId, Tensor>,
}

impl GradMap {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    fn accumulate(&mut self, id: ParamId, grad: &Tensor) {
        match self.grads.get_mut(&id) {
            Some(g) => g.add_assign(grad),
            None => {
                self.grads.insert(id, grad.clone());
            }
        }
    }

    /// Fold another map into this one (fixed key order).
    pub fn merge(&mut self, other: &GradMap) {
        for (id, g) in other.iter() {
            self.accumulate(id, g);
        }
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.item()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Parameter leaf. The first call for an id fixes its value; later
    /// calls return the same node so shared weights stay shared.
    pub fn param(&mut self, id: ParamId, value: &Tensor) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let n = self.push(value.clone(), Op::Param(id));
        self.param_nodes.insert(id, n);
        n
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).mul(self.value(b));
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a).scale(k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_const(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = Tensor::from_parts(
            self.value(a).shape().to_vec(),
            self.value(a).data().iter().map(|x| x + k).collect(),
        );
        self.push(v, Op::AddConst(a))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let v = self.value(w).matvec(self.value(x));
        self.push(v, Op::MatVec(w, x))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = Tensor::concat(self.value(a), self.value(b));
        self.push(v, Op::Concat(a, b))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = crate::tensor::tanh_apply(self.value(a));
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = crate::tensor::sigmoid_apply(self.value(a));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::from_parts(
            self.value(a).shape().to_vec(),
            self.value(a).data().iter().map(|x| x.max(0.0)).collect(),
        );
        self.push(v, Op::Relu(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::from_parts(
            self.value(a).shape().to_vec(),
            self.value(a).data().iter().map(|x| x * x).collect(),
        );
        self.push(v, Op::Square(a))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).dot(self.value(b)));
        self.push(v, Op::Dot(a, b))
    }

    pub fn norm(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).norm());
        self.push(v, Op::Norm(a))
    }

    /// Cosine similarity node; errors on zero-norm operands.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let c = crate::tensor::cosine(self.value(a), self.value(b))?;
        Ok(self.push(Tensor::scalar(c), Op::Cosine(a, b)))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::SumAll(a))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn sum_many(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "sum_many: empty input");
        let mut acc = self.value(ids[0]).clone();
        for &n in &ids[1..] {
            acc.add_assign(self.value(n));
        }
        self.push(acc, Op::SumMany(ids.to_vec()))
    }

    /// Elementwise mean of same-shaped nodes.
    pub fn mean_many(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "mean_many: empty input");
        let mut acc = self.value(ids[0]).clone();
        for &n in &ids[1..] {
            acc.add_assign(self.value(n));
        }
        let v = acc.scale(1.0 / ids.len() as f64);
        self.push(v, Op::MeanMany(ids.to_vec()))
    }

    pub fn mul_scalar(&mut self, v: NodeId, s: NodeId) -> NodeId {
        debug_assert_eq!(self.value(s).len(), 1);
        let out = self.value(v).scale(self.value(s).item());
        self.push(out, Op::MulScalar(v, s))
    }

    pub fn stack_scalars(&mut self, ids: &[NodeId]) -> NodeId {
        let data: Vec<f64> = ids.iter().map(|&n| self.value(n).item()).collect();
        self.push(
            Tensor::from_parts(vec![data.len()], data),
            Op::StackScalars(ids.to_vec()),
        )
    }

    pub fn mix_vectors(&mut self, weights: NodeId, vectors: &[NodeId]) -> NodeId {
        assert_eq!(self.value(weights).len(), vectors.len());
        let d = self.value(vectors[0]).len();
        let mut out = Tensor::zeros(vec![d]);
        for (i, &v) in vectors.iter().enumerate() {
            let w = self.value(weights).data()[i];
            for (o, x) in out.data_mut().iter_mut().zip(self.value(v).data()) {
                *o += w * x;
            }
        }
        self.push(out, Op::MixVectors(weights, vectors.to_vec()))
    }

    /// Reverse sweep from a scalar root; returns gradients per parameter.
    pub fn backward(&self, root: NodeId) -> GradMap {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        let mut out = GradMap::default();
        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, g.mul(self.value(*b)));
                    acc(&mut grads, *b, g.mul(self.value(*a)));
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g.scale(*k)),
                Op::AddConst(a) => acc(&mut grads, *a, g),
                Op::MatVec(w, x) => {
                    acc(&mut grads, *w, Tensor::outer(&g, self.value(*x)));
                    acc(&mut grads, *x, self.value(*w).matvec_t(&g));
                }
                Op::Concat(a, b) => {
                    let la = self.value(*a).len();
                    let ga = Tensor::from_parts(vec![la], g.data()[..la].to_vec());
                    let gb =
                        Tensor::from_parts(vec![g.len() - la], g.data()[la..].to_vec());
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let d = Tensor::from_parts(
                        y.shape().to_vec(),
                        y.data()
                            .iter()
                            .zip(g.data())
                            .map(|(t, gi)| gi * (1.0 - t * t))
                            .collect(),
                    );
                    acc(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let d = Tensor::from_parts(
                        y.shape().to_vec(),
                        y.data()
                            .iter()
                            .zip(g.data())
                            .map(|(s, gi)| gi * s * (1.0 - s))
                            .collect(),
                    );
                    acc(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let d = Tensor::from_parts(
                        x.shape().to_vec(),
                        x.data()
                            .iter()
                            .zip(g.data())
                            .map(|(xi, gi)| if *xi > 0.0 { *gi } else { 0.0 })
                            .collect(),
                    );
                    acc(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let x = self.value(*a);
                    let d = Tensor::from_parts(
                        x.shape().to_vec(),
                        x.data()
                            .iter()
                            .zip(g.data())
                            .map(|(xi, gi)| 2.0 * xi * gi)
                            .collect(),
                    );
                    acc(&mut grads, *a, d);
                }
                Op::Dot(a, b) => {
                    let s = g.item();
                    acc(&mut grads, *a, self.value(*b).scale(s));
                    acc(&mut grads, *b, self.value(*a).scale(s));
                }
                Op::Norm(a) => {
                    let n = self.nodes[i].value.item();
                    if n > 0.0 {
                        acc(&mut grads, *a, self.value(*a).scale(g.item() / n));
                    }
                    // Subgradient 0 at the origin.
                }
                Op::Cosine(a, b) => {
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    let (na, nb) = (va.norm(), vb.norm());
                    let c = self.nodes[i].value.item();
                    let s = g.item();
                    // dc/da = b/(|a||b|) − c·a/|a|²
                    let da = vb.scale(1.0 / (na * nb)).sub(&va.scale(c / (na * na)));
                    let db = va.scale(1.0 / (na * nb)).sub(&vb.scale(c / (nb * nb)));
                    acc(&mut grads, *a, da.scale(s));
                    acc(&mut grads, *b, db.scale(s));
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[i].value;
                    let gy: f64 = y.data().iter().zip(g.data()).map(|(yi, gi)| yi * gi).sum();
                    let d = Tensor::from_parts(
                        y.shape().to_vec(),
                        y.data()
                            .iter()
                            .zip(g.data())
                            .map(|(yi, gi)| yi * (gi - gy))
                            .collect(),
                    );
                    acc(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let s = g.item();
                    let la = self.value(*a).len();
                    acc(
                        &mut grads,
                        *a,
                        Tensor::from_parts(vec![la], vec![s; la]),
                    );
                }
                Op::SumMany(ids) => {
                    for &n in ids {
                        acc(&mut grads, n, g.clone());
                    }
                }
                Op::MeanMany(ids) => {
                    let gk = g.scale(1.0 / ids.len() as f64);
                    for &n in ids {
                        acc(&mut grads, n, gk.clone());
                    }
                }
                Op::MulScalar(v, s) => {
                    let sv = self.value(*s).item();
                    acc(&mut grads, *v, g.scale(sv));
                    acc(
                        &mut grads,
                        *s,
                        Tensor::scalar(g.dot(self.value(*v))),
                    );
                }
                Op::StackScalars(ids) => {
                    for (k, &n) in ids.iter().enumerate() {
                        acc(&mut grads, n, Tensor::scalar(g.data()[k]));
                    }
                }
                Op::MixVectors(weights, vectors) => {
                    let w = self.value(*weights);
                    let mut gw = vec![0.0; vectors.len()];
                    for (k, &v) in vectors.iter().enumerate() {
                        gw[k] = g.dot(self.value(v));
                        acc(&mut grads, v, g.scale(w.data()[k]));
                    }
                    acc(
                        &mut grads,
                        *weights,
                        Tensor::from_parts(vec![gw.len()], gw),
                    );
                }
            }
        }
        out
    }
}

fn acc(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Convenience: σ applied to a plain scalar (used by prediction heads).
pub fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}
