//! Dense row-major tensors (vectors and matrices) in 64-bit precision.
//!
//! Everything the encoders need is covered by 1-D vectors and 2-D
//! matrices; there is no broadcasting beyond that.

use crate::error::{Error, Result};

/// A dense, row-major tensor of `f64` values.
///
/// Invariants: `shape.iter().product() == data.len()` and every entry is
/// finite. Public constructors reject NaN/Inf; arithmetic in this module
/// preserves finiteness for finite inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() || shape.iter().any(|&e| e == 0) {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} does not describe {} elements",
                shape,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor construction"));
        }
        Ok(Tensor { shape, data })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let d = data.len();
        Tensor::new(vec![d], data)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_parts(vec![1], vec![v])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single element of a `[1]` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        assert!(self.same_shape(other), "add: shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Tensor::from_parts(self.shape.clone(), data)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        assert!(self.same_shape(other), "sub: shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Tensor::from_parts(self.shape.clone(), data)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        assert!(self.same_shape(other), "mul: shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Tensor::from_parts(self.shape.clone(), data)
    }

    pub fn scale(&self, k: f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|v| v * k).collect())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert!(self.same_shape(other), "add_assign: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "dot: length mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Matrix-vector product; `self` is `[r, c]`, `x` is `[c]`.
    pub fn matvec(&self, x: &Tensor) -> Tensor {
        assert_eq!(self.shape.len(), 2, "matvec: lhs must be a matrix");
        let (r, c) = (self.shape[0], self.shape[1]);
        assert_eq!(x.len(), c, "matvec: dimension mismatch");
        let mut out = vec![0.0; r];
        for i in 0..r {
            let row = &self.data[i * c..(i + 1) * c];
            out[i] = row.iter().zip(&x.data).map(|(w, v)| w * v).sum();
        }
        Tensor::from_parts(vec![r], out)
    }

    /// Transposed matrix-vector product; `self` is `[r, c]`, `y` is `[r]`.
    pub fn matvec_t(&self, y: &Tensor) -> Tensor {
        assert_eq!(self.shape.len(), 2, "matvec_t: lhs must be a matrix");
        let (r, c) = (self.shape[0], self.shape[1]);
        assert_eq!(y.len(), r, "matvec_t: dimension mismatch");
        let mut out = vec![0.0; c];
        for i in 0..r {
            let yi = y.data[i];
            let row = &self.data[i * c..(i + 1) * c];
            for (o, w) in out.iter_mut().zip(row) {
                *o += yi * w;
            }
        }
        Tensor::from_parts(vec![c], out)
    }

    /// Outer product `y xᵀ` as an `[r, c]` matrix.
    pub fn outer(y: &Tensor, x: &Tensor) -> Tensor {
        let (r, c) = (y.len(), x.len());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let yi = y.data[i];
            for j in 0..c {
                out[i * c + j] = yi * x.data[j];
            }
        }
        Tensor::from_parts(vec![r, c], out)
    }

    pub fn concat(a: &Tensor, b: &Tensor) -> Tensor {
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Tensor::from_parts(vec![a.len() + b.len()], data)
    }

    /// Elementwise mean of a non-empty set of same-shaped tensors.
    pub fn mean_of(tensors: &[&Tensor]) -> Result<Tensor> {
        if tensors.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = Tensor::zeros(tensors[0].shape.to_vec());
        for t in tensors {
            acc.add_assign(t);
        }
        Ok(acc.scale(1.0 / tensors.len() as f64))
    }
}

/// Cosine similarity of two equal-length vectors.
///
/// Errors with `ZeroVector` when either argument has zero norm.
pub fn cosine(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.dot(b) / (na * nb))
}

/// Cosine with the convention that any zero vector scores 0.0.
///
/// Sense selection and the soft-max gate use this so that degenerate
/// contexts and untouched centroids fall through to the default sense.
pub fn cosine_or_zero(a: &Tensor, b: &Tensor) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(b) / (na * nb)
    }
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax(scores: &Tensor) -> Tensor {
    let max = scores
        .data()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.data().iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::from_parts(
        scores.shape().to_vec(),
        exps.into_iter().map(|e| e / sum).collect(),
    )
}

/// Elementwise tanh.
pub fn tanh_apply(x: &Tensor) -> Tensor {
    Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|v| v.tanh()).collect())
}

/// Elementwise logistic sigmoid.
pub fn sigmoid_apply(x: &Tensor) -> Tensor {
    Tensor::from_parts(
        x.shape().to_vec(),
        x.data().iter().map(|v| sigmoid(*v)).collect(),
    )
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
