use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor. Only rank 1 and rank 2 are used by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// `y = W x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols());
        (0..self.rows())
            .map(|i| self.row(i).iter().zip(x).fold(T::zero(), |acc, (&w, &v)| acc + w * v))
            .collect()
    }

    /// `out += Wᵀ dy`.
    pub fn matvec_t_acc(&self, dy: &[T], out: &mut [T]) {
        debug_assert_eq!(dy.len(), self.rows());
        for (i, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += w * g;
            }
        }
    }

    /// `W += dy ⊗ x`.
    pub fn outer_acc(&mut self, dy: &[T], x: &[T]) {
        debug_assert_eq!(dy.len(), self.rows());
        for (i, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            for (w, &v) in self.row_mut(i).iter_mut().zip(x) {
                *w += g * v;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: T) {
        for a in &mut self.data {
            *a *= k;
        }
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|a| *a = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Serialized form of a named tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(softmax(x))[i]` without forming the probabilities.
pub fn log_softmax_at<T: Scalar>(x: &[T], i: usize) -> T {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = x.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    x[i] - lse
}

pub fn argmax<T: Scalar>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}
