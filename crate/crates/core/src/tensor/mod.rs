//! Dense row-major tensors and the reverse-mode tape that differentiates them.
//!
//! The engine is intentionally small. Every value that flows through the tape
//! is a matrix (`rows × cols`); vectors are `1 × n` rows and batches stack
//! examples along the row axis. The operation set is exactly what the
//! recurrent encoders, the attention sites, and the loss need:
//!
//! * [`Tape::matmul`], [`Tape::add`], [`Tape::add_bias`], [`Tape::sub`],
//!   [`Tape::mul`], [`Tape::tanh`], [`Tape::sigmoid`], [`Tape::one_minus`]
//! * [`Tape::softmax_masked`], [`Tape::cross_entropy`], [`Tape::sum`]
//! * layout helpers: [`Tape::concat_cols`], [`Tape::stack_rows`],
//!   [`Tape::gather_rows`], [`Tape::reshape`], [`Tape::weighted_row_sum`],
//!   [`Tape::masked_update`], [`Tape::mul_const`]
//!
//! Broadcasting exists in exactly one place: [`Tape::add_bias`] adds a
//! `1 × n` row to every row of an `m × n` matrix. Any other shape mismatch is
//! a [`TensorError::Shape`].

mod gradcheck;
mod scalar;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use scalar::{Precision, Scalar};
pub use tape::{Tape, Var};

use thiserror::Error;

/// Errors raised by tensor construction and tape operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} holds {expected} values but {actual} were given")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: mask row {row} has no live entries")]
    InvalidMask { op: &'static str, row: usize },
    #[error("{op}: index {index} out of range (bound {bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// A dense array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// `rows × cols` matrix from row-major values.
    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// A `1 × n` row.
    pub fn row_vector(data: Vec<T>) -> Self {
        Self {
            shape: vec![1, data.len()],
            data,
        }
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(
            shape.to_vec(),
            values.iter().map(|&v| T::from_f64(v).unwrap()).collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
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

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interpret as a matrix; rank-1 tensors are single rows, scalars `1 × 1`.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.len() {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            2 => (self.shape[0], self.shape[1]),
            _ => {
                let cols = *self.shape.last().unwrap();
                (self.data.len() / cols.max(1), cols)
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert between precisions.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64().unwrap()).collect()
    }

    pub fn scalar_value(&self) -> T {
        self.data[0]
    }
}
