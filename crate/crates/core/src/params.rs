//! Named parameter arrays and their per-tape bindings.

use rand::Rng;

use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Owns every learned array of a model, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    /// Matrix drawn from `init`.
    pub fn add_init(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        init: Init,
        rng: &mut impl Rng,
    ) -> ParamId {
        self.add_uniform(name, shape, init.range(shape), rng)
    }

    /// Matrix drawn uniformly from `[-scale, scale]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        scale: f64,
        rng: &mut impl Rng,
    ) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::lit(rng.gen_range(-scale..=scale)))
            .collect();
        self.add(name, Tensor::new(shape.to_vec(), data).unwrap())
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    /// Record every parameter as a leaf of `tape`.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Binding {
        Binding {
            vars: self
                .tensors
                .iter()
                .map(|t| tape.leaf(t.clone(), requires_grad))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}

/// How weight matrices are drawn. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `[-a, a]`.
    Uniform(f64),
    /// Uniform in `±√(6 / (fan_in + fan_out))`.
    Glorot,
}

impl Init {
    pub fn range(self, shape: &[usize]) -> f64 {
        match self {
            Init::Uniform(a) => a,
            Init::Glorot => {
                let fan: usize = match shape {
                    [] => 1,
                    [n] => 2 * n,
                    [a, b, ..] => a + b,
                };
                (6.0 / fan as f64).sqrt()
            }
        }
    }
}

/// Tape variables for a [`ParamStore`], valid for the tape they were bound to.
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    /// Variables already on a tape, one per parameter in store order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients for every parameter after `tape.backward`; parameters the
    /// loss does not reach get zeros.
    pub fn gradients<T: Scalar>(&self, tape: &Tape<T>) -> Vec<Tensor<T>> {
        self.vars
            .iter()
            .map(|&v| {
                tape.grad(v)
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
            })
            .collect()
    }
}
