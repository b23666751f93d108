//! GRU cells, stacks of them, and sequence runners.
//!
//! The cell uses the update-gate convention
//!
//! ```text
//! z = σ(x·W_z + h·U_z + b_z)
//! r = σ(x·W_r + h·U_r + b_r)
//! h̃ = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```
//!
//! All values are row-major with one example per row, so the same code runs
//! a single sequence (`1 × d`) or a padded batch (`B × d`). Padding is
//! expressed as per-row liveness masks; a dead row keeps its previous state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{Binding, Init, ParamId, ParamStore};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Parameter ids of one GRU cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
}

/// A GRU cell's parameters recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruVars {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
}

/// Initial update-gate bias: the cell starts out mostly keeping its state.
pub const UPDATE_BIAS: f64 = -1.0;
/// Initial reset-gate bias: the candidate starts out mostly seeing the state.
pub const RESET_BIAS: f64 = 1.0;

impl GruParams {
    /// Register a cell: matrices drawn from `init`, gate biases at
    /// [`UPDATE_BIAS`] and [`RESET_BIAS`], candidate bias zero.
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let (i, h) = (input_dim, hidden_dim);
        Self {
            input_dim,
            hidden_dim,
            w_z: store.add_init(format!("{prefix}.w_z"), &[i, h], init, rng),
            w_r: store.add_init(format!("{prefix}.w_r"), &[i, h], init, rng),
            w_h: store.add_init(format!("{prefix}.w_h"), &[i, h], init, rng),
            u_z: store.add_init(format!("{prefix}.u_z"), &[h, h], init, rng),
            u_r: store.add_init(format!("{prefix}.u_r"), &[h, h], init, rng),
            u_h: store.add_init(format!("{prefix}.u_h"), &[h, h], init, rng),
            b_z: store.add(
                format!("{prefix}.b_z"),
                Tensor::filled(&[1, h], T::lit(UPDATE_BIAS)),
            ),
            b_r: store.add(
                format!("{prefix}.b_r"),
                Tensor::filled(&[1, h], T::lit(RESET_BIAS)),
            ),
            b_h: store.add_zeros(format!("{prefix}.b_h"), &[1, h]),
        }
    }

    /// Look the cell up by name prefix in a store (e.g. after loading).
    pub fn find<T: Scalar>(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let get = |s: &str| {
            let name = format!("{prefix}.{s}");
            store
                .find(&name)
                .ok_or_else(|| Error::Format(format!("missing parameter {name}")))
        };
        let w_z = get("w_z")?;
        let shape = store.get(w_z).shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::Format(format!("{prefix}.w_z must be a matrix")));
        }
        let p = Self {
            input_dim: shape[0],
            hidden_dim: shape[1],
            w_z,
            w_r: get("w_r")?,
            w_h: get("w_h")?,
            u_z: get("u_z")?,
            u_r: get("u_r")?,
            u_h: get("u_h")?,
            b_z: get("b_z")?,
            b_r: get("b_r")?,
            b_h: get("b_h")?,
        };
        p.validate(store)?;
        Ok(p)
    }

    /// All six matrices and three biases agree on `input_dim`/`hidden_dim`.
    pub fn validate<T: Scalar>(&self, store: &ParamStore<T>) -> Result<()> {
        let (i, h) = (self.input_dim, self.hidden_dim);
        let expect = [
            (self.w_z, [i, h]),
            (self.w_r, [i, h]),
            (self.w_h, [i, h]),
            (self.u_z, [h, h]),
            (self.u_r, [h, h]),
            (self.u_h, [h, h]),
            (self.b_z, [1, h]),
            (self.b_r, [1, h]),
            (self.b_h, [1, h]),
        ];
        for (id, shape) in expect {
            if store.get(id).shape() != shape {
                return Err(Error::Config(format!(
                    "{} has shape {:?}, expected {:?}",
                    store.name(id),
                    store.get(id).shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

    pub fn bind(&self, b: &Binding) -> GruVars {
        GruVars {
            w_z: b.var(self.w_z),
            w_r: b.var(self.w_r),
            w_h: b.var(self.w_h),
            u_z: b.var(self.u_z),
            u_r: b.var(self.u_r),
            u_h: b.var(self.u_h),
            b_z: b.var(self.b_z),
            b_r: b.var(self.b_r),
            b_h: b.var(self.b_h),
        }
    }

    /// Number of scalars: `3·(d_in·d + d·d + d)`.
    pub fn num_values(&self) -> usize {
        3 * (self.input_dim * self.hidden_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }
}

/// One to three stacked GRU layers; layer `k` reads layer `k − 1`'s output.
#[derive(Debug, Clone, PartialEq)]
pub struct StackSpec {
    pub layers: Vec<GruParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackVars {
    pub layers: Vec<GruVars>,
    pub hidden_dim: usize,
}

impl StackSpec {
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        depth: usize,
        input_dim: usize,
        hidden_dim: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        check_depth(depth)?;
        let layers = (0..depth)
            .map(|l| {
                let d_in = if l == 0 { input_dim } else { hidden_dim };
                GruParams::init(
                    store,
                    &format!("{prefix}.l{l}"),
                    d_in,
                    hidden_dim,
                    init,
                    rng,
                )
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn find<T: Scalar>(store: &ParamStore<T>, prefix: &str, depth: usize) -> Result<Self> {
        check_depth(depth)?;
        let layers = (0..depth)
            .map(|l| GruParams::find(store, &format!("{prefix}.l{l}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].hidden_dim
    }

    pub fn bind(&self, b: &Binding) -> StackVars {
        StackVars {
            layers: self.layers.iter().map(|p| p.bind(b)).collect(),
            hidden_dim: self.hidden_dim(),
        }
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(GruParams::num_values).sum()
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if !(1..=3).contains(&depth) {
        return Err(Error::Config(format!("stack depth {depth} not in 1..=3")));
    }
    Ok(())
}

/// One GRU update: returns `h'` for inputs `x` (`B × d_in`) and `h_prev`
/// (`B × d`).
pub fn gru_step<T: Scalar>(tape: &mut Tape<T>, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let gate = |tape: &mut Tape<T>, w: Var, u: Var, b: Var, h: Var| -> Result<Var> {
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(h, u)?;
        let s = tape.add(xw, hu)?;
        Ok(tape.add_bias(s, b)?)
    };
    let z_in = gate(tape, p.w_z, p.u_z, p.b_z, h_prev)?;
    let z = tape.sigmoid(z_in)?;
    let r_in = gate(tape, p.w_r, p.u_r, p.b_r, h_prev)?;
    let r = tape.sigmoid(r_in)?;
    let rh = tape.mul(r, h_prev)?;
    let cand_in = gate(tape, p.w_h, p.u_h, p.b_h, rh)?;
    let cand = tape.tanh(cand_in)?;
    let keep = tape.one_minus(z)?;
    let kept = tape.mul(keep, h_prev)?;
    let fresh = tape.mul(z, cand)?;
    Ok(tape.add(kept, fresh)?)
}

/// Dropout configuration for one forward pass.
///
/// `rng` is `None` at inference time, which makes every dropout site the
/// identity.
pub struct Dropout<'a> {
    rate: f64,
    rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> Dropout<'a> {
    pub fn inference() -> Self {
        Self {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn training(rate: f64, rng: &'a mut ChaCha8Rng) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self {
            rate,
            rng: Some(rng),
        })
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some() && self.rate > 0.0
    }

    /// Inverted dropout on `states`: zero with probability `rate`, scale
    /// survivors by `1 / (1 − rate)`. Draws a fresh mask on every call.
    pub fn apply<T: Scalar>(&mut self, tape: &mut Tape<T>, states: Var) -> Result<Var> {
        let rate = self.rate;
        match self.rng.as_deref_mut() {
            Some(rng) if rate > 0.0 => {
                let n = tape.value(states).len();
                let keep = T::lit(1.0 / (1.0 - rate));
                let mask = (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < rate {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect();
                Ok(tape.mul_const(states, mask)?)
            }
            _ => Ok(states),
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
    }
    Ok(())
}

/// Standalone dropout site; see [`Dropout::apply`].
pub fn apply_dropout<T: Scalar>(
    tape: &mut Tape<T>,
    states: Var,
    rate: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    check_rate(rate)?;
    if !training {
        return Ok(states);
    }
    Dropout::training(rate, rng)?.apply(tape, states)
}

/// Per-step outputs of a sequence run.
#[derive(Debug, Clone)]
pub struct SequenceOutput {
    /// Top-layer output at each step (`B × d`), after dropout.
    pub states: Vec<Var>,
    /// Top-layer state after the last live step of each row.
    pub last: Var,
}

/// Run a GRU stack over `inputs` (one `B × d_in` matrix per step).
///
/// `live[t][b]` marks real tokens; a dead step leaves row `b`'s state
/// untouched in every layer. `h0` seeds the bottom layer, upper layers start
/// from zero.
pub fn run_sequence<T: Scalar>(
    tape: &mut Tape<T>,
    inputs: &[Var],
    h0: Var,
    stack: &StackVars,
    live: &[Vec<bool>],
    dropout: &mut Dropout<'_>,
) -> Result<SequenceOutput> {
    if inputs.is_empty() {
        return Err(Error::Contract(
            "run_sequence over an empty sequence".into(),
        ));
    }
    if live.len() != inputs.len() {
        return Err(Error::Contract(format!(
            "{} mask steps for {} inputs",
            live.len(),
            inputs.len()
        )));
    }
    let (rows, d) = tape.dims(h0);
    if d != stack.hidden_dim {
        return Err(Error::Contract(format!(
            "initial state width {d} does not match hidden size {}",
            stack.hidden_dim
        )));
    }
    let mut hidden = Vec::with_capacity(stack.layers.len());
    hidden.push(h0);
    for _ in 1..stack.layers.len() {
        hidden.push(tape.constant(Tensor::zeros(&[rows, d])));
    }
    let mut states = Vec::with_capacity(inputs.len());
    for (&x, mask) in inputs.iter().zip(live) {
        let mut input = x;
        for (l, p) in stack.layers.iter().enumerate() {
            let next = gru_step(tape, input, hidden[l], p)?;
            hidden[l] = if mask.iter().all(|&m| m) {
                next
            } else {
                tape.masked_update(next, hidden[l], mask)?
            };
            input = dropout.apply(tape, hidden[l])?;
        }
        states.push(input);
    }
    Ok(SequenceOutput {
        states,
        last: *hidden.last().unwrap(),
    })
}

/// Forward and backward passes fused by summation.
///
/// `states[t] = fwd[t] + bwd[t]` and `last = fwd.last + bwd.last`, where the
/// backward direction reads the sequence right to left (its `last` is the
/// state after reading position 0).
#[allow(clippy::too_many_arguments)]
pub fn run_bidirectional<T: Scalar>(
    tape: &mut Tape<T>,
    inputs: &[Var],
    h0_fwd: Var,
    h0_bwd: Var,
    fwd: &StackVars,
    bwd: &StackVars,
    live: &[Vec<bool>],
    dropout: &mut Dropout<'_>,
) -> Result<SequenceOutput> {
    let forward = run_sequence(tape, inputs, h0_fwd, fwd, live, dropout)?;
    let rev_inputs: Vec<Var> = inputs.iter().rev().copied().collect();
    let rev_live: Vec<Vec<bool>> = live.iter().rev().cloned().collect();
    let backward = run_sequence(tape, &rev_inputs, h0_bwd, bwd, &rev_live, dropout)?;
    let states = forward
        .states
        .iter()
        .zip(backward.states.iter().rev())
        .map(|(&f, &b)| tape.add(f, b))
        .collect::<Result<Vec<_>, _>>()?;
    let last = tape.add(forward.last, backward.last)?;
    Ok(SequenceOutput { states, last })
}
