//! Additive attention and the attentive recurrent cell built on it.
//!
//! For a query state `q` and states to attend over `H = [h_1 … h_k]`:
//!
//! ```text
//! u_i = vᵀ tanh(W_1·h_i + W_2·q)
//! a   = softmax(u)            (restricted to live states)
//! d   = Σ_i a_i · h_i
//! ```
//!
//! The attentive cell runs a GRU step to get a candidate `ĥ`, attends with
//! `ĥ` as the query and projects the concatenation `[d ‖ ĥ]` back to `e`
//! dimensions with `W_proj`. The projected vector is the cell's new state.
//!
//! States to attend over are laid out example-major: row `b·k + i` holds
//! `h_i` of example `b`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{Binding, Init, ParamId, ParamStore};
use crate::recurrent::{gru_step, Dropout, StackVars};
use crate::tensor::{Scalar, Tape, Var};

/// Parameter ids of one attention site.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub size: usize,
    /// `e × e`, applied to attended states.
    pub w1: ParamId,
    /// `e × e`, applied to the query.
    pub w2: ParamId,
    /// `e × 1`.
    pub v: ParamId,
    /// `2e × e`, maps `[d ‖ ĥ]` back to `e`.
    pub proj: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionVars {
    pub w1: Var,
    pub w2: Var,
    pub v: Var,
    pub proj: Var,
}

impl AttentionParams {
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        size: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            size,
            w1: store.add_init(format!("{prefix}.w1"), &[size, size], init, rng),
            w2: store.add_init(format!("{prefix}.w2"), &[size, size], init, rng),
            v: store.add_init(format!("{prefix}.v"), &[size, 1], init, rng),
            proj: store.add_init(format!("{prefix}.proj"), &[2 * size, size], init, rng),
        }
    }

    pub fn find<T: Scalar>(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let get = |s: &str| {
            let name = format!("{prefix}.{s}");
            store
                .find(&name)
                .ok_or_else(|| Error::Format(format!("missing parameter {name}")))
        };
        let w1 = get("w1")?;
        let size = store.get(w1).shape()[0];
        let p = Self {
            size,
            w1,
            w2: get("w2")?,
            v: get("v")?,
            proj: get("proj")?,
        };
        let e = size;
        for (id, shape) in [
            (p.w1, [e, e]),
            (p.w2, [e, e]),
            (p.v, [e, 1]),
            (p.proj, [2 * e, e]),
        ] {
            if store.get(id).shape() != shape {
                return Err(Error::Format(format!(
                    "{} has shape {:?}, expected {:?}",
                    store.name(id),
                    store.get(id).shape(),
                    shape
                )));
            }
        }
        Ok(p)
    }

    pub fn bind(&self, b: &Binding) -> AttentionVars {
        AttentionVars {
            w1: b.var(self.w1),
            w2: b.var(self.w2),
            v: b.var(self.v),
            proj: b.var(self.proj),
        }
    }
}

/// States to attend over for a batch: `(B·k) × e`, example-major, with a
/// liveness flag per row.
#[derive(Debug, Clone)]
pub struct AttendSet {
    pub states: Var,
    pub per_example: usize,
    pub live: Vec<bool>,
}

impl AttendSet {
    /// Interleave per-position matrices (`B × e` each, position-major) into
    /// the example-major layout.
    pub fn from_positions<T: Scalar>(
        tape: &mut Tape<T>,
        positions: &[Var],
        live: Vec<bool>,
    ) -> Result<Self> {
        let k = positions.len();
        if k == 0 {
            return Err(Error::Contract("nothing to attend over".into()));
        }
        let b = tape.dims(positions[0]).0;
        if live.len() != b * k {
            return Err(Error::Contract(format!(
                "{} liveness flags for {b} examples × {k} states",
                live.len()
            )));
        }
        let stacked = tape.stack_rows(positions)?;
        let order: Vec<usize> = (0..b)
            .flat_map(|bi| (0..k).map(move |i| i * b + bi))
            .collect();
        let states = tape.gather_rows(stacked, &order)?;
        Ok(Self {
            states,
            per_example: k,
            live,
        })
    }

    /// A single example's `k × e` matrix, every row live.
    pub fn single<T: Scalar>(tape: &Tape<T>, states: Var) -> Result<Self> {
        let k = tape.dims(states).0;
        if k == 0 {
            return Err(Error::Contract("nothing to attend over".into()));
        }
        Ok(Self {
            states,
            per_example: k,
            live: vec![true; k],
        })
    }
}

/// Attention output: context `d` (`B × e`) and weights `a` (`B × k`).
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    pub context: Var,
    pub weights: Var,
}

pub fn attend<T: Scalar>(
    tape: &mut Tape<T>,
    query: Var,
    over: &AttendSet,
    p: &AttentionVars,
) -> Result<Attended> {
    let (b, _) = tape.dims(query);
    let k = over.per_example;
    if k == 0 {
        return Err(Error::Contract("attend over zero states".into()));
    }
    if tape.dims(over.states).0 != b * k {
        return Err(Error::Contract(format!(
            "{} attended rows for {b} queries × {k}",
            tape.dims(over.states).0
        )));
    }
    let keys = tape.matmul(over.states, p.w1)?;
    let spread: Vec<usize> = (0..b).flat_map(|bi| std::iter::repeat_n(bi, k)).collect();
    let queries = tape.gather_rows(query, &spread)?;
    let qw = tape.matmul(queries, p.w2)?;
    let pre = tape.add(keys, qw)?;
    let act = tape.tanh(pre)?;
    let scores = tape.matmul(act, p.v)?;
    let scores = tape.reshape(scores, b, k)?;
    let weights = tape.softmax_masked(scores, &over.live)?;
    let context = tape.weighted_row_sum(weights, over.states)?;
    Ok(Attended { context, weights })
}

/// Output of one attentive cell step.
#[derive(Debug, Clone)]
pub struct CellStep {
    /// Per-layer recurrent state after the step; the top entry is `output`.
    pub state: Vec<Var>,
    /// `W_proj · [d ‖ ĥ]`.
    pub output: Var,
    /// Candidate state `ĥ` of the top GRU layer.
    pub candidate: Var,
    pub attention: Attended,
}

/// GRU stack step, attention with the top-layer candidate as query, and
/// projection of `[d ‖ ĥ]`.
pub fn attentive_cell_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    prev: &[Var],
    over: &AttendSet,
    cell: &StackVars,
    att: &AttentionVars,
    dropout: &mut Dropout<'_>,
) -> Result<CellStep> {
    if prev.len() != cell.layers.len() {
        return Err(Error::Contract(format!(
            "{} states for a {}-layer cell",
            prev.len(),
            cell.layers.len()
        )));
    }
    let mut state = Vec::with_capacity(prev.len());
    let mut input = x;
    let mut candidate = x;
    for (l, (p, &h)) in cell.layers.iter().zip(prev).enumerate() {
        candidate = gru_step(tape, input, h, p)?;
        state.push(candidate);
        if l + 1 < cell.layers.len() {
            input = dropout.apply(tape, candidate)?;
        }
    }
    let attention = attend(tape, candidate, over, att)?;
    let joined = tape.concat_cols(&[attention.context, candidate])?;
    let output = tape.matmul(joined, att.proj)?;
    *state.last_mut().unwrap() = output;
    Ok(CellStep {
        state,
        output,
        candidate,
        attention,
    })
}
