use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Contract(format!(
                "adam: parameter {i} has shape {:?}, gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(EPSILON));
    let (one, step) = (T::one(), T::lit(lr / c1));
    let inv_c2 = T::lit(1.0 / c2);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            *w = *w - step * m[j] / ((v[j] * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}

pub fn global_norm<T: Scalar>(grads: &[Tensor<T>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|&x| {
            let x = x.to_f64().unwrap();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescale so the global L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for x in grads.iter_mut().flat_map(|g| g.data_mut()) {
            *x = *x * s;
        }
    }
    norm
}
