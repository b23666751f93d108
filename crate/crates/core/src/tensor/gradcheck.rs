use super::{Result, Tape, Tensor, TensorError, Var};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over coordinates of `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(input, coordinate)` where the max was reached.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Compare tape gradients of a scalar function against central differences.
///
/// `f` builds its output on a fresh tape from the given input variables and
/// is called `1 + 2·n` times for `n` input coordinates.
///
/// ```
/// use amn::tensor::{grad_check, Tensor};
///
/// let x = Tensor::from_f64(&[2, 2], &[0.1, -0.4, 2.0, 0.7]).unwrap();
/// let report = grad_check(
///     |tape, vars| {
///         let s = tape.sigmoid(vars[0])?;
///         tape.sum(s)
///     },
///     &[x],
///     1e-5,
/// )
/// .unwrap();
/// assert!(report.max_rel_error < 1e-6);
/// ```
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], epsilon: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(TensorError::Contract(format!(
            "grad_check epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone(), false)).collect();
        let out = f(&mut tape, &vars)?;
        scalar_of(&tape, out)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.leaf(v.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    scalar_of(&tape, out)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(x.shape())))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        for j in 0..x.len() {
            let orig = x.data()[j];
            probe[i].data_mut()[j] = orig + epsilon;
            let up = eval(&probe)?;
            probe[i].data_mut()[j] = orig - epsilon;
            let down = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic[i].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (i, j);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}

fn scalar_of(tape: &Tape<f64>, v: Var) -> Result<f64> {
    let value = tape.value(v);
    if value.len() != 1 {
        return Err(TensorError::Contract(format!(
            "grad_check needs a scalar output, got shape {:?}",
            value.shape()
        )));
    }
    Ok(value.scalar_value())
}
