#![allow(clippy::cloned_ref_to_slice_refs)]

use amn::tensor::{grad_check, Tape, Tensor, Var};
use proptest::prelude::*;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

fn any_matrix() -> impl Strategy<Value = Tensor<f64>> {
    (1..=6usize, 1..=6usize).prop_flat_map(|(r, c)| matrix(r, c))
}

/// Random fixed weights so the scalar depends on every output coordinate
/// differently.
fn probe(tape: &mut Tape<f64>, out: Var) -> amn::tensor::Result<Var> {
    let (r, c) = tape.dims(out);
    let w = (0..r * c)
        .map(|i| 0.5 + ((i * 7 + 3) % 11) as f64 / 10.0)
        .collect();
    let weighted = tape.mul_const(out, w)?;
    tape.sum(weighted)
}

fn check<F>(f: F, inputs: &[Tensor<f64>]) -> Result<(), TestCaseError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> amn::tensor::Result<Var>,
{
    let report = grad_check(
        |t, v| {
            let out = f(t, v)?;
            probe(t, out)
        },
        inputs,
        EPS,
    )
    .unwrap();
    prop_assert!(report.max_rel_error < TOL, "{report:?}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul((a, b) in (1..=6usize, 1..=6usize, 1..=6usize)
        .prop_flat_map(|(m, k, n)| (matrix(m, k), matrix(k, n)))) {
        check(|t, v| t.matmul(v[0], v[1]), &[a, b])?;
    }

    #[test]
    fn add_sub_mul((a, b) in (1..=6usize, 1..=6usize)
        .prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)))) {
        check(|t, v| t.add(v[0], v[1]), &[a.clone(), b.clone()])?;
        check(|t, v| t.sub(v[0], v[1]), &[a.clone(), b.clone()])?;
        check(|t, v| t.mul(v[0], v[1]), &[a, b])?;
    }

    #[test]
    fn add_bias((a, b) in (1..=6usize, 1..=6usize)
        .prop_flat_map(|(r, c)| (matrix(r, c), matrix(1, c)))) {
        check(|t, v| t.add_bias(v[0], v[1]), &[a, b])?;
    }

    #[test]
    fn pointwise(a in any_matrix()) {
        check(|t, v| t.tanh(v[0]), &[a.clone()])?;
        check(|t, v| t.sigmoid(v[0]), &[a.clone()])?;
        check(|t, v| t.one_minus(v[0]), &[a.clone()])?;
        check(|t, v| t.scale(v[0], -1.7), &[a.clone()])?;
        check(|t, v| t.sum(v[0]), &[a])?;
    }

    #[test]
    fn layout((a, b) in (1..=6usize, 1..=6usize, 1..=6usize)
        .prop_flat_map(|(r, c1, c2)| (matrix(r, c1), matrix(r, c2)))) {
        check(|t, v| t.concat_cols(&[v[0], v[1]]), &[a.clone(), b.clone()])?;
        check(|t, v| t.stack_rows(&[v[0], v[0]]), &[a.clone()])?;
        let rows = a.rows();
        let idx: Vec<usize> = (0..2 * rows).map(|i| (i * 5) % rows).collect();
        check(|t, v| t.gather_rows(v[0], &idx), &[a.clone()])?;
        let (r, c) = (a.rows(), a.cols());
        check(|t, v| t.reshape(v[0], c, r), &[a])?;
    }

    #[test]
    fn softmax_masked((x, mask) in (1..=6usize, 1..=6usize).prop_flat_map(|(r, c)| {
        (matrix(r, c), prop::collection::vec(any::<bool>(), r * c))
    })) {
        let (_, c) = x.dims2();
        let mut mask = mask;
        for row in mask.chunks_mut(c) {
            row[0] = true;
        }
        check(|t, v| t.softmax_masked(v[0], &mask), &[x])?;
    }

    #[test]
    fn weighted_row_sum((w, h) in (1..=6usize, 1..=6usize, 1..=6usize)
        .prop_flat_map(|(b, k, e)| (matrix(b, k), matrix(b * k, e)))) {
        check(|t, v| t.weighted_row_sum(v[0], v[1]), &[w, h])?;
    }

    #[test]
    fn masked_update((new, old, live) in (1..=6usize, 1..=6usize).prop_flat_map(|(r, c)| {
        (matrix(r, c), matrix(r, c), prop::collection::vec(any::<bool>(), r))
    })) {
        check(|t, v| t.masked_update(v[0], v[1], &live), &[new, old])?;
    }

    #[test]
    fn cross_entropy((logits, picks) in (1..=6usize, 2..=6usize).prop_flat_map(|(n, v)| {
        (matrix(n, v), prop::collection::vec((0..v, 0.1f64..1.0), n))
    })) {
        let targets: Vec<usize> = picks.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = picks.iter().map(|p| p.1).collect();
        let report = grad_check(
            |t, v| t.cross_entropy(v[0], &targets, &weights),
            &[logits],
            EPS,
        )
        .unwrap();
        prop_assert!(report.max_rel_error < TOL, "{report:?}");
    }

    #[test]
    fn softmax_shift_invariance(x in any_matrix(), shift in -50.0f64..50.0) {
        let (r, c) = x.dims2();
        let mask = vec![true; r * c];
        let shifted = Tensor::matrix(
            r,
            c,
            x.data().iter().enumerate().map(|(i, v)| v + shift * (1 + i / c) as f64).collect(),
        )
        .unwrap();
        let mut tape = Tape::new();
        let a = tape.constant(x);
        let b = tape.constant(shifted);
        let sa = tape.softmax_masked(a, &mask).unwrap();
        let sb = tape.softmax_masked(b, &mask).unwrap();
        for (p, q) in tape.value(sa).data().iter().zip(tape.value(sb).data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        for row in tape.value(sa).data().chunks(c) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
