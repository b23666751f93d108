#![allow(clippy::needless_range_loop)]

use amn::recurrent::{gru_step, run_bidirectional, run_sequence, Dropout, GruVars, StackVars};
use amn::tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain-loop GRU weights; `w*` are `d_in × d`, `u*` are `d × d`.
#[derive(Clone, Debug)]
struct Gru {
    d_in: usize,
    d: usize,
    w: [Vec<f64>; 3],
    u: [Vec<f64>; 3],
    b: [Vec<f64>; 3],
}

impl Gru {
    fn random(d_in: usize, d: usize, rng: &mut impl Rng) -> Self {
        let mut v = |n: usize| {
            (0..n)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        };
        Self {
            d_in,
            d,
            w: [v(d_in * d), v(d_in * d), v(d_in * d)],
            u: [v(d * d), v(d * d), v(d * d)],
            b: [v(d), v(d), v(d)],
        }
    }

    fn affine(&self, gate: usize, x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                let mut s = self.b[gate][j];
                for i in 0..self.d_in {
                    s += x[i] * self.w[gate][i * self.d + j];
                }
                for i in 0..self.d {
                    s += h[i] * self.u[gate][i * self.d + j];
                }
                s
            })
            .collect()
    }

    /// `(h', h̃)`.
    fn step(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z: Vec<f64> = self.affine(0, x, h).into_iter().map(sig).collect();
        let r: Vec<f64> = self.affine(1, x, h).into_iter().map(sig).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = (0..self.d)
            .map(|j| {
                let mut s = self.b[2][j];
                for i in 0..self.d_in {
                    s += x[i] * self.w[2][i * self.d + j];
                }
                for i in 0..self.d {
                    s += rh[i] * self.u[2][i * self.d + j];
                }
                s.tanh()
            })
            .collect();
        let next = (0..self.d)
            .map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j])
            .collect();
        (next, cand)
    }

    fn bind(&self, tape: &mut Tape<f64>) -> GruVars {
        let (di, d) = (self.d_in, self.d);
        let mut c = |rows: usize, cols: usize, v: &Vec<f64>| {
            tape.constant(Tensor::matrix(rows, cols, v.clone()).unwrap())
        };
        GruVars {
            w_z: c(di, d, &self.w[0]),
            w_r: c(di, d, &self.w[1]),
            w_h: c(di, d, &self.w[2]),
            u_z: c(d, d, &self.u[0]),
            u_r: c(d, d, &self.u[1]),
            u_h: c(d, d, &self.u[2]),
            b_z: c(1, d, &self.b[0]),
            b_r: c(1, d, &self.b[1]),
            b_h: c(1, d, &self.b[2]),
        }
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

fn random_rows(rng: &mut impl Rng, n: usize, width: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn step_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (d_in, d) in [(1, 1), (3, 4), (5, 2)] {
        let g = Gru::random(d_in, d, &mut rng);
        let x = random_rows(&mut rng, 2, d_in);
        let h = random_rows(&mut rng, 2, d);
        let mut tape = Tape::new();
        let p = g.bind(&mut tape);
        let xv = tape.constant(Tensor::matrix(2, d_in, x.concat()).unwrap());
        let hv = tape.constant(Tensor::matrix(2, d, h.concat()).unwrap());
        let out = gru_step(&mut tape, xv, hv, &p).unwrap();
        for b in 0..2 {
            assert!(close(tape.value(out).row(b), &g.step(&x[b], &h[b]).0));
        }
    }
}

#[test]
fn depth_two_is_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (d_in, d, steps) = (3, 4, 5);
    let l0 = Gru::random(d_in, d, &mut rng);
    let l1 = Gru::random(d, d, &mut rng);
    let xs = random_rows(&mut rng, steps, d_in);
    let h0 = random_rows(&mut rng, 1, d).remove(0);

    let mut tape = Tape::new();
    let stack = StackVars {
        layers: vec![l0.bind(&mut tape), l1.bind(&mut tape)],
        hidden_dim: d,
    };
    let inputs: Vec<_> = xs
        .iter()
        .map(|x| tape.constant(Tensor::row_vector(x.clone())))
        .collect();
    let h0v = tape.constant(Tensor::row_vector(h0.clone()));
    let live = vec![vec![true]; steps];
    let out = run_sequence(
        &mut tape,
        &inputs,
        h0v,
        &stack,
        &live,
        &mut Dropout::inference(),
    )
    .unwrap();

    let (mut a, mut b) = (h0, vec![0.0; d]);
    for (t, x) in xs.iter().enumerate() {
        a = l0.step(x, &a).0;
        b = l1.step(&a, &b).0;
        assert!(close(tape.value(out.states[t]).data(), &b));
    }
    assert!(close(tape.value(out.last).data(), &b));
}

#[test]
fn dead_steps_keep_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Gru::random(2, 3, &mut rng);
    let xs = random_rows(&mut rng, 4, 2);
    let mut tape = Tape::new();
    let stack = StackVars {
        layers: vec![g.bind(&mut tape)],
        hidden_dim: 3,
    };
    // row 0 is live for 4 steps, row 1 for 2
    let inputs: Vec<_> = xs
        .iter()
        .map(|x| tape.constant(Tensor::matrix(2, 2, [x.clone(), x.clone()].concat()).unwrap()))
        .collect();
    let h0 = tape.constant(Tensor::zeros(&[2, 3]));
    let live = vec![
        vec![true, true],
        vec![true, true],
        vec![true, false],
        vec![true, false],
    ];
    let out = run_sequence(
        &mut tape,
        &inputs,
        h0,
        &stack,
        &live,
        &mut Dropout::inference(),
    )
    .unwrap();
    let mut h = vec![0.0; 3];
    for x in &xs[..2] {
        h = g.step(x, &h).0;
    }
    assert!(close(tape.value(out.last).row(1), &h));
    for x in &xs[2..] {
        h = g.step(x, &h).0;
    }
    assert!(close(tape.value(out.last).row(0), &h));
}

#[test]
fn bidirectional_is_sum_of_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (d_in, d, steps) = (2, 3, 4);
    let f = Gru::random(d_in, d, &mut rng);
    let b = Gru::random(d_in, d, &mut rng);
    let xs = random_rows(&mut rng, steps, d_in);
    let init = random_rows(&mut rng, 1, d).remove(0);

    let mut tape = Tape::new();
    let fv = StackVars {
        layers: vec![f.bind(&mut tape)],
        hidden_dim: d,
    };
    let bv = StackVars {
        layers: vec![b.bind(&mut tape)],
        hidden_dim: d,
    };
    let inputs: Vec<_> = xs
        .iter()
        .map(|x| tape.constant(Tensor::row_vector(x.clone())))
        .collect();
    let h0 = tape.constant(Tensor::row_vector(init.clone()));
    let live = vec![vec![true]; steps];
    let out = run_bidirectional(
        &mut tape,
        &inputs,
        h0,
        h0,
        &fv,
        &bv,
        &live,
        &mut Dropout::inference(),
    )
    .unwrap();

    let mut fwd = Vec::new();
    let mut h = init.clone();
    for x in &xs {
        h = f.step(x, &h).0;
        fwd.push(h.clone());
    }
    let mut bwd = vec![Vec::new(); steps];
    let mut h = init;
    for t in (0..steps).rev() {
        h = b.step(&xs[t], &h).0;
        bwd[t] = h.clone();
    }
    for t in 0..steps {
        let want: Vec<f64> = fwd[t].iter().zip(&bwd[t]).map(|(a, b)| a + b).collect();
        assert!(close(tape.value(out.states[t]).data(), &want));
    }
    let want: Vec<f64> = fwd[steps - 1]
        .iter()
        .zip(&bwd[0])
        .map(|(a, b)| a + b)
        .collect();
    assert!(close(tape.value(out.last).data(), &want));
}

proptest! {
    #[test]
    fn update_is_convex_combination(seed in any::<u64>(), d_in in 1..=4usize, d in 1..=4usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gru::random(d_in, d, &mut rng);
        let x: Vec<f64> = (0..d_in).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut tape = Tape::new();
        let p = g.bind(&mut tape);
        let xv = tape.constant(Tensor::row_vector(x.clone()));
        let hv = tape.constant(Tensor::row_vector(h.clone()));
        let out = gru_step(&mut tape, xv, hv, &p).unwrap();
        let (_, cand) = g.step(&x, &h);
        for (j, &v) in tape.value(out).data().iter().enumerate() {
            let (lo, hi) = (h[j].min(cand[j]), h[j].max(cand[j]));
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            prop_assert!(v.abs() <= 1.0);
        }
    }
}
