use super::scalar::gemm_into;
use super::{Result, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    OneMinus(Var),
    Scale(Var, T),
    MulConst(Var, Vec<T>),
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    SoftmaxMasked(Var, Vec<bool>),
    WeightedRowSum(Var, Var),
    MaskedUpdate(Var, Var, Vec<bool>),
    CrossEntropy(Var, Vec<usize>, Vec<T>),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    rows: usize,
    cols: usize,
    requires_grad: bool,
    op: Op<T>,
}

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it and a single reverse sweep suffices for [`Tape::backward`]. A tape is
/// meant to be built for one training step (or one inference call) and then
/// dropped.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
    macs: u64,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
            macs: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiplies performed by the forward operations recorded so far.
    ///
    /// Matrix products count `m·k·n`, elementwise products one per element
    /// and [`Tape::weighted_row_sum`] one per weighted value. Additions,
    /// nonlinearities and softmax normalisation are not counted.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn reset_macs(&mut self) {
        self.macs = 0;
    }

    /// Record an input tensor.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        let (rows, cols) = value.dims2();
        self.nodes.push(Node {
            value,
            rows,
            cols,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last [`Tape::backward`] loss with respect to `v`, if
    /// `v` requires a gradient.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).unwrap())
    }

    fn push(
        &mut self,
        data: Vec<T>,
        rows: usize,
        cols: usize,
        op: Op<T>,
        name: &'static str,
    ) -> Result<Var> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Tensor::new(vec![rows, cols], data)?,
            rows,
            cols,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        TensorError::Shape {
            op,
            lhs: vec![ar, ac],
            rhs: vec![br, bc],
        }
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (kb, n) = self.dims(b);
        if k != kb {
            return Err(self.shape_err("matmul", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_into(
            self.data(a),
            m,
            k,
            false,
            self.data(b),
            kb,
            n,
            false,
            &mut out,
            false,
        );
        self.macs += (m * k * n) as u64;
        self.push(out, m, n, Op::MatMul(a, b), "matmul")
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Vec<T>> {
        if self.dims(a) != self.dims(b) {
            return Err(self.shape_err(name, a, b));
        }
        Ok(self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect())
    }

    /// Elementwise sum of equally shaped operands. A `1 × n` right operand
    /// against an `m × n` left operand is treated as a bias row.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        if br == 1 && ar != 1 && ac == bc {
            return self.add_bias(a, b);
        }
        let out = self.zip(a, b, "add", |x, y| x + y)?;
        self.push(out, ar, ac, Op::Add(a, b), "add")
    }

    /// `a[i, :] + bias[0, :]` for every row `i`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        if self.dims(bias) != (1, n) {
            return Err(self.shape_err("add_bias", a, bias));
        }
        let b = self.data(bias);
        let out = self
            .data(a)
            .chunks(n.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(&x, &y)| x + y))
            .collect();
        self.push(out, m, n, Op::AddBias(a, bias), "add_bias")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.zip(a, b, "sub", |x, y| x - y)?;
        self.push(out, r, c, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.zip(a, b, "mul", |x, y| x * y)?;
        self.macs += (r * c) as u64;
        self.push(out, r, c, Op::Mul(a, b), "mul")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|x| x.tanh()).collect();
        self.push(out, r, c, Op::Tanh(a), "tanh")
    }

    /// Logistic function, evaluated in a form that cannot overflow.
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(out, r, c, Op::Sigmoid(a), "sigmoid")
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|&x| T::one() - x).collect();
        self.push(out, r, c, Op::OneMinus(a), "one_minus")
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|&x| x * factor).collect();
        self.push(out, r, c, Op::Scale(a, factor), "scale")
    }

    /// Elementwise product with a constant (non-differentiated) array, e.g.
    /// a dropout mask.
    pub fn mul_const(&mut self, a: Var, factors: Vec<T>) -> Result<Var> {
        let (r, c) = self.dims(a);
        if factors.len() != r * c {
            return Err(TensorError::Shape {
                op: "mul_const",
                lhs: vec![r, c],
                rhs: vec![factors.len()],
            });
        }
        let out = self
            .data(a)
            .iter()
            .zip(&factors)
            .map(|(&x, &m)| x * m)
            .collect();
        self.push(out, r, c, Op::MulConst(a, factors), "mul_const")
    }

    /// Join matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Contract("concat_cols of nothing".into()));
        };
        let rows = self.dims(first).0;
        for &p in parts {
            if self.dims(p).0 != rows {
                return Err(self.shape_err("concat_cols", first, p));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let c = self.dims(p).1;
                out.extend_from_slice(&self.data(p)[r * c..(r + 1) * c]);
            }
        }
        self.push(
            out,
            rows,
            cols,
            Op::ConcatCols(parts.to_vec()),
            "concat_cols",
        )
    }

    /// Stack matrices with equal column counts on top of each other.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Contract("stack_rows of nothing".into()));
        };
        let cols = self.dims(first).1;
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if self.dims(p).1 != cols {
                return Err(self.shape_err("stack_rows", first, p));
            }
            rows += self.dims(p).0;
            out.extend_from_slice(self.data(p));
        }
        self.push(out, rows, cols, Op::StackRows(parts.to_vec()), "stack_rows")
    }

    /// Row `i` of the output is row `indices[i]` of `a`. Doubles as an
    /// embedding lookup.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = self.dims(a);
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    bound: rows,
                });
            }
            out.extend_from_slice(&self.data(a)[i * cols..(i + 1) * cols]);
        }
        self.push(
            out,
            indices.len(),
            cols,
            Op::GatherRows(a, indices.to_vec()),
            "gather_rows",
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if r * c != rows * cols {
            return Err(TensorError::Shape {
                op: "reshape",
                lhs: vec![r, c],
                rhs: vec![rows, cols],
            });
        }
        let out = self.data(a).to_vec();
        self.push(out, rows, cols, Op::Reshape(a), "reshape")
    }

    /// Row-wise softmax restricted to entries whose mask is set. Masked
    /// entries are exactly zero; each row needs at least one live entry.
    pub fn softmax_masked(&mut self, logits: Var, mask: &[bool]) -> Result<Var> {
        let (rows, cols) = self.dims(logits);
        if mask.len() != rows * cols {
            return Err(TensorError::Shape {
                op: "softmax_masked",
                lhs: vec![rows, cols],
                rhs: vec![mask.len()],
            });
        }
        let x = self.data(logits);
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let span = r * cols..(r + 1) * cols;
            let live = &mask[span.clone()];
            let row = &x[span.clone()];
            let mut max = T::neg_infinity();
            for (&v, &m) in row.iter().zip(live) {
                if m && v > max {
                    max = v;
                }
            }
            if max == T::neg_infinity() {
                return Err(TensorError::InvalidMask {
                    op: "softmax_masked",
                    row: r,
                });
            }
            let dst = &mut out[span];
            let mut total = T::zero();
            for ((d, &v), &m) in dst.iter_mut().zip(row).zip(live) {
                if m {
                    *d = (v - max).exp();
                    total = total + *d;
                }
            }
            for d in dst.iter_mut() {
                *d = *d / total;
            }
        }
        self.push(
            out,
            rows,
            cols,
            Op::SoftmaxMasked(logits, mask.to_vec()),
            "softmax_masked",
        )
    }

    /// Attention pooling: `out[b] = Σ_s weights[b, s] · values[b·k + s]`
    /// where `weights` is `B × k` and `values` is `(B·k) × e`.
    pub fn weighted_row_sum(&mut self, weights: Var, values: Var) -> Result<Var> {
        let (b, k) = self.dims(weights);
        let (vr, e) = self.dims(values);
        if vr != b * k {
            return Err(self.shape_err("weighted_row_sum", weights, values));
        }
        let w = self.data(weights);
        let v = self.data(values);
        let mut out = vec![T::zero(); b * e];
        for bi in 0..b {
            let dst = &mut out[bi * e..(bi + 1) * e];
            for s in 0..k {
                let a = w[bi * k + s];
                let src = &v[(bi * k + s) * e..(bi * k + s + 1) * e];
                for (d, &x) in dst.iter_mut().zip(src) {
                    *d = *d + a * x;
                }
            }
        }
        self.macs += (b * k * e) as u64;
        self.push(
            out,
            b,
            e,
            Op::WeightedRowSum(weights, values),
            "weighted_row_sum",
        )
    }

    /// Row `i` is taken from `new` where `live[i]` is set and from `old`
    /// otherwise. Used to carry recurrent state across padding.
    pub fn masked_update(&mut self, new: Var, old: Var, live: &[bool]) -> Result<Var> {
        let (rows, cols) = self.dims(new);
        if self.dims(old) != (rows, cols) {
            return Err(self.shape_err("masked_update", new, old));
        }
        if live.len() != rows {
            return Err(TensorError::Shape {
                op: "masked_update",
                lhs: vec![rows, cols],
                rhs: vec![live.len()],
            });
        }
        let mut out = Vec::with_capacity(rows * cols);
        for (r, &l) in live.iter().enumerate() {
            let src = if l { new } else { old };
            out.extend_from_slice(&self.data(src)[r * cols..(r + 1) * cols]);
        }
        self.push(
            out,
            rows,
            cols,
            Op::MaskedUpdate(new, old, live.to_vec()),
            "masked_update",
        )
    }

    /// `Σ_i weights[i] · (−log softmax(logits[i])[targets[i]])`, a `1 × 1`
    /// scalar. Rows with zero weight contribute nothing.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[T]) -> Result<Var> {
        let (rows, cols) = self.dims(logits);
        if targets.len() != rows || weights.len() != rows {
            return Err(TensorError::Shape {
                op: "cross_entropy",
                lhs: vec![rows, cols],
                rhs: vec![targets.len(), weights.len()],
            });
        }
        let x = self.data(logits);
        let mut total = T::zero();
        for r in 0..rows {
            let t = targets[r];
            if t >= cols {
                return Err(TensorError::Index {
                    op: "cross_entropy",
                    index: t,
                    bound: cols,
                });
            }
            if weights[r] == T::zero() {
                continue;
            }
            let row = &x[r * cols..(r + 1) * cols];
            total = total + weights[r] * (log_sum_exp(row) - row[t]);
        }
        self.push(
            vec![total],
            1,
            1,
            Op::CrossEntropy(logits, targets.to_vec(), weights.to_vec()),
            "cross_entropy",
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.data(a).iter().fold(T::zero(), |acc, &x| acc + x);
        self.push(vec![total], 1, 1, Op::Sum(a), "sum")
    }

    /// Propagate gradients of the scalar `loss` to every node that requires
    /// them. A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(TensorError::Contract(
                "backward already ran on this tape".into(),
            ));
        }
        if loss.0 >= self.nodes.len() {
            return Err(TensorError::Contract("loss is not on this tape".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.backward_done = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<T>>> = vec![None; n];
        if !self.nodes[loss.0].requires_grad {
            self.grads = grads;
            return Ok(());
        }
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        // Only nodes that requested gradients keep them.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = cols;
                if let Some(ga) = self.slot(*a, grads) {
                    gemm_into(g, m, n, false, self.data(*b), k, n, true, ga, true);
                }
                if let Some(gb) = self.slot(*b, grads) {
                    gemm_into(self.data(*a), m, k, true, g, m, n, false, gb, true);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.slot(v, grads) {
                        axpy(gv, g, T::one());
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.slot(*a, grads) {
                    axpy(ga, g, T::one());
                }
                if let Some(gb) = self.slot(*b, grads) {
                    axpy(gb, g, -T::one());
                }
            }
            Op::AddBias(a, bias) => {
                if let Some(ga) = self.slot(*a, grads) {
                    axpy(ga, g, T::one());
                }
                if let Some(gb) = self.slot(*bias, grads) {
                    for row in g.chunks(cols.max(1)) {
                        axpy(gb, row, T::one());
                    }
                }
            }
            Op::Mul(a, b) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for ((d, &gi), &bi) in ga.iter_mut().zip(g).zip(self.data(*b)) {
                        *d = *d + gi * bi;
                    }
                }
                if let Some(gb) = self.slot(*b, grads) {
                    for ((d, &gi), &ai) in gb.iter_mut().zip(g).zip(self.data(*a)) {
                        *d = *d + gi * ai;
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for ((d, &gi), &yi) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + gi * (T::one() - yi * yi);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for ((d, &gi), &yi) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + gi * yi * (T::one() - yi);
                    }
                }
            }
            Op::OneMinus(a) => {
                if let Some(ga) = self.slot(*a, grads) {
                    axpy(ga, g, -T::one());
                }
            }
            Op::Scale(a, f) => {
                if let Some(ga) = self.slot(*a, grads) {
                    axpy(ga, g, *f);
                }
            }
            Op::MulConst(a, factors) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for ((d, &gi), &m) in ga.iter_mut().zip(g).zip(factors) {
                        *d = *d + gi * m;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.dims(p).1;
                    if let Some(gp) = self.slot(p, grads) {
                        for r in 0..rows {
                            let src = &g[r * cols + offset..r * cols + offset + pc];
                            axpy(&mut gp[r * pc..(r + 1) * pc], src, T::one());
                        }
                    }
                    offset += pc;
                }
            }
            Op::StackRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    if let Some(gp) = self.slot(p, grads) {
                        axpy(gp, &g[offset..offset + len], T::one());
                    }
                    offset += len;
                }
            }
            Op::GatherRows(a, idx) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for (r, &src) in idx.iter().enumerate() {
                        axpy(
                            &mut ga[src * cols..(src + 1) * cols],
                            &g[r * cols..(r + 1) * cols],
                            T::one(),
                        );
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.slot(*a, grads) {
                    axpy(ga, g, T::one());
                }
            }
            Op::SoftmaxMasked(a, mask) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for r in 0..rows {
                        let span = r * cols..(r + 1) * cols;
                        let dot = g[span.clone()]
                            .iter()
                            .zip(&y[span.clone()])
                            .fold(T::zero(), |acc, (&gi, &yi)| acc + gi * yi);
                        for j in span {
                            if mask[j] {
                                ga[j] = ga[j] + y[j] * (g[j] - dot);
                            }
                        }
                    }
                }
            }
            Op::WeightedRowSum(w, v) => {
                let (b, k) = self.dims(*w);
                let e = cols;
                let wd = self.data(*w);
                let vd = self.data(*v);
                if let Some(gw) = self.slot(*w, grads) {
                    for bi in 0..b {
                        let gb = &g[bi * e..(bi + 1) * e];
                        for s in 0..k {
                            let row = &vd[(bi * k + s) * e..(bi * k + s + 1) * e];
                            let dot = gb
                                .iter()
                                .zip(row)
                                .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                            gw[bi * k + s] = gw[bi * k + s] + dot;
                        }
                    }
                }
                if let Some(gv) = self.slot(*v, grads) {
                    for bi in 0..b {
                        let gb = &g[bi * e..(bi + 1) * e];
                        for s in 0..k {
                            let r = bi * k + s;
                            axpy(&mut gv[r * e..(r + 1) * e], gb, wd[r]);
                        }
                    }
                }
            }
            Op::MaskedUpdate(new, old, live) => {
                for (v, want) in [(*new, true), (*old, false)] {
                    if let Some(gv) = self.slot(v, grads) {
                        for (r, &l) in live.iter().enumerate() {
                            if l == want {
                                let span = r * cols..(r + 1) * cols;
                                axpy(&mut gv[span.clone()], &g[span], T::one());
                            }
                        }
                    }
                }
            }
            Op::CrossEntropy(logits, targets, weights) => {
                let (lr, lc) = self.dims(*logits);
                let x = self.data(*logits);
                if let Some(gl) = self.slot(*logits, grads) {
                    for r in 0..lr {
                        if weights[r] == T::zero() {
                            continue;
                        }
                        let row = &x[r * lc..(r + 1) * lc];
                        let lse = log_sum_exp(row);
                        let scale = g[0] * weights[r];
                        for j in 0..lc {
                            let p = (row[j] - lse).exp();
                            let onehot = if j == targets[r] { T::one() } else { T::zero() };
                            gl[r * lc + j] = gl[r * lc + j] + scale * (p - onehot);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.slot(*a, grads) {
                    for d in ga.iter_mut() {
                        *d = *d + g[0];
                    }
                }
            }
        }
    }

    /// Gradient accumulator for `v`, allocated on first use; `None` when `v`
    /// does not participate in differentiation.
    #[allow(clippy::mut_from_ref)]
    fn slot<'g>(&self, v: Var, grads: &'g mut [Option<Vec<T>>]) -> Option<&'g mut [T]> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(
            grads[v.0]
                .get_or_insert_with(|| vec![T::zero(); node.value.len()])
                .as_mut_slice(),
        )
    }
}

fn inputs<T>(op: &Op<T>) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b)
        | Op::Add(a, b)
        | Op::AddBias(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::WeightedRowSum(a, b)
        | Op::MaskedUpdate(a, b, _) => vec![*a, *b],
        Op::Tanh(a)
        | Op::Sigmoid(a)
        | Op::OneMinus(a)
        | Op::Scale(a, _)
        | Op::MulConst(a, _)
        | Op::GatherRows(a, _)
        | Op::Reshape(a)
        | Op::SoftmaxMasked(a, _)
        | Op::CrossEntropy(a, _, _)
        | Op::Sum(a) => vec![*a],
        Op::ConcatCols(v) | Op::StackRows(v) => v.clone(),
    }
}

fn axpy<T: Scalar>(dst: &mut [T], src: &[T], alpha: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + alpha * s;
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row
        .iter()
        .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let total = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + total.ln()
}
