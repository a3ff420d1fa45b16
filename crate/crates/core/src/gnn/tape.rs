//! Reverse-mode autodiff over dense row-major matrices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Dense 2-D tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.rows, "matmul shapes {:?} x {:?}", self.shape(), b.shape());
        let mut out = Matrix::zeros(self.rows, b.cols);
        gemm(self, false, b, false, &mut out);
        out
    }

    /// `selfᵀ · b`
    fn t_matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.rows, b.rows);
        let mut out = Matrix::zeros(self.cols, b.cols);
        gemm(self, true, b, false, &mut out);
        out
    }

    /// `self · bᵀ`
    fn matmul_t(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.cols);
        let mut out = Matrix::zeros(self.rows, b.rows);
        gemm(self, false, b, true, &mut out);
        out
    }

    fn add_assign(&mut self, o: &Matrix) {
        assert_eq!(self.shape(), o.shape());
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// `out = op(a) · op(b)` where `op` optionally transposes.
fn gemm(a: &Matrix, ta: bool, b: &Matrix, tb: bool, out: &mut Matrix) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if tb { b.rows } else { b.cols };
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides and extents describe exactly the backing vectors,
    // and `out` does not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.data.as_ptr(), rsa, csa,
            b.data.as_ptr(), rsb, csb,
            0.0,
            out.data.as_mut_ptr(), n as isize, 1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a + 1·b` with `b` a single row.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    Gather(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ScatterAdd(Var, Vec<usize>),
    /// Rows of `a` times the matching entry of column `b`.
    ScaleRows(Var, Var),
    SegmentSoftmax(Var, Vec<usize>),
    /// Stores, per output element, the input row holding the max.
    SegmentMax(Var, Vec<Option<usize>>),
    LeakyRelu(Var, f64),
    Elu(Var),
    Relu(Var),
    /// Stores the row softmax.
    CrossEntropy(Var, Vec<usize>, Matrix),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records a forward computation for a single backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
}

fn leaky(x: f64, s: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        s * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Max-shifted `-log softmax(row)[t]`, also returning the softmax.
pub fn cross_entropy_row(row: &[f64], t: usize) -> (f64, Vec<f64>) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (row[t] - m);
    (loss, exps.iter().map(|e| e / z).collect())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    /// Leaf for parameter `id`; repeated calls return the same variable.
    pub fn param(&mut self, id: usize, value: &Matrix) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(value.clone(), Op::Leaf);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!((1, self.value(a).cols), bias.shape(), "bias shape");
        let mut v = self.value(a).clone();
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape());
        let v = Matrix { rows: x.rows, cols: x.cols, data: x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect() };
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let s = m.data.iter().sum::<f64>() / m.data.len() as f64;
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::Mean(a))
    }

    /// Row `k` of the result is row `idx[k]` of `a`.
    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let m = self.value(a);
        let mut v = Matrix::zeros(idx.len(), m.cols);
        for (k, &i) in idx.iter().enumerate() {
            v.row_mut(k).copy_from_slice(m.row(i));
        }
        self.push(v, Op::Gather(a, idx))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in &parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat column mismatch");
            data.extend_from_slice(&m.data);
        }
        let v = Matrix::from_vec(data.len() / cols.max(1), cols, data);
        self.push(v, Op::ConcatRows(parts))
    }

    /// `n` rows; row `idx[k]` accumulates row `k` of `a`.
    pub fn scatter_add(&mut self, a: Var, idx: Vec<usize>, n: usize) -> Var {
        let m = self.value(a);
        assert_eq!(idx.len(), m.rows);
        let mut v = Matrix::zeros(n, m.cols);
        for (k, &i) in idx.iter().enumerate() {
            for (x, y) in v.row_mut(i).iter_mut().zip(m.row(k)) {
                *x += y;
            }
        }
        self.push(v, Op::ScatterAdd(a, idx))
    }

    pub fn scale_rows(&mut self, a: Var, w: Var) -> Var {
        let (m, s) = (self.value(a), self.value(w));
        assert_eq!((m.rows, 1), s.shape());
        let mut v = m.clone();
        for r in 0..v.rows {
            let c = s.data[r];
            v.row_mut(r).iter_mut().for_each(|x| *x *= c);
        }
        self.push(v, Op::ScaleRows(a, w))
    }

    /// Softmax of a column vector within groups sharing a segment id.
    pub fn segment_softmax(&mut self, a: Var, seg: Vec<usize>) -> Var {
        let m = self.value(a);
        assert_eq!((seg.len(), 1), m.shape());
        let n = seg.iter().copied().max().map_or(0, |x| x + 1);
        let mut mx = vec![f64::NEG_INFINITY; n];
        for (k, &s) in seg.iter().enumerate() {
            mx[s] = mx[s].max(m.data[k]);
        }
        let e: Vec<f64> = seg.iter().enumerate().map(|(k, &s)| (m.data[k] - mx[s]).exp()).collect();
        let mut z = vec![0.0; n];
        for (k, &s) in seg.iter().enumerate() {
            z[s] += e[k];
        }
        let v = Matrix::from_vec(seg.len(), 1, seg.iter().enumerate().map(|(k, &s)| e[k] / z[s]).collect());
        self.push(v, Op::SegmentSoftmax(a, seg))
    }

    /// Column-wise max over rows of each segment; empty segments give 0.
    pub fn segment_max(&mut self, a: Var, seg: &[usize], n: usize) -> Var {
        let m = self.value(a);
        assert_eq!(seg.len(), m.rows);
        let mut arg: Vec<Option<usize>> = vec![None; n * m.cols];
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..m.cols {
                let slot = &mut arg[s * m.cols + c];
                if slot.map_or(true, |b| m.at(r, c) > m.at(b, c)) {
                    *slot = Some(r);
                }
            }
        }
        let data = arg.iter().enumerate().map(|(k, a)| a.map_or(0.0, |r| m.at(r, k % m.cols))).collect();
        let v = Matrix::from_vec(n, m.cols, data);
        self.push(v, Op::SegmentMax(a, arg))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| leaky(x, slope));
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(elu);
        self.push(v, Op::Elu(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Per-row cross-entropy of logits against target classes, as a column.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>) -> Var {
        let m = self.value(logits);
        assert_eq!(targets.len(), m.rows);
        let mut probs = Matrix::zeros(m.rows, m.cols);
        let mut losses = Vec::with_capacity(m.rows);
        for (r, &t) in targets.iter().enumerate() {
            let (l, p) = cross_entropy_row(m.row(r), t);
            losses.push(l);
            probs.row_mut(r).copy_from_slice(&p);
        }
        let v = Matrix::from_vec(m.rows, 1, losses);
        self.push(v, Op::CrossEntropy(logits, targets, probs))
    }

    /// Gradients of scalar `loss` with respect to every parameter leaf, keyed
    /// by parameter id. Parameters not reachable from `loss` get zeros.
    pub fn backward(&self, loss: Var) -> HashMap<usize, Matrix> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be scalar");
        let mut grads = Grads((0..self.nodes.len()).map(|_| None).collect());
        grads.0[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));
        for i in (0..=loss.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            if let Some(g) = grads.0[i].take() {
                self.propagate(i, g, &mut grads);
            }
        }
        self.params
            .iter()
            .map(|(&id, &v)| {
                let (r, c) = self.value(v).shape();
                (id, grads.0[v.0].take().unwrap_or_else(|| Matrix::zeros(r, c)))
            })
            .collect()
    }

    fn propagate(&self, i: usize, g: Matrix, grads: &mut Grads) {
        let out = &self.nodes[i].value;
        let elementwise = |x: &Matrix, f: &dyn Fn(f64, f64) -> f64| {
            Matrix::from_vec(g.rows, g.cols, g.data.iter().zip(&x.data).map(|(&gv, &xv)| f(gv, xv)).collect())
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                grads.add(*a, g.matmul_t(self.value(*b)));
                grads.add(*b, self.value(*a).t_matmul(&g));
            }
            Op::Add(a, b) => {
                grads.add(*a, g.clone());
                grads.add(*b, g);
            }
            Op::AddRow(a, b) => {
                let bias = grads.slot(*b, self.value(*b));
                for r in 0..g.rows {
                    for (x, y) in bias.data.iter_mut().zip(g.row(r)) {
                        *x += y;
                    }
                }
                grads.add(*a, g);
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                grads.add(*a, elementwise(y, &|gv, yv| gv * yv));
                grads.add(*b, elementwise(x, &|gv, xv| gv * xv));
            }
            Op::Scale(a, c) => grads.add(*a, g.map(|x| c * x)),
            Op::Sum(a) | Op::Mean(a) => {
                let (r, c) = self.value(*a).shape();
                let v = if matches!(self.nodes[i].op, Op::Mean(_)) { g.data[0] / (r * c) as f64 } else { g.data[0] };
                grads.add(*a, Matrix::from_vec(r, c, vec![v; r * c]));
            }
            Op::Gather(a, idx) => {
                let d = grads.slot(*a, self.value(*a));
                for (k, &src) in idx.iter().enumerate() {
                    for (x, y) in d.row_mut(src).iter_mut().zip(g.row(k)) {
                        *x += y;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for &p in parts {
                    let len = self.value(p).data.len();
                    let (r, c) = self.value(p).shape();
                    grads.add(p, Matrix::from_vec(r, c, g.data[at..at + len].to_vec()));
                    at += len;
                }
            }
            Op::ScatterAdd(a, idx) => {
                let mut d = Matrix::zeros(idx.len(), g.cols);
                for (k, &dst) in idx.iter().enumerate() {
                    d.row_mut(k).copy_from_slice(g.row(dst));
                }
                grads.add(*a, d);
            }
            Op::ScaleRows(a, w) => {
                let (m, s) = (self.value(*a), self.value(*w));
                let mut dw = Matrix::zeros(s.rows, 1);
                for r in 0..m.rows {
                    dw.data[r] = g.row(r).iter().zip(m.row(r)).map(|(p, q)| p * q).sum();
                }
                let mut da = g;
                for r in 0..m.rows {
                    da.row_mut(r).iter_mut().for_each(|x| *x *= s.data[r]);
                }
                grads.add(*a, da);
                grads.add(*w, dw);
            }
            Op::SegmentSoftmax(a, seg) => {
                // d x_k = y_k (g_k - sum_{j in seg} g_j y_j)
                let n = seg.iter().copied().max().map_or(0, |x| x + 1);
                let mut dot = vec![0.0; n];
                for (k, &s) in seg.iter().enumerate() {
                    dot[s] += g.data[k] * out.data[k];
                }
                let d = seg.iter().enumerate().map(|(k, &s)| out.data[k] * (g.data[k] - dot[s])).collect();
                grads.add(*a, Matrix::from_vec(seg.len(), 1, d));
            }
            Op::SegmentMax(a, arg) => {
                let c = self.value(*a).cols;
                let d = grads.slot(*a, self.value(*a));
                for (k, src) in arg.iter().enumerate() {
                    if let Some(row) = src {
                        d.data[row * c + k % c] += g.data[k];
                    }
                }
            }
            Op::LeakyRelu(a, s) => grads.add(*a, elementwise(self.value(*a), &|gv, xv| if xv > 0.0 { gv } else { s * gv })),
            Op::Elu(a) => grads.add(*a, elementwise(self.value(*a), &|gv, xv| if xv > 0.0 { gv } else { gv * xv.exp() })),
            Op::Relu(a) => grads.add(*a, elementwise(self.value(*a), &|gv, xv| if xv > 0.0 { gv } else { 0.0 })),
            Op::CrossEntropy(a, targets, probs) => {
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    d.row_mut(r).iter_mut().for_each(|x| *x *= g.data[r]);
                    d.data[r * d.cols + t] -= g.data[r];
                }
                grads.add(*a, d);
            }
        }
    }
}

struct Grads(Vec<Option<Matrix>>);

impl Grads {
    fn add(&mut self, v: Var, d: Matrix) {
        match &mut self.0[v.0] {
            Some(m) => m.add_assign(&d),
            slot => *slot = Some(d),
        }
    }

    /// Accumulator for `v`, zero-initialized on first use.
    fn slot(&mut self, v: Var, like: &Matrix) -> &mut Matrix {
        self.0[v.0].get_or_insert_with(|| Matrix::zeros(like.rows, like.cols))
    }
}
