//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records each operation as it is evaluated. Parameters are
//! borrowed from a [`ParamStore`] rather than copied; their gradients are
//! collected by store index after [`Tape::backward`].

use super::params::ParamStore;
use super::tensor::Matrix;

pub type Var = usize;

const LN_EPS: f64 = 1e-5;

enum Op {
    Input,
    Param(usize),
    Gather(Var, Vec<usize>),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    DistBias(Var, Var, Matrix),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Matrix,
        rstd: Vec<f64>,
    },
    Gelu(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    Row(Var, usize),
    Mask(Var, Matrix),
    CrossEntropy(Var, usize, Vec<f64>),
    BceLogits(Var, Matrix),
    Sum(Vec<Var>),
}

struct Node {
    value: Option<Matrix>,
    op: Op,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

fn gelu(x: f64) -> (f64, f64) {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let y = 0.5 * x * (1.0 + t);
    let du = C * (1.0 + 3.0 * 0.044715 * x * x);
    let dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    (y, dy)
}

fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|x| *x = u);
        return;
    }
    let mut s = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    row.iter_mut().for_each(|x| *x /= s);
}

/// Row-wise softmax of a plain matrix; `-inf` entries get probability zero.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows {
        softmax_in_place(out.row_mut(r));
    }
    out
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Tape<'a> {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match (&self.nodes[v].value, &self.nodes[v].op) {
            (Some(m), _) => m,
            (None, Op::Param(i)) => self.store.get(*i),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Input)
    }

    pub fn param(&mut self, index: usize) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(index),
        });
        self.nodes.len() - 1
    }

    /// Rows of `src` selected by `idx`.
    pub fn gather(&mut self, src: Var, idx: &[usize]) -> Var {
        let s = self.value(src);
        let mut out = Matrix::zeros(idx.len(), s.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(s.row(i));
        }
        self.push(out, Op::Gather(src, idx.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// a · bᵀ
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the 1×c row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        let bias = self.value(b);
        assert_eq!((1, v.cols), bias.shape(), "add_row shape");
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= s);
        self.push(v, Op::Scale(a, s))
    }

    /// x − a·D for a 1×1 node `a` and constant `d` of x's shape.
    pub fn dist_bias(&mut self, x: Var, a: Var, d: Matrix) -> Var {
        let s = self.value(a).data[0];
        let mut v = self.value(x).clone();
        assert_eq!(v.shape(), d.shape(), "dist_bias shape");
        for (y, dd) in v.data.iter_mut().zip(&d.data) {
            *y -= s * dd;
        }
        self.push(v, Op::DistBias(x, a, d))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let v = softmax_rows(self.value(x));
        self.push(v, Op::Softmax(x))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let c = xv.cols;
        let mut xhat = Matrix::zeros(xv.rows, c);
        let mut out = Matrix::zeros(xv.rows, c);
        let mut rstd = Vec::with_capacity(xv.rows);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(rs);
            for k in 0..c {
                let h = (row[k] - mean) * rs;
                xhat.set(r, k, h);
                out.set(r, k, h * g.data[k] + b.data[k]);
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
        )
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        v.data.iter_mut().for_each(|y| *y = gelu(*y).0);
        self.push(v, Op::Gelu(x))
    }

    /// Column-wise concatenation of equal-height nodes.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows, rows, "concat height");
            for r in 0..rows {
                out.row_mut(r)[off..off + m.cols].copy_from_slice(m.row(r));
            }
            off += m.cols;
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let m = self.value(x);
        let mut out = Matrix::zeros(m.rows, width);
        for r in 0..m.rows {
            out.row_mut(r).copy_from_slice(&m.row(r)[start..start + width]);
        }
        self.push(out, Op::SliceCols(x, start))
    }

    pub fn row(&mut self, x: Var, r: usize) -> Var {
        let v = Matrix::row_vector(self.value(x).row(r).to_vec());
        self.push(v, Op::Row(x, r))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mask(&mut self, x: Var, m: Matrix) -> Var {
        let mut v = self.value(x).clone();
        for (y, k) in v.data.iter_mut().zip(&m.data) {
            *y *= k;
        }
        self.push(v, Op::Mask(x, m))
    }

    /// −log softmax(logits)[label] for 1×C logits.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let mut p = self.value(logits).data.clone();
        softmax_in_place(&mut p);
        let loss = -p[label].max(f64::MIN_POSITIVE).ln();
        self.push(Matrix::scalar(loss), Op::CrossEntropy(logits, label, p))
    }

    /// Mean binary cross-entropy of sigmoid(z) against targets.
    pub fn bce_logits(&mut self, z: Var, targets: Matrix) -> Var {
        let zv = self.value(z);
        assert_eq!(zv.shape(), targets.shape(), "bce shape");
        let n = zv.len() as f64;
        let loss = zv
            .data
            .iter()
            .zip(&targets.data)
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        self.push(Matrix::scalar(loss), Op::BceLogits(z, targets))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.value(parts[0]).clone();
        for &p in &parts[1..] {
            v.add_assign(self.value(p));
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    /// Gradients of the 1×1 node `loss` with respect to every parameter
    /// in the store (zeros for parameters the tape never touched).
    pub fn backward(&self, loss: Var) -> Vec<Matrix> {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Matrix::scalar(1.0));
        let mut out: Vec<Matrix> = self
            .store
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows, t.cols))
            .collect();

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v] {
                Some(e) => e.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for v in (0..=loss).rev() {
            let Some(g) = grads[v].take() else { continue };
            match &self.nodes[v].op {
                Op::Input => {}
                Op::Param(i) => out[*i].add_assign(&g),
                Op::Gather(src, idx) => {
                    let s = self.value(*src);
                    let mut d = Matrix::zeros(s.rows, s.cols);
                    for (r, &i) in idx.iter().enumerate() {
                        for (x, y) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *src, d);
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    // y = a bᵀ: da = g b, db = gᵀ a
                    let da = g.matmul(self.value(*b));
                    let db = g.t_matmul(self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let mut db = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (x, y) in db.data.iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, s) => {
                    let mut d = g;
                    d.data.iter_mut().for_each(|x| *x *= s);
                    acc(&mut grads, *a, d);
                }
                Op::DistBias(x, a, dist) => {
                    let da: f64 = -g.data.iter().zip(&dist.data).map(|(p, q)| p * q).sum::<f64>();
                    acc(&mut grads, *a, Matrix::scalar(da));
                    acc(&mut grads, *x, g);
                }
                Op::Softmax(x) => {
                    let y = self.nodes[v].value.as_ref().unwrap();
                    let mut d = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (k, o) in d.row_mut(r).iter_mut().enumerate() {
                            *o = yr[k] * (gr[k] - dot);
                        }
                    }
                    acc(&mut grads, *x, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    rstd,
                } => {
                    let gv = self.value(*gain);
                    let c = xhat.cols;
                    let mut dx = Matrix::zeros(xhat.rows, c);
                    let mut dg = Matrix::zeros(1, c);
                    let mut db = Matrix::zeros(1, c);
                    for r in 0..xhat.rows {
                        let (h, gr) = (xhat.row(r), g.row(r));
                        let mut dh = vec![0.0; c];
                        for k in 0..c {
                            dg.data[k] += gr[k] * h[k];
                            db.data[k] += gr[k];
                            dh[k] = gr[k] * gv.data[k];
                        }
                        let m1 = dh.iter().sum::<f64>() / c as f64;
                        let m2 = dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for (k, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = rstd[r] * (dh[k] - m1 - h[k] * m2);
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gain, dg);
                    acc(&mut grads, *bias, db);
                }
                Op::Gelu(x) => {
                    let xv = self.value(*x);
                    let mut d = g;
                    for (o, &xi) in d.data.iter_mut().zip(&xv.data) {
                        *o *= gelu(xi).1;
                    }
                    acc(&mut grads, *x, d);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        let mut d = Matrix::zeros(g.rows, w);
                        for r in 0..g.rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        acc(&mut grads, p, d);
                    }
                }
                Op::SliceCols(x, start) => {
                    let xv = self.value(*x);
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    for r in 0..g.rows {
                        d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *x, d);
                }
                Op::Row(x, r) => {
                    let xv = self.value(*x);
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    d.row_mut(*r).copy_from_slice(&g.data);
                    acc(&mut grads, *x, d);
                }
                Op::Mask(x, m) => {
                    let mut d = g;
                    for (o, k) in d.data.iter_mut().zip(&m.data) {
                        *o *= k;
                    }
                    acc(&mut grads, *x, d);
                }
                Op::CrossEntropy(x, label, p) => {
                    let s = g.data[0];
                    let mut d = Matrix::row_vector(p.iter().map(|q| q * s).collect());
                    d.data[*label] -= s;
                    acc(&mut grads, *x, d);
                }
                Op::BceLogits(z, t) => {
                    let zv = self.value(*z);
                    let s = g.data[0] / zv.len() as f64;
                    let d = Matrix::from_vec(
                        zv.rows,
                        zv.cols,
                        zv.data
                            .iter()
                            .zip(&t.data)
                            .map(|(&z, &t)| s * (1.0 / (1.0 + (-z).exp()) - t))
                            .collect(),
                    );
                    acc(&mut grads, *z, d);
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        acc(&mut grads, p, g.clone());
                    }
                }
            }
        }
        out
    }
}
