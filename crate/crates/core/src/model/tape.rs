//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Trainable tensors
//! enter through [`Tape::param`] and receive gradients in [`Tape::backward`].

use std::rc::Rc;

use ndarray::{s, Array2, Axis};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// In-neighbour structure of one message-passing step, in CSR form over
/// destination rows. Entries of `sources` index rows of the source matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub sources: Vec<usize>,
}

impl Adjacency {
    pub fn n_dst(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.sources[self.offsets[i]..self.offsets[i + 1]]
    }
}

enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    Gather(Var, Rc<Vec<usize>>),
    Concat(Vec<Var>),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Softplus(Var),
    Scale(Var, f64),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        scale: f64,
        adj: Rc<Adjacency>,
        /// Softmax weights, `alpha[e * heads + c]` for edge slot `e`.
        alpha: Vec<f64>,
    },
    Rmspe {
        pred: Var,
        target: Rc<Vec<f64>>,
        eps: f64,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients for every tensor of a [`ParamStore`], zero where unused.
pub type Gradients = Vec<Array2<f64>>;

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, index: usize) -> Var {
        self.push(store.tensor(index).clone(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn gather(&mut self, a: Var, rows: Rc<Vec<usize>>) -> Var {
        let value = self.value(a).select(Axis(0), &rows);
        self.push(value, Op::Gather(a, rows))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat row counts differ");
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    /// Adds a `1 x d` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(softplus);
        self.push(value, Op::Softplus(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        self.push(value, Op::Scale(a, factor))
    }

    /// Multi-head dot-product attention aggregation.
    ///
    /// `q` has one row per destination, `k` and `v` one row per source; all
    /// are split into `heads` equal column blocks. For destination `i` and
    /// head `c` the output block is `sum_j alpha_ij v_jc` with
    /// `alpha_i = softmax_j(scale * q_ic . k_jc)` over `adj.row(i)`. A
    /// destination without sources yields zeros.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, scale: f64, adj: Rc<Adjacency>) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let width = qv.ncols();
        assert_eq!(width % heads, 0, "width not divisible by heads");
        assert_eq!(qv.nrows(), adj.n_dst());
        assert_eq!(kv.ncols(), width);
        let dh = width / heads;
        let dv = vv.ncols() / heads;
        let mut out = Array2::zeros((adj.n_dst(), vv.ncols()));
        let mut alpha = vec![0.0; adj.sources.len() * heads];
        let mut logits = Vec::new();
        for i in 0..adj.n_dst() {
            let row = adj.row(i);
            if row.is_empty() {
                continue;
            }
            let base = adj.offsets[i];
            for c in 0..heads {
                let qi = qv.slice(s![i, c * dh..(c + 1) * dh]);
                logits.clear();
                logits.extend(
                    row.iter()
                        .map(|&j| scale * qi.dot(&kv.slice(s![j, c * dh..(c + 1) * dh]))),
                );
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in logits.iter_mut() {
                    *l = (*l - max).exp();
                    z += *l;
                }
                let mut o = out.slice_mut(s![i, c * dv..(c + 1) * dv]);
                for (e, (&j, &w)) in row.iter().zip(&logits).enumerate() {
                    let a = w / z;
                    alpha[(base + e) * heads + c] = a;
                    o.scaled_add(a, &vv.slice(s![j, c * dv..(c + 1) * dv]));
                }
            }
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                scale,
                adj,
                alpha,
            },
        )
    }

    /// Softmax weights of an attention node, indexed `[edge slot][head]`.
    pub fn attention_weights(&self, v: Var) -> Option<Vec<Vec<f64>>> {
        match &self.nodes[v.0].op {
            Op::Attention { alpha, heads, .. } => {
                Some(alpha.chunks(*heads).map(<[f64]>::to_vec).collect())
            }
            _ => None,
        }
    }

    /// Scalar RMSPE of a column of predictions against targets.
    pub fn rmspe(&mut self, pred: Var, target: Rc<Vec<f64>>, eps: f64) -> Result<Var> {
        let p = self.value(pred);
        if p.ncols() != 1 || p.nrows() != target.len() {
            return Err(Error::InvalidInput(format!(
                "rmspe: {}x{} predictions for {} targets",
                p.nrows(),
                p.ncols(),
                target.len()
            )));
        }
        let loss = crate::metrics::rmspe(p.as_slice().expect("column is contiguous"), &target, eps)?;
        Ok(self.push(Array2::from_elem((1, 1), loss), Op::Rmspe { pred, target, eps }))
    }

    /// Gradients of the `1 x 1` node `out` with respect to every parameter.
    pub fn backward(&self, out: Var, store: &ParamStore) -> Result<Gradients> {
        if self.value(out).dim() != (1, 1) {
            return Err(Error::InvalidInput("backward from a non-scalar".into()));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Array2::ones((1, 1)));
        let mut param_grads: Gradients = (0..store.len())
            .map(|i| Array2::zeros(store.tensor(i).dim()))
            .collect();

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(x) => *x += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("non-finite gradient at tape node {idx}")));
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => param_grads[*p] += &g,
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Gather(a, rows) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Relu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Softplus(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| *d *= sigmoid(x));
                    acc(&mut grads, *a, ga);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::Attention {
                    q,
                    k,
                    v,
                    heads,
                    scale,
                    adj,
                    alpha,
                } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let heads = *heads;
                    let dh = qv.ncols() / heads;
                    let dv = vv.ncols() / heads;
                    let mut gq = Array2::zeros(qv.dim());
                    let mut gk = Array2::zeros(kv.dim());
                    let mut gv = Array2::zeros(vv.dim());
                    let mut dalpha = Vec::new();
                    for i in 0..adj.n_dst() {
                        let row = adj.row(i);
                        let base = adj.offsets[i];
                        for c in 0..heads {
                            let gi = g.slice(s![i, c * dv..(c + 1) * dv]);
                            dalpha.clear();
                            let mut mean = 0.0;
                            for (e, &j) in row.iter().enumerate() {
                                let a = alpha[(base + e) * heads + c];
                                let da = gi.dot(&vv.slice(s![j, c * dv..(c + 1) * dv]));
                                gv.slice_mut(s![j, c * dv..(c + 1) * dv]).scaled_add(a, &gi);
                                mean += a * da;
                                dalpha.push(da);
                            }
                            for (e, &j) in row.iter().enumerate() {
                                let a = alpha[(base + e) * heads + c];
                                let ds = a * (dalpha[e] - mean) * scale;
                                if ds == 0.0 {
                                    continue;
                                }
                                let kj = kv.slice(s![j, c * dh..(c + 1) * dh]);
                                gq.slice_mut(s![i, c * dh..(c + 1) * dh]).scaled_add(ds, &kj);
                                let qi = qv.slice(s![i, c * dh..(c + 1) * dh]);
                                gk.slice_mut(s![j, c * dh..(c + 1) * dh]).scaled_add(ds, &qi);
                            }
                        }
                    }
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *v, gv);
                }
                Op::Rmspe { pred, target, eps } => {
                    let p = self.value(*pred);
                    let loss = node.value[[0, 0]];
                    let n = target.len() as f64;
                    let mut gp = Array2::zeros(p.dim());
                    if loss > 0.0 {
                        let up = g[[0, 0]] / (n * loss);
                        for (r, (&pi, &ti)) in p.column(0).iter().zip(target.iter()).enumerate() {
                            let d = ti + eps;
                            gp[[r, 0]] = up * (pi - ti) / (d * d);
                        }
                    }
                    acc(&mut grads, *pred, gp);
                }
            }
        }
        Ok(param_grads)
    }
}
