//! Reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so a node's inputs always have
//! smaller indices. [`Graph::grad`] walks the tape backwards and emits the
//! adjoint computation as *new nodes*, which keeps gradients differentiable:
//! taking the gradient of an expression that itself contains a gradient
//! (the critic's input-gradient norm in WGAN-GP) needs no special casing.

use std::collections::BTreeMap;

use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
#[allow(dead_code)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    AddBias(Var, Var),
    SumRows(Var),
    BroadcastRows(Var, usize),
    SumCols(Var),
    BroadcastCols(Var, usize),
    Sum(Var),
    Expand(Var, usize, usize),
    Relu(Var),
    LeakyRelu(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Recip(Var),
    Square(Var),
    RowNorm(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
    PadCols(Var, usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Parameters of one [`ParamStore`] bound into a graph as leaves.
#[derive(Debug, Clone, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::contract(format!("parameter {name:?} is not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Var)>) -> Self {
        Bound {
            vars: pairs.into_iter().collect(),
        }
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.rows_cols()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn check_rank2(&self, v: Var, op: &'static str) -> Result<()> {
        let s = self.shape(v);
        if s.len() == 2 {
            Ok(())
        } else {
            Err(Error::Shape {
                op,
                left: s.to_vec(),
                right: vec![],
            })
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) == self.shape(b) {
            Ok(())
        } else {
            Err(Error::Shape {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            })
        }
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        value.dims()?;
        Ok(self.push(value, Op::Leaf, true))
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        value.dims()?;
        Ok(self.push(value, Op::Constant, false))
    }

    /// Bind every parameter of `store` as a leaf.
    pub fn bind(&mut self, store: &ParamStore) -> Result<Bound> {
        let mut vars = BTreeMap::new();
        for (name, t) in store.iter() {
            let v = self.leaf(t.clone())?;
            vars.insert(name.to_string(), v);
        }
        Ok(Bound { vars })
    }

    /// Cut the graph: a constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.push(value, Op::Constant, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_rank2(a, "matmul")?;
        self.check_rank2(b, "matmul")?;
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose().expect("graph tensors are rank 2");
        let rg = self.rg(a);
        self.push(value, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(value, Op::AddScalar(a, c), rg)
    }

    /// `a (n x k) + bias (1 x k)`, the bias repeated on every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, k) = self.dims(a);
        if self.shape(bias) != [1, k] {
            return Err(Error::Shape {
                op: "add_bias",
                left: vec![n, k],
                right: self.shape(bias).to_vec(),
            });
        }
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(a).clone();
        for row in value.data_mut().chunks_mut(k) {
            for (x, bb) in row.iter_mut().zip(&b) {
                *x += bb;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(value, Op::AddBias(a, bias), rg))
    }

    /// Column sums: `n x k -> 1 x k`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let (_, k) = self.dims(a);
        let mut out = vec![0.0; k];
        for row in self.value(a).data().chunks(k) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        let rg = self.rg(a);
        self.push(Tensor::matrix(1, k, out).unwrap(), Op::SumRows(a), rg)
    }

    /// `1 x k -> n x k`.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (r, k) = self.dims(a);
        if r != 1 || n == 0 {
            return Err(Error::Shape {
                op: "broadcast_rows",
                left: vec![r, k],
                right: vec![n, k],
            });
        }
        let row = self.value(a).data().to_vec();
        let data = row.iter().copied().cycle().take(n * k).collect();
        let rg = self.rg(a);
        Ok(self.push(Tensor::matrix(n, k, data).unwrap(), Op::BroadcastRows(a, n), rg))
    }

    /// Row sums: `n x k -> n x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let (n, k) = self.dims(a);
        let out = self.value(a).data().chunks(k).map(|r| r.iter().sum()).collect();
        let rg = self.rg(a);
        self.push(Tensor::matrix(n, 1, out).unwrap(), Op::SumCols(a), rg)
    }

    /// `n x 1 -> n x k`.
    pub fn broadcast_cols(&mut self, a: Var, k: usize) -> Result<Var> {
        let (n, c) = self.dims(a);
        if c != 1 || k == 0 {
            return Err(Error::Shape {
                op: "broadcast_cols",
                left: vec![n, c],
                right: vec![n, k],
            });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, k))
            .collect();
        let rg = self.rg(a);
        Ok(self.push(Tensor::matrix(n, k, data).unwrap(), Op::BroadcastCols(a, k), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `1 x 1 -> rows x cols`.
    pub fn expand(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        if self.shape(a) != [1, 1] || rows == 0 || cols == 0 {
            return Err(Error::Shape {
                op: "expand",
                left: self.shape(a).to_vec(),
                right: vec![rows, cols],
            });
        }
        let x = self.value(a).data()[0];
        let rg = self.rg(a);
        Ok(self.push(Tensor::filled(rows, cols, x), Op::Expand(a, rows, cols), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::Softmax(a), rg)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let (_, k) = self.dims(a);
        let mut value = self.value(a).clone();
        for row in value.data_mut().chunks_mut(k) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::LogSoftmax(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        let rg = self.rg(a);
        self.push(value, Op::Log(a), rg)
    }

    /// `1 / x`, defined as 0 at `x == 0`.
    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.value(a).map(safe_recip);
        let rg = self.rg(a);
        self.push(value, Op::Recip(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(value, Op::Square(a), rg)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.square(a);
        self.sum(s)
    }

    /// Euclidean norm of each row: `n x k -> n x 1`. The gradient at a zero
    /// row is taken to be zero.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let (n, k) = self.dims(a);
        let out = self
            .value(a)
            .data()
            .chunks(k)
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let rg = self.rg(a);
        self.push(Tensor::matrix(n, 1, out).unwrap(), Op::RowNorm(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ka) = self.dims(a);
        let (nb, kb) = self.dims(b);
        if na != nb {
            return Err(Error::Shape {
                op: "concat_cols",
                left: vec![na, ka],
                right: vec![nb, kb],
            });
        }
        let mut data = Vec::with_capacity(na * (ka + kb));
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        for i in 0..na {
            data.extend_from_slice(&va[i * ka..(i + 1) * ka]);
            data.extend_from_slice(&vb[i * kb..(i + 1) * kb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(na, ka + kb, data).unwrap(), Op::ConcatCols(a, b), rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (n, k) = self.dims(a);
        if start >= end || end > k {
            return Err(Error::Shape {
                op: "slice_cols",
                left: vec![n, k],
                right: vec![start, end],
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(n * w);
        for row in self.value(a).data().chunks(k) {
            data.extend_from_slice(&row[start..end]);
        }
        let rg = self.rg(a);
        Ok(self.push(Tensor::matrix(n, w, data).unwrap(), Op::SliceCols(a, start, end), rg))
    }

    /// Embed `a (n x w)` at column `offset` of a zero `n x total` matrix.
    pub fn pad_cols(&mut self, a: Var, offset: usize, total: usize) -> Result<Var> {
        let (n, w) = self.dims(a);
        if offset + w > total {
            return Err(Error::Shape {
                op: "pad_cols",
                left: vec![n, w],
                right: vec![offset, total],
            });
        }
        let mut data = vec![0.0; n * total];
        for (i, row) in self.value(a).data().chunks(w).enumerate() {
            data[i * total + offset..i * total + offset + w].copy_from_slice(row);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::matrix(n, total, data).unwrap(),
            Op::PadCols(a, offset, total),
            rg,
        ))
    }

    /// `x W^T + b` for `W: out x in`, `b: 1 x out`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let wt = self.transpose(w);
        let h = self.matmul(x, wt)?;
        self.add_bias(h, b)
    }

    /// Gradients of the scalar `y` with respect to each of `xs`, returned as
    /// graph nodes so they can be differentiated again.
    pub fn grad(&mut self, y: Var, xs: &[Var]) -> Result<Vec<Var>> {
        if self.shape(y) != [1, 1] {
            return Err(Error::contract(format!(
                "gradient requires a scalar output, got shape {:?}",
                self.shape(y)
            )));
        }
        let mut grads: Vec<Option<Var>> = vec![None; y.0 + 1];
        let seed = self.push(Tensor::scalar(1.0), Op::Constant, false);
        grads[y.0] = Some(seed);

        for i in (0..=y.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i] else { continue };
            let op = self.nodes[i].op;
            let out = Var(i);
            self.backprop_node(op, out, g, &mut grads)?;
        }

        xs.iter()
            .map(|&x| match grads.get(x.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let (r, c) = self.dims(x);
                    self.constant(Tensor::zeros(r, c))
                }
            })
            .collect()
    }

    fn accumulate(&mut self, grads: &mut [Option<Var>], target: Var, contrib: Var) -> Result<()> {
        if !self.rg(target) {
            return Ok(());
        }
        grads[target.0] = Some(match grads[target.0] {
            Some(prev) => self.add(prev, contrib)?,
            None => contrib,
        });
        Ok(())
    }

    fn backprop_node(&mut self, op: Op, out: Var, g: Var, grads: &mut [Option<Var>]) -> Result<()> {
        match op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let bt = self.transpose(b);
                    let ga = self.matmul(g, bt)?;
                    self.accumulate(grads, a, ga)?;
                }
                if self.rg(b) {
                    let at = self.transpose(a);
                    let gb = self.matmul(at, g)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            Op::Transpose(a) => {
                let ga = self.transpose(g);
                self.accumulate(grads, a, ga)?;
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, g)?;
                self.accumulate(grads, b, g)?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g)?;
                if self.rg(b) {
                    let gb = self.scale(g, -1.0);
                    self.accumulate(grads, b, gb)?;
                }
            }
            Op::Mul(a, b) => {
                if self.rg(a) {
                    let ga = self.mul(g, b)?;
                    self.accumulate(grads, a, ga)?;
                }
                if self.rg(b) {
                    let gb = self.mul(g, a)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            Op::Scale(a, c) => {
                let ga = self.scale(g, c);
                self.accumulate(grads, a, ga)?;
            }
            Op::AddScalar(a, _) => self.accumulate(grads, a, g)?,
            Op::AddBias(a, b) => {
                self.accumulate(grads, a, g)?;
                if self.rg(b) {
                    let gb = self.sum_rows(g);
                    self.accumulate(grads, b, gb)?;
                }
            }
            Op::SumRows(a) => {
                let (n, _) = self.dims(a);
                let ga = self.broadcast_rows(g, n)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::BroadcastRows(a, _) => {
                let ga = self.sum_rows(g);
                self.accumulate(grads, a, ga)?;
            }
            Op::SumCols(a) => {
                let (_, k) = self.dims(a);
                let ga = self.broadcast_cols(g, k)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::BroadcastCols(a, _) => {
                let ga = self.sum_cols(g);
                self.accumulate(grads, a, ga)?;
            }
            Op::Sum(a) => {
                let (r, c) = self.dims(a);
                let ga = self.expand(g, r, c)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Expand(a, _, _) => {
                let ga = self.sum(g);
                self.accumulate(grads, a, ga)?;
            }
            Op::Relu(a) => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                let m = self.constant(mask)?;
                let ga = self.mul(g, m)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::LeakyRelu(a, slope) => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { slope });
                let m = self.constant(mask)?;
                let ga = self.mul(g, m)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Softmax(a) => {
                // ds = s * (g - <g, s>)
                let (_, k) = self.dims(a);
                let gs = self.mul(g, out)?;
                let dot = self.sum_cols(gs);
                let dot = self.broadcast_cols(dot, k)?;
                let centered = self.sub(g, dot)?;
                let ga = self.mul(out, centered)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::LogSoftmax(a) => {
                // g - softmax(a) * rowsum(g)
                let (_, k) = self.dims(a);
                let s = self.softmax(a);
                let gsum = self.sum_cols(g);
                let gsum = self.broadcast_cols(gsum, k)?;
                let t = self.mul(s, gsum)?;
                let ga = self.sub(g, t)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Log(a) => {
                let r = self.recip(a);
                let ga = self.mul(g, r)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Recip(a) => {
                let r2 = self.mul(out, out)?;
                let t = self.mul(g, r2)?;
                let ga = self.scale(t, -1.0);
                self.accumulate(grads, a, ga)?;
            }
            Op::Square(a) => {
                let t = self.mul(g, a)?;
                let ga = self.scale(t, 2.0);
                self.accumulate(grads, a, ga)?;
            }
            Op::RowNorm(a) => {
                // d|x| = x / |x|
                let (_, k) = self.dims(a);
                let inv = self.recip(out);
                let t = self.mul(g, inv)?;
                let t = self.broadcast_cols(t, k)?;
                let ga = self.mul(t, a)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::ConcatCols(a, b) => {
                let (_, ka) = self.dims(a);
                let (_, kb) = self.dims(b);
                if self.rg(a) {
                    let ga = self.slice_cols(g, 0, ka)?;
                    self.accumulate(grads, a, ga)?;
                }
                if self.rg(b) {
                    let gb = self.slice_cols(g, ka, ka + kb)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            Op::SliceCols(a, start, _) => {
                let (_, k) = self.dims(a);
                let ga = self.pad_cols(g, start, k)?;
                self.accumulate(grads, a, ga)?;
            }
            Op::PadCols(a, offset, _) => {
                let (_, w) = self.dims(a);
                let ga = self.slice_cols(g, offset, offset + w)?;
                self.accumulate(grads, a, ga)?;
            }
        }
        Ok(())
    }

    /// Populate `store`'s gradients with `d loss / d param` for every
    /// parameter in `bound`.
    pub fn backward(&mut self, loss: Var, bound: &Bound, store: &mut ParamStore) -> Result<()> {
        let names: Vec<(String, Var)> = bound.iter().map(|(n, v)| (n.to_string(), v)).collect();
        let vars: Vec<Var> = names.iter().map(|(_, v)| *v).collect();
        let grads = self.grad(loss, &vars)?;
        for ((name, _), g) in names.iter().zip(grads) {
            store.set_grad(name, self.value(g).clone())?;
        }
        Ok(())
    }

    /// [`Graph::backward`] for several parameter sets with one reverse pass.
    pub fn backward_all(&mut self, loss: Var, targets: &mut [(&Bound, &mut ParamStore)]) -> Result<()> {
        let mut vars = Vec::new();
        for (b, _) in targets.iter() {
            vars.extend(b.iter().map(|(_, v)| v));
        }
        let grads = self.grad(loss, &vars)?;
        let mut it = grads.into_iter();
        for (b, store) in targets.iter_mut() {
            for ((name, _), g) in b.iter().zip(it.by_ref()) {
                store.set_grad(name, self.value(g).clone())?;
            }
        }
        Ok(())
    }
}

pub(crate) fn safe_recip(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        1.0 / x
    }
}

/// Row-wise softmax of a rank-2 tensor, shifted by the row max.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let (_, k) = t.rows_cols();
    let mut value = t.clone();
    for row in value.data_mut().chunks_mut(k) {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for x in row.iter_mut() {
            *x = (*x - mx).exp();
            s += *x;
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    value
}
