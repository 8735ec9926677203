use std::collections::HashMap;

use super::tensor::{matmul_nt, matmul_raw, matmul_tn};
use super::{Param, ParamId, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inputs to `log` are clamped below at this value.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, F),
    Square(Var),
    Scale(Var, F),
    AddScalar(Var, F),
    AddBias(Var, Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    MeanRows(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Var, Var),
    LogSoftmax(Var),
}

#[derive(Clone, Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    requires_grad: bool,
    grad: Option<Tensor<F>>,
}

/// Records a computation as it is evaluated and replays it in reverse to
/// obtain gradients.
///
/// Nodes are appended in evaluation order and only ever reference earlier
/// nodes, so the recorded graph is acyclic and reverse insertion order is a
/// valid topological order.
#[derive(Clone, Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    params: HashMap<ParamId, Var>,
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.leaf(value, false)
    }

    /// Binds `p` as a differentiable leaf. Binding the same parameter twice
    /// returns the same node, so shared weights accumulate correctly.
    pub fn param(&mut self, p: &Param<F>) -> Var {
        if let Some(&v) = self.params.get(&p.id()) {
            return v;
        }
        let v = self.leaf(p.value().clone(), true);
        self.params.insert(p.id(), v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of `v`; zeros when nothing reached it.
    pub fn grad(&self, v: Var) -> Tensor<F> {
        let n = &self.nodes[v.0];
        n.grad
            .clone()
            .unwrap_or_else(|| Tensor::zeros(n.value.shape()))
    }

    pub fn param_grad(&self, id: ParamId) -> Option<Tensor<F>> {
        self.params.get(&id).map(|&v| self.grad(v))
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn emit(
        &mut self,
        name: &'static str,
        value: Tensor<F>,
        op: Op<F>,
        inputs: &[Var],
    ) -> Result<Var> {
        if value.has_nan() {
            return Err(Error::NonFinite { op: name });
        }
        let rg = inputs.iter().any(|&v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Dimension {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(F, F) -> F) -> Tensor<F> {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data).expect("shapes checked")
    }

    fn unary(&mut self, name: &'static str, x: Var, op: Op<F>, f: impl Fn(F) -> F) -> Result<Var> {
        let value = self.value(x).map(f);
        self.emit(name, value, op, &[x])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.is_matrix() || !tb.is_matrix() || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = Tensor::matrix(m, n, matmul_raw(ta.data(), tb.data(), m, k, n))?;
        self.emit("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip(a, b, |x, y| x + y);
        self.emit("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip(a, b, |x, y| x - y);
        self.emit("sub", out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip(a, b, |x, y| x * y);
        self.emit("mul", out, Op::Mul(a, b), &[a, b])
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.unary("neg", x, Op::Neg(x), |v| -v)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, Op::Exp(x), F::exp)
    }

    /// Natural log of `max(x, 1e-12)`.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let eps = F::cst(LOG_EPS);
        self.unary("log", x, Op::Log(x), move |v| v.max(eps).ln())
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary("tanh", x, Op::Tanh(x), F::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, Op::Sigmoid(x), sigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, Op::Relu(x), |v| {
            if v > F::zero() {
                v
            } else {
                F::zero()
            }
        })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: F) -> Result<Var> {
        self.unary("leaky_relu", x, Op::LeakyRelu(x, slope), move |v| {
            if v > F::zero() {
                v
            } else {
                v * slope
            }
        })
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary("square", x, Op::Square(x), |v| v * v)
    }

    pub fn scale(&mut self, x: Var, c: F) -> Result<Var> {
        self.unary("scale", x, Op::Scale(x, c), move |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: F) -> Result<Var> {
        self.unary("add_scalar", x, Op::AddScalar(x, c), move |v| v + c)
    }

    /// `c - x`.
    pub fn rsub_scalar(&mut self, c: F, x: Var) -> Result<Var> {
        let n = self.neg(x)?;
        self.add_scalar(n, c)
    }

    /// Adds a bias row (shape `[n]` or `[1×n]`) to every row of `x: [m×n]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let n = tx.cols();
        let bias_ok = tx.is_matrix() && tb.len() == n && tb.rows() == 1;
        if !bias_ok {
            return Err(Error::Dimension {
                op: "add_bias",
                lhs: tx.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let bd = tb.data();
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bd[i % n])
            .collect();
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        self.emit("add_bias", out, Op::AddBias(x, b), &[x, b])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: F = self.value(x).data().iter().copied().sum();
        self.emit("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s: F = t.data().iter().copied().sum();
        let m = s / F::cst(t.len() as f64);
        self.emit("mean", Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Sums each row of `x: [m×n]` into `[m×1]`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let m = t.rows();
        let data = (0..m).map(|r| t.row(r).iter().copied().sum()).collect();
        let out = Tensor::matrix(m, 1, data)?;
        self.emit("sum_rows", out, Op::SumRows(x), &[x])
    }

    /// Averages each row of `x: [m×n]` into `[m×1]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (m, n) = (t.rows(), t.cols());
        let nf = F::cst(n as f64);
        let data = (0..m)
            .map(|r| t.row(r).iter().copied().sum::<F>() / nf)
            .collect();
        let out = Tensor::matrix(m, 1, data)?;
        self.emit("mean_rows", out, Op::MeanRows(x), &[x])
    }

    /// Row gather: output row `b` is row `idx[b]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::Dimension {
                op: "gather_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![bad],
            });
        }
        let out = t.select_rows(idx);
        self.emit("gather_rows", out, Op::GatherRows(x, idx.to_vec()), &[x])
    }

    /// `[m×p] ⊕ [m×q] → [m×(p+q)]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.is_matrix() || !tb.is_matrix() || ta.rows() != tb.rows() {
            return Err(Error::Dimension {
                op: "concat_cols",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, p, q) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(m * (p + q));
        for r in 0..m {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let out = Tensor::matrix(m, p + q, data)?;
        self.emit("concat_cols", out, Op::ConcatCols(a, b), &[a, b])
    }

    /// Row-wise log-softmax of `x: [m×n]`.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (m, n) = (t.rows(), t.cols());
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            let row = t.row(r);
            let lse = log_sum_exp(row);
            data.extend(row.iter().map(|&v| v - lse));
        }
        let out = Tensor::new(t.shape().to_vec(), data)?;
        self.emit("log_softmax", out, Op::LogSoftmax(x), &[x])
    }

    /// Reverse pass from a scalar `loss`. Gradients are added to whatever
    /// the nodes already hold; call [`zero_grad`](Self::zero_grad) to reset.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<F>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc
                    .data_mut()
                    .iter_mut()
                    .zip(&g)
                    .for_each(|(a, &v)| *a += v),
                None => node.grad = Some(Tensor::new(node.value.shape().to_vec(), g)?),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let mut send = |v: Var, contrib: Vec<F>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, &c)| *a += c),
                slot @ None => *slot = Some(contrib),
            }
        };
        let val = |v: Var| self.nodes[v.0].value.data();
        let elementwise =
            |x: Var, f: &dyn Fn(usize) -> F| -> Vec<F> { (0..val(x).len()).map(f).collect() };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.nodes[a.0].requires_grad {
                    send(*a, matmul_nt(g, tb.data(), m, n, k));
                }
                if self.nodes[b.0].requires_grad {
                    send(*b, matmul_tn(ta.data(), g, m, k, n));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.iter().map(|&v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                send(*a, g.iter().zip(vb).map(|(&d, &y)| d * y).collect());
                send(*b, g.iter().zip(va).map(|(&d, &x)| d * x).collect());
            }
            Op::Neg(x) => send(*x, g.iter().map(|&v| -v).collect()),
            Op::Exp(x) => send(*x, elementwise(*x, &|j| g[j] * out[j])),
            Op::Log(x) => {
                let eps = F::cst(LOG_EPS);
                let vx = val(*x);
                send(
                    *x,
                    elementwise(*x, &|j| if vx[j] > eps { g[j] / vx[j] } else { F::zero() }),
                );
            }
            Op::Tanh(x) => send(
                *x,
                elementwise(*x, &|j| g[j] * (F::one() - out[j] * out[j])),
            ),
            Op::Sigmoid(x) => send(
                *x,
                elementwise(*x, &|j| g[j] * out[j] * (F::one() - out[j])),
            ),
            Op::Relu(x) => {
                let vx = val(*x);
                send(
                    *x,
                    elementwise(*x, &|j| if vx[j] > F::zero() { g[j] } else { F::zero() }),
                );
            }
            Op::LeakyRelu(x, slope) => {
                let vx = val(*x);
                send(
                    *x,
                    elementwise(*x, &|j| {
                        if vx[j] > F::zero() {
                            g[j]
                        } else {
                            g[j] * *slope
                        }
                    }),
                );
            }
            Op::Square(x) => {
                let vx = val(*x);
                let two = F::cst(2.0);
                send(*x, elementwise(*x, &|j| g[j] * two * vx[j]));
            }
            Op::Scale(x, c) => send(*x, g.iter().map(|&v| v * *c).collect()),
            Op::AddScalar(x, _) => send(*x, g.to_vec()),
            Op::AddBias(x, b) => {
                let n = self.nodes[b.0].value.len();
                let mut db = vec![F::zero(); n];
                for (j, &v) in g.iter().enumerate() {
                    db[j % n] += v;
                }
                send(*x, g.to_vec());
                send(*b, db);
            }
            Op::Sum(x) => send(*x, vec![g[0]; val(*x).len()]),
            Op::Mean(x) => {
                let len = val(*x).len();
                send(*x, vec![g[0] / F::cst(len as f64); len]);
            }
            Op::SumRows(x) | Op::MeanRows(x) => {
                let tx = &self.nodes[x.0].value;
                let n = tx.cols();
                let scale = match node.op {
                    Op::MeanRows(_) => F::one() / F::cst(n as f64),
                    _ => F::one(),
                };
                send(*x, (0..tx.len()).map(|j| g[j / n] * scale).collect());
            }
            Op::GatherRows(x, idx) => {
                let tx = &self.nodes[x.0].value;
                let c = tx.cols();
                let mut dx = vec![F::zero(); tx.len()];
                for (b, &r) in idx.iter().enumerate() {
                    for j in 0..c {
                        dx[r * c + j] += g[b * c + j];
                    }
                }
                send(*x, dx);
            }
            Op::ConcatCols(a, b) => {
                let (p, q) = (self.nodes[a.0].value.cols(), self.nodes[b.0].value.cols());
                let mut da = Vec::new();
                let mut db = Vec::new();
                for row in g.chunks(p + q) {
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                send(*a, da);
                send(*b, db);
            }
            Op::LogSoftmax(x) => {
                let n = self.nodes[x.0].value.cols();
                let mut dx = Vec::with_capacity(g.len());
                for (grow, orow) in g.chunks(n).zip(out.chunks(n)) {
                    let s: F = grow.iter().copied().sum();
                    dx.extend(grow.iter().zip(orow).map(|(&d, &lp)| d - lp.exp() * s));
                }
                send(*x, dx);
            }
        }
    }
}

pub(crate) fn sigmoid<F: Scalar>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn log_sum_exp<F: Scalar>(row: &[F]) -> F {
    let mx = row.iter().copied().fold(F::neg_infinity(), F::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + row.iter().map(|&v| (v - mx).exp()).sum::<F>().ln()
}
