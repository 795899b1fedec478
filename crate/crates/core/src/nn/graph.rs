//! Reverse-mode differentiation over a tape of dense row-major matrices.

use crate::error::{Error, Result};

use super::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Tanh(Var),
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Append-only computation tape. Every op checks shapes and records how to
/// propagate gradients back to its inputs.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::invalid(format!("{op}: incompatible shapes {}x{} and {}x{}", a.0, a.1, b.0, b.1))
}

/// `out += a · b` for row-major `a: m×k`, `b: k×n`.
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
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

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::AddRowBias(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::Tanh(a) | Op::Relu(a) | Op::Scale(a, _) | Op::Square(a) | Op::Sum(a) | Op::Mean(a) | Op::SliceCols(a, _) => {
                self.nodes[a.0].requires_grad
            }
            Op::ConcatCols(parts) => parts.iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a leaf; gradients accumulate into it when `tensor.requires_grad`.
    pub fn leaf(&mut self, tensor: Tensor) -> Result<Var> {
        let (rows, cols) = tensor.matrix_shape()?;
        let requires_grad = tensor.requires_grad;
        let v = self.push(rows, cols, tensor.data, Op::Leaf);
        self.nodes[v.0].requires_grad = requires_grad;
        self.nodes[v.0].grad = tensor.grad;
        Ok(v)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        self.leaf(Tensor::new(vec![rows, cols], data)?)
    }

    pub fn param(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        self.leaf(Tensor::new(vec![rows, cols], data)?.requiring_grad())
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.shape(v) {
            (1, 1) => Ok(self.nodes[v.0].value[0]),
            (r, c) => Err(Error::invalid(format!("expected a scalar, got {r}x{c}"))),
        }
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Snapshot of a node as a tensor, including its gradient.
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor {
            shape: vec![n.rows, n.cols],
            data: n.value.clone(),
            requires_grad: n.requires_grad,
            grad: n.grad.clone(),
        }
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut out = vec![0.0; sa.0 * sb.1];
        matmul_acc(self.value(a), self.value(b), &mut out, sa.0, sa.1, sb.1);
        Ok(self.push(sa.0, sb.1, out, Op::MatMul(a, b)))
    }

    /// `a + 1·bᵀ`: adds the `1 × n` row `b` to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.0 != 1 || sb.1 != sa.1 {
            return Err(shape_err("add_row_bias", sa, sb));
        }
        let bias = self.value(b);
        let out = self
            .value(a)
            .chunks(sa.1.max(1))
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        Ok(self.push(sa.0, sa.1, out, Op::AddRowBias(a, b)))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(r, c, out, op)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(name, sa, sb));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        Ok(self.push(sa.0, sa.1, out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
        self.push(1, 1, vec![m], Op::Mean(a))
    }

    /// Columns `start .. start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(Error::invalid(format!("slice_cols: {start}+{len} exceeds {c} columns")));
        }
        let v = self.value(a);
        let out = (0..r).flat_map(|i| v[i * c + start..i * c + start + len].iter().copied()).collect();
        Ok(self.push(r, len, out, Op::SliceCols(a, start)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat_cols needs at least one input"));
        };
        let rows = self.shape(first).0;
        if let Some(p) = parts.iter().find(|p| self.shape(**p).0 != rows) {
            return Err(shape_err("concat_cols", self.shape(first), self.shape(*p)));
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                let c = self.shape(*p).1;
                out.extend_from_slice(&self.value(*p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec())))
    }

    fn accumulate(&mut self, v: Var, delta: &[f64]) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(delta).for_each(|(g, d)| *g += d),
            None => node.grad = Some(delta.to_vec()),
        }
    }

    /// Reverse pass from a scalar `loss`. Leaf gradients accumulate across calls until
    /// [`Graph::zero_grad`]; intermediate gradients are recomputed each time.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::invalid(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        for n in &mut self.nodes[..=loss.0] {
            if !matches!(n.op, Op::Leaf) {
                n.grad = None;
            }
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        if matches!(self.nodes[loss.0].op, Op::Leaf) {
            self.accumulate(loss, &[1.0]);
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if matches!(self.nodes[idx].op, Op::Leaf) || !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            let (rows, cols) = (self.nodes[idx].rows, self.nodes[idx].cols);
            match op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(a);
                    let n = cols;
                    if self.nodes[a.0].requires_grad {
                        // dA = G · Bᵀ
                        let bv = self.value(b);
                        let mut da = vec![0.0; m * k];
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                da[i * k + p] = gi.iter().zip(&bv[p * n..(p + 1) * n]).map(|(x, y)| x * y).sum();
                            }
                        }
                        self.accumulate(a, &da);
                    }
                    if self.nodes[b.0].requires_grad {
                        // dB = Aᵀ · G
                        let av = self.value(a);
                        let mut db = vec![0.0; k * n];
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let aip = av[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                    *d += aip * gv;
                                }
                            }
                        }
                        self.accumulate(b, &db);
                    }
                }
                Op::AddRowBias(a, b) => {
                    self.accumulate(a, &g);
                    if self.nodes[b.0].requires_grad {
                        let mut db = vec![0.0; cols];
                        for row in g.chunks(cols.max(1)) {
                            db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                        }
                        self.accumulate(b, &db);
                    }
                }
                Op::Tanh(a) => {
                    let out = &self.nodes[idx].value;
                    let d: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                    self.accumulate(a, &d);
                }
                Op::Relu(a) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(self.value(a))
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.accumulate(a, &d);
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.accumulate(b, &neg);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> = g.iter().zip(self.value(b)).map(|(g, y)| g * y).collect();
                    let db: Vec<f64> = g.iter().zip(self.value(a)).map(|(g, x)| g * x).collect();
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Scale(a, c) => {
                    let d: Vec<f64> = g.iter().map(|x| c * x).collect();
                    self.accumulate(a, &d);
                }
                Op::Square(a) => {
                    let d: Vec<f64> = g.iter().zip(self.value(a)).map(|(g, x)| 2.0 * g * x).collect();
                    self.accumulate(a, &d);
                }
                Op::Sum(a) => {
                    let d = vec![g[0]; self.value(a).len()];
                    self.accumulate(a, &d);
                }
                Op::Mean(a) => {
                    let n = self.value(a).len();
                    let d = vec![g[0] / n.max(1) as f64; n];
                    self.accumulate(a, &d);
                }
                Op::SliceCols(a, start) => {
                    if self.nodes[a.0].requires_grad {
                        let (ra, ca) = self.shape(a);
                        let mut d = vec![0.0; ra * ca];
                        for i in 0..rows {
                            d[i * ca + start..i * ca + start + cols].copy_from_slice(&g[i * cols..(i + 1) * cols]);
                        }
                        self.accumulate(a, &d);
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let c = self.shape(p).1;
                        if self.nodes[p.0].requires_grad {
                            let d: Vec<f64> = (0..rows)
                                .flat_map(|i| g[i * cols + offset..i * cols + offset + c].iter().copied())
                                .collect();
                            self.accumulate(p, &d);
                        }
                        offset += c;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut g = Graph::new();
        let w = g.param(1, 2, vec![1.0, 2.0]).unwrap();
        let sq = g.square(w);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn unused_leaf_has_zero_gradient() {
        let mut g = Graph::new();
        let w = g.param(1, 1, vec![3.0]).unwrap();
        let u = g.param(1, 1, vec![5.0]).unwrap();
        let loss = g.square(w);
        g.backward(loss).unwrap();
        assert!(g.grad(u).is_none_or(|d| d == [0.0]));
        assert_eq!(g.tensor(u).grad.unwrap_or(vec![0.0]), vec![0.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut g = Graph::new();
        let w = g.param(1, 1, vec![3.0]).unwrap();
        let loss = g.square(w);
        g.backward(loss).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[12.0]);
        g.zero_grad();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let w = g.param(1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(g.backward(w).unwrap_err().kind(), "invalid_argument");
    }

    #[test]
    fn matmul_and_slicing_gradients() {
        // loss = Σ (A·B)[:, 1..]  with A 2×2, B 2×3
        let mut g = Graph::new();
        let a = g.param(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = g.param(2, 3, vec![1.0, 0.0, -1.0, 2.0, 1.0, 0.5]).unwrap();
        let c = g.matmul(a, b).unwrap();
        let s = g.slice_cols(c, 1, 2).unwrap();
        let loss = g.sum(s);
        g.backward(loss).unwrap();
        // dA[i][p] = Σ_{j≥1} B[p][j]
        assert_eq!(g.grad(a).unwrap(), &[-1.0, 1.5, -1.0, 1.5]);
        // dB[p][j] = Σ_i A[i][p] for j ≥ 1
        assert_eq!(g.grad(b).unwrap(), &[0.0, 4.0, 4.0, 0.0, 6.0, 6.0]);
    }

    #[test]
    fn concat_routes_gradients() {
        let mut g = Graph::new();
        let a = g.param(2, 1, vec![1.0, 2.0]).unwrap();
        let b = g.param(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = g.concat_cols(&[a, b]).unwrap();
        assert_eq!(g.value(c), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = g.constant(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = g.mul(c, w).unwrap();
        let loss = g.sum(p);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0, 4.0]);
        assert_eq!(g.grad(b).unwrap(), &[2.0, 3.0, 5.0, 6.0]);
        assert!(g.grad(w).is_none());
    }

    #[test]
    fn shape_mismatch_is_invalid() {
        let mut g = Graph::new();
        let a = g.constant(2, 3, vec![0.0; 6]).unwrap();
        let b = g.constant(2, 3, vec![0.0; 6]).unwrap();
        assert!(g.matmul(a, b).is_err());
        let c = g.constant(1, 2, vec![0.0; 2]).unwrap();
        assert!(g.add(a, c).is_err());
        assert!(g.add_row_bias(a, c).is_err());
    }
}
