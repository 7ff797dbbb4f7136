use super::{dims2, Axis, Binary, Graph, NodeRef, Op, Unary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    Maximum,
    Minimum,
    Neg,
    Tanh,
    Relu,
    Exp,
    Log,
    Square,
    Sqrt,
    Sigmoid,
    Silu,
    Recip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
    Min,
    SoftmaxLastDim,
    LogSumExp,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn sigmoid_of<T: Scalar>(x: T) -> T {
    sigmoid(x)
}

/// Broadcast output dims for two 2-D views, each dim equal or 1.
pub(crate) fn broadcast(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

impl<T: Scalar> Graph<T> {
    pub fn elementwise(&mut self, op: ElementwiseOp, a: NodeRef, b: Option<NodeRef>) -> Result<NodeRef> {
        use ElementwiseOp as E;
        let binary = match op {
            E::Add => Some(Binary::Add),
            E::Sub => Some(Binary::Sub),
            E::Mul => Some(Binary::Mul),
            E::Div => Some(Binary::Div),
            E::Maximum => Some(Binary::Maximum),
            E::Minimum => Some(Binary::Minimum),
            _ => None,
        };
        match (binary, b) {
            (Some(kind), Some(b)) => self.binary(kind, a, b),
            (Some(_), None) => Err(Error::shape(format!("{op:?} needs two operands"))),
            (None, Some(_)) => Err(Error::shape(format!("{op:?} takes one operand"))),
            (None, None) => {
                let kind = match op {
                    E::Neg => Unary::Neg,
                    E::Tanh => Unary::Tanh,
                    E::Relu => Unary::Relu,
                    E::Exp => Unary::Exp,
                    E::Log => Unary::Log,
                    E::Square => Unary::Square,
                    E::Sqrt => Unary::Sqrt,
                    E::Sigmoid => Unary::Sigmoid,
                    E::Silu => Unary::Silu,
                    E::Recip => Unary::Recip,
                    _ => unreachable!(),
                };
                self.unary(kind, a)
            }
        }
    }

    fn unary(&mut self, kind: Unary, a: NodeRef) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let x = &self.node(i).value;
        if kind == Unary::Log {
            if let Some(bad) = x.iter().find(|v| !(**v > T::zero())) {
                return Err(Error::LogDomain(bad.as_f64()));
            }
        }
        let f: fn(T) -> T = match kind {
            Unary::Neg => |v| -v,
            Unary::Tanh => |v| v.tanh(),
            Unary::Relu => |v| if v > T::zero() { v } else { T::zero() },
            Unary::Exp => |v| v.exp(),
            Unary::Log => |v| v.ln(),
            Unary::Square => |v| v * v,
            Unary::Sqrt => |v| v.sqrt(),
            Unary::Sigmoid => sigmoid,
            Unary::Silu => |v| v * sigmoid(v),
            Unary::Recip => |v| v.recip(),
        };
        let value = x.iter().map(|&v| f(v)).collect();
        let shape = self.node(i).shape.clone();
        Ok(self.push(Op::Unary(kind, i), shape, value))
    }

    fn binary(&mut self, kind: Binary, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (na, nb) = (self.node(ia), self.node(ib));
        let (da, db) = (na.dims(), nb.dims());
        let (r, c) = broadcast(da, db).ok_or_else(|| {
            Error::shape(format!("cannot broadcast {:?} with {:?}", na.shape, nb.shape))
        })?;
        let shape = if na.value.len() == r * c && na.shape.len() >= nb.shape.len() {
            na.shape.clone()
        } else if nb.value.len() == r * c && nb.shape.len() >= na.shape.len() {
            nb.shape.clone()
        } else {
            vec![r, c]
        };
        let f: fn(T, T) -> T = match kind {
            Binary::Add => |x, y| x + y,
            Binary::Sub => |x, y| x - y,
            Binary::Mul => |x, y| x * y,
            Binary::Div => |x, y| x / y,
            Binary::Maximum => |x, y| if x >= y { x } else { y },
            Binary::Minimum => |x, y| if x <= y { x } else { y },
        };
        let (xa, xb) = (&na.value, &nb.value);
        let value = if da == db {
            xa.iter().zip(xb).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let mut out = Vec::with_capacity(r * c);
            for i in 0..r {
                let ra = if da.0 > 1 { i * da.1 } else { 0 };
                let rb = if db.0 > 1 { i * db.1 } else { 0 };
                for j in 0..c {
                    let x = xa[ra + if da.1 > 1 { j } else { 0 }];
                    let y = xb[rb + if db.1 > 1 { j } else { 0 }];
                    out.push(f(x, y));
                }
            }
            out
        };
        Ok(self.push(Op::Binary(kind, ia, ib), shape, value))
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Add, a, b)
    }
    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Sub, a, b)
    }
    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Mul, a, b)
    }
    pub fn div(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Div, a, b)
    }
    pub fn maximum(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Maximum, a, b)
    }
    pub fn minimum(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.binary(Binary::Minimum, a, b)
    }
    pub fn neg(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Neg, a)
    }
    pub fn tanh(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Tanh, a)
    }
    pub fn relu(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Relu, a)
    }
    pub fn exp(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Exp, a)
    }
    pub fn log(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Log, a)
    }
    pub fn square(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Square, a)
    }
    pub fn sqrt(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Sqrt, a)
    }
    pub fn sigmoid(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Sigmoid, a)
    }
    pub fn silu(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Silu, a)
    }
    pub fn recip(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.unary(Unary::Recip, a)
    }

    /// `mul * x + add` with constant coefficients.
    pub fn affine(&mut self, a: NodeRef, mul: T, add: T) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let n = self.node(i);
        let value = n.value.iter().map(|&v| mul * v + add).collect();
        let shape = n.shape.clone();
        Ok(self.push(Op::Affine { x: i, mul }, shape, value))
    }

    pub fn scale(&mut self, a: NodeRef, c: T) -> Result<NodeRef> {
        self.affine(a, c, T::zero())
    }

    pub fn add_scalar(&mut self, a: NodeRef, c: T) -> Result<NodeRef> {
        self.affine(a, T::one(), c)
    }

    /// Smoothed hinge `t * ln(1 + exp(x / t))`, evaluated overflow-free.
    pub fn softplus(&mut self, a: NodeRef, temperature: T) -> Result<NodeRef> {
        let i = self.idx(a)?;
        if !(temperature > T::zero()) {
            return Err(Error::shape("softplus temperature must be positive"));
        }
        let n = self.node(i);
        let value = n
            .value
            .iter()
            .map(|&v| {
                let z = v / temperature;
                temperature * (z.max(T::zero()) + (-z.abs()).exp().ln_1p())
            })
            .collect();
        let shape = n.shape.clone();
        Ok(self.push(Op::Softplus { x: i, temperature }, shape, value))
    }

    /// Elementwise clamp; the adjoint passes only inside `[lo, hi]`.
    pub fn clamp(&mut self, a: NodeRef, lo: T, hi: T) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let n = self.node(i);
        let value = n.value.iter().map(|&v| v.max(lo).min(hi)).collect();
        let shape = n.shape.clone();
        Ok(self.push(Op::Clamp { x: i, lo, hi }, shape, value))
    }

    /// Standard matrix product `[m x k] . [k x n]`.
    pub fn matmul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.bmm(a, b, 1, false)
    }

    /// `a . b^T` for `a: [m x k]`, `b: [n x k]`.
    pub fn matmul_nt(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.bmm(a, b, 1, true)
    }

    /// Block-wise products over `groups` equal row blocks.
    ///
    /// `a` is `[groups*m x k]`; `b` is `[groups*k x n]`, or `[groups*n x k]`
    /// when `trans_b` is set. The result is `[groups*m x n]`.
    pub fn bmm(&mut self, a: NodeRef, b: NodeRef, groups: usize, trans_b: bool) -> Result<NodeRef> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ra, k) = self.node(ia).dims();
        let (rb, cb) = self.node(ib).dims();
        if groups == 0 || ra % groups != 0 || rb % groups != 0 {
            return Err(Error::shape(format!(
                "{groups} groups do not divide rows {ra} and {rb}"
            )));
        }
        let m = ra / groups;
        let (kb, n) = if trans_b { (cb, rb / groups) } else { (rb / groups, cb) };
        if kb != k {
            return Err(Error::shape(format!(
                "inner dimensions differ: {:?} x {:?}",
                self.node(ia).shape,
                self.node(ib).shape
            )));
        }
        let mut value = vec![T::zero(); groups * m * n];
        let (xa, xb) = (&self.node(ia).value, &self.node(ib).value);
        for gi in 0..groups {
            T::gemm(
                m,
                k,
                n,
                &xa[gi * m * k..(gi + 1) * m * k],
                false,
                &xb[gi * k * n..(gi + 1) * k * n],
                trans_b,
                T::zero(),
                &mut value[gi * m * n..(gi + 1) * m * n],
            );
        }
        Ok(self.push(
            Op::MatMul {
                a: ia,
                b: ib,
                groups,
                trans_b,
            },
            vec![groups * m, n],
            value,
        ))
    }

    pub fn transpose(&mut self, a: NodeRef) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let (r, c) = self.node(i).dims();
        let x = &self.node(i).value;
        let mut value = Vec::with_capacity(r * c);
        for j in 0..c {
            for k in 0..r {
                value.push(x[k * c + j]);
            }
        }
        Ok(self.push(Op::Transpose(i), vec![c, r], value))
    }

    pub fn reshape(&mut self, a: NodeRef, shape: &[usize]) -> Result<NodeRef> {
        let i = self.idx(a)?;
        if shape.len() > 2 || shape.iter().product::<usize>() != self.node(i).value.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.node(i).shape
            )));
        }
        let value = self.node(i).value.clone();
        Ok(self.push(Op::Reshape(i), shape.to_vec(), value))
    }

    /// Columns `start..start + len` of a 2-D node.
    pub fn slice_cols(&mut self, a: NodeRef, start: usize, len: usize) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let (r, c) = self.node(i).dims();
        if start + len > c {
            return Err(Error::shape(format!("columns {start}..{} of {c}", start + len)));
        }
        let x = &self.node(i).value;
        let mut value = Vec::with_capacity(r * len);
        for row in 0..r {
            value.extend_from_slice(&x[row * c + start..row * c + start + len]);
        }
        let shape = if self.node(i).shape.len() == 2 {
            vec![r, len]
        } else {
            vec![len]
        };
        Ok(self.push(Op::SliceCols { x: i, start }, shape, value))
    }

    pub fn concat_cols(&mut self, parts: &[NodeRef]) -> Result<NodeRef> {
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let Some(&first) = ids.first() else {
            return Err(Error::shape("concat of nothing"));
        };
        let r = self.node(first).dims().0;
        if ids.iter().any(|&i| self.node(i).dims().0 != r) {
            return Err(Error::shape("concat_cols row counts differ"));
        }
        let total: usize = ids.iter().map(|&i| self.node(i).dims().1).sum();
        let mut value = Vec::with_capacity(r * total);
        for row in 0..r {
            for &i in &ids {
                let c = self.node(i).dims().1;
                value.extend_from_slice(&self.node(i).value[row * c..(row + 1) * c]);
            }
        }
        let shape = if ids.iter().all(|&i| self.node(i).shape.len() < 2) {
            vec![total]
        } else {
            vec![r, total]
        };
        Ok(self.push(Op::ConcatCols(ids), shape, value))
    }

    pub fn concat_rows(&mut self, parts: &[NodeRef]) -> Result<NodeRef> {
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let Some(&first) = ids.first() else {
            return Err(Error::shape("concat of nothing"));
        };
        let c = self.node(first).dims().1;
        if ids.iter().any(|&i| self.node(i).dims().1 != c) {
            return Err(Error::shape("concat_rows column counts differ"));
        }
        let rows: usize = ids.iter().map(|&i| self.node(i).dims().0).sum();
        let mut value = Vec::with_capacity(rows * c);
        for &i in &ids {
            value.extend_from_slice(&self.node(i).value);
        }
        Ok(self.push(Op::ConcatRows(ids), vec![rows, c], value))
    }

    /// `out[i] = a[index[i]]` over flattened storage.
    pub fn gather(&mut self, a: NodeRef, index: Vec<usize>, shape: &[usize]) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let x = &self.node(i).value;
        if shape.len() > 2 || shape.iter().product::<usize>() != index.len() {
            return Err(Error::shape(format!("{} indices for shape {shape:?}", index.len())));
        }
        if let Some(bad) = index.iter().find(|&&k| k >= x.len()) {
            return Err(Error::shape(format!("gather index {bad} out of {}", x.len())));
        }
        let value = index.iter().map(|&k| x[k]).collect();
        Ok(self.push(Op::Gather { x: i, index }, shape.to_vec(), value))
    }

    /// `out[index[i]] += a[i]` into a zero array of `shape`.
    pub fn scatter_add(&mut self, a: NodeRef, index: Vec<usize>, shape: &[usize]) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let n: usize = shape.iter().product();
        let x = &self.node(i).value;
        if shape.len() > 2 || index.len() != x.len() {
            return Err(Error::shape(format!("{} indices for {} values", index.len(), x.len())));
        }
        if let Some(bad) = index.iter().find(|&&k| k >= n) {
            return Err(Error::shape(format!("scatter index {bad} out of {n}")));
        }
        let mut value = vec![T::zero(); n];
        for (&k, &v) in index.iter().zip(x) {
            value[k] = value[k] + v;
        }
        Ok(self.push(Op::ScatterAdd { x: i, index }, shape.to_vec(), value))
    }

    fn reduction_axis(&self, i: usize, axis: Option<usize>) -> Result<(Axis, Vec<usize>)> {
        let shape = &self.node(i).shape;
        let (r, c) = dims2(shape);
        let (ax, out) = match (axis, shape.len()) {
            (None, _) => (Axis::All, vec![]),
            (Some(0), 1) => (Axis::Cols, vec![]),
            (Some(0), 2) => (Axis::Rows, vec![1, c]),
            (Some(1), 2) => (Axis::Cols, vec![r, 1]),
            (Some(a), _) => {
                return Err(Error::Reduction(format!("axis {a} invalid for shape {shape:?}")))
            }
        };
        let len = match ax {
            Axis::All => r * c,
            Axis::Rows => r,
            Axis::Cols => c,
        };
        if len == 0 {
            return Err(Error::Reduction(format!("empty axis in shape {shape:?}")));
        }
        Ok((ax, out))
    }

    /// Visit each reduced group as (output slot, input flat indices).
    fn groups(r: usize, c: usize, ax: Axis) -> Vec<Vec<usize>> {
        match ax {
            Axis::All => vec![(0..r * c).collect()],
            Axis::Rows => (0..c).map(|j| (0..r).map(|i| i * c + j).collect()).collect(),
            Axis::Cols => (0..r).map(|i| (i * c..(i + 1) * c).collect()).collect(),
        }
    }

    pub fn reduce(&mut self, op: ReduceOp, a: NodeRef, axis: Option<usize>) -> Result<NodeRef> {
        let i = self.idx(a)?;
        match op {
            ReduceOp::SoftmaxLastDim | ReduceOp::LogSumExp => {
                let rank = self.node(i).shape.len();
                if axis.is_some_and(|ax| rank == 0 || ax != rank - 1) {
                    return Err(Error::Reduction("softmax/logsumexp act on the last axis".into()));
                }
                return if op == ReduceOp::SoftmaxLastDim {
                    self.softmax(a)
                } else {
                    self.logsumexp(a)
                };
            }
            _ => {}
        }
        let (ax, shape) = self.reduction_axis(i, axis)?;
        let (r, c) = self.node(i).dims();
        let x = &self.node(i).value;
        let groups = Self::groups(r, c, ax);
        match op {
            ReduceOp::Sum | ReduceOp::Mean => {
                let mut value: Vec<T> = groups
                    .iter()
                    .map(|g| g.iter().fold(T::zero(), |s, &k| s + x[k]))
                    .collect();
                if op == ReduceOp::Mean {
                    let n = T::of(groups[0].len() as f64);
                    value.iter_mut().for_each(|v| *v = *v / n);
                    Ok(self.push(Op::Mean(i, ax), shape, value))
                } else {
                    Ok(self.push(Op::Sum(i, ax), shape, value))
                }
            }
            ReduceOp::Max | ReduceOp::Min => {
                let better = |cand: T, best: T| {
                    if op == ReduceOp::Max {
                        cand > best
                    } else {
                        cand < best
                    }
                };
                let winners: Vec<usize> = groups
                    .iter()
                    .map(|g| {
                        let mut w = g[0];
                        for &k in &g[1..] {
                            if better(x[k], x[w]) {
                                w = k;
                            }
                        }
                        w
                    })
                    .collect();
                let value = winners.iter().map(|&k| x[k]).collect();
                Ok(self.push(Op::Select { x: i, winners }, shape, value))
            }
            _ => unreachable!(),
        }
    }

    pub fn sum(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.reduce(ReduceOp::Sum, a, None)
    }

    pub fn mean(&mut self, a: NodeRef) -> Result<NodeRef> {
        self.reduce(ReduceOp::Mean, a, None)
    }

    /// Row-wise softmax over the last dimension.
    pub fn softmax(&mut self, a: NodeRef) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let (r, c) = self.node(i).dims();
        if c == 0 {
            return Err(Error::Reduction("softmax over empty axis".into()));
        }
        let x = &self.node(i).value;
        let mut value = Vec::with_capacity(r * c);
        for row in x.chunks(c) {
            let m = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let start = value.len();
            let mut s = T::zero();
            for &v in row {
                let e = (v - m).exp();
                s = s + e;
                value.push(e);
            }
            value[start..].iter_mut().for_each(|e| *e = *e / s);
        }
        let shape = self.node(i).shape.clone();
        Ok(self.push(Op::Softmax(i), shape, value))
    }

    /// Row-wise log-sum-exp over the last dimension.
    pub fn logsumexp(&mut self, a: NodeRef) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let (r, c) = self.node(i).dims();
        if c == 0 {
            return Err(Error::Reduction("logsumexp over empty axis".into()));
        }
        let value = self
            .node(i)
            .value
            .chunks(c)
            .map(|row| {
                let m = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
            })
            .collect();
        let shape = if self.node(i).shape.len() == 2 {
            vec![r, 1]
        } else {
            vec![]
        };
        Ok(self.push(Op::LogSumExp(i), shape, value))
    }

    /// Row-wise normalization to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: NodeRef, eps: T) -> Result<NodeRef> {
        let i = self.idx(a)?;
        let (r, c) = self.node(i).dims();
        if c == 0 {
            return Err(Error::Reduction("layer norm over empty axis".into()));
        }
        let n = T::of(c as f64);
        let mut normalized = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        for row in self.node(i).value.chunks(c) {
            let mu = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / n;
            let s = (var + eps).sqrt().recip();
            inv_std.push(s);
            normalized.extend(row.iter().map(|&v| (v - mu) * s));
        }
        let shape = self.node(i).shape.clone();
        let value = normalized.clone();
        Ok(self.push(
            Op::LayerNorm {
                x: i,
                normalized,
                inv_std,
            },
            shape,
            value,
        ))
    }
}
