//! Reverse-mode rules, one per [`Op`] variant.

use super::ops::sigmoid_of;
use super::{dims2, Axis, Binary, Node, Op, Unary};
use crate::scalar::Scalar;

pub(crate) fn inputs<T>(op: &Op<T>) -> Vec<usize> {
    match op {
        Op::Leaf => vec![],
        Op::Unary(_, x)
        | Op::Affine { x, .. }
        | Op::Softplus { x, .. }
        | Op::Clamp { x, .. }
        | Op::Transpose(x)
        | Op::Reshape(x)
        | Op::SliceCols { x, .. }
        | Op::Gather { x, .. }
        | Op::ScatterAdd { x, .. }
        | Op::Sum(x, _)
        | Op::Mean(x, _)
        | Op::Select { x, .. }
        | Op::Softmax(x)
        | Op::LogSumExp(x)
        | Op::LayerNorm { x, .. } => vec![*x],
        Op::Binary(_, a, b) | Op::MatMul { a, b, .. } => vec![*a, *b],
        Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
    }
}

/// Accumulate the adjoint `g` of node `i` into the adjoints of its inputs.
/// `adj` holds the adjoints of nodes `0..i`.
pub(crate) fn propagate<T: Scalar>(nodes: &[Node<T>], i: usize, g: &[T], adj: &mut [Vec<T>]) {
    let node = &nodes[i];
    let y = &node.value;
    let wants = |j: usize| nodes[j].requires_grad;
    match &node.op {
        Op::Leaf => {}
        Op::Unary(kind, x) => {
            if !wants(*x) {
                return;
            }
            let xv = &nodes[*x].value;
            let dx = &mut adj[*x];
            for k in 0..g.len() {
                let d = match kind {
                    Unary::Neg => -T::one(),
                    Unary::Tanh => T::one() - y[k] * y[k],
                    Unary::Relu => {
                        if xv[k] > T::zero() {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                    Unary::Exp => y[k],
                    Unary::Log => xv[k].recip(),
                    Unary::Square => T::of(2.0) * xv[k],
                    Unary::Sqrt => (T::of(2.0) * y[k]).recip(),
                    Unary::Sigmoid => y[k] * (T::one() - y[k]),
                    Unary::Silu => {
                        let s = sigmoid_of(xv[k]);
                        s + xv[k] * s * (T::one() - s)
                    }
                    Unary::Recip => -(y[k] * y[k]),
                };
                dx[k] = dx[k] + g[k] * d;
            }
        }
        Op::Affine { x, mul } => {
            if wants(*x) {
                for (d, &gk) in adj[*x].iter_mut().zip(g) {
                    *d = *d + *mul * gk;
                }
            }
        }
        Op::Softplus { x, temperature } => {
            if wants(*x) {
                let xv = &nodes[*x].value;
                for (k, d) in adj[*x].iter_mut().enumerate() {
                    *d = *d + g[k] * sigmoid_of(xv[k] / *temperature);
                }
            }
        }
        Op::Clamp { x, lo, hi } => {
            if wants(*x) {
                let xv = &nodes[*x].value;
                for (k, d) in adj[*x].iter_mut().enumerate() {
                    if xv[k] >= *lo && xv[k] <= *hi {
                        *d = *d + g[k];
                    }
                }
            }
        }
        Op::Binary(kind, a, b) => binary(nodes, node, *kind, *a, *b, g, adj),
        Op::MatMul {
            a,
            b,
            groups,
            trans_b,
        } => {
            let (ra, k) = nodes[*a].dims();
            let m = ra / groups;
            let n = node.dims().1;
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            for gi in 0..*groups {
                let gblk = &g[gi * m * n..(gi + 1) * m * n];
                let ablk = &av[gi * m * k..(gi + 1) * m * k];
                let bblk = &bv[gi * k * n..(gi + 1) * k * n];
                if wants(*a) {
                    let da = &mut adj[*a][gi * m * k..(gi + 1) * m * k];
                    // dA = dC . op(B)^T
                    T::gemm(m, n, k, gblk, false, bblk, !*trans_b, T::one(), da);
                }
                if wants(*b) {
                    let db = &mut adj[*b][gi * k * n..(gi + 1) * k * n];
                    if *trans_b {
                        // B is n x k: dB = dC^T . A
                        T::gemm(n, m, k, gblk, true, ablk, false, T::one(), db);
                    } else {
                        // B is k x n: dB = A^T . dC
                        T::gemm(k, m, n, ablk, true, gblk, false, T::one(), db);
                    }
                }
            }
        }
        Op::Transpose(x) => {
            if wants(*x) {
                let (r, c) = nodes[*x].dims();
                let dx = &mut adj[*x];
                for j in 0..c {
                    for k in 0..r {
                        dx[k * c + j] = dx[k * c + j] + g[j * r + k];
                    }
                }
            }
        }
        Op::Reshape(x) => {
            if wants(*x) {
                add_into(&mut adj[*x], g);
            }
        }
        Op::SliceCols { x, start } => {
            if wants(*x) {
                let (r, c) = nodes[*x].dims();
                let len = node.dims().1;
                let dx = &mut adj[*x];
                for row in 0..r {
                    add_into(
                        &mut dx[row * c + start..row * c + start + len],
                        &g[row * len..(row + 1) * len],
                    );
                }
            }
        }
        Op::ConcatCols(parts) => {
            let (r, total) = node.dims();
            let mut offset = 0;
            for &p in parts {
                let c = nodes[p].dims().1;
                if wants(p) {
                    let dp = &mut adj[p];
                    for row in 0..r {
                        add_into(
                            &mut dp[row * c..(row + 1) * c],
                            &g[row * total + offset..row * total + offset + c],
                        );
                    }
                }
                offset += c;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.len();
                if wants(p) {
                    add_into(&mut adj[p], &g[offset..offset + len]);
                }
                offset += len;
            }
        }
        Op::Gather { x, index } => {
            if wants(*x) {
                let dx = &mut adj[*x];
                for (&k, &gk) in index.iter().zip(g) {
                    dx[k] = dx[k] + gk;
                }
            }
        }
        Op::ScatterAdd { x, index } => {
            if wants(*x) {
                for (d, &k) in adj[*x].iter_mut().zip(index) {
                    *d = *d + g[k];
                }
            }
        }
        Op::Sum(x, ax) | Op::Mean(x, ax) => {
            if !wants(*x) {
                return;
            }
            let (r, c) = nodes[*x].dims();
            let scale = match (&node.op, ax) {
                (Op::Sum(..), _) => T::one(),
                (_, Axis::All) => T::of((r * c) as f64).recip(),
                (_, Axis::Rows) => T::of(r as f64).recip(),
                (_, Axis::Cols) => T::of(c as f64).recip(),
            };
            let dx = &mut adj[*x];
            for row in 0..r {
                for col in 0..c {
                    let o = match ax {
                        Axis::All => 0,
                        Axis::Rows => col,
                        Axis::Cols => row,
                    };
                    let k = row * c + col;
                    dx[k] = dx[k] + g[o] * scale;
                }
            }
        }
        Op::Select { x, winners } => {
            if wants(*x) {
                let dx = &mut adj[*x];
                for (&k, &gk) in winners.iter().zip(g) {
                    dx[k] = dx[k] + gk;
                }
            }
        }
        Op::Softmax(x) => {
            if wants(*x) {
                let c = node.dims().1;
                let dx = &mut adj[*x];
                for (row, (yr, gr)) in y.chunks(c).zip(g.chunks(c)).enumerate() {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for j in 0..c {
                        let k = row * c + j;
                        dx[k] = dx[k] + yr[j] * (gr[j] - dot);
                    }
                }
            }
        }
        Op::LogSumExp(x) => {
            if wants(*x) {
                let c = nodes[*x].dims().1;
                let xv = &nodes[*x].value;
                let dx = &mut adj[*x];
                for (row, (&lse, &gr)) in y.iter().zip(g).enumerate() {
                    for j in 0..c {
                        let k = row * c + j;
                        dx[k] = dx[k] + gr * (xv[k] - lse).exp();
                    }
                }
            }
        }
        Op::LayerNorm {
            x,
            normalized,
            inv_std,
        } => {
            if wants(*x) {
                let c = node.dims().1;
                let n = T::of(c as f64);
                let dx = &mut adj[*x];
                for (row, &s) in inv_std.iter().enumerate() {
                    let gr = &g[row * c..(row + 1) * c];
                    let xh = &normalized[row * c..(row + 1) * c];
                    let mg = gr.iter().copied().sum::<T>() / n;
                    let mgx = gr.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / n;
                    for j in 0..c {
                        let k = row * c + j;
                        dx[k] = dx[k] + s * (gr[j] - mg - xh[j] * mgx);
                    }
                }
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

fn binary<T: Scalar>(
    nodes: &[Node<T>],
    node: &Node<T>,
    kind: Binary,
    a: usize,
    b: usize,
    g: &[T],
    adj: &mut [Vec<T>],
) {
    let (na, nb) = (&nodes[a], &nodes[b]);
    let (da, db) = (na.dims(), nb.dims());
    let (r, c) = dims2(&node.shape);
    let (xa, xb) = (&na.value, &nb.value);
    let pos = |d: (usize, usize), i: usize, j: usize| {
        (if d.0 > 1 { i * d.1 } else { 0 }) + if d.1 > 1 { j } else { 0 }
    };
    // (d out / d a, d out / d b) at one broadcast position
    let partials = |x: T, y: T| -> (T, T) {
        match kind {
            Binary::Add => (T::one(), T::one()),
            Binary::Sub => (T::one(), -T::one()),
            Binary::Mul => (y, x),
            Binary::Div => (y.recip(), -x / (y * y)),
            Binary::Maximum => {
                if x >= y {
                    (T::one(), T::zero())
                } else {
                    (T::zero(), T::one())
                }
            }
            Binary::Minimum => {
                if x <= y {
                    (T::one(), T::zero())
                } else {
                    (T::zero(), T::one())
                }
            }
        }
    };
    let (want_a, want_b) = (na.requires_grad, nb.requires_grad);
    if a == b {
        // same node on both sides: accumulate both partials into one buffer
        let d = &mut adj[a];
        for k in 0..g.len() {
            let (pa, pb) = partials(xa[k], xb[k]);
            d[k] = d[k] + g[k] * (pa + pb);
        }
        return;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let (left, right) = adj.split_at_mut(hi);
    let (adj_lo, adj_hi) = (&mut left[lo], &mut right[0]);
    let (dadj, dbdj) = if a < b {
        (adj_lo, adj_hi)
    } else {
        (adj_hi, adj_lo)
    };
    for i in 0..r {
        for j in 0..c {
            let (ka, kb) = (pos(da, i, j), pos(db, i, j));
            let gk = g[i * c + j];
            let (pa, pb) = partials(xa[ka], xb[kb]);
            if want_a {
                dadj[ka] = dadj[ka] + gk * pa;
            }
            if want_b {
                dbdj[kb] = dbdj[kb] + gk * pb;
            }
        }
    }
}
