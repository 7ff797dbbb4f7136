//! Minimal reverse-mode automatic differentiation over dense real arrays.
//!
//! A [`Graph`] is an append-only tape. Every operation appends one node
//! holding its forward value and enough bookkeeping to run the reverse
//! sweep. Complex quantities are carried as separate real/imaginary nodes,
//! so one real-valued gradient mechanism serves the networks and the
//! beamforming objective alike.
//!
//! Shapes have rank 0, 1 or 2. Rank-1 arrays behave as a single row for
//! broadcasting and matrix products.
//!
//! ```
//! use secbeam::gradcore::Graph;
//!
//! let mut g = Graph::<f64>::new();
//! let x = g.param(vec![3.0], &[1]).unwrap();
//! let y = g.param(vec![4.0], &[1]).unwrap();
//! let z = g.mul(x, y).unwrap();
//! g.backward(z).unwrap();
//! assert_eq!(g.value(z).unwrap(), &[12.0]);
//! assert_eq!(g.grad(x).unwrap(), &[4.0]);
//! ```

mod backward;
mod ops;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use ops::{ElementwiseOp, ReduceOp};

static NEXT_GRAPH: AtomicU64 = AtomicU64::new(1);

/// Handle to a node; only meaningful for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    graph: u64,
    id: usize,
}

impl NodeRef {
    pub fn id(self) -> usize {
        self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Unary {
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
pub(crate) enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Maximum,
    Minimum,
}

/// Which elements a reduction collapses, in 2-D terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    All,
    /// Collapse rows: one result per column.
    Rows,
    /// Collapse columns: one result per row.
    Cols,
}

#[derive(Debug, Clone)]
pub(crate) enum Op<T> {
    Leaf,
    Unary(Unary, usize),
    Binary(Binary, usize, usize),
    Affine {
        x: usize,
        mul: T,
    },
    Softplus {
        x: usize,
        temperature: T,
    },
    Clamp {
        x: usize,
        lo: T,
        hi: T,
    },
    MatMul {
        a: usize,
        b: usize,
        groups: usize,
        trans_b: bool,
    },
    Transpose(usize),
    Reshape(usize),
    SliceCols {
        x: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Gather {
        x: usize,
        index: Vec<usize>,
    },
    ScatterAdd {
        x: usize,
        index: Vec<usize>,
    },
    Sum(usize, Axis),
    Mean(usize, Axis),
    /// Max/min route the adjoint to the recorded winner per output.
    Select {
        x: usize,
        winners: Vec<usize>,
    },
    Softmax(usize),
    LogSumExp(usize),
    LayerNorm {
        x: usize,
        normalized: Vec<T>,
        inv_std: Vec<T>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node<T> {
    pub(crate) op: Op<T>,
    pub(crate) shape: Vec<usize>,
    pub(crate) value: Vec<T>,
    pub(crate) requires_grad: bool,
}

impl<T> Node<T> {
    pub(crate) fn dims(&self) -> (usize, usize) {
        dims2(&self.shape)
    }
}

pub(crate) fn dims2(shape: &[usize]) -> (usize, usize) {
    match shape {
        [] => (1, 1),
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => unreachable!("rank checked at construction"),
    }
}

/// Append-only computation graph.
#[derive(Debug)]
pub struct Graph<T> {
    id: u64,
    nodes: Vec<Node<T>>,
    adjoints: Vec<Vec<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            adjoints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn idx(&self, n: NodeRef) -> Result<usize> {
        if n.graph != self.id || n.id >= self.nodes.len() {
            return Err(Error::ForeignNode(n.id));
        }
        Ok(n.id)
    }

    pub(crate) fn node(&self, i: usize) -> &Node<T> {
        &self.nodes[i]
    }

    pub(crate) fn push(&mut self, op: Op<T>, shape: Vec<usize>, value: Vec<T>) -> NodeRef {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        let requires_grad = match &op {
            Op::Leaf => false,
            _ => backward::inputs(&op)
                .iter()
                .any(|&i| self.nodes[i].requires_grad),
        };
        let id = self.nodes.len();
        self.nodes.push(Node {
            op,
            shape,
            value,
            requires_grad,
        });
        NodeRef { graph: self.id, id }
    }

    fn leaf(&mut self, values: Vec<T>, shape: &[usize], requires_grad: bool) -> Result<NodeRef> {
        if shape.len() > 2 {
            return Err(Error::shape(format!("rank {} unsupported", shape.len())));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::shape(format!(
                "{} values for shape {shape:?}",
                values.len()
            )));
        }
        let r = self.push(Op::Leaf, shape.to_vec(), values);
        self.nodes[r.id].requires_grad = requires_grad;
        Ok(r)
    }

    /// Gradient-free input.
    pub fn constant(&mut self, values: Vec<T>, shape: &[usize]) -> Result<NodeRef> {
        self.leaf(values, shape, false)
    }

    /// Input whose adjoint is tracked.
    pub fn param(&mut self, values: Vec<T>, shape: &[usize]) -> Result<NodeRef> {
        self.leaf(values, shape, true)
    }

    pub fn scalar(&mut self, x: T) -> NodeRef {
        self.push(Op::Leaf, vec![], vec![x])
    }

    pub fn value(&self, n: NodeRef) -> Result<&[T]> {
        Ok(&self.nodes[self.idx(n)?].value)
    }

    pub fn shape(&self, n: NodeRef) -> Result<&[usize]> {
        Ok(&self.nodes[self.idx(n)?].shape)
    }

    /// Value of a single-element node.
    pub fn item(&self, n: NodeRef) -> Result<T> {
        let v = self.value(n)?;
        if v.len() != 1 {
            return Err(Error::shape(format!("item() on {} elements", v.len())));
        }
        Ok(v[0])
    }

    pub fn requires_grad(&self, n: NodeRef) -> Result<bool> {
        Ok(self.nodes[self.idx(n)?].requires_grad)
    }

    /// Adjoint populated by the last [`Graph::backward`] call. Nodes created
    /// after that call, or before any call, have no adjoint yet.
    pub fn grad(&self, n: NodeRef) -> Result<&[T]> {
        let i = self.idx(n)?;
        self.adjoints
            .get(i)
            .map(|a| a.as_slice())
            .ok_or_else(|| Error::shape(format!("no adjoint for node {i}; run backward first")))
    }

    /// Reverse sweep from a scalar root. Adjoints are reset on every call.
    pub fn backward(&mut self, root: NodeRef) -> Result<()> {
        let r = self.idx(root)?;
        if self.nodes[r].value.len() != 1 {
            return Err(Error::NonScalarRoot(self.nodes[r].shape.clone()));
        }
        self.adjoints = self
            .nodes
            .iter()
            .map(|n| vec![T::zero(); n.value.len()])
            .collect();
        self.adjoints[r][0] = T::one();
        for i in (0..=r).rev() {
            if !self.nodes[i].requires_grad || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let (lower, upper) = self.adjoints.split_at_mut(i);
            let g = &upper[0];
            if g.iter().all(|x| x.is_zero()) {
                continue;
            }
            backward::propagate(&self.nodes, i, g, lower);
        }
        Ok(())
    }
}
