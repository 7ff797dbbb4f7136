use crate::gradcore::{Graph, NodeRef, ReduceOp};
use crate::{Error, Result, Scalar};

use super::params::{Bound, Builder, Init};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LinearLayer {
    pub(crate) weight: usize,
    pub(crate) bias: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearLayer {
    pub fn new<T: Scalar>(b: &mut Builder<T>, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: b.add(&format!("{name}.weight"), &[out_dim, in_dim], Init::Glorot),
            bias: b.add(&format!("{name}.bias"), &[out_dim], Init::Zeros),
            in_dim,
            out_dim,
        }
    }

    /// `x . W^T + b` for `x: [rows x in]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: NodeRef) -> Result<NodeRef> {
        let y = g.matmul_nt(x, p[self.weight])?;
        g.add(y, p[self.bias])
    }

    pub fn param_count(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    gain: usize,
    bias: usize,
}

impl LayerNorm {
    pub fn new<T: Scalar>(b: &mut Builder<T>, name: &str, dim: usize) -> Self {
        Self {
            gain: b.add(&format!("{name}.gain"), &[dim], Init::Ones),
            bias: b.add(&format!("{name}.bias"), &[dim], Init::Zeros),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: NodeRef) -> Result<NodeRef> {
        let n = g.layer_norm(x, T::of(LN_EPS))?;
        let y = g.mul(n, p[self.gain])?;
        g.add(y, p[self.bias])
    }
}

/// Stack of linear layers with SiLU between them.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<LinearLayer>,
}

impl Mlp {
    pub fn new<T: Scalar>(b: &mut Builder<T>, name: &str, dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| LinearLayer::new(b, &format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Self { layers }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, mut x: NodeRef) -> Result<NodeRef> {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, p, x)?;
            if i + 1 < self.layers.len() {
                x = g.silu(x)?;
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub n_heads: usize,
    pub model_dim: usize,
    query: LinearLayer,
    key: LinearLayer,
    value: LinearLayer,
    output: LinearLayer,
}

pub struct AttentionOutput {
    pub output: NodeRef,
    /// Row-stochastic weights, `[sequences*heads*L x L]`.
    pub weights: NodeRef,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        name: &str,
        model_dim: usize,
        n_heads: usize,
    ) -> Result<Self> {
        if n_heads == 0 || model_dim % n_heads != 0 {
            return Err(Error::config(
                "n_heads",
                format!("{n_heads} heads do not divide model_dim {model_dim}"),
            ));
        }
        Ok(Self {
            n_heads,
            model_dim,
            query: LinearLayer::new(b, &format!("{name}.query"), model_dim, model_dim),
            key: LinearLayer::new(b, &format!("{name}.key"), model_dim, model_dim),
            value: LinearLayer::new(b, &format!("{name}.value"), model_dim, model_dim),
            output: LinearLayer::new(b, &format!("{name}.output"), model_dim, model_dim),
        })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.n_heads
    }

    /// Self-attention over `sequences` independent sequences of `len` tokens
    /// stacked as rows of `x: [sequences*len x model_dim]`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        x: NodeRef,
        sequences: usize,
        len: usize,
    ) -> Result<AttentionOutput> {
        let (h, d, dh) = (self.n_heads, self.model_dim, self.head_dim());
        if len == 0 || g.shape(x)? != [sequences * len, d] {
            return Err(Error::shape(format!(
                "attention expects [{} x {d}], got {:?}",
                sequences * len,
                g.shape(x)?
            )));
        }
        // row (s, head, l), col c  <-  row (s, l), col head*dh + c
        let mut split = Vec::with_capacity(sequences * len * d);
        for s in 0..sequences {
            for head in 0..h {
                for l in 0..len {
                    let base = (s * len + l) * d + head * dh;
                    split.extend(base..base + dh);
                }
            }
        }
        let mut merge = vec![0; split.len()];
        for (dst, &src) in split.iter().enumerate() {
            merge[src] = dst;
        }
        let groups = sequences * h;
        let heads = [sequences * h * len, dh];
        let q = self.query.forward(g, p, x)?;
        let q = g.gather(q, split.clone(), &heads)?;
        let k = self.key.forward(g, p, x)?;
        let k = g.gather(k, split.clone(), &heads)?;
        let v = self.value.forward(g, p, x)?;
        let v = g.gather(v, split, &heads)?;
        let scores = g.bmm(q, k, groups, true)?;
        let scores = g.scale(scores, T::of(1.0 / (dh as f64).sqrt()))?;
        let weights = g.softmax(scores)?;
        let mixed = g.bmm(weights, v, groups, false)?;
        let merged = g.gather(mixed, merge, &[sequences * len, d])?;
        let output = self.output.forward(g, p, merged)?;
        Ok(AttentionOutput { output, weights })
    }
}

/// Per-expert routing counts accumulated over forward passes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateReport {
    pub counts: Vec<usize>,
    /// Number of (token, slot) assignments, `tokens * top_k`.
    pub assignments: usize,
}

impl GateReport {
    pub fn new(n_experts: usize) -> Self {
        Self {
            counts: vec![0; n_experts],
            assignments: 0,
        }
    }

    pub fn merge(&mut self, other: &GateReport) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.assignments += other.assignments;
    }

    /// Share of assignments per expert; sums to 1 when anything was routed.
    pub fn fractions(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| {
                if self.assignments == 0 {
                    0.0
                } else {
                    c as f64 / self.assignments as f64
                }
            })
            .collect()
    }
}

/// Indices of the `k` largest scores, ties going to the lower index.
pub fn top_k_indices<T: Scalar>(scores: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

#[derive(Debug, Clone)]
pub struct MoELayer {
    pub n_experts: usize,
    pub top_k: usize,
    pub model_dim: usize,
    gate: LinearLayer,
    experts: Vec<Mlp>,
}

pub struct MoEOutput {
    pub output: NodeRef,
    /// Mixing weights per token and slot, `[tokens x top_k]`.
    pub weights: NodeRef,
    /// Selected experts per token, in slot order.
    pub selected: Vec<Vec<usize>>,
    /// Squared deviation of mean gate probabilities from uniform.
    pub balance: NodeRef,
    pub report: GateReport,
}

impl MoELayer {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        name: &str,
        model_dim: usize,
        hidden: usize,
        n_experts: usize,
        top_k: usize,
    ) -> Result<Self> {
        if n_experts == 0 || top_k == 0 || top_k > n_experts {
            return Err(Error::config(
                "top_k",
                format!("{top_k} of {n_experts} experts"),
            ));
        }
        let gate = LinearLayer::new(b, &format!("{name}.gate"), model_dim, n_experts);
        let experts = (0..n_experts)
            .map(|e| Mlp::new(b, &format!("{name}.expert{e}"), &[model_dim, hidden, model_dim]))
            .collect();
        Ok(Self {
            n_experts,
            top_k,
            model_dim,
            gate,
            experts,
        })
    }

    /// Test hook: route through more or fewer experts without changing weights.
    pub fn set_top_k(&mut self, top_k: usize) -> Result<()> {
        if top_k == 0 || top_k > self.n_experts {
            return Err(Error::config("top_k", format!("{top_k} of {} experts", self.n_experts)));
        }
        self.top_k = top_k;
        Ok(())
    }

    pub fn expert_forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        expert: usize,
        x: NodeRef,
    ) -> Result<NodeRef> {
        self.experts[expert].forward(g, p, x)
    }

    pub fn gate_scores<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: NodeRef) -> Result<NodeRef> {
        self.gate.forward(g, p, x)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: NodeRef) -> Result<MoEOutput> {
        let (e, k, d) = (self.n_experts, self.top_k, self.model_dim);
        let shape = g.shape(x)?.to_vec();
        if shape.len() != 2 || shape[1] != d {
            return Err(Error::shape(format!("moe expects [_ x {d}], got {shape:?}")));
        }
        let tokens = shape[0];
        let scores = self.gate.forward(g, p, x)?;
        let selected: Vec<Vec<usize>> = g
            .value(scores)?
            .chunks(e)
            .map(|row| top_k_indices(row, k))
            .collect();
        let picks: Vec<usize> = selected
            .iter()
            .enumerate()
            .flat_map(|(t, sel)| sel.iter().map(move |&j| t * e + j))
            .collect();
        let chosen = g.gather(scores, picks, &[tokens, k])?;
        let weights = g.softmax(chosen)?;

        let mut report = GateReport::new(e);
        report.assignments = tokens * k;
        let mut output: Option<NodeRef> = None;
        for expert in 0..e {
            let mut rows = Vec::new();
            let mut slots = Vec::new();
            for (t, sel) in selected.iter().enumerate() {
                if let Some(slot) = sel.iter().position(|&j| j == expert) {
                    rows.push(t);
                    slots.push(t * k + slot);
                }
            }
            report.counts[expert] = rows.len();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len();
            let index = rows.iter().flat_map(|&t| t * d..(t + 1) * d).collect();
            let xe = g.gather(x, index, &[n, d])?;
            let ye = self.experts[expert].forward(g, p, xe)?;
            let we = g.gather(weights, slots, &[n, 1])?;
            let contrib = g.mul(ye, we)?;
            let back = rows.iter().flat_map(|&t| t * d..(t + 1) * d).collect();
            let placed = g.scatter_add(contrib, back, &[tokens, d])?;
            output = Some(match output {
                Some(acc) => g.add(acc, placed)?,
                None => placed,
            });
        }
        let output = output.expect("at least one expert receives tokens");

        let probs = g.softmax(scores)?;
        let usage = g.reduce(ReduceOp::Mean, probs, Some(0))?;
        let centered = g.add_scalar(usage, T::of(-1.0 / e as f64))?;
        let sq = g.square(centered)?;
        let balance = g.mean(sq)?;
        Ok(MoEOutput {
            output,
            weights,
            selected,
            balance,
            report,
        })
    }
}

/// Dense or mixture feed-forward sublayer of a transformer block.
#[derive(Debug, Clone)]
pub enum FeedForward {
    Dense(Mlp),
    Mixture(MoELayer),
}

#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub norm1: LayerNorm,
    pub attention: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ffn: FeedForward,
}

pub struct BlockOutput {
    pub output: NodeRef,
    pub balance: Option<NodeRef>,
    pub report: Option<GateReport>,
}

impl TransformerBlock {
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        x: NodeRef,
        sequences: usize,
        len: usize,
    ) -> Result<BlockOutput> {
        let h = self.norm1.forward(g, p, x)?;
        let a = self.attention.forward(g, p, h, sequences, len)?;
        let x = g.add(x, a.output)?;
        let h = self.norm2.forward(g, p, x)?;
        let (f, balance, report) = match &self.ffn {
            FeedForward::Dense(mlp) => (mlp.forward(g, p, h)?, None, None),
            FeedForward::Mixture(moe) => {
                let m = moe.forward(g, p, h)?;
                (m.output, Some(m.balance), Some(m.report))
            }
        };
        Ok(BlockOutput {
            output: g.add(x, f)?,
            balance,
            report,
        })
    }
}
