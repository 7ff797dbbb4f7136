use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gradcore::{Graph, NodeRef};
use crate::{Error, Result, Scalar};

use super::layers::{FeedForward, GateReport, LayerNorm, LinearLayer, MoELayer, Mlp, MultiHeadAttention, TransformerBlock};
use super::params::{read_params, write_params, Bound, Builder, Init, ParamSet};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorVariant {
    MlpDiffusion,
    TransformerDiffusion,
    MoeTransformerDiffusion,
    Gaussian,
}

impl ActorVariant {
    pub const ALL: [ActorVariant; 4] = [
        ActorVariant::MlpDiffusion,
        ActorVariant::TransformerDiffusion,
        ActorVariant::MoeTransformerDiffusion,
        ActorVariant::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActorVariant::MlpDiffusion => "mlp_diffusion",
            ActorVariant::TransformerDiffusion => "transformer_diffusion",
            ActorVariant::MoeTransformerDiffusion => "moe_transformer_diffusion",
            ActorVariant::Gaussian => "gaussian",
        }
    }

    pub fn is_diffusion(self) -> bool {
        self != ActorVariant::Gaussian
    }

    fn tag(self) -> u8 {
        match self {
            ActorVariant::MlpDiffusion => 0,
            ActorVariant::TransformerDiffusion => 1,
            ActorVariant::MoeTransformerDiffusion => 2,
            ActorVariant::Gaussian => 3,
        }
    }
}

impl fmt::Display for ActorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActorVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ActorVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ActorVariant::ALL.iter().map(|v| v.name()).collect();
                Error::config("actor_variant", format!("unknown variant {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActorConfig {
    pub variant: ActorVariant,
    pub state_dim: usize,
    pub action_dim: usize,
    pub model_dim: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub ffn_dim: usize,
    pub n_experts: usize,
    pub top_k: usize,
    pub mlp_hidden: usize,
    pub steps: usize,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self::full_size(ActorVariant::MoeTransformerDiffusion)
    }
}

impl ActorConfig {
    pub fn full_size(variant: ActorVariant) -> Self {
        Self {
            variant,
            state_dim: 387,
            action_dim: 64,
            model_dim: 256,
            n_heads: 4,
            n_blocks: 2,
            ffn_dim: 512,
            n_experts: 4,
            top_k: 2,
            mlp_hidden: 256,
            steps: 6,
        }
    }

    /// Width-8 network for gradient checks.
    pub fn tiny(variant: ActorVariant, state_dim: usize) -> Self {
        Self {
            state_dim,
            model_dim: 8,
            ffn_dim: 16,
            mlp_hidden: 8,
            ..Self::full_size(variant)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("state_dim", self.state_dim),
            ("action_dim", self.action_dim),
            ("model_dim", self.model_dim),
            ("n_heads", self.n_heads),
            ("n_blocks", self.n_blocks),
            ("ffn_dim", self.ffn_dim),
            ("n_experts", self.n_experts),
            ("mlp_hidden", self.mlp_hidden),
            ("steps", self.steps),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.model_dim % self.n_heads != 0 {
            return Err(Error::config(
                "n_heads",
                format!("{} does not divide model_dim {}", self.n_heads, self.model_dim),
            ));
        }
        if self.top_k == 0 || self.top_k > self.n_experts {
            return Err(Error::config(
                "top_k",
                format!("must be in 1..={}", self.n_experts),
            ));
        }
        Ok(())
    }

    /// Gaussian actors emit a mean and a log-std per action coordinate.
    pub fn output_dim(&self) -> usize {
        match self.variant {
            ActorVariant::Gaussian => 2 * self.action_dim,
            _ => self.action_dim,
        }
    }
}

/// Sinusoidal encoding of a diffusion step index.
pub fn step_encoding(step: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let freq = 10000f64.powf(-((j / 2 * 2) as f64) / dim as f64);
            let x = step as f64 * freq;
            if j % 2 == 0 {
                x.sin()
            } else {
                x.cos()
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Embeddings {
    state: LinearLayer,
    step: LinearLayer,
    action: LinearLayer,
}

#[derive(Debug, Clone)]
enum Arch {
    Mlp {
        embed: Embeddings,
        trunk: Mlp,
    },
    Transformer {
        embed: Embeddings,
        position: usize,
        blocks: Vec<TransformerBlock>,
        norm: LayerNorm,
        head: LinearLayer,
    },
    Gaussian {
        trunk: Mlp,
    },
}

fn build<T: Scalar>(cfg: &ActorConfig, b: &mut Builder<T>) -> Result<Arch> {
    cfg.validate()?;
    let d = cfg.model_dim;
    let embed = |b: &mut Builder<T>| Embeddings {
        state: LinearLayer::new(b, "embed.state", cfg.state_dim, d),
        step: LinearLayer::new(b, "embed.step", d, d),
        action: LinearLayer::new(b, "embed.action", cfg.action_dim, d),
    };
    Ok(match cfg.variant {
        ActorVariant::MlpDiffusion => Arch::Mlp {
            embed: embed(b),
            trunk: Mlp::new(
                b,
                "trunk",
                &[3 * d, cfg.mlp_hidden, cfg.mlp_hidden, cfg.action_dim],
            ),
        },
        ActorVariant::Gaussian => Arch::Gaussian {
            trunk: Mlp::new(
                b,
                "trunk",
                &[cfg.state_dim, cfg.mlp_hidden, cfg.mlp_hidden, 2 * cfg.action_dim],
            ),
        },
        ActorVariant::TransformerDiffusion | ActorVariant::MoeTransformerDiffusion => {
            let embed = embed(b);
            let position = b.add("embed.position", &[3, d], Init::Glorot);
            let mut blocks = Vec::with_capacity(cfg.n_blocks);
            for i in 0..cfg.n_blocks {
                let name = format!("block{i}");
                let norm1 = LayerNorm::new(b, &format!("{name}.norm1"), d);
                let attention = MultiHeadAttention::new(b, &format!("{name}.attention"), d, cfg.n_heads)?;
                let norm2 = LayerNorm::new(b, &format!("{name}.norm2"), d);
                let ffn = if cfg.variant == ActorVariant::MoeTransformerDiffusion {
                    FeedForward::Mixture(MoELayer::new(
                        b,
                        &format!("{name}.moe"),
                        d,
                        cfg.ffn_dim,
                        cfg.n_experts,
                        cfg.top_k,
                    )?)
                } else {
                    FeedForward::Dense(Mlp::new(b, &format!("{name}.ffn"), &[d, cfg.ffn_dim, d]))
                };
                blocks.push(TransformerBlock {
                    norm1,
                    attention,
                    norm2,
                    ffn,
                });
            }
            Arch::Transformer {
                embed,
                position,
                blocks,
                norm: LayerNorm::new(b, "final_norm", d),
                head: LinearLayer::new(b, "head", d, cfg.action_dim),
            }
        }
    })
}

pub struct ActorOutput {
    /// Predicted noise `[B x action_dim]`, or mean then clamped log-std
    /// `[B x 2*action_dim]` for the Gaussian variant.
    pub output: NodeRef,
    /// Mean load-balancing penalty over MoE blocks.
    pub balance: Option<NodeRef>,
    pub report: Option<GateReport>,
}

#[derive(Debug, Clone)]
pub struct ActorParameters<T> {
    config: ActorConfig,
    arch: Arch,
    pub params: ParamSet<T>,
}

fn broadcast_rows<T: Scalar>(g: &mut Graph<T>, x: NodeRef, copies: usize) -> Result<NodeRef> {
    let n = g.value(x)?.len();
    let rows = g.shape(x)?.first().copied().unwrap_or(1);
    let cols = n / rows.max(1);
    let index = (0..copies).flat_map(|_| 0..n).collect();
    g.gather(x, index, &[copies * rows, cols])
}

impl<T: Scalar> ActorParameters<T> {
    pub fn init(config: &ActorConfig, seed: u64) -> Result<Self> {
        let mut b = Builder::new(Some(seed));
        let arch = build(config, &mut b)?;
        Ok(Self {
            config: config.clone(),
            arch,
            params: b.finish(),
        })
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn variant(&self) -> ActorVariant {
        self.config.variant
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Zeroes the final projection so every output is exactly zero.
    pub fn zero_output_head(&mut self) {
        let last = match &self.arch {
            Arch::Mlp { trunk, .. } | Arch::Gaussian { trunk } => trunk.layers.last().expect("trunk has layers"),
            Arch::Transformer { head, .. } => head,
        };
        let (w, b) = (last.weight, last.bias);
        let tensors = self.params.tensors_mut();
        tensors[w].data.iter_mut().for_each(|x| *x = T::zero());
        tensors[b].data.iter_mut().for_each(|x| *x = T::zero());
    }

    /// Mutable access to every MoE layer, for routing experiments.
    pub fn moe_layers_mut(&mut self) -> Vec<&mut MoELayer> {
        match &mut self.arch {
            Arch::Transformer { blocks, .. } => blocks
                .iter_mut()
                .filter_map(|b| match &mut b.ffn {
                    FeedForward::Mixture(m) => Some(m),
                    FeedForward::Dense(_) => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Result<Bound> {
        self.params.bind(g, trainable)
    }

    /// Runs the network on a batch `state: [B x state_dim]`.
    ///
    /// Diffusion variants need `noisy: [B x action_dim]` and `step < steps`;
    /// the Gaussian variant ignores both.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        state: NodeRef,
        noisy: Option<NodeRef>,
        step: usize,
    ) -> Result<ActorOutput> {
        let cfg = &self.config;
        let s_shape = g.shape(state)?.to_vec();
        if s_shape.len() != 2 || s_shape[1] != cfg.state_dim {
            return Err(Error::shape(format!(
                "state must be [B x {}], got {s_shape:?}",
                cfg.state_dim
            )));
        }
        let batch = s_shape[0];
        if let Arch::Gaussian { trunk } = &self.arch {
            let out = trunk.forward(g, p, state)?;
            let mean = g.slice_cols(out, 0, cfg.action_dim)?;
            let raw = g.slice_cols(out, cfg.action_dim, cfg.action_dim)?;
            let log_std = g.clamp(raw, T::of(LOG_STD_MIN), T::of(LOG_STD_MAX))?;
            return Ok(ActorOutput {
                output: g.concat_cols(&[mean, log_std])?,
                balance: None,
                report: None,
            });
        }
        if step >= cfg.steps {
            return Err(Error::StepIndex {
                index: step,
                steps: cfg.steps,
            });
        }
        let noisy = noisy.ok_or_else(|| Error::shape("diffusion actor needs a noisy action"))?;
        if g.shape(noisy)? != [batch, cfg.action_dim] {
            return Err(Error::shape(format!(
                "noisy action must be [{batch} x {}], got {:?}",
                cfg.action_dim,
                g.shape(noisy)?
            )));
        }
        let d = cfg.model_dim;
        let (embed, rest) = match &self.arch {
            Arch::Mlp { embed, .. } | Arch::Transformer { embed, .. } => (embed, &self.arch),
            Arch::Gaussian { .. } => unreachable!(),
        };
        let enc: Vec<T> = step_encoding(step, d).into_iter().map(T::of).collect();
        let enc = g.constant(enc, &[1, d])?;
        let t = embed.step.forward(g, p, enc)?;
        let t = broadcast_rows(g, t, batch)?;
        let s = embed.state.forward(g, p, state)?;
        let a = embed.action.forward(g, p, noisy)?;
        let joined = g.concat_cols(&[s, t, a])?;
        match rest {
            Arch::Mlp { trunk, .. } => Ok(ActorOutput {
                output: trunk.forward(g, p, joined)?,
                balance: None,
                report: None,
            }),
            Arch::Transformer {
                position,
                blocks,
                norm,
                head,
                ..
            } => {
                let tokens = g.reshape(joined, &[3 * batch, d])?;
                let pos = broadcast_rows(g, p[*position], batch)?;
                let mut x = g.add(tokens, pos)?;
                let mut balances = Vec::new();
                let mut report: Option<GateReport> = None;
                for block in blocks {
                    let out = block.forward(g, p, x, batch, 3)?;
                    x = out.output;
                    if let Some(b) = out.balance {
                        balances.push(b);
                    }
                    if let Some(r) = out.report {
                        report.get_or_insert_with(|| GateReport::new(r.counts.len())).merge(&r);
                    }
                }
                let rows = g.reshape(x, &[batch, 3 * d])?;
                let action_token = g.slice_cols(rows, 2 * d, d)?;
                let h = norm.forward(g, p, action_token)?;
                let output = head.forward(g, p, h)?;
                let balance = match balances.as_slice() {
                    [] => None,
                    parts => {
                        let mut acc = parts[0];
                        for &b in &parts[1..] {
                            acc = g.add(acc, b)?;
                        }
                        Some(g.scale(acc, T::of(1.0 / parts.len() as f64))?)
                    }
                };
                Ok(ActorOutput {
                    output,
                    balance,
                    report,
                })
            }
            Arch::Gaussian { .. } => unreachable!(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_params(w, self.config.variant.tag(), &self.config, &self.params)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (tag, config, params): (u8, ActorConfig, ParamSet<T>) = read_params(r)?;
        if tag != config.variant.tag() {
            return Err(Error::Format(format!(
                "variant tag {tag} disagrees with config variant {}",
                config.variant
            )));
        }
        let mut b = Builder::new(None);
        let arch = build(&config, &mut b)?;
        let mut layout = b.finish();
        layout.load_from(params)?;
        Ok(Self {
            config,
            arch,
            params: layout,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
