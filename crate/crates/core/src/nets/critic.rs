use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gradcore::{Graph, NodeRef};
use crate::{Error, Result, Scalar};

use super::layers::Mlp;
use super::params::{read_params, write_params, Bound, Builder, ParamSet};

const CRITIC_TAG: u8 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            state_dim: 387,
            action_dim: 64,
            hidden: 256,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("state_dim", self.state_dim),
            ("action_dim", self.action_dim),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Twin Q-networks over `state || action`.
#[derive(Debug, Clone)]
pub struct CriticParameters<T> {
    config: CriticConfig,
    q1: Mlp,
    q2: Mlp,
    pub params: ParamSet<T>,
}

fn build<T: Scalar>(cfg: &CriticConfig, b: &mut Builder<T>) -> Result<(Mlp, Mlp)> {
    cfg.validate()?;
    let dims = [cfg.state_dim + cfg.action_dim, cfg.hidden, cfg.hidden, 1];
    Ok((Mlp::new(b, "q1", &dims), Mlp::new(b, "q2", &dims)))
}

impl<T: Scalar> CriticParameters<T> {
    pub fn init(config: &CriticConfig, seed: u64) -> Result<Self> {
        let mut b = Builder::new(Some(seed));
        let (q1, q2) = build(config, &mut b)?;
        Ok(Self {
            config: config.clone(),
            q1,
            q2,
            params: b.finish(),
        })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn zero_final_layers(&mut self) {
        for net in [&self.q1, &self.q2] {
            let last = net.layers.last().expect("critic has layers");
            let (w, b) = (last.weight, last.bias);
            let tensors = self.params.tensors_mut();
            tensors[w].data.iter_mut().for_each(|x| *x = T::zero());
            tensors[b].data.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Result<Bound> {
        self.params.bind(g, trainable)
    }

    /// Returns `(q1, q2)`, each `[B x 1]`.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        state: NodeRef,
        action: NodeRef,
    ) -> Result<(NodeRef, NodeRef)> {
        let (s, a) = (g.shape(state)?.to_vec(), g.shape(action)?.to_vec());
        if s.len() != 2
            || a.len() != 2
            || s[0] != a[0]
            || s[1] != self.config.state_dim
            || a[1] != self.config.action_dim
        {
            return Err(Error::shape(format!("critic inputs {s:?} and {a:?}")));
        }
        let x = g.concat_cols(&[state, action])?;
        Ok((self.q1.forward(g, p, x)?, self.q2.forward(g, p, x)?))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_params(w, CRITIC_TAG, &self.config, &self.params)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (tag, config, params): (u8, CriticConfig, ParamSet<T>) = read_params(r)?;
        if tag != CRITIC_TAG {
            return Err(Error::Format(format!("tag {tag} is not a critic")));
        }
        let mut b = Builder::new(None);
        let (q1, q2) = build(&config, &mut b)?;
        let mut layout = b.finish();
        layout.load_from(params)?;
        Ok(Self {
            config,
            q1,
            q2,
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
