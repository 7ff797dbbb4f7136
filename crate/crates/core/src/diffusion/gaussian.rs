use std::f64::consts::PI;

use crate::gradcore::{Graph, NodeRef};
use crate::nets::{ActorParameters, ActorVariant, Bound, CriticParameters};
use crate::rng::{derive_seed, normal_vec, rng_from, stream};
use crate::{Error, Result, Scalar};

use super::{check_states, project_rows, ActorLoss, Sample, SamplerMode};

/// Entropy weight of the Gaussian baseline's objective.
pub const DEFAULT_ENTROPY_COEF: f64 = 0.01;

const SQUASH_EPS: f64 = 1e-6;

fn require_gaussian<T: Scalar>(actor: &ActorParameters<T>) -> Result<()> {
    if actor.variant() != ActorVariant::Gaussian {
        return Err(Error::Variant(format!("{} is not a gaussian actor", actor.variant())));
    }
    Ok(())
}

/// Returns `(pre_tanh, tanh, log_prob [B x 1])`. `z = None` gives the mean
/// action, whose log-probability is still reported at `z = 0`.
pub fn gaussian_nodes<T: Scalar>(
    g: &mut Graph<T>,
    actor: &ActorParameters<T>,
    p: &Bound,
    state: NodeRef,
    z: Option<Vec<T>>,
) -> Result<(NodeRef, NodeRef, NodeRef)> {
    require_gaussian(actor)?;
    let dim = actor.config().action_dim;
    let out = actor.forward(g, p, state, None, 0)?;
    let batch = g.shape(out.output)?[0];
    let mean = g.slice_cols(out.output, 0, dim)?;
    let log_std = g.slice_cols(out.output, dim, dim)?;
    let (u, z_sq) = match z {
        Some(z) => {
            let z_sq: Vec<f64> = z
                .chunks(dim)
                .map(|row| row.iter().map(|v| v.as_f64() * v.as_f64()).sum())
                .collect();
            let zn = g.constant(z, &[batch, dim])?;
            let std = g.exp(log_std)?;
            let spread = g.mul(std, zn)?;
            (g.add(mean, spread)?, z_sq)
        }
        None => (mean, vec![0.0; batch]),
    };
    let squashed = g.tanh(u)?;
    // log N(u; mean, std) - log(1 - tanh(u)^2), summed over coordinates
    let sq = g.square(squashed)?;
    let slack = g.affine(sq, -T::one(), T::of(1.0 + SQUASH_EPS))?;
    let log_jac = g.log(slack)?;
    let per = g.add(log_std, log_jac)?;
    let per = g.reduce(crate::gradcore::ReduceOp::Sum, per, Some(1))?;
    let norm = 0.5 * dim as f64 * (2.0 * PI).ln();
    let constant = z_sq.iter().map(|&q| T::of(-0.5 * q - norm)).collect();
    let constant = g.constant(constant, &[batch, 1])?;
    let neg = g.neg(per)?;
    let log_prob = g.add(neg, constant)?;
    Ok((u, squashed, log_prob))
}

fn draw_z<T: Scalar>(len: usize, seed: u64) -> Vec<T> {
    normal_vec(&mut rng_from(derive_seed(seed, stream::ACTOR, 1)), len)
}

/// Squashed Gaussian policy: `tanh(mean + std z)` when exploring,
/// `tanh(mean)` otherwise, then power projection per row.
pub fn gaussian_action<T: Scalar>(
    actor: &ActorParameters<T>,
    states: &[T],
    batch: usize,
    mode: SamplerMode,
    seed: u64,
    tx_power: T,
) -> Result<Sample<T>> {
    require_gaussian(actor)?;
    check_states(actor, states, batch)?;
    let dim = actor.config().action_dim;
    let mut g = Graph::new();
    let p = actor.bind(&mut g, false)?;
    let s = g.constant(states.to_vec(), &[batch, actor.config().state_dim])?;
    let z = (mode == SamplerMode::Exploratory).then(|| draw_z(batch * dim, seed));
    let (u, squashed, _) = gaussian_nodes(&mut g, actor, &p, s, z)?;
    let squashed = g.value(squashed)?.to_vec();
    Ok(Sample {
        actions: project_rows(&squashed, dim, tx_power)?,
        squashed,
        record: None,
        report: None,
        pre_tanh: g.value(u)?.to_vec(),
    })
}

/// `mean(alpha log pi - min(q1, q2))` with reparameterized samples.
pub fn gaussian_loss<T: Scalar>(
    actor: &ActorParameters<T>,
    critic: &CriticParameters<T>,
    states: &[T],
    batch: usize,
    seed: u64,
    entropy_coef: f64,
) -> Result<ActorLoss<T>> {
    require_gaussian(actor)?;
    check_states(actor, states, batch)?;
    let dim = actor.config().action_dim;
    let mut g = Graph::new();
    let p = actor.bind(&mut g, true)?;
    let cp = critic.bind(&mut g, false)?;
    let s = g.constant(states.to_vec(), &[batch, actor.config().state_dim])?;
    let (_, squashed, log_prob) = gaussian_nodes(&mut g, actor, &p, s, Some(draw_z(batch * dim, seed)))?;
    let (q1, q2) = critic.forward(&mut g, &cp, s, squashed)?;
    let q = g.minimum(q1, q2)?;
    let weighted = g.scale(log_prob, T::of(entropy_coef))?;
    let per = g.sub(weighted, q)?;
    let loss = g.mean(per)?;
    let q_mean = g.mean(q)?;
    g.backward(loss)?;
    Ok(ActorLoss {
        loss: g.item(loss)?,
        q_mean: g.item(q_mean)?,
        balance: None,
        grads: actor.params.gradients(&g, &p)?,
        report: None,
    })
}
