//! Achievable rates with artificial noise.
//!
//! With `a = H w` and `b = H v`, the single-stream SINR under optimal linear
//! combining is `a^H S^-1 a` where `S = sigma^2 I + b b^H`. The rank-one
//! inverse gives the closed form
//! `(|a|^2 - |b^H a|^2 / (sigma^2 + |b|^2)) / sigma^2`.

use super::BeamformingAction;
use crate::channel::{ChannelPair, ComplexMatrix};
use crate::error::{Error, Result};
use crate::gradcore::{Graph, NodeRef};
use crate::scalar::Scalar;

/// Temperature of the softplus hinge used inside gradient paths.
pub const HINGE_TEMPERATURE: f64 = 0.01;

fn check_noise<T: Scalar>(noise_power: T) -> Result<()> {
    if !(noise_power > T::zero()) {
        return Err(Error::config("noise_power", "must be positive"));
    }
    Ok(())
}

fn check_dims<T: Scalar>(h: &ComplexMatrix<T>, action: &BeamformingAction<T>) -> Result<()> {
    if h.cols() != action.n_tx() {
        return Err(Error::shape(format!(
            "channel has {} transmit antennas, action has {}",
            h.cols(),
            action.n_tx()
        )));
    }
    Ok(())
}

/// SINR of the confidential stream at the receiver behind `h`.
pub fn sinr<T: Scalar>(h: &ComplexMatrix<T>, action: &BeamformingAction<T>, noise_power: T) -> Result<T> {
    check_noise(noise_power)?;
    check_dims(h, action)?;
    let (wr, wi) = action.w();
    let (vr, vi) = action.v();
    let (ar, ai) = h.mul_vec(wr, wi);
    let (br, bi) = h.mul_vec(vr, vi);
    let dot = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&p, &q)| p * q).sum::<T>();
    let a2 = dot(&ar, &ar) + dot(&ai, &ai);
    let b2 = dot(&br, &br) + dot(&bi, &bi);
    let cross_re = dot(&br, &ar) + dot(&bi, &ai);
    let cross_im = dot(&br, &ai) - dot(&bi, &ar);
    let cross2 = cross_re * cross_re + cross_im * cross_im;
    let s = (a2 - cross2 / (noise_power + b2)) / noise_power;
    Ok(s.max(T::zero()))
}

/// `log2(1 + SINR)` in bps/Hz.
pub fn rate<T: Scalar>(h: &ComplexMatrix<T>, action: &BeamformingAction<T>, noise_power: T) -> Result<T> {
    Ok(sinr(h, action, noise_power)?.ln_1p() / T::LN_2())
}

/// Exact achievable secrecy rate `max(0, C_b - C_e)`.
pub fn asr<T: Scalar>(pair: &ChannelPair<T>, action: &BeamformingAction<T>, noise_power: T) -> Result<T> {
    let cb = rate(&pair.h_b, action, noise_power)?;
    let ce = rate(&pair.h_e, action, noise_power)?;
    Ok((cb - ce).max(T::zero()))
}

/// ASR minus the eavesdropper's capacity above `c_eve`.
pub fn penalized_reward<T: Scalar>(
    pair: &ChannelPair<T>,
    action: &BeamformingAction<T>,
    c_eve: T,
    noise_power: T,
) -> Result<T> {
    let ce = rate(&pair.h_e, action, noise_power)?;
    Ok(asr(pair, action, noise_power)? - (ce - c_eve).max(T::zero()))
}

/// Action split into graph nodes, each of rank 1 and length `n_tx`.
#[derive(Debug, Clone, Copy)]
pub struct ActionNodes {
    pub w_re: NodeRef,
    pub w_im: NodeRef,
    pub v_re: NodeRef,
    pub v_im: NodeRef,
}

impl ActionNodes {
    /// Slice a flat `[4 n_tx]` action node.
    pub fn from_flat<T: Scalar>(g: &mut Graph<T>, flat: NodeRef, n_tx: usize) -> Result<Self> {
        Ok(Self {
            w_re: g.slice_cols(flat, 0, n_tx)?,
            w_im: g.slice_cols(flat, n_tx, n_tx)?,
            v_re: g.slice_cols(flat, 2 * n_tx, n_tx)?,
            v_im: g.slice_cols(flat, 3 * n_tx, n_tx)?,
        })
    }
}

/// Radial power projection as graph ops (differentiable almost
/// everywhere): `x * min(1, sqrt(P / |x|^2))`.
pub fn project_power_node<T: Scalar>(g: &mut Graph<T>, flat: NodeRef, tx_power: T) -> Result<NodeRef> {
    let sq = g.square(flat)?;
    let p = g.sum(sq)?;
    let inv = g.recip(p)?;
    let ratio = g.scale(inv, tx_power)?;
    let root = g.sqrt(ratio)?;
    let one = g.scalar(T::one());
    let k = g.minimum(one, root)?;
    g.mul(flat, k)
}

/// Complex product `H x` as (re, im) column nodes `[n_rx x 1]`.
fn channel_apply<T: Scalar>(
    g: &mut Graph<T>,
    h: (NodeRef, NodeRef),
    x: (NodeRef, NodeRef),
) -> Result<(NodeRef, NodeRef)> {
    let rr = g.matmul_nt(h.0, x.0)?;
    let ii = g.matmul_nt(h.1, x.1)?;
    let ri = g.matmul_nt(h.0, x.1)?;
    let ir = g.matmul_nt(h.1, x.0)?;
    Ok((g.sub(rr, ii)?, g.add(ri, ir)?))
}

fn inner<T: Scalar>(g: &mut Graph<T>, x: NodeRef, y: NodeRef) -> Result<NodeRef> {
    let p = g.mul(x, y)?;
    g.sum(p)
}

/// Differentiable `rate` with respect to the action nodes.
pub fn rate_node<T: Scalar>(
    g: &mut Graph<T>,
    h: &ComplexMatrix<T>,
    action: &ActionNodes,
    noise_power: T,
) -> Result<NodeRef> {
    check_noise(noise_power)?;
    let shape = [h.rows(), h.cols()];
    let hr = g.constant(h.re().to_vec(), &shape)?;
    let hi = g.constant(h.im().to_vec(), &shape)?;
    let (ar, ai) = channel_apply(g, (hr, hi), (action.w_re, action.w_im))?;
    let (br, bi) = channel_apply(g, (hr, hi), (action.v_re, action.v_im))?;
    let a2 = {
        let x = inner(g, ar, ar)?;
        let y = inner(g, ai, ai)?;
        g.add(x, y)?
    };
    let b2 = {
        let x = inner(g, br, br)?;
        let y = inner(g, bi, bi)?;
        g.add(x, y)?
    };
    let cross_re = {
        let x = inner(g, br, ar)?;
        let y = inner(g, bi, ai)?;
        g.add(x, y)?
    };
    let cross_im = {
        let x = inner(g, br, ai)?;
        let y = inner(g, bi, ar)?;
        g.sub(x, y)?
    };
    let c2 = {
        let x = g.square(cross_re)?;
        let y = g.square(cross_im)?;
        g.add(x, y)?
    };
    let denom = g.add_scalar(b2, noise_power)?;
    let leak = g.div(c2, denom)?;
    let num = g.sub(a2, leak)?;
    let sinr = g.scale(num, noise_power.recip())?;
    let one_plus = g.add_scalar(sinr, T::one())?;
    let ln = g.log(one_plus)?;
    g.scale(ln, T::LN_2().recip())
}

/// Per-sample penalized reward with softplus hinges, for gradient paths.
pub fn smoothed_penalized_node<T: Scalar>(
    g: &mut Graph<T>,
    pair: &ChannelPair<T>,
    action: &ActionNodes,
    c_eve: T,
    noise_power: T,
) -> Result<NodeRef> {
    let t = T::of(HINGE_TEMPERATURE);
    let cb = rate_node(g, &pair.h_b, action, noise_power)?;
    let ce = rate_node(g, &pair.h_e, action, noise_power)?;
    let gap = g.sub(cb, ce)?;
    let asr = g.softplus(gap, t)?;
    let over = g.add_scalar(ce, -c_eve)?;
    let excess = g.softplus(over, t)?;
    g.sub(asr, excess)
}

/// Smoothed ASR node.
pub fn smoothed_asr_node<T: Scalar>(
    g: &mut Graph<T>,
    pair: &ChannelPair<T>,
    action: &ActionNodes,
    noise_power: T,
) -> Result<NodeRef> {
    let cb = rate_node(g, &pair.h_b, action, noise_power)?;
    let ce = rate_node(g, &pair.h_e, action, noise_power)?;
    let gap = g.sub(cb, ce)?;
    g.softplus(gap, T::of(HINGE_TEMPERATURE))
}
