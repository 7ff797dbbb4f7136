use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reals per action for `n_tx` transmit antennas: re/im of `w` and `v`.
pub const fn action_len(n_tx: usize) -> usize {
    4 * n_tx
}

/// Confidential-signal beamformer `w` and artificial-noise beamformer `v`
/// with `|w|^2 + |v|^2 <= tx_power`.
///
/// Flat layout is `[w_re, w_im, v_re, v_im]`, `n_tx` reals each.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingAction<T> {
    flat: Vec<T>,
    n_tx: usize,
}

/// Radial projection onto the power ball. Vectors already within a
/// relative `1e-12` of the budget are returned untouched, which makes the
/// projection exactly idempotent.
pub fn project_power<T: Scalar>(flat: &[T], tx_power: T) -> Vec<T> {
    let p: T = flat.iter().map(|&x| x * x).sum();
    if p <= tx_power * (T::one() + T::of(1e-12)) {
        return flat.to_vec();
    }
    let k = (tx_power / p).sqrt();
    flat.iter().map(|&x| x * k).collect()
}

impl<T: Scalar> BeamformingAction<T> {
    /// Build from a flat vector, projecting onto the power budget.
    pub fn from_flat(flat: &[T], n_tx: usize, tx_power: T) -> Result<Self> {
        if flat.len() != action_len(n_tx) {
            return Err(Error::shape(format!(
                "action needs {} reals for {n_tx} antennas, got {}",
                action_len(n_tx),
                flat.len()
            )));
        }
        Ok(Self {
            flat: project_power(flat, tx_power),
            n_tx,
        })
    }

    pub fn zero(n_tx: usize) -> Self {
        Self {
            flat: vec![T::zero(); action_len(n_tx)],
            n_tx,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn flat(&self) -> &[T] {
        &self.flat
    }

    pub fn w(&self) -> (&[T], &[T]) {
        let n = self.n_tx;
        (&self.flat[..n], &self.flat[n..2 * n])
    }

    pub fn v(&self) -> (&[T], &[T]) {
        let n = self.n_tx;
        (&self.flat[2 * n..3 * n], &self.flat[3 * n..])
    }

    pub fn power(&self) -> T {
        self.flat.iter().map(|&x| x * x).sum()
    }
}
