//! Nominal and uncertainty-perturbed MIMO channels for a base station with
//! a planar array serving a legitimate UAV while an eavesdropper listens.
//!
//! Each link is Rician: a line-of-sight term built from the steering
//! vectors of both arrays plus i.i.d. complex Gaussian scattering,
//! scaled by the distance-dependent power gain
//! `g = 10^(reference_gain_db / 10) * d^(-pathloss_exponent)`.

mod complex;
mod geometry;
mod scenario;

pub use complex::ComplexMatrix;
pub use geometry::ArrayGeometry;
pub use scenario::{Scenario, UncertaintyModel, EVE_UNCERTAINTY_FACTOR, MAX_ALTITUDE_M};

use crate::error::{Error, Result};
use crate::rng::{normal, rng_from, Rng};
use crate::scalar::Scalar;

/// Legitimate (`h_b`) and eavesdropper (`h_e`) channels, each
/// `[receive antennas x transmit antennas]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair<T> {
    pub h_b: ComplexMatrix<T>,
    pub h_e: ComplexMatrix<T>,
}

/// Angles of one link: departure (elevation from +z, azimuth) at the base
/// station and arrival angle from the receiver's array axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAngles {
    pub elevation: f64,
    pub azimuth: f64,
    pub arrival: f64,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn link_angles(bs: [f64; 3], rx: [f64; 3]) -> Result<LinkAngles> {
    let d = distance(bs, rx);
    if !(d > 0.0) {
        return Err(Error::Geometry("transmitter and receiver coincide".into()));
    }
    let v = [rx[0] - bs[0], rx[1] - bs[1], rx[2] - bs[2]];
    Ok(LinkAngles {
        elevation: (v[2] / d).clamp(-1.0, 1.0).acos(),
        azimuth: v[1].atan2(v[0]),
        // receiver ULA lies along x; arrival direction points back at the BS
        arrival: (-v[0] / d).clamp(-1.0, 1.0).acos(),
    })
}

pub fn path_gain(scenario: &Scenario, rx: [f64; 3]) -> Result<f64> {
    let d = distance(scenario.bs_position, rx);
    if !(d > 0.0) {
        return Err(Error::Geometry("transmitter and receiver coincide".into()));
    }
    Ok(10f64.powf(scenario.reference_gain_db / 10.0) * d.powf(-scenario.pathloss_exponent))
}

/// Unit-modulus line-of-sight matrix `a_rx a_tx^H sqrt(N_rx N_tx)`.
fn los_matrix<T: Scalar>(
    bs_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    angles: LinkAngles,
) -> Result<ComplexMatrix<T>> {
    let tx = bs_array.steering_upa::<T>(angles.elevation, angles.azimuth)?;
    let rx = rx_array.steering_ula::<T>(angles.arrival)?;
    let n = T::of(((tx.rows() * rx.rows()) as f64).sqrt());
    Ok(ComplexMatrix::outer_conj(&rx, &tx).scaled(n))
}

/// Standard complex Gaussian matrix (unit variance per entry).
fn complex_gaussian<T: Scalar>(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix<T> {
    let half = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut m = ComplexMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let a: T = normal(rng);
            let b: T = normal(rng);
            m.set(r, c, (a * half, b * half));
        }
    }
    m
}

fn rician_link<T: Scalar>(
    scenario: &Scenario,
    rx_pos: [f64; 3],
    rx_array: &ArrayGeometry,
    rng: &mut Rng,
) -> Result<ComplexMatrix<T>> {
    let g = path_gain(scenario, rx_pos)?;
    let angles = link_angles(scenario.bs_position, rx_pos)?;
    let k = scenario.rician_k;
    let los = los_matrix::<T>(&scenario.bs_array, rx_array, angles)?;
    let scatter = complex_gaussian::<T>(rng, rx_array.elements(), scenario.bs_array.elements());
    let los_w = T::of((g * k / (k + 1.0)).sqrt());
    let nlos_w = T::of((g / (k + 1.0)).sqrt());
    los.scaled(los_w).add(&scatter.scaled(nlos_w))
}

/// Draw the nominal channel pair for `scenario`. Deterministic per seed.
pub fn nominal_channel<T: Scalar>(scenario: &Scenario, seed: u64) -> Result<ChannelPair<T>> {
    scenario.validate()?;
    let mut rng = rng_from(seed);
    let h_b = rician_link(scenario, scenario.uav_position, &scenario.uav_array, &mut rng)?;
    let h_e = rician_link(scenario, scenario.eve_position, &scenario.eve_array, &mut rng)?;
    Ok(ChannelPair { h_b, h_e })
}

fn jitter_link<T: Scalar>(
    nominal: &ComplexMatrix<T>,
    scenario: &Scenario,
    rx_pos: [f64; 3],
    rx_array: &ArrayGeometry,
    u: &UncertaintyModel,
    rng: &mut Rng,
) -> Result<ComplexMatrix<T>> {
    let mut h = nominal.clone();
    if u.position_sigma > 0.0 || u.aoa_sigma > 0.0 {
        let mut pos = rx_pos;
        for p in pos.iter_mut() {
            *p += u.position_sigma * normal::<f64>(rng);
        }
        let mut angles = link_angles(scenario.bs_position, pos)?;
        angles.elevation += u.aoa_sigma * normal::<f64>(rng);
        angles.azimuth += u.aoa_sigma * normal::<f64>(rng);
        angles.arrival += u.aoa_sigma * normal::<f64>(rng);
        let k = scenario.rician_k;
        let los_share = k / (k + 1.0);
        let old_w = T::of((path_gain(scenario, rx_pos)? * los_share).sqrt());
        let new_w = T::of((path_gain(scenario, pos)? * los_share).sqrt());
        let nominal_angles = link_angles(scenario.bs_position, rx_pos)?;
        let old_los = los_matrix::<T>(&scenario.bs_array, rx_array, nominal_angles)?;
        let new_los = los_matrix::<T>(&scenario.bs_array, rx_array, angles)?;
        // swap the line-of-sight term, keep the scattering realization
        h = h.sub(&old_los.scaled(old_w))?.add(&new_los.scaled(new_w))?;
    }
    if u.csi_error_sigma > 0.0 {
        let per_entry = (h.frobenius_sq().as_f64() / (h.rows() * h.cols()) as f64).sqrt();
        let z = complex_gaussian::<T>(rng, h.rows(), h.cols());
        h = h.add(&z.scaled(T::of(u.csi_error_sigma * per_entry)))?;
    }
    Ok(h)
}

/// One uncertainty realization around `nominal`: jittered receiver
/// positions and angles re-derive the line-of-sight term, then an additive
/// complex Gaussian CSI error is applied. The eavesdropper's sigmas are
/// scaled by [`EVE_UNCERTAINTY_FACTOR`]. A zero model returns `nominal`
/// unchanged.
pub fn perturb<T: Scalar>(
    nominal: &ChannelPair<T>,
    scenario: &Scenario,
    u: &UncertaintyModel,
    seed: u64,
) -> Result<ChannelPair<T>> {
    u.validate()?;
    if u.is_zero() {
        return Ok(nominal.clone());
    }
    let mut rng = rng_from(seed);
    let h_b = jitter_link(
        &nominal.h_b,
        scenario,
        scenario.uav_position,
        &scenario.uav_array,
        u,
        &mut rng,
    )?;
    let eve_u = u.scaled(EVE_UNCERTAINTY_FACTOR);
    let h_e = jitter_link(
        &nominal.h_e,
        scenario,
        scenario.eve_position,
        &scenario.eve_array,
        &eve_u,
        &mut rng,
    )?;
    Ok(ChannelPair { h_b, h_e })
}

#[cfg(test)]
mod tests;
