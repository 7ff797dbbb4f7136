use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ArrayGeometry;
use crate::error::{Error, Result};

/// Geometry and link budget of one beamforming episode. SI units:
/// positions in meters, powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub bs_position: [f64; 3],
    pub uav_position: [f64; 3],
    pub eve_position: [f64; 3],
    pub tx_power: f64,
    pub noise_power: f64,
    pub rician_k: f64,
    pub pathloss_exponent: f64,
    /// Channel power gain at 1 m, in dB.
    pub reference_gain_db: f64,
    pub bs_array: ArrayGeometry,
    pub uav_array: ArrayGeometry,
    pub eve_array: ArrayGeometry,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0, 10.0],
            uav_position: [50.0, 0.0, 100.0],
            eve_position: [40.0, 30.0, 80.0],
            tx_power: 1.0,
            noise_power: 1e-9,
            rician_k: 10.0,
            pathloss_exponent: 2.2,
            reference_gain_db: -40.0,
            bs_array: ArrayGeometry::upa(4, 4),
            uav_array: ArrayGeometry::ula(6),
            eve_array: ArrayGeometry::ula(6),
        }
    }
}

/// Upper bound of the low-altitude airspace.
pub const MAX_ALTITUDE_M: f64 = 1000.0;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, f: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(f, format!("must be positive, got {v}")))
            }
        };
        positive(self.tx_power, "tx_power")?;
        positive(self.noise_power, "noise_power")?;
        if !(self.rician_k >= 0.0) {
            return Err(Error::config("rician_k", "must be non-negative"));
        }
        if !(self.pathloss_exponent >= 0.0) || !self.pathloss_exponent.is_finite() {
            return Err(Error::config("pathloss_exponent", "must be non-negative"));
        }
        if !self.reference_gain_db.is_finite() {
            return Err(Error::config("reference_gain_db", "must be finite"));
        }
        for (p, f) in [
            (self.bs_position, "bs_position"),
            (self.uav_position, "uav_position"),
            (self.eve_position, "eve_position"),
        ] {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(f, "coordinates must be finite"));
            }
        }
        for (p, f) in [
            (self.uav_position, "uav_position"),
            (self.eve_position, "eve_position"),
        ] {
            if !(p[2] > 0.0 && p[2] <= MAX_ALTITUDE_M) {
                return Err(Error::config(
                    f,
                    format!("altitude {} outside (0, {MAX_ALTITUDE_M}] m", p[2]),
                ));
            }
        }
        self.bs_array.validate("bs_array")?;
        if !matches!(self.bs_array, ArrayGeometry::Upa { .. }) {
            return Err(Error::config("bs_array", "base station uses a planar array"));
        }
        for (a, f) in [(self.uav_array, "uav_array"), (self.eve_array, "eve_array")] {
            a.validate(f)?;
            if !matches!(a, ArrayGeometry::Ula { .. }) {
                return Err(Error::config(f, "receivers use linear arrays"));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }
}

/// Standard deviations of the estimation errors injected around a nominal
/// scenario. The eavesdropper's errors are inflated by
/// [`EVE_UNCERTAINTY_FACTOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyModel {
    /// Location error per axis, meters.
    pub position_sigma: f64,
    /// Relative CSI error.
    pub csi_error_sigma: f64,
    /// Angle error, radians.
    pub aoa_sigma: f64,
}

pub const EVE_UNCERTAINTY_FACTOR: f64 = 2.0;

impl Default for UncertaintyModel {
    fn default() -> Self {
        Self {
            position_sigma: 2.0,
            csi_error_sigma: 0.05,
            aoa_sigma: 0.02,
        }
    }
}

impl UncertaintyModel {
    pub fn none() -> Self {
        Self {
            position_sigma: 0.0,
            csi_error_sigma: 0.0,
            aoa_sigma: 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            position_sigma: self.position_sigma * k,
            csi_error_sigma: self.csi_error_sigma * k,
            aoa_sigma: self.aoa_sigma * k,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.position_sigma == 0.0 && self.csi_error_sigma == 0.0 && self.aoa_sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (v, f) in [
            (self.position_sigma, "position_sigma"),
            (self.csi_error_sigma, "csi_error_sigma"),
            (self.aoa_sigma, "aoa_sigma"),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(f, format!("must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}
