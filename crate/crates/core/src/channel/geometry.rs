use serde::{Deserialize, Serialize};

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn half_wavelength() -> f64 {
    0.5
}

/// Antenna array layout; spacing is in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrayGeometry {
    /// Planar array in the x-y plane, boresight +z.
    Upa {
        nx: usize,
        ny: usize,
        #[serde(default = "half_wavelength")]
        spacing: f64,
    },
    /// Linear array along the x axis.
    Ula {
        n: usize,
        #[serde(default = "half_wavelength")]
        spacing: f64,
    },
}

impl ArrayGeometry {
    pub fn upa(nx: usize, ny: usize) -> Self {
        Self::Upa {
            nx,
            ny,
            spacing: half_wavelength(),
        }
    }

    pub fn ula(n: usize) -> Self {
        Self::Ula {
            n,
            spacing: half_wavelength(),
        }
    }

    pub fn elements(&self) -> usize {
        match *self {
            Self::Upa { nx, ny, .. } => nx * ny,
            Self::Ula { n, .. } => n,
        }
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            Self::Upa { spacing, .. } | Self::Ula { spacing, .. } => spacing,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let counts_ok = match *self {
            Self::Upa { nx, ny, .. } => nx >= 1 && ny >= 1,
            Self::Ula { n, .. } => n >= 1,
        };
        if !counts_ok {
            return Err(Error::config(field, "element counts must be at least 1"));
        }
        if !(self.spacing() > 0.0) || !self.spacing().is_finite() {
            return Err(Error::config(field, "spacing must be positive"));
        }
        Ok(())
    }

    /// Unit-norm response toward (`elevation` from boresight, `azimuth`).
    /// Element `(m, n)` sits at flat index `m * ny + n`.
    pub fn steering_upa<T: Scalar>(&self, elevation: f64, azimuth: f64) -> Result<ComplexMatrix<T>> {
        let Self::Upa { nx, ny, spacing } = *self else {
            return Err(Error::Geometry("steering_upa needs a planar array".into()));
        };
        let norm = 1.0 / ((nx * ny) as f64).sqrt();
        let (u, v) = (
            elevation.sin() * azimuth.cos(),
            elevation.sin() * azimuth.sin(),
        );
        let mut entries = Vec::with_capacity(nx * ny);
        for m in 0..nx {
            for n in 0..ny {
                let phase = 2.0 * std::f64::consts::PI * spacing * (m as f64 * u + n as f64 * v);
                entries.push((T::of(norm * phase.cos()), T::of(norm * phase.sin())));
            }
        }
        Ok(ComplexMatrix::column(&entries))
    }

    /// Unit-norm response at `angle` measured from the array axis.
    pub fn steering_ula<T: Scalar>(&self, angle: f64) -> Result<ComplexMatrix<T>> {
        let Self::Ula { n, spacing } = *self else {
            return Err(Error::Geometry("steering_ula needs a linear array".into()));
        };
        let norm = 1.0 / (n as f64).sqrt();
        let c = angle.cos();
        let entries: Vec<_> = (0..n)
            .map(|k| {
                let phase = 2.0 * std::f64::consts::PI * spacing * k as f64 * c;
                (T::of(norm * phase.cos()), T::of(norm * phase.sin()))
            })
            .collect();
        Ok(ComplexMatrix::column(&entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn upa_at_boresight_is_uniform() {
        let a = ArrayGeometry::upa(4, 4).steering_upa::<f64>(0.0, 1.3).unwrap();
        for k in 0..16 {
            assert!((a.re()[k] - 0.25).abs() < 1e-15);
            assert_eq!(a.im()[k], 0.0);
        }
        let one = ArrayGeometry::upa(1, 1).steering_upa::<f64>(0.7, 0.2).unwrap();
        assert_eq!((one.re()[0], one.im()[0]), (1.0, 0.0));
    }

    #[test]
    fn upa_matches_per_element_phase() {
        let (theta, phi) = (PI / 3.0, PI / 4.0);
        let a = ArrayGeometry::upa(4, 4).steering_upa::<f64>(theta, phi).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                // independent evaluation: phase = pi * sin(theta) * (m cos(phi) + n sin(phi))
                let phase = PI * theta.sin() * (m as f64 * phi.cos() + n as f64 * phi.sin());
                let (re, im) = a.get(m * 4 + n, 0);
                assert!((re - 0.25 * phase.cos()).abs() < 1e-14);
                assert!((im - 0.25 * phase.sin()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ula_examples() {
        let g = ArrayGeometry::ula(6);
        let a = g.steering_ula::<f64>(PI / 2.0).unwrap();
        for k in 0..6 {
            assert!((a.re()[k] - 1.0 / 6f64.sqrt()).abs() < 1e-12);
            assert!(a.im()[k].abs() < 1e-12);
        }
        let one = ArrayGeometry::ula(1).steering_ula::<f64>(0.3).unwrap();
        assert_eq!((one.re()[0], one.im()[0]), (1.0, 0.0));

        let a = ArrayGeometry::ula(4).steering_ula::<f64>(PI / 3.0).unwrap();
        for k in 0..4 {
            // 2 pi * 0.5 * k * cos(pi / 3)
            let phase = k as f64 * PI / 2.0;
            assert!((a.re()[k] - 0.5 * phase.cos()).abs() < 1e-14);
            assert!((a.im()[k] - 0.5 * phase.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_geometry_is_rejected() {
        assert!(ArrayGeometry::ula(4).steering_upa::<f64>(0.1, 0.1).is_err());
        assert!(ArrayGeometry::upa(2, 2).steering_ula::<f64>(0.1).is_err());
        assert!(ArrayGeometry::ula(0).validate("uav_array").is_err());
        let bad = ArrayGeometry::Upa { nx: 2, ny: 2, spacing: 0.0 };
        assert!(bad.validate("bs_array").is_err());
    }

    #[test]
    fn steering_vectors_have_unit_norm() {
        for k in 0..50 {
            let t = k as f64 * 0.13;
            let a = ArrayGeometry::upa(4, 4).steering_upa::<f64>(t, 2.0 * t).unwrap();
            assert!((a.frobenius_sq() - 1.0).abs() < 1e-12);
            let b = ArrayGeometry::ula(6).steering_ula::<f64>(t).unwrap();
            assert!((b.frobenius_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_form() {
        let g: ArrayGeometry = serde_json::from_str(r#"{"kind":"ula","n":6}"#).unwrap();
        assert_eq!(g, ArrayGeometry::ula(6));
        assert!(serde_json::from_str::<ArrayGeometry>(r#"{"kind":"ula","n":6,"x":1}"#).is_err());
    }
}
