//! GKP stabilizer lattice geometry.
//!
//! A rotation θ and an aspect ratio r define the lattice
//! u1 = R(θ)(a·r, 0)ᵀ, u2 = R(θ)(0, a/r)ᵀ with a = √(2π). Rotations preserve
//! the symplectic form, so the commutation condition holds for every (θ, r).
//! Products are reported in units of π (the stabilizers carry e^{−iπ u·Ω r̂}),
//! which puts the square lattice at a²/π = 2.
//!
//! An OAM mode of charge ℓ on a system supporting charges up to ℓ_max is
//! mapped to the phase-space rotation θ_ℓ = ℓπ/ℓ_max.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice spacing constant √(2π).
pub const LATTICE_CONSTANT: f64 = 2.5066282746310002;

/// Symplectic form Ω = [[0, 1], [−1, 0]].
pub const OMEGA: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

/// Topological (or fractional-Fourier) OAM index together with the system maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OamCharge {
    pub ell: f64,
    pub ell_max: u32,
}

impl OamCharge {
    pub fn new(ell: f64, ell_max: u32) -> Result<Self> {
        if ell_max == 0 {
            return Err(Error::InvalidInput("ell_max must be at least 1".into()));
        }
        if !ell.is_finite() {
            return Err(Error::InvalidInput(format!("ell must be finite, got {ell}")));
        }
        Ok(Self { ell, ell_max })
    }

    /// Nearest integer charge; reporting only.
    pub fn projected(&self) -> Self {
        Self {
            ell: self.ell.round(),
            ell_max: self.ell_max,
        }
    }
}

/// θ_ℓ = ℓπ/ℓ_max in radians.
pub fn theta_from_oam(charge: OamCharge) -> Result<f64> {
    if charge.ell_max == 0 {
        return Err(Error::InvalidInput("ell_max must be at least 1".into()));
    }
    Ok(charge.ell * PI / charge.ell_max as f64)
}

/// u1ᵀ Ω u2 in units of π.
pub fn symplectic_product(u1: [f64; 2], u2: [f64; 2]) -> f64 {
    (u1[0] * (OMEGA[0][0] * u2[0] + OMEGA[0][1] * u2[1])
        + u1[1] * (OMEGA[1][0] * u2[0] + OMEGA[1][1] * u2[1]))
        / PI
}

fn rotate(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpLattice {
    pub u1: [f64; 2],
    pub u2: [f64; 2],
    /// Rotation in radians.
    pub theta: f64,
    pub r: f64,
}

impl GkpLattice {
    pub fn twisted(theta: f64, r: f64) -> Result<Self> {
        twisted_lattice(theta, r)
    }

    /// θ = 0, r = 1.
    pub fn square() -> Self {
        Self::twisted(0.0, 1.0).expect("r = 1 is valid")
    }

    /// θ = π/6, r = 1.
    pub fn hexagonal() -> Self {
        Self::twisted(PI / 6.0, 1.0).expect("r = 1 is valid")
    }

    pub fn oam(charge: OamCharge, r: f64) -> Result<Self> {
        Self::twisted(theta_from_oam(charge)?, r)
    }

    pub fn a(&self) -> f64 {
        LATTICE_CONSTANT
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn symplectic_product(&self) -> f64 {
        symplectic_product(self.u1, self.u2)
    }

    /// Lattice points m·u1 + n·u2 for |m|, |n| ≤ extent.
    pub fn points(&self, extent: i32) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(((2 * extent + 1) * (2 * extent + 1)) as usize);
        for m in -extent..=extent {
            for n in -extent..=extent {
                let (m, n) = (m as f64, n as f64);
                pts.push([
                    m * self.u1[0] + n * self.u2[0],
                    m * self.u1[1] + n * self.u2[1],
                ]);
            }
        }
        pts
    }
}

pub fn twisted_lattice(theta: f64, r: f64) -> Result<GkpLattice> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("aspect ratio must be positive, got {r}")));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidInput("theta must be finite".into()));
    }
    Ok(GkpLattice {
        u1: rotate(theta, [LATTICE_CONSTANT * r, 0.0]),
        u2: rotate(theta, [0.0, LATTICE_CONSTANT / r]),
        theta,
        r,
    })
}
