//! Photon loss and dephasing in the Fock basis, and the closed-form
//! per-quadrature displacement spreads used by the analytic error model.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::fock::{self, CMatrix, FockDensity, FockOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Transmissivity η ∈ (0, 1].
    pub eta: f64,
    /// Dephasing rate γ ≥ 0.
    pub gamma: f64,
}

impl NoiseParams {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        let n = Self { eta, gamma };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// (1 − η)/(2η), the loss contribution to each quadrature variance.
    pub fn loss_variance(&self) -> f64 {
        (1.0 - self.eta) / (2.0 * self.eta)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// √(C(n, k)(1−η)^k η^{n−k}); the amplitude for losing k of n photons.
fn loss_amplitude(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if eta == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(n as u64, k as u64)
        + k as f64 * (1.0 - eta).ln()
        + (n - k) as f64 * eta.ln();
    (0.5 * ln).exp()
}

/// Kraus operators K_k[n−k, n] = √(C(n,k)(1−η)^k η^{n−k}), k = 0 … D−1.
///
/// At η = 1 only the identity is returned.
pub fn loss_kraus(eta: f64, dim: usize) -> Result<Vec<FockOperator>> {
    check_eta(eta)?;
    if dim == 0 {
        return Err(Error::InvalidDimension("cutoff must be positive".into()));
    }
    if eta == 1.0 {
        return Ok(vec![FockOperator::identity(dim)]);
    }
    let ops = (0..dim)
        .map(|k| {
            let m = CMatrix::from_fn(dim, dim, |row, col| {
                if col >= k && row == col - k {
                    C64::new(loss_amplitude(col, k, eta), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            FockOperator::from_matrix(m).expect("square by construction")
        })
        .collect();
    Ok(ops)
}

/// Σ_k K_k ρ K_k† evaluated elementwise:
/// ρ'[m, n] = Σ_k A(m+k, k) A(n+k, k) ρ[m+k, n+k].
pub fn apply_loss(rho: &FockDensity, eta: f64) -> Result<FockDensity> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    let amp = CMatrix::from_fn(d, d, |n, k| C64::new(loss_amplitude(n, k, eta), 0.0));
    let src = rho.matrix();
    let out = CMatrix::from_fn(d, d, |m, n| {
        let kmax = d - m.max(n);
        (0..kmax)
            .map(|k| amp[(m + k, k)] * amp[(n + k, k)] * src[(m + k, n + k)])
            .sum()
    });
    Ok(FockDensity::from_matrix_unchecked(out))
}

/// ρ_mn ← ρ_mn e^{−γ(m−n)²/2}.
pub fn apply_dephasing(rho: &FockDensity, gamma: f64) -> Result<FockDensity> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    let d = rho.dim();
    let src = rho.matrix();
    let out = CMatrix::from_fn(d, d, |m, n| {
        let dm = m as f64 - n as f64;
        src[(m, n)] * (-0.5 * gamma * dm * dm).exp()
    });
    Ok(FockDensity::from_matrix_unchecked(out))
}

/// Random p-displacements of variance γ: ρ(q, q′) ← ρ(q, q′) e^{−γ(q−q′)²/2}.
///
/// Evaluated in the eigenbasis of the truncated q̂. Unlike [`apply_dephasing`],
/// which is diagonal in n and commutes with phase rotations, this map singles
/// out a phase-space axis.
pub fn apply_momentum_diffusion(rho: &FockDensity, gamma: f64) -> Result<FockDensity> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    let d = rho.dim();
    let q = fock::quadrature(d, 0.0)?;
    let eig = fock::hermitian_eig(&q)?;
    let v = eig.vector_matrix();
    let in_q = v.adjoint() * rho.matrix() * &v;
    let x = &eig.values;
    let damped = CMatrix::from_fn(d, d, |i, j| {
        let dx = x[i] - x[j];
        in_q[(i, j)] * (-0.5 * gamma * dx * dx).exp()
    });
    Ok(FockDensity::from_matrix_unchecked(&v * damped * v.adjoint()))
}

/// Loss followed by dephasing.
pub fn apply_noise(rho: &FockDensity, noise: &NoiseParams) -> Result<FockDensity> {
    noise.validate()?;
    apply_dephasing(&apply_loss(rho, noise.eta)?, noise.gamma)
}

/// (σ_q, σ_p) with σ_q² = (1−η)/(2η) + γ sin²θ and σ_p² = (1−η)/(2η) + γ cos²θ.
pub fn effective_sigmas(noise: &NoiseParams, theta: f64) -> (f64, f64) {
    let base = noise.loss_variance();
    let (s, c) = theta.sin_cos();
    (
        (base + noise.gamma * s * s).sqrt(),
        (base + noise.gamma * c * c).sqrt(),
    )
}
