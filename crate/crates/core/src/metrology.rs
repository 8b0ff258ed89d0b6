//! Quantum and homodyne Fisher information for phase estimation, and the
//! derived efficiency and capacity figures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, CMatrix, FockDensity, FockKet, FockOperator, C64};
use crate::state::rotate;

/// Default cutoff on λ_j + λ_k in the mixed-state QFI sum.
pub const EIG_TOL: f64 = 1e-12;

const VAR_FLOOR: f64 = 1e-14;

/// 4 Var(G) on a normalized pure state.
pub fn qfi_pure(psi: &FockKet, g: &FockOperator) -> Result<f64> {
    if !psi.is_normalized() {
        return Err(Error::InvalidInput(format!(
            "qfi_pure needs a normalized ket, norm is {}",
            psi.norm()
        )));
    }
    if g.dim() != psi.cutoff() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: ket {} vs generator {}",
            psi.cutoff(),
            g.dim()
        )));
    }
    let gpsi = g.matrix() * psi.amplitudes();
    let mean = psi.amplitudes().dotc(&gpsi).re;
    let second = gpsi.dotc(&gpsi).re;
    Ok((4.0 * (second - mean * mean)).max(0.0))
}

/// 2 Σ_{j,k} (λ_j − λ_k)²/(λ_j + λ_k) |⟨j|G|k⟩|² over pairs with λ_j + λ_k > eig_tol.
pub fn qfi_mixed(rho: &FockDensity, g: &FockOperator, eig_tol: f64) -> Result<f64> {
    if g.dim() != rho.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: density {} vs generator {}",
            rho.dim(),
            g.dim()
        )));
    }
    let eig = fock::hermitian_eig(&rho.as_operator())?;
    let v = eig.vector_matrix();
    let g_eig = v.adjoint() * g.matrix() * &v;
    let lam = &eig.values;
    let d = rho.dim();
    let mut sum = 0.0;
    for j in 0..d {
        for k in 0..d {
            let s = lam[j] + lam[k];
            if s > eig_tol {
                let diff = lam[j] - lam[k];
                sum += diff * diff / s * g_eig[(j, k)].norm_sqr();
            }
        }
    }
    Ok(2.0 * sum)
}

/// QFI of the phase generator n̂.
pub fn qfi_phase(rho: &FockDensity) -> Result<f64> {
    qfi_mixed(rho, &fock::number(rho.dim()), EIG_TOL)
}

/// ∂_φ ρ = −i[n̂, ρ] for the encoding ρ(φ) = e^{−iφn̂} ρ e^{iφn̂}.
pub fn phase_derivative(rho: &FockDensity) -> CMatrix {
    let d = rho.dim();
    let m = rho.matrix();
    CMatrix::from_fn(d, d, |i, j| C64::new(0.0, -((i as f64) - (j as f64))) * m[(i, j)])
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    // Tr(AB) without forming the product
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn cfi_from_derivative(rho: &FockDensity, drho: &CMatrix, psi_angle: f64) -> Result<f64> {
    let x = fock::quadrature(rho.dim(), psi_angle)?;
    let mean = trace_product(rho.matrix(), x.matrix()).re;
    let x2 = x.matrix() * x.matrix();
    let var = trace_product(rho.matrix(), &x2).re - mean * mean;
    if var < VAR_FLOOR {
        return Err(Error::DegenerateVariance(format!(
            "Var(x_ψ) = {var:e} at ψ = {psi_angle}"
        )));
    }
    let slope = trace_product(x.matrix(), drho).re;
    Ok(slope * slope / var)
}

/// Homodyne CFI |∂_φ⟨x_ψ⟩|² / Var(x_ψ) at φ = 0.
pub fn cfi_homodyne(rho: &FockDensity, psi_angle: f64) -> Result<f64> {
    cfi_from_derivative(rho, &phase_derivative(rho), psi_angle)
}

/// Homodyne CFI with the signal phase φ imprinted before measuring.
pub fn cfi_homodyne_at(rho: &FockDensity, psi_angle: f64, phi: f64) -> Result<f64> {
    cfi_homodyne(&rotate(rho, phi), psi_angle)
}

/// Same quantity with ∂_φ⟨x_ψ⟩ from a central difference of the rotated state.
pub fn cfi_homodyne_fd(rho: &FockDensity, psi_angle: f64, step: f64) -> Result<f64> {
    let x = fock::quadrature(rho.dim(), psi_angle)?;
    let mean_at = |phi: f64| trace_product(rotate(rho, phi).matrix(), x.matrix()).re;
    let slope = (mean_at(step) - mean_at(-step)) / (2.0 * step);
    let mean = mean_at(0.0);
    let var = trace_product(rho.matrix(), &(x.matrix() * x.matrix())).re - mean * mean;
    if var < VAR_FLOOR {
        return Err(Error::DegenerateVariance(format!(
            "Var(x_ψ) = {var:e} at ψ = {psi_angle}"
        )));
    }
    Ok(slope * slope / var)
}

/// LO angle in [0, π) maximizing the homodyne CFI: grid scan, then golden-section polish.
pub fn optimal_homodyne_angle(rho: &FockDensity, grid: usize) -> Result<(f64, f64)> {
    let grid = grid.max(8);
    let f = |psi: f64| cfi_homodyne(rho, psi).unwrap_or(0.0);
    let h = PI / grid as f64;
    let (mut best, mut best_val) = (0.0, f64::NEG_INFINITY);
    for i in 0..grid {
        let psi = i as f64 * h;
        let v = f(psi);
        if v > best_val {
            best = psi;
            best_val = v;
        }
    }
    let (mut lo, mut hi) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let psi = 0.5 * (lo + hi);
    let val = f(psi);
    let (psi, val) = if val >= best_val { (psi, val) } else { (best, best_val) };
    if !(val > 0.0) {
        return Err(Error::DegenerateVariance(
            "homodyne CFI vanishes at every LO angle".into(),
        ));
    }
    Ok((psi.rem_euclid(PI), val))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Binary-channel efficiency 1 − 4p(1−p).
pub fn measurement_efficiency(p_err: f64) -> Result<f64> {
    check_probability(p_err)?;
    Ok(1.0 - 4.0 * p_err * (1.0 - p_err))
}

/// C = F_Q (−ln P_err).
pub fn capacity(qfi: f64, p_err: f64) -> Result<f64> {
    if !(qfi >= 0.0) {
        return Err(Error::InvalidInput(format!("qfi must be non-negative, got {qfi}")));
    }
    if !(p_err > 0.0 && p_err < 1.0) {
        return Err(Error::InvalidInput(format!(
            "p_err must lie in (0, 1), got {p_err}"
        )));
    }
    Ok(-qfi * p_err.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetrologyReport {
    pub qfi: f64,
    pub cfi: f64,
    pub psi: f64,
    pub eta_meas: f64,
    pub capacity: f64,
}

impl MetrologyReport {
    /// Evaluates every figure for an output state and a logical error rate.
    pub fn evaluate(rho: &FockDensity, p_err: f64) -> Result<Self> {
        let qfi = qfi_phase(rho)?;
        let (psi, cfi) = optimal_homodyne_angle(rho, 64)?;
        if cfi > qfi + 1e-8 {
            return Err(Error::Numeric(format!("CFI {cfi} exceeds QFI {qfi}")));
        }
        Ok(Self {
            qfi,
            cfi,
            psi,
            eta_meas: measurement_efficiency(p_err)?,
            capacity: capacity(qfi, p_err)?,
        })
    }
}
