//! The full sensing circuit: codeword, squeeze S(ln r), lattice rotation R(θ),
//! phase encoding, loss, then dephasing.

use serde::{Deserialize, Serialize};

use crate::channels::{apply_noise, NoiseParams};
use crate::error::Result;
use crate::fock::FockDensity;
use crate::metrology;
use crate::state::{logical_state, rotate, squeeze, GkpStateParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub state: GkpStateParams,
    /// Lattice rotation in radians.
    pub theta: f64,
    pub r: f64,
    pub noise: NoiseParams,
    /// Signal phase imprinted before the channels.
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct CircuitOutput {
    pub rho: FockDensity,
    pub leakage: f64,
}

pub fn run_circuit(p: &CircuitParams) -> Result<CircuitOutput> {
    let psi = logical_state(&p.state)?;
    let squeezed = squeeze(&psi, p.r.ln())?;
    let geometry = rotate(&squeezed.ket, p.theta);
    let encoded = rotate(&geometry, p.phi).to_density();
    Ok(CircuitOutput {
        rho: apply_noise(&encoded, &p.noise)?,
        leakage: squeezed.leakage,
    })
}

/// Phase QFI of the circuit output.
pub fn circuit_qfi(p: &CircuitParams) -> Result<f64> {
    metrology::qfi_phase(&run_circuit(p)?.rho)
}
