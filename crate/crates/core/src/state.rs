//! Finite-energy GKP codewords in the Fock basis and the geometry gates.
//!
//! A codeword is the ideal position comb Σ_s |q = (s + μ/2)·√(2π)⟩ projected
//! onto number states and damped by the envelope operator e^{−πε n̂}, so the
//! photon-number distribution falls off as e^{−2πε n}. Number-state
//! wavefunctions use q = (a + a†)/√2 (vacuum variance ½).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, CMatrix, CVector, FockDensity, FockKet, FockOperator, C64};
use crate::lattice::LATTICE_CONSTANT;

/// Maximum squeeze leakage past the cutoff before a run is aborted.
pub const LEAKAGE_THRESHOLD: f64 = 1e-3;

/// Extra Fock levels used when measuring squeeze leakage.
const LEAKAGE_PADDING: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpStateParams {
    pub epsilon: f64,
    pub bloch_theta: f64,
    pub bloch_phi: f64,
    pub cutoff: usize,
}

impl GkpStateParams {
    pub fn new(epsilon: f64, bloch_theta: f64, bloch_phi: f64, cutoff: usize) -> Result<Self> {
        let p = Self {
            epsilon,
            bloch_theta,
            bloch_phi,
            cutoff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(0.0..=PI).contains(&self.bloch_theta) {
            return Err(Error::InvalidInput(format!(
                "bloch_theta must lie in [0, π], got {}",
                self.bloch_theta
            )));
        }
        if !self.bloch_phi.is_finite() {
            return Err(Error::InvalidInput("bloch_phi must be finite".into()));
        }
        if self.cutoff < 10 {
            return Err(Error::InvalidDimension(format!(
                "codeword cutoff must be >= 10, got {}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// ψ_0(q) … ψ_{dim−1}(q) by the three-term recurrence.
pub fn hermite_functions(q: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if dim == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * q * q).exp();
    if dim > 1 {
        out[1] = 2f64.sqrt() * q * out[0];
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * q * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

/// Comb half-width: wide enough for the envelope and for the support of ψ_{dim−1}.
pub fn comb_half_width(epsilon: f64, dim: usize) -> i64 {
    let envelope = (6.0 / (2.0 * PI * epsilon).sqrt()).ceil();
    let support = (((2 * dim + 1) as f64).sqrt() + 6.0) / LATTICE_CONSTANT;
    envelope.max(support.ceil()) as i64
}

/// Unnormalized real amplitudes of codeword μ.
fn codeword_amplitudes(mu: u8, epsilon: f64, dim: usize) -> Vec<f64> {
    let s_max = comb_half_width(epsilon, dim);
    let mut amps = vec![0.0; dim];
    for s in -s_max..=s_max {
        let q = (s as f64 + 0.5 * mu as f64) * LATTICE_CONSTANT;
        for (acc, psi) in amps.iter_mut().zip(hermite_functions(q, dim)) {
            *acc += psi;
        }
    }
    for (n, a) in amps.iter_mut().enumerate() {
        *a *= (-PI * epsilon * n as f64).exp();
    }
    amps
}

/// Normalized finite-energy codeword |μ̄_ε⟩ at cutoff `dim`.
pub fn prepare_codeword(mu: u8, epsilon: f64, dim: usize) -> Result<FockKet> {
    if mu > 1 {
        return Err(Error::InvalidInput(format!("codeword index must be 0 or 1, got {mu}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if dim < 10 {
        return Err(Error::InvalidDimension(format!(
            "codeword cutoff must be >= 10, got {dim}"
        )));
    }
    FockKet::from_real(&codeword_amplitudes(mu, epsilon, dim)).normalized()
}

/// Photon-number weight at n ≥ `dim`, measured against a reference cutoff.
pub fn codeword_tail_weight(mu: u8, epsilon: f64, dim: usize, reference_dim: usize) -> Result<f64> {
    let reference = prepare_codeword(mu, epsilon, reference_dim.max(dim + 1))?;
    Ok(reference.photon_distribution()[dim..].iter().sum())
}

/// normalize(cos(θ_B/2)|0̄⟩ + e^{iφ_B} sin(θ_B/2)|1̄⟩).
pub fn logical_state(params: &GkpStateParams) -> Result<FockKet> {
    params.validate()?;
    let zero = prepare_codeword(0, params.epsilon, params.cutoff)?;
    let one = prepare_codeword(1, params.epsilon, params.cutoff)?;
    let c0 = C64::new((0.5 * params.bloch_theta).cos(), 0.0);
    let c1 = C64::from_polar((0.5 * params.bloch_theta).sin(), params.bloch_phi);
    let amps = zero.amplitudes() * c0 + one.amplitudes() * c1;
    FockKet::from_amplitudes(amps).normalized()
}

/// Result of a squeeze: the renormalized ket and the weight that left the cutoff.
#[derive(Debug, Clone)]
pub struct Squeezed {
    pub ket: FockKet,
    pub leakage: f64,
}

/// H = (a†² − a²)/2 at the given cutoff.
pub fn squeeze_generator(dim: usize) -> Result<CMatrix> {
    let a = fock::annihilation(dim)?.into_matrix();
    let a2 = &a * &a;
    Ok((a2.adjoint() - a2) * C64::new(0.5, 0.0))
}

/// Spectrum of the Hermitian generator K = iH, so that exp(sH) = V e^{−isΛ} V†.
struct SqueezeSpectrum {
    values: Vec<f64>,
    vectors: CMatrix,
}

fn squeeze_spectrum(dim: usize) -> Result<Arc<SqueezeSpectrum>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SqueezeSpectrum>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().expect("squeeze cache poisoned").get(&dim) {
        return Ok(Arc::clone(s));
    }
    let k = FockOperator::from_matrix(squeeze_generator(dim)? * C64::new(0.0, 1.0))?;
    let eig = fock::hermitian_eig(&k)?;
    let spectrum = Arc::new(SqueezeSpectrum {
        values: eig.values.iter().copied().collect(),
        vectors: eig.vector_matrix(),
    });
    cache
        .lock()
        .expect("squeeze cache poisoned")
        .insert(dim, Arc::clone(&spectrum));
    Ok(spectrum)
}

/// The squeeze unitary exp(log_r · H) at the given cutoff, by scaling and squaring.
pub fn squeeze_unitary(dim: usize, log_r: f64) -> Result<CMatrix> {
    fock::expm(&(squeeze_generator(dim)? * C64::new(log_r, 0.0)))
}

/// Applies S(log_r) = exp(log_r · H); a positive log_r stretches q by e^{log_r}.
///
/// The exponential is evaluated in a padded space so that the weight pushed
/// past the cutoff can be measured; that weight is reported as `leakage` and
/// the state is truncated back to the original cutoff and renormalized.
/// The generator's spectrum is computed once per cutoff and reused.
pub fn squeeze(psi: &FockKet, log_r: f64) -> Result<Squeezed> {
    if !(log_r.abs() <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "|log_r| must be <= 1, got {log_r}"
        )));
    }
    let dim = psi.cutoff();
    if log_r == 0.0 {
        return Ok(Squeezed {
            ket: psi.clone(),
            leakage: 0.0,
        });
    }
    let padded_dim = dim + LEAKAGE_PADDING;
    let spec = squeeze_spectrum(padded_dim)?;
    let coeffs = spec.vectors.adjoint() * psi.pad(padded_dim).amplitudes();
    let phased = CVector::from_iterator(
        padded_dim,
        coeffs
            .iter()
            .zip(&spec.values)
            .map(|(c, &l)| c * C64::from_polar(1.0, -log_r * l)),
    );
    let raw = FockKet::from_amplitudes(&spec.vectors * phased);
    if raw.amplitudes().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite amplitude after squeeze".into()));
    }
    let total = raw.norm().powi(2);
    let kept: f64 = raw.photon_distribution()[..dim].iter().sum();
    let leakage = (1.0 - kept / total).max(0.0);
    if leakage > LEAKAGE_THRESHOLD {
        return Err(Error::Truncation {
            leakage,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    Ok(Squeezed {
        ket: raw.truncate(dim).normalized()?,
        leakage,
    })
}

/// Energy stretch ½(r² + r⁻²) of a squeeze on a state with equal quadrature spreads.
pub fn stretch_factor(r: f64) -> f64 {
    0.5 * (r * r + 1.0 / (r * r))
}

/// Phase-space rotation by diag(e^{−inθ}).
pub trait Rotate: Sized {
    fn rotated(&self, theta: f64) -> Self;
}

impl Rotate for FockKet {
    fn rotated(&self, theta: f64) -> Self {
        let amps = DVector::from_iterator(
            self.cutoff(),
            self.amplitudes()
                .iter()
                .enumerate()
                .map(|(n, a)| a * C64::from_polar(1.0, -(n as f64) * theta)),
        );
        FockKet::from_amplitudes(amps)
    }
}

impl Rotate for FockDensity {
    fn rotated(&self, theta: f64) -> Self {
        let d = self.dim();
        let src = self.matrix();
        let m = CMatrix::from_fn(d, d, |i, j| {
            src[(i, j)] * C64::from_polar(1.0, -((i as f64) - (j as f64)) * theta)
        });
        FockDensity::from_matrix_unchecked(m)
    }
}

pub fn rotate<S: Rotate>(state: &S, theta: f64) -> S {
    state.rotated(theta)
}
