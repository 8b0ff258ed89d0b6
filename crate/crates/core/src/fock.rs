//! Dense complex linear algebra in the truncated photon-number basis.
//!
//! Kets, operators and density matrices are immutable values; every
//! operation returns a fresh value. Cutoffs are small (D ≤ 64), so all
//! storage is dense.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default Fock cutoff used throughout the pipeline.
pub const DEFAULT_CUTOFF: usize = 30;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

/// Probability amplitudes in the number basis |0⟩ … |D−1⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct FockKet {
    amplitudes: CVector,
}

impl FockKet {
    pub fn from_amplitudes(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self {
            amplitudes: CVector::from_iterator(
                amplitudes.len(),
                amplitudes.iter().map(|&x| C64::new(x, 0.0)),
            ),
        }
    }

    /// Number state |n⟩ at cutoff `dim`.
    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidDimension(format!(
                "basis index {n} outside cutoff {dim}"
            )));
        }
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::basis(0, dim)
    }

    /// Coherent state |α⟩ truncated at `dim` and renormalized.
    pub fn coherent(alpha: C64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("cutoff must be positive".into()));
        }
        let mut amplitudes = CVector::zeros(dim);
        let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        amplitudes[0] = term;
        for n in 1..dim {
            term = term * alpha / (n as f64).sqrt();
            amplitudes[n] = term;
        }
        Self { amplitudes }.normalized()
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < NORM_TOL
    }

    /// Returns the ket rescaled to unit 2-norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numeric(format!("cannot normalize ket of norm {norm}")));
        }
        Ok(Self {
            amplitudes: self.amplitudes.unscale(norm),
        })
    }

    /// |⟨n|ψ⟩|² for every n.
    pub fn photon_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockKet) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn to_density(&self) -> FockDensity {
        FockDensity {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Keeps the first `dim` amplitudes (no renormalization).
    pub fn truncate(&self, dim: usize) -> Self {
        let dim = dim.min(self.cutoff());
        Self {
            amplitudes: self.amplitudes.rows(0, dim).into_owned(),
        }
    }

    /// Zero-pads to a larger cutoff.
    pub fn pad(&self, dim: usize) -> Self {
        let mut amplitudes = CVector::zeros(dim.max(self.cutoff()));
        amplitudes
            .rows_mut(0, self.cutoff())
            .copy_from(&self.amplitudes);
        Self { amplitudes }
    }
}

/// A linear operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    entries: CMatrix,
}

impl FockOperator {
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self {
            entries: CMatrix::from_diagonal(&CVector::from_column_slice(values)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            entries: &self.entries * factor,
        }
    }

    pub fn add(&self, other: &FockOperator) -> Self {
        Self {
            entries: &self.entries + &other.entries,
        }
    }

    pub fn sub(&self, other: &FockOperator) -> Self {
        Self {
            entries: &self.entries - &other.entries,
        }
    }

    pub fn compose(&self, other: &FockOperator) -> Self {
        Self {
            entries: &self.entries * &other.entries,
        }
    }

    /// M|ψ⟩ without renormalization.
    pub fn apply(&self, ket: &FockKet) -> FockKet {
        FockKet {
            amplitudes: &self.entries * &ket.amplitudes,
        }
    }

    /// Largest entrywise deviation from M = M†.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.entries, &self.entries.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// A density matrix ρ in the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    entries: CMatrix,
}

impl FockDensity {
    /// Validates hermiticity, unit trace and positivity before wrapping.
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidDimension("density must be square".into()));
        }
        let rho = Self { entries };
        let defect = max_abs_diff(&rho.entries, &rho.entries.adjoint());
        if defect > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "density not Hermitian (defect {defect:.2e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("density trace {tr} != 1")));
        }
        let eig = SymmetricEigen::new(rho.entries.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::InvalidInput(format!(
                "density has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Wraps a matrix produced by a trusted channel map.
    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }

    pub fn as_operator(&self) -> FockOperator {
        FockOperator {
            entries: self.entries.clone(),
        }
    }

    /// U ρ U†.
    pub fn conjugate_by(&self, unitary: &FockOperator) -> Self {
        Self {
            entries: unitary.matrix() * &self.entries * unitary.matrix().adjoint(),
        }
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Ladder operator with a[n−1, n] = √n.
pub fn annihilation(dim: usize) -> Result<FockOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation operator needs cutoff >= 2, got {dim}"
        )));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(FockOperator { entries: m })
}

pub fn creation(dim: usize) -> Result<FockOperator> {
    Ok(annihilation(dim)?.adjoint())
}

/// n̂ = diag(0, 1, …, D−1).
pub fn number(dim: usize) -> FockOperator {
    let values: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    FockOperator::diagonal(&values)
}

/// x_ψ = (a e^{iψ} + a† e^{−iψ})/√2, so x_0 = q̂ and x_{π/2} = p̂.
pub fn quadrature(dim: usize, angle: f64) -> Result<FockOperator> {
    let a = annihilation(dim)?;
    let phase = C64::from_polar(1.0, angle);
    let m = (a.matrix() * phase + a.matrix().adjoint() * phase.conj())
        * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(FockOperator { entries: m })
}

/// Diagonal phase unitary diag(e^{−i n θ}).
pub fn phase_rotation(dim: usize, theta: f64) -> FockOperator {
    let values: Vec<C64> = (0..dim)
        .map(|n| C64::from_polar(1.0, -(n as f64) * theta))
        .collect();
    FockOperator::diagonal(&values)
}

/// Tr(ρ M).
pub fn expectation(rho: &FockDensity, op: &FockOperator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: density {} vs operator {}",
            rho.dim(),
            op.dim()
        )));
    }
    let r = rho.matrix();
    let m = op.matrix();
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += r[(i, j)] * m[(j, i)];
        }
    }
    Ok(acc)
}

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<FockKet>,
}

impl HermitianEigen {
    /// Eigenvectors as the columns of a unitary matrix.
    pub fn vector_matrix(&self) -> CMatrix {
        let d = self.vectors.len();
        let mut v = CMatrix::zeros(d, d);
        for (k, vec) in self.vectors.iter().enumerate() {
            v.set_column(k, vec.amplitudes());
        }
        v
    }
}

pub fn hermitian_eig(op: &FockOperator) -> Result<HermitianEigen> {
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL * op.max_abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "operator not Hermitian (defect {defect:.2e})"
        )));
    }
    eig_matrix(op.matrix())
}

pub(crate) fn eig_matrix(m: &CMatrix) -> Result<HermitianEigen> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite entries in eigenproblem".into()));
    }
    // symmetrize to remove rounding asymmetry before the solver sees it
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| FockKet::from_amplitudes(eig.eigenvectors.column(i).into_owned()))
        .collect();
    Ok(HermitianEigen { values, vectors })
}

// Padé(13) coefficients and the 1-norm threshold for scaling-and-squaring.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// e^M by scaling-and-squaring around a degree-13 Padé approximant.
pub fn matrix_exp(op: &FockOperator) -> Result<FockOperator> {
    Ok(FockOperator {
        entries: expm(op.matrix())?,
    })
}

pub(crate) fn expm(a: &CMatrix) -> Result<CMatrix> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix_exp: non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a * C64::new(0.5f64.powi(squarings as i32), 0.0);

    let ident = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = &scaled
        * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numeric("matrix_exp: singular Padé denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix_exp: overflow".into()));
    }
    Ok(result)
}
