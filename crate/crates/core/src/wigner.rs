//! Wigner function on a phase-space grid and its negativity.
//!
//! Conventions: α = (q + ip)/√2, so the vacuum is W = e^{−q²−p²}/π. Values are
//! evaluated exactly for the truncated density matrix with the Laguerre
//! recurrence for W_{|m⟩⟨n|}, which equals Tr(ρ D(α) Π D†(α))/π with an
//! untruncated displacement (2/π per unit d²α is 1/π per unit dq dp).

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDensity, C64};
use crate::io::fmt_f64;

pub const DEFAULT_RANGE: (f64, f64) = (-6.0, 6.0);
pub const DEFAULT_POINTS: usize = 201;
pub const MIN_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[i][j]` is W(q_i, p_j).
    pub values: Vec<Vec<f64>>,
}

/// Grid metadata written next to the CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMeta {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    pub n_points: usize,
    pub cutoff: usize,
    pub integral: f64,
    pub negativity: f64,
    pub min: f64,
    pub max: f64,
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    let step = (range.1 - range.0) / (n - 1) as f64;
    (0..n).map(|i| range.0 + step * i as f64).collect()
}

/// W(q, p) of a density matrix at a single phase-space point.
pub fn wigner_point(rho: &FockDensity, q: f64, p: f64) -> f64 {
    let dim = rho.dim();
    let m = rho.matrix();
    let a = C64::new(q, p) / 2f64.sqrt();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    w[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let mut total = m[(0, 0)].re * w[0].re;
    for n in 1..dim {
        w[n] = 2.0 * a * w[n - 1] / (n as f64).sqrt();
        total += 2.0 * (m[(0, n)] * w[n]).re;
    }
    for mi in 1..dim {
        let sm = (mi as f64).sqrt();
        let mut prev = w[mi];
        w[mi] = (2.0 * a.conj() * prev - sm * w[mi - 1]) / sm;
        total += (m[(mi, mi)] * w[mi]).re;
        for n in mi + 1..dim {
            let next = (2.0 * a * w[n - 1] - sm * prev) / (n as f64).sqrt();
            prev = w[n];
            w[n] = next;
            total += 2.0 * (m[(mi, n)] * w[n]).re;
        }
    }
    total
}

/// W on an `n_points × n_points` grid spanning `q_range × p_range` (endpoints included).
pub fn wigner_grid(
    rho: &FockDensity,
    q_range: (f64, f64),
    p_range: (f64, f64),
    n_points: usize,
) -> Result<WignerGrid> {
    if n_points < MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "wigner grid needs at least {MIN_POINTS} points per axis, got {n_points}"
        )));
    }
    for (name, r) in [("q", q_range), ("p", p_range)] {
        if !(r.0.is_finite() && r.1.is_finite() && r.0 < r.1) {
            return Err(Error::InvalidInput(format!(
                "{name} range must be finite and increasing, got {r:?}"
            )));
        }
    }
    let q_axis = linspace(q_range, n_points);
    let p_axis = linspace(p_range, n_points);
    let values = q_axis
        .par_iter()
        .map(|&q| p_axis.iter().map(|&p| wigner_point(rho, q, p)).collect())
        .collect();
    Ok(WignerGrid {
        q_axis,
        p_axis,
        values,
    })
}

/// Riemann sum of max(0, −W)·dq·dp.
pub fn wigner_negativity(grid: &WignerGrid) -> f64 {
    grid.values
        .iter()
        .flatten()
        .map(|w| (-w).max(0.0))
        .sum::<f64>()
        * grid.cell_area()
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        let step = |axis: &[f64]| (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
        step(&self.q_axis) * step(&self.p_axis)
    }

    /// Riemann sum of W·dq·dp.
    pub fn integral(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() * self.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn meta(&self, cutoff: usize) -> WignerMeta {
        WignerMeta {
            q_range: (self.q_axis[0], self.q_axis[self.q_axis.len() - 1]),
            p_range: (self.p_axis[0], self.p_axis[self.p_axis.len() - 1]),
            n_points: self.q_axis.len(),
            cutoff,
            integral: self.integral(),
            negativity: wigner_negativity(self),
            min: self.min(),
            max: self.max(),
        }
    }

    /// Long-format CSV: header `q,p,W`, q-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "q,p,W")?;
        for (q, row) in self.q_axis.iter().zip(&self.values) {
            for (p, w) in self.p_axis.iter().zip(row) {
                writeln!(out, "{},{},{}", fmt_f64(*q), fmt_f64(*p), fmt_f64(*w))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, CMatrix, FockKet, FockOperator};
    use crate::state::{logical_state, rotate, squeeze, GkpStateParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(dim: usize, rank: usize, seed: u64) -> FockDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(dim, rank, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        FockDensity::from_matrix(m / tr).unwrap()
    }

    // Tr(ρ D Π D†)/π with D from a Padé exponential in a much larger space.
    fn displaced_parity(rho: &FockDensity, q: f64, p: f64) -> f64 {
        let big = rho.dim() + 60;
        let alpha = C64::new(q, p) / 2f64.sqrt();
        let a = fock::annihilation(big).unwrap();
        let gen = fock::creation(big)
            .unwrap()
            .scale(alpha)
            .sub(&a.scale(alpha.conj()));
        let d = fock::matrix_exp(&gen).unwrap();
        let parity: Vec<C64> = (0..big)
            .map(|n| C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let kernel = d
            .compose(&FockOperator::diagonal(&parity))
            .compose(&d.adjoint());
        let k = kernel.matrix().view((0, 0), (rho.dim(), rho.dim()));
        (rho.matrix() * k).trace().re / PI
    }

    #[test]
    fn vacuum_and_one_photon_peaks() {
        let vac = FockKet::vacuum(10).unwrap().to_density();
        assert!((wigner_point(&vac, 0.0, 0.0) - 1.0 / PI).abs() < 1e-14);
        let one = FockKet::basis(1, 10).unwrap().to_density();
        assert!((wigner_point(&one, 0.0, 0.0) + 1.0 / PI).abs() < 1e-14);
        // (2(q²+p²) − 1) e^{−q²−p²}/π
        let (q, p) = (0.7, -0.4);
        let r2: f64 = q * q + p * p;
        let want = (2.0 * r2 - 1.0) * (-r2).exp() / PI;
        assert!((wigner_point(&one, q, p) - want).abs() < 1e-14);
    }

    #[test]
    fn coherent_state_is_displaced_gaussian() {
        let alpha = C64::new(0.8, -0.5);
        let rho = FockKet::coherent(alpha, 40).unwrap().to_density();
        let (q0, p0) = (alpha.re * 2f64.sqrt(), alpha.im * 2f64.sqrt());
        for (q, p) in [(q0, p0), (0.0, 0.0), (1.5, 0.3)] {
            let want = (-(q - q0).powi(2) - (p - p0).powi(2)).exp() / PI;
            assert!((wigner_point(&rho, q, p) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_displaced_parity_oracle() {
        let rho = random_density(8, 3, 11);
        for (q, p) in [(0.0, 0.0), (0.9, -1.3), (-2.0, 0.4), (1.1, 2.2)] {
            let w = wigner_point(&rho, q, p);
            assert!((w - displaced_parity(&rho, q, p)).abs() < 1e-10, "at ({q},{p}): {w} vs {}", displaced_parity(&rho, q, p));
        }
    }

    #[test]
    fn one_photon_negativity() {
        let one = FockKet::basis(1, 4).unwrap().to_density();
        let g = wigner_grid(&one, DEFAULT_RANGE, DEFAULT_RANGE, DEFAULT_POINTS).unwrap();
        // ∫_{r²<1/2} (1 − 2r²) e^{−r²} r dr dφ/π = 2e^{−1/2} − 1
        let want = 2.0 * (-0.5f64).exp() - 1.0;
        assert!((wigner_negativity(&g) - want).abs() < 1e-3);
        assert!((g.integral() - 1.0).abs() < 1e-6);
        let vac = FockKet::vacuum(4).unwrap().to_density();
        let gv = wigner_grid(&vac, DEFAULT_RANGE, DEFAULT_RANGE, 64).unwrap();
        assert_eq!(wigner_negativity(&gv), 0.0);
    }

    #[test]
    fn rejects_coarse_grids() {
        let vac = FockKet::vacuum(4).unwrap().to_density();
        assert!(wigner_grid(&vac, DEFAULT_RANGE, DEFAULT_RANGE, 31).is_err());
        assert!(wigner_grid(&vac, (1.0, -1.0), DEFAULT_RANGE, 64).is_err());
    }

    #[test]
    fn rotation_is_pointwise_covariant() {
        let rho = random_density(10, 4, 5);
        let theta = 0.7;
        let rot = rotate(&rho, theta);
        let (c, s) = (theta.cos(), theta.sin());
        for (q, p) in [(0.3, 0.1), (-1.2, 0.8), (2.0, -1.5)] {
            let w = wigner_point(&rho, q * c - p * s, q * s + p * c);
            assert!((wigner_point(&rot, q, p) - w).abs() < 1e-12);
        }
    }

    fn bilinear(g: &WignerGrid, q: f64, p: f64) -> f64 {
        let h = g.q_axis[1] - g.q_axis[0];
        let fi = (q - g.q_axis[0]) / h;
        let fj = (p - g.p_axis[0]) / h;
        let (i, j) = (fi.floor() as usize, fj.floor() as usize);
        let (tx, ty) = (fi - i as f64, fj - j as f64);
        let v = &g.values;
        (1.0 - tx) * (1.0 - ty) * v[i][j]
            + tx * (1.0 - ty) * v[i + 1][j]
            + (1.0 - tx) * ty * v[i][j + 1]
            + tx * ty * v[i + 1][j + 1]
    }

    #[test]
    fn rotated_grid_is_resampled_grid() {
        let rho = random_density(6, 2, 9);
        let theta = 0.7;
        let g = wigner_grid(&rho, (-4.0, 4.0), (-4.0, 4.0), 201).unwrap();
        let gr = wigner_grid(&rotate(&rho, theta), (-4.0, 4.0), (-4.0, 4.0), 201).unwrap();
        let (c, s) = (theta.cos(), theta.sin());
        let mut worst: f64 = 0.0;
        for i in (50..150).step_by(7) {
            for j in (50..150).step_by(7) {
                let (q, p) = (gr.q_axis[i], gr.p_axis[j]);
                let w = bilinear(&g, q * c - p * s, q * s + p * c);
                worst = worst.max((gr.values[i][j] - w).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn quarter_turn_permutes_the_grid() {
        let rho = random_density(8, 3, 2);
        let n = 41;
        let g = wigner_grid(&rho, (-3.0, 3.0), (-3.0, 3.0), n).unwrap();
        let gr = wigner_grid(&rotate(&rho, PI / 2.0), (-3.0, 3.0), (-3.0, 3.0), n).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((gr.values[i][j] - g.values[n - 1 - j][i]).abs() < 1e-12);
            }
        }
        assert!((wigner_negativity(&g) - wigner_negativity(&gr)).abs() < 1e-12);
    }

    #[test]
    fn gkp_negativity_is_geometry_invariant() {
        let params = GkpStateParams::new(0.063, 0.0, 0.0, 30).unwrap();
        let psi = squeeze(&logical_state(&params).unwrap(), 1.092f64.ln())
            .unwrap()
            .ket;
        let neg: Vec<f64> = [0.0f64, 67.5, 90.0]
            .iter()
            .map(|d| {
                let rho = rotate(&psi, d.to_radians()).to_density();
                let g = wigner_grid(&rho, DEFAULT_RANGE, DEFAULT_RANGE, DEFAULT_POINTS).unwrap();
                assert!((g.integral() - 1.0).abs() < 1e-3);
                assert!(g.min() < 0.0);
                wigner_negativity(&g)
            })
            .collect();
        for n in &neg[1..] {
            assert!((n / neg[0] - 1.0).abs() < 0.02, "{neg:?}");
        }
    }

    #[test]
    fn csv_export_shape() {
        let vac = FockKet::vacuum(3).unwrap().to_density();
        let g = wigner_grid(&vac, (-1.0, 1.0), (-1.0, 1.0), 32).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q,p,W");
        assert_eq!(lines.len(), 1 + 32 * 32);
        let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[..2], [-1.0, -1.0]);
        assert_eq!(first[2], g.values[0][0]);
    }
}
