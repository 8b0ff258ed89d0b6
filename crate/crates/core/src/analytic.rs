//! Closed-form logical error model for a rotated rectangular GKP lattice.
//!
//! Each quadrature of the rotated frame sees a Gaussian displacement of spread
//! σ_q or σ_p (see [`effective_sigmas`]). A quadrature fails when the
//! displacement exceeds half its stabilizer spacing, d_q = a·r or d_p = a/r,
//! giving P_j = 2Q(d_j/(2σ_j)). The optimal rotation θ* solves the balance
//! condition r²φ(u_q)/σ_q³ = φ(u_p)/σ_p³.

use std::f64::consts::{FRAC_PI_2, PI};

use libm::erfc;
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{effective_sigmas, NoiseParams};
use crate::error::{Error, Result};
use crate::lattice::LATTICE_CONSTANT;

/// Points in the sign-change scan preceding bisection.
pub const SCAN_POINTS: usize = 64;

/// Minimum Monte Carlo sample count.
pub const MC_MIN_SAMPLES: u64 = 10_000;

const MC_SHARD: u64 = 1 << 20;

/// Upper tail Q(x) = ½ erfc(x/√2) of the standard normal.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density φ(x).
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerrBreakdown {
    pub p_q: f64,
    pub p_p: f64,
    pub p_total: f64,
    /// 2 P_q P_p |sin 2θ|, a bound on the error from q–p correlations.
    pub coupling_bound: f64,
    pub sigma_q: f64,
    pub sigma_p: f64,
}

fn quadrature_error(spacing: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        2.0 * gaussian_tail(spacing / (2.0 * sigma))
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("aspect ratio must be positive, got {r}")));
    }
    Ok(())
}

pub fn perr_analytic(theta: f64, r: f64, noise: &NoiseParams) -> Result<PerrBreakdown> {
    check_r(r)?;
    noise.validate()?;
    let (sigma_q, sigma_p) = effective_sigmas(noise, theta);
    let p_q = quadrature_error(LATTICE_CONSTANT * r, sigma_q);
    let p_p = quadrature_error(LATTICE_CONSTANT / r, sigma_p);
    Ok(PerrBreakdown {
        p_q,
        p_p,
        p_total: p_q + p_p - p_q * p_p,
        coupling_bound: 2.0 * p_q * p_p * (2.0 * theta).sin().abs(),
        sigma_q,
        sigma_p,
    })
}

/// B(θ) = r² φ(u_q)/σ_q³ − φ(u_p)/σ_p³.
pub fn balance(theta: f64, r: f64, noise: &NoiseParams) -> f64 {
    let (sq, sp) = effective_sigmas(noise, theta);
    let uq = LATTICE_CONSTANT * r / (2.0 * sq);
    let up = LATTICE_CONSTANT / r / (2.0 * sp);
    r * r * normal_pdf(uq) / sq.powi(3) - normal_pdf(up) / sp.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStarResult {
    /// Radians.
    pub theta_star: f64,
    pub p_err_at_star: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// More than one sign change was found in the scan.
    pub multiple_roots: bool,
}

impl ThetaStarResult {
    pub fn theta_star_deg(&self) -> f64 {
        self.theta_star.to_degrees()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64, f64) {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, mid, mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    (0.5 * (lo + hi), lo, hi)
}

/// Root of the balance equation in (0, π/2).
pub fn theta_star(r: f64, noise: &NoiseParams) -> Result<ThetaStarResult> {
    check_r(r)?;
    noise.validate()?;
    let f = |t: f64| balance(t, r, noise);
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| FRAC_PI_2 * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoRoot(format!(
            "balance function undefined at r = {r}, eta = {}, gamma = {}",
            noise.eta, noise.gamma
        )));
    }
    let mut roots = Vec::new();
    for i in 0..SCAN_POINTS - 1 {
        if (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            let (t, lo, hi) = bisect(f, grid[i], grid[i + 1]);
            let p = perr_analytic(t, r, noise)?.p_total;
            roots.push(ThetaStarResult {
                theta_star: t,
                p_err_at_star: p,
                bracket: (lo, hi),
                residual: f(t).abs(),
                multiple_roots: false,
            });
        }
    }
    let multiple = roots.len() > 1;
    if multiple {
        warn!(
            "balance equation has {} roots at r = {r}, eta = {}, gamma = {}; keeping the lowest P_err",
            roots.len(),
            noise.eta,
            noise.gamma
        );
    }
    let mut best = roots
        .into_iter()
        .min_by(|a, b| a.p_err_at_star.total_cmp(&b.p_err_at_star))
        .ok_or_else(|| {
            Error::NoRoot(format!(
                "no sign change of the balance function on (0, 90°) at r = {r}, eta = {}, gamma = {}",
                noise.eta, noise.gamma
            ))
        })?;
    best.multiple_roots = multiple;
    Ok(best)
}

/// (∂θ*/∂η, ∂θ*/∂γ) in degrees per unit by central differences.
pub fn theta_sensitivity(r: f64, noise: &NoiseParams, step: f64) -> Result<(f64, f64)> {
    let at = |eta: f64, gamma: f64| -> Result<f64> {
        Ok(theta_star(r, &NoiseParams::new(eta, gamma)?)?.theta_star_deg())
    };
    let d_eta = (at(noise.eta + step, noise.gamma)? - at(noise.eta - step, noise.gamma)?)
        / (2.0 * step);
    let d_gamma = (at(noise.eta, noise.gamma + step)? - at(noise.eta, noise.gamma - step)?)
        / (2.0 * step);
    Ok((d_eta, d_gamma))
}

/// Calibration error δθ* = √((∂_η θ* δη)² + (∂_γ θ* δγ)²).
pub fn calibration_error(sensitivity: (f64, f64), delta_eta: f64, delta_gamma: f64) -> f64 {
    (sensitivity.0 * delta_eta).hypot(sensitivity.1 * delta_gamma)
}

/// Linear fit θ* ≈ 64.8 + 162.8(1−η) − 253.2γ, in degrees.
pub fn theta_fit(noise: &NoiseParams) -> f64 {
    64.8 + 162.8 * (1.0 - noise.eta) - 253.2 * noise.gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOptimum {
    /// Radians.
    pub theta: f64,
    pub r: f64,
    pub p_err: f64,
    /// The minimizer sits on the edge of the search box, or the error rate vanishes.
    pub boundary: bool,
}

/// Search box for [`joint_optimum`].
pub const JOINT_R_RANGE: (f64, f64) = (0.8, 1.5);

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
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
    0.5 * (lo + hi)
}

/// Minimizes P_err over θ ∈ [0, π/2], r ∈ [0.8, 1.5]: grid, then alternating
/// golden-section polish in ln P_err.
pub fn joint_optimum(noise: &NoiseParams) -> Result<JointOptimum> {
    noise.validate()?;
    let (r_lo, r_hi) = JOINT_R_RANGE;
    let p = |t: f64, r: f64| perr_analytic(t, r, noise).map(|b| b.p_total).unwrap_or(f64::NAN);
    if p(0.0, 1.0) == 0.0 && p(FRAC_PI_2, 1.0) == 0.0 {
        return Ok(JointOptimum {
            theta: 0.0,
            r: 1.0,
            p_err: 0.0,
            boundary: true,
        });
    }
    let (nt, nr) = (91, 141);
    let mut best = (0.0, 1.0, f64::INFINITY);
    for i in 0..nt {
        let t = FRAC_PI_2 * i as f64 / (nt - 1) as f64;
        for j in 0..nr {
            let r = r_lo + (r_hi - r_lo) * j as f64 / (nr - 1) as f64;
            let v = p(t, r);
            if v < best.2 {
                best = (t, r, v);
            }
        }
    }
    let (mut t, mut r) = (best.0, best.1);
    let ln_p = |t: f64, r: f64| p(t, r).ln();
    for _ in 0..60 {
        let (t0, r0) = (t, r);
        t = golden_min(|x| ln_p(x, r), 0.0, FRAC_PI_2, 1e-12);
        r = golden_min(|x| ln_p(t, x), r_lo, r_hi, 1e-12);
        if (t - t0).abs() < 1e-12 && (r - r0).abs() < 1e-12 {
            break;
        }
    }
    // golden section never lands exactly on an edge; snap when the edge is better
    for edge in [0.0, FRAC_PI_2] {
        if p(edge, r) <= p(t, r) {
            t = edge;
        }
    }
    let edge_tol = 1e-6;
    let boundary = t < edge_tol
        || t > FRAC_PI_2 - edge_tol
        || r < r_lo + edge_tol
        || r > r_hi - edge_tol;
    Ok(JointOptimum {
        theta: t,
        r,
        p_err: p(t, r),
        boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub errors: u64,
    pub samples: u64,
}

/// true when the nearest lattice index of δ/d is odd.
fn decode_flips(delta: f64, spacing: f64) -> bool {
    ((delta / spacing).round() as i64).rem_euclid(2) == 1
}

fn mc_shard(seed: u64, shard: u64, n: u64, sq: f64, sp: f64, dq: f64, dp: f64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut errors = 0;
    for _ in 0..n {
        let zq: f64 = StandardNormal.sample(&mut rng);
        let zp: f64 = StandardNormal.sample(&mut rng);
        if decode_flips(sq * zq, dq) || decode_flips(sp * zp, dp) {
            errors += 1;
        }
    }
    errors
}

/// Monte Carlo logical error rate with nearest-cell decoding in each quadrature.
///
/// Samples are split into fixed-size shards, each drawn from its own ChaCha8
/// stream, so the result depends only on `seed` and not on the thread count.
pub fn mc_perr(
    theta: f64,
    r: f64,
    noise: &NoiseParams,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_r(r)?;
    noise.validate()?;
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "n_samples must be at least {MC_MIN_SAMPLES}, got {n_samples}"
        )));
    }
    let (sq, sp) = effective_sigmas(noise, theta);
    let (dq, dp) = (LATTICE_CONSTANT * r, LATTICE_CONSTANT / r);
    let shards = n_samples.div_ceil(MC_SHARD);
    let errors: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let n = MC_SHARD.min(n_samples - s * MC_SHARD);
            mc_shard(seed, s, n, sq, sp, dq, dp)
        })
        .sum();
    let p = errors as f64 / n_samples as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
        errors,
        samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRow {
    pub delta_deg: f64,
    pub theta_deg: f64,
    pub p_err: f64,
    /// P_err(θ = 0) / P_err(base + δ).
    pub improvement: f64,
    /// Share of the log-space advantage kept, in percent.
    pub retained_pct: f64,
}

/// P_err at base + δ for each misalignment δ, against the unrotated lattice.
pub fn tolerance_curve(
    delta_thetas_deg: &[f64],
    base_theta: f64,
    r: f64,
    noise: &NoiseParams,
) -> Result<Vec<ToleranceRow>> {
    let p_square = perr_analytic(0.0, r, noise)?.p_total;
    let p_base = perr_analytic(base_theta, r, noise)?.p_total;
    let full = p_square.ln() - p_base.ln();
    delta_thetas_deg
        .iter()
        .map(|&d| {
            let theta = base_theta + d.to_radians();
            let p = perr_analytic(theta, r, noise)?.p_total;
            Ok(ToleranceRow {
                delta_deg: d,
                theta_deg: theta.to_degrees(),
                p_err: p,
                improvement: p_square / p,
                retained_pct: 100.0 * (p_square.ln() - p.ln()) / full,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub eta: f64,
    pub gamma: f64,
    pub theta_star_deg: Option<f64>,
    pub p_err_at_star: Option<f64>,
    pub p_err_square: f64,
    pub improvement: Option<f64>,
}

/// θ* and the gain over the square lattice on an (η, γ) grid, row-major in η.
pub fn phase_diagram(etas: &[f64], gammas: &[f64], r: f64) -> Result<Vec<PhaseCell>> {
    let cells: Vec<(f64, f64)> = etas
        .iter()
        .flat_map(|&e| gammas.iter().map(move |&g| (e, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(eta, gamma)| {
            let noise = NoiseParams::new(eta, gamma)?;
            let p_square = perr_analytic(0.0, r, &noise)?.p_total;
            let star = theta_star(r, &noise).ok();
            Ok(PhaseCell {
                eta,
                gamma,
                theta_star_deg: star.map(|s| s.theta_star_deg()),
                p_err_at_star: star.map(|s| s.p_err_at_star),
                p_err_square: p_square,
                improvement: star.map(|s| p_square / s.p_err_at_star),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn low() -> NoiseParams {
        NoiseParams::new(0.9, 0.05).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Q(x) to 20 digits from an arbitrary-precision erfc.
    const Q_REF: [(f64, f64); 9] = [
        (0.5, 0.30853753872598689636),
        (1.0, 0.15865525393145705141),
        (2.0, 0.0227501319481792072),
        (3.0, 0.0013498980316300945267),
        (4.212, 1.2655977218552855917e-5),
        (5.0, 2.8665157187919391167e-7),
        (6.0, 9.865876450376981407e-10),
        (7.0, 1.2798125438858350044e-12),
        (8.0, 6.2209605742717841235e-16),
    ];

    #[test]
    fn gaussian_tail_reference_values() {
        assert_eq!(gaussian_tail(0.0), 0.5);
        for (x, q) in Q_REF {
            assert!(rel(gaussian_tail(x), q) < 1e-14, "Q({x})");
        }
        assert!((gaussian_tail(-3.0) - (1.0 - gaussian_tail(3.0))).abs() < 1e-15);
    }

    #[test]
    fn noiseless_gives_zero() {
        let clean = NoiseParams::new(1.0, 0.0).unwrap();
        let b = perr_analytic(0.7, 1.1, &clean).unwrap();
        assert_eq!((b.p_q, b.p_p, b.p_total), (0.0, 0.0, 0.0));
        assert!(perr_analytic(0.0, 0.0, &low()).is_err());
    }

    #[test]
    fn breakdown_matches_direct_formula() {
        // independent evaluation of the same closed form
        let (eta, gamma, r, t): (f64, f64, f64, f64) = (0.9, 0.05, 1.092, 0.3);
        let base = (1.0 - eta) / (2.0 * eta);
        let sq = (base + gamma * t.sin().powi(2)).sqrt();
        let sp = (base + gamma * t.cos().powi(2)).sqrt();
        let a = (2.0 * PI).sqrt();
        let pq = erfc(a * r / (2.0 * sq) / 2f64.sqrt());
        let pp = erfc(a / r / (2.0 * sp) / 2f64.sqrt());
        let b = perr_analytic(t, r, &low()).unwrap();
        assert!(rel(b.p_q, pq) < 1e-14 && rel(b.p_p, pp) < 1e-14);
        assert!((b.p_total - (pq + pp - pq * pp)).abs() < 1e-15);
        assert!(rel(b.coupling_bound, 2.0 * pq * pp * (2.0 * t).sin()) < 1e-14);
    }

    #[test]
    fn balance_signs() {
        let n = low();
        assert!(balance(0.01, 1.092, &n) < 0.0);
        assert!(balance(FRAC_PI_2 - 0.01, 1.092, &n) > 0.0);
    }

    #[test]
    fn theta_star_is_a_stationary_minimum() {
        let n = low();
        let s = theta_star(1.092, &n).unwrap();
        assert!(s.residual < 1e-10);
        assert!(s.bracket.0 <= s.theta_star && s.theta_star <= s.bracket.1);
        assert!(s.bracket.1 - s.bracket.0 < 1e-10);
        // the balance root should be close to the numerical argmin of P_err in θ
        let argmin = golden_min(
            |t| perr_analytic(t, 1.092, &n).unwrap().p_total.ln(),
            0.5,
            1.5,
            1e-10,
        );
        assert!((argmin - s.theta_star).abs().to_degrees() < 0.5);
    }

    #[test]
    fn theta_star_no_root() {
        let n = NoiseParams::new(0.8, 0.05).unwrap();
        assert!(matches!(theta_star(1.092, &n), Err(Error::NoRoot(_))));
    }

    #[test]
    fn fit_formula_arithmetic() {
        assert!((theta_fit(&low()) - 68.42).abs() < 1e-12);
        assert!((theta_fit(&NoiseParams::new(1.0, 0.0).unwrap()) - 64.8).abs() < 1e-12);
    }

    #[test]
    fn calibration_error_combines_in_quadrature() {
        assert!((calibration_error((3.0, 4.0), 1.0, 1.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn half_turn_periodicity() {
        let n = low();
        for i in 0..20 {
            let t = 0.1 * i as f64;
            let a = perr_analytic(t, 1.092, &n).unwrap().p_total;
            let b = perr_analytic(t + PI, 1.092, &n).unwrap().p_total;
            assert!(rel(a, b) < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_needs_inverted_aspect() {
        let n = low();
        for i in 0..20 {
            let t = 0.1 * i as f64;
            let a = perr_analytic(t, 1.092, &n).unwrap().p_total;
            let b = perr_analytic(t + FRAC_PI_2, 1.0 / 1.092, &n).unwrap().p_total;
            assert!(rel(a, b) < 1e-12);
        }
        let a = perr_analytic(0.0, 1.092, &n).unwrap().p_total;
        let b = perr_analytic(FRAC_PI_2, 1.092, &n).unwrap().p_total;
        assert!(rel(a, b) > 0.5);
    }

    #[test]
    fn joint_optimum_is_a_minimum() {
        let n = low();
        let j = joint_optimum(&n).unwrap();
        for _ in 0..1 {
            for (dt, dr) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.0, -0.01)] {
                let t = (j.theta + dt).clamp(0.0, FRAC_PI_2);
                let r = (j.r + dr).clamp(0.8, 1.5);
                assert!(perr_analytic(t, r, &n).unwrap().p_total >= j.p_err);
            }
        }
        let clean = joint_optimum(&NoiseParams::new(1.0, 0.0).unwrap()).unwrap();
        assert!(clean.boundary && clean.p_err == 0.0);
    }

    #[test]
    fn mc_rejects_small_sample() {
        assert!(mc_perr(0.0, 1.0, &low(), 100, 1).is_err());
    }

    #[test]
    fn mc_is_deterministic_and_noiseless_clean() {
        let a = mc_perr(0.4, 1.0, &low(), 50_000, 9).unwrap();
        let b = mc_perr(0.4, 1.0, &low(), 50_000, 9).unwrap();
        assert_eq!(a, b);
        let c = mc_perr(0.4, 1.0, &low(), 50_000, 10).unwrap();
        assert_ne!(a.errors, c.errors);
        let clean = NoiseParams::new(0.9999, 1e-6).unwrap();
        assert_eq!(mc_perr(0.0, 1.092, &clean, 1_000_000, 3).unwrap().errors, 0);
    }

    #[test]
    fn mc_matches_analytic_in_a_noisy_regime() {
        let n = NoiseParams::new(0.7, 0.2).unwrap();
        let a = perr_analytic(0.3, 1.0, &n).unwrap().p_total;
        let m = mc_perr(0.3, 1.0, &n, 400_000, 4).unwrap();
        assert!((m.estimate - a).abs() < 4.0 * m.stderr + 0.05 * a);
    }

    #[test]
    fn decode_rule() {
        assert!(!decode_flips(0.49, 1.0));
        assert!(decode_flips(0.51, 1.0));
        assert!(decode_flips(-0.51, 1.0));
        assert!(!decode_flips(1.6, 1.0));
        assert!(decode_flips(2.6, 1.0));
    }

    #[test]
    fn tolerance_at_zero_offset() {
        let rows = tolerance_curve(&[0.0, 5.0], 67.5f64.to_radians(), 1.092, &low()).unwrap();
        assert!((rows[0].retained_pct - 100.0).abs() < 1e-12);
        assert!(rows[1].improvement < rows[0].improvement);
    }

    #[test]
    fn phase_diagram_single_cell_matches_theta_star() {
        let cells = phase_diagram(&[0.9], &[0.05], 1.092).unwrap();
        let s = theta_star(1.092, &low()).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].theta_star_deg, Some(s.theta_star_deg()));
        let cells = phase_diagram(&[0.8, 0.9], &[0.05, 0.1], 1.092).unwrap();
        let keys: Vec<_> = cells.iter().map(|c| (c.eta, c.gamma)).collect();
        assert_eq!(keys, vec![(0.8, 0.05), (0.8, 0.1), (0.9, 0.05), (0.9, 0.1)]);
        assert!(cells[0].theta_star_deg.is_none());
    }

    proptest! {
        #[test]
        fn total_is_inclusion_exclusion(t in 0.0..PI, r in 0.5f64..2.0, eta in 0.6f64..1.0, gamma in 0.0f64..0.3) {
            let n = NoiseParams::new(eta, gamma).unwrap();
            let b = perr_analytic(t, r, &n).unwrap();
            prop_assert!((b.p_total - (b.p_q + b.p_p - b.p_q * b.p_p)).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&b.p_total));
        }

        #[test]
        fn fractional_mirror_symmetry(ell in 0.0f64..4.0, eta in 0.7f64..1.0, gamma in 0.0f64..0.2) {
            let n = NoiseParams::new(eta, gamma).unwrap();
            let th = |l: f64| l * PI / 4.0;
            let a = perr_analytic(th(ell), 1.092, &n).unwrap().p_total;
            let b = perr_analytic(th(4.0 - ell), 1.092, &n).unwrap().p_total;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn balance_increasing_in_fault_tolerant_regime(eta in 0.75f64..0.99, gamma in 0.01f64..0.2) {
            let n = NoiseParams::new(eta, gamma).unwrap();
            let r: f64 = 1.092;
            let thetas: Vec<f64> = (1..64).map(|i| FRAC_PI_2 * i as f64 / 64.0).collect();
            let regime = thetas.iter().all(|&t| {
                let (sq, sp) = effective_sigmas(&n, t);
                LATTICE_CONSTANT * r / (2.0 * sq) > 3f64.sqrt() && LATTICE_CONSTANT / r / (2.0 * sp) > 3f64.sqrt()
            });
            if regime {
                for w in thetas.windows(2) {
                    prop_assert!(balance(w[1], r, &n) > balance(w[0], r, &n));
                }
            }
        }
    }
}
