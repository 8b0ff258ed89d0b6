//! Finite-difference Adam over the design vector, with the hinge-penalized
//! sensitivity objective −F_Q + λ[P_err − P_th]₊.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::perr_analytic;
use crate::channels::NoiseParams;
use crate::circuit::{run_circuit, CircuitParams};
use crate::error::{Error, Result};
use crate::fock::{FockDensity, DEFAULT_CUTOFF};
use crate::lattice::{theta_from_oam, OamCharge};
use crate::metrology::{self, capacity, measurement_efficiency};
use crate::state::GkpStateParams;

pub const R_BOUNDS: (f64, f64) = (0.5, 2.0);
/// Open interval for ε; projection keeps a small margin inside it.
pub const EPSILON_BOUNDS: (f64, f64) = (0.005, 0.5);
const EPSILON_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    BlochTheta,
    BlochPhi,
    Ell,
    R,
    Epsilon,
    Psi,
}

impl Coord {
    pub const ALL: [Coord; 6] = [
        Coord::BlochTheta,
        Coord::BlochPhi,
        Coord::Ell,
        Coord::R,
        Coord::Epsilon,
        Coord::Psi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coord::BlochTheta => "bloch_theta",
            Coord::BlochPhi => "bloch_phi",
            Coord::Ell => "ell",
            Coord::R => "r",
            Coord::Epsilon => "epsilon",
            Coord::Psi => "psi",
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Coord::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown trainable coordinate '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainableParams {
    pub bloch_theta: f64,
    pub bloch_phi: f64,
    pub ell: f64,
    pub ell_max: u32,
    pub r: f64,
    pub epsilon: f64,
    /// Homodyne local-oscillator angle.
    pub psi: f64,
}

impl TrainableParams {
    /// |0̄⟩ on the lattice of OAM charge ℓ.
    /// Starts from a magic-state direction on the logical Bloch sphere; the
    /// poles are coordinate singularities for `bloch_phi`.
    pub fn preset(ell: f64, ell_max: u32, r: f64) -> Self {
        Self {
            bloch_theta: (1.0f64 / 3.0).sqrt().acos(),
            bloch_phi: 0.75 * std::f64::consts::PI,
            ell,
            ell_max,
            r,
            epsilon: 0.063,
            psi: 0.0,
        }
    }

    pub fn get(&self, c: Coord) -> f64 {
        match c {
            Coord::BlochTheta => self.bloch_theta,
            Coord::BlochPhi => self.bloch_phi,
            Coord::Ell => self.ell,
            Coord::R => self.r,
            Coord::Epsilon => self.epsilon,
            Coord::Psi => self.psi,
        }
    }

    pub fn set(&mut self, c: Coord, v: f64) {
        match c {
            Coord::BlochTheta => self.bloch_theta = v,
            Coord::BlochPhi => self.bloch_phi = v,
            Coord::Ell => self.ell = v,
            Coord::R => self.r = v,
            Coord::Epsilon => self.epsilon = v,
            Coord::Psi => self.psi = v,
        }
    }

    /// Lattice rotation θ_ℓ in radians.
    pub fn theta(&self) -> Result<f64> {
        theta_from_oam(OamCharge::new(self.ell, self.ell_max)?)
    }

    /// Bloch angles mapped onto θ_B ∈ [0, π], φ_B ∈ [0, 2π) describing the same state.
    fn canonical_bloch(&self) -> (f64, f64) {
        let mut t = self.bloch_theta.rem_euclid(2.0 * PI);
        let mut p = self.bloch_phi;
        if t > PI {
            t = 2.0 * PI - t;
            p += PI;
        }
        (t, p.rem_euclid(2.0 * PI))
    }

    /// Box projection: Bloch angles are folded back onto the sphere, ℓ is kept in
    /// [0, ℓ_max], r and ε are clamped, ψ is taken mod π.
    pub fn project(&mut self) {
        let (t, p) = self.canonical_bloch();
        self.bloch_theta = t;
        self.bloch_phi = p;
        self.ell = self.ell.clamp(0.0, self.ell_max as f64);
        self.r = self.r.clamp(R_BOUNDS.0, R_BOUNDS.1);
        self.epsilon = self.epsilon.clamp(
            EPSILON_BOUNDS.0 + EPSILON_MARGIN,
            EPSILON_BOUNDS.1 - EPSILON_MARGIN,
        );
        self.psi = self.psi.rem_euclid(PI);
    }

    /// Whether a descent step along −g would leave the box in coordinate c.
    fn blocked(&self, c: Coord, g: f64) -> bool {
        let (lo, hi) = match c {
            Coord::Ell => (0.0, self.ell_max as f64),
            Coord::R => R_BOUNDS,
            Coord::Epsilon => (
                EPSILON_BOUNDS.0 + EPSILON_MARGIN,
                EPSILON_BOUNDS.1 - EPSILON_MARGIN,
            ),
            _ => return false,
        };
        let x = self.get(c);
        (x <= lo && g > 0.0) || (x >= hi && g < 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell_max == 0 {
            return Err(Error::InvalidInput("ell_max must be at least 1".into()));
        }
        if !(R_BOUNDS.0..=R_BOUNDS.1).contains(&self.r) {
            return Err(Error::InvalidInput(format!(
                "r must lie in [{}, {}], got {}",
                R_BOUNDS.0, R_BOUNDS.1, self.r
            )));
        }
        if !(self.epsilon > EPSILON_BOUNDS.0 && self.epsilon < EPSILON_BOUNDS.1) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in ({}, {}), got {}",
                EPSILON_BOUNDS.0, EPSILON_BOUNDS.1, self.epsilon
            )));
        }
        let finite = Coord::ALL.iter().all(|&c| self.get(c).is_finite());
        if !finite {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn circuit(&self, noise: NoiseParams, cutoff: usize) -> Result<CircuitParams> {
        let (bloch_theta, bloch_phi) = self.canonical_bloch();
        Ok(CircuitParams {
            state: GkpStateParams::new(self.epsilon, bloch_theta, bloch_phi, cutoff)?,
            theta: self.theta()?,
            r: self.r,
            noise,
            phi: 0.0,
        })
    }
}

/// Adam moment constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConstants {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    pub clip_norm: f64,
    pub lambda: f64,
    pub p_th: f64,
    pub noise: NoiseParams,
    pub cutoff: usize,
    pub seed: u64,
    /// Relative finite-difference step.
    pub grad_step: f64,
    pub freeze: Vec<Coord>,
    pub adam: AdamConstants,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr_init: 5e-3,
            lr_final: 1e-5,
            clip_norm: 1.0,
            lambda: 100.0,
            p_th: 1e-3,
            noise: NoiseParams {
                eta: 0.9,
                gamma: 0.05,
            },
            cutoff: DEFAULT_CUTOFF,
            seed: 0,
            grad_step: 1e-4,
            freeze: vec![Coord::Ell, Coord::R, Coord::Epsilon, Coord::Psi],
            adam: AdamConstants::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.lr_init > 0.0) || !(self.lr_final >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if !(self.lambda >= 0.0) || !(self.p_th >= 0.0) {
            return Err(Error::Config("lambda and p_th must be non-negative".into()));
        }
        if !(self.grad_step > 0.0) {
            return Err(Error::Config("grad_step must be positive".into()));
        }
        if self.cutoff < 10 {
            return Err(Error::Config(format!("cutoff must be >= 10, got {}", self.cutoff)));
        }
        self.noise.validate()
    }

    pub fn trainable(&self) -> Vec<Coord> {
        Coord::ALL
            .into_iter()
            .filter(|c| !self.freeze.contains(c))
            .collect()
    }

    /// Cosine schedule lr_final + ½(lr_init − lr_final)(1 + cos(πt/steps)).
    pub fn learning_rate(&self, t: usize) -> f64 {
        let frac = t as f64 / self.steps as f64;
        self.lr_final + 0.5 * (self.lr_init - self.lr_final) * (1.0 + (PI * frac).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEval {
    pub loss: f64,
    pub qfi: f64,
    pub p_err: f64,
}

/// −F_Q + λ[P_err − P_th]₊ with F_Q from the Fock circuit and P_err analytic.
pub fn combined_loss(params: &TrainableParams, cfg: &TrainConfig) -> Result<LossEval> {
    let circuit = params.circuit(cfg.noise, cfg.cutoff)?;
    let qfi = metrology::qfi_phase(&run_circuit(&circuit)?.rho)?;
    let p_err = perr_analytic(circuit.theta, params.r, &cfg.noise)?.p_total;
    let hinge = (p_err - cfg.p_th).max(0.0);
    let loss = if cfg.lambda == 0.0 { -qfi } else { -qfi + cfg.lambda * hinge };
    Ok(LossEval { loss, qfi, p_err })
}

/// Central-difference gradient over every coordinate; frozen ones are zero.
pub fn gradient(params: &TrainableParams, cfg: &TrainConfig) -> Result<[f64; 6]> {
    let mut g = [0.0; 6];
    for (i, c) in Coord::ALL.into_iter().enumerate() {
        if cfg.freeze.contains(&c) {
            continue;
        }
        let x = params.get(c);
        let h = cfg.grad_step * x.abs().max(1.0);
        let mut plus = *params;
        let mut minus = *params;
        plus.set(c, x + h);
        minus.set(c, x - h);
        let lp = combined_loss(&plus, cfg)?.loss;
        let lm = combined_loss(&minus, cfg)?.loss;
        let d = (lp - lm) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in coordinate {c}")));
        }
        g[i] = d;
    }
    Ok(g)
}

/// Gradient with components that point out of the box at an active bound removed.
pub fn projected_gradient(params: &TrainableParams, g: &[f64; 6]) -> [f64; 6] {
    let mut out = *g;
    for (i, c) in Coord::ALL.into_iter().enumerate() {
        if params.blocked(c, g[i]) {
            out[i] = 0.0;
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub step: usize,
    pub loss: f64,
    pub qfi: f64,
    pub p_err: f64,
    /// Norm of the projected gradient before clipping.
    pub grad_norm: f64,
    /// Norm of the update direction after clipping.
    pub clipped_norm: f64,
    pub lr: f64,
    pub params: TrainableParams,
}

pub type TrainTrace = Vec<TrainStep>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: TrainableParams,
    pub eval: LossEval,
    /// Projected gradient norm at the returned parameters.
    pub grad_norm: f64,
    pub trace: TrainTrace,
}

/// A run that stopped early, with the steps completed so far.
pub struct TrainAbort {
    pub error: Error,
    pub trace: TrainTrace,
}

impl fmt::Debug for TrainAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TrainAbort({} after {} steps)", self.error, self.trace.len())
    }
}

impl fmt::Display for TrainAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.trace.len())
    }
}

impl From<TrainAbort> for Error {
    fn from(a: TrainAbort) -> Self {
        a.error
    }
}

/// Adam with cosine-annealed learning rate, global-norm clipping and box projection.
pub fn train(
    cfg: &TrainConfig,
    init: &TrainableParams,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let mut trace = Vec::with_capacity(cfg.steps);
    let abort = |error: Error, trace: TrainTrace| TrainAbort { error, trace };
    if let Err(e) = cfg.validate().and_then(|_| init.validate()) {
        return Err(abort(e, trace));
    }
    let mut x = *init;
    x.project();
    let (b1, b2, eps) = (cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps);
    let mut m = [0.0; 6];
    let mut v = [0.0; 6];
    for t in 0..cfg.steps {
        let eval = match combined_loss(&x, cfg) {
            Ok(e) => e,
            Err(e) => return Err(abort(e, trace)),
        };
        let g = match gradient(&x, cfg) {
            Ok(g) => projected_gradient(&x, &g),
            Err(e) => return Err(abort(e, trace)),
        };
        let gn = norm(&g);
        let scale = if gn > cfg.clip_norm { cfg.clip_norm / gn } else { 1.0 };
        let gc: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
        let lr = cfg.learning_rate(t);
        let k = (t + 1) as i32;
        for (i, c) in Coord::ALL.into_iter().enumerate() {
            if cfg.freeze.contains(&c) {
                continue;
            }
            m[i] = b1 * m[i] + (1.0 - b1) * gc[i];
            v[i] = b2 * v[i] + (1.0 - b2) * gc[i] * gc[i];
            let mh = m[i] / (1.0 - b1.powi(k));
            let vh = v[i] / (1.0 - b2.powi(k));
            x.set(c, x.get(c) - lr * mh / (vh.sqrt() + eps));
        }
        trace.push(TrainStep {
            step: t,
            loss: eval.loss,
            qfi: eval.qfi,
            p_err: eval.p_err,
            grad_norm: gn,
            clipped_norm: norm(&gc),
            lr,
            params: x,
        });
        x.project();
        trace.last_mut().expect("just pushed").params = x;
        debug!(
            "step {t}: loss {:.6} qfi {:.6} p_err {:.3e} |g| {:.3e}",
            eval.loss, eval.qfi, eval.p_err, gn
        );
    }
    let eval = match combined_loss(&x, cfg) {
        Ok(e) => e,
        Err(e) => return Err(abort(e, trace)),
    };
    let grad_norm = match gradient(&x, cfg) {
        Ok(g) => norm(&projected_gradient(&x, &g)),
        Err(e) => return Err(abort(e, trace)),
    };
    Ok(TrainOutcome {
        params: x,
        eval,
        grad_norm,
        trace,
    })
}

/// Figures of merit for a trained design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub theta_deg: f64,
    pub qfi: f64,
    pub p_err: f64,
    /// Homodyne CFI at the best LO angle.
    pub cfi: f64,
    pub psi: f64,
    /// Binary-channel efficiency 1 − 4P(1 − P).
    pub eta_meas: f64,
    /// F_C / F_Q of the simulated state.
    pub cfi_ratio: f64,
    pub capacity: f64,
    pub leakage: f64,
}

/// Evaluates a design and picks the homodyne LO angle for it.
pub fn evaluate_design(
    params: &TrainableParams,
    noise: NoiseParams,
    cutoff: usize,
) -> Result<(DesignEvaluation, FockDensity)> {
    let circuit = params.circuit(noise, cutoff)?;
    let out = run_circuit(&circuit)?;
    let qfi = metrology::qfi_phase(&out.rho)?;
    let (psi, cfi) = metrology::optimal_homodyne_angle(&out.rho, 64)?;
    let p_err = perr_analytic(circuit.theta, params.r, &noise)?.p_total;
    let eval = DesignEvaluation {
        theta_deg: circuit.theta.to_degrees(),
        qfi,
        p_err,
        cfi,
        psi,
        eta_meas: measurement_efficiency(p_err)?,
        cfi_ratio: if qfi > 0.0 { cfi / qfi } else { 0.0 },
        capacity: capacity(qfi, p_err)?,
        leakage: out.leakage,
    };
    Ok((eval, out.rho))
}

/// Nearest-integer charge and its analytic error rate (reporting only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegerProjection {
    pub ell: f64,
    pub theta_deg: f64,
    pub p_err: f64,
}

pub fn integer_projection(params: &TrainableParams, noise: &NoiseParams) -> Result<IntegerProjection> {
    let charge = OamCharge::new(params.ell, params.ell_max)?.projected();
    let theta = theta_from_oam(charge)?;
    Ok(IntegerProjection {
        ell: charge.ell,
        theta_deg: theta.to_degrees(),
        p_err: perr_analytic(theta, params.r, noise)?.p_total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda: f64,
    pub qfi: Option<f64>,
    pub p_err: Option<f64>,
    pub error: Option<String>,
}

/// One training run per λ, sorted by λ. Failed runs are kept with their error.
pub fn pareto_sweep(
    lambdas: &[f64],
    cfg: &TrainConfig,
    init: &TrainableParams,
) -> Result<Vec<ParetoPoint>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("lambda list is empty".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let points: Vec<ParetoPoint> = sorted
        .par_iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.lambda = lambda;
            match train(&c, init) {
                Ok(o) => ParetoPoint {
                    lambda,
                    qfi: Some(o.eval.qfi),
                    p_err: Some(o.eval.p_err),
                    error: None,
                },
                Err(a) => ParetoPoint {
                    lambda,
                    qfi: None,
                    p_err: None,
                    error: Some(a.error.to_string()),
                },
            }
        })
        .collect();
    let noise_floor = points
        .iter()
        .filter_map(|p| p.p_err)
        .fold(0.0f64, f64::max)
        * 1e-6;
    for w in points.windows(2) {
        if let (Some(a), Some(b)) = (w[0].p_err, w[1].p_err) {
            if b > 2.0 * a + noise_floor {
                warn!(
                    "p_err rose from {a:.3e} at lambda {} to {b:.3e} at lambda {}",
                    w[0].lambda, w[1].lambda
                );
            }
        }
    }
    Ok(points)
}

/// Points not dominated in (higher qfi, lower p_err).
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let ok: Vec<&ParetoPoint> = points.iter().filter(|p| p.qfi.is_some()).collect();
    ok.iter()
        .filter(|p| {
            let (q, e) = (p.qfi.unwrap(), p.p_err.unwrap());
            !ok.iter().any(|o| {
                let (oq, oe) = (o.qfi.unwrap(), o.p_err.unwrap());
                oq >= q && oe <= e && (oq > q || oe < e)
            })
        })
        .map(|p| (*p).clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalRow {
    pub ell: f64,
    pub theta_deg: f64,
    pub r: f64,
    pub qfi: Option<f64>,
    pub p_err: f64,
    /// P_err of the unrotated lattice at the same r over this row's P_err.
    pub improvement: f64,
    pub capacity: Option<f64>,
    pub error: Option<String>,
}

/// Trains once per ℓ with ℓ frozen.
pub fn fractional_sweep(
    ells: &[f64],
    cfg: &TrainConfig,
    init: &TrainableParams,
) -> Result<Vec<FractionalRow>> {
    let mut c = cfg.clone();
    if !c.freeze.contains(&Coord::Ell) {
        c.freeze.push(Coord::Ell);
    }
    ells.par_iter()
        .map(|&ell| {
            let mut start = *init;
            start.ell = ell;
            let (params, qfi, error) = match train(&c, &start) {
                Ok(o) => (o.params, Some(o.eval.qfi), None),
                Err(a) => (start, None, Some(a.error.to_string())),
            };
            let theta = params.theta()?;
            let p_err = perr_analytic(theta, params.r, &c.noise)?.p_total;
            let p_square = perr_analytic(0.0, params.r, &c.noise)?.p_total;
            Ok(FractionalRow {
                ell,
                theta_deg: theta.to_degrees(),
                r: params.r,
                qfi,
                p_err,
                improvement: p_square / p_err,
                capacity: match qfi {
                    Some(q) => Some(capacity(q, p_err)?),
                    None => None,
                },
                error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cfg() -> TrainConfig {
        TrainConfig {
            steps: 20,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_endpoints() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate(0), c.lr_init);
        assert!((c.learning_rate(c.steps) - c.lr_final).abs() < 1e-15);
        assert!(c.learning_rate(250) < c.lr_init && c.learning_rate(250) > c.lr_final);
    }

    #[test]
    fn coord_names_round_trip() {
        for c in Coord::ALL {
            assert_eq!(c.name().parse::<Coord>().unwrap(), c);
        }
        assert!("theta".parse::<Coord>().is_err());
    }

    #[test]
    fn zero_lambda_loss_is_negative_qfi() {
        let mut c = short_cfg();
        c.lambda = 0.0;
        c.noise = NoiseParams::new(0.8, 0.1).unwrap();
        let e = combined_loss(&TrainableParams::preset(0.0, 4, 1.092), &c).unwrap();
        assert!(e.p_err > c.p_th);
        assert_eq!(e.loss, -e.qfi);
    }

    #[test]
    fn hinge_inactive_below_threshold() {
        let c = short_cfg();
        let e = combined_loss(&TrainableParams::preset(1.5, 4, 1.092), &c).unwrap();
        assert!(e.p_err < c.p_th);
        assert_eq!(e.loss, -e.qfi);
    }

    #[test]
    fn psi_gradient_vanishes() {
        let mut c = short_cfg();
        c.freeze = vec![Coord::Epsilon];
        let g = gradient(&TrainableParams::preset(0.0, 4, 1.092), &c).unwrap();
        assert!(g[5].abs() < 1e-8);
    }

    #[test]
    fn hinge_inactive_gradient_is_qfi_gradient() {
        let mut c = short_cfg();
        c.freeze = vec![Coord::Epsilon, Coord::Psi];
        let p = TrainableParams::preset(1.5, 4, 1.092);
        let g = gradient(&p, &c).unwrap();
        let h = c.grad_step * 1.092;
        let q = |r: f64| {
            let mut x = p;
            x.r = r;
            combined_loss(&x, &c).unwrap().qfi
        };
        let want = -(q(1.092 + h) - q(1.092 - h)) / (2.0 * h);
        assert!((g[3] - want).abs() < 1e-10);
    }

    #[test]
    fn projection_folds_bloch_angles() {
        let mut p = TrainableParams::preset(0.0, 4, 1.0);
        p.bloch_theta = -0.3;
        p.bloch_phi = 0.2;
        p.r = 3.0;
        p.ell = 5.0;
        p.psi = 4.0;
        p.project();
        assert!((p.bloch_theta - 0.3).abs() < 1e-15);
        assert!((p.bloch_phi - (0.2 + PI)).abs() < 1e-15);
        assert_eq!((p.r, p.ell), (2.0, 4.0));
        assert!((p.psi - (4.0 - PI)).abs() < 1e-15);
    }

    #[test]
    fn folded_bloch_state_is_unchanged() {
        let c = short_cfg();
        let mut a = TrainableParams::preset(0.0, 4, 1.092);
        a.bloch_theta = -0.4;
        a.bloch_phi = 0.7;
        let mut b = a;
        b.project();
        let la = combined_loss(&a, &c).unwrap();
        let lb = combined_loss(&b, &c).unwrap();
        assert!((la.qfi - lb.qfi).abs() < 1e-10);
    }

    #[test]
    fn train_trace_and_clipping() {
        let c = short_cfg();
        let o = train(&c, &TrainableParams::preset(0.0, 4, 1.092)).unwrap();
        assert_eq!(o.trace.len(), c.steps);
        for s in &o.trace {
            assert!(s.clipped_norm <= c.clip_norm + 1e-12);
            assert!(s.loss.is_finite());
        }
        assert!(o.eval.loss <= o.trace[0].loss);
    }

    #[test]
    fn train_is_deterministic() {
        let c = short_cfg();
        let init = TrainableParams::preset(0.5, 4, 1.05);
        let a = train(&c, &init).unwrap();
        let b = train(&c, &init).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_aborts_with_empty_trace() {
        let mut c = short_cfg();
        c.steps = 0;
        let a = train(&c, &TrainableParams::preset(0.0, 4, 1.0)).unwrap_err();
        assert!(a.trace.is_empty());
        assert!(matches!(a.error, Error::Config(_)));
    }

    #[test]
    fn integer_projection_rounds() {
        let mut p = TrainableParams::preset(1.4, 4, 1.092);
        p.ell = 1.4;
        let ip = integer_projection(&p, &NoiseParams::new(0.9, 0.05).unwrap()).unwrap();
        assert_eq!(ip.ell, 1.0);
        assert!((ip.theta_deg - 45.0).abs() < 1e-12);
    }

    #[test]
    fn pareto_front_filters_dominated() {
        let pt = |lambda, q, e| ParetoPoint {
            lambda,
            qfi: Some(q),
            p_err: Some(e),
            error: None,
        };
        let pts = vec![pt(0.0, 7.0, 1e-3), pt(1.0, 6.0, 1e-4), pt(2.0, 5.0, 2e-4)];
        let front = pareto_front(&pts);
        assert_eq!(front.len(), 2);
        assert!(front.iter().all(|p| p.lambda != 2.0));
    }
}
