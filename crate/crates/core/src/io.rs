//! Run configuration, the single-run report, and CSV/JSON export.
//!
//! Floats in CSV files are written with 17 significant digits. Every sweep CSV
//! starts with a `# oam-gkp <name> v<N>` schema line followed by the header;
//! `trace.csv` has the bare header and its schema version is kept in the report.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    mc_perr, theta_sensitivity, theta_star, PhaseCell, ThetaStarResult, ToleranceRow,
};
use crate::channels::NoiseParams;
use crate::error::{Error, Result};
use crate::fock::DEFAULT_CUTOFF;
use crate::optimizer::{
    evaluate_design, integer_projection, train, AdamConstants, Coord, DesignEvaluation,
    FractionalRow, IntegerProjection, ParetoPoint, TrainAbort, TrainConfig, TrainTrace,
    TrainableParams,
};

pub const REPORT_SCHEMA: &str = "run-report/v1";
pub const TRACE_SCHEMA: &str = "trace/v1";
pub const TRACE_HEADER: &str = "step,loss,qfi,p_err,grad_norm,lr";

pub const THETA_STAR_SCHEMA: &str = "# oam-gkp theta-star v1";
pub const THETA_STAR_HEADER: &str =
    "eta,gamma,r,theta_star_deg,p_err_at_star,p_err_square,improvement,dtheta_deta_deg,dtheta_dgamma_deg,status";
pub const PHASE_SCHEMA: &str = "# oam-gkp phase-diagram v1";
pub const PHASE_HEADER: &str = "eta,gamma,theta_star_deg,p_err_at_star,p_err_square,improvement";
pub const FRACTIONAL_SCHEMA: &str = "# oam-gkp fractional v1";
pub const FRACTIONAL_HEADER: &str = "ell,theta_deg,r,qfi,p_err,improvement,capacity,status";
pub const PARETO_SCHEMA: &str = "# oam-gkp pareto v1";
pub const PARETO_HEADER: &str = "lambda,qfi,p_err,on_front,status";
pub const TOLERANCE_SCHEMA: &str = "# oam-gkp tolerance v1";
pub const TOLERANCE_HEADER: &str = "delta_deg,theta_deg,p_err,improvement,retained_pct";

pub const DEFAULT_MC_SAMPLES: u64 = 10_000_000;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn status(error: &Option<String>) -> String {
    csv_text(error.as_deref().unwrap_or("ok"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub ell: f64,
    pub ell_max: u32,
    pub r: f64,
    /// Overrides `ell` when present: ℓ = θ·ℓ_max/180°.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            ell: 0.0,
            ell_max: 4,
            r: 1.092,
            theta_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    pub epsilon: f64,
    pub bloch_theta: f64,
    pub bloch_phi: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        let p = TrainableParams::preset(0.0, 4, 1.0);
        Self {
            epsilon: p.epsilon,
            bloch_theta: p.bloch_theta,
            bloch_phi: p.bloch_phi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    pub clip_norm: f64,
    pub lambda: f64,
    pub p_th: f64,
    pub seed: u64,
    pub freeze: Vec<Coord>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            lr_init: t.lr_init,
            lr_final: t.lr_final,
            clip_norm: t.clip_norm,
            lambda: t.lambda,
            p_th: t.p_th,
            seed: t.seed,
            freeze: t.freeze,
        }
    }
}

/// The JSON run configuration. Every key is optional except `noise`, which
/// must come from the file or from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub noise: Option<NoiseParams>,
    pub lattice: LatticeConfig,
    pub state: StateConfig,
    pub train: TrainSection,
    pub cutoff: usize,
    pub mc_samples: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            noise: None,
            lattice: LatticeConfig::default(),
            state: StateConfig::default(),
            train: TrainSection::default(),
            cutoff: DEFAULT_CUTOFF,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        let n = self.noise.ok_or_else(|| {
            Error::Config("noise is required: set noise.eta/noise.gamma or pass --eta/--gamma".into())
        })?;
        n.validate().map_err(|e| Error::Config(format!("noise: {e}")))?;
        Ok(n)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            steps: t.steps,
            lr_init: t.lr_init,
            lr_final: t.lr_final,
            clip_norm: t.clip_norm,
            lambda: t.lambda,
            p_th: t.p_th,
            noise: self.noise()?,
            cutoff: self.cutoff,
            seed: t.seed,
            freeze: t.freeze.clone(),
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn init_params(&self) -> Result<TrainableParams> {
        let l = &self.lattice;
        let ell = match l.theta_deg {
            Some(deg) => {
                if !(0.0..=180.0).contains(&deg) {
                    return Err(Error::Config(format!(
                        "lattice.theta_deg must lie in [0, 180], got {deg}"
                    )));
                }
                deg / 180.0 * l.ell_max as f64
            }
            None => l.ell,
        };
        let p = TrainableParams {
            bloch_theta: self.state.bloch_theta,
            bloch_phi: self.state.bloch_phi,
            ell,
            ell_max: l.ell_max,
            r: l.r,
            epsilon: self.state.epsilon,
            psi: 0.0,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config()?;
        self.init_params()?;
        if self.mc_samples < crate::analytic::MC_MIN_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples must be at least {}",
                crate::analytic::MC_MIN_SAMPLES
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub oam_gkp: String,
    pub report_schema: String,
    pub trace_schema: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            oam_gkp: env!("CARGO_PKG_VERSION").to_string(),
            report_schema: REPORT_SCHEMA.to_string(),
            trace_schema: TRACE_SCHEMA.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub ell: f64,
    pub ell_max: u32,
    pub theta_deg: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub qfi: f64,
    pub p_err_analytic: f64,
    pub p_err_mc: f64,
    pub p_err_mc_stderr: f64,
    pub mc_samples: u64,
    pub eta_meas: f64,
    pub capacity: f64,
    pub cfi: f64,
    pub cfi_ratio: f64,
    pub psi: f64,
    pub grad_norm: f64,
    pub leakage: f64,
    /// Analytic optimum rotation at this r and noise, if the balance equation has a root.
    pub theta_star_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub versions: Versions,
    pub seed: u64,
    pub config: RunConfig,
    pub adam: AdamConstants,
    pub lattice: LatticeSummary,
    pub noise: NoiseParams,
    pub params: TrainableParams,
    pub integer_projection: IntegerProjection,
    pub metrics: Metrics,
    pub steps_run: usize,
    pub trace_file: String,
}

impl RunReport {
    /// Every float in the metrics and final parameters is finite.
    pub fn check_finite(&self) -> Result<()> {
        let m = &self.metrics;
        let p = &self.params;
        let values = [
            m.loss, m.qfi, m.p_err_analytic, m.p_err_mc, m.p_err_mc_stderr, m.eta_meas,
            m.capacity, m.cfi, m.cfi_ratio, m.psi, m.grad_norm, m.leakage,
            m.theta_star_deg.unwrap_or(0.0), p.bloch_theta, p.bloch_phi, p.ell, p.r,
            p.epsilon, p.psi, self.lattice.theta_deg,
        ];
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("report contains non-finite values".into()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub report: RunReport,
    pub trace: TrainTrace,
    pub design: DesignEvaluation,
}

fn wrap(error: Error, trace: TrainTrace) -> TrainAbort {
    TrainAbort { error, trace }
}

/// One training run followed by the full evaluation of the final design.
pub fn run_single(config: &RunConfig) -> std::result::Result<SingleRun, TrainAbort> {
    let setup = config
        .validate()
        .and_then(|_| Ok((config.train_config()?, config.init_params()?)));
    let (cfg, init) = setup.map_err(|e| wrap(e, Vec::new()))?;
    let outcome = train(&cfg, &init)?;
    let trace = outcome.trace;
    let finish = || -> Result<(RunReport, DesignEvaluation)> {
        let p = outcome.params;
        let theta = p.theta()?;
        let (design, _) = evaluate_design(&p, cfg.noise, cfg.cutoff)?;
        let mc = mc_perr(theta, p.r, &cfg.noise, config.mc_samples, cfg.seed)?;
        let star = theta_star(p.r, &cfg.noise).ok();
        let mut echo = config.clone();
        echo.noise = Some(cfg.noise);
        let report = RunReport {
            versions: Versions::default(),
            seed: cfg.seed,
            config: echo,
            adam: cfg.adam,
            lattice: LatticeSummary {
                ell: p.ell,
                ell_max: p.ell_max,
                theta_deg: theta.to_degrees(),
                r: p.r,
            },
            noise: cfg.noise,
            params: p,
            integer_projection: integer_projection(&p, &cfg.noise)?,
            metrics: Metrics {
                loss: outcome.eval.loss,
                qfi: design.qfi,
                p_err_analytic: design.p_err,
                p_err_mc: mc.estimate,
                p_err_mc_stderr: mc.stderr,
                mc_samples: mc.samples,
                eta_meas: design.eta_meas,
                capacity: design.capacity,
                cfi: design.cfi,
                cfi_ratio: design.cfi_ratio,
                psi: design.psi,
                grad_norm: outcome.grad_norm,
                leakage: design.leakage,
                theta_star_deg: star.map(|s| s.theta_star_deg()),
            },
            steps_run: trace.len(),
            trace_file: "trace.csv".to_string(),
        };
        report.check_finite()?;
        Ok((report, design))
    };
    match finish() {
        Ok((report, design)) => Ok(SingleRun {
            report,
            trace,
            design,
        }),
        Err(e) => Err(wrap(e, trace)),
    }
}

/// Re-runs the configuration echoed in `report`; true when the metrics agree bit for bit.
pub fn replay(report: &RunReport) -> std::result::Result<(SingleRun, bool), TrainAbort> {
    let run = run_single(&report.config)?;
    let same = serde_json::to_string(&run.report.metrics).ok()
        == serde_json::to_string(&report.metrics).ok()
        && run.report.params == report.params;
    Ok((run, same))
}

pub fn write_trace_csv(trace: &TrainTrace, w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.step,
            fmt_f64(s.loss),
            fmt_f64(s.qfi),
            fmt_f64(s.p_err),
            fmt_f64(s.grad_norm),
            fmt_f64(s.lr)
        )?;
    }
    Ok(())
}

/// θ* with its noise sensitivity at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStarRow {
    pub eta: f64,
    pub gamma: f64,
    pub r: f64,
    pub result: Option<ThetaStarResult>,
    pub p_err_square: f64,
    /// (∂θ*/∂η, ∂θ*/∂γ) in degrees per unit.
    pub sensitivity: Option<(f64, f64)>,
}

impl ThetaStarRow {
    pub fn is_root(&self) -> bool {
        self.result.is_some()
    }
}

pub fn theta_star_row(noise: &NoiseParams, r: f64) -> Result<ThetaStarRow> {
    let p_square = crate::analytic::perr_analytic(0.0, r, noise)?.p_total;
    let result = match theta_star(r, noise) {
        Ok(s) => Some(s),
        Err(Error::NoRoot(_)) => None,
        Err(e) => return Err(e),
    };
    let sensitivity = match result {
        Some(_) => theta_sensitivity(r, noise, 1e-4).ok(),
        None => None,
    };
    Ok(ThetaStarRow {
        eta: noise.eta,
        gamma: noise.gamma,
        r,
        result,
        p_err_square: p_square,
        sensitivity,
    })
}

pub fn write_theta_star_csv(rows: &[ThetaStarRow], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{THETA_STAR_SCHEMA}\n{THETA_STAR_HEADER}")?;
    for row in rows {
        let star = row.result;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(row.eta),
            fmt_f64(row.gamma),
            fmt_f64(row.r),
            fmt_opt(star.map(|s| s.theta_star_deg())),
            fmt_opt(star.map(|s| s.p_err_at_star)),
            fmt_f64(row.p_err_square),
            fmt_opt(star.map(|s| row.p_err_square / s.p_err_at_star)),
            fmt_opt(row.sensitivity.map(|s| s.0)),
            fmt_opt(row.sensitivity.map(|s| s.1)),
            if row.is_root() { "ok" } else { "no-root" }
        )?;
    }
    Ok(())
}

pub fn write_phase_csv(cells: &[PhaseCell], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{PHASE_SCHEMA}\n{PHASE_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(c.eta),
            fmt_f64(c.gamma),
            fmt_opt(c.theta_star_deg),
            fmt_opt(c.p_err_at_star),
            fmt_f64(c.p_err_square),
            fmt_opt(c.improvement)
        )?;
    }
    Ok(())
}

pub fn write_fractional_csv(rows: &[FractionalRow], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{FRACTIONAL_SCHEMA}\n{FRACTIONAL_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.ell),
            fmt_f64(r.theta_deg),
            fmt_f64(r.r),
            fmt_opt(r.qfi),
            fmt_f64(r.p_err),
            fmt_f64(r.improvement),
            fmt_opt(r.capacity),
            status(&r.error)
        )?;
    }
    Ok(())
}

pub fn write_pareto_csv(points: &[ParetoPoint], w: &mut dyn Write) -> Result<()> {
    let front = crate::optimizer::pareto_front(points);
    writeln!(w, "{PARETO_SCHEMA}\n{PARETO_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(p.lambda),
            fmt_opt(p.qfi),
            fmt_opt(p.p_err),
            front.contains(p),
            status(&p.error)
        )?;
    }
    Ok(())
}

pub fn write_tolerance_csv(rows: &[ToleranceRow], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{TOLERANCE_SCHEMA}\n{TOLERANCE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(r.delta_deg),
            fmt_f64(r.theta_deg),
            fmt_f64(r.p_err),
            fmt_f64(r.improvement),
            fmt_f64(r.retained_pct)
        )?;
    }
    Ok(())
}

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Degrees in [0, 180] to the charge with the same rotation.
pub fn ell_for_theta_deg(theta_deg: f64, ell_max: u32) -> f64 {
    theta_deg.to_radians() / PI * ell_max as f64
}
