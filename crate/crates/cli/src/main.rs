use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use log::{info, warn};

use oam_gkp::analytic::{phase_diagram, tolerance_curve};
use oam_gkp::channels::NoiseParams;
use oam_gkp::io::{self, RunConfig, RunReport};
use oam_gkp::optimizer::{fractional_sweep, pareto_sweep, Coord, TrainAbort};
use oam_gkp::state::{logical_state, rotate, squeeze, GkpStateParams};
use oam_gkp::wigner::{wigner_grid, DEFAULT_POINTS};
use oam_gkp::{circuit, Error, Result};

#[derive(Parser)]
#[command(name = "oam-gkp", version, about = "Rotated GKP lattices for phase sensing")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one design and write report.json and trace.csv.
    Single(SingleArgs),
    /// Analytic optimal rotation and its noise sensitivity.
    ThetaStar(ThetaStarArgs),
    /// θ* and improvement over an (η, γ) grid.
    PhaseDiagram(PhaseArgs),
    /// Train at each fractional charge with ℓ frozen.
    Fractional(SweepArgs),
    /// Train once per λ and mark the non-dominated points.
    Pareto(ParetoArgs),
    /// Error rate under lattice misalignment.
    Tolerance(ToleranceArgs),
    /// Wigner function of a design on a phase-space grid.
    Wigner(WignerArgs),
}

/// Overrides for the JSON config; names follow the key paths.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    ell_max: Option<u32>,
    #[arg(long)]
    r: Option<f64>,
    /// Lattice rotation in degrees; replaces --ell.
    #[arg(long)]
    theta_deg: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    bloch_theta: Option<f64>,
    #[arg(long)]
    bloch_phi: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr_init: Option<f64>,
    #[arg(long)]
    lr_final: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p_th: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coordinates held fixed (replaces the config list).
    #[arg(long, value_delimiter = ',')]
    freeze: Option<Vec<Coord>>,
    /// Coordinates removed from the frozen list.
    #[arg(long, value_delimiter = ',')]
    unfreeze: Vec<Coord>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    mc_samples: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut c);
        Ok(c)
    }

    fn apply(&self, c: &mut RunConfig) {
        match (c.noise.as_mut(), self.eta, self.gamma) {
            (Some(n), eta, gamma) => {
                n.eta = eta.unwrap_or(n.eta);
                n.gamma = gamma.unwrap_or(n.gamma);
            }
            (None, Some(eta), Some(gamma)) => c.noise = Some(NoiseParams { eta, gamma }),
            _ => {}
        }
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(v) = src {
                *dst = v;
            }
        };
        set(&mut c.lattice.ell, self.ell);
        set(&mut c.lattice.r, self.r);
        set(&mut c.state.epsilon, self.epsilon);
        set(&mut c.state.bloch_theta, self.bloch_theta);
        set(&mut c.state.bloch_phi, self.bloch_phi);
        set(&mut c.train.lr_init, self.lr_init);
        set(&mut c.train.lr_final, self.lr_final);
        set(&mut c.train.clip_norm, self.clip_norm);
        set(&mut c.train.lambda, self.lambda);
        set(&mut c.train.p_th, self.p_th);
        if self.ell.is_some() {
            c.lattice.theta_deg = None;
        }
        if self.theta_deg.is_some() {
            c.lattice.theta_deg = self.theta_deg;
        }
        if let Some(v) = self.ell_max {
            c.lattice.ell_max = v;
        }
        if let Some(v) = self.steps {
            c.train.steps = v;
        }
        if let Some(v) = self.seed {
            c.train.seed = v;
        }
        if let Some(v) = &self.freeze {
            c.train.freeze = v.clone();
        }
        c.train.freeze.retain(|f| !self.unfreeze.contains(f));
        if let Some(v) = self.cutoff {
            c.cutoff = v;
        }
        if let Some(v) = self.mc_samples {
            c.mc_samples = v;
        }
    }

    /// The merged config, exiting with usage text when no noise point was given.
    fn load_with_noise(&self, subcommand: &str) -> Result<RunConfig> {
        let c = self.load()?;
        if c.noise.is_none() {
            let mut cmd = Cli::command();
            cmd.build();
            cmd.find_subcommand_mut(subcommand)
                .expect("known subcommand")
                .error(
                    ErrorKind::MissingRequiredArgument,
                    "a noise point is required: pass --eta and --gamma or set noise in --config",
                )
                .exit();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Directory for report.json and trace.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Re-run the config stored in a report and check the metrics match bit for bit.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct ThetaStarArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.092)]
    r: f64,
    /// Also write the row to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got '{s}'"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("range {lo}:{hi} is not increasing"));
    }
    Ok((lo, hi))
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, value_parser = parse_range, default_value = "0.75:0.99")]
    eta_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.01:0.2")]
    gamma_range: (f64, f64),
    /// Points per axis.
    #[arg(long, default_value_t = 25)]
    n: usize,
    #[arg(long, default_value_t = 1.092)]
    r: f64,
    #[arg(long, default_value = "phase_diagram.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3,3.5")]
    ells: Vec<f64>,
    #[arg(long, default_value = "fractional.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ParetoArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,10,100,1000")]
    lambdas: Vec<f64>,
    #[arg(long, default_value = "pareto.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ToleranceArgs {
    #[arg(long, default_value_t = 0.9)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1.092)]
    r: f64,
    /// Aligned rotation in degrees.
    #[arg(long, default_value_t = 67.5)]
    base_deg: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,3,5,7,10,15,20")]
    deltas: Vec<f64>,
    #[arg(long, default_value = "tolerance.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct WignerArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Grid spans [−range, range] in q and p.
    #[arg(long, default_value_t = 6.0)]
    range: f64,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Pass the state through loss and dephasing first (needs a noise point).
    #[arg(long)]
    noisy: bool,
    /// CSV output; grid metadata goes to the same path with a .json extension.
    #[arg(long, default_value = "wigner.csv")]
    out: PathBuf,
}

fn write_trace(dir: &Path, trace: &oam_gkp::optimizer::TrainTrace) -> Result<()> {
    io::write_file(&dir.join("trace.csv"), |w| io::write_trace_csv(trace, w))
}

fn print_report(r: &RunReport) {
    let m = &r.metrics;
    println!("theta_deg      {:.4}", r.lattice.theta_deg);
    println!("r              {:.6}", r.lattice.r);
    println!("qfi            {:.6}", m.qfi);
    println!("p_err          {:.6e}", m.p_err_analytic);
    println!("p_err_mc       {:.6e} ± {:.1e}", m.p_err_mc, m.p_err_mc_stderr);
    println!("eta_meas       {:.6}", m.eta_meas);
    println!("capacity       {:.4}", m.capacity);
    println!("grad_norm      {:.3e}", m.grad_norm);
    if let Some(t) = m.theta_star_deg {
        println!("theta_star_deg {t:.4}");
    }
}

fn run_single(args: &SingleArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let abort = |a: TrainAbort| -> Error {
        if !a.trace.is_empty() {
            if let Err(e) = write_trace(&args.out_dir, &a.trace) {
                warn!("could not write partial trace: {e}");
            }
        }
        a.error
    };
    let (run, replayed) = match &args.replay {
        Some(path) => {
            let old: RunReport = io::read_json(path)?;
            let (run, same) = io::replay(&old).map_err(abort)?;
            (run, Some(same))
        }
        None => {
            let cfg = args.cfg.load_with_noise("single")?;
            (io::run_single(&cfg).map_err(abort)?, None)
        }
    };
    io::write_json(&args.out_dir.join("report.json"), &run.report)?;
    write_trace(&args.out_dir, &run.trace)?;
    print_report(&run.report);
    match replayed {
        Some(true) => println!("replay: metrics identical"),
        Some(false) => {
            return Err(Error::Numeric("replay: metrics differ from the stored report".into()))
        }
        None => {}
    }
    Ok(())
}

fn run_theta_star(args: &ThetaStarArgs) -> Result<()> {
    let noise = NoiseParams::new(args.eta, args.gamma)?;
    let row = io::theta_star_row(&noise, args.r)?;
    let rows = [row];
    let mut stdout = std::io::stdout().lock();
    io::write_theta_star_csv(&rows, &mut stdout)?;
    if let Some(path) = &args.out {
        io::write_file(path, |w| io::write_theta_star_csv(&rows, w))?;
    }
    if row.is_root() {
        Ok(())
    } else {
        Err(Error::NoRoot(format!(
            "balance equation has no root in (0°, 90°) at eta {} gamma {}",
            args.eta, args.gamma
        )))
    }
}

fn run_phase(args: &PhaseArgs) -> Result<()> {
    let (e, g) = (args.eta_range, args.gamma_range);
    if !(e.0 > 0.0 && e.1 < 1.0 && g.0 >= 0.0 && g.1 <= 0.5) {
        return Err(Error::Config(format!(
            "ranges must lie within (0, 1) x [0, 0.5], got eta {e:?} gamma {g:?}"
        )));
    }
    if args.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let cells = phase_diagram(
        &io::linspace(e.0, e.1, args.n),
        &io::linspace(g.0, g.1, args.n),
        args.r,
    )?;
    io::write_file(&args.out, |w| io::write_phase_csv(&cells, w))?;
    let missing = cells.iter().filter(|c| c.theta_star_deg.is_none()).count();
    if missing > 0 {
        warn!("{missing} cells have no root");
    }
    println!("wrote {} cells to {}", cells.len(), args.out.display());
    Ok(())
}

fn run_fractional(args: &SweepArgs) -> Result<()> {
    let cfg = args.cfg.load_with_noise("fractional")?;
    let rows = fractional_sweep(&args.ells, &cfg.train_config()?, &cfg.init_params()?)?;
    io::write_file(&args.out, |w| io::write_fractional_csv(&rows, w))?;
    for r in &rows {
        println!(
            "ell {:>4}  theta {:>6.2}  p_err {:.4e}  x{:.2}",
            r.ell, r.theta_deg, r.p_err, r.improvement
        );
    }
    Ok(())
}

fn run_pareto(args: &ParetoArgs) -> Result<()> {
    let mut cfg_args = args.cfg.clone();
    // λ only matters when a coordinate that moves P_err is trainable.
    if cfg_args.freeze.is_none() && cfg_args.config.is_none() {
        cfg_args.freeze = Some(vec![Coord::Ell, Coord::Epsilon, Coord::Psi]);
    }
    let cfg = cfg_args.load_with_noise("pareto")?;
    let points = pareto_sweep(&args.lambdas, &cfg.train_config()?, &cfg.init_params()?)?;
    io::write_file(&args.out, |w| io::write_pareto_csv(&points, w))?;
    info!("wrote {} points to {}", points.len(), args.out.display());
    for p in &points {
        match (p.qfi, p.p_err) {
            (Some(q), Some(e)) => println!("lambda {:>8}  qfi {q:.5}  p_err {e:.4e}", p.lambda),
            _ => println!("lambda {:>8}  failed", p.lambda),
        }
    }
    Ok(())
}

fn run_tolerance(args: &ToleranceArgs) -> Result<()> {
    let noise = NoiseParams::new(args.eta, args.gamma)?;
    let rows = tolerance_curve(&args.deltas, args.base_deg.to_radians(), args.r, &noise)?;
    io::write_file(&args.out, |w| io::write_tolerance_csv(&rows, w))?;
    for r in &rows {
        println!(
            "delta {:>5.1}  p_err {:.4e}  x{:.2}  retained {:.1}%",
            r.delta_deg, r.p_err, r.improvement, r.retained_pct
        );
    }
    Ok(())
}

fn run_wigner(args: &WignerArgs) -> Result<()> {
    let cfg = if args.noisy {
        args.cfg.load_with_noise("wigner")?
    } else {
        args.cfg.load()?
    };
    let p = cfg.init_params()?;
    let state = GkpStateParams::new(p.epsilon, p.bloch_theta, p.bloch_phi, cfg.cutoff)?;
    let rho = if args.noisy {
        circuit::run_circuit(&p.circuit(cfg.noise()?, cfg.cutoff)?)?.rho
    } else {
        let sq = squeeze(&logical_state(&state)?, p.r.ln())?;
        rotate(&sq.ket, p.theta()?).to_density()
    };
    if !(args.range > 0.0) {
        return Err(Error::Config("--range must be positive".into()));
    }
    let span = (-args.range, args.range);
    let grid = wigner_grid(&rho, span, span, args.points)?;
    let meta = grid.meta(cfg.cutoff);
    io::write_file(&args.out, |w| grid.write_csv(w))?;
    io::write_json(&args.out.with_extension("json"), &meta)?;
    println!("integral   {:.6}", meta.integral);
    println!("negativity {:.6}", meta.negativity);
    println!("min W      {:.6}", meta.min);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Single(a) => run_single(a),
        Command::ThetaStar(a) => run_theta_star(a),
        Command::PhaseDiagram(a) => run_phase(a),
        Command::Fractional(a) => run_fractional(a),
        Command::Pareto(a) => run_pareto(a),
        Command::Tolerance(a) => run_tolerance(a),
        Command::Wigner(a) => run_wigner(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
