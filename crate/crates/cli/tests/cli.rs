use std::path::Path;
use std::process::{Command, Output};

fn oam_gkp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oam-gkp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a sweep CSV (schema line and header dropped).
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn theta_star_low_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["theta-star", "--eta", "0.9", "--gamma", "0.05"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# oam-gkp theta-star v1");
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert!((num(fields[3]) - 64.4).abs() < 0.1);
    assert_eq!(fields[9], "ok");
}

#[test]
fn theta_star_without_root_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["theta-star", "--eta", "0.75", "--gamma", "0.01"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("no-root"));
}

#[test]
fn missing_noise_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["single"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage: oam-gkp single"));
    let o = oam_gkp(&["theta-star", "--eta", "0.9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"noise\": {\"eta\": 0.9,\n \"gama\": 0.05}}").unwrap();
    let o = oam_gkp(&["single", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("gama") && err.contains("line 2"), "{err}");

    let o = oam_gkp(&["single", "--eta", "1.5", "--gamma", "0.05"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_writes_report_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"noise": {"eta": 0.9, "gamma": 0.05}, "train": {"steps": 15}, "mc_samples": 100000}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let o = oam_gkp(
        &["single", "--config", "cfg.json", "--ell", "1", "--seed", "7", "--out-dir", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,loss,qfi,p_err,grad_norm,lr"));
    assert_eq!(lines.count(), 15);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["lattice"]["ell"], 1.0);
    assert_eq!(report["versions"]["trace_schema"], "trace/v1");
    let m = &report["metrics"];
    for key in ["qfi", "p_err_analytic", "p_err_mc", "p_err_mc_stderr", "eta_meas", "capacity"] {
        assert!(m[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!((m["p_err_analytic"].as_f64().unwrap() / 5.42e-5 - 1.0).abs() < 0.02);

    let o = oam_gkp(
        &["single", "--replay", "run/report.json", "--out-dir", "again"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("replay: metrics identical"));
    assert_eq!(
        std::fs::read(run.join("trace.csv")).unwrap(),
        std::fs::read(dir.path().join("again/trace.csv")).unwrap()
    );
}

#[test]
fn single_low_noise_square_and_fractional_charge() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(
        &["single", "--eta", "0.9", "--gamma", "0.05", "--ell", "0", "--out-dir", "sq"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("report.json")).unwrap())
            .unwrap()
    };
    let sq = read("sq");
    assert!((sq["metrics"]["p_err_analytic"].as_f64().unwrap() / 4.13e-4 - 1.0).abs() < 0.02);
    assert!(sq["metrics"]["grad_norm"].as_f64().unwrap() < 1e-3);

    let o = oam_gkp(
        &[
            "single", "--eta", "0.9", "--gamma", "0.05", "--ell", "1.5", "--ell-max", "4",
            "--out-dir", "frac",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read("frac")["metrics"].clone();
    let p = m["p_err_analytic"].as_f64().unwrap();
    assert!((p / 1.73e-5 - 1.0).abs() < 0.02);
    let qfi = m["qfi"].as_f64().unwrap();
    assert!((m["capacity"].as_f64().unwrap() - qfi * -p.ln()).abs() < 1e-9);
}

#[test]
fn tolerance_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["tolerance", "--deltas", "0,7,20"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("tolerance.csv"));
    for (row, want) in r.iter().zip([23.9, 20.0, 15.7]) {
        assert!((num(&row[3]) / want - 1.0).abs() < 0.05, "{row:?}");
    }
}

#[test]
fn one_cell_phase_diagram_matches_theta_star() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(
        &[
            "phase-diagram", "--eta-range", "0.9:0.9", "--gamma-range", "0.05:0.05", "--n", "1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let cell = &rows(&dir.path().join("phase_diagram.csv"))[0];
    let o = oam_gkp(&["theta-star", "--eta", "0.9", "--gamma", "0.05"], dir.path());
    let out = stdout(&o);
    let star: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(cell[2], star[3]);
    assert_eq!(cell[3], star[4]);
    assert!((num(&cell[5]) / 23.7 - 1.0).abs() < 0.05);
}

#[test]
fn phase_diagram_rejects_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["phase-diagram", "--eta-range", "0.5:1.2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn phase_diagram_roots_lie_between_45_and_90() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["phase-diagram", "--n", "6"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let cells = rows(&dir.path().join("phase_diagram.csv"));
    assert_eq!(cells.len(), 36);
    let roots: Vec<f64> = cells.iter().filter(|c| !c[2].is_empty()).map(|c| num(&c[2])).collect();
    assert!(!roots.is_empty());
    assert!(roots.iter().all(|t| *t > 45.0 && *t < 90.0));
    // row-major in eta
    assert!(cells.windows(2).all(|w| num(&w[0][0]) <= num(&w[1][0])));
}

#[test]
fn fractional_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(
        &["fractional", "--eta", "0.9", "--gamma", "0.05", "--steps", "5"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("fractional.csv"));
    assert_eq!(r.len(), 8);
    let best = r.iter().map(|row| num(&row[4])).fold(f64::INFINITY, f64::min);
    let argmin: Vec<f64> = r
        .iter()
        .filter(|row| (num(&row[4]) - best).abs() <= 1e-12 * best)
        .map(|row| num(&row[0]))
        .collect();
    assert_eq!(argmin, vec![1.5, 2.5]);
    assert!(r.iter().all(|row| row[7] == "ok"));
}

#[test]
fn wigner_grid_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(&["wigner", "--ell", "0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("wigner.json")).unwrap())
            .unwrap();
    assert!((meta["integral"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(meta["min"].as_f64().unwrap() < 0.0);
    let csv = std::fs::read_to_string(dir.path().join("wigner.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("q,p,W"));
    assert_eq!(csv.lines().count(), 1 + 201 * 201);
}

#[test]
fn pareto_marks_front() {
    let dir = tempfile::tempdir().unwrap();
    let o = oam_gkp(
        &["pareto", "--eta", "0.9", "--gamma", "0.05", "--lambdas", "1000,0", "--steps", "40"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("pareto.csv"));
    assert_eq!(num(&r[0][0]), 0.0);
    assert_eq!(num(&r[1][0]), 1000.0);
    assert!(r.iter().all(|row| row[4] == "ok"));
}
