use std::path::Path;
use std::process::Command;

use benign_core::bounds::BoundConfig;
use benign_core::designs::{DesignSpec, Family};
use benign_core::harness::{
    emit_outputs, emit_sweep_outputs, preset_example_31, records_to_csv, run_experiment, sweep,
    sweep_config, AlphaStar, ExperimentConfig, NoiseFamily, NoiseSpec, Outputs, RunDocument,
    SweepVar, CSV_HEADER,
};
use benign_core::spectra::Spectrum;

fn small_config(trials: usize) -> ExperimentConfig {
    let spectrum = Spectrum::new((1..=80).map(|k| 1.0 / (k as f64).sqrt()).collect()).unwrap();
    ExperimentConfig {
        design: DesignSpec::new(spectrum, Family::Gaussian, 17).unwrap(),
        n: 20,
        alpha_star: AlphaStar::RandomUnit { scale: 2.0, seed: 5 },
        noise: NoiseSpec {
            family: NoiseFamily::Gaussian,
            sigma: 0.5,
            psi2: 0.5,
        },
        bound_config: BoundConfig::default(),
        trials,
        outputs: Outputs::default(),
        example31: None,
    }
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

#[test]
fn csv_has_one_line_per_record() {
    assert_eq!(records_to_csv(&[]), format!("{CSV_HEADER}\n"));
    let run = run_experiment(&small_config(100)).unwrap();
    let csv = records_to_csv(&run.records);
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.lines().skip(1).enumerate().all(|(i, l)| l.starts_with(&format!("{i},"))));
    assert_eq!(run.summary.completed, 100);
    assert_eq!(run.summary.failed, 0);
}

#[test]
fn empty_runs_write_header_only_and_no_plots() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(1);
    config.outputs = Outputs::in_dir(dir.path());
    let mut run = run_experiment(&config).unwrap();
    run.records.clear();
    let written = emit_outputs(&run, &config).unwrap();
    assert_eq!(written.len(), 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("trials.csv")).unwrap(), format!("{CSV_HEADER}\n"));
    assert!(!dir.path().join("plots").exists());
}

#[test]
fn emitted_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(10);
    config.outputs = Outputs::in_dir(dir.path());
    let run = run_experiment(&config).unwrap();
    let written = emit_outputs(&run, &config).unwrap();
    assert_eq!(written.len(), 4);
    let doc: RunDocument = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(doc.config, config);
    assert_eq!(doc.bound_report, run.report);
    assert_eq!(doc.summary, run.summary);
    for plot in ["prediction_error.svg", "s_min.svg"] {
        let svg = std::fs::read_to_string(dir.path().join("plots").join(plot)).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn config_json_round_trips_and_rejects_unknown_fields() {
    let config = preset_example_31(200, 1e-3, 1.0, 30.0).unwrap();
    let text = serde_json::to_string(&config).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, config);
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["bound_config"]["zeta3"] = 1.0.into();
    assert!(serde_json::from_value::<ExperimentConfig>(value).is_err());
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let config = small_config(40);
    let a = records_to_csv(&run_experiment(&config).unwrap().records);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| records_to_csv(&run_experiment(&config).unwrap().records));
    assert_eq!(a, b);
    let mut other = config.clone();
    other.design.seed += 1;
    assert_ne!(a, records_to_csv(&run_experiment(&other).unwrap().records));
}

#[test]
fn single_value_sweep_matches_direct_run() {
    let base = small_config(20);
    let points = sweep(&base, SweepVar::Epsilon, &[base.bound_config.epsilon]).unwrap();
    let run = run_experiment(&base).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].summary.as_ref(), Some(&run.summary));
    assert_eq!(points[0].rho, Some(run.report.rho));
}

#[test]
fn sweep_records_failures_and_continues() {
    let base = small_config(5);
    // N = 100 exceeds p = 80 and must fail without stopping the sweep.
    let points = sweep(&base, SweepVar::N, &[10.0, 100.0, 30.0]).unwrap();
    assert!(points[0].summary.is_some() && points[2].summary.is_some());
    assert!(points[1].error.is_some() && points[1].summary.is_none());
    let dir = tempfile::tempdir().unwrap();
    let written = emit_sweep_outputs(&points, "N", dir.path()).unwrap();
    assert_eq!(written.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().contains(",nan,"));
}

#[test]
fn trace_scale_shrinks_the_noise_term_of_rho() {
    // 𝔯_k and c₀ are scale invariant, so ρ − ‖α*‖ ∝ √(p/tr Σ) ∝ 1/√t.
    let base = small_config(1);
    let r0 = base.bound_report().unwrap();
    for t in [0.25, 4.0, 9.0] {
        let rt = sweep_config(&base, SweepVar::TraceScale, t).unwrap().bound_report().unwrap();
        let ratio = (rt.rho - rt.alpha_star_norm) / (r0.rho - r0.alpha_star_norm);
        assert!((ratio - 1.0 / t.sqrt()).abs() < 1e-10, "t = {t}: {ratio}");
    }
}

#[test]
fn sweep_over_n_rebuilds_the_decaying_spectrum() {
    let base = preset_example_31(200, 1e-3, 1.0, 30.0).unwrap();
    let c = sweep_config(&base, SweepVar::N, 300.0).unwrap();
    assert_eq!(c.n, 300);
    assert_eq!(c.design.dim(), (300.0 * 1000f64.ln()).ceil() as usize);
    assert!(sweep_config(&base, SweepVar::N, 2.5).is_err());
    assert!("rho".parse::<SweepVar>().is_err());
}

fn benign(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_benign")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), &small_config(5));
    let good = good.to_str().unwrap();

    // With N < p the balance inequality has no solution here either; the
    // report is still printed before the infeasibility exit code.
    let out = benign(&["--json", "bounds", good]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["k_star"], "inf");
    assert!(report["rho"].as_f64().unwrap() > 0.0);

    let out = benign(&["simulate", good, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("run/trials.csv")).unwrap().lines().count(), 6);

    // The decaying example has no finite k*, which is a bound-level failure.
    let preset = dir.path().join("preset.json");
    std::fs::write(&preset, serde_json::to_string(&preset_example_31(200, 1e-3, 1.0, 30.0).unwrap()).unwrap()).unwrap();
    let out = benign(&["bounds", preset.to_str().unwrap(), "--table"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("k,lhs,rhs,frak_R_k,feasible\n"));

    let mut bad = small_config(5);
    bad.n = 500;
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, serde_json::to_string(&bad).unwrap()).unwrap();
    assert_eq!(benign(&["simulate", bad_path.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(benign(&["bounds", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn cli_ranks_and_smallball() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("s.csv");
    std::fs::write(&spectrum, Spectrum::new(vec![4.0, 1.0, 1.0]).unwrap().to_csv()).unwrap();
    let table = dir.path().join("table.csv");
    let out = benign(&["--json", "ranks", spectrum.to_str().unwrap(), "--k", "1", "--table", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["p"], 3);
    assert!((v["profile"]["r_k"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(std::fs::read_to_string(&table).unwrap().starts_with("k,r_k,R_k,R_k2,frak_R_k\n"));

    let config = write_config(dir.path(), &small_config(5));
    let out = benign(&["--json", "smallball", config.to_str().unwrap(), "--epsilon", "0.1", "--c0", "0.5", "--trials", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let est: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(est["trials"], 2000);
}
