//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

use std::time::{Duration, Instant};

use benign_core::bounds::{dm_bounds, localized_width_bound, BoundConfig, BoundInputs, BoundReport};
use benign_core::designs::{DesignSpec, Family};
use benign_core::estimators::{
    estimate_coordinate_smallball_prob, estimate_gaussian_width, estimate_smin_distribution,
};
use benign_core::harness::{
    preset_example_31, records_to_csv, run_experiment, AlphaStar, ExperimentConfig, ExperimentRun,
    NoiseFamily, NoiseSpec, Outputs,
};
use benign_core::interpolator::{
    decomposition_check, empirical_excess_risk, min_norm_interpolate, min_norm_solve,
    RegressionInstance,
};
use benign_core::rng;
use benign_core::spectra::Spectrum;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Duration,
}

fn report(c: &Criterion, outcome: Outcome, elapsed: Duration) -> bool {
    let (ok, detail) = match outcome {
        Ok(d) => (elapsed <= c.limit, d),
        Err(d) => (false, d),
    };
    println!(
        "{} {} {}: {} [{:.1}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        detail,
        elapsed.as_secs_f64(),
        c.limit.as_secs()
    );
    ok
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A random positive spectrum with condition number up to `10^decades`.
fn random_spectrum(p: usize, decades: f64, rng: &mut impl Rng) -> Spectrum {
    let v: Vec<f64> = (0..p).map(|_| 10f64.powf(-decades * rng.random::<f64>())).collect();
    Spectrum::from_unsorted(v).unwrap()
}

fn random_instance(rng: &mut impl Rng, p: usize, n: usize, spectrum: &Spectrum, seed: u64) -> RegressionInstance {
    let spec = DesignSpec::new(spectrum.clone(), Family::Gaussian, seed).unwrap();
    let x = spec.sample_with(n, rng).unwrap();
    let alpha = DVector::from_fn(p, |_, _| gaussian(rng));
    let noise = DVector::from_fn(n, |_, _| gaussian(rng));
    RegressionInstance::new(x, alpha, noise, 1.0).unwrap()
}

fn c1_stable_rank() -> Outcome {
    let mut rng = rng::stream(101, 0);
    let (mut spectra, mut pairs, mut worst) = (0, 0usize, f64::INFINITY);
    while spectra < 1000 {
        let p = rng.random_range(2..=80);
        let s = random_spectrum(p, rng.random_range(0.0..1.5), &mut rng);
        let floor = s.trace() / (2.0 * p as f64);
        if s.eigenvalues().iter().any(|v| *v < floor) {
            continue;
        }
        spectra += 1;
        let srank4 = s.stable_rank4(false);
        for k in 0..p {
            if k as f64 > srank4 {
                break;
            }
            let c = s.stable_rank_lower_bound_check(k).map_err(|e| e.to_string())?;
            pairs += 1;
            worst = worst.min(c.lhs - c.rhs);
            if c.lhs < c.rhs - 1e-9 {
                return Err(format!("violation at p = {p}, k = {k}: {} < {}", c.lhs, c.rhs));
            }
        }
    }
    Ok(format!("{spectra} spectra, {pairs} (spectrum, k) pairs, min slack {worst:.3e}"))
}

fn c2_exclusion_identity() -> Outcome {
    let mut rng = rng::stream(102, 0);
    let mut worst = 0.0f64;
    for t in 0..1000u64 {
        let n = rng.random_range(1..=50);
        let p = rng.random_range(n + 1..=200);
        let s = random_spectrum(p, 2.0, &mut rng);
        let inst = random_instance(&mut rng, p, n, &s, t);
        let r = min_norm_interpolate(&inst).map_err(|e| e.to_string())?;
        let excess = empirical_excess_risk(&r.alpha_hat, &inst).map_err(|e| e.to_string())?;
        let target = inst.noise.norm_squared() / n as f64;
        worst = worst.max((excess + target).abs() / target);
    }
    check(worst <= 1e-10, format!("max relative error {worst:.3e} over 1000 instances"))
}

fn c3_decomposition() -> Outcome {
    let mut rng = rng::stream(103, 0);
    let mut worst = 0.0f64;
    for t in 0..1000u64 {
        let n = rng.random_range(1..=50);
        let p = rng.random_range(n + 1..=200);
        let s = random_spectrum(p, 2.0, &mut rng);
        let inst = random_instance(&mut rng, p, n, &s, t);
        let alpha = DVector::from_fn(p, |_, _| gaussian(&mut rng));
        let d = decomposition_check(&alpha, &inst).map_err(|e| e.to_string())?;
        let scale = d.quadratic.abs() + d.multiplier.abs();
        worst = worst.max(d.identity_gap / scale);
    }
    check(worst <= 1e-10, format!("max relative gap {worst:.3e} over 1000 pairs"))
}

fn c4_solver() -> Outcome {
    let mut rng = rng::stream(104, 0);
    let (mut res, mut leak) = (0.0f64, 0.0f64);
    for t in 0..200u64 {
        let n = rng.random_range(2..=40);
        let p = rng.random_range(n + 1..=150);
        // Every other instance spans eight decades: condition number 1e8.
        let s = if t % 2 == 0 {
            Spectrum::new((0..p).map(|i| 10f64.powf(-8.0 * i as f64 / (p - 1) as f64)).collect()).unwrap()
        } else {
            random_spectrum(p, 2.0, &mut rng)
        };
        let inst = random_instance(&mut rng, p, n, &s, t);
        let (r, pinv) = min_norm_solve(&inst.design, &inst.responses).map_err(|e| e.to_string())?;
        res = res.max(r.residual_norm / inst.responses.norm());
        leak = leak.max(r.row_space_leak / r.alpha_hat.norm());
        let base = r.alpha_hat.norm();
        for _ in 0..50 {
            let g = DVector::from_fn(p, |_, _| gaussian(&mut rng));
            let v = &g - pinv.project_row_space(&g);
            if (&r.alpha_hat + &v).norm() < base {
                return Err(format!("instance {t}: a null-space perturbation shortens the solution"));
            }
        }
    }
    check(
        res <= 1e-8 && leak <= 1e-8,
        format!("max residual {res:.2e}, max row-space leak {leak:.2e}, 200 instances x 50 perturbations"),
    )
}

fn c5_width() -> Outcome {
    let spectra = [
        Spectrum::identity(100).unwrap(),
        Spectrum::new((1..=100).map(|k| 1.0 / k as f64).collect()).unwrap(),
        Spectrum::new((1..=100).map(|k| (k as f64).powf(-2.0)).collect()).unwrap(),
        Spectrum::new((1..=150).map(|k| (-(k as f64) / 10.0).exp() + 1e-3).collect()).unwrap(),
        Spectrum::new([vec![10.0; 5], vec![0.1; 95]].concat()).unwrap(),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut cells = 0;
    for (i, s) in spectra.iter().enumerate() {
        let top = s.top().sqrt();
        for rho in [0.5, 1.0, 4.0] {
            for r in [0.1 * top, 0.5 * top, 2.0 * top] {
                let est = estimate_gaussian_width(s, rho, r, 10_000, 32, 500 + cells).map_err(|e| e.to_string())?;
                let bound = localized_width_bound(s, r, rho);
                let slack = (est.value - bound - 3.0 * est.stderr) / bound;
                worst = worst.max(slack);
                if slack > 0.0 {
                    return Err(format!("spectrum {i}, rho {rho}, r {r}: {} > {bound}", est.value));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells, max (estimate - bound - 3se)/bound = {worst:.3}"))
}

fn c6_smin() -> Outcome {
    let s = Spectrum::identity(400).unwrap();
    let config = BoundConfig { epsilon: 0.1, ..BoundConfig::default() };
    let rep = BoundReport::evaluate(
        &BoundInputs { spectrum: &s, n: 100, alpha_star_norm: 1.0, noise_psi2: 1.0, heavy_tailed: false },
        &config,
    )
    .map_err(|e| e.to_string())?;
    let spec = DesignSpec::new(s, Family::Gaussian, 106).unwrap();
    let dist = estimate_smin_distribution(&spec, 100, 200, rep.s_min_bound).map_err(|e| e.to_string())?;
    let edge = 400f64.sqrt() - 100f64.sqrt();
    let rel = (dist.q50 - edge).abs() / edge;
    check(
        dist.exceed_rate >= 0.99 && rel <= 0.1,
        format!(
            "bound {:.3}, exceed rate {:.3}, median {:.3} vs edge {edge:.1} ({:.1}% off)",
            rep.s_min_bound,
            dist.exceed_rate,
            dist.q50,
            100.0 * rel
        ),
    )
}

fn example_config(family: Family) -> Result<ExperimentConfig, String> {
    let mut c = preset_example_31(200, 1e-3, 1.0, 30.0).map_err(|e| e.to_string())?;
    c.design.family = family;
    c.trials = 100;
    Ok(c)
}

fn c7_example(run: &ExperimentRun, config: &ExperimentConfig) -> Outcome {
    let s = &run.summary;
    let zeta1 = config.bound_config.zeta1;
    let eps = 1e-3f64;
    let alpha2 = run.report.alpha_star_norm.powi(2);
    let shape = 4.0 / zeta1 * alpha2 * (eps + 1.0 / ((1.0 / eps).ln() * config.n as f64));
    check(
        s.coverage_rho >= 0.9 && s.coverage_r_star >= 0.9 && s.mean_prediction_error_sq <= shape,
        format!(
            "p = {}, rho = {:.2}, r* = {:.3} (zeta1 = {zeta1}), coverage {:.2}/{:.2}, mean pred err^2 {:.4} <= {:.3}",
            run.report.p, run.report.rho, run.report.r_star, s.coverage_rho, s.coverage_r_star, s.mean_prediction_error_sq, shape
        ),
    )
}

fn c8_heavy_tails(gauss: &ExperimentRun) -> Outcome {
    let config = example_config(Family::StudentT { df: 3.0 })?;
    let run = run_experiment(&config).map_err(|e| e.to_string())?;
    let d_rho = (run.summary.coverage_rho - gauss.summary.coverage_rho).abs();
    let d_r = (run.summary.coverage_r_star - gauss.summary.coverage_r_star).abs();
    check(
        d_rho <= 0.05 && d_r <= 0.05,
        format!(
            "t3 coverage {:.2}/{:.2} vs gaussian {:.2}/{:.2}",
            run.summary.coverage_rho, run.summary.coverage_r_star, gauss.summary.coverage_rho, gauss.summary.coverage_r_star
        ),
    )
}

fn c9_smallball() -> Outcome {
    let spec = DesignSpec::new(Spectrum::identity(200).unwrap(), Family::Gaussian, 109).unwrap();
    let est = estimate_coordinate_smallball_prob(&spec, 0.1, 0.5, 10_000).map_err(|e| e.to_string())?;
    check(est.value <= 0.01, format!("p_hat = {:.4} +/- {:.4}", est.value, est.stderr))
}

fn c10_dm() -> Outcome {
    let s = Spectrum::identity(2000).unwrap();
    let config = ExperimentConfig {
        design: DesignSpec::new(s.clone(), Family::Gaussian, 110).unwrap(),
        n: 50,
        alpha_star: AlphaStar::UnitFirstCoordinate { scale: 1.0 },
        noise: NoiseSpec { family: NoiseFamily::Gaussian, sigma: 1.0, psi2: 1.0 },
        bound_config: BoundConfig { delta_dm: 0.25, ..BoundConfig::default() },
        trials: 100,
        outputs: Outputs::default(),
        example31: None,
    };
    let run = run_experiment(&config).map_err(|e| e.to_string())?;
    let dm = dm_bounds(&s, 50, 1.0, 1.0, &config.bound_config).map_err(|e| e.to_string())?;
    let n = run.records.len() as f64;
    let smin_rate = run.records.iter().filter(|r| r.s_min_empirical >= dm.s_min_bound).count() as f64 / n;
    let est_rate = run.records.iter().filter(|r| r.estimation_error <= dm.estimation_bound).count() as f64 / n;
    check(
        run.records.len() == 100 && smin_rate >= 0.95 && est_rate >= 0.9,
        format!(
            "s_min >= {:.2} in {:.2}, estimation error <= {:.3} in {:.2}",
            dm.s_min_bound, smin_rate, dm.estimation_bound, est_rate
        ),
    )
}

fn timed(c: Criterion, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    report(&c, outcome, start.elapsed())
}

fn crit(id: &'static str, name: &'static str, secs: u64) -> Criterion {
    Criterion { id, name, limit: Duration::from_secs(secs) }
}

fn main() {
    let mut results = vec![
        timed(crit("C1", "stable-rank inequality", 10), c1_stable_rank),
        timed(crit("C2", "exclusion identity", 30), c2_exclusion_identity),
        timed(crit("C3", "decomposition identity", 30), c3_decomposition),
        timed(crit("C4", "min-norm solver", 60), c4_solver),
        timed(crit("C5", "gaussian-width bound", 180), c5_width),
        timed(crit("C6", "smallest singular value", 120), c6_smin),
    ];
    // The gaussian run of C7 is reused by C8 and C11.
    let mut gauss = None;
    results.push(timed(crit("C7", "decaying example end to end", 300), || {
        let config = example_config(Family::Gaussian)?;
        let run = run_experiment(&config).map_err(|e| e.to_string())?;
        let outcome = c7_example(&run, &config);
        gauss = Some((config, run));
        outcome
    }));
    results.push(timed(crit("C8", "heavy-tail robustness", 300), || {
        c8_heavy_tails(&gauss.as_ref().ok_or("gaussian run failed")?.1)
    }));
    results.push(timed(crit("C9", "coordinate small ball", 60), c9_smallball));
    results.push(timed(crit("C10", "Dvoretzky-Milman route", 180), c10_dm));
    results.push(timed(crit("C11", "determinism", 300), || {
        let (config, first) = gauss.as_ref().ok_or("gaussian run failed")?;
        let again = run_experiment(config).map_err(|e| e.to_string())?;
        let (a, b) = (records_to_csv(&first.records), records_to_csv(&again.records));
        check(a == b, format!("{} bytes, identical: {}", a.len(), a == b))
    }));
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
