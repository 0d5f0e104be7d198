use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use benign_core::bounds::KStar;
use benign_core::designs::compute_c0;
use benign_core::estimators::estimate_coordinate_smallball_prob;
use benign_core::harness::{
    emit_outputs, emit_sweep_outputs, load_design, preset_example_31, run_experiment, sweep,
    ExperimentConfig, Outputs, SweepVar,
};
use benign_core::spectra::Spectrum;
use benign_core::{Error, Result};

#[derive(Parser)]
#[command(name = "benign", version, about = "Minimum-norm interpolation laboratory")]
struct Cli {
    /// Override the design seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank functionals of a spectrum (JSON or CSV).
    Ranks {
        spectrum: PathBuf,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        c_small: f64,
        /// Write the functionals for every k to this CSV file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Evaluate k*, nu, rho, r* and the other bound parameters.
    Bounds {
        config: PathBuf,
        /// Print the per-k table as CSV instead of the report.
        #[arg(long)]
        table: bool,
    },
    /// Run the Monte Carlo experiment described by a config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the coordinate small-ball probability.
    Smallball {
        config: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        c0: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Run one experiment per value of a variable.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        var: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The decaying-spectrum example with lambda_k = exp(-k) + epsilon.
    Example31 {
        #[arg(long = "N", default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        c_ratio: f64,
        /// Defaults to the smallest admissible value.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the generated config and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.design.seed = seed;
    }
    Ok(config)
}

fn ranks(cli: &Cli, path: &Path, k: usize, c_small: f64, table: Option<&Path>) -> Result<()> {
    let spectrum = Spectrum::load(path)?;
    let profile = spectrum.rank_profile(k, c_small)?;
    let check = spectrum.stable_rank_lower_bound_check(k)?;
    if let Some(out) = table {
        let mut csv = String::from("k,r_k,R_k,R_k2,frak_R_k\n");
        for p in spectrum.rank_profiles(c_small)?.into_iter().flatten() {
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                p.k, p.r_k, p.big_r_k, p.r_k2, p.frak_r_k
            ));
        }
        std::fs::write(out, csv).map_err(|e| Error::io(out, e))?;
    }
    if cli.json {
        return print(&serde_json::json!({
            "p": spectrum.dim(),
            "trace": spectrum.trace(),
            "c0": compute_c0(&spectrum),
            "profile": profile,
            "stable_rank_check": check,
        }));
    }
    println!("p = {}, tr = {:.6}, c0 = {:.4}", spectrum.dim(), spectrum.trace(), compute_c0(&spectrum));
    println!(
        "k = {}: r_k = {:.6}, R_k = {:.6}, srank4(sqrt) = {:.6}, srank4 = {:.6}, R_k2 = {:.6}, frak_R_k = {:.6e}",
        k, profile.r_k, profile.big_r_k, profile.srank4_sqrt, profile.srank4, profile.r_k2, profile.frak_r_k
    );
    println!(
        "stable rank check: {:.6} >= {:.6} -> {} (floor met: {}, k admissible: {})",
        check.lhs, check.rhs, check.holds, check.floor_met, check.k_admissible
    );
    Ok(())
}

fn bounds(cli: &Cli, path: &Path, table: bool) -> Result<()> {
    let config = load_config(path, cli.seed)?;
    let report = config.bound_report()?;
    if table {
        print!("{}", report.per_k_csv());
    } else if cli.json {
        print(&report)?;
    } else {
        let k = match report.k_star {
            KStar::Finite(k) => k.to_string(),
            KStar::Infinite => "inf".into(),
        };
        println!("N = {}, p = {}, tr = {:.6}, c0 = {}", report.n, report.p, report.trace, report.c0);
        println!("k* = {k} (reference k = {}, frak_R = {:.3e}, radicand = {:.6})", report.reference_k, report.frak_r_ref, report.radicand);
        match report.nu {
            Some(nu) => println!("nu = {nu:.6}, probability floor = {:.6}", report.probability_floor),
            None => println!("nu undefined, probability floor = 0"),
        }
        println!("rho = {:.6}, r* = {:.6}, s_min bound = {:.6}", report.rho, report.r_star, report.s_min_bound);
        println!("operator norm bound = {:.6}", report.operator_norm_bound);
        println!(
            "DM: applicable = {}, s_min >= {:.6}, estimation <= {:.6}",
            report.dm_applicable, report.dm_s_min_bound, report.dm_estimation_bound
        );
        for d in &report.diagnostics {
            println!("note: {d}");
        }
    }
    if report.k_star == KStar::Infinite {
        return Err(Error::InfiniteKStar);
    }
    Ok(())
}

fn simulate(cli: &Cli, mut config: ExperimentConfig, trials: Option<usize>, out: Option<&Path>) -> Result<()> {
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(dir) = out {
        config.outputs = Outputs::in_dir(dir);
    }
    let run = run_experiment(&config)?;
    let written = emit_outputs(&run, &config)?;
    if cli.json {
        return print(&serde_json::json!({ "bound_report": run.report, "summary": run.summary }));
    }
    let s = &run.summary;
    println!("trials: {} completed, {} failed", s.completed, s.failed);
    println!("rho = {:.6}, r* = {:.6}, target coverage = {:.3}", run.report.rho, run.report.r_star, s.coverage_target);
    println!("coverage(rho) = {:.3}, coverage(r*) = {:.3}, exclusion = {:.3}", s.coverage_rho, s.coverage_r_star, s.coverage_exclusion);
    println!(
        "mean estimation error = {:.6}, mean prediction error = {:.6}, mean s_min = {:.6}",
        s.mean_estimation_error, s.mean_prediction_error, s.mean_s_min
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ranks { spectrum, k, c_small, table } => ranks(cli, spectrum, *k, *c_small, table.as_deref()),
        Command::Bounds { config, table } => bounds(cli, config, *table),
        Command::Simulate { config, trials, out } => {
            simulate(cli, load_config(config, cli.seed)?, *trials, out.as_deref())
        }
        Command::Smallball { config, epsilon, c0, trials } => {
            let mut design = load_design(config)?;
            if let Some(seed) = cli.seed {
                design.seed = seed;
            }
            let est = estimate_coordinate_smallball_prob(&design, *epsilon, *c0, *trials)?;
            if cli.json {
                return print(&est);
            }
            println!("P(count <= c0 p) = {:.6} +/- {:.6} ({} trials)", est.value, est.stderr, est.trials);
            Ok(())
        }
        Command::Sweep { config, var, values, out } => {
            let base = load_config(config, cli.seed)?;
            let var_kind: SweepVar = var.parse()?;
            let points = sweep(&base, var_kind, values)?;
            if let Some(dir) = out {
                emit_sweep_outputs(&points, var, dir)?;
            }
            if cli.json {
                return print(&points);
            }
            println!("{var:>12} {:>12} {:>12} {:>10} {:>10} {:>14}", "rho", "r*", "cov(rho)", "cov(r*)", "mean pred err");
            for p in &points {
                match &p.summary {
                    Some(s) => println!(
                        "{:>12} {:>12.4} {:>12.4} {:>10.3} {:>10.3} {:>14.6}",
                        p.value,
                        p.rho.unwrap_or(f64::NAN),
                        p.r_star.unwrap_or(f64::NAN),
                        s.coverage_rho,
                        s.coverage_r_star,
                        s.mean_prediction_error
                    ),
                    None => println!("{:>12} failed: {}", p.value, p.error.as_deref().unwrap_or("")),
                }
            }
            Ok(())
        }
        Command::Example31 { n, epsilon, c_ratio, snr, trials, out, print_config } => {
            let snr = match snr {
                Some(s) => *s,
                None => {
                    let p = benign_core::spectra::make_example_spectrum(*n, *epsilon, *c_ratio)?.dim();
                    benign_core::harness::snr_floor(p, *epsilon)
                }
            };
            let mut config = preset_example_31(*n, *epsilon, *c_ratio, snr)?;
            if let Some(seed) = cli.seed {
                config.design.seed = seed;
            }
            if *print_config {
                return print(&config);
            }
            simulate(cli, config, *trials, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`benign ... | head`) instead of panicking.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
