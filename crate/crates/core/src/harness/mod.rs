//! Experiment orchestration: configs, presets, trial loops and sweeps.

mod output;
pub mod svg;

use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundConfig, BoundInputs, BoundReport};
use crate::designs::{check_paley_zygmund, DesignSpec, Family};
use crate::error::{Error, Result};
use crate::interpolator::{
    estimation_error, exclusion_event_check, min_norm_interpolate, prediction_error,
    RegressionInstance,
};
use crate::rng;
use crate::spectra::make_example_spectrum;

pub use output::{emit_outputs, emit_sweep_outputs, records_to_csv, RunDocument, CSV_HEADER};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaStar {
    UnitFirstCoordinate {
        #[serde(default = "one")]
        scale: f64,
    },
    RandomUnit {
        #[serde(default = "one")]
        scale: f64,
        seed: u64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl AlphaStar {
    pub fn materialize(&self, p: usize) -> Result<DVector<f64>> {
        match self {
            AlphaStar::UnitFirstCoordinate { scale } => {
                let mut a = DVector::zeros(p);
                a[0] = *scale;
                Ok(a)
            }
            AlphaStar::RandomUnit { scale, seed } => {
                let mut rng = rng::stream(*seed, rng::SHARED_STREAM);
                let g = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                Ok(g.normalize() * *scale)
            }
            AlphaStar::Explicit { values } => {
                if values.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: values.len(),
                    });
                }
                Ok(DVector::from_column_slice(values))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma: f64,
    /// Declared `‖ξ‖_{ψ₂}`; gaussian noise with standard deviation σ uses σ.
    pub psi2: f64,
}

impl NoiseSpec {
    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(n, |_, _| {
            let z: f64 = match self.family {
                NoiseFamily::Gaussian => StandardNormal.sample(rng),
                NoiseFamily::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            self.sigma * z
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_dir: Option<PathBuf>,
}

impl Outputs {
    /// `trials.csv`, `run.json` and `plots/` under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Outputs {
            csv_path: Some(dir.join("trials.csv")),
            json_path: Some(dir.join("run.json")),
            plot_dir: Some(dir.join("plots")),
        }
    }
}

/// Parameters of the decaying-spectrum preset, kept so a sweep over `N`
/// can rebuild the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example31 {
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub c_ratio: f64,
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha_star: AlphaStar,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub bound_config: BoundConfig,
    pub trials: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example31: Option<Example31>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if self.n >= self.design.dim() {
            return Err(Error::Config(format!(
                "N = {} must be below p = {} for interpolation",
                self.n,
                self.design.dim()
            )));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Config("noise sigma must be finite and >= 0".into()));
        }
        if self.noise.sigma > 0.0 && !(self.noise.psi2 > 0.0) {
            return Err(Error::Config("noise psi2 must be positive when sigma > 0".into()));
        }
        self.design.family.validate()?;
        self.bound_config.validate()?;
        self.alpha_star.materialize(self.design.dim())?;
        Ok(())
    }

    pub fn bound_report(&self) -> Result<BoundReport> {
        let alpha = self.alpha_star.materialize(self.design.dim())?;
        BoundReport::evaluate(
            &BoundInputs {
                spectrum: &self.design.spectrum,
                n: self.n,
                alpha_star_norm: alpha.norm(),
                noise_psi2: self.noise.psi2,
                heavy_tailed: self.design.family.is_heavy_tailed(),
            },
            &self.bound_config,
        )
    }
}

/// One Monte Carlo trial. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub estimation_error: f64,
    pub prediction_error: f64,
    pub s_min_empirical: f64,
    pub excess_risk_at_interpolant: f64,
    pub exclusion_ok: bool,
    pub within_rho: bool,
    pub within_r_star: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub coverage_rho: f64,
    pub coverage_r_star: f64,
    pub coverage_exclusion: f64,
    /// `max(0.9, probability_floor)`.
    pub coverage_target: f64,
    pub probability_floor: f64,
    pub meets_target_rho: bool,
    pub meets_target_r_star: bool,
    pub mean_estimation_error: f64,
    pub mean_prediction_error: f64,
    pub mean_prediction_error_sq: f64,
    pub max_prediction_error: f64,
    pub mean_s_min: f64,
    pub s_min_bound_exceed_rate: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: BoundReport,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn run_trial(
    config: &ExperimentConfig,
    alpha_star: &DVector<f64>,
    report: &BoundReport,
    t: usize,
) -> Result<TrialRecord> {
    let mut rng = rng::stream(config.design.seed, t as u64);
    let x = config.design.sample_with(config.n, &mut rng)?;
    let noise = config.noise.sample(config.n, &mut rng);
    let instance = RegressionInstance::new(x, alpha_star.clone(), noise, config.noise.psi2)?;
    let result = min_norm_interpolate(&instance)?;
    let est = estimation_error(&result, &instance);
    let pred = prediction_error(&result, &instance, &config.design.spectrum)?;
    let excl = exclusion_event_check(&instance);
    Ok(TrialRecord {
        trial_index: t,
        estimation_error: est,
        prediction_error: pred,
        s_min_empirical: result.s_min,
        excess_risk_at_interpolant: excl.excess_at_interpolant,
        exclusion_ok: excl.excluded,
        within_rho: est <= report.rho,
        within_r_star: pred <= report.r_star,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let report = config.bound_report()?;
    let alpha_star = config.alpha_star.materialize(config.design.dim())?;
    info!(
        "running {} trials: N = {}, p = {}, family = {}",
        config.trials,
        config.n,
        config.design.dim(),
        config.design.family.name()
    );
    let outcomes: Vec<Result<TrialRecord>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &alpha_star, &report, t))
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                warn!("trial {t} failed: {e}");
                failures.push(format!("trial {t}: {e}"));
            }
        }
    }
    if 2 * failures.len() > config.trials {
        return Err(Error::TooManyFailedTrials {
            failed: failures.len(),
            total: config.trials,
        });
    }
    let summary = summarize(&records, &report, config.trials, failures);
    Ok(ExperimentRun {
        report,
        records,
        summary,
    })
}

/// Coverage and error statistics; rates are fractions of `records`.
pub fn summarize(
    records: &[TrialRecord],
    report: &BoundReport,
    trials: usize,
    failures: Vec<String>,
) -> Summary {
    let n = records.len() as f64;
    let rate = |f: &dyn Fn(&TrialRecord) -> bool| {
        if records.is_empty() {
            f64::NAN
        } else {
            records.iter().filter(|r| f(r)).count() as f64 / n
        }
    };
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
        if records.is_empty() {
            f64::NAN
        } else {
            records.iter().map(f).sum::<f64>() / n
        }
    };
    let coverage_target = report.probability_floor.max(0.9);
    let coverage_rho = rate(&|r| r.within_rho);
    let coverage_r_star = rate(&|r| r.within_r_star);
    Summary {
        trials,
        completed: records.len(),
        failed: failures.len(),
        coverage_rho,
        coverage_r_star,
        coverage_exclusion: rate(&|r| r.exclusion_ok),
        coverage_target,
        probability_floor: report.probability_floor,
        meets_target_rho: coverage_rho >= coverage_target,
        meets_target_r_star: coverage_r_star >= coverage_target,
        mean_estimation_error: mean(&|r| r.estimation_error),
        mean_prediction_error: mean(&|r| r.prediction_error),
        mean_prediction_error_sq: mean(&|r| r.prediction_error * r.prediction_error),
        max_prediction_error: records
            .iter()
            .map(|r| r.prediction_error)
            .fold(f64::NAN, f64::max),
        mean_s_min: mean(&|r| r.s_min_empirical),
        s_min_bound_exceed_rate: rate(&|r| r.s_min_empirical >= report.s_min_bound),
        failures,
    }
}

/// `√(p/(pε + 1))`, the smallest admissible signal-to-noise ratio.
pub fn snr_floor(p: usize, epsilon: f64) -> f64 {
    let p = p as f64;
    (p / (p * epsilon + 1.0)).sqrt()
}

/// The decaying spectrum `λ_k = e^{−k} + ε` with a gaussian design,
/// `α* = snr·e₁` and unit gaussian noise.
pub fn preset_example_31(n: usize, epsilon: f64, c_ratio: f64, snr: f64) -> Result<ExperimentConfig> {
    let spectrum = make_example_spectrum(n, epsilon, c_ratio)?;
    let p = spectrum.dim();
    let floor = snr_floor(p, epsilon);
    if !(snr >= floor) {
        return Err(Error::SnrTooSmall { snr, floor });
    }
    let pz = check_paley_zygmund(&spectrum, 2.0, (1.0 + 1.0 / epsilon).sqrt())?;
    if !pz.holds {
        return Err(Error::PreconditionViolated(format!(
            "moment condition fails: {} > {}",
            pz.lhs, pz.rhs
        )));
    }
    Ok(ExperimentConfig {
        design: DesignSpec::new(spectrum, Family::Gaussian, 0)?,
        n,
        alpha_star: AlphaStar::UnitFirstCoordinate { scale: snr },
        noise: NoiseSpec {
            family: NoiseFamily::Gaussian,
            sigma: 1.0,
            psi2: 1.0,
        },
        bound_config: BoundConfig::default(),
        trials: 100,
        outputs: Outputs::default(),
        example31: Some(Example31 {
            n,
            epsilon,
            c_ratio,
            snr,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "df")]
    Df,
    #[serde(rename = "trace_scale")]
    TraceScale,
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(SweepVar::N),
            "epsilon" => Ok(SweepVar::Epsilon),
            "df" => Ok(SweepVar::Df),
            "trace_scale" => Ok(SweepVar::TraceScale),
            other => Err(Error::Config(format!("unknown sweep variable {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub rho: Option<f64>,
    pub r_star: Option<f64>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

/// The config for one sweep value.
pub fn sweep_config(base: &ExperimentConfig, var: SweepVar, value: f64) -> Result<ExperimentConfig> {
    let mut config = base.clone();
    match var {
        SweepVar::N => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config(format!("N = {value} is not a positive integer")));
            }
            let n = value as usize;
            if let Some(ex) = base.example31 {
                let preset = preset_example_31(n, ex.epsilon, ex.c_ratio, ex.snr)?;
                config.design.spectrum = preset.design.spectrum;
                config.example31 = preset.example31;
                config.alpha_star = match &base.alpha_star {
                    AlphaStar::Explicit { .. } => preset.alpha_star,
                    other => other.clone(),
                };
            }
            config.n = n;
        }
        SweepVar::Epsilon => config.bound_config.epsilon = value,
        SweepVar::Df => config.design.family = Family::StudentT { df: value },
        SweepVar::TraceScale => {
            config.design.spectrum = base.design.spectrum.scaled(value)?;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Runs one experiment per value; failures are recorded and the sweep
/// continues.
pub fn sweep(base: &ExperimentConfig, var: SweepVar, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    Ok(values
        .iter()
        .map(|&value| match sweep_config(base, var, value).and_then(|c| run_experiment(&c)) {
            Ok(run) => SweepPoint {
                value,
                rho: Some(run.report.rho),
                r_star: Some(run.report.r_star),
                summary: Some(run.summary),
                error: None,
            },
            Err(e) => {
                warn!("sweep value {value} failed: {e}");
                SweepPoint {
                    value,
                    rho: None,
                    r_star: None,
                    summary: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect())
}

/// Reads a design recipe from either a full experiment config or a bare
/// design spec.
pub fn load_design(path: &Path) -> Result<DesignSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("design").is_some() {
        Ok(serde_json::from_value::<ExperimentConfig>(value)?.design)
    } else {
        Ok(serde_json::from_value(value)?)
    }
}
