//! Random designs `X = Σ^{1/2} Z` and the distributional hypotheses on them.
//!
//! `Z` has independent, centered, unit-variance coordinates drawn from one
//! of a few families. Rows are generated in the eigenbasis of `Σ`, so
//! `Σ^{1/2}` is the diagonal `√λ_i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::rng;
use crate::spectra::Spectrum;

/// Fewest Monte Carlo trials accepted by the probability estimators.
pub const MIN_PROBABILITY_TRIALS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian,
    Rademacher,
    /// Student-t with `df > 2` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
    /// Symmetric exponential (Laplace), rescaled to unit variance.
    ExponentialSymmetric,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Rademacher => "rademacher",
            Family::StudentT { .. } => "student_t",
            Family::ExponentialSymmetric => "exponential_symmetric",
        }
    }

    pub fn df(&self) -> Option<f64> {
        match self {
            Family::StudentT { df } => Some(*df),
            _ => None,
        }
    }

    pub fn from_parts(name: &str, df: Option<f64>) -> Result<Self> {
        let family = match name {
            "gaussian" => Family::Gaussian,
            "rademacher" => Family::Rademacher,
            "student_t" => Family::StudentT {
                df: df.unwrap_or(3.0),
            },
            "exponential_symmetric" => Family::ExponentialSymmetric,
            other => return Err(Error::Config(format!("unknown design family {other:?}"))),
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Family::StudentT { df } if !(*df > 2.0 && df.is_finite()) => {
                Err(Error::InvalidParameter {
                    name: "df",
                    value: *df,
                    expected: "df > 2 so that coordinates have unit variance",
                })
            }
            _ => Ok(()),
        }
    }

    /// True when the family lacks sub-gaussian tails.
    pub fn is_heavy_tailed(&self) -> bool {
        matches!(self, Family::StudentT { .. })
    }

    pub fn sampler(&self) -> Result<CoordinateSampler> {
        self.validate()?;
        Ok(match *self {
            Family::Gaussian => CoordinateSampler::Gaussian,
            Family::Rademacher => CoordinateSampler::Rademacher,
            Family::StudentT { df } => CoordinateSampler::StudentT {
                dist: StudentT::new(df).map_err(|e| Error::Config(e.to_string()))?,
                scale: ((df - 2.0) / df).sqrt(),
            },
            Family::ExponentialSymmetric => CoordinateSampler::Laplace,
        })
    }
}

/// Draws single isotropic coordinates for a [`Family`].
#[derive(Debug, Clone, Copy)]
pub enum CoordinateSampler {
    Gaussian,
    Rademacher,
    StudentT { dist: StudentT<f64>, scale: f64 },
    Laplace,
}

impl CoordinateSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CoordinateSampler::Gaussian => StandardNormal.sample(rng),
            CoordinateSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoordinateSampler::StudentT { dist, scale } => dist.sample(rng) * scale,
            CoordinateSampler::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    pub fn sample_vec<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        (0..len).map(|_| self.sample(rng)).collect()
    }
}

/// Recipe for design rows `X_i = Σ^{1/2} Z_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignSpecRepr", into = "DesignSpecRepr")]
pub struct DesignSpec {
    pub spectrum: Spectrum,
    pub family: Family,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DesignSpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    df: Option<f64>,
    seed: u64,
    spectrum: Spectrum,
}

impl TryFrom<DesignSpecRepr> for DesignSpec {
    type Error = Error;

    fn try_from(r: DesignSpecRepr) -> Result<Self> {
        Ok(DesignSpec {
            family: Family::from_parts(&r.family, r.df)?,
            seed: r.seed,
            spectrum: r.spectrum,
        })
    }
}

impl From<DesignSpec> for DesignSpecRepr {
    fn from(d: DesignSpec) -> Self {
        DesignSpecRepr {
            family: d.family.name().to_string(),
            df: d.family.df(),
            seed: d.seed,
            spectrum: d.spectrum,
        }
    }
}

impl DesignSpec {
    pub fn new(spectrum: Spectrum, family: Family, seed: u64) -> Result<Self> {
        family.validate()?;
        Ok(DesignSpec {
            spectrum,
            family,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    fn sqrt_eigenvalues(&self) -> Vec<f64> {
        self.spectrum.eigenvalues().iter().map(|v| v.sqrt()).collect()
    }

    /// Samples an `n × p` design from an explicit stream. Entries are drawn
    /// row by row, coordinate by coordinate.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let sampler = self.family.sampler()?;
        let scale = self.sqrt_eigenvalues();
        let p = scale.len();
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            for (j, s) in scale.iter().enumerate() {
                x[(i, j)] = s * sampler.sample(rng);
            }
        }
        Ok(x)
    }
}

/// Samples an `n × p` design from stream 0 of the spec's seed.
pub fn sample_design(spec: &DesignSpec, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            expected: "at least one row",
        });
    }
    spec.sample_with(n, &mut rng::stream(spec.seed, 0))
}

/// Small-ball constants: `𝓛`, `κ` of the weak small-ball assumption and
/// `δ₁`, `δ₂`, `c₀` of the moment condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallParams {
    #[serde(rename = "L")]
    pub l_const: f64,
    pub kappa: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub c0: f64,
}

impl SmallBallParams {
    pub fn new(l_const: f64, kappa: f64, delta1: f64, delta2: f64, c0: f64) -> Result<Self> {
        check_positive("L", l_const)?;
        check_positive("kappa", kappa)?;
        check_positive("delta1", delta1)?;
        if !(delta2 >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta2",
                value: delta2,
                expected: "delta2 >= 1",
            });
        }
        if !(c0 > 0.0 && c0 <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "c0",
                value: c0,
                expected: "a value in (0, 1]",
            });
        }
        Ok(SmallBallParams {
            l_const,
            kappa,
            delta1,
            delta2,
            c0,
        })
    }

    /// `(𝓛κ)^k`, the small-ball envelope for a `k`-dimensional projection.
    pub fn envelope(&self, k: usize) -> f64 {
        (self.l_const * self.kappa).powi(k as i32)
    }

    pub fn is_nontrivial(&self) -> bool {
        self.l_const * self.kappa < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaleyZygmundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `((1/p) Σ ‖Σ^{1/2}e_i‖^{2+δ₁})^{1/(2+δ₁)} ≤ δ₂ √(tr(Σ)/p)` in the eigenbasis.
pub fn check_paley_zygmund(
    spectrum: &Spectrum,
    delta1: f64,
    delta2: f64,
) -> Result<PaleyZygmundCheck> {
    check_positive("delta1", delta1)?;
    if !(delta2 >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta2",
            value: delta2,
            expected: "delta2 >= 1",
        });
    }
    let p = spectrum.dim() as f64;
    let power = 2.0 + delta1;
    let mean: f64 = spectrum
        .eigenvalues()
        .iter()
        .map(|v| v.powf(power / 2.0))
        .sum::<f64>()
        / p;
    let lhs = mean.powf(1.0 / power);
    let rhs = delta2 * (spectrum.trace() / p).sqrt();
    Ok(PaleyZygmundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Fraction of eigen-coordinates with `λ_i ≥ tr(Σ)/(2p)`.
pub fn compute_c0(spectrum: &Spectrum) -> f64 {
    let p = spectrum.dim();
    let floor = spectrum.trace() / (2.0 * p as f64);
    let passing = spectrum.eigenvalues().iter().filter(|v| **v >= floor).count();
    passing as f64 / p as f64
}

/// Number of coordinates of `row` with `|row_i| ≥ ε √(tr(Σ)/p)`.
pub fn coordinate_smallball_count(row: &[f64], spectrum: &Spectrum, epsilon: f64) -> Result<usize> {
    if row.len() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            found: row.len(),
        });
    }
    check_open_unit("epsilon", epsilon)?;
    let threshold = epsilon * (spectrum.trace() / spectrum.dim() as f64).sqrt();
    Ok(row.iter().filter(|v| v.abs() >= threshold).count())
}

/// Subspace on which the small-ball probability is probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// Span of the first `k` eigen-coordinates.
    Leading,
    /// A seeded, uniformly random `k`-dimensional subspace.
    RandomOrthogonal { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl ProbabilityEstimate {
    pub fn from_hits(hits: usize, trials: usize) -> Self {
        let p_hat = hits as f64 / trials as f64;
        ProbabilityEstimate {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// Monte Carlo frequency of `‖P_F Z − z‖ ≤ κ√k` over the isotropic factor `Z`.
pub fn estimate_wsba(
    spec: &DesignSpec,
    subspace_dim: usize,
    kappa: f64,
    shift: &[f64],
    trials: usize,
    subspace: Subspace,
) -> Result<ProbabilityEstimate> {
    let p = spec.dim();
    if subspace_dim == 0 || subspace_dim >= p {
        return Err(Error::InvalidParameter {
            name: "subspace_dim",
            value: subspace_dim as f64,
            expected: "1 <= k <= p - 1",
        });
    }
    if shift.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: shift.len(),
        });
    }
    if trials < MIN_PROBABILITY_TRIALS {
        return Err(Error::InsufficientTrials {
            trials,
            min: MIN_PROBABILITY_TRIALS,
        });
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            expected: "kappa > 0",
        });
    }
    let sampler = spec.family.sampler()?;
    let radius = kappa * (subspace_dim as f64).sqrt();
    let basis = match subspace {
        Subspace::Leading => None,
        Subspace::RandomOrthogonal { seed } => Some(random_orthonormal(p, subspace_dim, seed)),
    };
    let shift_v = DVector::from_column_slice(shift);
    let mut hits = 0usize;
    for t in 0..trials {
        let mut rng = rng::stream(spec.seed, t as u64);
        let z = sampler.sample_vec(p, &mut rng);
        let dist = match &basis {
            None => leading_projection_distance(&z, shift, subspace_dim),
            Some(q) => {
                let z = DVector::from_vec(z);
                let proj = q * (q.transpose() * z);
                (proj - &shift_v).norm()
            }
        };
        if dist <= radius {
            hits += 1;
        }
    }
    Ok(ProbabilityEstimate::from_hits(hits, trials))
}

fn leading_projection_distance(z: &[f64], shift: &[f64], k: usize) -> f64 {
    let inside: f64 = z[..k]
        .iter()
        .zip(&shift[..k])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let outside: f64 = shift[k..].iter().map(|b| b * b).sum();
    (inside + outside).sqrt()
}

fn random_orthonormal(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, rng::SHARED_STREAM);
    let g = DMatrix::from_fn(p, k, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}
