//! Monte Carlo estimators. Trial `t` always draws from stream `t` of the
//! given seed, so results do not depend on thread scheduling.

use std::time::Instant;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{coordinate_smallball_count, DesignSpec, MIN_PROBABILITY_TRIALS};
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::interpolator::{design_singular_values, sigma_norm, RegressionInstance, PINV_RCOND};
use crate::rng;
use crate::spectra::Spectrum;

pub const MIN_SMIN_TRIALS: usize = 100;
pub const DEFAULT_CANDIDATES: usize = 512;

/// Tolerance of the dual search in the width estimator.
const DUAL_TOL: f64 = 1e-8;
const DUAL_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    pub elapsed_ms: u64,
}

impl MCEstimate {
    fn from_samples(samples: &[f64], seed: u64, start: Instant) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MCEstimate {
            value: mean,
            stderr: (var / n).sqrt(),
            trials: samples.len(),
            seed,
            elapsed_ms: start.elapsed().as_millis() as u64,
        }
    }

    fn from_hits(hits: usize, trials: usize, seed: u64, start: Instant) -> Self {
        let p = hits as f64 / trials as f64;
        MCEstimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            seed,
            elapsed_ms: start.elapsed().as_millis() as u64,
        }
    }
}

/// Frequency of rows with at most `c₀p` coordinates clearing `ε√(tr Σ/p)`.
pub fn estimate_coordinate_smallball_prob(
    spec: &DesignSpec,
    epsilon: f64,
    c0: f64,
    trials: usize,
) -> Result<MCEstimate> {
    if trials < MIN_PROBABILITY_TRIALS {
        return Err(Error::InsufficientTrials {
            trials,
            min: MIN_PROBABILITY_TRIALS,
        });
    }
    check_open_unit("epsilon", epsilon)?;
    if !(0.0..=1.0).contains(&c0) {
        return Err(Error::InvalidParameter {
            name: "c0",
            value: c0,
            expected: "a value in [0, 1]",
        });
    }
    let start = Instant::now();
    let sampler = spec.family.sampler()?;
    let scale: Vec<f64> = spec.spectrum.eigenvalues().iter().map(|v| v.sqrt()).collect();
    let limit = c0 * spec.dim() as f64;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(spec.seed, t as u64);
            let row: Vec<f64> = scale.iter().map(|s| s * sampler.sample(&mut rng)).collect();
            coordinate_smallball_count(&row, &spec.spectrum, epsilon).map(|c| (c as f64 <= limit) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(MCEstimate::from_hits(hits, trials, spec.seed, start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SminDistribution {
    pub q01: f64,
    pub q05: f64,
    pub q50: f64,
    pub bound: f64,
    /// Fraction of all trials with `s_min ≥ bound`.
    pub exceed_rate: f64,
    pub rank_deficient: usize,
    pub trials: usize,
    pub seed: u64,
    pub samples: Vec<f64>,
}

/// Empirical distribution of `s_min(X)` for `N × p` designs.
pub fn estimate_smin_distribution(
    spec: &DesignSpec,
    n: usize,
    trials: usize,
    bound: f64,
) -> Result<SminDistribution> {
    let p = spec.dim();
    if n == 0 || n >= p {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n as f64,
            expected: "1 <= N < p",
        });
    }
    if trials < MIN_SMIN_TRIALS {
        return Err(Error::InsufficientTrials {
            trials,
            min: MIN_SMIN_TRIALS,
        });
    }
    let draws: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = spec.sample_with(n, &mut rng::stream(spec.seed, t as u64))?;
            let s = design_singular_values(&x);
            let s_min = s[n - 1];
            Ok((s_min, s_min <= PINV_RCOND * s[0]))
        })
        .collect::<Result<_>>()?;
    let rank_deficient = draws.iter().filter(|d| d.1).count();
    let exceed = draws.iter().filter(|d| !d.1 && d.0 >= bound).count();
    let samples: Vec<f64> = draws.iter().filter(|d| !d.1).map(|d| d.0).collect();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(SminDistribution {
        q01: quantile(&sorted, 0.01),
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.50),
        bound,
        exceed_rate: exceed as f64 / trials as f64,
        rank_deficient,
        trials,
        seed: spec.seed,
        samples,
    })
}

/// Linear-interpolation quantile of sorted data; NaN when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q * (len - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 >= len {
                sorted[len - 1]
            } else {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            }
        }
    }
}

/// `sup ⟨a, α⟩` over `‖α‖ ≤ ρ`, `Σ λ_i α_i² ≤ r²` where `a_i = √λ_i g_i`.
///
/// For `w ∈ [0, 1]` the set lies inside `{αᵀ M_w α ≤ 1}` with
/// `M_w = (1−w)I/ρ² + wΛ/r²`, and the supremum equals
/// `min_w √(aᵀ M_w⁻¹ a)`. The objective is convex in `w`; a coarse grid
/// locates the minimum and bisection on the derivative refines it.
pub fn localized_sup(eigenvalues: &[f64], g: &[f64], rho: f64, r: f64, grid: usize) -> Option<f64> {
    let terms: Vec<(f64, f64)> = eigenvalues
        .iter()
        .zip(g)
        .map(|(l, gi)| (l * gi * gi, *l))
        .filter(|(a2, _)| *a2 > 0.0)
        .collect();
    if terms.is_empty() {
        return Some(0.0);
    }
    if r.is_infinite() && rho.is_infinite() {
        return Some(f64::INFINITY);
    }
    let inv_rho2 = if rho.is_infinite() { 0.0 } else { 1.0 / (rho * rho) };
    let inv_r2 = if r.is_infinite() { 0.0 } else { 1.0 / (r * r) };
    if r.is_infinite() {
        return Some((terms.iter().map(|t| t.0).sum::<f64>() / inv_rho2).sqrt());
    }
    if rho.is_infinite() {
        return Some((terms.iter().map(|(a2, l)| a2 / (l * inv_r2)).sum::<f64>()).sqrt());
    }
    let phi = |w: f64| -> f64 {
        terms
            .iter()
            .map(|(a2, l)| a2 / ((1.0 - w) * inv_rho2 + w * l * inv_r2))
            .sum()
    };
    let dphi = |w: f64| -> f64 {
        terms
            .iter()
            .map(|(a2, l)| {
                let d = (1.0 - w) * inv_rho2 + w * l * inv_r2;
                -a2 * (l * inv_r2 - inv_rho2) / (d * d)
            })
            .sum()
    };
    let grid = grid.max(2);
    let (mut best_j, mut best) = (0usize, phi(0.0));
    for j in 1..=grid {
        let v = phi(j as f64 / grid as f64);
        if v < best {
            best = v;
            best_j = j;
        }
    }
    let mut lo = best_j.saturating_sub(1) as f64 / grid as f64;
    let mut hi = (best_j + 1).min(grid) as f64 / grid as f64;
    let mut iter = 0;
    while hi - lo > DUAL_TOL {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
        if iter > DUAL_MAX_ITER {
            return None;
        }
    }
    let refined = phi(0.5 * (lo + hi));
    let value = best.min(refined);
    value.is_finite().then(|| value.max(0.0).sqrt())
}

/// Monte Carlo mean of `sup_{α ∈ H_{r,ρ}} ⟨g, Σ^{1/2}α⟩`.
pub fn estimate_gaussian_width(
    spectrum: &Spectrum,
    rho: f64,
    r: f64,
    trials: usize,
    inner_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            expected: "rho > 0",
        });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            expected: "r > 0",
        });
    }
    if trials < 2 {
        return Err(Error::InsufficientTrials { trials, min: 2 });
    }
    let start = Instant::now();
    let eig = spectrum.eigenvalues();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let g: Vec<f64> = (0..eig.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            localized_sup(eig, &g, rho, r, inner_samples)
                .ok_or(Error::InnerSolverNonconvergence { trial: t })
        })
        .collect::<Result<_>>()?;
    Ok(MCEstimate::from_samples(&samples, seed, start))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suprema {
    pub q_sup: f64,
    pub m_sup: f64,
}

/// Maxima of the quadratic and multiplier processes over candidate `α`s.
pub fn empirical_process_suprema(
    instance: &RegressionInstance,
    candidates: &[DVector<f64>],
    spectrum: &Spectrum,
    r: f64,
    rho: f64,
) -> Result<Suprema> {
    check_positive("r", r)?;
    check_positive("rho", rho)?;
    let n = instance.n() as f64;
    let slack = 1.0 + 1e-9;
    let mut sup = Suprema {
        q_sup: 0.0,
        m_sup: 0.0,
    };
    for (index, alpha) in candidates.iter().enumerate() {
        if alpha.len() != instance.p() {
            return Err(Error::DimensionMismatch {
                expected: instance.p(),
                found: alpha.len(),
            });
        }
        let h = alpha - &instance.alpha_star;
        let pop = sigma_norm(&h, spectrum)?;
        if h.norm() > rho * slack || pop > r * slack {
            return Err(Error::CandidateOutsideLocalization { index });
        }
        let xh = &instance.design * &h;
        let q = (xh.norm_squared() / n - pop * pop).abs();
        let m = (2.0 * instance.noise.dot(&xh) / n).abs();
        sup.q_sup = sup.q_sup.max(q);
        sup.m_sup = sup.m_sup.max(m);
    }
    Ok(sup)
}

/// Points `α* + h` with `h` on the boundary of `B(ρ) ∩ B_Σ(r)`, along
/// random gaussian directions.
pub fn boundary_candidates(
    alpha_star: &DVector<f64>,
    spectrum: &Spectrum,
    r: f64,
    rho: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    check_positive("r", r)?;
    check_positive("rho", rho)?;
    let p = spectrum.dim();
    if alpha_star.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: alpha_star.len(),
        });
    }
    (0..count)
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let u = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let sn = sigma_norm(&u, spectrum)?;
            let scale = if sn > 0.0 {
                (rho / u.norm()).min(r / sn)
            } else {
                rho / u.norm()
            };
            Ok(alpha_star + u * scale)
        })
        .collect()
}
