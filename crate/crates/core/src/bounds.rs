//! Closed-form bound parameters: `k*`, `ν`, `ρ`, `r*`, the smallest
//! singular value bound, and the Dvoretzky–Milman alternative.
//!
//! Every unspecified absolute constant is a named field of [`BoundConfig`]
//! with default 1 unless noted otherwise.

use rand_distr::{Distribution, StandardNormal};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::designs::compute_c0;
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::rng;
use crate::spectra::Spectrum;

/// Relative tolerance of the `r₁*` bisection.
pub const R_STAR_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadicandForm {
    /// `3c₀(1 − 𝔯_k) − 1`.
    ProofFrakR,
    /// `3c₀(1 − c₀) − 1`; never positive, kept for audit.
    StatementC0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthProxy {
    /// `Λ̃ = √(2 tr Σ)`.
    GaussianWidth,
    /// `Λ̃ = √2 · (Monte Carlo mean of ‖Σ^{1/2}g‖)`.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    pub epsilon: f64,
    /// `None` means `compute_c0` of the spectrum.
    pub c0: Option<f64>,
    pub c_small: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub q_moment: f64,
    pub theta: f64,
    pub lambda_width_proxy: WidthProxy,
    pub width_mc_trials: usize,
    pub width_seed: u64,
    pub c1_dm: f64,
    pub c2_dm: f64,
    pub delta_dm: f64,
    /// `C` in the operator norm bound.
    pub c_opnorm: f64,
    /// `c` in the `e^{−cN}` probability term.
    pub c_prob: f64,
    pub radicand_form: RadicandForm,
    /// 2 (statement) or 8 (end of proof) under the square root of the
    /// smallest singular value bound.
    pub smin_divisor: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            epsilon: 0.1,
            c0: None,
            c_small: 0.5,
            zeta1: 1.0,
            zeta2: 0.1,
            q_moment: 4.0,
            theta: 0.5,
            lambda_width_proxy: WidthProxy::GaussianWidth,
            width_mc_trials: 2000,
            width_seed: 0,
            c1_dm: 1.0,
            c2_dm: 1.0,
            delta_dm: 0.25,
            c_opnorm: 1.0,
            c_prob: 1.0,
            radicand_form: RadicandForm::ProofFrakR,
            smin_divisor: 2.0,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_unit("epsilon", self.epsilon)?;
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0 && c0 <= 1.0) {
                return Err(Error::InvalidParameter {
                    name: "c0",
                    value: c0,
                    expected: "a value in (0, 1]",
                });
            }
        }
        check_open_unit("c_small", self.c_small)?;
        check_positive("zeta1", self.zeta1)?;
        if !(self.zeta2 >= 0.0 && self.zeta2.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "zeta2",
                value: self.zeta2,
                expected: "a finite value >= 0",
            });
        }
        if !(self.q_moment >= 2.0 && self.q_moment.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "q_moment",
                value: self.q_moment,
                expected: "q >= 2",
            });
        }
        check_open_unit("theta", self.theta)?;
        if self.width_mc_trials == 0 {
            return Err(Error::InvalidParameter {
                name: "width_mc_trials",
                value: 0.0,
                expected: "at least one trial",
            });
        }
        check_positive("c1_dm", self.c1_dm)?;
        check_positive("c2_dm", self.c2_dm)?;
        check_delta(self.delta_dm)?;
        check_positive("c_opnorm", self.c_opnorm)?;
        check_positive("c_prob", self.c_prob)?;
        if self.smin_divisor != 2.0 && self.smin_divisor != 8.0 {
            return Err(Error::InvalidParameter {
                name: "smin_divisor",
                value: self.smin_divisor,
                expected: "2 or 8",
            });
        }
        Ok(())
    }

    /// `c₀` from the config, or the spectrum's eigenvalue-floor fraction.
    pub fn resolve_c0(&self, spectrum: &Spectrum) -> f64 {
        self.c0.unwrap_or_else(|| compute_c0(spectrum))
    }

    /// The square-root argument shared by `k*`, `ρ` and the `s_min` bound.
    pub fn radicand(&self, frak_r: f64, c0: f64) -> f64 {
        match self.radicand_form {
            RadicandForm::ProofFrakR => 3.0 * c0 * (1.0 - frak_r) - 1.0,
            RadicandForm::StatementC0 => 3.0 * c0 * (1.0 - c0) - 1.0,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthProxies {
    #[serde(rename = "lambda_tilde_D")]
    pub lambda_tilde: f64,
    #[serde(rename = "d_q_D")]
    pub d_q: f64,
}

/// `Λ̃(D)` and `d_q(D)` for the unit-sphere class `D`.
pub fn width_proxies(spectrum: &Spectrum, config: &BoundConfig) -> WidthProxies {
    let lambda_tilde = match config.lambda_width_proxy {
        WidthProxy::GaussianWidth => (2.0 * spectrum.trace()).sqrt(),
        WidthProxy::MonteCarlo => {
            let scale: Vec<f64> = spectrum.eigenvalues().iter().map(|v| v.sqrt()).collect();
            let total: f64 = (0..config.width_mc_trials)
                .map(|t| {
                    let mut rng = rng::stream(config.width_seed, t as u64);
                    scale
                        .iter()
                        .map(|s| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            (s * g).powi(2)
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .sum();
            2f64.sqrt() * total / config.width_mc_trials as f64
        }
    };
    WidthProxies {
        lambda_tilde,
        d_q: (2.0 * config.q_moment * spectrum.top()).sqrt(),
    }
}

/// `d_q·Λ̃/√p + Λ̃²/p + λ₁`, the quantity under the root in `‖Γ‖` and `k*`.
fn complexity_term(spectrum: &Spectrum, proxies: &WidthProxies, c: f64) -> f64 {
    let p = spectrum.dim() as f64;
    c * (proxies.d_q * proxies.lambda_tilde / p.sqrt() + proxies.lambda_tilde.powi(2) / p)
        + spectrum.top()
}

/// `√N·√(C(d_q Λ̃/√p + Λ̃²/p) + λ₁)`, with the Dvoretzky–Milman dimension set to `p`.
pub fn operator_norm_bound(spectrum: &Spectrum, n: usize, config: &BoundConfig) -> f64 {
    let proxies = width_proxies(spectrum, config);
    (n as f64).sqrt() * complexity_term(spectrum, &proxies, config.c_opnorm).sqrt()
}

/// `k*`, possibly infinite. Serialized as an integer or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KStar {
    Finite(usize),
    Infinite,
}

impl KStar {
    pub fn finite(&self) -> Option<usize> {
        match self {
            KStar::Finite(k) => Some(*k),
            KStar::Infinite => None,
        }
    }
}

impl Serialize for KStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KStar::Finite(k) => s.serialize_u64(*k as u64),
            KStar::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for KStar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "inf" => Ok(KStar::Infinite),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|k| KStar::Finite(k as usize))
                .ok_or_else(|| de::Error::custom("k_star must be a non-negative integer")),
            other => Err(de::Error::custom(format!("invalid k_star {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    /// `None` where the radicand is non-positive or `𝔯_k` is undefined.
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    #[serde(rename = "frak_R_k")]
    pub frak_r_k: Option<f64>,
    pub radicand: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarScan {
    pub k_star: KStar,
    pub c0: f64,
    pub table: Vec<KRow>,
}

/// Both sides of the `k*` inequality at a given `𝔯_k`, or `None` when the
/// radicand is not positive.
fn balance(
    spectrum: &Spectrum,
    n: usize,
    frak_r: f64,
    c0: f64,
    complexity: f64,
    config: &BoundConfig,
) -> (f64, Option<(f64, f64)>) {
    let p = spectrum.dim() as f64;
    let radicand = config.radicand(frak_r, c0);
    if !(radicand > 0.0 && frak_r.is_finite()) {
        return (radicand, None);
    }
    let inner = complexity.sqrt() * (p / spectrum.trace()).sqrt() / radicand.sqrt();
    let lhs = p * inner.ln_1p();
    let rhs = n as f64 * (c0 * frak_r + 1.0 - c0) / 2.0 + p.ln();
    (radicand, Some((lhs, rhs)))
}

/// Scans `k = 0..p` for the smallest truncation balancing the two sides.
pub fn find_k_star(spectrum: &Spectrum, n: usize, config: &BoundConfig) -> Result<KStarScan> {
    config.validate()?;
    let c0 = config.resolve_c0(spectrum);
    let complexity = complexity_term(spectrum, &width_proxies(spectrum, config), 1.0);
    let mut k_star = KStar::Infinite;
    let table = spectrum
        .rank_profiles(config.c_small)?
        .into_iter()
        .enumerate()
        .map(|(k, profile)| {
            let Ok(profile) = profile else {
                return KRow {
                    k,
                    lhs: None,
                    rhs: None,
                    frak_r_k: None,
                    radicand: None,
                    feasible: false,
                };
            };
            let frak = profile.frak_r_k;
            let (radicand, sides) = balance(spectrum, n, frak, c0, complexity, config);
            let feasible = matches!(sides, Some((l, r)) if l <= r);
            if feasible && k_star == KStar::Infinite {
                k_star = KStar::Finite(k);
            }
            KRow {
                k,
                lhs: sides.map(|s| s.0),
                rhs: sides.map(|s| s.1),
                frak_r_k: Some(frak),
                radicand: Some(radicand),
                feasible,
            }
        })
        .collect();
    Ok(KStarScan { k_star, c0, table })
}

impl KStarScan {
    /// The truncation used by `ρ` and the `s_min` bound: `k*` when finite,
    /// otherwise the smallest `k` minimizing `𝔯_k`.
    pub fn reference_k(&self) -> Option<(usize, f64)> {
        if let KStar::Finite(k) = self.k_star {
            return Some((k, self.table[k].frak_r_k.expect("feasible rows have frak_R_k")));
        }
        self.table
            .iter()
            .filter_map(|row| row.frak_r_k.filter(|f| f.is_finite()).map(|f| (row.k, f)))
            .fold(None, |best: Option<(usize, f64)>, (k, f)| match best {
                Some((_, bf)) if bf <= f => best,
                _ => Some((k, f)),
            })
    }

    /// The per-k table as CSV with columns `k,lhs,rhs,frak_R_k,feasible`.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.16e}"));
        let mut out = String::from("k,lhs,rhs,frak_R_k,feasible\n");
        for row in &self.table {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.k,
                fmt(row.lhs),
                fmt(row.rhs),
                fmt(row.frak_r_k),
                row.feasible
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nu {
    pub nu: f64,
    pub probability_floor: f64,
}

/// `ν = RHS(k*) − LHS(k*)`, re-evaluated from the rank profile at `k*`.
pub fn compute_nu(spectrum: &Spectrum, n: usize, k_star: KStar, config: &BoundConfig) -> Result<Nu> {
    let k = k_star.finite().ok_or(Error::InfiniteKStar)?;
    config.validate()?;
    let c0 = config.resolve_c0(spectrum);
    let frak = spectrum.rank_profile(k, config.c_small)?.frak_r_k;
    let complexity = complexity_term(spectrum, &width_proxies(spectrum, config), 1.0);
    let (radicand, sides) = balance(spectrum, n, frak, c0, complexity, config);
    let (lhs, rhs) = sides.ok_or(Error::InvalidRadicand(radicand))?;
    let nu = rhs - lhs;
    if nu < -1e-9 * rhs.abs().max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "k = {k} is not feasible: RHS − LHS = {nu}"
        )));
    }
    let nu = nu.max(0.0);
    Ok(Nu {
        nu,
        probability_floor: 1.0 - (-nu).exp() - (-config.c_prob * n as f64).exp(),
    })
}

/// `‖α*‖ + √(2/denom)·√(p/tr Σ)·‖ξ‖_{ψ₂}/ε` with `denom` the configured radicand at `𝔯 = frak_r`.
pub fn compute_rho(
    spectrum: &Spectrum,
    alpha_star_norm: f64,
    noise_psi2: f64,
    frak_r: f64,
    config: &BoundConfig,
) -> Result<f64> {
    let denom = config.radicand(frak_r, config.resolve_c0(spectrum));
    if !(denom > 0.0) {
        return Err(Error::InvalidDenominator(denom));
    }
    let p = spectrum.dim() as f64;
    Ok(alpha_star_norm
        + (2.0 / denom).sqrt() * (p / spectrum.trace()).sqrt() * noise_psi2 / config.epsilon)
}

/// `√2·√(Σ min(λ_i ρ², r²))`, the Gaussian-width bound for `B(ρ) ∩ B_Σ(r)`.
pub fn localized_width_bound(spectrum: &Spectrum, r: f64, rho: f64) -> f64 {
    (2.0 * capped_sum(spectrum, r, rho)).sqrt()
}

fn capped_sum(spectrum: &Spectrum, r: f64, rho: f64) -> f64 {
    let r2 = r * r;
    let rho2 = rho * rho;
    spectrum
        .eigenvalues()
        .iter()
        .map(|l| (l * rho2).min(r2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RStar {
    pub r_star: f64,
    pub r1_star: f64,
    pub r2_star: f64,
}

/// Smallest `r` with `2 Σ min(λ_i ρ², r²) ≤ ζ₁ p r²`. `r₂* = 0` for the
/// sub-gaussian proxy.
pub fn compute_r_star(spectrum: &Spectrum, rho: f64, config: &BoundConfig) -> Result<RStar> {
    check_positive("rho", rho)?;
    check_positive("zeta1", config.zeta1)?;
    let p = spectrum.dim() as f64;
    let target = config.zeta1 * p;
    // As r → 0 the left side per r² tends to 2·rank(Σ).
    if 2.0 * spectrum.rank() as f64 <= target {
        return Err(Error::NoCrossing {
            zeta1: config.zeta1,
        });
    }
    let holds = |r: f64| 2.0 * capped_sum(spectrum, r, rho) <= target * r * r;
    let scale = rho * spectrum.top().sqrt();
    let mut lo = 1e-12 * scale;
    let mut hi = 10.0 * scale;
    while !holds(hi) {
        lo = hi;
        hi *= 10.0;
    }
    while holds(lo) {
        hi = lo;
        lo /= 10.0;
    }
    while hi - lo > R_STAR_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RStar {
        r_star: hi,
        r1_star: hi,
        r2_star: 0.0,
    })
}

/// `ε·√(radicand/divisor)·√N·√(tr Σ/p)`.
pub fn s_min_lower_bound(
    spectrum: &Spectrum,
    n: usize,
    frak_r: f64,
    config: &BoundConfig,
) -> Result<f64> {
    let radicand = config.radicand(frak_r, config.resolve_c0(spectrum));
    if !(radicand > 0.0) {
        return Err(Error::InvalidRadicand(radicand));
    }
    let p = spectrum.dim() as f64;
    Ok(config.epsilon
        * (radicand / config.smin_divisor).sqrt()
        * (n as f64).sqrt()
        * (spectrum.trace() / p).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmBounds {
    pub applicable: bool,
    pub s_min_bound: f64,
    pub estimation_bound: f64,
    /// `1 − 2exp(−c₂ r₀ δ⁴/log(1/δ))`.
    pub probability: f64,
    pub r0: f64,
}

/// Dvoretzky–Milman route, valid when `N ≤ c₁ δ²/log(1/δ) · r₀(Σ)`.
pub fn dm_bounds(
    spectrum: &Spectrum,
    n: usize,
    alpha_star_norm: f64,
    noise_psi2: f64,
    config: &BoundConfig,
) -> Result<DmBounds> {
    let delta = config.delta_dm;
    check_delta(delta)?;
    let tr = spectrum.trace();
    let r0 = spectrum.trace_rank();
    let log_inv = (1.0 / delta).ln();
    Ok(DmBounds {
        applicable: n as f64 <= config.c1_dm * delta * delta / log_inv * r0,
        s_min_bound: (1.0 - delta) * tr.sqrt(),
        estimation_bound: alpha_star_norm + noise_psi2 * (n as f64 / tr).sqrt(),
        probability: 1.0 - 2.0 * (-config.c2_dm * r0 * delta.powi(4) / log_inv).exp(),
        r0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionThreshold {
    pub value: f64,
    /// `θ^{−2} − ζ₁ζ₂θ^{−2} − ζ₂θ^{−2} − ζ₂`.
    pub coefficient: f64,
    pub coefficient_positive: bool,
}

pub fn prediction_exclusion_threshold(
    r_star: f64,
    noise_psi2: f64,
    config: &BoundConfig,
) -> Result<ExclusionThreshold> {
    check_open_unit("theta", config.theta)?;
    let inv = config.theta.powi(-2);
    let (z1, z2) = (config.zeta1, config.zeta2);
    let coefficient = inv - z1 * z2 * inv - z2 * inv - z2;
    Ok(ExclusionThreshold {
        value: r_star * r_star * coefficient - noise_psi2 * noise_psi2 / 2.0,
        coefficient,
        coefficient_positive: coefficient > 0.0,
    })
}

/// `r²(16 tr Σ/N − ζ₁/2) − ‖ξ‖²_{ψ₂}/2`. Audit only: the constant 16 comes
/// from a `4√tr Σ` radius that disagrees with `(1−δ)√tr Σ`.
pub fn dm_prediction_threshold_audit(
    spectrum: &Spectrum,
    n: usize,
    r: f64,
    noise_psi2: f64,
    config: &BoundConfig,
) -> f64 {
    r * r * (16.0 * spectrum.trace() / n as f64 - config.zeta1 / 2.0)
        - noise_psi2 * noise_psi2 / 2.0
}

/// Proxy for the quadratic supremum over `H_{r,ρ}`:
/// `d_q(H)·Λ̃(H)/√p + Λ̃(H)²/p` with `d_q(H) = √(2q)·min(r, ρ√λ₁)`.
pub fn quadratic_proxy(spectrum: &Spectrum, r: f64, rho: f64, q_moment: f64) -> f64 {
    let p = spectrum.dim() as f64;
    let width = localized_width_bound(spectrum, r, rho);
    let d_q = (2.0 * q_moment).sqrt() * r.min(rho * spectrum.top().sqrt());
    d_q * width / p.sqrt() + width * width / p
}

/// Proxy for the multiplier supremum over `H_{r,ρ}`: `‖ξ‖_{ψ₂}·Λ̃(H)/√p`.
pub fn multiplier_proxy(spectrum: &Spectrum, r: f64, rho: f64, noise_psi2: f64) -> f64 {
    noise_psi2 * localized_width_bound(spectrum, r, rho) / (spectrum.dim() as f64).sqrt()
}

/// What a [`BoundReport`] is evaluated for.
#[derive(Debug, Clone)]
pub struct BoundInputs<'a> {
    pub spectrum: &'a Spectrum,
    pub n: usize,
    pub alpha_star_norm: f64,
    pub noise_psi2: f64,
    /// Whether the design lacks sub-gaussian tails, so the width proxies
    /// are only proxies.
    pub heavy_tailed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    KStar,
    MinFrakR,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub p: usize,
    pub trace: f64,
    pub k_star: KStar,
    pub reference_k: usize,
    pub reference_source: ReferenceSource,
    #[serde(rename = "frak_R_ref")]
    pub frak_r_ref: f64,
    pub radicand: f64,
    pub nu: Option<f64>,
    pub probability_floor: f64,
    pub rho: f64,
    pub r_star: f64,
    pub r1_star: f64,
    pub r2_star: f64,
    pub s_min_bound: f64,
    #[serde(rename = "lambda_tilde_D")]
    pub lambda_tilde_d: f64,
    #[serde(rename = "d_q_D")]
    pub d_q_d: f64,
    pub operator_norm_bound: f64,
    pub dm_applicable: bool,
    pub dm_s_min_bound: f64,
    pub dm_estimation_bound: f64,
    pub dm_probability: f64,
    pub exclusion_threshold: f64,
    pub exclusion_coefficient: f64,
    pub dm_prediction_threshold_audit: f64,
    pub proxy_mode: String,
    pub alpha_star_norm: f64,
    pub noise_psi2: f64,
    pub c0: f64,
    pub constants: BoundConfig,
    pub diagnostics: Vec<String>,
    pub per_k_table: Vec<KRow>,
}

impl BoundReport {
    pub fn evaluate(inputs: &BoundInputs<'_>, config: &BoundConfig) -> Result<BoundReport> {
        config.validate()?;
        let spectrum = inputs.spectrum;
        let n = inputs.n;
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: 0.0,
                expected: "N >= 1",
            });
        }
        let mut diagnostics = Vec::new();
        let scan = find_k_star(spectrum, n, config)?;
        let c0 = scan.c0;
        let (reference_k, frak_r_ref) = scan.reference_k().ok_or_else(|| {
            Error::PreconditionViolated("no truncation level has a defined frak_R_k".into())
        })?;
        let reference_source = match scan.k_star {
            KStar::Finite(_) => ReferenceSource::KStar,
            KStar::Infinite => {
                diagnostics.push(format!(
                    "k_star is infinite; rho and s_min bound use k = {reference_k} (minimal frak_R_k)"
                ));
                ReferenceSource::MinFrakR
            }
        };
        let radicand = config.radicand(frak_r_ref, c0);
        if !(radicand > 0.0) {
            return Err(Error::InvalidRadicand(radicand));
        }
        let (nu, probability_floor) = match scan.k_star {
            KStar::Finite(_) => {
                let nu = compute_nu(spectrum, n, scan.k_star, config)?;
                (Some(nu.nu), nu.probability_floor)
            }
            KStar::Infinite => {
                diagnostics.push("nu undefined; probability floor set to 0".into());
                (None, 0.0)
            }
        };
        let proxies = width_proxies(spectrum, config);
        let rho = compute_rho(
            spectrum,
            inputs.alpha_star_norm,
            inputs.noise_psi2,
            frak_r_ref,
            config,
        )?;
        let r = compute_r_star(spectrum, rho, config)?;
        let s_min_bound = s_min_lower_bound(spectrum, n, frak_r_ref, config)?;
        let dm = dm_bounds(
            spectrum,
            n,
            inputs.alpha_star_norm,
            inputs.noise_psi2,
            config,
        )?;
        if !dm.applicable {
            diagnostics.push(format!(
                "Dvoretzky-Milman route not applicable: N = {n} exceeds c1 delta^2/log(1/delta) r0"
            ));
        }
        let excl = prediction_exclusion_threshold(r.r_star, inputs.noise_psi2, config)?;
        if !excl.coefficient_positive {
            diagnostics.push(format!(
                "exclusion coefficient {} is not positive; decrease zeta1 or zeta2",
                excl.coefficient
            ));
        }
        let proxy_mode = match (inputs.heavy_tailed, config.lambda_width_proxy) {
            (false, WidthProxy::GaussianWidth) => "sub_gaussian",
            (false, WidthProxy::MonteCarlo) => "sub_gaussian_monte_carlo",
            (true, WidthProxy::GaussianWidth) => "heavy_tailed_proxy",
            (true, WidthProxy::MonteCarlo) => "heavy_tailed_proxy_monte_carlo",
        };
        Ok(BoundReport {
            n,
            p: spectrum.dim(),
            trace: spectrum.trace(),
            k_star: scan.k_star,
            reference_k,
            reference_source,
            frak_r_ref,
            radicand,
            nu,
            probability_floor,
            rho,
            r_star: r.r_star,
            r1_star: r.r1_star,
            r2_star: r.r2_star,
            s_min_bound,
            lambda_tilde_d: proxies.lambda_tilde,
            d_q_d: proxies.d_q,
            operator_norm_bound: operator_norm_bound(spectrum, n, config),
            dm_applicable: dm.applicable,
            dm_s_min_bound: dm.s_min_bound,
            dm_estimation_bound: dm.estimation_bound,
            dm_probability: dm.probability,
            exclusion_threshold: excl.value,
            exclusion_coefficient: excl.coefficient,
            dm_prediction_threshold_audit: dm_prediction_threshold_audit(
                spectrum,
                n,
                r.r_star,
                inputs.noise_psi2,
                config,
            ),
            proxy_mode: proxy_mode.into(),
            alpha_star_norm: inputs.alpha_star_norm,
            noise_psi2: inputs.noise_psi2,
            c0,
            constants: config.clone(),
            diagnostics,
            per_k_table: scan.table,
        })
    }

    pub fn per_k_csv(&self) -> String {
        KStarScan {
            k_star: self.k_star,
            c0: self.c0,
            table: self.per_k_table.clone(),
        }
        .to_csv()
    }
}
