//! Covariance spectra and the rank functionals built on them.
//!
//! A [`Spectrum`] is the descending eigenvalue sequence of a covariance
//! matrix. Every quantity here is orthogonally invariant, so designs are
//! always generated in the eigenbasis and the spectrum is all we store.
//!
//! Indexing follows the usual convention for truncated ranks: `k` counts the
//! leading eigenvalues that are removed, so the "tail" is `λ_{k+1}, …, λ_p`
//! in 1-based terms, i.e. `eigenvalues[k..]` here.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};

/// Relative slack used when checking the stable-rank lower bound.
pub const STABLE_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRepr", into = "SpectrumRepr")]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    trace: f64,
}

/// `{"eigenvalues": [...]}`, or a bare array on input.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpectrumRepr {
    Object { eigenvalues: Vec<f64> },
    Bare(Vec<f64>),
}

impl TryFrom<SpectrumRepr> for Spectrum {
    type Error = Error;

    fn try_from(repr: SpectrumRepr) -> Result<Self> {
        match repr {
            SpectrumRepr::Object { eigenvalues } | SpectrumRepr::Bare(eigenvalues) => {
                Spectrum::new(eigenvalues)
            }
        }
    }
}

impl From<Spectrum> for SpectrumRepr {
    fn from(s: Spectrum) -> Self {
        SpectrumRepr::Object {
            eigenvalues: s.eigenvalues,
        }
    }
}

impl Spectrum {
    /// Builds a spectrum from eigenvalues that are already sorted descending.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("empty eigenvalue sequence".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {bad} is not a finite non-negative number"
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpectrum(
                "eigenvalues must be sorted in descending order".into(),
            ));
        }
        let trace: f64 = eigenvalues.iter().sum();
        if !(trace > 0.0 && trace.is_finite()) {
            return Err(Error::InvalidSpectrum(
                "at least one eigenvalue must be positive and the trace finite".into(),
            ));
        }
        Ok(Spectrum { eigenvalues, trace })
    }

    pub fn from_unsorted(mut eigenvalues: Vec<f64>) -> Result<Self> {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Spectrum::new(eigenvalues)
    }

    pub fn identity(p: usize) -> Result<Self> {
        Spectrum::new(vec![1.0; p])
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Largest eigenvalue, `λ_1`.
    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|v| **v > 0.0).count()
    }

    /// `tr(Σ)/λ_1`, the classical effective rank `r_0`.
    pub fn trace_rank(&self) -> f64 {
        self.trace / self.top()
    }

    /// Returns the spectrum of `t·Σ`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Spectrum::new(self.eigenvalues.iter().map(|v| v * t).collect())
    }

    fn tail(&self, k: usize) -> Result<&[f64]> {
        if k >= self.dim() {
            return Err(Error::TruncationOutOfRange { k, p: self.dim() });
        }
        Ok(&self.eigenvalues[k..])
    }

    /// `r_k(Σ) = Σ_{i>k} λ_i / λ_{k+1}`.
    pub fn effective_rank_r(&self, k: usize) -> Result<f64> {
        let tail = self.tail(k)?;
        if tail[0] <= 0.0 {
            return Err(Error::TruncationOutOfRange { k, p: self.dim() });
        }
        Ok(tail.iter().sum::<f64>() / tail[0])
    }

    /// `R_k(Σ) = (Σ_{i>k} λ_i)² / Σ_{i>k} λ_i²`.
    pub fn effective_rank_big_r(&self, k: usize) -> Result<f64> {
        let tail = self.tail(k)?;
        let (sum, sum_sq) = sums(tail);
        if sum_sq <= 0.0 {
            return Err(Error::TruncationOutOfRange { k, p: self.dim() });
        }
        Ok(sum * sum / sum_sq)
    }

    /// `srank_4` of `Σ^{1/2}` (when `of_square_root`) or of `Σ` itself.
    pub fn stable_rank4(&self, of_square_root: bool) -> f64 {
        if of_square_root {
            let (sum, sum_sq) = sums(&self.eigenvalues);
            sum * sum / sum_sq
        } else {
            let (sum_sq, sum_4) = self
                .eigenvalues
                .iter()
                .fold((0.0, 0.0), |(a, b), v| (a + v * v, b + v.powi(4)));
            sum_sq * sum_sq / sum_4
        }
    }

    /// All rank functionals at truncation level `k`.
    pub fn rank_profile(&self, k: usize, c_small: f64) -> Result<RankProfile> {
        check_open_unit("c_small", c_small)?;
        let r_k = self.effective_rank_r(k)?;
        let big_r_k = self.effective_rank_big_r(k)?;
        let srank4 = self.stable_rank4(false);
        let srank4_sqrt = self.stable_rank4(true);
        let r_k2 = truncated_stable_rank(k, srank4, big_r_k);
        if r_k2 < 0.0 {
            return Err(Error::NegativeRk2 { k, srank4 });
        }
        Ok(RankProfile {
            k,
            r_k,
            big_r_k,
            srank4_sqrt,
            srank4,
            r_k2,
            frak_r_k: frak_r(self.dim(), k, r_k2, c_small),
            c_small,
        })
    }

    /// Rank profiles for every `k` in `0..p`, using suffix sums so the scan is
    /// linear in `p`. Entries are `Err` where `rank_profile` would fail.
    pub fn rank_profiles(&self, c_small: f64) -> Result<Vec<Result<RankProfile>>> {
        check_open_unit("c_small", c_small)?;
        let p = self.dim();
        let srank4 = self.stable_rank4(false);
        let srank4_sqrt = self.stable_rank4(true);
        let mut tail_sum = vec![0.0; p + 1];
        let mut tail_sq = vec![0.0; p + 1];
        for i in (0..p).rev() {
            let v = self.eigenvalues[i];
            tail_sum[i] = tail_sum[i + 1] + v;
            tail_sq[i] = tail_sq[i + 1] + v * v;
        }
        Ok((0..p)
            .map(|k| {
                let head = self.eigenvalues[k];
                if head <= 0.0 || tail_sq[k] <= 0.0 {
                    return Err(Error::TruncationOutOfRange { k, p });
                }
                let big_r_k = tail_sum[k] * tail_sum[k] / tail_sq[k];
                let r_k2 = truncated_stable_rank(k, srank4, big_r_k);
                if r_k2 < 0.0 {
                    return Err(Error::NegativeRk2 { k, srank4 });
                }
                Ok(RankProfile {
                    k,
                    r_k: tail_sum[k] / head,
                    big_r_k,
                    srank4_sqrt,
                    srank4,
                    r_k2,
                    frak_r_k: frak_r(p, k, r_k2, c_small),
                    c_small,
                })
            })
            .collect())
    }

    /// Compares `srank_4(Σ^{1/2})` with `(16p²/(4p−k)²)·R_{k,2}(Σ)`.
    ///
    /// The comparison is always computed. `floor_met` records whether every
    /// eigenvalue clears `tr(Σ)/(2p)`, and `k_admissible` whether
    /// `k ≤ srank_4(Σ)`; the inequality is only guaranteed when both hold.
    pub fn stable_rank_lower_bound_check(&self, k: usize) -> Result<StableRankCheck> {
        let big_r_k = self.effective_rank_big_r(k)?;
        let p = self.dim() as f64;
        let srank4 = self.stable_rank4(false);
        let lhs = self.stable_rank4(true);
        let rhs = stretch_factor(self.dim(), k) * truncated_stable_rank(k, srank4, big_r_k);
        let floor = self.trace / (2.0 * p);
        let floor_met = self.eigenvalues.iter().all(|v| *v >= floor);
        Ok(StableRankCheck {
            lhs,
            rhs,
            holds: lhs >= rhs - STABLE_RANK_TOL * lhs.max(1.0),
            floor_met,
            k_admissible: (k as f64) <= srank4,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One-column CSV with an `eigenvalue` header and shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue\n");
        for v in &self.eigenvalues {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let field = line.trim().trim_end_matches(',');
            if field.is_empty() {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if line_no == 0 => continue,
                Err(_) => {
                    return Err(Error::InvalidSpectrum(format!(
                        "line {}: cannot parse {field:?}",
                        line_no + 1
                    )))
                }
            }
        }
        Spectrum::new(values)
    }

    /// Reads a spectrum from a `.json` or `.csv` file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Spectrum::from_csv(&text),
            _ => Spectrum::from_json(&text),
        }
    }
}

fn sums(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((0.0, 0.0), |(s, q), v| (s + v, q + v * v))
}

/// `R_{k,2} = (1 − √(k/srank_4(Σ)))·R_k`.
fn truncated_stable_rank(k: usize, srank4: f64, big_r_k: f64) -> f64 {
    (1.0 - (k as f64 / srank4).sqrt()) * big_r_k
}

/// `16p²/(4p−k)²`.
fn stretch_factor(p: usize, k: usize) -> f64 {
    let p = p as f64;
    let d = 4.0 * p - k as f64;
    16.0 * p * p / (d * d)
}

/// `((4p−k)²/(8p)) · c^{(16p²/(4p−k)²)·R_{k,2}} / R_{k,2}`, evaluated in log space.
fn frak_r(p: usize, k: usize, r_k2: f64, c_small: f64) -> f64 {
    if r_k2 == 0.0 {
        return f64::INFINITY;
    }
    let pf = p as f64;
    let d = 4.0 * pf - k as f64;
    let log_value =
        (d * d / (8.0 * pf)).ln() + stretch_factor(p, k) * r_k2 * c_small.ln() - r_k2.ln();
    log_value.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub k: usize,
    pub r_k: f64,
    #[serde(rename = "R_k")]
    pub big_r_k: f64,
    pub srank4_sqrt: f64,
    pub srank4: f64,
    #[serde(rename = "R_k2")]
    pub r_k2: f64,
    #[serde(rename = "frak_R_k")]
    pub frak_r_k: f64,
    pub c_small: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableRankCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub floor_met: bool,
    pub k_admissible: bool,
}

/// Spectrum `λ_k = e^{−k} + ε`, `k = 1..p`, with `p = ⌈c·N·log(1/ε)⌉`.
pub fn make_example_spectrum(n: usize, epsilon: f64, c_ratio: f64) -> Result<Spectrum> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if !(c_ratio > 0.0 && c_ratio.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c_ratio",
            value: c_ratio,
            expected: "a finite positive value",
        });
    }
    let log_inv = (1.0 / epsilon).ln();
    if log_inv >= n as f64 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            expected: "log(1/epsilon) < N",
        });
    }
    let p = (c_ratio * n as f64 * log_inv).ceil() as usize;
    Spectrum::new((1..=p).map(|k| (-(k as f64)).exp() + epsilon).collect())
}
