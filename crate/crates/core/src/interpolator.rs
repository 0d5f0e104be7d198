//! The minimum-ℓ2-norm interpolant `α̂ = X†Y` and the algebraic identities
//! of the squared loss around it.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectra::Spectrum;

/// Singular values below `PINV_RCOND · s_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Above this dimension `alpha_hat` is dropped from JSON output.
pub const ALPHA_ELIDE_DIM: usize = 10_000;

#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub design: DMatrix<f64>,
    pub alpha_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub responses: DVector<f64>,
    pub noise_psi2: f64,
}

impl RegressionInstance {
    /// Builds `Y = Xα* + ξ`.
    pub fn new(
        design: DMatrix<f64>,
        alpha_star: DVector<f64>,
        noise: DVector<f64>,
        noise_psi2: f64,
    ) -> Result<Self> {
        let (n, p) = design.shape();
        if alpha_star.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: alpha_star.len(),
            });
        }
        if noise.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: noise.len(),
            });
        }
        if !(noise_psi2 >= 0.0 && noise_psi2.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_psi2",
                value: noise_psi2,
                expected: "a finite value >= 0",
            });
        }
        if n >= p {
            warn!("N = {n} >= p = {p}: outside the overparameterized regime");
        }
        let responses = &design * &alpha_star + &noise;
        Ok(RegressionInstance {
            design,
            alpha_star,
            noise,
            responses,
            noise_psi2,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }
}

/// Thin SVD `X = U S Vᵀ` of a full-row-rank `N × p` design.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v: DMatrix<f64>,
}

impl PseudoInverse {
    /// Factorizes `X` and fails if its rank is below `N`.
    ///
    /// For `N ≤ p` the SVD is taken of the triangular factor of `Xᵀ = QR`,
    /// which gives the same singular triplets as a direct SVD at a fraction
    /// of the cost when `p ≫ N`.
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter {
                name: "design",
                value: 0.0,
                expected: "a non-empty matrix",
            });
        }
        let (u, s, v) = if n <= p {
            let qr = x.transpose().qr();
            let q = qr.q();
            let rt = qr.r().transpose();
            let svd = rt.svd(true, true);
            let w = svd.v_t.expect("requested").transpose();
            (svd.u.expect("requested"), svd.singular_values, q * w)
        } else {
            let svd = x.clone().svd(true, true);
            let v = svd.v_t.expect("requested").transpose();
            (svd.u.expect("requested"), svd.singular_values, v)
        };
        let pinv = Self::sorted(u, s, v);
        let s_max = pinv.singular_values[0];
        let cutoff = PINV_RCOND * s_max;
        let s_min = if n <= p {
            pinv.singular_values[n - 1]
        } else {
            0.0
        };
        if !(s_min > cutoff) {
            return Err(Error::RankDeficientDesign { s_min, cutoff });
        }
        Ok(pinv)
    }

    fn sorted(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> Self {
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|a, b| s[*b].total_cmp(&s[*a]));
        if order.iter().enumerate().all(|(i, j)| i == *j) {
            return PseudoInverse {
                u,
                singular_values: s,
                v,
            };
        }
        let u = DMatrix::from_columns(&order.iter().map(|&j| u.column(j)).collect::<Vec<_>>());
        let v = DMatrix::from_columns(&order.iter().map(|&j| v.column(j)).collect::<Vec<_>>());
        let s = DVector::from_iterator(s.len(), order.iter().map(|&j| s[j]));
        PseudoInverse {
            u,
            singular_values: s,
            v,
        }
    }

    /// Descending singular values of `X`.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn s_min(&self) -> f64 {
        self.singular_values[self.singular_values.len() - 1]
    }

    /// `X† y`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut c = self.u.tr_mul(y);
        c.component_div_assign(&self.singular_values);
        &self.v * c
    }

    /// Orthogonal projection onto the row space of `X`, i.e. `X†X a`.
    pub fn project_row_space(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.v * self.v.tr_mul(a)
    }

    /// The explicit `p × N` matrix `X†`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut vs = self.v.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            vs.column_mut(j).unscale_mut(*s);
        }
        vs * self.u.transpose()
    }
}

/// Singular values of `X`, descending, without forming singular vectors.
pub fn design_singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = x.shape();
    let s = if n <= p {
        x.transpose().qr().r().singular_values()
    } else {
        x.singular_values()
    };
    let mut s: Vec<f64> = s.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[derive(Debug, Clone)]
pub struct InterpolationResult {
    pub alpha_hat: DVector<f64>,
    pub singular_values: Vec<f64>,
    pub s_min: f64,
    pub residual_norm: f64,
    pub row_space_leak: f64,
}

impl Serialize for InterpolationResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let elided = self.alpha_hat.len() > ALPHA_ELIDE_DIM;
        let mut st = serializer.serialize_struct("InterpolationResult", 7)?;
        if elided {
            st.skip_field("alpha_hat")?;
        } else {
            st.serialize_field("alpha_hat", self.alpha_hat.as_slice())?;
        }
        st.serialize_field("alpha_elided", &elided)?;
        st.serialize_field("alpha_hat_norm", &self.alpha_hat.norm())?;
        st.serialize_field("singular_values", &self.singular_values)?;
        st.serialize_field("s_min", &self.s_min)?;
        st.serialize_field("residual_norm", &self.residual_norm)?;
        st.serialize_field("row_space_leak", &self.row_space_leak)?;
        st.end()
    }
}

/// Minimum-norm solution of `Xα = y` together with the factorization used.
pub fn min_norm_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(InterpolationResult, PseudoInverse)> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let pinv = PseudoInverse::new(x)?;
    let alpha_hat = pinv.apply(y);
    let residual_norm = (x * &alpha_hat - y).norm();
    let row_space_leak = (&alpha_hat - pinv.project_row_space(&alpha_hat)).norm();
    let result = InterpolationResult {
        singular_values: pinv.singular_values.iter().copied().collect(),
        s_min: pinv.s_min(),
        alpha_hat,
        residual_norm,
        row_space_leak,
    };
    Ok((result, pinv))
}

pub fn min_norm_interpolate(instance: &RegressionInstance) -> Result<InterpolationResult> {
    min_norm_solve(&instance.design, &instance.responses).map(|(r, _)| r)
}

/// `‖α̂ − α*‖`.
pub fn estimation_error(result: &InterpolationResult, instance: &RegressionInstance) -> f64 {
    (&result.alpha_hat - &instance.alpha_star).norm()
}

/// `‖α*‖ + ‖X†‖·‖ξ‖`, the triangle-inequality ceiling on the estimation error.
pub fn estimation_error_ceiling(result: &InterpolationResult, instance: &RegressionInstance) -> f64 {
    instance.alpha_star.norm() + instance.noise.norm() / result.s_min
}

/// `‖Σ^{1/2}(α̂ − α*)‖` in the eigenbasis.
pub fn prediction_error(
    result: &InterpolationResult,
    instance: &RegressionInstance,
    spectrum: &Spectrum,
) -> Result<f64> {
    sigma_norm(&(&result.alpha_hat - &instance.alpha_star), spectrum)
}

/// `√(Σ λ_i v_i²)`.
pub fn sigma_norm(v: &DVector<f64>, spectrum: &Spectrum) -> Result<f64> {
    if v.len() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            found: v.len(),
        });
    }
    Ok(v.iter()
        .zip(spectrum.eigenvalues())
        .map(|(d, l)| l * d * d)
        .sum::<f64>()
        .sqrt())
}

fn check_len(alpha: &DVector<f64>, instance: &RegressionInstance) -> Result<()> {
    if alpha.len() != instance.p() {
        return Err(Error::DimensionMismatch {
            expected: instance.p(),
            found: alpha.len(),
        });
    }
    Ok(())
}

/// `(1/N) Σ [(⟨X_i,α⟩ − Y_i)² − (⟨X_i,α*⟩ − Y_i)²]`.
pub fn empirical_excess_risk(alpha: &DVector<f64>, instance: &RegressionInstance) -> Result<f64> {
    check_len(alpha, instance)?;
    let r = &instance.design * alpha - &instance.responses;
    let r_star = &instance.design * &instance.alpha_star - &instance.responses;
    Ok((r.norm_squared() - r_star.norm_squared()) / instance.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub quadratic: f64,
    pub multiplier: f64,
    pub identity_gap: f64,
}

/// Splits the excess risk into its quadratic and multiplier parts.
pub fn decomposition_check(alpha: &DVector<f64>, instance: &RegressionInstance) -> Result<Decomposition> {
    let excess = empirical_excess_risk(alpha, instance)?;
    let n = instance.n() as f64;
    let xd = &instance.design * (alpha - &instance.alpha_star);
    let quadratic = xd.norm_squared() / n;
    let multiplier = 2.0 * instance.noise.dot(&xd) / n;
    Ok(Decomposition {
        quadratic,
        multiplier,
        identity_gap: (excess - (quadratic - multiplier)).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExclusionCheck {
    pub threshold: f64,
    pub excess_at_interpolant: f64,
    pub excluded: bool,
}

/// Compares the interpolant's excess risk `−(1/N)‖ξ‖²` with `−‖ξ‖²_{ψ₂}/2`.
pub fn exclusion_event_check(instance: &RegressionInstance) -> ExclusionCheck {
    let threshold = -instance.noise_psi2 * instance.noise_psi2 / 2.0;
    let excess_at_interpolant = -instance.noise.norm_squared() / instance.n() as f64;
    ExclusionCheck {
        threshold,
        excess_at_interpolant,
        excluded: excess_at_interpolant <= threshold,
    }
}
