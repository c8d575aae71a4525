//! Closed-form divergence calculus for Gaussians sharing a covariance, and
//! conversions between Rényi divergence and the `D_q` f-divergence.
//!
//! For `μ = N(m₁, Σ)` and `ν = N(m₂, Σ)`,
//!
//! ```text
//! R_q(μ ‖ ν) = (q/2) ⟨m₁ − m₂, Σ⁻¹ (m₁ − m₂)⟩
//! ```
//!
//! for every `q ≥ 1` (the `q = 1` case is KL). Only the shared-covariance
//! identity is provided; different covariances are not supported.
//!
//! Note that at `q = 2` the χ² relation is `R_2 = log(1 + χ²)`, i.e. the
//! general relation `R_q = log(1 + D_q)/(q − 1)` with `D_2 = χ²`. The
//! expression `exp(1 + χ²)` that sometimes circulates for this relation is
//! inconsistent with the general one and is not used here.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Order `q ≥ 1` of a Rényi divergence. `q = 1` denotes KL.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct RenyiOrder(f64);

impl RenyiOrder {
    pub const KL: RenyiOrder = RenyiOrder(1.0);

    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q >= 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "Renyi order must be finite and >= 1",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_kl(self) -> bool {
        self.0 == 1.0
    }

    /// Hölder conjugate `p = q/(q − 1)`; `None` for KL.
    pub fn dual_exponent(self) -> Option<f64> {
        if self.is_kl() {
            None
        } else {
            Some(self.0 / (self.0 - 1.0))
        }
    }

    /// Order `q = p/(p − 1)` dual to a Harnack exponent `p > 1`.
    pub fn from_harnack_exponent(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "Harnack exponent must be finite and > 1",
            });
        }
        Self::new(p / (p - 1.0))
    }
}

/// A Gaussian measure `N(mean, covariance)` with SPD covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    /// Builds `N(mean, covariance)`; the covariance must be symmetric and
    /// admit a Cholesky factorization.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if covariance.transpose() != covariance || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        if Cholesky::new(covariance.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { mean, covariance })
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// The same Gaussian translated by `shift` (i.e. `self ∗ δ_shift`).
    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: shift.len(),
            });
        }
        Ok(Self {
            mean: &self.mean + shift,
            covariance: self.covariance.clone(),
        })
    }

    /// If the covariance is `σ² I`, returns `σ²`.
    pub fn isotropic_variance(&self) -> Option<f64> {
        let d = self.dim();
        let s = self.covariance[(0, 0)];
        let iso = (0..d).all(|i| {
            (0..d).all(|j| {
                let c = self.covariance[(i, j)];
                if i == j {
                    c == s
                } else {
                    c == 0.0
                }
            })
        });
        iso.then_some(s)
    }

    /// Log-density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let chol = Cholesky::new(self.covariance.clone()).expect("validated at construction");
        let diff = x - &self.mean;
        let sol = chol.solve(&diff);
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let d = self.dim() as f64;
        -0.5 * (diff.dot(&sol) + log_det + d * (2.0 * std::f64::consts::PI).ln())
    }
}

/// `R_q(a ‖ b) = (q/2)⟨Δ, Σ⁻¹Δ⟩` for Gaussians with identical stored covariance.
pub fn renyi_gaussian_shared_cov(
    a: &GaussianMeasure,
    b: &GaussianMeasure,
    q: RenyiOrder,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.covariance != b.covariance {
        return Err(Error::CovarianceMismatch);
    }
    let chol = Cholesky::new(a.covariance.clone()).ok_or(Error::NotPositiveDefinite)?;
    let delta = &a.mean - &b.mean;
    let mahalanobis = delta.dot(&chol.solve(&delta));
    Ok(0.5 * q.value() * mahalanobis.max(0.0))
}

fn require_proper_order(q: RenyiOrder) -> Result<()> {
    if q.is_kl() {
        Err(Error::InvalidParameter {
            name: "q",
            value: 1.0,
            reason: "the D_q relation is undefined at q = 1; use KL directly",
        })
    } else {
        Ok(())
    }
}

/// `R_q = log(1 + D_q)/(q − 1)` for `q > 1`.
pub fn renyi_from_dq(dq: f64, q: RenyiOrder) -> Result<f64> {
    require_proper_order(q)?;
    crate::error::check_nonnegative("Dq", dq)?;
    Ok(dq.ln_1p() / (q.value() - 1.0))
}

/// Inverse of [`renyi_from_dq`]: `D_q = exp((q − 1) R) − 1`.
pub fn dq_from_renyi(renyi: f64, q: RenyiOrder) -> Result<f64> {
    require_proper_order(q)?;
    crate::error::check_nonnegative("renyi", renyi)?;
    Ok(((q.value() - 1.0) * renyi).exp_m1())
}

/// `R_2` from a χ² value: `log(1 + χ²)`.
pub fn renyi2_from_chi_squared(chi2: f64) -> Result<f64> {
    renyi_from_dq(chi2, RenyiOrder(2.0))
}

/// Convolution with a centered Gaussian: means are unchanged, covariances add.
///
/// The noise covariance may be singular (e.g. zero), it only has to be a
/// symmetric PSD matrix of the right size.
pub fn convolve_gaussian(a: &GaussianMeasure, noise_covariance: &DMatrix<f64>) -> Result<GaussianMeasure> {
    if noise_covariance.nrows() != a.dim() || noise_covariance.ncols() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: noise_covariance.nrows(),
        });
    }
    GaussianMeasure::new(a.mean.clone(), &a.covariance + noise_covariance)
}

/// Convolution `a ⊛ noise` with a centered Gaussian measure.
pub fn convolve_gaussian_measure(a: &GaussianMeasure, noise: &GaussianMeasure) -> Result<GaussianMeasure> {
    if noise.mean.iter().any(|m| *m != 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise.mean",
            value: noise.mean.amax(),
            reason: "noise must be centered",
        });
    }
    convolve_gaussian(a, &noise.covariance)
}
