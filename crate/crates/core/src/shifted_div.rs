//! Shifted Rényi divergences for Gaussians with a shared isotropic
//! covariance, and the generalized convolution lemma.
//!
//! A signed shift `z` indexes one family: `z ≥ 0` is the standard shifted
//! divergence `inf_{W∞(μ′, μ) ≤ z} R_q(μ′‖ν)`, `z < 0` the dual
//! `sup_{‖v‖ ≤ |z|} R_q(μ ∗ δ_v‖ν)`. For `N(m₁, σ²I)` against `N(m₂, σ²I)`
//! with `D = ‖m₁ − m₂‖` both read `q max(0, D − z)²/(2σ²)`. For `z > 0` this
//! is the infimum over translates `μ ∗ δ_w` only, so it upper-bounds the
//! true standard shifted divergence.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::gaussian_info::{convolve_gaussian, GaussianMeasure, RenyiOrder};

/// Signed shift radius; negative values select the dual divergence.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ShiftParameter(f64);

impl ShiftParameter {
    pub fn new(z: f64) -> Result<Self> {
        if !z.is_finite() {
            return Err(Error::InvalidParameter {
                name: "z",
                value: z,
                reason: "shift must be finite",
            });
        }
        Ok(Self(z))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_dual(self) -> bool {
        self.0 < 0.0
    }

    pub fn radius(self) -> f64 {
        self.0.abs()
    }
}

/// Mean gap `‖m₁ − m₂‖` and the shared variance `σ²`.
fn shared_isotropic(mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<(f64, f64)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if mu.covariance() != nu.covariance() {
        return Err(Error::CovarianceMismatch);
    }
    let var = mu.isotropic_variance().ok_or(Error::InvalidParameter {
        name: "covariance",
        value: f64::NAN,
        reason: "shifted divergences need an isotropic covariance",
    })?;
    Ok(((mu.mean() - nu.mean()).norm(), var))
}

fn unified(gap: f64, var: f64, z: f64, q: RenyiOrder) -> f64 {
    let reach = (gap - z).max(0.0);
    q.value() * reach * reach / (2.0 * var)
}

/// `sup_{‖v‖ ≤ z} R_q(μ ∗ δ_v ‖ ν) = q(D + z)²/(2σ²)`.
pub fn dual_shifted_renyi_gaussian(mu: &GaussianMeasure, nu: &GaussianMeasure, z: f64, q: RenyiOrder) -> Result<f64> {
    check_nonnegative("z", z)?;
    let (gap, var) = shared_isotropic(mu, nu)?;
    Ok(unified(gap, var, -z, q))
}

/// A maximizing shift for the dual divergence: `z` along `m₁ − m₂`.
pub fn dual_shift_maximizer(mu: &GaussianMeasure, nu: &GaussianMeasure, z: f64) -> Result<DVector<f64>> {
    check_nonnegative("z", z)?;
    shared_isotropic(mu, nu)?;
    let delta = mu.mean() - nu.mean();
    let norm = delta.norm();
    if norm == 0.0 {
        let mut e = DVector::zeros(mu.dim());
        e[0] = z;
        return Ok(e);
    }
    Ok(delta * (z / norm))
}

/// `inf_{‖w‖ ≤ z} R_q(μ ∗ δ_w ‖ ν) = q max(0, D − z)²/(2σ²)`, an upper bound
/// on the standard shifted divergence.
pub fn standard_shifted_renyi_gaussian_translate(
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    z: f64,
    q: RenyiOrder,
) -> Result<f64> {
    check_nonnegative("z", z)?;
    let (gap, var) = shared_isotropic(mu, nu)?;
    Ok(unified(gap, var, z, q))
}

/// Unified family indexed by a signed shift.
pub fn shifted_renyi_gaussian(mu: &GaussianMeasure, nu: &GaussianMeasure, z: ShiftParameter, q: RenyiOrder) -> Result<f64> {
    let (gap, var) = shared_isotropic(mu, nu)?;
    Ok(unified(gap, var, z.value(), q))
}

/// Rényi sensitivity `S_q(N(0, σ²I), a) = q a²/(2σ²)`.
pub fn gaussian_sensitivity(variance: f64, a: f64, q: RenyiOrder) -> Result<f64> {
    check_positive("variance", variance)?;
    check_nonnegative("a", a)?;
    Ok(q.value() * a * a / (2.0 * variance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSign {
    Standard,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvolutionRegime {
    /// `a ≤ |z|`
    #[serde(rename = "a<=|z|")]
    WithinShift,
    /// `a > |z|`
    #[serde(rename = "a>|z|")]
    BeyondShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConvolutionCase {
    pub sign: ShiftSign,
    pub regime: ConvolutionRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub z: f64,
    pub a: f64,
    pub q: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub case: ConvolutionCase,
}

/// Checks `R_q^{(z)}(μ ∗ ξ ‖ ν ∗ ξ) ≤ R_q^{(z + a)}(μ ‖ ν) + S_q(ξ, a)`.
pub fn verify_convolution_lemma(
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    xi: &GaussianMeasure,
    z: ShiftParameter,
    a: f64,
    q: RenyiOrder,
) -> Result<ConvolutionReport> {
    check_nonnegative("a", a)?;
    if xi.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: xi.dim(),
        });
    }
    let noise_var = xi.isotropic_variance().ok_or(Error::InvalidParameter {
        name: "xi",
        value: f64::NAN,
        reason: "noise must have an isotropic covariance",
    })?;
    let smooth = |m: &GaussianMeasure| -> Result<GaussianMeasure> {
        convolve_gaussian(m, xi.covariance())?.translated(xi.mean())
    };
    let (mu_xi, nu_xi) = (smooth(mu)?, smooth(nu)?);
    let lhs = shifted_renyi_gaussian(&mu_xi, &nu_xi, z, q)?;
    let rhs = shifted_renyi_gaussian(mu, nu, ShiftParameter::new(z.value() + a)?, q)? + gaussian_sensitivity(noise_var, a, q)?;
    let margin = rhs - lhs;
    Ok(ConvolutionReport {
        z: z.value(),
        a,
        q: q.value(),
        lhs,
        rhs,
        margin,
        pass: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
        case: ConvolutionCase {
            sign: if z.is_dual() { ShiftSign::Dual } else { ShiftSign::Standard },
            regime: if a <= z.radius() {
                ConvolutionRegime::WithinShift
            } else {
                ConvolutionRegime::BeyondShift
            },
        },
    })
}
