//! Euler–Maruyama kernels for constant-coefficient Itô diffusions
//! `dX = b(X) dt + σ dB`, and the exact Ornstein–Uhlenbeck marginals that
//! serve as the tightness oracle.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::gaussian_info::GaussianMeasure;

pub type DriftFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

const LIPSCHITZ_SPOT_CHECKS: usize = 64;

/// Constant-coefficient Itô model: `L`-Lipschitz drift `b`, invertible
/// diffusion matrix `σ`, and ellipticity `λ` with `σσᵀ ⪰ λI`.
#[derive(Clone)]
pub struct ItoModel {
    drift: DriftFn,
    lipschitz: f64,
    diffusion: DMatrix<f64>,
    ellipticity: f64,
}

impl fmt::Debug for ItoModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ItoModel")
            .field("lipschitz", &self.lipschitz)
            .field("diffusion", &self.diffusion)
            .field("ellipticity", &self.ellipticity)
            .finish_non_exhaustive()
    }
}

impl ItoModel {
    /// Validates `λ ≤ λ_min(σσᵀ)` and spot-checks the Lipschitz contract of
    /// the drift on random pairs in `[−5, 5]^d`.
    pub fn new(drift: DriftFn, lipschitz: f64, diffusion: DMatrix<f64>, ellipticity: f64) -> Result<Self> {
        check_positive("lipschitz_L", lipschitz)?;
        check_positive("ellipticity_lambda", ellipticity)?;
        let d = diffusion.nrows();
        if diffusion.ncols() != d || d == 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: diffusion.ncols(),
            });
        }
        let gram = &diffusion * diffusion.transpose();
        let min_eig = SymmetricEigen::new(gram).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        if ellipticity > min_eig * (1.0 + 1e-12) {
            return Err(Error::OutsideRegime(format!(
                "ellipticity {ellipticity} exceeds smallest eigenvalue {min_eig} of sigma sigma^T"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        for _ in 0..LIPSCHITZ_SPOT_CHECKS {
            let x = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
            let y = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
            let bx = drift(&x);
            let by = drift(&y);
            if bx.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: bx.len(),
                });
            }
            let lhs = (bx - by).norm();
            let rhs = lipschitz * (&x - &y).norm();
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::OutsideRegime(format!(
                    "drift violates the declared Lipschitz constant {lipschitz}: |b(x)-b(y)| = {lhs} > {rhs}"
                )));
            }
        }

        Ok(Self {
            drift,
            lipschitz,
            diffusion,
            ellipticity,
        })
    }

    /// The OU model `dX = −L X dt + √2 dB` in dimension `d` (`λ = 2`).
    pub fn ornstein_uhlenbeck(lipschitz: f64, dim: usize) -> Result<Self> {
        let l = lipschitz;
        Self::new(
            Arc::new(move |x: &DVector<f64>| x * (-l)),
            lipschitz,
            DMatrix::identity(dim, dim) * std::f64::consts::SQRT_2,
            2.0,
        )
    }

    pub fn dim(&self) -> usize {
        self.diffusion.nrows()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }
}

/// Step size `h` with contraction factor `r = 1 − L h ∈ (0, 1]`.
///
/// `L = 0` is admitted (giving `r = 1`) so that the Brownian limit of the OU
/// oracle can be expressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    h: f64,
    lipschitz: f64,
}

impl StepSize {
    pub fn new(h: f64, lipschitz: f64) -> Result<Self> {
        check_positive("h", h)?;
        check_nonnegative("L", lipschitz)?;
        if lipschitz * h >= 1.0 {
            return Err(Error::OutsideRegime(format!(
                "step size h = {h} must satisfy h < 1/L = {}",
                1.0 / lipschitz
            )));
        }
        Ok(Self { h, lipschitz })
    }

    pub fn for_model(model: &ItoModel, h: f64) -> Result<Self> {
        Self::new(h, model.lipschitz())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `r = 1 − L h`.
    pub fn contraction(&self) -> f64 {
        1.0 - self.lipschitz * self.h
    }
}

/// `P̂_h(x, ·) = N(x + h b(x), h σσᵀ)`.
pub fn euler_step_distribution(model: &ItoModel, step: StepSize, x: &DVector<f64>) -> Result<GaussianMeasure> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    let h = step.h();
    let mean = x + model.drift(x) * h;
    let mut cov = &model.diffusion * model.diffusion.transpose() * h;
    cov = (&cov + cov.transpose()) * 0.5;
    GaussianMeasure::new(mean, cov)
}

/// Pushes a Gaussian through one Euler step of a model with *linear* drift
/// `b(x) = A x`: the mean goes through `x ↦ x + h A x` and covariances are
/// transported and summed. `drift_matrix` is `A`.
pub fn euler_step_linear(
    model: &ItoModel,
    drift_matrix: &DMatrix<f64>,
    step: StepSize,
    from: &GaussianMeasure,
) -> Result<GaussianMeasure> {
    let d = model.dim();
    if from.dim() != d || drift_matrix.nrows() != d || drift_matrix.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: from.dim(),
        });
    }
    let h = step.h();
    let transfer = DMatrix::identity(d, d) + drift_matrix * h;
    let mean = &transfer * from.mean();
    let noise = &model.diffusion * model.diffusion.transpose() * h;
    let mut cov = &transfer * from.covariance() * transfer.transpose() + noise;
    cov = (&cov + cov.transpose()) * 0.5;
    GaussianMeasure::new(mean, cov)
}

/// Exact `N`-step marginal of the OU Euler chain `x ↦ N(r x, 2h I)`:
/// `N(r^N x, 2h (1 − r^{2N})/(1 − r²) I)`, with variance `2hN` at `r = 1`.
pub fn ou_discrete_marginal(step: StepSize, steps: u32, x: &DVector<f64>) -> Result<GaussianMeasure> {
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "number of steps must be >= 1",
        });
    }
    let h = step.h();
    let r = step.contraction();
    let n = steps as i32;
    let (mean_factor, variance) = if r == 1.0 {
        (1.0, 2.0 * h * steps as f64)
    } else {
        let r2n = r.powi(2 * n);
        (r.powi(n), 2.0 * h * (1.0 - r2n) / (1.0 - r * r))
    };
    GaussianMeasure::isotropic(x * mean_factor, variance)
}

/// Exact continuous OU marginal `N(e^{−LT} x, (1 − e^{−2LT})/L · I)` for
/// `dX = −L X dt + √2 dB`.
pub fn ou_continuous_marginal(lipschitz: f64, horizon: f64, x: &DVector<f64>) -> Result<GaussianMeasure> {
    check_positive("L", lipschitz)?;
    check_positive("T", horizon)?;
    let variance = -(-2.0 * lipschitz * horizon).exp_m1() / lipschitz;
    GaussianMeasure::isotropic(x * (-lipschitz * horizon).exp(), variance)
}
