//! Sampling from `π ∝ e^{−V}` and empirical checks of score concentration:
//! `⟨e, ∇V(X)⟩` is `√β`-sub-Gaussian and `‖∇V(X)‖ ≲ √(βd) + √(β log(1/δ))`.
//!
//! Samples are drawn on [`STREAMS`] independent ChaCha streams derived from
//! one seed and concatenated in stream order, so results do not depend on
//! the number of worker threads.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::fokker_planck::Potential1D;

pub const STREAMS: u64 = 16;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const INVERSE_CDF_POINTS: usize = 1 << 16;
const INVERSE_CDF_RANGE: f64 = 30.0;
const MAX_LAMBDA_SQRT_BETA: f64 = 3.0;

pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Target `π ∝ e^{−V}` with `‖∇²V‖ ≤ β`.
#[derive(Clone)]
pub struct Target {
    dim: usize,
    potential: ScalarField,
    gradient: VectorField,
    beta: f64,
    gaussian_precision: Option<f64>,
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Target")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("gaussian_precision", &self.gaussian_precision)
            .finish_non_exhaustive()
    }
}

impl Target {
    pub fn new(dim: usize, potential: ScalarField, gradient: VectorField, beta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                value: 0.0,
                reason: "dimension must be >= 1",
            });
        }
        check_positive("beta", beta)?;
        Ok(Self {
            dim,
            potential,
            gradient,
            beta,
            gaussian_precision: None,
        })
    }

    /// `π = N(0, β⁻¹ I_d)`, i.e. `V(x) = β‖x‖²/2`.
    pub fn isotropic_gaussian(beta: f64, dim: usize) -> Result<Self> {
        let mut t = Self::new(
            dim,
            Arc::new(move |x: &DVector<f64>| 0.5 * beta * x.norm_squared()),
            Arc::new(move |x: &DVector<f64>| x * beta),
            beta,
        )?;
        t.gaussian_precision = Some(beta);
        Ok(t)
    }

    pub fn from_potential_1d(v: &Potential1D) -> Result<Self> {
        let (a, b) = (v.clone(), v.clone());
        Self::new(
            1,
            Arc::new(move |x: &DVector<f64>| a.value(x[0])),
            Arc::new(move |x: &DVector<f64>| DVector::from_element(1, b.derivative(x[0]))),
            v.beta(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn potential(&self, x: &DVector<f64>) -> f64 {
        (self.potential)(x)
    }

    pub fn score(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingMethod {
    ExactGaussian,
    InverseCdf1d,
    /// Unadjusted Langevin; biased at order `step`. One chain per stream.
    Langevin { step: f64, burn_in: usize, thin: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub samples: Vec<DVector<f64>>,
    pub seed: u64,
    pub method: SamplingMethod,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        let mut out = header.join(",") + "\n";
        for s in &self.samples {
            let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stream_sizes(n: usize) -> Vec<usize> {
    let k = STREAMS as usize;
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Normalized CDF of a 1D density on a fixed grid.
struct InverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(target: &Target) -> Result<Self> {
        let h = 2.0 * INVERSE_CDF_RANGE / (INVERSE_CDF_POINTS - 1) as f64;
        let nodes: Vec<f64> = (0..INVERSE_CDF_POINTS).map(|i| -INVERSE_CDF_RANGE + i as f64 * h).collect();
        let log_p: Vec<f64> = nodes.iter().map(|&x| -target.potential(&DVector::from_element(1, x))).collect();
        if log_p.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::Unnormalizable("potential is not finite on the grid".into()));
        }
        let top = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = log_p.iter().map(|l| (l - top).exp()).collect();
        let edge = p[0].max(p[p.len() - 1]);
        if edge > 1e-12 {
            return Err(Error::Unnormalizable(format!(
                "density at ±{INVERSE_CDF_RANGE} is {edge:e} of its peak"
            )));
        }
        let mut cdf = vec![0.0; p.len()];
        for i in 1..p.len() {
            cdf[i] = cdf[i - 1] + 0.5 * h * (p[i - 1] + p[i]);
        }
        let total = cdf[cdf.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { nodes, cdf })
    }

    fn quantile(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[k - 1] + frac * (self.nodes[k] - self.nodes[k - 1])
    }
}

/// Draws `n` samples from `π`.
pub fn sample_pi(target: &Target, n: usize, seed: u64, method: SamplingMethod) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "need at least one sample",
        });
    }
    let d = target.dim;
    let sizes = stream_sizes(n);
    let chunks: Vec<Vec<DVector<f64>>> = match method {
        SamplingMethod::ExactGaussian => {
            let beta = target.gaussian_precision.ok_or(Error::InvalidParameter {
                name: "method",
                value: f64::NAN,
                reason: "exact sampling requires an isotropic Gaussian target",
            })?;
            let sd = beta.sqrt().recip();
            sizes
                .par_iter()
                .enumerate()
                .map(|(k, &m)| {
                    let mut rng = stream_rng(seed, k as u64);
                    (0..m)
                        .map(|_| DVector::from_fn(d, |_, _| sd * rng.sample::<f64, _>(StandardNormal)))
                        .collect()
                })
                .collect()
        }
        SamplingMethod::InverseCdf1d => {
            if d != 1 {
                return Err(Error::DimensionMismatch { expected: 1, found: d });
            }
            let table = InverseCdf::new(target)?;
            sizes
                .par_iter()
                .enumerate()
                .map(|(k, &m)| {
                    let mut rng = stream_rng(seed, k as u64);
                    (0..m)
                        .map(|_| DVector::from_element(1, table.quantile(rng.random::<f64>())))
                        .collect()
                })
                .collect()
        }
        SamplingMethod::Langevin { step, burn_in, thin } => {
            check_positive("step", step)?;
            if step * target.beta >= 1.0 {
                return Err(Error::OutsideRegime(format!("Langevin step {step} must be below 1/beta")));
            }
            let thin = thin.max(1);
            let noise = (2.0 * step).sqrt();
            sizes
                .par_iter()
                .enumerate()
                .map(|(k, &m)| {
                    let mut rng = stream_rng(seed, k as u64);
                    let mut x = DVector::<f64>::zeros(d);
                    let mut advance = |x: &mut DVector<f64>| {
                        let g = target.score(x);
                        *x -= g * step;
                        for xi in x.iter_mut() {
                            *xi += noise * rng.sample::<f64, _>(StandardNormal);
                        }
                    };
                    for _ in 0..burn_in {
                        advance(&mut x);
                    }
                    let mut out = Vec::with_capacity(m);
                    for _ in 0..m {
                        for _ in 0..thin {
                            advance(&mut x);
                        }
                        out.push(x.clone());
                    }
                    out
                })
                .collect()
        }
    };
    Ok(SampleSet {
        samples: chunks.into_iter().flatten().collect(),
        seed,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfRow {
    pub lambda: f64,
    pub empirical: f64,
    pub bound: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub relative_se: f64,
    /// `empirical ≤ bound + 3·SE`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfReport {
    pub beta: f64,
    pub rows: Vec<MgfRow>,
    pub pass: bool,
}

/// Empirical `E exp(λ⟨e, ∇V(X)⟩)` against `exp(λ²β/2)` with a 200-resample
/// bootstrap for the standard error and a 95% percentile interval.
pub fn score_mgf_check(samples: &SampleSet, target: &Target, e: &DVector<f64>, lambdas: &[f64]) -> Result<MgfReport> {
    if e.len() != target.dim {
        return Err(Error::DimensionMismatch {
            expected: target.dim,
            found: e.len(),
        });
    }
    if (e.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "e",
            value: e.norm(),
            reason: "direction must be a unit vector",
        });
    }
    let sb = target.beta.sqrt();
    if let Some(&lambda) = lambdas.iter().find(|l| !(l.is_finite() && l.abs() * sb <= MAX_LAMBDA_SQRT_BETA)) {
        return Err(Error::MgfOverflow { lambda });
    }
    let scores: Vec<f64> = samples.samples.par_iter().map(|x| e.dot(&target.score(x))).collect();
    let n = scores.len();
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let values: Vec<f64> = scores.iter().map(|s| (lambda * s).exp()).collect();
            let empirical = values.iter().sum::<f64>() / n as f64;
            let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream_rng(samples.seed ^ 0xb007_57a9, b as u64);
                    (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
                })
                .collect();
            boot.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean_b = boot.iter().sum::<f64>() / boot.len() as f64;
            let se = (boot.iter().map(|x| (x - mean_b).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt();
            let bound = (0.5 * lambda * lambda * target.beta).exp();
            MgfRow {
                lambda,
                empirical,
                bound,
                ratio: empirical / bound,
                std_error: se,
                ci_low: quantile_sorted(&boot, 0.025),
                ci_high: quantile_sorted(&boot, 0.975),
                relative_se: se / empirical,
                pass: empirical <= bound + 3.0 * se,
            }
        })
        .collect::<Vec<_>>();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MgfReport {
        beta: target.beta,
        rows,
        pass,
    })
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let pos = level.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub delta: f64,
    pub quantile: f64,
    /// `√(βd) + √(β log(1/δ))`.
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub beta: f64,
    pub dim: usize,
    pub rows: Vec<TailRow>,
    /// Smallest `C` with `quantile(δ) ≤ C (√(βd) + √(β log(1/δ)))` for all δ.
    pub fitted_c: f64,
}

/// Empirical `1 − δ` quantiles of `‖∇V(X)‖` and the fitted constant.
pub fn score_norm_tail(samples: &SampleSet, target: &Target, deltas: &[f64]) -> Result<TailReport> {
    let n = samples.len();
    for &delta in deltas {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "tail level must lie in (0, 1)",
            });
        }
        let required = (100.0 / delta).ceil() as usize;
        if n < required {
            return Err(Error::InsufficientSamples { required, available: n });
        }
    }
    let mut norms: Vec<f64> = samples.samples.par_iter().map(|x| target.score(x).norm()).collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (beta, d) = (target.beta, target.dim);
    let rows: Vec<TailRow> = deltas
        .iter()
        .map(|&delta| {
            let quantile = quantile_sorted(&norms, 1.0 - delta);
            let reference = (beta * d as f64).sqrt() + (beta * (1.0 / delta).ln()).sqrt();
            TailRow {
                delta,
                quantile,
                reference,
                ratio: quantile / reference,
            }
        })
        .collect();
    let fitted_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(TailReport { beta, dim: d, rows, fitted_c })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMoments {
    pub mean: Vec<f64>,
    pub mean_std_error: Vec<f64>,
    /// Every coordinate of `E ∇V` within four standard errors of zero.
    pub mean_is_zero: bool,
    pub second_moment: f64,
    pub second_moment_std_error: f64,
    /// `E‖∇V‖² ≤ βd` up to three standard errors.
    pub second_moment_within_bound: bool,
}

pub fn score_moments(samples: &SampleSet, target: &Target) -> ScoreMoments {
    let scores: Vec<DVector<f64>> = samples.samples.par_iter().map(|x| target.score(x)).collect();
    let n = scores.len() as f64;
    let d = target.dim;
    let mean: Vec<f64> = (0..d).map(|k| scores.iter().map(|s| s[k]).sum::<f64>() / n).collect();
    let mean_std_error: Vec<f64> = (0..d)
        .map(|k| (scores.iter().map(|s| (s[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt())
        .collect();
    let sq: Vec<f64> = scores.iter().map(|s| s.norm_squared()).collect();
    let second = sq.iter().sum::<f64>() / n;
    let second_se = (sq.iter().map(|v| (v - second).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    ScoreMoments {
        mean_is_zero: mean.iter().zip(&mean_std_error).all(|(m, se)| m.abs() <= 4.0 * se),
        mean,
        mean_std_error,
        second_moment: second,
        second_moment_std_error: second_se,
        second_moment_within_bound: second <= target.beta * d as f64 + 3.0 * second_se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn perturbed_target() -> Target {
        let v = Potential1D::new(
            Arc::new(|x: f64| 0.5 * x * x + 0.1 * x.sin()),
            Arc::new(|x: f64| x + 0.1 * x.cos()),
            1.1,
        )
        .unwrap();
        Target::from_potential_1d(&v).unwrap()
    }

    /// Independent CDF of `e^{−V}` by composite Simpson on `[−12, 12]`.
    fn simpson_cdf(v: impl Fn(f64) -> f64, x: f64) -> f64 {
        let integrate = |a: f64, b: f64| {
            let m = 4000;
            let h = (b - a) / m as f64;
            let mut s = (-v(a)).exp() + (-v(b)).exp();
            for k in 1..m {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * (-v(a + k as f64 * h)).exp();
            }
            s * h / 3.0
        };
        integrate(-12.0, x) / integrate(-12.0, 12.0)
    }

    #[test]
    fn gaussian_sampler_sanity_and_determinism() {
        let t = Target::isotropic_gaussian(2.0, 3).unwrap();
        let n = 100_000;
        let s = sample_pi(&t, n, 7, SamplingMethod::ExactGaussian).unwrap();
        assert_eq!(s.len(), n);
        let mean = s.samples.iter().fold(DVector::zeros(3), |acc, x| acc + x) / n as f64;
        assert!(mean.norm() < 4.0 * (3.0 / (2.0 * n as f64)).sqrt());
        let again = sample_pi(&t, n, 7, SamplingMethod::ExactGaussian).unwrap();
        assert_eq!(s, again);
        let other = sample_pi(&t, n, 8, SamplingMethod::ExactGaussian).unwrap();
        assert_ne!(s.samples[0], other.samples[0]);

        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = single.install(|| sample_pi(&t, 1000, 7, SamplingMethod::ExactGaussian).unwrap());
        assert_eq!(serial, sample_pi(&t, 1000, 7, SamplingMethod::ExactGaussian).unwrap());
    }

    #[test]
    fn inverse_cdf_matches_quadrature_cdf() {
        let t = perturbed_target();
        let n = 100_000;
        let s = sample_pi(&t, n, 3, SamplingMethod::InverseCdf1d).unwrap();
        let mut xs: Vec<f64> = s.samples.iter().map(|x| x[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let v = |x: f64| 0.5 * x * x + 0.1 * x.sin();
        let mut ks = 0.0f64;
        for (k, &x) in xs.iter().enumerate().step_by(97) {
            let f = simpson_cdf(v, x);
            ks = ks.max((f - k as f64 / n as f64).abs()).max((f - (k + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn sampler_errors() {
        let t = perturbed_target();
        assert!(sample_pi(&t, 10, 0, SamplingMethod::ExactGaussian).is_err());
        assert!(sample_pi(&t, 0, 0, SamplingMethod::InverseCdf1d).is_err());
        let g = Target::isotropic_gaussian(1.0, 2).unwrap();
        assert!(sample_pi(&g, 10, 0, SamplingMethod::InverseCdf1d).is_err());
        let flat = Target::new(
            1,
            Arc::new(|x: &DVector<f64>| 0.001 * x[0].abs()),
            Arc::new(|x: &DVector<f64>| DVector::from_element(1, 0.001 * x[0].signum())),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            sample_pi(&flat, 10, 0, SamplingMethod::InverseCdf1d),
            Err(Error::Unnormalizable(_))
        ));
    }

    #[test]
    fn langevin_has_small_bias() {
        let t = Target::isotropic_gaussian(1.0, 2).unwrap();
        let method = SamplingMethod::Langevin {
            step: 0.05,
            burn_in: 200,
            thin: 5,
        };
        let s = sample_pi(&t, 20_000, 1, method).unwrap();
        let var = s.samples.iter().map(|x| x.norm_squared()).sum::<f64>() / (2.0 * s.len() as f64);
        // ULA on N(0, 1) is stationary at variance 1/(1 − h/2).
        assert_relative_eq!(var, 1.0 / (1.0 - 0.025), max_relative = 0.05);
    }

    #[test]
    fn gaussian_mgf_saturates_bound() {
        for d in [1, 5] {
            let t = Target::isotropic_gaussian(1.0, d).unwrap();
            let s = sample_pi(&t, 100_000, 11, SamplingMethod::ExactGaussian).unwrap();
            let e = DVector::from_element(d, 1.0 / (d as f64).sqrt());
            let r = score_mgf_check(&s, &t, &e, &[0.0, 1.0, -0.5]).unwrap();
            assert!(r.pass);
            assert_eq!(r.rows[0].empirical, 1.0);
            assert_eq!(r.rows[0].bound, 1.0);
            let row = &r.rows[1];
            assert_relative_eq!(row.bound, 0.5f64.exp(), max_relative = 1e-15);
            assert!((row.empirical - row.bound).abs() <= 3.0 * row.std_error);
            assert!(row.ci_low < row.empirical && row.empirical < row.ci_high);
        }
    }

    #[test]
    fn perturbed_mgf_is_dominated() {
        let t = perturbed_target();
        let s = sample_pi(&t, 100_000, 5, SamplingMethod::InverseCdf1d).unwrap();
        let r = score_mgf_check(&s, &t, &DVector::from_element(1, 1.0), &[-1.0, -0.5, 0.5, 1.0]).unwrap();
        for row in &r.rows {
            assert!(row.empirical <= row.bound * (1.0 + 3.0 * row.relative_se), "{row:?}");
        }
        assert!(matches!(
            score_mgf_check(&s, &t, &DVector::from_element(1, 1.0), &[4.0]),
            Err(Error::MgfOverflow { .. })
        ));
        assert!(score_mgf_check(&s, &t, &DVector::from_element(1, 0.5), &[1.0]).is_err());
    }

    #[test]
    fn norm_tail_matches_chi_distribution() {
        let t = Target::isotropic_gaussian(1.0, 5).unwrap();
        let s = sample_pi(&t, 100_000, 13, SamplingMethod::ExactGaussian).unwrap();
        let deltas = [0.5, 0.1, 0.01];
        let r = score_norm_tail(&s, &t, &deltas).unwrap();
        let chi2 = ChiSquared::new(5.0).unwrap();
        for row in &r.rows {
            let exact = chi2.inverse_cdf(1.0 - row.delta).sqrt();
            assert_relative_eq!(row.quantile, exact, max_relative = 0.02);
        }
        assert!(r.fitted_c > 0.5 && r.fitted_c < 1.5, "C = {}", r.fitted_c);
        assert!(matches!(
            score_norm_tail(&s, &t, &[1e-4]),
            Err(Error::InsufficientSamples { required: 1_000_000, .. })
        ));
    }

    #[test]
    fn fitted_constant_is_stable_in_n() {
        let t = perturbed_target();
        let deltas = [0.5, 0.1, 0.01];
        let small = sample_pi(&t, 10_000, 21, SamplingMethod::InverseCdf1d).unwrap();
        let large = sample_pi(&t, 100_000, 22, SamplingMethod::InverseCdf1d).unwrap();
        let c1 = score_norm_tail(&small, &t, &deltas).unwrap().fitted_c;
        let c2 = score_norm_tail(&large, &t, &deltas).unwrap().fitted_c;
        assert!(c1.is_finite() && c2.is_finite());
        assert_relative_eq!(c1, c2, max_relative = 0.1);
    }

    #[test]
    fn score_moment_identities() {
        let t = perturbed_target();
        let s = sample_pi(&t, 100_000, 9, SamplingMethod::InverseCdf1d).unwrap();
        let m = score_moments(&s, &t);
        assert!(m.mean_is_zero, "{m:?}");
        assert!(m.second_moment_within_bound, "{m:?}");
        let g = Target::isotropic_gaussian(1.5, 4).unwrap();
        let s = sample_pi(&g, 50_000, 9, SamplingMethod::ExactGaussian).unwrap();
        let m = score_moments(&s, &g);
        assert!(m.mean_is_zero && m.second_moment_within_bound);
        assert_relative_eq!(m.second_moment, 6.0, max_relative = 0.03);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 1.5);
        assert_eq!(quantile_sorted(&xs, 1.0), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.0), 0.0);
    }
}
