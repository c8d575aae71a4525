//! Shift schedules: the interpolation `a_0 = 0 ≤ … ≤ a_N = 1` that spreads a
//! terminal shift `v` over the steps of a chain (`v_n = a_n v`).
//!
//! For a kernel with one-step constants `(c₁, c₂)` the multi-step cost is
//! `Σ (c₁ a_n + c₂ (a_{n+1} − a_n))²`. Writing `r = 1 − c₁/c₂` and
//! `b_{n+1} = a_{n+1} − r a_n` turns it into `c₂² Σ b_n²` under the single
//! linear constraint `Σ r^{N−n} b_n = 1`, whose minimizer is
//! `b_i = r^{N−i}(1 − r²)/(1 − r^{2N})`. The continuous analogue minimizes
//! `∫₀ᵀ (L a_t + ȧ_t)² dt` and is solved by `a_t = sinh(Lt)/sinh(LT)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_nonnegative, check_positive, Error, Result};

const ENDPOINT_TOL: f64 = 1e-12;
const MONOTONE_TOL: f64 = 1e-14;
/// Largest `N` accepted by the dense normal-equation oracle.
pub const BRUTE_FORCE_MAX_STEPS: usize = 16;
/// Composite Simpson panel count for schedule costs.
pub const SIMPSON_PANELS: usize = 1 << 12;
const SIMPSON_REL_TOL: f64 = 1e-10;
const SAMPLING_GRID: usize = 1024;

/// `(1 − r²)/(1 − r^{2N})` for `r = 1 − one_minus_r ∈ (0, 1]`, with the
/// `r = 1` limit `1/N`. Evaluated through `expm1`/`ln_1p` so that `r` close
/// to one does not cancel.
pub fn contraction_gain(one_minus_r: f64, steps: u64) -> f64 {
    debug_assert!(steps >= 1);
    let n = steps as f64;
    if one_minus_r == 0.0 {
        return 1.0 / n;
    }
    let r = 1.0 - one_minus_r;
    let numerator = one_minus_r * (1.0 + r);
    let denominator = -(2.0 * n * (-one_minus_r).ln_1p()).exp_m1();
    numerator / denominator
}

/// A discrete schedule `a_0 = 0, …, a_N = 1`, nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSchedule {
    values: Vec<f64>,
}

impl ShiftSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InfeasibleSchedule("need at least a_0 and a_N".into()));
        }
        if values[0].abs() > ENDPOINT_TOL {
            return Err(Error::InfeasibleSchedule(format!("a_0 = {} != 0", values[0])));
        }
        let last = values[values.len() - 1];
        if (last - 1.0).abs() > ENDPOINT_TOL {
            return Err(Error::InfeasibleSchedule(format!("a_N = {last} != 1")));
        }
        if let Some(n) = values.windows(2).position(|w| !(w[1] >= w[0] - MONOTONE_TOL)) {
            return Err(Error::InfeasibleSchedule(format!(
                "decreasing at step {n}: a_{n} = {} > a_{} = {}",
                values[n],
                n + 1,
                values[n + 1]
            )));
        }
        Ok(Self { values })
    }

    /// Linear interpolation `a_n = n/N`.
    pub fn linear(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: 0.0,
                reason: "number of steps must be >= 1",
            });
        }
        Self::new((0..=steps).map(|n| n as f64 / steps as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Increments `b_{n+1} = a_{n+1} − r a_n`, for `n = 0..N`.
    pub fn increments(&self, r: f64) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - r * w[0]).collect()
    }

    /// CSV with header `n,a`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,a\n");
        for (n, a) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{a}\n"));
        }
        out
    }
}

fn check_cost_constants(c1: f64, c2: f64) -> Result<()> {
    check_nonnegative("c1", c1)?;
    check_positive("c2", c2)
}

/// Closed-form minimizer of [`discrete_cost`] over schedules with `N` steps.
///
/// Requires `0 ≤ c₁ < c₂`; at `c₁ = 0` the schedule is linear.
pub fn optimal_discrete_schedule(c1: f64, c2: f64, steps: usize) -> Result<ShiftSchedule> {
    check_cost_constants(c1, c2)?;
    if c1 >= c2 {
        return Err(Error::OutsideRegime(format!(
            "closed form needs c1 < c2, got c1 = {c1}, c2 = {c2}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "number of steps must be >= 1",
        });
    }
    let one_minus_r = c1 / c2;
    let r = 1.0 - one_minus_r;
    let gain = contraction_gain(one_minus_r, steps as u64);

    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut a = 0.0;
    for i in 1..=steps {
        let b = r.powi((steps - i) as i32) * gain;
        a = r * a + b;
        values.push(a);
    }
    // The inequality constraints b_{n+1} ≥ (1 − r) a_n are exactly
    // monotonicity; they are inactive at the optimum.
    ShiftSchedule::new(values)
}

/// `Σ_{n=0}^{N−1} (c₁ a_n + c₂ (a_{n+1} − a_n))²`.
pub fn discrete_cost(schedule: &ShiftSchedule, c1: f64, c2: f64) -> f64 {
    schedule
        .values
        .windows(2)
        .map(|w| {
            let e = c1 * w[0] + c2 * (w[1] - w[0]);
            e * e
        })
        .sum()
}

/// Optimal cost `c₂² (1 − r²)/(1 − r^{2N})`.
pub fn optimal_discrete_cost(c1: f64, c2: f64, steps: usize) -> Result<f64> {
    check_cost_constants(c1, c2)?;
    if c1 >= c2 {
        return Err(Error::OutsideRegime(format!(
            "closed form needs c1 < c2, got c1 = {c1}, c2 = {c2}"
        )));
    }
    Ok(c2 * c2 * contraction_gain(c1 / c2, steps as u64))
}

/// Minimizes [`discrete_cost`] by solving the `(N−1)×(N−1)` tridiagonal
/// normal equations directly in terms of `(c₁, c₂)`.
///
/// This is an independent oracle for [`optimal_discrete_schedule`]; it does
/// not use the closed form.
pub fn brute_force_schedule(c1: f64, c2: f64, steps: usize) -> Result<ShiftSchedule> {
    check_cost_constants(c1, c2)?;
    if steps == 0 || steps > BRUTE_FORCE_MAX_STEPS {
        return Err(Error::InvalidParameter {
            name: "N",
            value: steps as f64,
            reason: "oracle supports 1 <= N <= 16",
        });
    }
    if steps == 1 {
        return ShiftSchedule::new(vec![0.0, 1.0]);
    }
    // cost = Σ (c₂ a_{n+1} − s a_n)², s = c₂ − c₁
    let s = c2 - c1;
    let m = steps - 1;
    let mut hessian = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for k in 0..m {
        hessian[(k, k)] = c2 * c2 + s * s;
        if k + 1 < m {
            hessian[(k, k + 1)] = -c2 * s;
            hessian[(k + 1, k)] = -c2 * s;
        }
    }
    rhs[m - 1] = c2 * s;
    let interior = hessian
        .lu()
        .solve(&rhs)
        .expect("normal equations are positive definite for c2 > 0");

    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    values.extend(interior.iter().copied());
    values.push(1.0);
    ShiftSchedule::new(values)
}

/// Shared real function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous schedule `t ↦ a_t` on `[0, T]` with its derivative.
#[derive(Clone)]
pub struct ContinuousSchedule {
    horizon: f64,
    value: ScalarFn,
    derivative: ScalarFn,
}

impl fmt::Debug for ContinuousSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousSchedule")
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl ContinuousSchedule {
    /// Validates the boundary values and monotonicity on a sampling grid.
    pub fn new(horizon: f64, value: ScalarFn, derivative: ScalarFn) -> Result<Self> {
        check_positive("T", horizon)?;
        let a0 = value(0.0);
        let at = value(horizon);
        if a0.abs() > ENDPOINT_TOL || (at - 1.0).abs() > ENDPOINT_TOL {
            return Err(Error::InfeasibleSchedule(format!("boundary values a_0 = {a0}, a_T = {at}")));
        }
        let mut prev = a0;
        for k in 1..=SAMPLING_GRID {
            let t = horizon * k as f64 / SAMPLING_GRID as f64;
            let a = value(t);
            if !(a >= prev - MONOTONE_TOL) {
                return Err(Error::InfeasibleSchedule(format!("decreasing near t = {t}")));
            }
            prev = a;
        }
        Ok(Self {
            horizon,
            value,
            derivative,
        })
    }

    /// `a_t = t/T`.
    pub fn linear(horizon: f64) -> Result<Self> {
        check_positive("T", horizon)?;
        Self::new(horizon, Arc::new(move |t| t / horizon), Arc::new(move |_| 1.0 / horizon))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }

    /// Adds `amplitude · η(t)` where `η` vanishes at both endpoints.
    pub fn perturbed(&self, amplitude: f64, bump: ScalarFn, bump_derivative: ScalarFn) -> Result<Self> {
        let (v, dv) = (self.value.clone(), self.derivative.clone());
        Self::new(
            self.horizon,
            Arc::new(move |t| v(t) + amplitude * bump(t)),
            Arc::new(move |t| dv(t) + amplitude * bump_derivative(t)),
        )
    }

    /// CSV with header `t,a` at `samples + 1` equispaced times.
    pub fn to_csv(&self, samples: usize) -> String {
        let samples = samples.max(1);
        let mut out = String::from("t,a\n");
        for k in 0..=samples {
            let t = self.horizon * k as f64 / samples as f64;
            out.push_str(&format!("{t},{}\n", self.value(t)));
        }
        out
    }
}

/// `a_t = sinh(Lt)/sinh(LT)` with `ȧ_t = L cosh(Lt)/sinh(LT)`.
pub fn continuous_schedule_sinh(lipschitz: f64, horizon: f64) -> Result<ContinuousSchedule> {
    check_positive("L", lipschitz)?;
    check_positive("T", horizon)?;
    let l = lipschitz;
    let denom = (l * horizon).sinh();
    if !denom.is_finite() {
        return Err(Error::OutsideRegime(format!("sinh(LT) overflows for L T = {}", l * horizon)));
    }
    ContinuousSchedule::new(
        horizon,
        Arc::new(move |t| if t >= horizon { 1.0 } else { (l * t).sinh() / denom }),
        Arc::new(move |t| l * (l * t).cosh() / denom),
    )
}

/// Closed-form cost of the sinh schedule, `2L/(1 − e^{−2LT})`.
pub fn sinh_schedule_cost(lipschitz: f64, horizon: f64) -> Result<f64> {
    check_positive("L", lipschitz)?;
    check_positive("T", horizon)?;
    Ok(-2.0 * lipschitz / (-2.0 * lipschitz * horizon).exp_m1())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    debug_assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `∫₀ᵀ (L a_t + ȧ_t)² dt` by composite Simpson on 2¹² panels.
///
/// The Richardson estimate `|S_n − S_{n/2}|/15` must be below `1e-10`
/// relative, otherwise [`Error::QuadratureNotConverged`] is returned.
pub fn continuous_cost(schedule: &ContinuousSchedule, lipschitz: f64) -> Result<f64> {
    check_nonnegative("L", lipschitz)?;
    let integrand = |t: f64| {
        let e = lipschitz * schedule.value(t) + schedule.derivative(t);
        e * e
    };
    let fine = simpson(&integrand, 0.0, schedule.horizon, SIMPSON_PANELS);
    let coarse = simpson(&integrand, 0.0, schedule.horizon, SIMPSON_PANELS / 2);
    let estimate = (fine - coarse).abs() / 15.0;
    let tolerance = SIMPSON_REL_TOL * fine.abs().max(1.0);
    if !(estimate <= tolerance) {
        return Err(Error::QuadratureNotConverged {
            achieved: estimate,
            tolerance,
        });
    }
    Ok(fine)
}
