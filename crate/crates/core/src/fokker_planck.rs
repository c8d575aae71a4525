//! One-dimensional Fokker–Planck solver for `dX = −V′(X)dt + √2 dB` and
//! quadrature checks of the Langevin functional inequalities.
//!
//! The density evolves by `∂_t p = ∂_x(p V′ + ∂_x p)`. Space is discretized
//! by finite volumes on the nodes of a [`Grid1D`] (half cells at the two
//! ends, zero flux through them), so the trapezoidal mass is conserved up to
//! rounding. Time stepping is Crank–Nicolson, started with four
//! backward-Euler half steps to damp the stiff modes excited by the
//! mollified Dirac initial condition.
//!
//! Test functions for the LGE and Harnack checks must be smooth and strictly
//! positive on the grid and its shifted copy. Only their values on the
//! truncated domain enter, so growth at infinity plays no role.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{theorem1_constants, BoundKind, Horizon};
use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::gaussian_info::RenyiOrder;
use crate::schedules::ScalarFn;

pub const MIN_POINTS: usize = 128;
pub const DEFAULT_POINTS: usize = 4096;
pub const DENSITY_FLOOR: f64 = 1e-300;
pub const MASS_TOL: f64 = 1e-6;
pub const BOUNDARY_RATIO: f64 = 1e-12;
/// Relative quadrature tolerance used by the verifiers.
pub const QUAD_TOL: f64 = 1e-3;
const MOLLIFIER_WIDTH: f64 = 3.0;
const MAX_SHIFT_FRACTION: f64 = 0.25;
const NEGATIVE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, n_points: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: upper - lower,
                reason: "need finite bounds with upper > lower",
            });
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidParameter {
                name: "n_points",
                value: n_points as f64,
                reason: "at least 128 grid points required",
            });
        }
        Ok(Self { lower, upper, n_points })
    }

    /// `[x0 − w, x0 + w]` with `w = 10 max(1, β^{−1/2})`.
    pub fn default_for(beta: f64, x0: f64, n_points: usize) -> Result<Self> {
        check_positive("beta", beta)?;
        let w = 10.0 * beta.powf(-0.5).max(1.0);
        Self::new(x0 - w, x0 + w, n_points)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.spacing()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Trapezoidal weights.
    fn weight(&self, i: usize) -> f64 {
        let dx = self.spacing();
        if i == 0 || i + 1 == self.n_points {
            0.5 * dx
        } else {
            dx
        }
    }
}

/// A potential `V` with `|V″| ≤ β`.
#[derive(Clone)]
pub struct Potential1D {
    value: ScalarFn,
    derivative: ScalarFn,
    beta: f64,
}

impl std::fmt::Debug for Potential1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential1D").field("beta", &self.beta).finish_non_exhaustive()
    }
}

impl Potential1D {
    /// Spot-checks the declared smoothness on 64 seeded pairs in `[−10, 10]`.
    pub fn new(value: ScalarFn, derivative: ScalarFn, beta: f64) -> Result<Self> {
        check_nonnegative("beta", beta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..64 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let y: f64 = rng.random_range(-10.0..10.0);
            let (dx, dy) = (derivative(x), derivative(y));
            if !(dx.is_finite() && dy.is_finite() && value(x).is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "V",
                    value: x,
                    reason: "potential or derivative not finite",
                });
            }
            if (dx - dy).abs() > beta * (x - y).abs() * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    value: beta,
                    reason: "V' is not beta-Lipschitz on a sampled pair",
                });
            }
        }
        Ok(Self { value, derivative, beta })
    }

    /// `V(x) = βx²/2`, the Ornstein–Uhlenbeck potential.
    pub fn quadratic(beta: f64) -> Result<Self> {
        Self::new(Arc::new(move |x| 0.5 * beta * x * x), Arc::new(move |x| beta * x), beta)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
}

/// Transition density `p_t(x0, ·)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn mass(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, p)| self.grid.weight(i) * p).sum()
    }

    /// Linear interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x - self.grid.lower) / self.grid.spacing();
        if !(0.0..=(self.grid.n_points - 1) as f64).contains(&s) {
            return 0.0;
        }
        let i = (s.floor() as usize).min(self.grid.n_points - 2);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// `∫ p g / ∫ p` by the trapezoidal rule.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if *p == 0.0 {
                    0.0
                } else {
                    self.grid.weight(i) * p * g(self.grid.node(i))
                }
            })
            .sum();
        num / self.mass()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p\n");
        for (i, p) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.node(i), p));
        }
        out
    }
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Operator `M` with `dp/dt = M p`, as three diagonals.
fn generator(potential: &Potential1D, grid: &Grid1D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.n_points;
    let dx = grid.spacing();
    // Flux through the face i + 1/2 is a_i p_i + b_i p_{i+1}.
    let (a, b): (Vec<f64>, Vec<f64>) = (0..n - 1)
        .map(|i| {
            let drift = potential.derivative(grid.node(i) + 0.5 * dx);
            (0.5 * drift - 1.0 / dx, 0.5 * drift + 1.0 / dx)
        })
        .unzip();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let w = grid.weight(i);
        if i + 1 < n {
            diag[i] += a[i] / w;
            upper[i] = b[i] / w;
        }
        if i > 0 {
            diag[i] -= b[i - 1] / w;
            lower[i] = -a[i - 1] / w;
        }
    }
    (lower, diag, upper)
}

/// Density of `X_t` started at `x0`.
pub fn solve_transition_density(potential: &Potential1D, x0: f64, t: f64, grid: &Grid1D) -> Result<DensityField> {
    check_positive("t", t)?;
    let dx = grid.spacing();
    let sd0 = MOLLIFIER_WIDTH * dx;
    if !(x0 - 8.0 * sd0 > grid.lower && x0 + 8.0 * sd0 < grid.upper) {
        return Err(Error::InvalidParameter {
            name: "x0",
            value: x0,
            reason: "initial point must lie inside the grid",
        });
    }
    let n = grid.n_points;
    let mut p: Vec<f64> = (0..n).map(|i| (-0.5 * ((grid.node(i) - x0) / sd0).powi(2)).exp()).collect();
    let m0: f64 = p.iter().enumerate().map(|(i, v)| grid.weight(i) * v).sum();
    p.iter_mut().for_each(|v| *v /= m0);

    let dt_max = if potential.beta > 0.0 { dx.min(0.1 / potential.beta) } else { dx };
    let steps = (t / dt_max).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let (ml, md, mu) = generator(potential, grid);

    let implicit = |theta_dt: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            ml.iter().map(|v| -theta_dt * v).collect(),
            md.iter().map(|v| 1.0 - theta_dt * v).collect(),
            mu.iter().map(|v| -theta_dt * v).collect(),
        )
    };
    let mut scratch = vec![0.0; n];

    let startup = steps.min(2);
    let (bl, bd, bu) = implicit(0.5 * dt);
    for _ in 0..2 * startup {
        solve_tridiagonal(&bl, &bd, &bu, &mut p, &mut scratch);
    }
    let (cl, cd, cu) = implicit(0.5 * dt);
    let mut rhs = vec![0.0; n];
    for _ in startup..steps {
        for i in 0..n {
            let mut s = p[i] + 0.5 * dt * md[i] * p[i];
            if i > 0 {
                s += 0.5 * dt * ml[i] * p[i - 1];
            }
            if i + 1 < n {
                s += 0.5 * dt * mu[i] * p[i + 1];
            }
            rhs[i] = s;
        }
        solve_tridiagonal(&cl, &cd, &cu, &mut rhs, &mut scratch);
        std::mem::swap(&mut p, &mut rhs);
    }

    let peak = p.iter().copied().fold(0.0f64, f64::max);
    for (i, v) in p.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLAMP * peak {
                return Err(Error::NegativeDensity { x: grid.node(i), value: *v });
            }
            *v = 0.0;
        }
    }
    let field = DensityField { grid: *grid, values: p, time: t };
    let mass = field.mass();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::MassDrift { mass });
    }
    let edge = field.values[0].max(field.values[n - 1]);
    if edge > BOUNDARY_RATIO * peak {
        return Err(Error::DomainTooSmall { ratio: edge / peak });
    }
    Ok(field)
}

fn check_shift(field: &DensityField, v: f64) -> Result<()> {
    let limit = MAX_SHIFT_FRACTION * field.grid.width();
    if !v.is_finite() || v.abs() > limit {
        return Err(Error::ShiftExitsDomain { shift: v, limit });
    }
    Ok(())
}

/// `R_q(law(X_t + v) ‖ law(X_t))` by trapezoidal quadrature of
/// `∫ (p(y − v)/p(y))^q p(y) dy`, interpolating `p` at the shifted nodes.
///
/// At `q = 1` the integrand is `a log(a/b) − a + b`, which has the same
/// integral and is pointwise nonnegative.
pub fn renyi_shift_quadrature(field: &DensityField, v: f64, q: RenyiOrder) -> Result<f64> {
    check_shift(field, v)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    let mass = field.mass();
    let qv = q.value();
    let mut acc = 0.0;
    for (i, &b_raw) in field.values.iter().enumerate() {
        let b = b_raw.max(DENSITY_FLOOR);
        if b <= DENSITY_FLOOR {
            continue;
        }
        let y = field.grid.node(i);
        let a = field.interpolate(y - v).max(DENSITY_FLOOR);
        let w = field.grid.weight(i) / mass;
        acc += w * if q.is_kl() {
            a * (a / b).ln() - a + b
        } else {
            (qv * a.ln() + (1.0 - qv) * b.ln()).exp()
        };
    }
    Ok(if q.is_kl() { acc.max(0.0) } else { (acc.ln() / (qv - 1.0)).max(0.0) })
}

/// Outcome of one numerical inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, pass: bool) -> Self {
        Self { lhs, rhs, slack: rhs - lhs, pass }
    }
}

/// Checks `R_q(δ_{x0}P_t ∗ δ_v ‖ δ_{x0}P_t) ≤ βq v²/(2(1 − e^{−2βt}))`.
pub fn verify_srt(potential: &Potential1D, x0: f64, v: f64, t: f64, q: RenyiOrder, grid: &Grid1D) -> Result<InequalityReport> {
    let field = solve_transition_density(potential, x0, t, grid)?;
    verify_srt_on(&field, potential.beta, v, q)
}

/// [`verify_srt`] on an already solved density.
pub fn verify_srt_on(field: &DensityField, beta: f64, v: f64, q: RenyiOrder) -> Result<InequalityReport> {
    let lhs = renyi_shift_quadrature(field, v, q)?;
    let rhs = theorem1_constants(BoundKind::SrtQ, beta, Horizon::finite(field.time)?, Some(q.value()), v.abs())?.value;
    Ok(InequalityReport::new(lhs, rhs, lhs <= rhs * (1.0 + QUAD_TOL)))
}

/// Smooth positive test function with its derivative.
#[derive(Clone)]
pub struct TestFunction {
    value: ScalarFn,
    derivative: ScalarFn,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TestFunction")
    }
}

impl TestFunction {
    pub fn new(value: ScalarFn, derivative: ScalarFn) -> Self {
        Self { value, derivative }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Arc::new(move |_| c), Arc::new(|_| 0.0))
    }

    /// `c · exp(a y)`.
    pub fn exponential(c: f64, a: f64) -> Self {
        Self::new(Arc::new(move |y| c * (a * y).exp()), Arc::new(move |y| c * a * (a * y).exp()))
    }

    /// `k + c y`; positive on a grid only when `k` dominates.
    pub fn affine(k: f64, c: f64) -> Self {
        Self::new(Arc::new(move |y| k + c * y), Arc::new(move |_| c))
    }

    /// `floor + exp(−(y − center)²/(2 width²))`.
    pub fn gaussian_bump(floor: f64, center: f64, width: f64) -> Self {
        let w2 = width * width;
        Self::new(
            Arc::new(move |y| floor + (-(y - center).powi(2) / (2.0 * w2)).exp()),
            Arc::new(move |y| -(y - center) / w2 * (-(y - center).powi(2) / (2.0 * w2)).exp()),
        )
    }

    pub fn value(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        (self.derivative)(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InequalityMode {
    Lge,
    ShP(f64),
    ShLog,
}

/// Checks one of
///
/// * `LGE`: `(P_t f′)²/P_t f ≤ 2β/(1 − e^{−2βt}) · (P_t(f log f) − P_t f log P_t f)`
/// * `SH_p`: `(P_t f(· + v))^p ≤ exp(βp v²/(2(p − 1)(1 − e^{−2βt}))) P_t(f^p)`
/// * `SH_log`: `P_t f(· + v) ≤ log P_t(e^f) + βv²/(2(1 − e^{−2βt}))`
///
/// at `x0`. Passes when `lhs ≤ rhs + 10⁻³|rhs| + 10⁻¹²`.
pub fn verify_lge_and_harnack(
    potential: &Potential1D,
    x0: f64,
    t: f64,
    f: &TestFunction,
    mode: InequalityMode,
    v: f64,
    grid: &Grid1D,
) -> Result<InequalityReport> {
    let field = solve_transition_density(potential, x0, t, grid)?;
    verify_lge_and_harnack_on(&field, potential.beta, f, mode, v)
}

/// [`verify_lge_and_harnack`] on an already solved density.
pub fn verify_lge_and_harnack_on(
    field: &DensityField,
    beta: f64,
    f: &TestFunction,
    mode: InequalityMode,
    v: f64,
) -> Result<InequalityReport> {
    let shift = if matches!(mode, InequalityMode::Lge) { 0.0 } else { v };
    check_shift(field, shift)?;
    for i in 0..field.grid.n_points {
        for y in [field.grid.node(i), field.grid.node(i) + shift] {
            let fy = f.value(y);
            if !(fy.is_finite() && fy > 0.0) {
                return Err(Error::NonPositiveTestFunction { x: y, value: fy });
            }
        }
    }
    let horizon = Horizon::finite(field.time)?;
    let (lhs, rhs) = match mode {
        InequalityMode::Lge => {
            let pf = field.expectation(|y| f.value(y));
            let pdf = field.expectation(|y| f.derivative(y));
            let pflogf = field.expectation(|y| {
                let fy = f.value(y);
                fy * fy.ln()
            });
            let c = theorem1_constants(BoundKind::Lge, beta, horizon, None, 0.0)?.value;
            (pdf * pdf / pf, c * (pflogf - pf * pf.ln()))
        }
        InequalityMode::ShP(p) => {
            let e = theorem1_constants(BoundKind::ShP, beta, horizon, Some(p), v.abs())?.value;
            let shifted = field.expectation(|y| f.value(y + v));
            let powered = field.expectation(|y| f.value(y).powf(p));
            (shifted.powf(p), e.exp() * powered)
        }
        InequalityMode::ShLog => {
            let c = theorem1_constants(BoundKind::ShLog, beta, horizon, None, v.abs())?.value;
            let shifted = field.expectation(|y| f.value(y + v));
            let log_mgf = field.expectation(|y| f.value(y).exp()).ln();
            (shifted, log_mgf + c)
        }
    };
    let pass = lhs <= rhs + QUAD_TOL * rhs.abs() + 1e-12;
    Ok(InequalityReport::new(lhs, rhs, pass))
}
