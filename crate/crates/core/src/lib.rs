//! # shl-core
//!
//! Sharp forward-regularity constants for (discretized) Itô diffusions and
//! the machinery that checks them numerically.
//!
//! The forward regularity of a diffusion with `L`-Lipschitz drift and
//! diffusion matrix satisfying `σσᵀ ⪰ λI` is captured by shift reverse
//! transport inequalities
//!
//! ```text
//! R_q(δ_x P_T ∗ δ_v ‖ δ_x P_T) ≤ qL‖v‖² / (λ (1 − e^{−2LT}))
//! ```
//!
//! and their Hölder duals, the shift Harnack inequalities. The constants are
//! optimal: the Ornstein–Uhlenbeck process attains them exactly.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`gaussian_info`] | Rényi/KL/χ² calculus for Gaussians with a shared covariance |
//! | [`kernels`] | Euler kernels and exact Ornstein–Uhlenbeck marginals |
//! | [`schedules`] | Optimal discrete and continuous shift schedules, their costs, an LQR oracle |
//! | [`bounds`] | Every regularity constant plus the Harnack/transport duality |
//! | [`coupling`] | Finite measures, exact small optimal transport, the convexity principle, and the finite-space shifted composition check |
//! | [`fokker_planck`] | 1D Crank–Nicolson transition densities and the functional-inequality verifiers |
//! | [`sampler`] | Exact and Langevin sampling of `π ∝ e^{−V}` and score concentration checks |
//! | [`shifted_div`] | Standard and dual shifted Rényi divergences and the generalized convolution lemma |
//!
//! ## Conventions
//!
//! Rényi divergence of order `q ≥ 1` is `R_q(μ‖ν) = log ∫ (dμ/dν)^q dν / (q − 1)`,
//! with `q = 1` read as KL. Its `f`-divergence companion is
//! `D_q = ∫ (dμ/dν)^q dν − 1`, so `R_q = log(1 + D_q)/(q − 1)`; at `q = 2`
//! this gives `R_2 = log(1 + χ²)`.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod fokker_planck;
pub mod gaussian_info;
pub mod kernels;
pub mod sampler;
pub mod schedules;
pub mod shifted_div;

pub use error::{Error, Result};
pub use gaussian_info::{GaussianMeasure, RenyiOrder};
