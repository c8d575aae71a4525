//! Sharp forward-regularity constants and the Harnack/transport duality.
//!
//! Discrete time (Euler kernel, `r = 1 − Lh`):
//!
//! ```text
//! R_q(δ_x P̂_h^N ∗ δ_v ‖ δ_x P̂_h^N) ≤ q (1 − r²) ‖v‖² / (2λh (1 − r^{2N}))
//! ```
//!
//! Continuous time: `R_q(δ_x P_T ∗ δ_v ‖ δ_x P_T) ≤ qL‖v‖² / (λ(1 − e^{−2LT}))`.
//!
//! For Langevin dynamics with `β`-smooth potential (`σ = √2`, `λ = 2`,
//! `L = β`) these specialize to the constants collected in
//! [`theorem1_constants`]. By Hölder duality a reverse transport bound
//! `R_q ≤ R` is equivalent to a shift Harnack inequality
//! `μ(f(·+v)) ≤ C μ(f^p)^{1/p}` with `C = exp((q − 1) R / q)`.
//!
//! Two related statements are left open and are not checked numerically:
//! whether the curvature upper bound `∇²V ⪯ βI` alone already implies
//! `SH_p`, and whether `‖P_s∇f‖ ≤ e^{βs}‖∇P_s f‖` holds in that setting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::gaussian_info::RenyiOrder;
use crate::kernels::StepSize;
use crate::schedules::contraction_gain;

/// Which inequality a [`RegularityBound`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundKind {
    /// Shift reverse transport, Rényi order `q > 1`.
    #[serde(rename = "SRT_q")]
    SrtQ,
    /// Shift reverse transport in KL.
    #[serde(rename = "SRT_1")]
    Srt1,
    /// Shift Harnack with exponent `p > 1`; the value is the exponent
    /// `E` in `(P_t f(·+v))^p ≤ e^E P_t(f^p)`.
    #[serde(rename = "SH_p")]
    ShP,
    /// Shift log-Harnack; the value is the additive constant.
    #[serde(rename = "SH_log")]
    ShLog,
    /// Local gradient-entropy bound; the value is the multiplier of the
    /// local entropy.
    #[serde(rename = "LGE")]
    Lge,
    /// One-step-to-multi-step bound for a generic kernel.
    #[serde(rename = "multi_step")]
    MultiStep,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::SrtQ => "SRT_q",
            BoundKind::Srt1 => "SRT_1",
            BoundKind::ShP => "SH_p",
            BoundKind::ShLog => "SH_log",
            BoundKind::Lge => "LGE",
            BoundKind::MultiStep => "multi_step",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "srt_q" | "srtq" => Ok(BoundKind::SrtQ),
            "srt_1" | "srt1" => Ok(BoundKind::Srt1),
            "sh_p" | "shp" => Ok(BoundKind::ShP),
            "sh_log" | "shlog" => Ok(BoundKind::ShLog),
            "lge" => Ok(BoundKind::Lge),
            "multi_step" | "multistep" => Ok(BoundKind::MultiStep),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// Time horizon; `Infinite` selects the stationary constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn finite(t: f64) -> Result<Self> {
        check_positive("t", t)?;
        Ok(Horizon::Finite(t))
    }

    /// `1 − e^{−2 rate t}`, exactly 1 at `t = ∞`.
    fn saturation(self, rate: f64) -> f64 {
        match self {
            Horizon::Finite(t) => -(-2.0 * rate * t).exp_m1(),
            Horizon::Infinite => 1.0,
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Horizon::Finite(t) => t,
            Horizon::Infinite => f64::INFINITY,
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Horizon::Infinite);
        }
        let t: f64 = s.parse().map_err(|_| Error::InvalidParameter {
            name: "t",
            value: f64::NAN,
            reason: "not a number or `inf`",
        })?;
        if t == f64::INFINITY {
            Ok(Horizon::Infinite)
        } else {
            Horizon::finite(t)
        }
    }
}

/// A named regularity constant with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityBound {
    pub value: f64,
    pub kind: BoundKind,
    pub parameters: BTreeMap<String, f64>,
}

impl RegularityBound {
    fn new(kind: BoundKind, value: f64, parameters: &[(&str, f64)]) -> Self {
        debug_assert!(value >= 0.0 || value.is_nan());
        Self {
            value,
            kind,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }
}

/// One-step constants of the Euler kernel: `c₁ = L√(qh)/√(2λ)`, `c₂ = √q/√(2λh)`.
pub fn euler_one_step_constants(q: RenyiOrder, lipschitz: f64, ellipticity: f64, h: f64) -> Result<(f64, f64)> {
    check_nonnegative("L", lipschitz)?;
    check_positive("lambda", ellipticity)?;
    check_positive("h", h)?;
    let qv = q.value();
    Ok((
        lipschitz * (qv * h).sqrt() / (2.0 * ellipticity).sqrt(),
        qv.sqrt() / (2.0 * ellipticity * h).sqrt(),
    ))
}

/// `(1 − r²)/(1 − r^{2N}) · c₂² ‖v‖²` with `r = 1 − c₁/c₂`.
pub fn multi_step_bound(c1: f64, c2: f64, steps: u64, norm_v: f64) -> Result<RegularityBound> {
    check_nonnegative("c1", c1)?;
    check_positive("c2", c2)?;
    check_nonnegative("norm_v", norm_v)?;
    if c1 >= c2 {
        return Err(Error::OutsideRegime(format!("multi-step bound needs c1 < c2, got {c1} >= {c2}")));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "number of steps must be >= 1",
        });
    }
    let value = contraction_gain(c1 / c2, steps) * c2 * c2 * norm_v * norm_v;
    Ok(RegularityBound::new(
        BoundKind::MultiStep,
        value,
        &[("c1", c1), ("c2", c2), ("N", steps as f64), ("norm_v", norm_v)],
    ))
}

/// Discrete-time prefactor `q(1 − r²)/(2λh(1 − r^{2N}))`, times `‖v‖²`.
pub fn discrete_srt_bound(
    q: RenyiOrder,
    lipschitz: f64,
    ellipticity: f64,
    h: f64,
    steps: u64,
    norm_v: f64,
) -> Result<RegularityBound> {
    check_positive("lambda", ellipticity)?;
    check_nonnegative("norm_v", norm_v)?;
    let step = StepSize::new(h, lipschitz)?;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "number of steps must be >= 1",
        });
    }
    let gain = contraction_gain(lipschitz * step.h(), steps);
    let value = q.value() * gain / (2.0 * ellipticity * h) * norm_v * norm_v;
    let kind = if q.is_kl() { BoundKind::Srt1 } else { BoundKind::SrtQ };
    Ok(RegularityBound::new(
        kind,
        value,
        &[
            ("q", q.value()),
            ("L", lipschitz),
            ("lambda", ellipticity),
            ("h", h),
            ("N", steps as f64),
            ("norm_v", norm_v),
        ],
    ))
}

/// Continuous-time prefactor `qL/(λ(1 − e^{−2LT}))`, times `‖v‖²`; the
/// stationary value `qL/λ` at `T = ∞`.
pub fn continuous_srt_bound(
    q: RenyiOrder,
    lipschitz: f64,
    ellipticity: f64,
    horizon: Horizon,
    norm_v: f64,
) -> Result<RegularityBound> {
    check_positive("L", lipschitz)?;
    check_positive("lambda", ellipticity)?;
    check_nonnegative("norm_v", norm_v)?;
    let value = q.value() * lipschitz / (ellipticity * horizon.saturation(lipschitz)) * norm_v * norm_v;
    let kind = if q.is_kl() { BoundKind::Srt1 } else { BoundKind::SrtQ };
    Ok(RegularityBound::new(
        kind,
        value,
        &[
            ("q", q.value()),
            ("L", lipschitz),
            ("lambda", ellipticity),
            ("T", horizon.as_f64()),
            ("norm_v", norm_v),
        ],
    ))
}

/// Langevin constants for a potential with `−βI ⪯ ∇²V ⪯ βI`.
///
/// `order` is `q` for `SRT_q`, `p` for `SH_p`, and ignored otherwise.
///
/// | kind | value |
/// |------|-------|
/// | `LGE` | `2β/(1 − e^{−2βt})` |
/// | `SH_p` | `βp‖v‖²/(2(p − 1)(1 − e^{−2βt}))` |
/// | `SRT_q` | `βq‖v‖²/(2(1 − e^{−2βt}))` |
/// | `SH_log`, `SRT_1` | `β‖v‖²/(2(1 − e^{−2βt}))` |
pub fn theorem1_constants(
    kind: BoundKind,
    beta: f64,
    horizon: Horizon,
    order: Option<f64>,
    norm_v: f64,
) -> Result<RegularityBound> {
    check_positive("beta", beta)?;
    check_nonnegative("norm_v", norm_v)?;
    let sat = horizon.saturation(beta);
    let t = horizon.as_f64();
    let v2 = norm_v * norm_v;
    let missing_order = |name: &'static str| Error::InvalidParameter {
        name,
        value: f64::NAN,
        reason: "order parameter required for this kind",
    };
    match kind {
        BoundKind::Lge => Ok(RegularityBound::new(kind, 2.0 * beta / sat, &[("beta", beta), ("t", t)])),
        BoundKind::ShP => {
            let p = order.ok_or_else(|| missing_order("p"))?;
            let q = RenyiOrder::from_harnack_exponent(p)?;
            let value = beta * p * v2 / (2.0 * (p - 1.0) * sat);
            Ok(RegularityBound::new(
                kind,
                value,
                &[("beta", beta), ("t", t), ("p", p), ("q", q.value()), ("norm_v", norm_v)],
            ))
        }
        BoundKind::SrtQ => {
            let q = RenyiOrder::new(order.ok_or_else(|| missing_order("q"))?)?;
            let value = beta * q.value() * v2 / (2.0 * sat);
            let kind = if q.is_kl() { BoundKind::Srt1 } else { BoundKind::SrtQ };
            Ok(RegularityBound::new(
                kind,
                value,
                &[("beta", beta), ("t", t), ("q", q.value()), ("norm_v", norm_v)],
            ))
        }
        BoundKind::ShLog | BoundKind::Srt1 => Ok(RegularityBound::new(
            kind,
            beta * v2 / (2.0 * sat),
            &[("beta", beta), ("t", t), ("norm_v", norm_v)],
        )),
        BoundKind::MultiStep => Err(Error::UnknownKind(
            "multi_step is not a Langevin constant; use multi_step_bound".into(),
        )),
    }
}

/// Best shift Harnack constant `C_{p,v} = exp((q − 1) R / q)` from a Rényi
/// bound `R`, where `p = q/(q − 1)`.
pub fn harnack_from_renyi(q: RenyiOrder, renyi_bound: f64) -> Result<f64> {
    if q.is_kl() {
        return Err(Error::InvalidParameter {
            name: "q",
            value: 1.0,
            reason: "at q = 1 the dual is the log-Harnack form: its constant equals the KL bound",
        });
    }
    check_nonnegative("renyi_bound", renyi_bound)?;
    let qv = q.value();
    Ok(((qv - 1.0) * renyi_bound / qv).exp())
}

/// Inverse of [`harnack_from_renyi`]: `R = q log C / (q − 1)`.
pub fn renyi_from_harnack(q: RenyiOrder, harnack_constant: f64) -> Result<f64> {
    if q.is_kl() {
        return Err(Error::InvalidParameter {
            name: "q",
            value: 1.0,
            reason: "at q = 1 the dual is the log-Harnack form",
        });
    }
    if !(harnack_constant.is_finite() && harnack_constant >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "C",
            value: harnack_constant,
            reason: "Harnack constant must be finite and >= 1",
        });
    }
    let qv = q.value();
    Ok(qv * harnack_constant.ln() / (qv - 1.0))
}

/// The log-Harnack constant dual to a KL bound (Donsker–Varadhan): they coincide.
pub fn log_harnack_from_kl(kl_bound: f64) -> Result<f64> {
    check_nonnegative("kl_bound", kl_bound)?;
    Ok(kl_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(v: f64) -> RenyiOrder {
        RenyiOrder::new(v).unwrap()
    }

    #[test]
    fn multi_step_examples() {
        assert_relative_eq!(multi_step_bound(0.3, 1.7, 1, 2.0).unwrap().value, 1.7 * 1.7 * 4.0, max_relative = 1e-14);
        assert_relative_eq!(multi_step_bound(0.0, 1.0, 5, 1.0).unwrap().value, 0.2, max_relative = 1e-15);
        assert_relative_eq!(multi_step_bound(1.0, 2.0, 2, 1.0).unwrap().value, 3.2, max_relative = 1e-14);
        assert!(multi_step_bound(2.0, 1.0, 2, 1.0).is_err());
        assert!(multi_step_bound(0.5, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn discrete_srt_examples() {
        let b = discrete_srt_bound(q(2.0), 1.0, 2.0, 0.1, 2, 1.0).unwrap();
        assert_relative_eq!(b.value, 2.0 * 0.19 / (0.4 * 0.3439), max_relative = 1e-13);
        assert_relative_eq!(b.value, 2.762_430_939_226_519, max_relative = 1e-12);
        assert_eq!(b.kind, BoundKind::SrtQ);

        let kl = discrete_srt_bound(q(1.0), 1.0, 2.0, 0.1, 2, 1.0).unwrap();
        assert_eq!(kl.kind, BoundKind::Srt1);
        assert_relative_eq!(kl.value * 2.0, b.value, max_relative = 1e-14);

        // N large: (1 − r²)/(2λh) = 0.0199/0.04
        let far = discrete_srt_bound(q(1.0), 1.0, 2.0, 0.01, 100_000, 1.0).unwrap();
        assert_relative_eq!(far.value, 0.4975, max_relative = 1e-12);

        assert!(discrete_srt_bound(q(2.0), 1.0, 2.0, 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn continuous_srt_examples() {
        let b = continuous_srt_bound(q(1.0), 1.0, 2.0, Horizon::Finite(1.0), 1.0).unwrap();
        assert_relative_eq!(b.value, 1.0 / (2.0 * (1.0 - (-2.0f64).exp())), max_relative = 1e-15);
        assert_relative_eq!(b.value, 0.578_258_821_374_832_9, max_relative = 1e-12);
        let inf = continuous_srt_bound(q(2.0), 1.0, 2.0, Horizon::Infinite, 1.0).unwrap();
        assert_eq!(inf.value, 1.0);

        let n = 10_000;
        let disc = discrete_srt_bound(q(2.0), 1.0, 2.0, 1.0 / n as f64, n, 1.0).unwrap();
        let cont = continuous_srt_bound(q(2.0), 1.0, 2.0, Horizon::Finite(1.0), 1.0).unwrap();
        assert_relative_eq!(disc.value, cont.value, max_relative = 1e-3);
    }

    #[test]
    fn theorem1_examples() {
        let lge = theorem1_constants(BoundKind::Lge, 1.0, Horizon::Infinite, None, 0.0).unwrap();
        assert_eq!(lge.value, 2.0);
        let srt1 = theorem1_constants(BoundKind::Srt1, 1.0, Horizon::Infinite, None, 1.0).unwrap();
        assert_eq!(srt1.value, 0.5);
        let srtq = theorem1_constants(BoundKind::SrtQ, 1.0, Horizon::Finite(1.0), Some(2.0), 1.0).unwrap();
        assert_relative_eq!(srtq.value, 1.156_517_642_749_665_8, max_relative = 1e-12);
        assert!(theorem1_constants(BoundKind::MultiStep, 1.0, Horizon::Infinite, None, 1.0).is_err());
        assert!(theorem1_constants(BoundKind::ShP, 1.0, Horizon::Infinite, None, 1.0).is_err());
        assert!(theorem1_constants(BoundKind::ShP, 1.0, Horizon::Infinite, Some(1.0), 1.0).is_err());
        assert!("bogus".parse::<BoundKind>().is_err());
        assert_eq!("SH_log".parse::<BoundKind>().unwrap(), BoundKind::ShLog);
        assert_eq!("inf".parse::<Horizon>().unwrap(), Horizon::Infinite);
        assert!("-1".parse::<Horizon>().is_err());
    }

    #[test]
    fn langevin_specialization_matches_continuous_bound() {
        for beta in [0.3, 1.0, 4.0] {
            for t in [0.1, 1.0, 7.0] {
                for order in [1.0, 2.0, 5.0] {
                    let a = theorem1_constants(BoundKind::SrtQ, beta, Horizon::Finite(t), Some(order), 0.7).unwrap();
                    let b = continuous_srt_bound(q(order), beta, 2.0, Horizon::Finite(t), 0.7).unwrap();
                    assert_relative_eq!(a.value, b.value, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn srt_maps_to_sh_through_duality() {
        let (beta, t, v, order) = (1.0, Horizon::Finite(1.0), 1.0, 2.0);
        let srt = theorem1_constants(BoundKind::SrtQ, beta, t, Some(order), v).unwrap();
        let p = q(order).dual_exponent().unwrap();
        let sh = theorem1_constants(BoundKind::ShP, beta, t, Some(p), v).unwrap();
        let c = harnack_from_renyi(q(order), srt.value).unwrap();
        // (P_t f(·+v))^p ≤ C^p P_t f^p, so p log C is the SH_p exponent.
        assert_relative_eq!(p * c.ln(), sh.value, max_relative = 1e-14);

        let shlog = theorem1_constants(BoundKind::ShLog, beta, t, None, v).unwrap();
        let srt1 = theorem1_constants(BoundKind::Srt1, beta, t, None, v).unwrap();
        assert_eq!(log_harnack_from_kl(srt1.value).unwrap(), shlog.value);
    }

    #[test]
    fn harnack_round_trip() {
        assert_eq!(harnack_from_renyi(q(3.0), 0.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let order = q(rng.random_range(1.01..10.0));
            let r = rng.random_range(0.0..20.0);
            let c = harnack_from_renyi(order, r).unwrap();
            assert_relative_eq!(renyi_from_harnack(order, c).unwrap(), r, max_relative = 1e-12, epsilon = 1e-14);
        }
        assert!(harnack_from_renyi(RenyiOrder::KL, 1.0).is_err());
        assert!(renyi_from_harnack(q(2.0), 0.5).is_err());
    }

    #[test]
    fn multi_step_with_euler_constants_equals_discrete_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let l = rng.random_range(0.1..3.0);
            let h = rng.random_range(0.01..0.99) / l;
            let lambda = rng.random_range(0.2..4.0);
            let order = q(rng.random_range(1.0..6.0));
            let n = rng.random_range(1..200);
            let v = rng.random_range(0.0..3.0);
            let (c1, c2) = euler_one_step_constants(order, l, lambda, h).unwrap();
            let a = multi_step_bound(c1, c2, n, v).unwrap();
            let b = discrete_srt_bound(order, l, lambda, h, n, v).unwrap();
            assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn monotone_in_time_order_and_quadratic_in_shift(
            beta in 0.05f64..5.0,
            t in 0.01f64..10.0,
            dt in 0.0f64..5.0,
            order in 1.0f64..8.0,
            dq in 0.0f64..3.0,
            v in 0.0f64..4.0,
            scale in 0.0f64..5.0,
        ) {
            for kind in [BoundKind::SrtQ, BoundKind::Lge, BoundKind::ShLog] {
                let a = theorem1_constants(kind, beta, Horizon::Finite(t), Some(order), v).unwrap().value;
                let b = theorem1_constants(kind, beta, Horizon::Finite(t + dt), Some(order), v).unwrap().value;
                let c = theorem1_constants(kind, beta, Horizon::Infinite, Some(order), v).unwrap().value;
                prop_assert!(b <= a * (1.0 + 1e-14));
                prop_assert!(c <= b * (1.0 + 1e-14));
            }
            let lo = theorem1_constants(BoundKind::SrtQ, beta, Horizon::Finite(t), Some(order), v).unwrap().value;
            let hi = theorem1_constants(BoundKind::SrtQ, beta, Horizon::Finite(t), Some(order + dq), v).unwrap().value;
            prop_assert!(hi >= lo);
            let scaled = theorem1_constants(BoundKind::SrtQ, beta, Horizon::Finite(t), Some(order), v * scale).unwrap().value;
            prop_assert!((scaled - lo * scale * scale).abs() <= 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn discrete_bound_nonincreasing_in_steps(
            l in 0.1f64..3.0,
            frac in 0.01f64..0.99,
            n in 1u64..500,
        ) {
            let h = frac / l;
            let a = discrete_srt_bound(q(2.0), l, 2.0, h, n, 1.0).unwrap().value;
            let b = discrete_srt_bound(q(2.0), l, 2.0, h, n + 1, 1.0).unwrap().value;
            prop_assert!(b <= a * (1.0 + 1e-14));
        }
    }
}
