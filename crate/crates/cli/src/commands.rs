//! The seven subcommands. Each returns checks, failing instances and CSV
//! artifacts; writing them out is left to the caller.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use shl_core::bounds::{
    discrete_srt_bound, harnack_from_renyi, log_harnack_from_kl, theorem1_constants, BoundKind, Horizon,
};
use shl_core::coupling::{verify_convexity_gaussian_1d, verify_shifted_composition_finite, DiscreteMeasure, FiniteInstance};
use shl_core::fokker_planck::{
    solve_transition_density, verify_lge_and_harnack_on, verify_srt_on, Grid1D, InequalityMode, InequalityReport,
    Potential1D, TestFunction,
};
use shl_core::gaussian_info::{renyi_gaussian_shared_cov, GaussianMeasure, RenyiOrder};
use shl_core::kernels::{ou_discrete_marginal, StepSize};
use shl_core::sampler::{sample_pi, score_mgf_check, score_moments, score_norm_tail, SamplingMethod, Target};
use shl_core::schedules::{
    brute_force_schedule, continuous_cost, continuous_schedule_sinh, discrete_cost, optimal_discrete_cost,
    optimal_discrete_schedule, sinh_schedule_cost, ShiftSchedule, BRUTE_FORCE_MAX_STEPS,
};
use shl_core::shifted_div::{verify_convolution_lemma, ShiftParameter};

use crate::expr::Expr;
use crate::params::Params;
use crate::report::Check;
use crate::{CliError, Outcome};

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn order(q: f64) -> Result<RenyiOrder, CliError> {
    RenyiOrder::new(q).map_err(|e| config(e.to_string()))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

impl Outcome {
    fn push(&mut self, check: Check, instance: impl Serialize) {
        if !check.pass {
            self.failures.push(json!({ "check": &check, "instance": instance }));
        }
        self.checks.push(check);
    }
}

// ---------------------------------------------------------------- tightness

#[derive(Debug, Clone, Copy, Serialize)]
struct TightnessCell {
    lipschitz: f64,
    h: f64,
    steps: u64,
    q: f64,
    v: f64,
}

pub fn tightness(p: &Params) -> Result<Outcome, CliError> {
    let ls = p.f64_list("L", Some("1"))?;
    let hs = p.f64_list("h", Some("0.1"))?;
    let ns = p.u64_list("N", Some("2"))?;
    let qs = p.f64_list("q", Some("2"))?;
    let vs = p.f64_list("v", Some("1"))?;
    let lambda = p.f64("lambda", Some("2"))?;
    let tol = p.f64("tolerance", Some("1e-10"))?;
    let mut cells = Vec::new();
    for &lipschitz in &ls {
        for &h in &hs {
            StepSize::new(h, lipschitz)?;
            for &steps in &ns {
                if steps == 0 || steps > u32::MAX as u64 {
                    return Err(config(format!("N = {steps} is out of range")));
                }
                for &q in &qs {
                    order(q)?;
                    for &v in &vs {
                        cells.push(TightnessCell { lipschitz, h, steps, q, v });
                    }
                }
            }
        }
    }
    let rows: Vec<(TightnessCell, f64, f64)> = cells
        .par_iter()
        .map(|c| -> Result<_, CliError> {
            let q = order(c.q)?;
            let step = StepSize::new(c.h, c.lipschitz)?;
            let start = DVector::from_element(1, 0.0);
            let law = ou_discrete_marginal(step, c.steps as u32, &start)?;
            let shifted = law.translated(&DVector::from_element(1, c.v))?;
            let exact = renyi_gaussian_shared_cov(&shifted, &law, q)?;
            let bound = discrete_srt_bound(q, c.lipschitz, lambda, c.h, c.steps, c.v.abs())?.value;
            Ok((*c, exact, bound))
        })
        .collect::<Result<_, _>>()?;

    let mut out = Outcome::default();
    let mut csv = String::from("L,h,N,q,v,exact,bound,rel_error\n");
    for (c, exact, bound) in rows {
        let rel = if bound == 0.0 { exact.abs() } else { (exact - bound).abs() / bound.abs() };
        let _ = writeln!(csv, "{},{},{},{},{},{exact},{bound},{rel}", c.lipschitz, c.h, c.steps, c.q, c.v);
        let name = format!("tightness L={} h={} N={} q={} v={}", c.lipschitz, c.h, c.steps, c.q, c.v);
        out.push(Check::new(name, exact, bound, rel <= tol), c);
    }
    out.artifacts.push(("tightness.csv".into(), csv));
    Ok(out)
}

// ----------------------------------------------------------------- schedule

pub fn schedule(p: &Params) -> Result<Outcome, CliError> {
    let discrete = p.has("c1") || p.has("c2") || p.has("N") || p.has("candidate");
    let continuous = p.has("L") || p.has("T");
    match (discrete, continuous) {
        (true, true) => Err(config("give either c1/c2/N (discrete) or L/T (continuous), not both")),
        (_, false) => discrete_schedule(p),
        (false, true) => continuous_schedule(p),
    }
}

fn discrete_schedule(p: &Params) -> Result<Outcome, CliError> {
    let c1 = p.f64("c1", None)?;
    let c2 = p.f64("c2", None)?;
    let steps = p.usize("N", None)?;
    let best = optimal_discrete_schedule(c1, c2, steps)?;
    let cost = discrete_cost(&best, c1, c2);
    let closed = optimal_discrete_cost(c1, c2, steps)?;
    let instance = json!({ "c1": c1, "c2": c2, "N": steps, "schedule": best.values() });

    let mut out = Outcome::default();
    out.push(Check::new("cost equals closed form", cost, closed, close(cost, closed, 1e-10)), &instance);
    if steps <= BRUTE_FORCE_MAX_STEPS {
        let oracle = brute_force_schedule(c1, c2, steps)?;
        let diff = best
            .values()
            .iter()
            .zip(oracle.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(Check::new("matches normal-equation oracle", diff, 1e-8, diff <= 1e-8), &instance);
    }
    if p.has("candidate") {
        let candidate = ShiftSchedule::new(p.f64_list("candidate", None)?)?;
        if candidate.steps() != steps {
            return Err(config(format!(
                "candidate has {} steps, expected N = {steps}",
                candidate.steps()
            )));
        }
        let cand_cost = discrete_cost(&candidate, c1, c2);
        out.push(
            Check::new("candidate is optimal", cand_cost, closed, cand_cost <= closed + 1e-10 * (1.0 + closed)),
            json!({ "c1": c1, "c2": c2, "N": steps, "candidate": candidate.values(), "optimal": best.values() }),
        );
    }
    out.artifacts.push(("schedule.csv".into(), best.to_csv()));
    Ok(out)
}

fn continuous_schedule(p: &Params) -> Result<Outcome, CliError> {
    let lipschitz = p.f64("L", None)?;
    let horizon = p.f64("T", None)?;
    let samples = p.usize("samples", Some("101"))?;
    let sched = continuous_schedule_sinh(lipschitz, horizon)?;
    let cost = continuous_cost(&sched, lipschitz)?;
    let closed = sinh_schedule_cost(lipschitz, horizon)?;
    let mut out = Outcome::default();
    out.push(
        Check::new("sinh cost equals closed form", cost, closed, close(cost, closed, 1e-8)),
        json!({ "L": lipschitz, "T": horizon }),
    );
    out.artifacts.push(("continuous_schedule.csv".into(), sched.to_csv(samples)));
    Ok(out)
}

// ------------------------------------------------------------- bounds-table

pub fn bounds_table(p: &Params) -> Result<Outcome, CliError> {
    let kinds = p
        .string_list("kind", Some("SRT_q,SRT_1,SH_p,SH_log,LGE"))?
        .iter()
        .map(|k| k.parse::<BoundKind>().map_err(|e| config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.contains(&BoundKind::MultiStep) {
        return Err(config("multi_step is not tabulated by bounds-table"));
    }
    let betas = p.f64_list("beta", Some("1"))?;
    let times = p.horizon_list("t", Some("1"))?;
    let orders = p.f64_list("order", Some("2"))?;
    let vs = p.f64_list("v", Some("1"))?;

    let mut out = Outcome::default();
    let mut csv = String::from("kind,beta,t,order,v,value\n");
    for &kind in &kinds {
        let kind_orders: Vec<Option<f64>> = match kind {
            BoundKind::SrtQ | BoundKind::ShP => orders.iter().map(|o| Some(*o)).collect(),
            _ => vec![None],
        };
        let kind_vs: &[f64] = if kind == BoundKind::Lge { &[0.0] } else { &vs };
        for &beta in &betas {
            for &t in &times {
                for &ord in &kind_orders {
                    for &v in kind_vs {
                        let b = theorem1_constants(kind, beta, t, ord, v)?;
                        let t_str = match t {
                            Horizon::Infinite => "inf".to_string(),
                            Horizon::Finite(x) => x.to_string(),
                        };
                        let ord_str = ord.map(|o| o.to_string()).unwrap_or_default();
                        let v_str = if kind == BoundKind::Lge { String::new() } else { v.to_string() };
                        let _ = writeln!(csv, "{},{beta},{t_str},{ord_str},{v_str},{}", b.kind, b.value);
                        let instance = json!({ "kind": kind.as_str(), "beta": beta, "t": t_str, "order": ord, "v": v });
                        match kind {
                            BoundKind::ShP => {
                                let q = b.parameter("q").expect("SH_p records its dual order");
                                let srt = theorem1_constants(BoundKind::SrtQ, beta, t, Some(q), v)?.value;
                                let c = harnack_from_renyi(order(q)?, srt)?;
                                let pp = ord.expect("SH_p has an order");
                                let lhs = pp * c.ln();
                                let name = format!("duality SH_p p={pp} beta={beta} t={t_str} v={v}");
                                out.push(Check::new(name, lhs, b.value, close(lhs, b.value, 1e-12)), instance);
                            }
                            BoundKind::ShLog => {
                                let kl = theorem1_constants(BoundKind::Srt1, beta, t, None, v)?.value;
                                let lhs = log_harnack_from_kl(kl)?;
                                let name = format!("duality SH_log beta={beta} t={t_str} v={v}");
                                out.push(Check::new(name, lhs, b.value, close(lhs, b.value, 1e-12)), instance);
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    out.artifacts.push(("bounds.csv".into(), csv));
    Ok(out)
}

// ----------------------------------------------------------------- fpverify

const BETA_SAMPLE_RADIUS: f64 = 20.0;
const BETA_SAMPLE_POINTS: usize = 4001;

fn parse_expr(key: &str, src: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| config(format!("cannot parse `{key}` = `{src}`: {e}")))
}

/// Potential from an expression with `β` either declared or sampled as
/// `max |V''|` on `x0 ± 20`.
fn potential_from_params(p: &Params, x0: f64) -> Result<Potential1D, CliError> {
    let src = p.string("potential", Some("x^2/2"))?;
    let v = parse_expr("potential", &src)?;
    let dv = v.derivative();
    let d2v = dv.derivative();
    let sampled = (0..BETA_SAMPLE_POINTS)
        .map(|i| {
            let x = x0 - BETA_SAMPLE_RADIUS + 2.0 * BETA_SAMPLE_RADIUS * i as f64 / (BETA_SAMPLE_POINTS - 1) as f64;
            d2v.eval(x).abs()
        })
        .fold(0.0, f64::max);
    if !sampled.is_finite() {
        return Err(config(format!("V'' of `{src}` is not finite near x0")));
    }
    let beta = if p.has("beta") {
        let declared = p.f64("beta", None)?;
        if declared < sampled * (1.0 - 1e-9) {
            return Err(config(format!(
                "declared beta = {declared} is below the sampled max |V''| = {sampled}"
            )));
        }
        declared
    } else {
        if sampled <= 0.0 {
            return Err(config(format!("`{src}` has no curvature; pass beta explicitly")));
        }
        p.string("beta", Some(&sampled.to_string()))?;
        sampled
    };
    Ok(Potential1D::new(Arc::new(move |x| v.eval(x)), Arc::new(move |x| dv.eval(x)), beta)?)
}

pub fn fpverify(p: &Params) -> Result<Outcome, CliError> {
    let x0 = p.f64("x0", Some("0"))?;
    let t = p.f64("t", Some("1"))?;
    let v = p.f64("v", Some("0.5"))?;
    let potential = potential_from_params(p, x0)?;
    let beta = potential.beta();
    let points = p.usize("points", Some("4096"))?;
    let mut modes = p.string_list("mode", Some("srt"))?;
    if modes.iter().any(|m| m == "all") {
        modes = ["srt", "lge", "shp", "shlog"].map(String::from).to_vec();
    }

    let grid = Grid1D::default_for(beta, x0, points)?;
    let field = solve_transition_density(&potential, x0, t, &grid)?;
    let mut out = Outcome::default();
    for mode in &modes {
        let (name, report): (String, InequalityReport) = match mode.as_str() {
            "srt" => {
                let q = p.f64("q", Some("1"))?;
                (format!("SRT_q q={q}"), verify_srt_on(&field, beta, v, order(q)?)?)
            }
            "lge" | "shp" | "shlog" => {
                let src = p.string("f", Some("exp(0.3*x)"))?;
                let f = parse_expr("f", &src)?;
                let df = f.derivative();
                let test = TestFunction::new(Arc::new(move |x| f.eval(x)), Arc::new(move |x| df.eval(x)));
                let (label, m) = match mode.as_str() {
                    "lge" => ("LGE".to_string(), InequalityMode::Lge),
                    "shp" => {
                        let pp = p.f64("p", Some("2"))?;
                        if !(pp > 1.0) {
                            return Err(config(format!("p must exceed 1, got {pp}")));
                        }
                        (format!("SH_p p={pp}"), InequalityMode::ShP(pp))
                    }
                    _ => ("SH_log".to_string(), InequalityMode::ShLog),
                };
                (format!("{label} f={src}"), verify_lge_and_harnack_on(&field, beta, &test, m, v)?)
            }
            other => return Err(config(format!("unknown mode `{other}` (srt, lge, shp, shlog, all)"))),
        };
        let check = Check::new(name, report.lhs, report.rhs, report.pass);
        out.push(check, json!({ "mode": mode, "x0": x0, "t": t, "v": v, "beta": beta, "points": points }));
    }
    out.artifacts.push(("density.csv".into(), field.to_csv()));
    Ok(out)
}

// -------------------------------------------------------------------- score

pub fn score(p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let n = p.usize("n", Some("100000"))?;
    if n < 2 {
        return Err(config("n must be at least 2"));
    }
    let (target, default_method) = if p.has("potential") {
        (Target::from_potential_1d(&potential_from_params(p, 0.0)?)?, "inverse_cdf")
    } else {
        let beta = p.f64("beta", Some("1"))?;
        let d = p.usize("d", Some("1"))?;
        (Target::isotropic_gaussian(beta, d)?, "exact")
    };
    let method = match p.string("method", Some(default_method))?.as_str() {
        "exact" => SamplingMethod::ExactGaussian,
        "inverse_cdf" => SamplingMethod::InverseCdf1d,
        "langevin" => SamplingMethod::Langevin {
            step: p.f64("step", Some("0.01"))?,
            burn_in: p.usize("burn_in", Some("1000"))?,
            thin: p.usize("thin", Some("10"))?,
        },
        other => return Err(config(format!("unknown method `{other}` (exact, inverse_cdf, langevin)"))),
    };
    let lambdas = p.f64_list("lambdas", Some("-1,-0.5,0.5,1"))?;
    let deltas = p.f64_list("deltas", Some("0.5,0.1,0.01"))?;
    let samples = sample_pi(&target, n, seed, method)?;

    let mut out = Outcome::default();
    let mut e = DVector::zeros(target.dim());
    e[0] = 1.0;
    let mgf = score_mgf_check(&samples, &target, &e, &lambdas)?;
    let mut csv = String::from("lambda,empirical,bound,ratio,std_error,ci_low,ci_high,relative_se,pass\n");
    for r in &mgf.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.lambda, r.empirical, r.bound, r.ratio, r.std_error, r.ci_low, r.ci_high, r.relative_se, r.pass
        );
        out.push(
            Check::new(format!("mgf lambda={}", r.lambda), r.empirical, r.bound + 3.0 * r.std_error, r.pass),
            r,
        );
    }
    out.artifacts.push(("mgf.csv".into(), csv));

    let m = score_moments(&samples, &target);
    let z = m
        .mean
        .iter()
        .zip(&m.mean_std_error)
        .map(|(mu, se)| if *se > 0.0 { mu.abs() / se } else { 0.0 })
        .fold(0.0, f64::max);
    out.push(Check::new("score mean is zero (max |mean|/se)", z, 4.0, m.mean_is_zero), &m);
    let bd = target.beta() * target.dim() as f64;
    out.push(
        Check::new("second moment <= beta d", m.second_moment, bd + 3.0 * m.second_moment_std_error, m.second_moment_within_bound),
        &m,
    );

    let tail = score_norm_tail(&samples, &target, &deltas)?;
    let mut csv = String::from("delta,quantile,reference,ratio,fitted_c\n");
    for r in &tail.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.delta, r.quantile, r.reference, r.ratio, tail.fitted_c);
    }
    out.artifacts.push(("tail.csv".into(), csv));
    if p.bool("samples_csv", Some("false"))? {
        out.artifacts.push(("samples.csv".into(), samples.to_csv()));
    }
    Ok(out)
}

// ----------------------------------------------------------------- coupling

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Random convexity instance: `x0`, `L`, `h`, and two measures on the line
/// with one to four atoms each.
pub fn random_convexity_instance(rng: &mut impl Rng) -> Result<(f64, f64, f64, DiscreteMeasure, DiscreteMeasure), CliError> {
    let x0 = rng.random_range(-2.0..2.0);
    let lipschitz = rng.random_range(0.1..2.0);
    let h = rng.random_range(0.05..0.4);
    let measure = |rng: &mut dyn rand::RngCore| -> Result<DiscreteMeasure, CliError> {
        let k = rng.random_range(1..=4usize);
        let mut atoms: Vec<f64> = Vec::with_capacity(k);
        while atoms.len() < k {
            let a: f64 = rng.random_range(-1.0..1.0);
            if atoms.iter().all(|b| (a - b).abs() > 1e-6) {
                atoms.push(a);
            }
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = w[..k - 1].iter().sum();
        w[k - 1] = 1.0 - head;
        Ok(DiscreteMeasure::from_scalars(&atoms, w)?)
    };
    let nu = measure(rng)?;
    let nu_prime = measure(rng)?;
    Ok((x0, lipschitz, h, nu, nu_prime))
}

pub fn coupling(p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let states = p.usize("states", Some("3"))?;
    let instances = p.usize("instances", Some("50"))?;
    let qs = p
        .f64_list("q", Some("1,2"))?
        .into_iter()
        .map(order)
        .collect::<Result<Vec<_>, _>>()?;
    let identical = p.bool("identical", Some("false"))?;
    let convexity = p.usize("convexity", Some("20"))?;

    let composition: Vec<_> = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let mut rng = stream(seed, i as u64);
            let inst = FiniteInstance::random(states, identical, &mut rng)?;
            qs.iter()
                .map(|&q| Ok((i, verify_shifted_composition_finite(&inst, q)?)))
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let convex: Vec<_> = (0..convexity)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let mut rng = stream(seed ^ 0xc0_4e_c5, i as u64);
            let (x0, l, h, nu, nup) = random_convexity_instance(&mut rng)?;
            qs.iter()
                .map(|&q| Ok((i, verify_convexity_gaussian_1d(x0, l, h, &nu, &nup, q)?)))
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outcome::default();
    let mut csv = String::from("check,instance,q,lhs,rhs,margin,pass\n");
    for (i, r) in composition.into_iter().flatten() {
        let pass = r.pass && (!identical || (r.rhs - r.lhs).abs() <= 1e-12);
        let _ = writeln!(csv, "composition,{i},{},{},{},{},{pass}", r.q, r.lhs, r.rhs, r.margin);
        out.push(Check::new(format!("composition instance={i} q={}", r.q), r.lhs, r.rhs, pass), &r);
    }
    for (i, r) in convex.into_iter().flatten() {
        let _ = writeln!(csv, "convexity,{i},{},{},{},{},{}", r.q, r.lhs, r.rhs, r.margin, r.pass);
        out.push(Check::new(format!("convexity instance={i} q={}", r.q), r.lhs, r.rhs, r.pass), &r);
    }
    out.artifacts.push(("coupling.csv".into(), csv));
    Ok(out)
}

// ------------------------------------------------------------------- dualsd

#[derive(Debug, Clone, Serialize)]
struct DualsdInstance {
    mu_mean: Vec<f64>,
    nu_mean: Vec<f64>,
    var: f64,
    noise: f64,
    z: f64,
    a: f64,
    q: f64,
}

impl DualsdInstance {
    fn run(&self) -> Result<shl_core::shifted_div::ConvolutionReport, CliError> {
        let d = self.mu_mean.len();
        let mu = GaussianMeasure::isotropic(DVector::from_column_slice(&self.mu_mean), self.var)?;
        let nu = GaussianMeasure::isotropic(DVector::from_column_slice(&self.nu_mean), self.var)?;
        let xi = GaussianMeasure::new(DVector::zeros(d), DMatrix::identity(d, d) * self.noise)?;
        Ok(verify_convolution_lemma(&mu, &nu, &xi, ShiftParameter::new(self.z)?, self.a, order(self.q)?)?)
    }
}

/// Random instance hitting case `index mod 4`: standard/dual crossed with
/// `a ≤ |z|` / `a > |z|`.
pub fn random_dualsd_instance(index: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>, f64, f64, f64, f64, f64) {
    let d = rng.random_range(1..=3usize);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let nu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let var = rng.random_range(0.2..3.0);
    let noise = rng.random_range(0.1..3.0);
    let radius = rng.random_range(0.1..2.0);
    let dual = index % 2 == 1;
    let within = (index / 2).is_multiple_of(2);
    let a = if within {
        rng.random_range(0.0..radius)
    } else {
        radius + rng.random_range(0.01..2.0)
    };
    let q = [1.0, 1.5, 2.0, 4.0][rng.random_range(0..4usize)];
    let z = if dual { -radius } else { radius };
    (mu, nu, var, noise, z, a, q)
}

pub fn dualsd(p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let mut instances = Vec::new();
    if p.has("random") {
        let count = p.usize("random", None)?;
        for i in 0..count {
            let mut rng = stream(seed, i as u64);
            let (mu_mean, nu_mean, var, noise, z, a, q) = random_dualsd_instance(i, &mut rng);
            instances.push(DualsdInstance { mu_mean, nu_mean, var, noise, z, a, q });
        }
    } else {
        let d = p.usize("d", Some("1"))?;
        if d == 0 {
            return Err(config("d must be at least 1"));
        }
        for gap in p.f64_list("gap", Some("1"))? {
            for var in p.f64_list("var", Some("1"))? {
                for noise in p.f64_list("noise", Some("1"))? {
                    for z in p.f64_list("z", Some("-0.5"))? {
                        for a in p.f64_list("a", Some("0.25"))? {
                            for q in p.f64_list("q", Some("2"))? {
                                let mut mu_mean = vec![0.0; d];
                                mu_mean[0] = gap;
                                instances.push(DualsdInstance {
                                    mu_mean,
                                    nu_mean: vec![0.0; d],
                                    var,
                                    noise,
                                    z,
                                    a,
                                    q,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let reports = instances
        .par_iter()
        .map(DualsdInstance::run)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome::default();
    let mut csv = String::from("instance,sign,regime,z,a,q,lhs,rhs,margin,pass\n");
    for (i, (inst, r)) in instances.iter().zip(&reports).enumerate() {
        let case = serde_json::to_value(r.case).expect("plain enum");
        let (sign, regime) = (case["sign"].as_str().unwrap_or(""), case["regime"].as_str().unwrap_or(""));
        let _ = writeln!(
            csv,
            "{i},{sign},{regime},{},{},{},{},{},{},{}",
            r.z, r.a, r.q, r.lhs, r.rhs, r.margin, r.pass
        );
        out.push(
            Check::new(format!("convolution instance={i} {sign} {regime}"), r.lhs, r.rhs, r.pass),
            json!({ "instance": inst, "report": r }),
        );
    }
    out.artifacts.push(("dualsd.csv".into(), csv));
    Ok(out)
}
