//! Finitely supported measures, exact optimal transport on small supports,
//! the convexity principle and a brute-force check of the shifted
//! composition rule on finite state spaces.
//!
//! The transport solver is a dense transportation simplex (northwest-corner
//! start, MODI potentials, Bland's rule). It is exact up to floating point
//! and meant for verification instances of at most [`MAX_SUPPORT`] atoms.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::gaussian_info::RenyiOrder;

pub const MAX_SUPPORT: usize = 64;
pub const MAX_STATES: usize = 6;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

/// Finitely supported probability measure on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                found: weights.len(),
            });
        }
        let d = atoms[0].len();
        if let Some(a) = atoms.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: a.len() });
        }
        if atoms.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidMeasure("atoms must be finite".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if atoms[i] == atoms[j] {
                    return Err(Error::InvalidMeasure(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        Ok(Self {
            atoms: atoms.into_iter().map(|a| a.iter().copied().collect()).collect(),
            weights,
        })
    }

    pub fn dirac(atom: DVector<f64>) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    pub fn uniform(atoms: Vec<DVector<f64>>) -> Result<Self> {
        let n = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// One-dimensional atoms.
    pub fn from_scalars(points: &[f64], weights: Vec<f64>) -> Result<Self> {
        Self::new(points.iter().map(|&x| DVector::from_element(1, x)).collect(), weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atom(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.atoms[i])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A joint weight matrix with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    weights: DMatrix<f64>,
}

impl Coupling {
    /// Checks nonnegativity and both marginals within `1e-10`.
    pub fn new(weights: DMatrix<f64>, first: &[f64], second: &[f64]) -> Result<Self> {
        if weights.nrows() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: weights.nrows(),
            });
        }
        if weights.ncols() != second.len() {
            return Err(Error::DimensionMismatch {
                expected: second.len(),
                found: weights.ncols(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("coupling weights must be finite and >= 0".into()));
        }
        for (i, &a) in first.iter().enumerate() {
            let s = weights.row(i).sum();
            if (s - a).abs() > MARGINAL_TOL {
                return Err(Error::InvalidMeasure(format!("row {i} sums to {s}, expected {a}")));
            }
        }
        for (j, &b) in second.iter().enumerate() {
            let s = weights.column(j).sum();
            if (s - b).abs() > MARGINAL_TOL {
                return Err(Error::InvalidMeasure(format!("column {j} sums to {s}, expected {b}")));
            }
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn expectation(&self, cost: &DMatrix<f64>) -> f64 {
        self.weights.component_mul(cost).sum()
    }

    /// Largest cost on cells carrying more than `1e-12` mass.
    pub fn support_max(&self, cost: &DMatrix<f64>) -> f64 {
        self.weights
            .iter()
            .zip(cost.iter())
            .filter(|(w, _)| **w > 1e-12)
            .map(|(_, c)| *c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn validate_marginals(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InfeasibleTransport("empty marginal".into()));
    }
    if a.len() > MAX_SUPPORT || b.len() > MAX_SUPPORT {
        return Err(Error::InvalidParameter {
            name: "support size",
            value: a.len().max(b.len()) as f64,
            reason: "exact transport is limited to 64 atoms per side",
        });
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) || (sa - sb).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InfeasibleTransport(format!("marginal masses {sa} and {sb} differ")));
    }
    Ok(())
}

/// Exact minimizer of `Σ c_ij γ_ij` over couplings of `a` and `b`.
pub fn transport_lp(a: &[f64], b: &[f64], cost: &DMatrix<f64>) -> Result<(Coupling, f64)> {
    validate_marginals(a, b)?;
    let (m, n) = (a.len(), b.len());
    if cost.nrows() != m || cost.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            found: cost.nrows() * cost.ncols(),
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InfeasibleTransport("costs must be finite".into()));
    }

    // Northwest corner: exactly m + n − 1 basic cells forming a spanning tree.
    let mut x = DMatrix::<f64>::zeros(m, n);
    let mut basic = vec![vec![false; n]; m];
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let t = ra[i].min(rb[j]);
        x[(i, j)] = t;
        basic[i][j] = true;
        ra[i] -= t;
        rb[j] -= t;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (ra[i] <= rb[j] && i < m - 1) || j == n - 1 {
            ra[i] = 0.0;
            i += 1;
        } else {
            rb[j] = 0.0;
            j += 1;
        }
    }

    let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * (1.0 + scale);
    for _ in 0..MAX_PIVOTS {
        let (u, v) = potentials(&basic, cost);
        let mut entering = None;
        'scan: for r in 0..m {
            for c in 0..n {
                if !basic[r][c] && cost[(r, c)] - u[r] - v[c] < -tol {
                    entering = Some((r, c));
                    break 'scan;
                }
            }
        }
        let Some((er, ec)) = entering else {
            for w in x.iter_mut() {
                *w = w.max(0.0);
            }
            let value = x.component_mul(cost).sum();
            let coupling = Coupling::new(x, a, b)?;
            return Ok((coupling, value));
        };
        let path = tree_path(&basic, er, ec);
        // Cells on the path alternate −, +, −, … starting at the entering row.
        let mut leave: Option<(usize, usize)> = None;
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let better = match leave {
                    None => true,
                    Some(l) => x[(r, c)] < x[l] || (x[(r, c)] == x[l] && (r, c) < l),
                };
                if better {
                    leave = Some((r, c));
                }
            }
        }
        let leave = leave.expect("cycle always has a minus cell");
        let theta = x[leave];
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                x[(r, c)] -= theta;
            } else {
                x[(r, c)] += theta;
            }
        }
        x[(er, ec)] = theta;
        x[leave] = 0.0;
        basic[leave.0][leave.1] = false;
        basic[er][ec] = true;
    }
    Err(Error::InfeasibleTransport("simplex did not terminate".into()))
}

fn potentials(basic: &[Vec<bool>], cost: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (basic.len(), basic[0].len());
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, k)) = queue.pop_front() {
        if is_row {
            for c in 0..n {
                if basic[k][c] && v[c].is_nan() {
                    v[c] = cost[(k, c)] - u[k];
                    queue.push_back((false, c));
                }
            }
        } else {
            for r in 0..m {
                if basic[r][k] && u[r].is_nan() {
                    u[r] = cost[(r, k)] - v[k];
                    queue.push_back((true, r));
                }
            }
        }
    }
    (u, v)
}

/// Basic cells on the tree path from row `start` to column `end`.
fn tree_path(basic: &[Vec<bool>], start: usize, end: usize) -> Vec<(usize, usize)> {
    let (m, n) = (basic.len(), basic[0].len());
    // Nodes 0..m are rows, m..m+n columns.
    let mut parent = vec![usize::MAX; m + n];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == m + end {
            break;
        }
        if node < m {
            for c in 0..n {
                if basic[node][c] && parent[m + c] == usize::MAX {
                    parent[m + c] = node;
                    queue.push_back(m + c);
                }
            }
        } else {
            let c = node - m;
            for r in 0..m {
                if basic[r][c] && parent[r] == usize::MAX {
                    parent[r] = node;
                    queue.push_back(r);
                }
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = m + end;
    while node != start {
        let p = parent[node];
        debug_assert!(p != usize::MAX, "basis must span");
        cells.push(if node < m { (node, p - m) } else { (p, node - m) });
        node = p;
    }
    cells.reverse();
    cells
}

/// Optimal transport between two discrete measures for a pairwise cost.
pub fn ot_min_linear<F>(nu: &DiscreteMeasure, nu_prime: &DiscreteMeasure, cost: F) -> Result<(Coupling, f64)>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    if nu.dim() != nu_prime.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu.dim(),
            found: nu_prime.dim(),
        });
    }
    let c = cost_matrix(nu, nu_prime, cost);
    transport_lp(nu.weights(), nu_prime.weights(), &c)
}

fn cost_matrix<F>(nu: &DiscreteMeasure, nu_prime: &DiscreteMeasure, cost: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let left: Vec<_> = (0..nu.len()).map(|i| nu.atom(i)).collect();
    let right: Vec<_> = (0..nu_prime.len()).map(|j| nu_prime.atom(j)).collect();
    DMatrix::from_fn(nu.len(), nu_prime.len(), |i, j| cost(&left[i], &right[j]))
}

/// Minimizes the largest cost on the support of a coupling. Infinite costs
/// are allowed and mean "forbidden"; the result is `∞` if no coupling avoids them.
pub fn bottleneck_transport(a: &[f64], b: &[f64], cost: &DMatrix<f64>) -> Result<(Option<Coupling>, f64)> {
    validate_marginals(a, b)?;
    if cost.iter().any(|c| c.is_nan()) {
        return Err(Error::InfeasibleTransport("NaN cost".into()));
    }
    let mut levels: Vec<f64> = cost.iter().copied().filter(|c| c.is_finite()).collect();
    levels.sort_by(|x, y| x.partial_cmp(y).unwrap());
    levels.dedup();
    let feasible = |tau: f64| -> Result<Option<Coupling>> {
        let indicator = cost.map(|c| if c <= tau { 0.0 } else { 1.0 });
        let (g, excess) = transport_lp(a, b, &indicator)?;
        Ok((excess <= 1e-12).then_some(g))
    };
    let (mut lo, mut hi) = (0usize, levels.len());
    let mut best = None;
    // Smallest index whose threshold admits a coupling.
    while lo < hi {
        let mid = (lo + hi) / 2;
        match feasible(levels[mid])? {
            Some(g) => {
                best = Some((g, levels[mid]));
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    match best {
        Some((g, tau)) => Ok((Some(g), tau)),
        None => Ok((None, f64::INFINITY)),
    }
}

/// Right-hand side of the convexity principle for a Dirac bound `ρ`:
/// `inf_γ ∫ρ(v − v′)dγ` at `q = 1`, otherwise
/// `inf_γ log ∫exp((q − 1)ρ(v − v′))dγ / (q − 1)`.
pub fn convexity_upgrade<F>(rho: F, q: RenyiOrder, nu: &DiscreteMeasure, nu_prime: &DiscreteMeasure) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if nu.dim() != nu_prime.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu.dim(),
            found: nu_prime.dim(),
        });
    }
    let zero = rho(&DVector::zeros(nu.dim()));
    if zero.abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "rho(0)",
            value: zero,
            reason: "Dirac bound must vanish at zero shift",
        });
    }
    let r = cost_matrix(nu, nu_prime, |v, w| rho(&(v - w)));
    if let Some(bad) = r.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: *bad,
            reason: "Dirac bound must be finite and >= 0",
        });
    }
    if q.is_kl() {
        return Ok(transport_lp(nu.weights(), nu_prime.weights(), &r)?.1);
    }
    let k = q.value() - 1.0;
    let floor = r.min();
    let shifted = r.map(|c| (k * (c - floor)).exp());
    if shifted.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: r.max(),
            reason: "exp((q - 1) rho) overflows",
        });
    }
    let (_, value) = transport_lp(nu.weights(), nu_prime.weights(), &shifted)?;
    Ok(floor + value.ln() / k)
}

/// KL divergence of probability vectors; `∞` when `p` is not dominated by `r`.
pub fn kl_discrete(p: &[f64], r: &[f64]) -> f64 {
    p.iter()
        .zip(r)
        .map(|(&pi, &ri)| match (pi > 0.0, ri > 0.0) {
            (false, _) => 0.0,
            (true, false) => f64::INFINITY,
            (true, true) => pi * (pi / ri).ln(),
        })
        .sum::<f64>()
        .max(0.0)
}

/// Rényi divergence of probability vectors.
pub fn renyi_discrete(p: &[f64], r: &[f64], q: RenyiOrder) -> f64 {
    if q.is_kl() {
        return kl_discrete(p, r);
    }
    let qv = q.value();
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &ri) in p.iter().zip(r) {
        if pi > 0.0 {
            if ri <= 0.0 {
                return f64::INFINITY;
            }
            terms.push(qv * pi.ln() + (1.0 - qv) * ri.ln());
        }
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (lse / (qv - 1.0)).max(0.0)
}

/// Joint laws on a finite space `Ω = {0, …, n − 1}`.
///
/// `mu_joint[x][y]` and `nu_joint[x][y]` are the laws of `(X, Y)`;
/// `mu_shift` is the law of the auxiliary variable `X′` under `μ`. Only
/// these enter the composition rule, so the joint law of `X′` with the
/// rest is left free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteInstance {
    pub mu_joint: Vec<Vec<f64>>,
    pub mu_shift: Vec<f64>,
    pub nu_joint: Vec<Vec<f64>>,
}

impl FiniteInstance {
    pub fn new(mu_joint: Vec<Vec<f64>>, mu_shift: Vec<f64>, nu_joint: Vec<Vec<f64>>) -> Result<Self> {
        let n = mu_shift.len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::InvalidParameter {
                name: "|Omega|",
                value: n as f64,
                reason: "state space must have between 1 and 6 states",
            });
        }
        for table in [&mu_joint, &nu_joint] {
            if table.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: table.len() });
            }
            if let Some(row) = table.iter().find(|row| row.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
        }
        let check = |what: &str, it: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let mut total = 0.0;
            for w in it {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidMeasure(format!("{what} has weight {w}")));
                }
                total += w;
            }
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidMeasure(format!("{what} sums to {total}")));
            }
            Ok(())
        };
        check("mu_joint", &mut mu_joint.iter().flatten().copied())?;
        check("nu_joint", &mut nu_joint.iter().flatten().copied())?;
        check("mu_shift", &mut mu_shift.iter().copied())?;
        Ok(Self { mu_joint, mu_shift, nu_joint })
    }

    /// `X′ = X` under `μ`.
    pub fn unshifted(mu_joint: Vec<Vec<f64>>, nu_joint: Vec<Vec<f64>>) -> Result<Self> {
        let shift = mu_joint.iter().map(|row| row.iter().sum()).collect();
        Self::new(mu_joint, shift, nu_joint)
    }

    /// Random instance with Dirichlet(1, …, 1) weights; `mu == nu` when `identical`.
    pub fn random<R: Rng + ?Sized>(states: usize, identical: bool, rng: &mut R) -> Result<Self> {
        if states == 0 || states > MAX_STATES {
            return Err(Error::InvalidParameter {
                name: "|Omega|",
                value: states as f64,
                reason: "state space must have between 1 and 6 states",
            });
        }
        let mut dirichlet = |len: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|w| w / total).collect()
        };
        let table = |flat: Vec<f64>| flat.chunks(states).map(|c| c.to_vec()).collect::<Vec<_>>();
        let mu = table(dirichlet(states * states));
        if identical {
            return Self::unshifted(mu.clone(), mu);
        }
        let shift = dirichlet(states);
        let nu = table(dirichlet(states * states));
        Self::new(mu, shift, nu)
    }

    pub fn states(&self) -> usize {
        self.mu_shift.len()
    }
}

/// Both sides of the shifted composition rule on one finite instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub instance: FiniteInstance,
    pub q: f64,
    /// `R_q(μ^Y ‖ ν^Y)`.
    pub lhs: f64,
    /// Shift term plus the optimal coupling term.
    pub rhs: f64,
    /// `R_q(μ^{X′} ‖ ν^X)`.
    pub shift_term: f64,
    pub coupling_term: f64,
    /// Classical chain/composition rule bound (`X′ = X`, identity coupling).
    pub unshifted: f64,
    pub margin: f64,
    pub pass: bool,
}

fn conditionals(joint: &[Vec<f64>], which: &'static str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let marginal: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let mut cond = Vec::with_capacity(joint.len());
    for (x, row) in joint.iter().enumerate() {
        if marginal[x] <= 0.0 {
            return Err(Error::ZeroProbabilityConditioning { state: x, which });
        }
        cond.push(row.iter().map(|w| w / marginal[x]).collect());
    }
    Ok((marginal, cond))
}

fn y_marginal(joint: &[Vec<f64>]) -> Vec<f64> {
    (0..joint.len()).map(|y| joint.iter().map(|row| row[y]).sum()).collect()
}

/// Evaluates both sides of the shifted composition rule.
///
/// KL: `KL(μ^Y‖ν^Y) ≤ KL(μ^{X′}‖ν^X) + inf_γ E_γ KL(μ^{Y|X=x}‖ν^{Y|X=x′})`.
/// `q > 1`: the expectation becomes the essential supremum over the support
/// of `γ`, minimized by [`bottleneck_transport`].
pub fn verify_shifted_composition_finite(instance: &FiniteInstance, q: RenyiOrder) -> Result<CompositionReport> {
    let (mu_x, mu_cond) = conditionals(&instance.mu_joint, "mu")?;
    let (nu_x, nu_cond) = conditionals(&instance.nu_joint, "nu")?;
    let n = instance.states();

    let lhs = renyi_discrete(&y_marginal(&instance.mu_joint), &y_marginal(&instance.nu_joint), q);
    let shift_term = renyi_discrete(&instance.mu_shift, &nu_x, q);
    let pair = DMatrix::from_fn(n, n, |x, xp| renyi_discrete(&mu_cond[x], &nu_cond[xp], q));

    let coupling_term = if q.is_kl() {
        kl_transport(&mu_x, &instance.mu_shift, &pair)?
    } else {
        bottleneck_transport(&mu_x, &instance.mu_shift, &pair)?.1
    };
    let rhs = shift_term + coupling_term;

    let unshifted = renyi_discrete(&mu_x, &nu_x, q)
        + if q.is_kl() {
            (0..n).map(|x| mu_x[x] * pair[(x, x)]).sum::<f64>()
        } else {
            (0..n).filter(|&x| mu_x[x] > 0.0).map(|x| pair[(x, x)]).fold(0.0, f64::max)
        };

    let margin = rhs - lhs;
    let pass = lhs <= rhs + 1e-12 * (1.0 + rhs.abs());
    Ok(CompositionReport {
        instance: instance.clone(),
        q: q.value(),
        lhs,
        rhs,
        shift_term,
        coupling_term,
        unshifted,
        margin,
        pass,
    })
}

/// Expected-cost transport where infinite costs are forbidden cells.
fn kl_transport(a: &[f64], b: &[f64], cost: &DMatrix<f64>) -> Result<f64> {
    if cost.iter().all(|c| c.is_finite()) {
        return Ok(transport_lp(a, b, cost)?.1);
    }
    let finite_max = cost.iter().filter(|c| c.is_finite()).fold(0.0f64, |s, c| s.max(*c));
    let penalty = 1e6 * (1.0 + finite_max);
    let capped = cost.map(|c| if c.is_finite() { c } else { penalty });
    let (g, value) = transport_lp(a, b, &capped)?;
    let forbidden: f64 = g
        .weights()
        .iter()
        .zip(cost.iter())
        .filter(|(_, c)| !c.is_finite())
        .map(|(w, _)| *w)
        .sum();
    Ok(if forbidden > 1e-12 { f64::INFINITY } else { value })
}

/// Rényi divergence between two 1D Gaussian mixtures sharing a component
/// variance, by Simpson quadrature on a truncated grid.
///
/// Components are `(weight, mean)` pairs. Used as an independent check of
/// the convexity principle for Gaussian kernels.
pub fn gaussian_mixture_divergence_1d(
    first: &[(f64, f64)],
    second: &[(f64, f64)],
    variance: f64,
    q: RenyiOrder,
) -> Result<f64> {
    check_positive("variance", variance)?;
    if first.is_empty() || second.is_empty() {
        return Err(Error::InvalidMeasure("empty mixture".into()));
    }
    let sd = variance.sqrt();
    let means = first.iter().chain(second).map(|c| c.1);
    let lo = means.clone().fold(f64::INFINITY, f64::min) - 14.0 * sd;
    let hi = means.fold(f64::NEG_INFINITY, f64::max) + 14.0 * sd;
    let panels = 20_000usize;
    let dx = (hi - lo) / panels as f64;
    let log_mix = |comps: &[(f64, f64)], x: f64| -> f64 {
        let terms: Vec<f64> = comps
            .iter()
            .filter(|c| c.0 > 0.0)
            .map(|&(w, m)| w.ln() - 0.5 * (x - m).powi(2) / variance)
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() - 0.5 * (2.0 * std::f64::consts::PI * variance).ln()
    };
    let qv = q.value();
    let integrand = |x: f64| {
        let (lp, lr) = (log_mix(first, x), log_mix(second, x));
        if q.is_kl() {
            lp.exp() * (lp - lr)
        } else {
            (qv * lp + (1.0 - qv) * lr).exp()
        }
    };
    let mut sum = integrand(lo) + integrand(hi);
    for k in 1..panels {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(lo + k as f64 * dx);
    }
    let integral = sum * dx / 3.0;
    Ok(if q.is_kl() {
        integral.max(0.0)
    } else {
        (integral.ln() / (qv - 1.0)).max(0.0)
    })
}

/// Both sides of the convexity principle for one Euler step of the 1D OU
/// process started at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub x0: f64,
    pub lipschitz: f64,
    pub h: f64,
    pub q: f64,
    pub nu: DiscreteMeasure,
    pub nu_prime: DiscreteMeasure,
    /// Mixture divergence `R_q(δ_{x0}P ∗ ν ‖ δ_{x0}P ∗ ν′)` by quadrature.
    pub lhs: f64,
    /// [`convexity_upgrade`] of the exact Dirac bound `q‖v‖²/(4h)`.
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Runs the convexity principle with `P = N(rx, 2h)`, `r = 1 − Lh`, and
/// `ρ(v)` the one-step shift bound, which is exact for this kernel.
///
/// Passes when `lhs ≤ rhs (1 + 10⁻⁶) + 10⁻⁹` to absorb quadrature error.
pub fn verify_convexity_gaussian_1d(
    x0: f64,
    lipschitz: f64,
    h: f64,
    nu: &DiscreteMeasure,
    nu_prime: &DiscreteMeasure,
    q: RenyiOrder,
) -> Result<ConvexityReport> {
    if nu.dim() != 1 || nu_prime.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: nu.dim().max(nu_prime.dim()),
        });
    }
    let step = crate::kernels::StepSize::new(h, lipschitz)?;
    let center = step.contraction() * x0;
    let rho = |u: &DVector<f64>| -> f64 {
        crate::bounds::discrete_srt_bound(q, lipschitz, 2.0, h, 1, u.norm()).map_or(f64::NAN, |b| b.value)
    };
    let rhs = convexity_upgrade(rho, q, nu, nu_prime)?;
    let mixture = |m: &DiscreteMeasure| -> Vec<(f64, f64)> {
        m.weights().iter().zip(&m.atoms).map(|(w, a)| (*w, center + a[0])).collect()
    };
    let lhs = gaussian_mixture_divergence_1d(&mixture(nu), &mixture(nu_prime), 2.0 * h, q)?;
    Ok(ConvexityReport {
        x0,
        lipschitz,
        h,
        q: q.value(),
        nu: nu.clone(),
        nu_prime: nu_prime.clone(),
        lhs,
        rhs,
        margin: rhs - lhs,
        pass: lhs <= rhs * (1.0 + 1e-6) + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sq(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (v - w).norm_squared()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn random_points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
        (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0))).collect()
    }

    fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let head: f64 = w[..n - 1].iter().sum();
        w[n - 1] = 1.0 - head;
        w
    }

    #[test]
    fn spec_examples() {
        let nu = DiscreteMeasure::from_scalars(&[0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let (g, v) = ot_min_linear(&nu, &nu, sq).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.weights()[(0, 1)], 0.0);

        let nu2 = DiscreteMeasure::from_scalars(&[0.5, 1.5], vec![0.5, 0.5]).unwrap();
        let (g, v) = ot_min_linear(&nu, &nu2, sq).unwrap();
        assert_relative_eq!(v, 0.25, max_relative = 1e-14);
        assert_eq!(g.weights()[(0, 1)], 0.0);

        let a = DiscreteMeasure::from_scalars(&[0.3], vec![1.0]).unwrap();
        let b = DiscreteMeasure::from_scalars(&[-1.2], vec![1.0]).unwrap();
        assert_relative_eq!(ot_min_linear(&a, &b, sq).unwrap().1, 2.25, max_relative = 1e-14);

        assert_eq!(convexity_upgrade(|u| u.norm_squared(), RenyiOrder::KL, &nu, &nu).unwrap(), 0.0);
        assert_eq!(convexity_upgrade(|u| u.norm_squared(), RenyiOrder::new(3.0).unwrap(), &nu, &nu).unwrap(), 0.0);
        let c = 0.7;
        assert_relative_eq!(
            convexity_upgrade(|u| c * u.norm_squared(), RenyiOrder::KL, &a, &b).unwrap(),
            c * 2.25,
            max_relative = 1e-14
        );
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::from_scalars(&[0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::from_scalars(&[0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::from_scalars(&[0.0, 1.0], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteMeasure::from_scalars(&[0.0, 1.0], vec![1.0, 0.0]).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.4]);
        assert!(Coupling::new(bad, &[0.5, 0.5], &[0.5, 0.5]).is_err());
        assert!(convexity_upgrade(|u| 1.0 + u.norm(), RenyiOrder::KL, &DiscreteMeasure::dirac(DVector::zeros(1)).unwrap(), &DiscreteMeasure::dirac(DVector::zeros(1)).unwrap()).is_err());
    }

    #[test]
    fn uniform_transport_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 1 + trial % 6;
            let d = 1 + trial % 3;
            let left = random_points(n, d, &mut rng);
            let right = random_points(n, d, &mut rng);
            let cost = DMatrix::from_fn(n, n, |i, j| sq(&left[i], &right[j]).sqrt().powf(1.0 + (trial % 3) as f64));
            let oracle = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            let w = vec![1.0 / n as f64; n];
            let (g, value) = transport_lp(&w, &w, &cost).unwrap();
            assert_relative_eq!(value, oracle, max_relative = 1e-10, epsilon = 1e-13);
            assert_relative_eq!(g.expectation(&cost), value, max_relative = 1e-12, epsilon = 1e-14);

            let bottleneck_oracle = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            let (_, b) = bottleneck_transport(&w, &w, &cost).unwrap();
            assert_eq!(b, bottleneck_oracle);
        }
    }

    #[test]
    fn two_by_two_matches_edge_enumeration() {
        // Couplings of two 2-atom measures form a segment; the optimum is at an end.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let a = random_weights(2, &mut rng);
            let b = random_weights(2, &mut rng);
            let cost = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..3.0));
            let lo = (a[0] - b[1]).max(0.0);
            let hi = a[0].min(b[0]);
            let eval = |t: f64| {
                let g = [t, a[0] - t, b[0] - t, 1.0 - a[0] - b[0] + t];
                g[0] * cost[(0, 0)] + g[1] * cost[(0, 1)] + g[2] * cost[(1, 0)] + g[3] * cost[(1, 1)]
            };
            let oracle = eval(lo).min(eval(hi));
            let (_, value) = transport_lp(&a, &b, &cost).unwrap();
            assert_relative_eq!(value, oracle, max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn quadratic_cost_on_two_atoms_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut y: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            y.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let nu = DiscreteMeasure::from_scalars(&x, random_weights(2, &mut rng)).unwrap();
            let nup = DiscreteMeasure::from_scalars(&y, random_weights(2, &mut rng)).unwrap();
            let (g, _) = ot_min_linear(&nu, &nup, sq).unwrap();
            let w = g.weights();
            // Monotone: mass never crosses (x0 → y1 together with x1 → y0).
            assert!(w[(0, 1)].min(w[(1, 0)]) < 1e-12);
        }
    }

    #[test]
    fn general_marginals_are_optimal_by_duality() {
        // Check complementary slackness with explicitly recomputed potentials.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for trial in 0..100 {
            let m = 1 + trial % 7;
            let n = 1 + (trial / 7) % 7;
            let a = random_weights(m, &mut rng);
            let b = random_weights(n, &mut rng);
            let cost = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..5.0));
            let (g, value) = transport_lp(&a, &b, &cost).unwrap();
            // Any other vertex obtained by a random permutation-greedy fill costs at least as much.
            for _ in 0..20 {
                let mut order: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
                order.shuffle(&mut rng);
                let (mut ra, mut rb) = (a.clone(), b.clone());
                let mut total = 0.0;
                for (i, j) in order {
                    let t = ra[i].min(rb[j]);
                    ra[i] -= t;
                    rb[j] -= t;
                    total += t * cost[(i, j)];
                }
                assert!(value <= total + 1e-12);
            }
            assert_relative_eq!(g.weights().sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_supplies_terminate() {
        let w = vec![0.25; 4];
        let cost = DMatrix::from_fn(4, 4, |i, j| ((i + j) % 2) as f64);
        let (_, v) = transport_lp(&w, &w, &cost).unwrap();
        assert_eq!(v, 0.0);
        let (_, v) = transport_lp(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &DMatrix::from_element(3, 3, 2.0)).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn transport_errors() {
        assert!(transport_lp(&[0.5, 0.5], &[1.0], &DMatrix::from_element(2, 2, 0.0)).is_err());
        assert!(transport_lp(&[0.5, 0.6], &[1.0], &DMatrix::from_element(2, 1, 0.0)).is_err());
        assert!(transport_lp(&[1.0], &[1.0], &DMatrix::from_element(1, 1, f64::INFINITY)).is_err());
        let big = vec![1.0 / 65.0; 65];
        assert!(transport_lp(&big, &big, &DMatrix::zeros(65, 65)).is_err());
    }

    #[test]
    fn renyi_upgrade_nondecreasing_in_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..30 {
            let nu = DiscreteMeasure::new(random_points(3, 2, &mut rng), random_weights(3, &mut rng)).unwrap();
            let nup = DiscreteMeasure::new(random_points(4, 2, &mut rng), random_weights(4, &mut rng)).unwrap();
            let mut last = 0.0;
            for q in [1.0, 1.5, 2.0, 4.0, 8.0] {
                let v = convexity_upgrade(|u| 0.4 * u.norm_squared(), RenyiOrder::new(q).unwrap(), &nu, &nup).unwrap();
                assert!(v >= last - 1e-12, "q={q}: {v} < {last}");
                last = v;
            }
        }
    }

    #[test]
    fn composition_rule_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for q in [1.0, 2.0, 3.5] {
            let q = RenyiOrder::new(q).unwrap();
            let same = FiniteInstance::random(4, true, &mut rng).unwrap();
            let r = verify_shifted_composition_finite(&same, q).unwrap();
            assert!(r.lhs.abs() <= 1e-12 && r.rhs.abs() <= 1e-12 && r.pass);

            for _ in 0..50 {
                let inst = FiniteInstance::random(3, false, &mut rng).unwrap();
                let r = verify_shifted_composition_finite(&inst, q).unwrap();
                assert!(r.pass, "{r:?}");
                // The identity coupling is admissible when X′ = X.
                let unshifted = FiniteInstance::unshifted(inst.mu_joint.clone(), inst.nu_joint.clone()).unwrap();
                let ru = verify_shifted_composition_finite(&unshifted, q).unwrap();
                assert!(ru.rhs <= ru.unshifted + 1e-12);
                assert!(ru.lhs <= ru.unshifted + 1e-12);
            }
        }
    }

    #[test]
    fn unshifted_kl_is_the_joint_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let inst = FiniteInstance::random(5, false, &mut rng).unwrap();
            let r = verify_shifted_composition_finite(&inst, RenyiOrder::KL).unwrap();
            let p: Vec<f64> = inst.mu_joint.iter().flatten().copied().collect();
            let s: Vec<f64> = inst.nu_joint.iter().flatten().copied().collect();
            assert_relative_eq!(r.unshifted, kl_discrete(&p, &s), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_probability_state_is_named() {
        let mu = vec![vec![0.5, 0.0], vec![0.5, 0.0]];
        let nu = vec![vec![0.5, 0.5], vec![0.0, 0.0]];
        let inst = FiniteInstance::unshifted(mu, nu).unwrap();
        assert_eq!(
            verify_shifted_composition_finite(&inst, RenyiOrder::KL).unwrap_err(),
            Error::ZeroProbabilityConditioning { state: 1, which: "nu" }
        );
    }

    #[test]
    fn forbidden_cells_are_avoided_or_reported() {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, f64::INFINITY, f64::INFINITY, 1.0]);
        assert_eq!(bottleneck_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap().1, 1.0);
        assert_eq!(kl_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap(), 0.5);
        assert_eq!(bottleneck_transport(&[1.0, 0.0], &[0.0, 1.0], &cost).unwrap().1, f64::INFINITY);
        assert_eq!(kl_transport(&[1.0, 0.0], &[0.0, 1.0], &cost).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mixture_quadrature_matches_gaussian_closed_form() {
        let v = 0.37;
        let kl = gaussian_mixture_divergence_1d(&[(1.0, 0.4)], &[(1.0, -0.1)], v, RenyiOrder::KL).unwrap();
        assert_relative_eq!(kl, 0.25 / (2.0 * v), max_relative = 1e-9);
        let r3 = gaussian_mixture_divergence_1d(&[(1.0, 0.4)], &[(1.0, -0.1)], v, RenyiOrder::new(3.0).unwrap()).unwrap();
        assert_relative_eq!(r3, 3.0 * 0.25 / (2.0 * v), max_relative = 1e-9);
    }

    #[test]
    fn gaussian_kernel_end_to_end() {
        // μ = δ_1, one OU Euler step with L = 1, h = 0.1, ν = unif{±0.5}, ν′ = δ₀.
        let (l, h, lambda): (f64, f64, f64) = (1.0, 0.1, 2.0);
        let center = 1.0 - l * h;
        let rho = |u: &DVector<f64>| crate::bounds::discrete_srt_bound(RenyiOrder::KL, l, lambda, h, 1, u.norm()).unwrap().value;
        let nu = DiscreteMeasure::from_scalars(&[-0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let nup = DiscreteMeasure::from_scalars(&[0.0], vec![1.0]).unwrap();
        let upgrade = convexity_upgrade(rho, RenyiOrder::KL, &nu, &nup).unwrap();
        let kl = gaussian_mixture_divergence_1d(
            &[(0.5, center - 0.5), (0.5, center + 0.5)],
            &[(1.0, center)],
            2.0 * h,
            RenyiOrder::KL,
        )
        .unwrap();
        assert!(kl <= upgrade, "{kl} > {upgrade}");
        assert_relative_eq!(upgrade, 0.25 / (4.0 * h), max_relative = 1e-12);
    }

    #[test]
    fn convexity_report_matches_manual_computation() {
        let nu = DiscreteMeasure::from_scalars(&[-0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let nup = DiscreteMeasure::from_scalars(&[0.0], vec![1.0]).unwrap();
        let r = verify_convexity_gaussian_1d(1.0, 1.0, 0.1, &nu, &nup, RenyiOrder::KL).unwrap();
        assert!(r.pass);
        assert_relative_eq!(r.rhs, 0.25 / 0.4, max_relative = 1e-12);
        let q2 = verify_convexity_gaussian_1d(1.0, 1.0, 0.1, &nu, &nup, RenyiOrder::new(2.0).unwrap()).unwrap();
        assert!(q2.pass && q2.rhs >= r.rhs);
        let two_d = DiscreteMeasure::new(vec![DVector::from_vec(vec![0.0, 1.0])], vec![1.0]).unwrap();
        assert!(verify_convexity_gaussian_1d(0.0, 1.0, 0.1, &two_d, &nup, RenyiOrder::KL).is_err());
    }

    proptest! {
        #[test]
        fn relabeling_and_zero_atoms_do_not_change_value(seed in 0u64..10_000, m in 1usize..6, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let left = random_points(m, 2, &mut rng);
            let right = random_points(n, 2, &mut rng);
            let a = random_weights(m, &mut rng);
            let b = random_weights(n, &mut rng);
            let nu = DiscreteMeasure::new(left.clone(), a.clone()).unwrap();
            let nup = DiscreteMeasure::new(right.clone(), b.clone()).unwrap();
            let (_, base) = ot_min_linear(&nu, &nup, sq).unwrap();

            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(&mut rng);
            let nu_perm = DiscreteMeasure::new(idx.iter().map(|&i| left[i].clone()).collect(), idx.iter().map(|&i| a[i]).collect()).unwrap();
            let (_, permuted) = ot_min_linear(&nu_perm, &nup, sq).unwrap();
            prop_assert!((permuted - base).abs() <= 1e-10 * (1.0 + base));

            let mut padded_atoms = right.clone();
            padded_atoms.push(DVector::from_element(2, 99.0));
            let mut padded_w = b.clone();
            padded_w.push(0.0);
            let nup_pad = DiscreteMeasure::new(padded_atoms, padded_w).unwrap();
            let (_, padded) = ot_min_linear(&nu, &nup_pad, sq).unwrap();
            prop_assert!((padded - base).abs() <= 1e-10 * (1.0 + base));
        }
    }
}
