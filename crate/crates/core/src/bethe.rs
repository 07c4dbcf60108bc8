//! Bethe equations for the rational gl(2) chain and their nested gl(N)
//! generalization: residuals, Jacobians, solvers, energies, TQ checks.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::linalg::{solve as lin_solve, CMatrix};
use crate::poly::{ComplexPolynomial, PolyError};
use crate::spinchain::ChainSpec;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Roots closer than this to a pole `theta_j +- i` (or to each other) make
/// the rational residual undefined.
pub const POLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BetheError {
    #[error("root {index} is within {distance:.3e} of a pole")]
    Singular { index: usize, distance: f64 },
    #[error("roots {a} and {b} collide (distance {distance:.3e})")]
    Collision { a: usize, b: usize, distance: f64 },
    #[error("energy formula needs a homogeneous chain")]
    NotHomogeneous,
    #[error("energy has imaginary part {imag:.3e}: unphysical root set")]
    Unphysical { imag: f64 },
    #[error("structural mismatch: {0}")]
    Structural(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheState {
    #[serde(rename = "L")]
    pub l: usize,
    /// Number of level-1 roots.
    #[serde(rename = "M")]
    pub m: usize,
    /// Rapidities per nesting level (one level for gl(2)).
    pub levels: Vec<Vec<C64>>,
    /// See [`scaled_residual_norm`]; for nested states the Euclidean norm
    /// of [`residual_nested`].
    pub residual_norm: f64,
    /// Energy from the dispersion; absent for inhomogeneous chains.
    pub energy: Option<C64>,
    /// Doubled logarithmic branch numbers `2 I_k`, when the state came from
    /// the real-root logarithmic form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_numbers: Option<Vec<i64>>,
}

impl BetheState {
    pub fn vacuum(spec: &ChainSpec) -> Self {
        let energy = spec.is_homogeneous().then(|| C64::new(spec.j * spec.l as f64, 0.0));
        Self {
            l: spec.l,
            m: 0,
            levels: vec![Vec::new()],
            residual_norm: 0.0,
            energy,
            quantum_numbers: None,
        }
    }

    pub fn roots(&self) -> &[C64] {
        &self.levels[0]
    }

    /// `Q(u) = prod_k (u - v_k)` over level-1 roots.
    pub fn q(&self) -> ComplexPolynomial {
        ComplexPolynomial::from_roots(self.roots())
    }
}

fn pole_check(v: &[C64], spec: &ChainSpec) -> Result<(), BetheError> {
    for (k, vk) in v.iter().enumerate() {
        for th in &spec.theta {
            for s in [I, -I] {
                let distance = (vk - th - s).norm();
                if distance < POLE_TOL {
                    return Err(BetheError::Singular { index: k, distance });
                }
            }
        }
        for (l, vl) in v.iter().enumerate().take(k) {
            let distance = (vk - vl).norm();
            if distance < POLE_TOL {
                return Err(BetheError::Collision { a: l, b: k, distance });
            }
        }
    }
    Ok(())
}

/// `prod_j (v_k - theta_j - i)/(v_k - theta_j + i) - prod_{l != k} (v_k - v_l - 2i)/(v_k - v_l + 2i)`.
pub fn residual_su2(v: &[C64], spec: &ChainSpec) -> Result<Vec<C64>, BetheError> {
    pole_check(v, spec)?;
    for (k, vk) in v.iter().enumerate() {
        for (l, vl) in v.iter().enumerate().take(k) {
            let distance = (vk - vl - 2.0 * I).norm().min((vk - vl + 2.0 * I).norm());
            if distance < POLE_TOL {
                return Err(BetheError::Singular { index: l, distance });
            }
        }
    }
    Ok((0..v.len())
        .map(|k| chain_ratio(v[k], spec) - pair_ratio(v, k, 2.0 * I))
        .collect())
}

fn chain_ratio(vk: C64, spec: &ChainSpec) -> C64 {
    spec.theta.iter().map(|th| (vk - th - I) / (vk - th + I)).product()
}

fn pair_ratio(v: &[C64], k: usize, c: C64) -> C64 {
    v.iter()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, vl)| (v[k] - vl - c) / (v[k] - vl + c))
        .product()
}

/// Largest component of [`residual_su2`], each divided by
/// `1 + |prod_{l != k} ...|`. Near-singular strings make both products
/// large, so the raw residual overstates the error there.
pub fn scaled_residual_norm(v: &[C64], spec: &ChainSpec) -> Result<f64, BetheError> {
    let r = residual_su2(v, spec)?;
    Ok((0..v.len())
        .map(|k| r[k].norm() / (1.0 + pair_ratio(v, k, 2.0 * I).norm()))
        .fold(0.0, f64::max))
}

/// Analytic Jacobian of [`residual_su2`] from logarithmic derivatives.
pub fn jacobian_su2(v: &[C64], spec: &ChainSpec) -> Result<CMatrix, BetheError> {
    pole_check(v, spec)?;
    let m = v.len();
    let two_i = 2.0 * I;
    let mut jac = CMatrix::zeros(m, m);
    for k in 0..m {
        let a = chain_ratio(v[k], spec);
        let dlog_a: C64 = spec
            .theta
            .iter()
            .map(|th| ONE / (v[k] - th - I) - ONE / (v[k] - th + I))
            .sum();
        let b = pair_ratio(v, k, two_i);
        let mut diag = a * dlog_a;
        for l in 0..m {
            if l == k {
                continue;
            }
            let x = v[k] - v[l];
            let g = ONE / (x - two_i) - ONE / (x + two_i);
            diag -= b * g;
            jac[(k, l)] = b * g;
        }
        jac[(k, k)] = diag;
    }
    Ok(jac)
}

/// Nested equations for gl(N). `levels[t-1]` holds the level-`t` roots for
/// `t = 1..N-1`; level 0 is the inhomogeneities and level `N` is empty.
/// Component: `prod_l [lower] * prod_{all l} [same] * prod_l [upper] + 1`,
/// with the self factor `l = k` equal to `-1`.
pub fn residual_nested(levels: &[Vec<C64>], n: usize, spec: &ChainSpec) -> Result<Vec<C64>, BetheError> {
    residual_nested_with(levels, n, spec, NestedForm::SelfIncluded)
}

/// Reading of the same-level product in the nested equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NestedForm {
    /// Product over all `l` including the self factor `-1`; reduces to the
    /// gl(2) equations at `N = 2`.
    #[default]
    SelfIncluded,
    /// Product over `l != k` with `+1`; has finite solutions in sectors that
    /// violate the highest-weight condition (e.g. one root per level at L = 3).
    SelfExcluded,
}

pub fn residual_nested_with(
    levels: &[Vec<C64>],
    n: usize,
    spec: &ChainSpec,
    form: NestedForm,
) -> Result<Vec<C64>, BetheError> {
    if n < 2 {
        return Err(BetheError::InvalidInput(format!("N = {n} < 2")));
    }
    if levels.len() != n - 1 {
        return Err(BetheError::InvalidInput(format!(
            "{} levels supplied for N = {n}",
            levels.len()
        )));
    }
    let mut out = Vec::new();
    for t in 0..levels.len() {
        let lower: &[C64] = if t == 0 { &spec.theta } else { &levels[t - 1] };
        let upper: &[C64] = levels.get(t + 1).map(|x| x.as_slice()).unwrap_or(&[]);
        let same = &levels[t];
        for (k, vk) in same.iter().enumerate() {
            let mut p = match form {
                NestedForm::SelfIncluded => -ONE,
                NestedForm::SelfExcluded => ONE,
            };
            for vl in lower {
                let (num, den) = (vk - vl + I, vk - vl - I);
                if den.norm() < POLE_TOL {
                    return Err(BetheError::Singular {
                        index: k,
                        distance: den.norm(),
                    });
                }
                p *= num / den;
            }
            for (l, vl) in same.iter().enumerate() {
                if l == k {
                    continue;
                }
                let den = vk - vl + 2.0 * I;
                if den.norm() < POLE_TOL {
                    return Err(BetheError::Singular {
                        index: k,
                        distance: den.norm(),
                    });
                }
                p *= (vk - vl - 2.0 * I) / den;
            }
            for vl in upper {
                let den = vk - vl + I;
                if den.norm() < POLE_TOL {
                    return Err(BetheError::Singular {
                        index: k,
                        distance: den.norm(),
                    });
                }
                p *= (vk - vl - I) / den;
            }
            out.push(p + ONE);
        }
    }
    Ok(out)
}

/// Dispersion sum `J L + sum_k (-8 J / (v_k^2 + 1))`, complex.
pub fn energy_of_roots(v: &[C64], spec: &ChainSpec) -> C64 {
    let mut e = C64::new(spec.j * spec.l as f64, 0.0);
    for vk in v {
        e += C64::new(-8.0 * spec.j, 0.0) / (vk * vk + ONE);
    }
    e
}

pub fn energy(state: &BetheState, spec: &ChainSpec) -> Result<f64, BetheError> {
    if !spec.is_homogeneous() {
        return Err(BetheError::NotHomogeneous);
    }
    let e = energy_of_roots(state.roots(), spec);
    if e.im.abs() > 1e-9 * e.re.abs().max(1.0) {
        return Err(BetheError::Unphysical { imag: e.im });
    }
    Ok(e.re)
}

/// `T1 Q - a Q(u - 2i) - d Q(u + 2i)`.
pub fn tq_residual(
    t1: &ComplexPolynomial,
    state: &BetheState,
    spec: &ChainSpec,
) -> Result<ComplexPolynomial, BetheError> {
    if let Some(deg) = t1.degree() {
        if deg > spec.l {
            return Err(BetheError::Structural(format!(
                "T1 has degree {deg}, chain length is {}",
                spec.l
            )));
        }
    }
    let q = state.q();
    let rhs = &(&spec.a_poly() * &q.shifted(-2.0 * I)) + &(&spec.d_poly() * &q.shifted(2.0 * I));
    Ok(&(t1 * &q) - &rhs)
}

/// Transfer-matrix eigenvalue predicted by the roots,
/// `[a Q(u - 2i) + d Q(u + 2i)] / Q`; fails unless the division is exact.
pub fn transfer_eigenvalue(state: &BetheState, spec: &ChainSpec, tol: f64) -> Result<ComplexPolynomial, BetheError> {
    let q = state.q();
    let num = &(&spec.a_poly() * &q.shifted(-2.0 * I)) + &(&spec.d_poly() * &q.shifted(2.0 * I));
    Ok(num.exact_div(&q, tol)?)
}

/// Eigenvalue of the one-site translation `S^{-1}` (see `spinchain::cyclic_shift`).
pub fn momentum_phase(state: &BetheState) -> C64 {
    state.roots().iter().map(|v| (v - I) / (v + I)).product()
}

// ----------------------------------------------------------------------------
// Solver
// ----------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Logarithmic real-root seeds, the decoupled seed family, and random
    /// restarts.
    Seeds,
    /// Continuation from the decoupled family on a grid of `grid` steps,
    /// switching the pairwise interaction on.
    Homotopy { grid: usize },
    /// Both of the above.
    Combined { grid: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub strategy: Strategy,
    /// Acceptance threshold on `residual_norm`.
    pub tol: f64,
    pub max_iter: usize,
    /// Random restarts budget (stops early once the highest-weight count is
    /// reached).
    pub restarts: usize,
    pub seed: u64,
    /// Root sets closer than this are identified.
    pub dedup_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Combined { grid: 40 },
            tol: 1e-9,
            max_iter: 100,
            restarts: 400,
            seed: 11,
            dedup_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionKind {
    NotConverged,
    Collision,
    Divergent,
    PathFailed,
    /// Exact string on a pole that fails the physicality condition.
    UnphysicalSingular,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub states: Vec<BetheState>,
    /// Physical exact strings on a pole `theta +- i`, kept apart from
    /// `states` since their Bethe residual is indeterminate.
    pub singular: Vec<Vec<C64>>,
    /// How many candidates were dropped for each other reason.
    pub excluded: Vec<(ExclusionKind, usize)>,
    /// Expected number of highest-weight states, `C(L,M) - C(L,M-1)`.
    pub highest_weight_count: usize,
}

impl SolveReport {
    fn note(&mut self, kind: ExclusionKind) {
        match self.excluded.iter_mut().find(|(k, _)| *k == kind) {
            Some((_, n)) => *n += 1,
            None => self.excluded.push((kind, 1)),
        }
    }
}

/// A string `{θ + i, θ - i}` plus regular roots `v_k` on a homogeneous
/// chain is an eigenstate iff `(-prod_k (v_k - θ + i)/(v_k - θ - i))^L = 1`.
/// On inhomogeneous chains such strings are never eigenstates.
pub fn singular_is_physical(roots: &[C64], spec: &ChainSpec) -> bool {
    if !spec.is_homogeneous() {
        return false;
    }
    let th = spec.theta[0];
    let up = roots.iter().position(|v| (v - th - I).norm() < 1e-6);
    let down = roots.iter().position(|v| (v - th + I).norm() < 1e-6);
    let (Some(a), Some(b)) = (up, down) else {
        return false;
    };
    let rest: C64 = roots
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != a && *k != b)
        .map(|(_, v)| (v - th + I) / (v - th - I))
        .product();
    ((-rest).powu(spec.l as u32) - 1.0).norm() < 1e-8
}

/// One representative per distinct transfer-matrix eigenvalue that the
/// solver reaches: the vacuum, every regular solution and every physical
/// singular string, for `M = 1..=L/2`.
pub fn eigenstates(spec: &ChainSpec, options: &SolveOptions, exec: Execution) -> Result<Vec<BetheState>, BetheError> {
    let mut out = vec![BetheState::vacuum(spec)];
    for m in 1..=spec.l / 2 {
        let rep = solve(spec, m, options, exec)?;
        out.extend(rep.states);
        // the energy sum has a pole on singular strings
        out.extend(rep.singular.into_iter().map(|roots| BetheState {
            l: spec.l,
            m,
            levels: vec![roots],
            residual_norm: 0.0,
            energy: None,
            quantum_numbers: None,
        }));
    }
    Ok(out)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

pub fn highest_weight_count(l: usize, m: usize) -> usize {
    binomial(l, m) - if m == 0 { 0 } else { binomial(l, m - 1) }
}

/// Cleared (pole-free) form used for Newton and continuation:
/// `d(v_k) prod_{l != k}(v_k - v_l + c) - a(v_k) prod_{l != k}(v_k - v_l - c)`,
/// each component divided by the magnitude of its two terms.
struct Cleared<'a> {
    a: &'a ComplexPolynomial,
    d: &'a ComplexPolynomial,
    da: ComplexPolynomial,
    dd: ComplexPolynomial,
}

fn prod_partials(f: &[C64]) -> (C64, Vec<C64>) {
    let n = f.len();
    let mut prefix = vec![ONE; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * f[i];
    }
    let mut suffix = ONE;
    let mut partial = vec![ONE; n];
    for i in (0..n).rev() {
        partial[i] = prefix[i] * suffix;
        suffix *= f[i];
    }
    (prefix[n], partial)
}

impl<'a> Cleared<'a> {
    fn new(a: &'a ComplexPolynomial, d: &'a ComplexPolynomial) -> Self {
        Self {
            a,
            d,
            da: a.derivative(),
            dd: d.derivative(),
        }
    }

    /// Values, relative magnitudes, and Jacobian.
    fn eval(&self, v: &[C64], c: C64) -> (DVector<C64>, Vec<f64>, CMatrix) {
        let m = v.len();
        let mut f = DVector::zeros(m);
        let mut mag = vec![0.0; m];
        let mut jac = CMatrix::zeros(m, m);
        for k in 0..m {
            let others: Vec<usize> = (0..m).filter(|&l| l != k).collect();
            let plus: Vec<C64> = others.iter().map(|&l| v[k] - v[l] + c).collect();
            let minus: Vec<C64> = others.iter().map(|&l| v[k] - v[l] - c).collect();
            let (pp, dp) = prod_partials(&plus);
            let (pm, dm) = prod_partials(&minus);
            let (dv, av) = (self.d.eval(v[k]), self.a.eval(v[k]));
            let t1 = dv * pp;
            let t2 = av * pm;
            f[k] = t1 - t2;
            mag[k] = t1.norm() + t2.norm();
            let sum_dp: C64 = dp.iter().sum();
            let sum_dm: C64 = dm.iter().sum();
            jac[(k, k)] = self.dd.eval(v[k]) * pp + dv * sum_dp - self.da.eval(v[k]) * pm - av * sum_dm;
            for (idx, &l) in others.iter().enumerate() {
                jac[(k, l)] = -dv * dp[idx] + av * dm[idx];
            }
        }
        (f, mag, jac)
    }

    /// Damped Newton; returns the iterate and whether the step size fell
    /// below rounding level.
    fn newton(&self, mut v: Vec<C64>, c: C64, max_iter: usize) -> (Vec<C64>, bool) {
        for _ in 0..max_iter {
            let (f, mag, jac) = self.eval(&v, c);
            let rel: f64 = f
                .iter()
                .zip(&mag)
                .map(|(x, s)| x.norm() / s.max(1e-300))
                .fold(0.0, f64::max);
            if rel < 1e-15 {
                return (v, true);
            }
            let norm0 = f.norm();
            let Some(step) = lin_solve(&jac, &(-f)) else {
                return (v, false);
            };
            if !step.iter().all(|s| s.re.is_finite() && s.im.is_finite()) {
                return (v, false);
            }
            let mut lam = 1.0;
            let mut next;
            loop {
                next = v.iter().zip(step.iter()).map(|(x, s)| x + s * lam).collect::<Vec<_>>();
                if self.eval(&next, c).0.norm() < norm0 || lam < 1e-3 {
                    break;
                }
                lam *= 0.5;
            }
            let size = step.norm() * lam;
            let scale = 1.0 + v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            v = next;
            if size < 1e-14 * scale {
                return (v, true);
            }
        }
        (v, false)
    }
}

/// Newton polish on the rational residual; keeps the better iterate.
fn polish_rational(v: Vec<C64>, spec: &ChainSpec) -> (Vec<C64>, f64) {
    let norm = |w: &[C64]| scaled_residual_norm(w, spec);
    let Ok(mut best_norm) = norm(&v) else {
        return (v, f64::INFINITY);
    };
    let mut best = v;
    for _ in 0..6 {
        let (Ok(f), Ok(jac)) = (residual_su2(&best, spec), jacobian_su2(&best, spec)) else {
            break;
        };
        let Some(step) = lin_solve(&jac, &(-DVector::from_vec(f))) else {
            break;
        };
        let next: Vec<C64> = best.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
        match norm(&next) {
            Ok(n) if n < best_norm => {
                best = next;
                best_norm = n;
            }
            _ => break,
        }
    }
    (best, best_norm)
}

enum Outcome {
    Regular(Vec<C64>, f64, Option<Vec<i64>>),
    Singular(Vec<C64>),
    Excluded(ExclusionKind),
}

fn classify(v: Vec<C64>, spec: &ChainSpec, tol: f64, qn: Option<Vec<i64>>) -> Outcome {
    if !v.iter().all(|x| x.re.is_finite() && x.im.is_finite()) || v.iter().any(|x| x.norm() > 1e6) {
        return Outcome::Excluded(ExclusionKind::Divergent);
    }
    let m = v.len();
    let scale = 1.0 + v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for a in 0..m {
        for b in 0..a {
            if (v[a] - v[b]).norm() < 1e-6 * scale {
                return Outcome::Excluded(ExclusionKind::Collision);
            }
        }
    }
    // Singular zeros of the cleared form are multiple: Newton locks the
    // pair difference to 2i quickly but its centre creeps towards theta_j
    // only algebraically, so detect the string structure directly.
    let near = |x: &C64, th: &C64, s: C64| (x - th - s).norm() < 1e-3;
    if v.iter()
        .any(|x| spec.theta.iter().any(|th| near(x, th, I) || near(x, th, -I)))
    {
        let pair = spec.theta.iter().find_map(|th| {
            let a = v.iter().position(|x| near(x, th, I))?;
            let b = v.iter().position(|y| (v[a] - y - 2.0 * I).norm() < 1e-8)?;
            Some((*th, a, b))
        });
        return if let Some((th, a, b)) = pair {
            let mut snapped = v;
            snapped[a] = th + I;
            snapped[b] = th - I;
            Outcome::Singular(snapped)
        } else {
            Outcome::Excluded(ExclusionKind::NotConverged)
        };
    }
    let (v, norm) = polish_rational(v, spec);
    if norm <= tol {
        Outcome::Regular(v, norm, qn)
    } else {
        Outcome::Excluded(ExclusionKind::NotConverged)
    }
}

fn sort_roots(v: &mut [C64]) {
    v.sort_by(|a, b| {
        let ka = (a.re * 1e8).round();
        let kb = (b.re * 1e8).round();
        ka.total_cmp(&kb).then(a.im.total_cmp(&b.im))
    });
}

/// Distance between two root multisets by greedy nearest matching.
pub fn root_set_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, y) in b.iter().enumerate() {
            if !used[j] && (x - y).norm() < best.0 {
                best = ((x - y).norm(), j);
            }
        }
        if best.1 == usize::MAX {
            return f64::INFINITY;
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Roots of `d(u) - a(u)`, the decoupled (non-interacting) equation.
pub fn decoupled_seeds(spec: &ChainSpec) -> Result<Vec<C64>, BetheError> {
    let p = &spec.d_poly() - &spec.a_poly();
    let mut r = p.roots(None)?;
    sort_roots(&mut r);
    Ok(r)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Continuation from decoupled seeds; the pairwise shift follows
/// `c(s) = 2i (s + i gamma s (1 - s))`, a complex detour that avoids
/// real-parameter branch crossings.
fn continue_path(cl: &Cleared, seed: Vec<C64>, grid: usize, gamma: f64, max_iter: usize) -> Option<Vec<C64>> {
    let c_of = |s: f64| 2.0 * I * C64::new(s, gamma * s * (1.0 - s));
    let mut v = seed;
    let mut s = 0.0;
    let mut ds = 1.0 / grid.max(1) as f64;
    let min_ds = ds / 1024.0;
    while s < 1.0 {
        let s1 = (s + ds).min(1.0);
        let (w, ok) = cl.newton(v.clone(), c_of(s1), 12);
        let scale = 1.0 + v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let jump = v.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let collided = (0..w.len()).any(|a| (0..a).any(|b| (w[a] - w[b]).norm() < 1e-6 * scale));
        if ok && jump < 0.25 * scale && !collided {
            v = w;
            s = s1;
            ds = (ds * 1.5).min(0.1);
        } else {
            ds *= 0.5;
            if ds < min_ds {
                return None;
            }
        }
    }
    let (v, _) = cl.newton(v, 2.0 * I, max_iter);
    Some(v)
}

/// Real-root logarithmic form for the homogeneous chain:
/// `2 L atan(v_k) = pi J_k + 2 sum_{l != k} atan((v_k - v_l)/2)` with
/// doubled quantum numbers `J_k`.
fn solve_log_form(l: usize, twice_qn: &[i64], max_iter: usize) -> Option<Vec<f64>> {
    let m = twice_qn.len();
    let lf = l as f64;
    let mut v: Vec<f64> = twice_qn
        .iter()
        .map(|&j| (std::f64::consts::PI * j as f64 / (2.0 * lf)).tan())
        .collect();
    for _ in 0..max_iter {
        let mut f = DVector::<f64>::zeros(m);
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            f[k] = 2.0 * lf * v[k].atan() - std::f64::consts::PI * twice_qn[k] as f64;
            jac[(k, k)] = 2.0 * lf / (1.0 + v[k] * v[k]);
            for q in 0..m {
                if q == k {
                    continue;
                }
                let x = (v[k] - v[q]) / 2.0;
                f[k] -= 2.0 * x.atan();
                let g = 1.0 / (1.0 + x * x);
                jac[(k, k)] -= g;
                jac[(k, q)] += g;
            }
        }
        let step = jac.lu().solve(&(-&f))?;
        for k in 0..m {
            v[k] += step[k];
        }
        if !v.iter().all(|x| x.is_finite()) {
            return None;
        }
        if step.norm() < 1e-15 * (1.0 + v.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
            break;
        }
    }
    Some(v)
}

fn log_form_sets(l: usize, m: usize) -> Vec<Vec<i64>> {
    if 2 * m > l || m == 0 {
        return Vec::new();
    }
    // J_k in {-(L-M-1)/2, ..., (L-M-1)/2}, stored doubled
    let count = l - m;
    let values: Vec<i64> = (0..count).map(|i| 2 * i as i64 - (count as i64 - 1)).collect();
    combinations(count, m)
        .into_iter()
        .map(|c| c.into_iter().map(|i| values[i]).collect())
        .collect()
}

#[derive(Clone)]
enum Seed {
    Direct(Vec<C64>),
    Path(Vec<C64>, f64),
    Log(Vec<i64>),
}

/// Solve the gl(2) Bethe equations in the `m`-magnon sector.
pub fn solve(spec: &ChainSpec, m: usize, options: &SolveOptions, exec: Execution) -> Result<SolveReport, BetheError> {
    spec.validate().map_err(|e| BetheError::InvalidInput(e.to_string()))?;
    if 2 * m > spec.l {
        return Err(BetheError::InvalidInput(format!(
            "M = {m} exceeds L/2 = {}; use spin reversal",
            spec.l / 2
        )));
    }
    if options.tol <= 0.0 {
        return Err(BetheError::InvalidInput("tolerance must be positive".into()));
    }
    let target = highest_weight_count(spec.l, m);
    let mut report = SolveReport {
        highest_weight_count: target,
        ..SolveReport::default()
    };
    if m == 0 {
        let mut vac = BetheState::vacuum(spec);
        vac.energy = spec.is_homogeneous().then(|| energy_of_roots(&[], spec));
        report.states.push(vac);
        return Ok(report);
    }

    let a = spec.a_poly();
    let d = spec.d_poly();
    let cl = Cleared::new(&a, &d);
    let decoupled = decoupled_seeds(spec)?;
    let subsets = combinations(decoupled.len(), m);

    let mut seeds: Vec<Seed> = Vec::new();
    let (use_seeds, grid) = match options.strategy {
        Strategy::Seeds => (true, None),
        Strategy::Homotopy { grid } => (false, Some(grid)),
        Strategy::Combined { grid } => (true, Some(grid)),
    };
    if use_seeds && spec.is_homogeneous() {
        seeds.extend(log_form_sets(spec.l, m).into_iter().map(Seed::Log));
    }
    for sub in &subsets {
        let s: Vec<C64> = sub.iter().map(|&i| decoupled[i]).collect();
        if use_seeds {
            seeds.push(Seed::Direct(s.clone()));
        }
        if grid.is_some() {
            for gamma in [0.7, -0.7] {
                seeds.push(Seed::Path(s.clone(), gamma));
            }
        }
    }

    let run = |seed: &Seed| -> Outcome {
        match seed {
            Seed::Direct(s) => {
                let (v, _) = cl.newton(s.clone(), 2.0 * I, options.max_iter);
                classify(v, spec, options.tol, None)
            }
            Seed::Path(s, gamma) => match continue_path(&cl, s.clone(), grid.unwrap_or(40), *gamma, options.max_iter) {
                Some(v) => classify(v, spec, options.tol, None),
                None => Outcome::Excluded(ExclusionKind::PathFailed),
            },
            Seed::Log(qn) => match solve_log_form(spec.l, qn, options.max_iter) {
                Some(x) => {
                    let v: Vec<C64> = x
                        .into_iter()
                        .map(|r| C64::new(r + spec.theta[0].re, spec.theta[0].im))
                        .collect();
                    let (v, _) = cl.newton(v, 2.0 * I, options.max_iter);
                    classify(v, spec, options.tol, Some(qn.clone()))
                }
                None => Outcome::Excluded(ExclusionKind::NotConverged),
            },
        }
    };

    let merge = |report: &mut SolveReport, outcomes: Vec<Outcome>| {
        for o in outcomes {
            match o {
                Outcome::Regular(mut v, norm, qn) => {
                    if report
                        .states
                        .iter()
                        .any(|s| root_set_distance(s.roots(), &v) < options.dedup_tol)
                    {
                        continue;
                    }
                    sort_roots(&mut v);
                    let energy = spec.is_homogeneous().then(|| energy_of_roots(&v, spec));
                    report.states.push(BetheState {
                        l: spec.l,
                        m,
                        levels: vec![v],
                        residual_norm: norm,
                        energy,
                        quantum_numbers: qn,
                    });
                }
                Outcome::Singular(mut v) => {
                    sort_roots(&mut v);
                    if !singular_is_physical(&v, spec) {
                        report.note(ExclusionKind::UnphysicalSingular);
                    } else if !report.singular.iter().any(|s| root_set_distance(s, &v) < 1e-5) {
                        report.singular.push(v);
                    }
                }
                Outcome::Excluded(kind) => report.note(kind),
            }
        }
    };

    let outcomes = exec.map(&seeds, run);
    merge(&mut report, outcomes);

    if use_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let center = spec.theta.iter().sum::<C64>() / spec.l as f64;
        let batch = 32;
        let mut spent = 0;
        let found = |r: &SolveReport| r.states.len() + r.singular.len();
        while spent < options.restarts && found(&report) < target {
            let n = batch.min(options.restarts - spent);
            let draws: Vec<Seed> = (0..n)
                .map(|_| {
                    Seed::Direct(
                        (0..m)
                            .map(|_| center + C64::new(rng.gen_range(-2.5..2.5), rng.gen_range(-1.8..1.8)))
                            .collect(),
                    )
                })
                .collect();
            spent += n;
            let outcomes = exec.map(&draws, run);
            merge(&mut report, outcomes);
        }
    }

    report.states.sort_by(|x, y| {
        let ex = x.energy.map(|e| e.re).unwrap_or(0.0);
        let ey = y.energy.map(|e| e.re).unwrap_or(0.0);
        ex.total_cmp(&ey).then_with(|| {
            let (rx, ry) = (x.roots(), y.roots());
            rx.iter()
                .zip(ry)
                .map(|(a, b)| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(report)
}

fn flatten(levels: &[Vec<C64>]) -> Vec<C64> {
    levels.iter().flatten().copied().collect()
}

fn unflatten(flat: &[C64], counts: &[usize]) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(counts.len());
    let mut at = 0;
    for &c in counts {
        out.push(flat[at..at + c].to_vec());
        at += c;
    }
    out
}

fn nested_norm(levels: &[Vec<C64>], n: usize, spec: &ChainSpec, form: NestedForm) -> f64 {
    residual_nested_with(levels, n, spec, form)
        .map(|r| r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        .unwrap_or(f64::INFINITY)
}

fn nested_newton(
    start: Vec<C64>,
    counts: &[usize],
    n: usize,
    spec: &ChainSpec,
    form: NestedForm,
    max_iter: usize,
) -> Option<(Vec<Vec<C64>>, f64)> {
    let dim = start.len();
    let mut v = start;
    let mut norm = nested_norm(&unflatten(&v, counts), n, spec, form);
    for _ in 0..max_iter {
        if norm < 1e-15 {
            break;
        }
        let f0 = DVector::from_vec(residual_nested_with(&unflatten(&v, counts), n, spec, form).ok()?);
        let mut jac = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = 1e-7 * (1.0 + v[j].norm());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += h;
            vm[j] -= h;
            let fp = residual_nested_with(&unflatten(&vp, counts), n, spec, form).ok()?;
            let fm = residual_nested_with(&unflatten(&vm, counts), n, spec, form).ok()?;
            for i in 0..dim {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let step = lin_solve(&jac, &(-f0))?;
        let mut lam = 1.0;
        loop {
            let next: Vec<C64> = v.iter().zip(step.iter()).map(|(x, s)| x + s * lam).collect();
            let nn = nested_norm(&unflatten(&next, counts), n, spec, form);
            if nn < norm || lam < 1e-4 {
                let moved = step.norm() * lam;
                v = next;
                norm = nn;
                if moved < 1e-15 * (1.0 + v.iter().map(|x| x.norm()).fold(0.0, f64::max)) {
                    return Some((unflatten(&v, counts), norm));
                }
                break;
            }
            lam *= 0.5;
        }
    }
    Some((unflatten(&v, counts), norm))
}

/// Solve the nested gl(N) equations with `counts[t-1]` roots at level `t`.
/// Acceptance is residual-only: there is no independent oracle for N > 2.
pub fn solve_nested(
    spec: &ChainSpec,
    n: usize,
    counts: &[usize],
    form: NestedForm,
    options: &SolveOptions,
    exec: Execution,
) -> Result<SolveReport, BetheError> {
    spec.validate().map_err(|e| BetheError::InvalidInput(e.to_string()))?;
    if n < 2 || counts.len() != n - 1 {
        return Err(BetheError::InvalidInput(format!(
            "need N - 1 = {} level counts, got {}",
            n.saturating_sub(1),
            counts.len()
        )));
    }
    let mut report = SolveReport::default();
    let total: usize = counts.iter().sum();
    if total == 0 {
        report.states.push(BetheState {
            levels: vec![Vec::new(); n - 1],
            ..BetheState::vacuum(spec)
        });
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let center = spec.theta.iter().sum::<C64>() / spec.l as f64;
    let starts: Vec<Vec<C64>> = (0..options.restarts.max(1))
        .map(|_| {
            (0..total)
                .map(|_| center + C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let results = exec.map(&starts, |s| {
        nested_newton(s.clone(), counts, n, spec, form, options.max_iter)
    });
    for r in results {
        let Some((levels, norm)) = r else {
            report.note(ExclusionKind::NotConverged);
            continue;
        };
        let flat = flatten(&levels);
        if !flat
            .iter()
            .all(|x| x.re.is_finite() && x.im.is_finite() && x.norm() < 1e6)
        {
            report.note(ExclusionKind::Divergent);
            continue;
        }
        if norm > options.tol {
            report.note(ExclusionKind::NotConverged);
            continue;
        }
        let duplicate = report.states.iter().any(|s| {
            s.levels
                .iter()
                .zip(&levels)
                .all(|(x, y)| root_set_distance(x, y) < options.dedup_tol)
        });
        if duplicate {
            continue;
        }
        report.states.push(BetheState {
            l: spec.l,
            m: counts[0],
            levels,
            residual_norm: norm,
            energy: None,
            quantum_numbers: None,
        });
    }
    Ok(report)
}
