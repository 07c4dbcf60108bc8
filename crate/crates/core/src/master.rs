//! Master T-operator eigenvalue `T(u, t) = Σ_λ s_λ(t) T_λ(u)`.
//!
//! Only diagrams with at most two rows contribute (three-row `T_λ` vanish
//! for gl(2)), and a two-row eigenvalue is a shifted one-row one,
//! `T_(λ1,λ2)(u) = T_{λ1-λ2}(u + λ2 η)`, so the whole series is driven by
//! the one-row family.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bethe::BetheState;
use crate::exec::Execution;
use crate::fusion::{self, ConventionRecord, FusionError, OneRowEvaluator};
use crate::hirota::{self, HirotaError, SamplerConfig, SweepReport, TauFn};
use crate::poly::{ComplexPolynomial, PolyError};
use crate::spinchain::ChainSpec;
use crate::symfun::{h_from_times, Times};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// One-row eigenvalues up to this `s` come from exact polynomial division;
/// beyond it from pointwise evaluation and interpolation at `L + 1` nodes.
pub const POLY_ROUTE_MAX_S: usize = 10;

/// Number of higher times a master τ reads.
pub const TAU_KMAX: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasterError {
    #[error("truncation insufficient: tail {tail:.3e} at K = {k}")]
    Truncation { k: usize, tail: f64 },
    #[error("leading coefficient {leading:.3e} below threshold (scale {scale:.3e})")]
    Degenerate { leading: f64, scale: f64 },
    #[error("root finding failed: {source}; polynomial {coeffs:?}")]
    Roots {
        #[source]
        source: PolyError,
        coeffs: Vec<C64>,
    },
    #[error("zero residual {residual:.3e} above tolerance; polynomial {coeffs:?}")]
    ZeroResidual { residual: f64, coeffs: Vec<C64> },
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Sum all strata `|λ| <= K`; the tail is reported but never rejected.
    Fixed(usize),
    /// Grow `K` from `k_min` until the last two strata are below `tail_tol`
    /// relative to the total; fail past `k_max`.
    Adaptive { k_min: usize, k_max: usize, tail_tol: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive {
            k_min: 6,
            k_max: 80,
            tail_tol: 1e-14,
        }
    }
}

impl Truncation {
    fn k_max(self) -> usize {
        match self {
            Truncation::Fixed(k) => k,
            Truncation::Adaptive { k_max, .. } => k_max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterValue {
    pub value: C64,
    /// Size of the last summed stratum relative to the total.
    pub tail: f64,
    pub k_used: usize,
}

/// Coefficients of a two-row Schur function from `h`.
fn schur2(l1: usize, l2: usize, h: &[C64]) -> C64 {
    if l2 == 0 {
        h[l1]
    } else {
        h[l1] * h[l2] - h[l1 + 1] * h[l2 - 1]
    }
}

type CacheKey = (u64, u64, u64, u64, Vec<(u64, u64)>);

/// Master T for one eigenstate.
pub struct MasterT {
    pub spec: ChainSpec,
    pub roots: Vec<C64>,
    pub convention: ConventionRecord,
    pub truncation: Truncation,
    one_row: Vec<ComplexPolynomial>,
    singular_t1: Option<ComplexPolynomial>,
    cache: Mutex<HashMap<CacheKey, MasterValue>>,
}

impl Clone for MasterT {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            roots: self.roots.clone(),
            convention: self.convention.clone(),
            truncation: self.truncation,
            one_row: self.one_row.clone(),
            singular_t1: self.singular_t1.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for MasterT {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MasterT")
            .field("spec", &self.spec)
            .field("roots", &self.roots)
            .field("truncation", &self.truncation)
            .finish()
    }
}

const CACHE_LIMIT: usize = 1 << 16;

impl MasterT {
    pub fn new(
        state: &BetheState,
        spec: &ChainSpec,
        convention: &ConventionRecord,
        truncation: Truncation,
    ) -> Result<Self, MasterError> {
        let k_max = truncation.k_max();
        let mut one_row = Vec::with_capacity(k_max + 1);
        for s in 0..=k_max {
            let p = if s <= POLY_ROUTE_MAX_S {
                fusion::ts_normalized(s, state, spec, convention)?
            } else {
                fusion::ts_interpolated(s, state, spec, convention)?
            };
            one_row.push(p);
        }
        Ok(Self {
            spec: spec.clone(),
            roots: state.roots().to_vec(),
            convention: convention.clone(),
            truncation,
            one_row,
            singular_t1: fusion::singular_t1(state, spec, convention)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_truncation(&self, truncation: Truncation) -> Result<Self, MasterError> {
        let state = BetheState {
            l: self.spec.l,
            m: self.roots.len(),
            levels: vec![self.roots.clone()],
            residual_norm: 0.0,
            energy: None,
            quantum_numbers: None,
        };
        Self::new(&state, &self.spec, &self.convention, truncation)
    }

    /// One-row eigenvalue `T_s` as a polynomial.
    pub fn one_row(&self, s: usize) -> &ComplexPolynomial {
        &self.one_row[s]
    }

    fn sum_strata<F>(&self, t: &Times, mut stratum: F) -> Result<(usize, f64), MasterError>
    where
        F: FnMut(usize, &[C64]) -> f64,
    {
        // `stratum(n, h)` adds the |λ| = n terms and returns (|stratum|/|total|)
        let k_max = self.truncation.k_max();
        let h = h_from_times(t, k_max + 2);
        let mut prev_tail = f64::INFINITY;
        for n in 0..=k_max {
            let tail = stratum(n, &h);
            match self.truncation {
                Truncation::Fixed(k) => {
                    if n == k {
                        return Ok((n, tail));
                    }
                }
                Truncation::Adaptive { k_min, tail_tol, .. } => {
                    if n >= k_min && tail.max(prev_tail) <= tail_tol {
                        return Ok((n, tail));
                    }
                }
            }
            prev_tail = tail;
        }
        Err(MasterError::Truncation {
            k: k_max,
            tail: prev_tail,
        })
    }

    fn eval_uncached(&self, u: C64, t: &Times) -> Result<MasterValue, MasterError> {
        let k_max = self.truncation.k_max();
        let evaluator = OneRowEvaluator::for_state(
            &self.roots,
            self.singular_t1.as_ref(),
            &self.spec,
            self.convention.eta,
            u,
            k_max,
        );
        let mut total = ZERO;
        let (k_used, tail) = self.sum_strata(t, |n, h| {
            let mut part = ZERO;
            for l2 in 0..=n / 2 {
                let l1 = n - l2;
                part += schur2(l1, l2, h) * evaluator.eval(l1 - l2, l2);
            }
            total += part;
            part.norm() / total.norm().max(f64::MIN_POSITIVE)
        })?;
        Ok(MasterValue {
            value: total,
            tail,
            k_used,
        })
    }

    /// `T(u, t)`; `t.t0` is ignored here (see [`MasterTau`]). Cached; cached
    /// and fresh values are bit-identical.
    pub fn eval(&self, u: C64, t: &Times) -> Result<MasterValue, MasterError> {
        let key: CacheKey = (
            u.re.to_bits(),
            u.im.to_bits(),
            t.t0.re.to_bits(),
            t.t0.im.to_bits(),
            t.higher_bits(),
        );
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.eval_uncached(u, t)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, v);
        Ok(v)
    }

    /// Uncached evaluation, for comparison with [`Self::eval`].
    pub fn eval_fresh(&self, u: C64, t: &Times) -> Result<MasterValue, MasterError> {
        self.eval_uncached(u, t)
    }

    /// Coefficients of `T(u, t)` in `u` at fixed `t`, with the tail of the
    /// truncation.
    pub fn polynomial_with_tail(&self, t: &Times) -> Result<(ComplexPolynomial, f64, usize), MasterError> {
        let eta = self.convention.eta;
        let mut total = ComplexPolynomial::zero();
        let (k_used, tail) = self.sum_strata(t, |n, h| {
            let mut part = ComplexPolynomial::zero();
            for l2 in 0..=n / 2 {
                let l1 = n - l2;
                let p = self.one_row[l1 - l2].shifted(eta * l2 as f64);
                part = &part + &p.scaled(schur2(l1, l2, h));
            }
            total = &total + &part;
            part.scale() / total.scale().max(f64::MIN_POSITIVE)
        })?;
        Ok((total, tail, k_used))
    }

    /// Degree-`L` polynomial of `T(u, t)`; fails when the leading
    /// coefficient degenerates.
    pub fn polynomial(&self, t: &Times) -> Result<ComplexPolynomial, MasterError> {
        let (p, _, _) = self.polynomial_with_tail(t)?;
        let scale = p.scale();
        let leading = p.coeff(self.spec.l).norm();
        if leading < 1e-10 * scale {
            return Err(MasterError::Degenerate { leading, scale });
        }
        Ok(ComplexPolynomial::new(p.coeffs()[..=self.spec.l].to_vec()))
    }

    /// `∂T/∂t_k` coefficientwise, using `∂h_n/∂t_k = h_{n-k}`.
    pub fn polynomial_dt(&self, t: &Times, k: usize) -> Result<ComplexPolynomial, MasterError> {
        assert!(k >= 1);
        let eta = self.convention.eta;
        let k_max = self.truncation.k_max();
        let h = h_from_times(t, k_max + 2);
        let dh: Vec<C64> = (0..h.len()).map(|n| if n >= k { h[n - k] } else { ZERO }).collect();
        let mut total = ComplexPolynomial::zero();
        for n in 0..=k_max {
            for l2 in 0..=n / 2 {
                let l1 = n - l2;
                let ds = if l2 == 0 {
                    dh[l1]
                } else {
                    dh[l1] * h[l2] + h[l1] * dh[l2] - dh[l1 + 1] * h[l2 - 1] - h[l1 + 1] * dh[l2 - 1]
                };
                if ds != ZERO {
                    total = &total + &self.one_row[l1 - l2].shifted(eta * l2 as f64).scaled(ds);
                }
            }
        }
        Ok(total)
    }

    /// The `L` zeros of `T(u, t)`, warm-started from `warm` or from the
    /// inhomogeneities.
    pub fn zeros(&self, t: &Times, warm: Option<&[C64]>) -> Result<Vec<C64>, MasterError> {
        let p = self.polynomial(t)?;
        let start: Vec<C64> = warm.map(|w| w.to_vec()).unwrap_or_else(|| self.spec.theta.clone());
        let roots = p.roots(Some(&start)).map_err(|source| MasterError::Roots {
            source,
            coeffs: p.coeffs().to_vec(),
        })?;
        let scale = p.scale();
        let residual = roots.iter().map(|&r| p.eval(r).norm()).fold(0.0, f64::max);
        let tol = 1e-9 * scale * (1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max)).powi(self.spec.l as i32);
        if residual > tol {
            return Err(MasterError::ZeroResidual {
                residual,
                coeffs: p.coeffs().to_vec(),
            });
        }
        Ok(roots)
    }

    /// Hirota sweep of this eigenvalue viewed as a τ-function.
    pub fn hirota_check(
        &self,
        config: &SamplerConfig,
        u_base: C64,
        exec: Execution,
    ) -> Result<SweepReport, HirotaError> {
        let tau = MasterTau {
            master: self,
            u_base,
            delta: self.convention.t0_step,
        };
        let config = SamplerConfig {
            step: C64::new(1.0, 0.0),
            ..config.clone()
        };
        hirota::sweep_check(&tau, &config, exec)
    }
}

/// `τ(t) = T(u_base + δ t_0, {t_k})`: one unit of `t_0` moves the spectral
/// parameter by `δ`.
pub struct MasterTau<'a> {
    pub master: &'a MasterT,
    pub u_base: C64,
    pub delta: C64,
}

impl TauFn for MasterTau<'_> {
    fn eval(&self, t: &Times) -> Result<C64, HirotaError> {
        let u = self.u_base + self.delta * t.t0;
        let mut inner = t.clone();
        inner.t0 = ZERO;
        self.master
            .eval(u, &inner)
            .map(|v| v.value)
            .map_err(|e| HirotaError::Evaluation(e.to_string()))
    }

    fn kmax(&self) -> usize {
        TAU_KMAX
    }
}

/// Hirota residual per candidate `t_0` step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaCalibration {
    pub chosen: C64,
    /// `(candidate, worst normalized residual over all states)`.
    pub table: Vec<(C64, f64)>,
}

/// Pick the `t_0` step minimizing the worst Hirota residual over `masters`.
pub fn calibrate_delta(
    masters: &[MasterT],
    candidates: &[C64],
    config: &SamplerConfig,
    u_base: C64,
    exec: Execution,
) -> Result<DeltaCalibration, HirotaError> {
    let mut table = Vec::with_capacity(candidates.len());
    for &delta in candidates {
        let mut worst: f64 = 0.0;
        for m in masters {
            let tau = MasterTau {
                master: m,
                u_base,
                delta,
            };
            let cfg = SamplerConfig {
                step: C64::new(1.0, 0.0),
                ..config.clone()
            };
            worst = worst.max(hirota::sweep_check(&tau, &cfg, exec)?.normalized);
        }
        table.push((delta, worst));
    }
    let chosen = table
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|x| x.0)
        .unwrap_or(C64::new(0.0, 2.0));
    Ok(DeltaCalibration { chosen, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{self, SolveOptions};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn states(spec: &ChainSpec) -> Vec<BetheState> {
        let mut out = vec![BetheState::vacuum(spec)];
        for m in 1..=spec.l / 2 {
            out.extend(
                bethe::solve(spec, m, &SolveOptions::default(), Execution::Sequential)
                    .unwrap()
                    .states,
            );
        }
        out
    }

    fn small_t() -> Times {
        Times::zero(4)
            .with(1, c(0.03, -0.01))
            .with(2, c(-0.02, 0.01))
            .with(3, c(0.01, 0.02))
            .with(4, c(0.0, -0.03))
    }

    #[test]
    fn zero_times_give_phi() {
        let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0)]);
        for s in states(&spec) {
            let m = MasterT::new(&s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
            let u = c(0.2, 0.4);
            let v = m.eval(u, &Times::zero(4)).unwrap();
            assert!((v.value - spec.phi().eval(u)).norm() < 1e-12);
            let z = m.zeros(&Times::zero(4), None).unwrap();
            for (a, b) in z.iter().zip(&spec.theta) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn first_order_is_t1() {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let s = &states(&spec)[1];
        let m = MasterT::new(s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
        let u = c(0.3, -0.2);
        let h = 1e-6;
        let plus = m.eval(u, &Times::zero(1).with(1, c(h, 0.0))).unwrap().value;
        let minus = m.eval(u, &Times::zero(1).with(1, c(-h, 0.0))).unwrap().value;
        let d = (plus - minus) / (2.0 * h);
        assert!((d - m.one_row(1).eval(u)).norm() < 1e-6 * d.norm());
        let k0 = m.with_truncation(Truncation::Fixed(0)).unwrap();
        assert!((k0.eval(u, &small_t()).unwrap().value - spec.phi().eval(u)).norm() < 1e-14);
    }

    #[test]
    fn polynomial_matches_pointwise_and_has_degree_l() {
        let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0), c(0.2, 0.0)]);
        let t = small_t();
        for s in states(&spec) {
            let m = MasterT::new(&s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
            let p = m.polynomial(&t).unwrap();
            assert_eq!(p.degree(), Some(4));
            let u = c(-0.4, 0.3);
            let v = m.eval(u, &t).unwrap().value;
            assert!((p.eval(u) - v).norm() < 1e-10 * v.norm());
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let s = &states(&spec)[1];
        let m = MasterT::new(s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
        let t = small_t();
        for k in 1..=3 {
            let d = m.polynomial_dt(&t, k).unwrap();
            let h = 1e-5;
            let tp = t.clone().with(k, t.get(k) + h);
            let tm = t.clone().with(k, t.get(k) - h);
            let fd = (&m.polynomial(&tp).unwrap() - &m.polynomial(&tm).unwrap()).scaled(c(0.5 / h, 0.0));
            assert!((&fd - &d).scale() < 1e-6 * d.scale(), "k = {k}");
        }
    }

    #[test]
    fn cache_is_bit_identical() {
        let spec = ChainSpec::homogeneous(4, 1.0);
        let s = &states(&spec)[2];
        let m = MasterT::new(s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
        let t = small_t();
        let u = c(0.1, 0.2);
        let first = m.eval(u, &t).unwrap();
        let second = m.eval(u, &t).unwrap();
        let fresh = m.eval_fresh(u, &t).unwrap();
        assert_eq!(first.value.re.to_bits(), second.value.re.to_bits());
        assert_eq!(first.value.im.to_bits(), fresh.value.im.to_bits());
        assert_eq!(first, fresh);
    }

    #[test]
    fn hirota_holds_for_small_chain() {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let cfg = SamplerConfig {
            n_samples: 40,
            ..SamplerConfig::default()
        };
        for s in states(&spec) {
            let m = MasterT::new(&s, &spec, &ConventionRecord::default(), Truncation::default()).unwrap();
            let r = m.hirota_check(&cfg, ZERO, Execution::Parallel).unwrap();
            assert!(r.normalized < 1e-9, "{}", r.normalized);
        }
    }

    #[test]
    fn residual_shrinks_with_order() {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let s = &states(&spec)[1];
        let cfg = SamplerConfig {
            n_samples: 40,
            ..SamplerConfig::default()
        };
        let mut last = f64::INFINITY;
        for k in [6, 12, 18, 24, 32] {
            let m = MasterT::new(s, &spec, &ConventionRecord::default(), Truncation::Fixed(k)).unwrap();
            let r = m.hirota_check(&cfg, ZERO, Execution::Sequential).unwrap().normalized;
            assert!(r < last, "K = {k}: {r} vs {last}");
            last = r;
        }
        assert!(last < 1e-9);
        // the empty diagram alone solves the bilinear equation identically
        let m = MasterT::new(s, &spec, &ConventionRecord::default(), Truncation::Fixed(0)).unwrap();
        assert!(m.hirota_check(&cfg, ZERO, Execution::Sequential).unwrap().normalized < 1e-14);
    }
}
