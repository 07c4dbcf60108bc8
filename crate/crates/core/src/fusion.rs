//! Fused transfer-matrix eigenvalues `T_s(u)` from Bethe roots and the
//! Jacobi–Trudi assembly of `T_λ(u)`.
//!
//! Two coordinate systems appear. The chain coordinate `u` is the one of the
//! transfer matrix `T(u)` and of [`ts_raw`]. The normalized eigenvalues live
//! in a shifted coordinate where, with `η = 2i` and `q(u) = Q(u + i)`,
//!
//! ```text
//! T_s(u) = q(u - η) q(u + sη) Σ_{k=0..s} φ(u + kη) / (q(u + (k-1)η) q(u + kη)),
//! ```
//!
//! so that `T_0 = φ` and every `T_s` has degree `L` with leading
//! coefficient `s + 1`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bethe::BetheState;
use crate::linalg::poly_det;
use crate::poly::{ComplexPolynomial, PolyError};
use crate::spinchain::ChainSpec;
use crate::symfun::{partitions_up_to, Partition};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Tolerance for the exact polynomial divisions of the construction.
pub const DIVISION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("convention calibration failed at {what}: {source}")]
    Calibration {
        what: String,
        #[source]
        source: PolyError,
    },
    #[error("no candidate convention passes: {0}")]
    NoConvention(String),
}

/// How the fused sums are normalized. Replaying a record must reproduce the
/// calibration targets (see [`ConventionRecord::replay`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionRecord {
    /// Argument shift per Jacobi–Trudi column: column `j` (0-based) is
    /// evaluated at `u + j * jt_shift`.
    pub jt_shift: C64,
    /// `ts_normalized(s)(u) = ts_raw(s)(u + s * box_offset) / scalar_s(u + s * box_offset)`.
    pub box_offset: C64,
    /// Human-readable form of the scalar factors.
    pub norm_factors: String,
    /// Shift of the spectral parameter per unit of `t_0` in the master
    /// T-operator.
    pub t0_step: C64,
    /// Spacing of the shifted arguments in normalized coordinates.
    pub eta: C64,
}

impl Default for ConventionRecord {
    fn default() -> Self {
        Self {
            jt_shift: -2.0 * I,
            box_offset: I,
            norm_factors: "scalar_s(u) = prod_{m=1}^{s-1} phi(u + (s - 2m) i); \
                           T_lambda divided by prod_{k=1}^{rows-1} phi(u + k jt_shift)"
                .to_string(),
            t0_step: 2.0 * I,
            eta: 2.0 * I,
        }
    }
}

/// Normalization scalar of the `s`-fused sum (chain coordinates).
pub fn scalar(s: usize, spec: &ChainSpec) -> ComplexPolynomial {
    let phi = spec.phi();
    let mut acc = ComplexPolynomial::one();
    for m in 1..s {
        let shift = C64::new(0.0, s as f64 - 2.0 * m as f64);
        acc = &acc * &phi.shifted(shift);
    }
    acc
}

/// Typical root magnitude of the fused numerators.
fn root_radius(s: usize, spec: &ChainSpec) -> f64 {
    1.0 + s as f64 + spec.theta.iter().map(|t| t.norm()).fold(0.0, f64::max)
}

/// The `(s+1)`-term analytic Bethe ansatz sum in chain coordinates, as a
/// polynomial. `s = 0` returns `φ`, the scalar that normalizes the empty
/// diagram. Fails when the Q-denominators do not cancel.
pub fn ts_raw(s: usize, state: &BetheState, spec: &ChainSpec) -> Result<ComplexPolynomial, FusionError> {
    if s == 0 {
        return Ok(spec.phi());
    }
    let q = state.q();
    let a = spec.a_poly();
    let d = spec.d_poly();
    let at = |c: f64| C64::new(0.0, c);
    // D_j = Q(u + (s + 1 - 2j) i), j = 0..=s+1
    let dj: Vec<ComplexPolynomial> = (0..=s + 1)
        .map(|j| q.shifted(at(s as f64 + 1.0 - 2.0 * j as f64)))
        .collect();
    // x_m = u + (s + 1 - 2m) i, m = 1..=s
    let a_at: Vec<ComplexPolynomial> = (1..=s)
        .map(|m| a.shifted(at(s as f64 + 1.0 - 2.0 * m as f64)))
        .collect();
    let d_at: Vec<ComplexPolynomial> = (1..=s)
        .map(|m| d.shifted(at(s as f64 + 1.0 - 2.0 * m as f64)))
        .collect();
    let mut numerator = ComplexPolynomial::zero();
    for k in 0..=s {
        let mut term = ComplexPolynomial::one();
        for m in 0..s {
            term = &term * if m < k { &d_at[m] } else { &a_at[m] };
        }
        for (j, dpoly) in dj.iter().enumerate() {
            if j != k && j != k + 1 {
                term = &term * dpoly;
            }
        }
        numerator = &numerator + &term;
    }
    let mut denominator = ComplexPolynomial::one();
    for dpoly in &dj[1..=s] {
        denominator = &denominator * dpoly;
    }
    numerator
        .exact_div_scaled(&denominator, root_radius(s, spec), DIVISION_TOL)
        .map_err(|source| FusionError::Calibration {
            what: format!("pole cancellation in T_{s}"),
            source,
        })
}

/// `T_s` in normalized coordinates, degree `L`.
pub fn ts_normalized(
    s: usize,
    state: &BetheState,
    spec: &ChainSpec,
    conv: &ConventionRecord,
) -> Result<ComplexPolynomial, FusionError> {
    if s == 0 {
        return Ok(spec.phi());
    }
    if s >= 2 && is_singular(state.roots(), conv.eta) {
        return ts_from_tsystem(s, &ts_normalized(1, state, spec, conv)?, spec, conv.eta);
    }
    let raw = ts_raw(s, state, spec)?;
    let shift = conv.box_offset * s as f64;
    raw.shifted(shift)
        .exact_div_scaled(&scalar(s, spec).shifted(shift), root_radius(s, spec), DIVISION_TOL)
        .map_err(|source| FusionError::Calibration {
            what: format!("scalar division in T_{s}"),
            source,
        })
}

/// Whether two roots sit exactly `η` apart, so that `q(u)` and `q(u + η)`
/// share a zero and the sum formula for `T_s` is indeterminate. Only `T_1`
/// survives the TQ division for such states; higher `T_s` then follow from
/// the T-system.
pub fn is_singular(roots: &[C64], eta: C64) -> bool {
    roots.iter().any(|a| roots.iter().any(|b| (a - b - eta).norm() < 1e-6))
}

/// `T_s` from `T_0 = φ` and `T_1` by the T-system recursion
/// `T_{n+1}(u) = (T_n(u+η) T_n(u) - φ(u) φ(u+(n+1)η)) / T_{n-1}(u+η)`.
pub fn ts_from_tsystem(
    s: usize,
    t1: &ComplexPolynomial,
    spec: &ChainSpec,
    eta: C64,
) -> Result<ComplexPolynomial, FusionError> {
    let phi = spec.phi();
    let mut prev = phi.clone();
    let mut cur = t1.clone();
    for n in 1..s {
        let num = &(&cur.shifted(eta) * &cur) - &(&phi * &phi.shifted(eta * (n + 1) as f64));
        let next = num
            .exact_div_scaled(&prev.shifted(eta), root_radius(n + 1, spec), DIVISION_TOL)
            .map_err(|source| FusionError::Calibration {
                what: format!("T-system recursion for T_{}", n + 1),
                source,
            })?;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Pointwise evaluation of every `T_s(u + l η)` from one table of shifted
/// `φ` and `q` values. Stable for large `s`, where the polynomial route of
/// [`ts_raw`] overflows.
#[derive(Clone, Debug)]
pub struct OneRowEvaluator {
    n_max: usize,
    table: Table,
}

#[derive(Clone, Debug)]
enum Table {
    /// `q(u + kη)` for `k = -1..=n_max` at index `k + 1`, and prefix sums
    /// `P_n = Σ_{k<=n} φ(u+kη)/(q(u+(k-1)η) q(u+kη))` at index `n + 1`.
    Prefix { q: Vec<C64>, prefix: Vec<C64> },
    /// `T_s(u + lη)` filled by the T-system, row-major in `s`.
    Triangle(Vec<Vec<C64>>),
}

impl OneRowEvaluator {
    /// Supports `T_s(u + l η)` with `s + l <= n_max`.
    pub fn new(roots: &[C64], spec: &ChainSpec, eta: C64, u: C64, n_max: usize) -> Self {
        let qpoly = ComplexPolynomial::from_roots(roots).shifted(I);
        let phi = spec.phi();
        let q: Vec<C64> = (-1..=n_max as i64).map(|k| qpoly.eval(u + eta * k as f64)).collect();
        let mut prefix = Vec::with_capacity(n_max + 2);
        prefix.push(C64::new(0.0, 0.0));
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=n_max {
            acc += phi.eval(u + eta * k as f64) / (q[k] * q[k + 1]);
            prefix.push(acc);
        }
        Self {
            n_max,
            table: Table::Prefix { q, prefix },
        }
    }

    /// Same table from `T_1` alone, through the T-system; used for states
    /// where [`is_singular`] holds.
    pub fn from_t1(t1: &ComplexPolynomial, spec: &ChainSpec, eta: C64, u: C64, n_max: usize) -> Self {
        let phi = spec.phi();
        let ph: Vec<C64> = (0..=n_max + 1).map(|l| phi.eval(u + eta * l as f64)).collect();
        let mut rows: Vec<Vec<C64>> = vec![ph[..=n_max].to_vec()];
        if n_max >= 1 {
            rows.push((0..n_max).map(|l| t1.eval(u + eta * l as f64)).collect());
        }
        for s in 1..n_max {
            // T_{s+1}(u + lη) for l + s + 1 <= n_max
            let next: Vec<C64> = (0..n_max - s)
                .map(|l| (rows[s][l + 1] * rows[s][l] - ph[l] * ph[l + s + 1]) / rows[s - 1][l + 1])
                .collect();
            rows.push(next);
        }
        Self {
            n_max,
            table: Table::Triangle(rows),
        }
    }

    /// [`Self::new`] or [`Self::from_t1`], whichever the state needs.
    pub fn for_state(
        roots: &[C64],
        singular_t1: Option<&ComplexPolynomial>,
        spec: &ChainSpec,
        eta: C64,
        u: C64,
        n_max: usize,
    ) -> Self {
        match singular_t1 {
            Some(t1) => Self::from_t1(t1, spec, eta, u, n_max),
            None => Self::new(roots, spec, eta, u, n_max),
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `T_s(u + l η)`.
    pub fn eval(&self, s: usize, l: usize) -> C64 {
        match &self.table {
            Table::Prefix { q, prefix } => {
                let top = s + l;
                q[l] * q[top + 1] * (prefix[top + 1] - prefix[l])
            }
            Table::Triangle(rows) => rows[s][l],
        }
    }
}

/// `T_1` when the state needs the T-system route, `None` otherwise.
pub fn singular_t1(
    state: &BetheState,
    spec: &ChainSpec,
    conv: &ConventionRecord,
) -> Result<Option<ComplexPolynomial>, FusionError> {
    if is_singular(state.roots(), conv.eta) {
        ts_normalized(1, state, spec, conv).map(Some)
    } else {
        Ok(None)
    }
}

/// `T_s` by interpolation of pointwise values at `L + 1` nodes.
pub fn ts_interpolated(
    s: usize,
    state: &BetheState,
    spec: &ChainSpec,
    conv: &ConventionRecord,
) -> Result<ComplexPolynomial, FusionError> {
    let t1 = singular_t1(state, spec, conv)?;
    let nodes = interpolation_nodes(spec, s);
    let values: Vec<C64> = nodes
        .iter()
        .map(|&u| OneRowEvaluator::for_state(state.roots(), t1.as_ref(), spec, conv.eta, u, s).eval(s, 0))
        .collect();
    Ok(ComplexPolynomial::interpolate(&nodes, &values).expect("distinct nodes"))
}

fn interpolation_nodes(spec: &ChainSpec, s: usize) -> Vec<C64> {
    // centred on the span of the shifted arguments, radius growing with s
    let centre = spec.theta.iter().sum::<C64>() / spec.l as f64 + C64::new(0.0, s as f64);
    let radius = 1.0 + s as f64;
    (0..=spec.l)
        .map(|k| centre + C64::from_polar(radius, std::f64::consts::TAU * (k as f64 + 0.3) / (spec.l + 1) as f64))
        .collect()
}

/// Quantum Jacobi–Trudi determinant
/// `det T_{λ_i - i + j}(u + j jt_shift) / prod_{k=1}^{rows-1} φ(u + k jt_shift)`
/// with `T_{s<0} = 0`, from a lookup of one-row polynomials.
pub fn jacobi_trudi<F>(
    lambda: &Partition,
    spec: &ChainSpec,
    conv: &ConventionRecord,
    mut one_row: F,
) -> Result<ComplexPolynomial, FusionError>
where
    F: FnMut(usize) -> Result<ComplexPolynomial, FusionError>,
{
    let rows = lambda.rows();
    if rows == 0 {
        return Ok(spec.phi());
    }
    let mut entries = vec![vec![ComplexPolynomial::zero(); rows]; rows];
    let mut bound = 1.0;
    for (i, row) in entries.iter_mut().enumerate() {
        let mut row_max: f64 = 0.0;
        for (j, cell) in row.iter_mut().enumerate() {
            let idx = lambda.part(i) as i64 - i as i64 + j as i64;
            if idx >= 0 {
                *cell = one_row(idx as usize)?.shifted(conv.jt_shift * j as f64);
                row_max = row_max.max(cell.scale());
            }
        }
        bound *= row_max * rows as f64;
    }
    let det = poly_det(&entries);
    let mut divisor = ComplexPolynomial::one();
    for k in 1..rows {
        divisor = &divisor * &spec.phi().shifted(conv.jt_shift * k as f64);
    }
    let (quot, rem) = det.div_rem(&divisor).map_err(|source| FusionError::Calibration {
        what: format!("Jacobi-Trudi division for {lambda}"),
        source,
    })?;
    // judge the remainder against the size of the determinant's terms, so
    // that vanishing diagrams do not fail on rounding noise
    if rem.scale() > DIVISION_TOL * bound {
        return Err(FusionError::Calibration {
            what: format!("Jacobi-Trudi division for {lambda}"),
            source: PolyError::InexactDivision {
                remainder: rem.scale(),
                tolerance: DIVISION_TOL,
                scale: bound,
            },
        });
    }
    Ok(quot)
}

/// `T_λ(u)` for one eigenstate.
pub fn t_lambda(
    lambda: &Partition,
    state: &BetheState,
    spec: &ChainSpec,
    conv: &ConventionRecord,
) -> Result<ComplexPolynomial, FusionError> {
    jacobi_trudi(lambda, spec, conv, |s| ts_normalized(s, state, spec, conv))
}

/// Left-hand side of the T-system,
/// `T_s(u) T_s(u - η) - T_{s+1}(u - η) T_{s-1}(u)`; equals
/// `φ(u - η) φ(u + sη)` for every eigenstate.
pub fn tsystem_lhs(
    s: usize,
    state: &BetheState,
    spec: &ChainSpec,
    conv: &ConventionRecord,
) -> Result<ComplexPolynomial, FusionError> {
    if s == 0 {
        return Err(FusionError::NoConvention("T-system needs s >= 1".into()));
    }
    let ts = ts_normalized(s, state, spec, conv)?;
    let up = ts_normalized(s + 1, state, spec, conv)?;
    let down = ts_normalized(s - 1, state, spec, conv)?;
    Ok(&(&ts * &ts.shifted(-conv.eta)) - &(&up.shifted(-conv.eta) * &down))
}

/// Per-eigenstate table of `T_λ` for diagrams with at most two rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTable {
    pub spec: ChainSpec,
    pub convention: ConventionRecord,
    pub entries: Vec<(Partition, ComplexPolynomial)>,
}

impl TTable {
    /// Diagrams with `|λ| <= max_weight` and at most two rows.
    pub fn build(
        state: &BetheState,
        spec: &ChainSpec,
        conv: &ConventionRecord,
        max_weight: usize,
    ) -> Result<Self, FusionError> {
        let mut one_row = Vec::with_capacity(max_weight + 1);
        for s in 0..=max_weight {
            one_row.push(ts_normalized(s, state, spec, conv)?);
        }
        let entries = partitions_up_to(max_weight, 2)
            .into_iter()
            .map(|lambda| {
                let p = jacobi_trudi(&lambda, spec, conv, |s| Ok(one_row[s].clone()))?;
                Ok((lambda, p))
            })
            .collect::<Result<Vec<_>, FusionError>>()?;
        Ok(Self {
            spec: spec.clone(),
            convention: conv.clone(),
            entries,
        })
    }

    /// Stored polynomial; diagrams with three or more rows are zero.
    pub fn get(&self, lambda: &Partition) -> Option<ComplexPolynomial> {
        if lambda.rows() > 2 {
            return Some(ComplexPolynomial::zero());
        }
        self.entries.iter().find(|(l, _)| l == lambda).map(|(_, p)| p.clone())
    }
}

/// Outcome of replaying a convention against a set of eigenstates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub empty_is_phi: bool,
    /// Largest `‖T_λ‖ / scale` over diagrams with three or more rows.
    pub worst_three_row: f64,
    /// Largest relative spread of the T-system right-hand side across states.
    pub tsystem_spread: f64,
    pub degrees_ok: bool,
}

impl CalibrationReport {
    pub fn passes(&self) -> bool {
        self.empty_is_phi && self.worst_three_row <= 1e-8 && self.tsystem_spread <= 1e-8 && self.degrees_ok
    }
}

impl ConventionRecord {
    /// Check the fusion-side calibration targets on `states`, for diagrams
    /// up to weight `max_weight`.
    pub fn replay(
        &self,
        states: &[BetheState],
        spec: &ChainSpec,
        max_weight: usize,
    ) -> Result<CalibrationReport, FusionError> {
        let phi = spec.phi();
        let mut report = CalibrationReport {
            empty_is_phi: true,
            worst_three_row: 0.0,
            tsystem_spread: 0.0,
            degrees_ok: true,
        };
        let mut reference: Vec<Option<ComplexPolynomial>> = vec![None; max_weight];
        for state in states {
            let one_row: Vec<ComplexPolynomial> = (0..=max_weight + 1)
                .map(|s| ts_normalized(s, state, spec, self))
                .collect::<Result<_, _>>()?;
            let scale = one_row.iter().map(|p| p.scale()).fold(0.0, f64::max);
            let empty = jacobi_trudi(&Partition::empty(), spec, self, |s| Ok(one_row[s].clone()))?;
            report.empty_is_phi &= (&empty - &phi).scale() == 0.0;
            for lambda in partitions_up_to(max_weight, max_weight) {
                let p = jacobi_trudi(&lambda, spec, self, |s| Ok(one_row[s].clone()))?;
                if lambda.rows() >= 3 {
                    report.worst_three_row = report.worst_three_row.max(p.scale() / scale);
                } else {
                    report.degrees_ok &= p.effective_degree(1e-10 * p.scale()) == Some(spec.l);
                }
            }
            for s in 1..=max_weight {
                let lhs = &(&one_row[s] * &one_row[s].shifted(-self.eta))
                    - &(&one_row[s + 1].shifted(-self.eta) * &one_row[s - 1]);
                match &reference[s - 1] {
                    None => reference[s - 1] = Some(lhs),
                    Some(r) => {
                        let spread = (&lhs - r).scale() / r.scale().max(f64::MIN_POSITIVE);
                        report.tsystem_spread = report.tsystem_spread.max(spread);
                    }
                }
            }
        }
        Ok(report)
    }

    /// Choose the Jacobi–Trudi column shift among `candidates` by exact
    /// division and three-row vanishing on `states`. Other fields keep their
    /// values from `self`.
    pub fn calibrate_jt_shift(
        &self,
        candidates: &[C64],
        states: &[BetheState],
        spec: &ChainSpec,
        max_weight: usize,
    ) -> Result<ConventionRecord, FusionError> {
        let mut notes = Vec::new();
        for &shift in candidates {
            let trial = ConventionRecord {
                jt_shift: shift,
                ..self.clone()
            };
            match trial.replay(states, spec, max_weight) {
                Ok(r) if r.passes() => return Ok(trial),
                Ok(r) => notes.push(format!("{shift}: three-row {:.1e}", r.worst_three_row)),
                Err(e) => notes.push(format!("{shift}: {e}")),
            }
        }
        Err(FusionError::NoConvention(notes.join("; ")))
    }
}

/// Leading coefficient expected for `T_s`: the dimension `s + 1` of the
/// auxiliary space.
pub fn expected_leading(s: usize) -> C64 {
    ONE * (s as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{self, SolveOptions};
    use crate::exec::Execution;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn singlet() -> (ChainSpec, BetheState) {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let rep = bethe::solve(&spec, 1, &SolveOptions::default(), Execution::Sequential).unwrap();
        (spec, rep.states[0].clone())
    }

    #[test]
    fn one_row_vacuum_and_singlet() {
        let spec = ChainSpec::homogeneous(3, 1.0);
        let vac = BetheState::vacuum(&spec);
        let t1 = ts_raw(1, &vac, &spec).unwrap();
        assert!((&t1 - &(&spec.a_poly() + &spec.d_poly())).scale() < 1e-12);
        assert_eq!(ts_raw(0, &vac, &spec).unwrap(), spec.phi());

        let (spec2, s) = singlet();
        let t1 = ts_raw(1, &s, &spec2).unwrap();
        let want = ComplexPolynomial::new(vec![c(6.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert!((&t1 - &want).scale() < 1e-9);
    }

    #[test]
    fn vacuum_sums_of_shifted_phi() {
        let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.1)]);
        let vac = BetheState::vacuum(&spec);
        let conv = ConventionRecord::default();
        for s in 0..6 {
            let t = ts_normalized(s, &vac, &spec, &conv).unwrap();
            let mut want = ComplexPolynomial::zero();
            for m in 0..=s {
                want = &want + &spec.phi().shifted(conv.eta * m as f64);
            }
            assert!((&t - &want).scale() < 1e-9 * want.scale());
            assert_eq!(t.degree(), Some(2));
            assert!((t.leading() - expected_leading(s)).norm() < 1e-12);
        }
    }

    #[test]
    fn pointwise_route_agrees() {
        let (spec, s) = singlet();
        let conv = ConventionRecord::default();
        for n in 0..7 {
            let poly = ts_normalized(n, &s, &spec, &conv).unwrap();
            let interp = ts_interpolated(n, &s, &spec, &conv).unwrap();
            assert!((&poly - &interp).scale() < 1e-9 * poly.scale(), "s = {n}");
        }
    }

    #[test]
    fn wrong_roots_do_not_cancel() {
        let spec = ChainSpec::homogeneous(2, 1.0);
        let fake = BetheState {
            l: 2,
            m: 1,
            levels: vec![vec![c(0.3, 0.0)]],
            residual_norm: 1.0,
            energy: None,
            quantum_numbers: None,
        };
        assert!(matches!(ts_raw(2, &fake, &spec), Err(FusionError::Calibration { .. })));
    }

    #[test]
    fn jacobi_trudi_examples() {
        let (spec, s) = singlet();
        let conv = ConventionRecord::default();
        let one = t_lambda(&Partition::row(3), &s, &spec, &conv).unwrap();
        assert_eq!(one, ts_normalized(3, &s, &spec, &conv).unwrap());
        let three = t_lambda(&Partition::new(vec![1, 1, 1]).unwrap(), &s, &spec, &conv).unwrap();
        assert!(three.scale() < 1e-8 * one.scale());
        // two rows reduce to a shifted one-row eigenvalue
        let two = t_lambda(&Partition::new(vec![3, 1]).unwrap(), &s, &spec, &conv).unwrap();
        let want = ts_normalized(2, &s, &spec, &conv).unwrap().shifted(conv.eta);
        assert!((&two - &want).scale() < 1e-9 * want.scale());
        let vac = BetheState::vacuum(&spec);
        let col = t_lambda(&Partition::new(vec![1, 1]).unwrap(), &vac, &spec, &conv).unwrap();
        assert!((&col - &spec.phi().shifted(conv.eta)).scale() < 1e-9);
    }

    #[test]
    fn default_convention_replays() {
        let spec = ChainSpec::homogeneous(4, 1.0);
        let mut states = vec![BetheState::vacuum(&spec)];
        for m in 1..=2 {
            states.extend(
                bethe::solve(&spec, m, &SolveOptions::default(), Execution::Parallel)
                    .unwrap()
                    .states,
            );
        }
        let report = ConventionRecord::default().replay(&states, &spec, 4).unwrap();
        assert!(report.passes(), "{report:?}");
        let calibrated = ConventionRecord::default()
            .calibrate_jt_shift(&[2.0 * I, I, -2.0 * I], &states, &spec, 4)
            .unwrap();
        assert_eq!(calibrated.jt_shift, -2.0 * I);
    }
}
