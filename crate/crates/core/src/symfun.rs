//! Partitions, Schur functions in power-sum times, and Miwa variables.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::det;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("parts must be weakly decreasing, got {0:?}")]
    NotDecreasing(Vec<usize>),
}

/// Weakly decreasing tuple of positive integers (trailing zeros trimmed).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(mut parts: Vec<usize>) -> Result<Self, PartitionError> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(PartitionError::NotDecreasing(parts));
        }
        Ok(Self(parts))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// One-row diagram `(s)`; `(0)` is the empty diagram.
    pub fn row(s: usize) -> Self {
        Self::new(vec![s]).expect("single row is a partition")
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.len()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Part `i` (0-based), zero beyond the last row.
    pub fn part(&self, i: usize) -> usize {
        self.0.get(i).copied().unwrap_or(0)
    }

    /// Number of standard Young tableaux, by the hook length formula.
    pub fn standard_tableaux(&self) -> f64 {
        let n = self.weight();
        let conj = self.conjugate();
        let mut hooks = 1.0;
        for (i, &row) in self.0.iter().enumerate() {
            for j in 0..row {
                hooks *= (row - j + conj.part(j) - i - 1) as f64;
            }
        }
        (1..=n).map(|k| k as f64).product::<f64>() / hooks
    }

    pub fn conjugate(&self) -> Self {
        let first = self.part(0);
        Self((0..first).map(|j| self.0.iter().filter(|&&p| p > j).count()).collect())
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = PartitionError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All partitions of `n` with at most `max_rows` rows, in reverse
/// lexicographic order.
pub fn partitions_of(n: usize, max_rows: usize) -> Vec<Partition> {
    fn rec(n: usize, max_part: usize, rows_left: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if n == 0 {
            out.push(Partition(cur.clone()));
            return;
        }
        if rows_left == 0 {
            return;
        }
        for p in (1..=max_part.min(n)).rev() {
            cur.push(p);
            rec(n - p, p, rows_left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, max_rows, &mut Vec::new(), &mut out);
    out
}

/// Partitions with `|λ| <= k_max` and at most `max_rows` rows, by weight.
pub fn partitions_up_to(k_max: usize, max_rows: usize) -> Vec<Partition> {
    (0..=k_max).flat_map(|n| partitions_of(n, max_rows)).collect()
}

/// The times `{t_0; t_1, .., t_kmax}`. Indices beyond `kmax` are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Times {
    pub t0: C64,
    higher: Vec<C64>,
}

impl Times {
    pub fn zero(kmax: usize) -> Self {
        Self {
            t0: C64::new(0.0, 0.0),
            higher: vec![C64::new(0.0, 0.0); kmax],
        }
    }

    /// `higher[k-1] = t_k`.
    pub fn from_higher(t0: C64, higher: Vec<C64>) -> Self {
        Self { t0, higher }
    }

    pub fn kmax(&self) -> usize {
        self.higher.len()
    }

    /// `t_k` for `k >= 1`; `t_0` for `k == 0`.
    pub fn get(&self, k: usize) -> C64 {
        match k {
            0 => self.t0,
            _ => self.higher.get(k - 1).copied().unwrap_or_default(),
        }
    }

    /// Sets `t_k`, growing `kmax` when needed.
    pub fn set(&mut self, k: usize, value: C64) {
        if k == 0 {
            self.t0 = value;
            return;
        }
        if k > self.higher.len() {
            self.higher.resize(k, C64::new(0.0, 0.0));
        }
        self.higher[k - 1] = value;
    }

    pub fn with(mut self, k: usize, value: C64) -> Self {
        self.set(k, value);
        self
    }

    pub fn higher(&self) -> &[C64] {
        &self.higher
    }

    /// Truncate or zero-extend to `kmax`.
    pub fn with_kmax(mut self, kmax: usize) -> Self {
        self.higher.resize(kmax, C64::new(0.0, 0.0));
        self
    }

    /// `t_k -> c^k t_k` for `k >= 1`.
    pub fn graded_scale(&self, c: C64) -> Self {
        let mut ck = C64::new(1.0, 0.0);
        let higher = self
            .higher
            .iter()
            .map(|&t| {
                ck *= c;
                t * ck
            })
            .collect();
        Self { t0: self.t0, higher }
    }

    /// Bit-level key of the higher times, for caching.
    pub(crate) fn higher_bits(&self) -> Vec<(u64, u64)> {
        self.higher.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect()
    }
}

/// A Miwa point: label `z` with weight `u_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiwaPoint {
    pub z: C64,
    pub weight: C64,
}

/// Coefficients `h_0..h_n` of `exp(sum_{k>=1} t_k z^k)`.
///
/// Uses `k h_k = sum_{m=1}^{k} m t_m h_{k-m}`; `t_0` does not enter.
pub fn h_from_times(t: &Times, n: usize) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); n + 1];
    h[0] = C64::new(1.0, 0.0);
    for k in 1..=n {
        let mut acc = C64::new(0.0, 0.0);
        for m in 1..=k.min(t.kmax()) {
            acc += t.get(m) * h[k - m] * m as f64;
        }
        h[k] = acc / k as f64;
    }
    h
}

/// Jacobi–Trudi determinant `det(h_{λ_i - i + j})` from precomputed `h`.
///
/// `h` must cover indices up to `λ_1 + rows - 1`.
pub fn schur_from_h(lambda: &Partition, h: &[C64]) -> C64 {
    let l = lambda.rows();
    let entry = |i: usize, j: usize| -> C64 {
        let idx = lambda.part(i) as isize - i as isize + j as isize;
        if idx < 0 {
            C64::new(0.0, 0.0)
        } else {
            h.get(idx as usize).copied().unwrap_or_default()
        }
    };
    match l {
        0 => C64::new(1.0, 0.0),
        1 => entry(0, 0),
        2 => entry(0, 0) * entry(1, 1) - entry(0, 1) * entry(1, 0),
        _ => {
            let m: Vec<Vec<C64>> = (0..l).map(|i| (0..l).map(|j| entry(i, j)).collect()).collect();
            det(&m)
        }
    }
}

pub fn schur(lambda: &Partition, t: &Times) -> C64 {
    let h = h_from_times(t, lambda.part(0) + lambda.rows());
    schur_from_h(lambda, &h)
}

/// `t_k = (1/k) sum_z u_z z^k` for `1 <= k <= kmax`; `t_0` is the weight of
/// a point at `z = 0` if present.
pub fn miwa_times(points: &[MiwaPoint], kmax: usize) -> Times {
    let mut t = Times::zero(kmax);
    for p in points {
        if p.z == C64::new(0.0, 0.0) {
            t.t0 += p.weight;
        }
        let mut zk = C64::new(1.0, 0.0);
        for k in 1..=kmax {
            zk *= p.z;
            t.higher[k - 1] += p.weight * zk / k as f64;
        }
    }
    t
}

/// `t + [z]`: `t_0 += step`, `t_k += z^k / k` up to `t.kmax()`.
pub fn shift_times(t: &Times, z: C64, step: C64) -> Times {
    let mut out = t.clone();
    out.t0 += step;
    let mut zk = C64::new(1.0, 0.0);
    for k in 1..=out.kmax() {
        zk *= z;
        out.higher[k - 1] += zk / k as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn h_of_zero_times() {
        let h = h_from_times(&Times::zero(4), 3);
        assert_eq!(h, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn h_of_unit_t1_is_exponential_series() {
        let t = Times::zero(4).with(1, c(1.0, 0.0));
        let h = h_from_times(&t, 3);
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (a, b) in h.iter().zip(want) {
            assert!((a - c(b, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn h_of_single_miwa_point_is_geometric() {
        let z = c(0.4, -0.3);
        let t = miwa_times(&[MiwaPoint { z, weight: c(1.0, 0.0) }], 8);
        let h = h_from_times(&t, 8);
        for (k, hk) in h.iter().enumerate() {
            assert!((hk - z.powu(k as u32)).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn low_schur_closed_forms() {
        let t = Times::zero(3).with(1, c(0.7, -0.2)).with(2, c(0.1, 0.3));
        let (t1, t2) = (t.get(1), t.get(2));
        assert_eq!(schur(&Partition::empty(), &t), c(1.0, 0.0));
        assert!((schur(&Partition::row(1), &t) - t1).norm() < 1e-15);
        let s2 = schur(&Partition::row(2), &t);
        let s11 = schur(&Partition::new(vec![1, 1]).unwrap(), &t);
        assert!((s2 - (t1 * t1 / 2.0 + t2)).norm() < 1e-15);
        assert!((s11 - (t1 * t1 / 2.0 - t2)).norm() < 1e-15);
    }

    #[test]
    fn miwa_examples() {
        let cc = c(0.3, 0.5);
        let t = miwa_times(
            &[MiwaPoint {
                z: cc,
                weight: c(1.0, 0.0),
            }],
            3,
        );
        assert_eq!(t.t0, c(0.0, 0.0));
        assert!((t.get(1) - cc).norm() < 1e-15);
        assert!((t.get(2) - cc * cc / 2.0).norm() < 1e-15);
        assert!((t.get(3) - cc * cc * cc / 3.0).norm() < 1e-15);

        let empty = miwa_times(&[], 5);
        assert!(empty.higher().iter().all(|x| *x == c(0.0, 0.0)));

        let (a, b) = (c(0.2, 0.1), c(-0.5, 0.0));
        let one = c(1.0, 0.0);
        let t = miwa_times(&[MiwaPoint { z: a, weight: one }, MiwaPoint { z: b, weight: one }], 6);
        for k in 1..=6u32 {
            let want = (a.powu(k) + b.powu(k)) / k as f64;
            assert!((t.get(k as usize) - want).norm() < 1e-15);
        }
        let with_origin = miwa_times(
            &[MiwaPoint {
                z: c(0.0, 0.0),
                weight: c(2.5, 0.0),
            }],
            2,
        );
        assert_eq!(with_origin.t0, c(2.5, 0.0));
    }

    #[test]
    fn shift_examples() {
        let t = Times::zero(5).with(2, c(0.1, 0.0));
        let s = shift_times(&t, c(0.0, 0.0), c(0.0, 2.0));
        assert_eq!(s.t0, c(0.0, 2.0));
        assert_eq!(s.higher(), t.higher());

        let (z, w) = (c(0.1, 0.2), c(-0.3, 0.05));
        let one = c(1.0, 0.0);
        let zw = shift_times(&shift_times(&t, z, one), w, one);
        let wz = shift_times(&shift_times(&t, w, one), z, one);
        assert!((zw.t0 - wz.t0).norm() < 1e-15);
        for k in 1..=5 {
            assert!((zw.get(k) - wz.get(k)).norm() < 1e-15);
        }

        let from_zero = shift_times(&Times::zero(5), z, one);
        let miwa = miwa_times(&[MiwaPoint { z, weight: one }], 5);
        assert_eq!(from_zero.t0, one);
        for k in 1..=5 {
            assert!((from_zero.get(k) - miwa.get(k)).norm() < 1e-16);
        }
    }

    #[test]
    fn partition_validation_and_counts() {
        assert!(Partition::new(vec![1, 2]).is_err());
        assert_eq!(Partition::new(vec![2, 1, 0, 0]).unwrap().parts(), &[2, 1]);
        assert_eq!(partitions_of(6, 6).len(), 11);
        assert_eq!(partitions_of(6, 2).len(), 4);
        assert_eq!(partitions_up_to(4, 10).len(), 1 + 1 + 2 + 3 + 5);
        let p = Partition::new(vec![3, 1]).unwrap();
        assert_eq!(p.standard_tableaux(), 3.0);
        assert_eq!(p.conjugate().parts(), &[2, 1, 1]);
    }

    #[test]
    fn more_rows_than_miwa_points_vanish() {
        let pts: Vec<MiwaPoint> = [c(0.3, 0.1), c(-0.2, 0.4)]
            .iter()
            .map(|&z| MiwaPoint { z, weight: c(1.0, 0.0) })
            .collect();
        let t = miwa_times(&pts, 10);
        for lam in partitions_up_to(7, 7).into_iter().filter(|l| l.rows() > 2) {
            assert!(schur(&lam, &t).norm() < 1e-12, "{lam}");
        }
    }

    fn small_times() -> impl Strategy<Value = Times> {
        proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 6)
            .prop_map(|v| Times::from_higher(C64::new(0.0, 0.0), v.into_iter().map(|(a, b)| C64::new(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn graded_scaling_is_homogeneous(t in small_times(), re in -1.5f64..1.5, im in -1.5f64..1.5) {
            let cs = C64::new(re, im);
            for lam in partitions_up_to(5, 5) {
                let lhs = schur(&lam, &t.graded_scale(cs));
                let rhs = schur(&lam, &t) * cs.powu(lam.weight() as u32);
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            }
        }
    }
}
