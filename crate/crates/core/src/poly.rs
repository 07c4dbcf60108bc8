//! Dense univariate polynomials over `Complex64`.
//!
//! Coefficients are stored lowest degree first. The zero polynomial has an
//! empty coefficient vector.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("inexact division: remainder {remainder:.3e} exceeds {tolerance:.3e} x scale {scale:.3e}")]
    InexactDivision { remainder: f64, tolerance: f64, scale: f64 },
    #[error("root finder did not converge after {iterations} iterations (worst step {worst_step:.3e}); coefficients {coeffs:?}")]
    RootsNotConverged {
        iterations: usize,
        worst_step: f64,
        coeffs: Vec<C64>,
    },
    #[error("interpolation needs distinct nodes ({0} given)")]
    DegenerateNodes(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolynomial {
    coeffs: Vec<C64>,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// `u - a`
    pub fn linear_root(a: C64) -> Self {
        Self::new(vec![-a, C64::new(1.0, 0.0)])
    }

    /// Monic polynomial `prod (u - r)`.
    pub fn from_roots(roots: &[C64]) -> Self {
        roots.iter().fold(Self::one(), |acc, &r| &acc * &Self::linear_root(r))
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the stored coefficient vector; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drop trailing coefficients below `tol * scale`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let cut = tol * self.scale();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= cut) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// Degree after discarding trailing coefficients below `tol * scale`.
    pub fn effective_degree(&self, tol: f64) -> Option<usize> {
        self.trimmed(tol).degree()
    }

    pub fn eval(&self, u: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&x| x * c).collect())
    }

    /// The polynomial `u -> p(r u)`.
    pub fn dilated(&self, r: f64) -> Self {
        let mut f = 1.0;
        Self::new(
            self.coeffs
                .iter()
                .map(|&x| {
                    let y = x * f;
                    f *= r;
                    y
                })
                .collect(),
        )
    }

    /// [`Self::exact_div`] carried out in the variable `w = u / r`, which keeps
    /// coefficients balanced when the roots have magnitude around `r`.
    pub fn exact_div_scaled(&self, divisor: &Self, r: f64, tol: f64) -> Result<Self, PolyError> {
        let q = self.dilated(r).exact_div(&divisor.dilated(r), tol)?;
        Ok(q.dilated(1.0 / r))
    }

    /// The polynomial `u -> p(u + c)` (Taylor shift).
    pub fn shifted(&self, c: C64) -> Self {
        let mut out = self.coeffs.clone();
        let n = out.len();
        // repeated synthetic division by (u - c) expands around -c
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let next = out[j + 1];
                out[j] += c * next;
            }
        }
        Self::new(out)
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self), PolyError> {
        let dd = divisor.degree().ok_or(PolyError::DivisionByZero)?;
        let lead = divisor.leading();
        let Some(nd) = self.degree() else {
            return Ok((Self::zero(), Self::zero()));
        };
        if nd < dd {
            return Ok((Self::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![C64::new(0.0, 0.0); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = C64::new(0.0, 0.0);
        }
        rem.truncate(dd);
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// Division that must leave a remainder below `tol` relative to the
    /// dividend's coefficient scale.
    pub fn exact_div(&self, divisor: &Self, tol: f64) -> Result<Self, PolyError> {
        let (q, r) = self.div_rem(divisor)?;
        let scale = self.scale().max(f64::MIN_POSITIVE);
        let remainder = r.scale();
        if remainder > tol * scale {
            return Err(PolyError::InexactDivision {
                remainder,
                tolerance: tol,
                scale,
            });
        }
        Ok(q)
    }

    /// Newton-form interpolation through `(nodes[i], values[i])`.
    pub fn interpolate(nodes: &[C64], values: &[C64]) -> Result<Self, PolyError> {
        assert_eq!(nodes.len(), values.len());
        let n = nodes.len();
        for i in 0..n {
            for j in 0..i {
                if (nodes[i] - nodes[j]).norm() == 0.0 {
                    return Err(PolyError::DegenerateNodes(n));
                }
            }
        }
        let mut dd = values.to_vec();
        for level in 1..n {
            for i in (level..n).rev() {
                dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
            }
        }
        let mut acc = Self::zero();
        for i in (0..n).rev() {
            acc = &(&acc * &Self::linear_root(nodes[i])) + &Self::constant(dd[i]);
        }
        Ok(acc)
    }

    /// All roots by Aberth–Ehrlich simultaneous iteration.
    ///
    /// `warm` seeds the iteration when it has exactly `degree` entries;
    /// otherwise points on a circle of the Cauchy-bound radius are used.
    pub fn roots(&self, warm: Option<&[C64]>) -> Result<Vec<C64>, PolyError> {
        aberth(self, warm, 500, 1e-15)
    }
}

fn initial_guesses(p: &ComplexPolynomial) -> Vec<C64> {
    let n = p.degree().unwrap_or(0);
    let lead = p.leading().norm();
    let radius = p.coeffs[..n]
        .iter()
        .map(|c| c.norm() / lead)
        .fold(0.0, f64::max)
        .max(1e-3)
        .powf(1.0 / n.max(1) as f64);
    let centre = -p.coeff(n.saturating_sub(1)) / (p.leading() * n as f64);
    (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            centre + C64::from_polar(radius, angle)
        })
        .collect()
}

pub(crate) fn aberth(
    p: &ComplexPolynomial,
    warm: Option<&[C64]>,
    max_iter: usize,
    eps: f64,
) -> Result<Vec<C64>, PolyError> {
    let n = match p.degree() {
        None | Some(0) => return Ok(Vec::new()),
        Some(n) => n,
    };
    if n == 1 {
        return Ok(vec![-p.coeffs[0] / p.coeffs[1]]);
    }
    let dp = p.derivative();
    let mut z = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => initial_guesses(p),
    };
    // coincident warm starts stall the pairwise repulsion
    for i in 0..n {
        for j in 0..i {
            if (z[i] - z[j]).norm() < 1e-12 * (1.0 + z[i].norm()) {
                let bump = C64::new(1e-7, 1.3e-7) * (1.0 + z[i].norm());
                z[i] += bump;
            }
        }
    }
    let mut worst = f64::INFINITY;
    for _ in 0..max_iter {
        worst = 0.0;
        for i in 0..n {
            let pv = p.eval(z[i]);
            if pv == C64::new(0.0, 0.0) {
                continue;
            }
            let ratio = pv / dp.eval(z[i]);
            let repulsion: C64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                worst = worst.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if worst <= eps {
            return Ok(z);
        }
    }
    // accept a stalled iteration when the residuals are at rounding level
    let scale = p.scale();
    let ok = z.iter().all(|&r| {
        let mag: f64 = p
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * r.norm().powi(k as i32))
            .sum();
        p.eval(r).norm() <= 1e-11 * mag.max(scale)
    });
    if ok && worst < 1e-8 {
        Ok(z)
    } else {
        Err(PolyError::RootsNotConverged {
            iterations: max_iter,
            worst_step: worst,
            coeffs: p.coeffs.clone(),
        })
    }
}

impl Add for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn add(self, rhs: Self) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn sub(self, rhs: Self) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn mul(self, rhs: Self) -> ComplexPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return ComplexPolynomial::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ComplexPolynomial::new(out)
    }
}

impl Neg for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn neg(self) -> ComplexPolynomial {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

impl fmt::Display for ComplexPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})u"),
                _ => format!("({c})u^{k}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}
