//! Residuals of the three-term Hirota bilinear equation, in the
//! continuous-shift form and on the three-dimensional Miwa lattice.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::symfun::{shift_times, Times};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HirotaError {
    #[error("tau evaluation failed: {0}")]
    Evaluation(String),
    #[error("lattice stencil incomplete: missing point {0:?}")]
    IncompleteStencil([i64; 3]),
}

/// A function of the times that is tested against the Hirota equation.
pub trait TauFn: Sync {
    fn eval(&self, t: &Times) -> Result<C64, HirotaError>;
    /// Highest `t_k` index the function reads.
    fn kmax(&self) -> usize;
}

/// `tau = c`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantTau(pub C64);

impl TauFn for ConstantTau {
    fn eval(&self, _t: &Times) -> Result<C64, HirotaError> {
        Ok(self.0)
    }
    fn kmax(&self) -> usize {
        1
    }
}

/// `tau = amp * p^{t_0 / step} exp(sum_k t_k p^k)`; with `step = 1` this is
/// the single plane wave `p^{t_0} exp(sum t_k p^k)`.
#[derive(Clone, Copy, Debug)]
pub struct ExponentialTau {
    pub p: C64,
    pub amp: C64,
    pub step: C64,
    pub kmax: usize,
}

impl ExponentialTau {
    pub fn new(p: C64, kmax: usize) -> Self {
        Self {
            p,
            amp: C64::new(1.0, 0.0),
            step: C64::new(1.0, 0.0),
            kmax,
        }
    }
}

impl TauFn for ExponentialTau {
    fn eval(&self, t: &Times) -> Result<C64, HirotaError> {
        let mut exponent = self.p.ln() * (t.t0 / self.step);
        let mut pk = C64::new(1.0, 0.0);
        for k in 1..=self.kmax {
            pk *= self.p;
            exponent += t.get(k) * pk;
        }
        Ok(self.amp * exponent.exp())
    }
    fn kmax(&self) -> usize {
        self.kmax
    }
}

/// Superposition of plane waves.
#[derive(Clone, Debug)]
pub struct SumTau(pub Vec<ExponentialTau>);

impl TauFn for SumTau {
    fn eval(&self, t: &Times) -> Result<C64, HirotaError> {
        self.0.iter().map(|w| w.eval(t)).sum()
    }
    fn kmax(&self) -> usize {
        self.0.iter().map(|w| w.kmax).max().unwrap_or(1)
    }
}

/// `tau = t_1`; not a tau-function, its residual is known in closed form.
#[derive(Clone, Copy, Debug)]
pub struct LinearT1Tau;

impl TauFn for LinearT1Tau {
    fn eval(&self, t: &Times) -> Result<C64, HirotaError> {
        Ok(t.get(1))
    }
    fn kmax(&self) -> usize {
        1
    }
}

/// Closed-form residual of [`LinearT1Tau`]:
/// `z1 z2 (z2 - z1) + z1 z3 (z1 - z3) + z2 z3 (z3 - z2)`.
pub fn linear_t1_residual(z: [C64; 3]) -> C64 {
    let [z1, z2, z3] = z;
    z1 * z2 * (z2 - z1) + z1 * z3 * (z1 - z3) + z2 * z3 * (z3 - z2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub raw: C64,
    /// `|raw|` divided by the largest of the three bilinear terms.
    pub normalized: f64,
}

fn combine(terms: [C64; 3]) -> Residual {
    let raw = terms[0] + terms[1] + terms[2];
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let normalized = if scale > 0.0 { raw.norm() / scale } else { raw.norm() };
    Residual { raw, normalized }
}

/// Continuous-shift residual
/// `sum_cyc (z2 - z3) tau(t + [z1]) tau(t + [z2] + [z3])`, with the `t_0`
/// increment of each shift equal to `step`.
pub fn residual_shift<T: TauFn + ?Sized>(tau: &T, t: &Times, z: [C64; 3], step: C64) -> Result<Residual, HirotaError> {
    let t = t.clone().with_kmax(tau.kmax().max(t.kmax()));
    let [z1, z2, z3] = z;
    let s1 = shift_times(&t, z1, step);
    let s2 = shift_times(&t, z2, step);
    let s3 = shift_times(&t, z3, step);
    let s23 = shift_times(&s2, z3, step);
    let s13 = shift_times(&s1, z3, step);
    let s12 = shift_times(&s1, z2, step);
    Ok(combine([
        (z2 - z3) * tau.eval(&s1)? * tau.eval(&s23)?,
        (z3 - z1) * tau.eval(&s2)? * tau.eval(&s13)?,
        (z1 - z2) * tau.eval(&s3)? * tau.eval(&s12)?,
    ]))
}

/// A point `(u1, u2, u3)` of the Miwa lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub [i64; 3]);

impl LatticePoint {
    fn offset(self, d: [i64; 3]) -> Self {
        Self([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }
}

pub type LatticeGrid = HashMap<LatticePoint, C64>;

/// Lattice residual at `p`:
/// `(z2-z3) tau(u1, u2+1, u3+1) tau(u1+1, u2, u3) + cyclic`.
pub fn residual_lattice(grid: &LatticeGrid, p: LatticePoint, z: [C64; 3]) -> Result<Residual, HirotaError> {
    let get = |d: [i64; 3]| -> Result<C64, HirotaError> {
        let q = p.offset(d);
        grid.get(&q).copied().ok_or(HirotaError::IncompleteStencil(q.0))
    };
    let [z1, z2, z3] = z;
    Ok(combine([
        (z2 - z3) * get([0, 1, 1])? * get([1, 0, 0])?,
        (z3 - z1) * get([1, 0, 1])? * get([0, 1, 0])?,
        (z1 - z2) * get([1, 1, 0])? * get([0, 0, 1])?,
    ]))
}

/// Sample `tau` on `{0..=window}^3` through the Miwa embedding: a unit step
/// in `u_i` adds the Miwa point `z_i` (and `step` to `t_0`).
pub fn lattice_grid<T: TauFn + ?Sized>(
    tau: &T,
    base: &Times,
    z: [C64; 3],
    step: C64,
    window: i64,
) -> Result<LatticeGrid, HirotaError> {
    let base = base.clone().with_kmax(tau.kmax().max(base.kmax()));
    let mut grid = LatticeGrid::new();
    for a in 0..=window {
        for b in 0..=window {
            for c in 0..=window {
                let mut t = base.clone();
                for (n, zi) in [(a, z[0]), (b, z[1]), (c, z[2])] {
                    for _ in 0..n {
                        t = shift_times(&t, zi, step);
                    }
                }
                grid.insert(LatticePoint([a, b, c]), tau.eval(&t)?);
            }
        }
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// `|t_k| <= t_radius` for `1 <= k <= t_kmax`.
    pub t_radius: f64,
    pub t_kmax: usize,
    pub t0_radius: f64,
    pub z_radius: f64,
    /// `t_0` increment of one shift.
    pub step: C64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            seed: 7,
            t_radius: 0.05,
            t_kmax: 4,
            t0_radius: 1.0,
            z_radius: 0.1,
            step: C64::new(1.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: Times,
    pub z: [C64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Largest raw `|residual|`.
    pub max_residual: f64,
    /// Largest normalized residual.
    pub normalized: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Sample attaining `normalized`.
    pub worst_sample: Option<Sample>,
}

fn disk(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    C64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>())
}

/// Deterministic sample set for `config`.
pub fn draw_samples(config: &SamplerConfig) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_samples)
        .map(|_| {
            let t0 = disk(&mut rng, config.t0_radius);
            let higher = (0..config.t_kmax).map(|_| disk(&mut rng, config.t_radius)).collect();
            let z = [
                disk(&mut rng, config.z_radius),
                disk(&mut rng, config.z_radius),
                disk(&mut rng, config.z_radius),
            ];
            Sample {
                t: Times::from_higher(t0, higher),
                z,
            }
        })
        .collect()
}

/// Worst Hirota residual of `tau` over a seeded random sample set.
pub fn sweep_check<T: TauFn + ?Sized>(
    tau: &T,
    config: &SamplerConfig,
    exec: Execution,
) -> Result<SweepReport, HirotaError> {
    let samples = draw_samples(config);
    let residuals = exec.map(&samples, |s| residual_shift(tau, &s.t, s.z, config.step));
    let mut report = SweepReport {
        max_residual: 0.0,
        normalized: 0.0,
        n_samples: samples.len(),
        seed: config.seed,
        worst_sample: None,
    };
    for (sample, r) in samples.iter().zip(residuals) {
        let r = r?;
        report.max_residual = report.max_residual.max(r.raw.norm());
        if report.worst_sample.is_none() || r.normalized > report.normalized {
            report.normalized = r.normalized;
            report.worst_sample = Some(sample.clone());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    const ONE: C64 = C64 { re: 1.0, im: 0.0 };

    #[test]
    fn constant_tau_vanishes() {
        let t = Times::zero(3).with(1, c(0.2, 0.1));
        let r = residual_shift(
            &ConstantTau(c(3.0, -1.0)),
            &t,
            [c(0.1, 0.0), c(0.5, 0.2), c(-0.3, 0.0)],
            ONE,
        )
        .unwrap();
        assert!(r.raw.norm() < 1e-14);
    }

    #[test]
    fn plane_wave_vanishes() {
        let tau = ExponentialTau::new(c(0.8, 0.3), 40);
        let t = Times::zero(4).with(1, c(0.03, 0.01)).with(3, c(-0.02, 0.0));
        let r = residual_shift(&tau, &t, [c(0.1, 0.0), c(-0.05, 0.07), c(0.02, -0.09)], ONE).unwrap();
        assert!(r.normalized < 1e-12, "{r:?}");
    }

    #[test]
    fn linear_t1_residual_is_two_at_123() {
        for t1 in [c(0.0, 0.0), c(1.5, -2.0)] {
            let t = Times::zero(1).with(1, t1);
            let r = residual_shift(&LinearT1Tau, &t, [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], ONE).unwrap();
            assert!((r.raw - c(2.0, 0.0)).norm() < 1e-12, "{r:?}");
        }
        assert_eq!(linear_t1_residual([c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]), c(2.0, 0.0));
    }

    #[test]
    fn degenerate_z_pair_vanishes() {
        let tau = SumTau(vec![
            ExponentialTau::new(c(0.5, 0.0), 30),
            ExponentialTau::new(c(-0.7, 0.2), 30),
        ]);
        let t = Times::zero(2).with(1, c(0.01, 0.0));
        let z = c(0.07, 0.02);
        let r = residual_shift(&tau, &t, [z, z, c(-0.04, 0.0)], ONE).unwrap();
        assert!(r.normalized < 1e-14);
    }

    #[test]
    fn swapping_z_negates_residual() {
        let t = Times::zero(2).with(1, c(0.3, 0.2));
        let z = [c(0.1, 0.05), c(-0.2, 0.1), c(0.05, -0.3)];
        let a = residual_shift(&LinearT1Tau, &t, z, ONE).unwrap().raw;
        let b = residual_shift(&LinearT1Tau, &t, [z[1], z[0], z[2]], ONE).unwrap().raw;
        assert!((a + b).norm() <= 1e-14 * a.norm().max(1e-300) + 1e-300);
    }

    #[test]
    fn residual_scales_quadratically() {
        let t = Times::zero(2).with(1, c(0.3, 0.2));
        let z = [c(0.1, 0.05), c(-0.2, 0.1), c(0.05, -0.3)];
        let base = residual_shift(&LinearT1Tau, &t, z, ONE).unwrap().raw;
        struct Scaled(C64);
        impl TauFn for Scaled {
            fn eval(&self, t: &Times) -> Result<C64, HirotaError> {
                Ok(self.0 * t.get(1))
            }
            fn kmax(&self) -> usize {
                1
            }
        }
        let k = c(2.0, -3.0);
        let scaled = residual_shift(&Scaled(k), &t, z, ONE).unwrap().raw;
        assert!((scaled - base * k * k).norm() < 1e-13);
    }

    #[test]
    fn lattice_of_constant_vanishes_and_missing_point_errors() {
        let z = [c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0)];
        let grid = lattice_grid(&ConstantTau(c(2.0, 0.0)), &Times::zero(2), z, ONE, 1).unwrap();
        let r = residual_lattice(&grid, LatticePoint([0, 0, 0]), z).unwrap();
        assert_eq!(r.raw, c(0.0, 0.0));
        assert!(matches!(
            residual_lattice(&grid, LatticePoint([1, 0, 0]), z),
            Err(HirotaError::IncompleteStencil(_))
        ));
    }

    #[test]
    fn lattice_matches_shift_form() {
        let tau = SumTau(vec![
            ExponentialTau {
                amp: c(1.0, 0.5),
                ..ExponentialTau::new(c(0.6, 0.1), 40)
            },
            ExponentialTau::new(c(-0.4, 0.3), 40),
        ]);
        let z = [c(0.08, 0.01), c(-0.05, 0.06), c(0.03, -0.07)];
        let base = Times::zero(4).with(1, c(0.02, 0.0)).with(2, c(0.0, -0.01));
        let grid = lattice_grid(&tau, &base, z, ONE, 2).unwrap();
        for p in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
            let mut t = base.clone().with_kmax(40);
            for (n, zi) in p.iter().zip(z) {
                for _ in 0..*n {
                    t = shift_times(&t, zi, ONE);
                }
            }
            let lat = residual_lattice(&grid, LatticePoint(p), z).unwrap().raw;
            let cont = residual_shift(&tau, &t, z, ONE).unwrap().raw;
            assert!((lat - cont).norm() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn random_grid_is_generically_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut grid = LatticeGrid::new();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    grid.insert(LatticePoint([a, b, cc]), c(rng.gen(), rng.gen()));
                }
            }
        }
        let z = [c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0)];
        assert!(residual_lattice(&grid, LatticePoint([0, 0, 0]), z).unwrap().normalized > 1e-3);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SamplerConfig {
            n_samples: 50,
            ..Default::default()
        };
        let tau = ExponentialTau::new(c(0.7, -0.2), 40);
        let a = sweep_check(&tau, &cfg, Execution::Parallel).unwrap();
        let b = sweep_check(&tau, &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.normalized < 1e-10);
    }
}
