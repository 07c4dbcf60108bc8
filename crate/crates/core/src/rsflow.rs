//! Motion of the master-T zeros along `t_1`: tracking, the
//! Ruijsenaars–Schneider equations of motion checked by finite
//! differences, and the initial-value data of each eigenstate.

use itertools::Itertools;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bethe::{self, BetheState};
use crate::exec::Execution;
use crate::fusion::ConventionRecord;
use crate::master::{MasterError, MasterT, Truncation};
use crate::poly::ComplexPolynomial;
use crate::spinchain::ChainSpec;
use crate::symfun::Times;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Candidate pair-coupling constants tried by [`calibrate_eta`].
pub const ETA_CANDIDATES: [C64; 4] = [
    C64 { re: 1.0, im: 0.0 },
    C64 { re: 2.0, im: 0.0 },
    C64 { re: 0.0, im: 1.0 },
    C64 { re: 0.0, im: 2.0 },
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("near-singular pair ({i}, {k}) at t1 = {t1}: denominator {denominator:.3e}")]
    NearSingularPair {
        i: usize,
        k: usize,
        t1: f64,
        denominator: f64,
    },
    #[error("coincident inhomogeneities: |phi'(theta_{j})| = {value:.3e}")]
    Coincident { j: usize, value: f64 },
    #[error("eta calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Master(#[from] MasterError),
}

/// Form of the pair force.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceLaw {
    /// `ü_i = -Σ_k 2 η² u̇_i u̇_k / ((u_i - u_k)((u_i - u_k)² - η²))`.
    #[default]
    Rational,
    /// `ü_i = Σ_k 2 u̇_i u̇_k / ((u_i - u_k)² - η²)`.
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsParams {
    pub eta: C64,
    pub law: ForceLaw,
}

impl RsParams {
    pub fn new(eta: C64) -> Self {
        Self {
            eta,
            law: ForceLaw::default(),
        }
    }

    /// Acceleration of every particle at positions `u`, velocities `v`.
    pub fn acceleration(&self, u: &[C64], v: &[C64]) -> Result<Vec<C64>, (usize, usize, f64)> {
        let eta2 = self.eta * self.eta;
        let mut out = vec![ZERO; u.len()];
        for i in 0..u.len() {
            for k in 0..u.len() {
                if k == i {
                    continue;
                }
                let d = u[i] - u[k];
                let den = match self.law {
                    ForceLaw::Rational => d * (d * d - eta2),
                    ForceLaw::AsPrinted => d * d - eta2,
                };
                if den.norm() < 1e-12 {
                    return Err((i, k, den.norm()));
                }
                out[i] += match self.law {
                    ForceLaw::Rational => -2.0 * eta2 * v[i] * v[k] / den,
                    ForceLaw::AsPrinted => 2.0 * v[i] * v[k] / den,
                };
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    /// Smallest allowed pair separation.
    pub collision_tol: f64,
    /// Largest allowed single-step displacement as a fraction of the pair
    /// separation.
    pub max_step_fraction: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            collision_tol: 1e-6,
            max_step_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub state_id: usize,
    pub h: f64,
    pub grid: Vec<f64>,
    /// `positions[n][j]` is particle `j` at `grid[n]`.
    pub positions: Vec<Vec<C64>>,
    /// Set when tracking stopped early.
    pub truncated: Option<String>,
}

impl Trajectory {
    /// Every `stride`-th point.
    pub fn subsample(&self, stride: usize) -> Self {
        Self {
            state_id: self.state_id,
            h: self.h * stride as f64,
            grid: self.grid.iter().step_by(stride).copied().collect(),
            positions: self.positions.iter().step_by(stride).cloned().collect(),
            truncated: self.truncated.clone(),
        }
    }

    pub fn particles(&self) -> usize {
        self.positions.first().map_or(0, |p| p.len())
    }
}

fn min_separation(u: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..u.len() {
        for k in i + 1..u.len() {
            best = best.min((u[i] - u[k]).norm());
        }
    }
    best
}

/// Reorder `next` to follow `prev` with minimal total displacement.
/// Exhaustive up to eight particles, greedy beyond.
pub fn match_particles(prev: &[C64], next: &[C64]) -> Vec<C64> {
    let n = prev.len();
    if n <= 8 {
        let best = (0..n)
            .permutations(n)
            .min_by(|a, b| {
                let cost = |p: &Vec<usize>| {
                    p.iter()
                        .enumerate()
                        .map(|(i, &j)| (prev[i] - next[j]).norm())
                        .sum::<f64>()
                };
                cost(a).total_cmp(&cost(b))
            })
            .unwrap_or_default();
        best.into_iter().map(|j| next[j]).collect()
    } else {
        let mut free: Vec<usize> = (0..n).collect();
        prev.iter()
            .map(|p| {
                let (pos, _) = free
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (p - next[*a.1]).norm().total_cmp(&(p - next[*b.1]).norm()))
                    .expect("same length");
                next[free.remove(pos)]
            })
            .collect()
    }
}

/// Zeros of `T(u, t_1)` (other times zero) on the grid `start + n h`,
/// `n = 0..=steps`, continued from `{θ_j}` at `t_1 = 0` when `start = 0`
/// and from the roots at `start` otherwise.
pub fn track(
    master: &MasterT,
    state_id: usize,
    start: f64,
    h: f64,
    steps: usize,
    opts: &TrackOptions,
) -> Result<Trajectory, RsError> {
    if h == 0.0 || !h.is_finite() {
        return Err(RsError::InvalidInput(format!("step {h}")));
    }
    let times = |t1: f64| Times::zero(1).with(1, C64::new(t1, 0.0));
    let first = master.zeros(&times(start), None)?;
    let mut prev = match_particles(&master.spec.theta, &first);
    let mut traj = Trajectory {
        state_id,
        h: h.abs(),
        grid: vec![start],
        positions: vec![prev.clone()],
        truncated: None,
    };
    for n in 1..=steps {
        let t1 = start + h * n as f64;
        let raw = match master.zeros(&times(t1), Some(&prev)) {
            Ok(z) => z,
            Err(e) => {
                traj.truncated = Some(format!("root finding failed at t1 = {t1}: {e}"));
                break;
            }
        };
        let next = match_particles(&prev, &raw);
        let sep = min_separation(&next);
        if sep < opts.collision_tol {
            traj.truncated = Some(format!("collision at t1 = {t1}: separation {sep:.3e}"));
            break;
        }
        let step = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if step > opts.max_step_fraction * sep.min(min_separation(&prev)) {
            traj.truncated = Some(format!(
                "ambiguous matching at t1 = {t1}: step {step:.3e}, separation {sep:.3e}"
            ));
            break;
        }
        traj.grid.push(t1);
        traj.positions.push(next.clone());
        prev = next;
    }
    Ok(traj)
}

/// Residuals of the equations of motion at the interior grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsResidual {
    pub h: f64,
    pub t1: Vec<f64>,
    /// `values[n][i]` for particle `i` at `t1[n]`.
    pub values: Vec<Vec<C64>>,
}

impl RsResidual {
    pub fn max_norm(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest residual at the given grid points (matched to `1e-12`).
    pub fn max_norm_at(&self, points: &[f64]) -> f64 {
        self.t1
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| points.iter().any(|p| (*p - **t).abs() < 1e-12))
            .flat_map(|(_, v)| v.iter().map(|x| x.norm()))
            .fold(0.0, f64::max)
    }
}

/// Central-difference residual `ü_i - force_i(u, u̇)`.
pub fn rs_residual(traj: &Trajectory, params: &RsParams) -> Result<RsResidual, RsError> {
    if traj.positions.len() < 3 {
        return Err(RsError::InvalidInput("need at least three grid points".into()));
    }
    let h = traj.h;
    let n = traj.particles();
    let mut out = RsResidual {
        h,
        t1: Vec::new(),
        values: Vec::new(),
    };
    for w in 1..traj.positions.len() - 1 {
        let (a, b, c) = (&traj.positions[w - 1], &traj.positions[w], &traj.positions[w + 1]);
        // grid may run backwards; the second difference does not care
        let sign = (traj.grid[w + 1] - traj.grid[w]).signum();
        let v: Vec<C64> = (0..n).map(|i| sign * (c[i] - a[i]) / (2.0 * h)).collect();
        let acc: Vec<C64> = (0..n).map(|i| (c[i] - 2.0 * b[i] + a[i]) / (h * h)).collect();
        let force = params
            .acceleration(b, &v)
            .map_err(|(i, k, denominator)| RsError::NearSingularPair {
                i,
                k,
                t1: traj.grid[w],
                denominator,
            })?;
        out.t1.push(traj.grid[w]);
        out.values.push(acc.iter().zip(&force).map(|(a, f)| a - f).collect());
    }
    Ok(out)
}

/// Residual at step `h` and at `2h` on the shared points, with the ratio
/// and the Richardson-extrapolated level `r_h - (r_2h - r_h) / 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    pub extrapolated: f64,
    /// Largest finite-difference acceleration, the natural unit of the
    /// residuals.
    pub accel_scale: f64,
    /// `coarse / fine` for each particle separately.
    pub particle_ratios: Vec<f64>,
}

impl OrderCheck {
    pub fn relative_extrapolated(&self) -> f64 {
        self.extrapolated / (1.0 + self.accel_scale)
    }
}

fn accel_scale(traj: &Trajectory) -> f64 {
    let h2 = traj.h * traj.h;
    traj.positions
        .windows(3)
        .flat_map(|w| (0..w[0].len()).map(move |i| ((w[2][i] - 2.0 * w[1][i] + w[0][i]) / h2).norm()))
        .fold(0.0, f64::max)
}

pub fn order_check(traj: &Trajectory, params: &RsParams) -> Result<OrderCheck, RsError> {
    let coarse_traj = traj.subsample(2);
    let coarse_res = rs_residual(&coarse_traj, params)?;
    let fine_res = rs_residual(traj, params)?;
    let coarse = coarse_res.max_norm();
    let fine = fine_res.max_norm_at(&coarse_res.t1);
    // extrapolate per point and particle, then take the worst
    let n = traj.particles();
    let mut extrapolated: f64 = 0.0;
    let mut per_coarse = vec![0.0f64; n];
    let mut per_fine = vec![0.0f64; n];
    for (t, cv) in coarse_res.t1.iter().zip(&coarse_res.values) {
        if let Some(idx) = fine_res.t1.iter().position(|x| (x - t).abs() < 1e-12) {
            for (i, (c, f)) in cv.iter().zip(&fine_res.values[idx]).enumerate() {
                extrapolated = extrapolated.max((f + (f - c) / 3.0).norm());
                per_coarse[i] = per_coarse[i].max(c.norm());
                per_fine[i] = per_fine[i].max(f.norm());
            }
        }
    }
    let particle_ratios = per_coarse.iter().zip(&per_fine).map(|(c, f)| c / f).collect();
    Ok(OrderCheck {
        coarse,
        fine,
        ratio: coarse / fine,
        extrapolated,
        accel_scale: accel_scale(traj),
        particle_ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaCalibration {
    pub chosen: C64,
    /// `(candidate, extrapolated residual relative to the acceleration scale)`.
    pub table: Vec<(C64, f64)>,
    /// Least-squares fit of `η²` from the finite-difference data.
    pub eta_squared_fit: C64,
}

/// Relative extrapolated residual separating an h-convergent law from a
/// plateau.
pub const DISCRIMINATION_THRESHOLD: f64 = 1e-4;

/// Pick `η` from `candidates` minimizing the extrapolated residual on
/// `traj` (at least five points, two particles).
pub fn calibrate_eta(traj: &Trajectory, law: ForceLaw, candidates: &[C64]) -> Result<EtaCalibration, RsError> {
    if traj.positions.len() < 5 {
        return Err(RsError::Calibration("need at least five grid points".into()));
    }
    if traj.particles() < 2 {
        return Err(RsError::Calibration("a single particle carries no pair term".into()));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &eta in candidates {
        let level = order_check(traj, &RsParams { eta, law }).map_or(f64::INFINITY, |o| o.relative_extrapolated());
        table.push((eta, level));
    }
    let (chosen, best) = table
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| RsError::Calibration("no candidates".into()))?;
    let eta_squared_fit = fit_eta_squared(traj, law, chosen * chosen);
    if best > DISCRIMINATION_THRESHOLD {
        return Err(RsError::Calibration(format!(
            "best candidate {chosen} leaves {best:.3e}; table {table:?}; fitted eta^2 = {eta_squared_fit}"
        )));
    }
    Ok(EtaCalibration {
        chosen,
        table,
        eta_squared_fit,
    })
}

/// Gauss–Newton on `η²` for the summed squared residual.
fn fit_eta_squared(traj: &Trajectory, law: ForceLaw, start: C64) -> C64 {
    let residuals = |e2: C64| -> Option<Vec<C64>> {
        let params = RsParams { eta: e2.sqrt(), law };
        rs_residual(traj, &params).ok().map(|r| r.values.concat())
    };
    let mut e2 = start;
    for _ in 0..30 {
        let Some(r) = residuals(e2) else { break };
        let step = 1e-6 * (1.0 + e2.norm());
        let Some(rp) = residuals(e2 + step) else { break };
        let jac: Vec<C64> = rp.iter().zip(&r).map(|(a, b)| (a - b) / step).collect();
        let num: C64 = jac.iter().zip(&r).map(|(j, x)| j.conj() * x).sum();
        let den: f64 = jac.iter().map(|j| j.norm_sqr()).sum();
        if den == 0.0 {
            break;
        }
        let delta = num / den;
        e2 -= delta;
        if delta.norm() < 1e-12 * (1.0 + e2.norm()) {
            break;
        }
    }
    e2
}

/// `u̇_j(0) = -T_(1)(θ_j) / φ'(θ_j)`.
pub fn initial_velocities(t1: &ComplexPolynomial, spec: &ChainSpec) -> Result<Vec<C64>, RsError> {
    let dphi = spec.phi().derivative();
    let scale = spec.phi().scale();
    spec.theta
        .iter()
        .enumerate()
        .map(|(j, &th)| {
            let d = dphi.eval(th);
            if d.norm() < 1e-10 * scale {
                return Err(RsError::Coincident { j, value: d.norm() });
            }
            Ok(-t1.eval(th) / d)
        })
        .collect()
}

/// Default step of [`fd_velocities`].
pub const FD_VELOCITY_STEP: f64 = 2.5e-4;

/// Velocities from tracked zeros: Richardson-improved central differences
/// at steps `h` and `h / 2`.
pub fn fd_velocities(master: &MasterT, h: f64) -> Result<Vec<C64>, RsError> {
    let opts = TrackOptions::default();
    let central = |step: f64| -> Result<Vec<C64>, RsError> {
        let fwd = track(master, 0, 0.0, step, 1, &opts)?;
        let bwd = track(master, 0, 0.0, -step, 1, &opts)?;
        if fwd.positions.len() < 2 || bwd.positions.len() < 2 {
            return Err(RsError::InvalidInput("tracking stopped before one step".into()));
        }
        Ok(fwd.positions[1]
            .iter()
            .zip(&bwd.positions[1])
            .map(|(p, m)| (p - m) / (2.0 * step))
            .collect())
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Fourth-order Runge–Kutta integration of the equations of motion,
/// recorded on the grid `n h`, `n = 0..=steps`, with `substeps` internal
/// steps per grid interval.
pub fn integrate(
    u0: &[C64],
    v0: &[C64],
    params: &RsParams,
    h: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory, RsError> {
    let n = u0.len();
    let dt = h / substeps as f64;
    let rhs = |u: &[C64], v: &[C64]| -> Result<(Vec<C64>, Vec<C64>), RsError> {
        let a = params
            .acceleration(u, v)
            .map_err(|(i, k, denominator)| RsError::NearSingularPair {
                i,
                k,
                t1: f64::NAN,
                denominator,
            })?;
        Ok((v.to_vec(), a))
    };
    let axpy = |x: &[C64], y: &[C64], s: f64| -> Vec<C64> { x.iter().zip(y).map(|(a, b)| a + s * b).collect() };
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let mut traj = Trajectory {
        state_id: 0,
        h,
        grid: vec![0.0],
        positions: vec![u.clone()],
        truncated: None,
    };
    for step in 1..=steps {
        for _ in 0..substeps {
            let (k1u, k1v) = rhs(&u, &v)?;
            let (k2u, k2v) = rhs(&axpy(&u, &k1u, dt / 2.0), &axpy(&v, &k1v, dt / 2.0))?;
            let (k3u, k3v) = rhs(&axpy(&u, &k2u, dt / 2.0), &axpy(&v, &k2v, dt / 2.0))?;
            let (k4u, k4v) = rhs(&axpy(&u, &k3u, dt), &axpy(&v, &k3v, dt))?;
            for i in 0..n {
                u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
                v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
        }
        traj.grid.push(h * step as f64);
        traj.positions.push(u.clone());
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseRow {
    pub state_id: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub roots: Vec<C64>,
    pub positions: Vec<C64>,
    pub velocities: Vec<C64>,
    pub fd_velocities: Vec<C64>,
    pub energy: Option<f64>,
    pub bethe_residual: f64,
    pub velocity_fd_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub rows: Vec<InverseRow>,
    /// Largest distance of any row's `t = 0` zeros from `{θ_j}`.
    pub position_spread: f64,
    /// Smallest max-norm distance between two rows' velocity vectors.
    pub min_velocity_separation: f64,
    pub max_velocity_fd_error: f64,
}

/// One row per eigenstate: shared positions, distinct velocities.
/// Rows are sorted by `M`, then by the velocity vector.
pub fn inverse_problem_report(
    spec: &ChainSpec,
    states: &[BetheState],
    fd_step: f64,
    exec: Execution,
) -> Result<InverseReport, RsError> {
    let conv = ConventionRecord::default();
    let rows: Vec<Result<InverseRow, RsError>> = exec.map(states, |state| {
        let master = MasterT::new(state, spec, &conv, Truncation::default())?;
        let positions = match_particles(&spec.theta, &master.zeros(&Times::zero(1), None)?);
        let velocities = initial_velocities(master.one_row(1), spec)?;
        let fd = fd_velocities(&master, fd_step)?;
        let err = velocities
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Ok(InverseRow {
            state_id: 0,
            m: state.roots().len(),
            roots: state.roots().to_vec(),
            positions,
            velocities,
            fd_velocities: fd,
            energy: bethe::energy(state, spec).ok(),
            bethe_residual: state.residual_norm,
            velocity_fd_error: err,
        })
    });
    let mut rows: Vec<InverseRow> = rows.into_iter().collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| {
        a.m.cmp(&b.m).then_with(|| {
            a.velocities
                .iter()
                .zip(&b.velocities)
                .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.state_id = i;
    }
    let position_spread = rows
        .iter()
        .flat_map(|r| r.positions.iter().zip(&spec.theta).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    let mut min_velocity_separation = f64::INFINITY;
    for i in 0..rows.len() {
        for k in i + 1..rows.len() {
            let d = rows[i]
                .velocities
                .iter()
                .zip(&rows[k].velocities)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            min_velocity_separation = min_velocity_separation.min(d);
        }
    }
    let max_velocity_fd_error = rows.iter().map(|r| r.velocity_fd_error).fold(0.0, f64::max);
    Ok(InverseReport {
        rows,
        position_spread,
        min_velocity_separation,
        max_velocity_fd_error,
    })
}
