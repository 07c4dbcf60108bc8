use std::time::Instant;

use bethe_tau::bethe::{self, BetheState};
use bethe_tau::criteria;
use bethe_tau::fusion::{self, ConventionRecord};
use bethe_tau::hirota::{self, ConstantTau, ExponentialTau, LinearT1Tau, SweepReport};
use bethe_tau::master::{self, DeltaCalibration, MasterT, Truncation};
use bethe_tau::rsflow::{self, ForceLaw, RsParams, TrackOptions, Trajectory};
use bethe_tau::spinchain::{self, ChainSpec};
use bethe_tau::symfun::{partitions_up_to, Times};
use bethe_tau::Execution;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{compute, CliError};
use crate::output::{num, Check, Manifest, Workspace};

const EXEC: Execution = Execution::Parallel;

pub const SPECTRUM: &str = "spectrum";
pub const BETHE_SOLVE: &str = "bethe-solve";
pub const VERIFY_TQ: &str = "verify-tq";
pub const BUILD_MASTER: &str = "build-master";
pub const VERIFY_HIROTA: &str = "verify-hirota";
pub const ZEROS_FLOW: &str = "zeros-flow";
pub const RS_CHECK: &str = "rs-check";
pub const INVERSE: &str = "inverse-velocities";

/// Commands whose manifests `report` aggregates, in pipeline order.
pub const PIPELINE: [&str; 8] = [
    SPECTRUM,
    BETHE_SOLVE,
    VERIFY_TQ,
    BUILD_MASTER,
    VERIFY_HIROTA,
    ZEROS_FLOW,
    RS_CHECK,
    INVERSE,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fixture {
    Constant,
    Exponential,
    /// `τ = t_1`, evaluated at `z = (1, 2, 3)`.
    Linear,
}

fn ws(cfg: &RunConfig) -> Workspace {
    Workspace::new(&cfg.output.directory, cfg.wants_csv())
}

fn cnum(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn ensure_chain(found: &ChainSpec, cfg: &RunConfig, artifact: &str, producer: &'static str) -> Result<(), CliError> {
    if *found != cfg.spec() {
        return Err(CliError::Stale {
            artifact: artifact.to_string(),
            producer,
            reason: "chain differs".into(),
        });
    }
    Ok(())
}

fn state_of(spec: &ChainSpec, roots: &[C64]) -> BetheState {
    BetheState {
        l: spec.l,
        m: roots.len(),
        levels: vec![roots.to_vec()],
        residual_norm: 0.0,
        energy: None,
        quantum_numbers: None,
    }
}

// ---------------------------------------------------------------- spectrum

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sector {
    #[serde(rename = "M")]
    pub m: usize,
    pub energies: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub chain: ChainSpec,
    pub sectors: Vec<Sector>,
    pub min_energy: f64,
}

pub fn spectrum(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let spec = cfg.spec();
    let h = spinchain::hamiltonian(&spec).map_err(compute)?;
    let mut sectors = Vec::new();
    let mut max_imag: f64 = 0.0;
    for m in 0..=spec.l {
        let pairs = spinchain::diagonalize_sector(&h, m).map_err(compute)?;
        max_imag = pairs.iter().map(|p| p.value.im.abs()).fold(max_imag, f64::max);
        sectors.push(Sector {
            m,
            energies: pairs.iter().map(|p| p.value.re).collect(),
        });
    }
    let min_energy = sectors
        .iter()
        .flat_map(|s| s.energies.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let rows: Vec<Vec<String>> = sectors
        .iter()
        .flat_map(|s| {
            s.energies
                .iter()
                .enumerate()
                .map(move |(k, e)| vec![s.m.to_string(), k.to_string(), num(*e)])
        })
        .collect();
    let mut w = ws(cfg);
    w.write_csv("spectrum.csv", &["M", "index", "energy"], &rows)?;
    w.write_json(
        "spectrum.json",
        &SpectrumDoc {
            chain: spec,
            sectors,
            min_energy,
        },
    )?;
    let checks = vec![Check::at_most("imaginary part of energies", None, max_imag, 1e-10)];
    w.finish(SPECTRUM, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ------------------------------------------------------------- bethe-solve

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateRow {
    pub state_id: usize,
    pub state: BetheState,
    /// Two roots exactly one spacing apart.
    pub singular: bool,
    pub energy: Option<f64>,
    /// Relative distance to the nearest eigenvalue of the same sector.
    pub ed_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetheDoc {
    pub chain: ChainSpec,
    pub states: Vec<StateRow>,
}

impl BetheDoc {
    pub fn states(&self) -> Vec<BetheState> {
        self.states.iter().map(|r| r.state.clone()).collect()
    }
}

fn load_bethe(w: &Workspace, cfg: &RunConfig) -> Result<BetheDoc, CliError> {
    let doc: BetheDoc = w.read_json("bethe.json", BETHE_SOLVE)?;
    ensure_chain(&doc.chain, cfg, "bethe.json", BETHE_SOLVE)?;
    Ok(doc)
}

pub fn bethe_solve(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let spectrum: SpectrumDoc = w.read_json("spectrum.json", SPECTRUM)?;
    ensure_chain(&spectrum.chain, cfg, "spectrum.json", SPECTRUM)?;
    let spec = cfg.spec();
    let eta = ConventionRecord::default().eta;
    let states = bethe::eigenstates(&spec, &cfg.solve_options(), EXEC).map_err(compute)?;
    let mut rows = Vec::with_capacity(states.len());
    for (id, s) in states.into_iter().enumerate() {
        let singular = fusion::is_singular(s.roots(), eta);
        let energy = if spec.is_homogeneous() && !singular {
            Some(bethe::energy(&s, &spec).map_err(compute)?)
        } else {
            None
        };
        let ed_gap = energy.and_then(|e| {
            spectrum.sectors.iter().find(|sec| sec.m == s.m).map(|sec| {
                sec.energies
                    .iter()
                    .map(|x| (x - e).abs() / x.abs().max(1.0))
                    .fold(f64::INFINITY, f64::min)
            })
        });
        rows.push(StateRow {
            state_id: id,
            state: s,
            singular,
            energy,
            ed_gap,
        });
    }
    let root_rows: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.state.roots().iter().enumerate().map(move |(k, v)| {
                let [re, im] = cnum(*v);
                vec![r.state_id.to_string(), r.state.m.to_string(), k.to_string(), re, im]
            })
        })
        .collect();
    let state_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.state_id.to_string(),
                r.state.m.to_string(),
                r.singular.to_string(),
                r.energy.map(num).unwrap_or_default(),
                r.ed_gap.map(num).unwrap_or_default(),
                num(r.state.residual_norm),
            ]
        })
        .collect();
    w.write_csv("bethe_roots.csv", &["state", "M", "root", "re", "im"], &root_rows)?;
    w.write_csv(
        "bethe_states.csv",
        &["state", "M", "singular", "energy", "ed_gap", "residual"],
        &state_rows,
    )?;
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.ed_gap).collect();
    let worst_residual = rows.iter().map(|r| r.state.residual_norm).fold(0.0, f64::max);
    let mut checks = vec![Check::at_most("Bethe residual", None, worst_residual, cfg.solver.tol)];
    if !gaps.is_empty() {
        checks.push(Check::at_most(
            "energy vs exact diagonalization",
            Some(1),
            gaps.iter().copied().fold(0.0, f64::max),
            1e-8,
        ));
    }
    w.write_json(
        "bethe.json",
        &BetheDoc {
            chain: spec,
            states: rows,
        },
    )?;
    w.finish(BETHE_SOLVE, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// --------------------------------------------------------------- verify-tq

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TqRow {
    pub state_id: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Largest coefficient of the TQ residual over the coefficient scale.
    pub residual: f64,
    /// Largest `|T_λ|` over diagrams with three or more rows, `|λ| <= 6`.
    pub three_row: f64,
}

pub fn verify_tq(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let doc = load_bethe(&w, cfg)?;
    let spec = cfg.spec();
    let conv = ConventionRecord::default();
    let labels = spinchain::simultaneous_labels(&spec, &[C64::new(0.0, 1.0)], EXEC).map_err(compute)?;
    let tall: Vec<_> = partitions_up_to(6, 6).into_iter().filter(|l| l.rows() >= 3).collect();
    let mut rows = Vec::new();
    for r in &doc.states {
        let s = &r.state;
        let t1 = bethe::transfer_eigenvalue(s, &spec, 1e-8).map_err(compute)?;
        let ed = labels
            .iter()
            .filter(|j| j.m == s.roots().len())
            .min_by(|a, b| (&a.t_poly - &t1).scale().total_cmp(&(&b.t_poly - &t1).scale()))
            .ok_or_else(|| CliError::Compute(format!("no diagonalized state with M = {}", s.m)))?;
        let res = bethe::tq_residual(&ed.t_poly, s, &spec).map_err(compute)?;
        let scale = (&spec.a_poly() * &s.q().shifted(C64::new(0.0, -2.0))).scale();
        let mut unit: f64 = 0.0;
        for n in 0..=7 {
            unit = unit.max(fusion::ts_normalized(n, s, &spec, &conv).map_err(compute)?.scale());
        }
        let mut three_row: f64 = 0.0;
        for lam in &tall {
            three_row = three_row.max(fusion::t_lambda(lam, s, &spec, &conv).map_err(compute)?.scale() / unit);
        }
        rows.push(TqRow {
            state_id: r.state_id,
            m: s.m,
            residual: res.scale() / scale,
            three_row,
        });
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.state_id.to_string(),
                r.m.to_string(),
                num(r.residual),
                num(r.three_row),
            ]
        })
        .collect();
    w.write_csv("tq.csv", &["state", "M", "tq_residual", "three_row_max"], &table)?;
    w.write_json("tq.json", &rows)?;
    let checks = vec![
        Check::at_most(
            "TQ residual",
            Some(2),
            rows.iter().map(|r| r.residual).fold(0.0, f64::max),
            1e-8,
        ),
        Check::at_most(
            "three-row diagrams",
            Some(3),
            rows.iter().map(|r| r.three_row).fold(0.0, f64::max),
            1e-8,
        ),
    ];
    w.finish(VERIFY_TQ, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ------------------------------------------------------------ build-master

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MasterRow {
    pub state_id: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub roots: Vec<C64>,
    /// Coefficients of `T_(1)(u)`, lowest first.
    pub t1: Vec<C64>,
    pub zeros_at_zero: Vec<C64>,
    pub zero_error: f64,
    /// Degree in `u` at random small times.
    pub degrees: Vec<Option<usize>>,
    /// Truncation order reached at the random times.
    pub k_used: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MasterDoc {
    pub chain: ChainSpec,
    pub convention: ConventionRecord,
    pub truncation: Truncation,
    pub u_base: f64,
    pub delta: DeltaCalibration,
    pub states: Vec<MasterRow>,
}

impl MasterDoc {
    pub fn masters(&self, truncation: Truncation) -> Result<Vec<MasterT>, CliError> {
        self.states
            .iter()
            .map(|r| {
                MasterT::new(
                    &state_of(&self.chain, &r.roots),
                    &self.chain,
                    &self.convention,
                    truncation,
                )
                .map_err(compute)
            })
            .collect()
    }
}

fn load_master(w: &Workspace, cfg: &RunConfig) -> Result<MasterDoc, CliError> {
    let doc: MasterDoc = w.read_json("master.json", BUILD_MASTER)?;
    ensure_chain(&doc.chain, cfg, "master.json", BUILD_MASTER)?;
    Ok(doc)
}

const DEGREE_SAMPLES: usize = 5;

pub fn build_master(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let doc = load_bethe(&w, cfg)?;
    let spec = cfg.spec();
    let truncation = cfg.truncation();
    let u_base = C64::new(cfg.master.u_base, 0.0);
    let base = ConventionRecord::default();
    let states = doc.states();
    let masters: Vec<MasterT> = states
        .iter()
        .map(|s| MasterT::new(s, &spec, &base, truncation).map_err(compute))
        .collect::<Result<_, _>>()?;
    let delta = master::calibrate_delta(&masters, &cfg.master.delta_candidates, &cfg.sampler(), u_base, EXEC)
        .map_err(compute)?;
    let convention = ConventionRecord {
        t0_step: delta.chosen,
        ..base
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampling.seed);
    let r = cfg.master.t_radius;
    let mut rows = Vec::new();
    for (row, m) in doc.states.iter().zip(&masters) {
        let mut degrees = Vec::new();
        let mut k_used = Vec::new();
        for _ in 0..DEGREE_SAMPLES {
            let mut t = Times::zero(4);
            for k in 1..=4 {
                t.set(
                    k,
                    C64::from_polar(r * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>()),
                );
            }
            let (p, _, k) = m.polynomial_with_tail(&t).map_err(compute)?;
            degrees.push(p.effective_degree(1e-10 * p.scale()));
            k_used.push(k);
        }
        let zeros = m.zeros(&Times::zero(1), None).map_err(compute)?;
        rows.push(MasterRow {
            state_id: row.state_id,
            m: row.state.m,
            roots: row.state.roots().to_vec(),
            t1: m.one_row(1).coeffs().to_vec(),
            zero_error: bethe::root_set_distance(&zeros, &spec.theta),
            zeros_at_zero: zeros,
            degrees,
            k_used,
        });
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.zeros_at_zero.iter().enumerate().map(move |(j, z)| {
                let [re, im] = cnum(*z);
                vec![r.state_id.to_string(), r.m.to_string(), j.to_string(), re, im]
            })
        })
        .collect();
    w.write_csv("master_zeros.csv", &["state", "M", "zero", "re", "im"], &table)?;
    let degree_ok = rows.iter().all(|r| r.degrees.iter().all(|d| *d == Some(spec.l)));
    let checks = vec![
        Check::holds("degree L at random times", Some(5), degree_ok),
        Check::at_most(
            "zeros at t = 0 vs inhomogeneities",
            Some(5),
            rows.iter().map(|r| r.zero_error).fold(0.0, f64::max),
            1e-10,
        ),
    ];
    w.write_json(
        "master.json",
        &MasterDoc {
            chain: spec,
            convention,
            truncation,
            u_base: cfg.master.u_base,
            delta,
            states: rows,
        },
    )?;
    w.finish(BUILD_MASTER, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ----------------------------------------------------------- verify-hirota

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HirotaRow {
    pub state_id: usize,
    pub normalized: f64,
    pub max_residual: f64,
    /// Same sweep with the series cut at `K = 0` and `K = 2`.
    pub normalized_k0: f64,
    pub normalized_k2: f64,
}

pub fn verify_hirota(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let doc = load_master(&w, cfg)?;
    let sampler = cfg.sampler();
    let u_base = C64::new(doc.u_base, 0.0);
    let full = doc.masters(doc.truncation)?;
    let k0 = doc.masters(Truncation::Fixed(0))?;
    let k2 = doc.masters(Truncation::Fixed(2))?;
    let mut rows = Vec::new();
    for (((row, m), m0), m2) in doc.states.iter().zip(&full).zip(&k0).zip(&k2) {
        let rep = m.hirota_check(&sampler, u_base, EXEC).map_err(compute)?;
        rows.push(HirotaRow {
            state_id: row.state_id,
            normalized: rep.normalized,
            max_residual: rep.max_residual,
            normalized_k0: m0.hirota_check(&sampler, u_base, EXEC).map_err(compute)?.normalized,
            normalized_k2: m2.hirota_check(&sampler, u_base, EXEC).map_err(compute)?.normalized,
        });
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.state_id.to_string(),
                num(r.normalized),
                num(r.max_residual),
                num(r.normalized_k0),
                num(r.normalized_k2),
            ]
        })
        .collect();
    w.write_csv(
        "hirota.csv",
        &["state", "normalized", "max_residual", "normalized_k0", "normalized_k2"],
        &table,
    )?;
    w.write_json("hirota.json", &rows)?;
    let checks = vec![
        Check::at_most(
            "normalized Hirota residual",
            Some(4),
            rows.iter().map(|r| r.normalized).fold(0.0, f64::max),
            1e-6,
        ),
        Check::holds("at least 200 samples", Some(4), sampler.n_samples >= 200),
        Check::above(
            "residual with K = 0",
            Some(4),
            rows.iter().map(|r| r.normalized_k0).fold(f64::INFINITY, f64::min),
            1e-3,
        ),
    ];
    w.finish(VERIFY_HIROTA, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureDoc {
    pub fixture: String,
    pub report: Option<SweepReport>,
    /// Residual of `τ = t_1` at `z = (1, 2, 3)`.
    pub value: Option<C64>,
}

pub fn verify_fixture(cfg: &RunConfig, fixture: Fixture) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let sampler = cfg.sampler();
    let one = C64::new(1.0, 0.0);
    let (name, doc, check) = match fixture {
        Fixture::Constant => {
            let rep = hirota::sweep_check(&ConstantTau(C64::new(2.0, -1.0)), &sampler, EXEC).map_err(compute)?;
            let check = Check::at_most("constant tau", Some(8), rep.max_residual, 1e-14);
            (
                "constant",
                FixtureDoc {
                    fixture: "constant".into(),
                    report: Some(rep),
                    value: None,
                },
                check,
            )
        }
        Fixture::Exponential => {
            let tau = ExponentialTau::new(C64::new(0.8, 0.3), 40);
            let rep = hirota::sweep_check(&tau, &sampler, EXEC).map_err(compute)?;
            let check = Check::at_most("exponential tau", Some(8), rep.normalized, 1e-10);
            (
                "exponential",
                FixtureDoc {
                    fixture: "exponential".into(),
                    report: Some(rep),
                    value: None,
                },
                check,
            )
        }
        Fixture::Linear => {
            let r = hirota::residual_shift(&LinearT1Tau, &Times::zero(1), [one, 2.0 * one, 3.0 * one], one)
                .map_err(compute)?;
            let check = Check::at_most("tau = t1 gives 2", Some(8), (r.raw - 2.0).norm(), 1e-12);
            (
                "linear",
                FixtureDoc {
                    fixture: "linear".into(),
                    report: None,
                    value: Some(r.raw),
                },
                check,
            )
        }
    };
    w.write_json(&format!("hirota_fixture_{name}.json"), &doc)?;
    w.finish(
        &format!("{VERIFY_HIROTA}-{name}"),
        cfg.hash(),
        vec![check],
        start.elapsed().as_secs_f64(),
    )
}

// -------------------------------------------------------------- zeros-flow

pub fn zeros_flow(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    cfg.require_distinct_theta(ZEROS_FLOW)?;
    let mut w = ws(cfg);
    let doc = load_master(&w, cfg)?;
    let masters = doc.masters(doc.truncation)?;
    let steps = cfg.steps();
    let opts = TrackOptions::default();
    let items: Vec<(usize, &MasterT)> = doc.states.iter().map(|r| r.state_id).zip(&masters).collect();
    let trajectories = EXEC
        .map(&items, |(id, m)| {
            rsflow::track(m, *id, cfg.rs.t1_range[0], cfg.rs.h, steps, &opts)
        })
        .into_iter()
        .collect::<Result<Vec<Trajectory>, _>>()
        .map_err(compute)?;
    let table: Vec<Vec<String>> = trajectories
        .iter()
        .flat_map(|tr| {
            tr.grid.iter().zip(&tr.positions).flat_map(move |(t, pos)| {
                pos.iter().enumerate().map(move |(j, u)| {
                    let [re, im] = cnum(*u);
                    vec![tr.state_id.to_string(), num(*t), j.to_string(), re, im]
                })
            })
        })
        .collect();
    w.write_csv(
        "trajectory.csv",
        &["eigenstate", "t1", "particle", "re_u", "im_u"],
        &table,
    )?;
    let truncated = trajectories.iter().filter(|t| t.truncated.is_some()).count();
    w.write_json("trajectory.json", &trajectories)?;
    let checks = vec![Check::at_most("truncated trajectories", Some(6), truncated as f64, 0.0)];
    w.finish(ZEROS_FLOW, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ---------------------------------------------------------------- rs-check

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RsRow {
    pub state_id: usize,
    pub calibration: Option<rsflow::EtaCalibration>,
    pub calibration_error: Option<String>,
    /// Order check at the calibrated `η`.
    pub order: Option<rsflow::OrderCheck>,
    /// Order check at twice the calibrated `η`.
    pub wrong_eta: Option<rsflow::OrderCheck>,
    /// Whether the force law with the bare `(u_i - u_k)^2 - η^2` denominator
    /// fails calibration, as it should.
    pub printed_law_rejected: bool,
}

pub fn rs_check(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    cfg.require_distinct_theta(RS_CHECK)?;
    let mut w = ws(cfg);
    let trajectories: Vec<Trajectory> = w.read_json("trajectory.json", ZEROS_FLOW)?;
    if trajectories
        .iter()
        .any(|t| (t.h - cfg.rs.h).abs() > 1e-15 || t.positions.first().map(|p| p.len()) != Some(cfg.chain.l))
    {
        return Err(CliError::Stale {
            artifact: "trajectory.json".into(),
            producer: ZEROS_FLOW,
            reason: "step or chain length differs".into(),
        });
    }
    let candidates = &cfg.rs.eta_candidates;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for tr in &trajectories {
        let (calibration, calibration_error) = match rsflow::calibrate_eta(tr, ForceLaw::Rational, candidates) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let mut order = None;
        let mut wrong_eta = None;
        if let Some(c) = &calibration {
            let params = RsParams::new(c.chosen);
            order = Some(rsflow::order_check(tr, &params).map_err(compute)?);
            wrong_eta = Some(rsflow::order_check(tr, &RsParams::new(2.0 * c.chosen)).map_err(compute)?);
            for traj in [tr.clone(), tr.subsample(2)] {
                let res = rsflow::rs_residual(&traj, &params).map_err(compute)?;
                for (t, vals) in res.t1.iter().zip(&res.values) {
                    for (i, v) in vals.iter().enumerate() {
                        table.push(vec![
                            tr.state_id.to_string(),
                            num(*t),
                            i.to_string(),
                            num(v.norm()),
                            num(res.h),
                        ]);
                    }
                }
            }
        }
        rows.push(RsRow {
            state_id: tr.state_id,
            calibration,
            calibration_error,
            order,
            wrong_eta,
            printed_law_rejected: rsflow::calibrate_eta(tr, ForceLaw::AsPrinted, candidates).is_err(),
        });
    }
    w.write_csv(
        "rs_residual.csv",
        &["eigenstate", "t1", "particle", "abs_residual", "h"],
        &table,
    )?;
    w.write_json("rs.json", &rows)?;
    let ratios: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.order.iter().flat_map(|o| o.particle_ratios.iter().copied()))
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wrong = rows
        .iter()
        .filter_map(|r| r.wrong_eta.as_ref().map(|o| o.fine))
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::holds(
            "eta calibrated for every state",
            Some(6),
            rows.iter().all(|r| r.calibration.is_some()),
        ),
        Check::above("smallest order ratio", Some(6), lo, 3.2),
        Check::at_most("largest order ratio", Some(6), hi, 4.8),
        Check::above("residual at doubled eta", Some(6), wrong, 1e-3),
    ];
    w.finish(RS_CHECK, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ------------------------------------------------------ inverse-velocities

pub fn inverse_velocities(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    cfg.require_distinct_theta(INVERSE)?;
    let mut w = ws(cfg);
    let doc = load_bethe(&w, cfg)?;
    let spec = cfg.spec();
    let rep = rsflow::inverse_problem_report(&spec, &doc.states(), cfg.rs.fd_step, EXEC).map_err(compute)?;
    let table: Vec<Vec<String>> = rep
        .rows
        .iter()
        .flat_map(|r| {
            (0..r.positions.len()).map(move |j| {
                let mut row = vec![r.state_id.to_string(), r.m.to_string(), j.to_string()];
                row.extend(cnum(r.positions[j]));
                row.extend(cnum(r.velocities[j]));
                row.extend(cnum(r.fd_velocities[j]));
                row
            })
        })
        .collect();
    w.write_csv(
        "inverse.csv",
        &[
            "state", "M", "particle", "re_u", "im_u", "re_v", "im_v", "re_v_fd", "im_v_fd",
        ],
        &table,
    )?;
    let checks = vec![
        Check::at_most("spread of initial positions", Some(7), rep.position_spread, 1e-10),
        Check::above("velocity separation", Some(7), rep.min_velocity_separation, 1e-8),
        Check::at_most(
            "closed form vs finite differences",
            Some(7),
            rep.max_velocity_fd_error,
            1e-6,
        ),
    ];
    w.write_json("inverse.json", &rep)?;
    w.finish(INVERSE, cfg.hash(), checks, start.elapsed().as_secs_f64())
}

// ------------------------------------------------------------------ report

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The configured chain does not exercise this criterion.
    NotCovered,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionRow {
    pub id: u8,
    pub status: Status,
    /// Where the checks came from: pipeline commands, or a self-contained
    /// run for criteria that do not depend on the configured chain.
    pub source: String,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDoc {
    pub config_hash: String,
    /// Config hash recorded by each pipeline command.
    pub commands: Vec<(String, String)>,
    pub criteria: Vec<CriterionRow>,
}

impl ReportDoc {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }
}

type Standalone = fn(Execution) -> criteria::Criterion;

pub fn report(cfg: &RunConfig) -> Result<(Manifest, ReportDoc), CliError> {
    let start = Instant::now();
    let mut w = ws(cfg);
    let manifests = PIPELINE
        .iter()
        .map(|c| w.read_manifest(c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut criteria_rows = Vec::new();
    let mut table = Vec::new();
    for m in &manifests {
        for c in &m.checks {
            table.push(vec![
                m.command.clone(),
                c.name.clone(),
                c.criterion.map(|x| x.to_string()).unwrap_or_default(),
                c.value.map(num).unwrap_or_default(),
                format!("{:?}", c.relation),
                num(c.threshold),
                c.passed.to_string(),
            ]);
        }
    }
    let standalone: [(u8, Standalone); 3] = [
        (8, criteria::hirota_fixtures),
        (9, criteria::schur_layer),
        (10, criteria::nested),
    ];
    for id in 1..=10u8 {
        let (checks, source) = match standalone.iter().find(|(k, _)| *k == id) {
            Some((_, run)) => {
                let r = run(EXEC);
                let check = Check::holds(&r.detail, Some(id), r.passed);
                (vec![check], "standalone".to_string())
            }
            None => {
                let mut sources = Vec::new();
                let mut checks = Vec::new();
                for m in &manifests {
                    let own: Vec<Check> = m.checks.iter().filter(|c| c.criterion == Some(id)).cloned().collect();
                    if !own.is_empty() {
                        sources.push(m.command.clone());
                        checks.extend(own);
                    }
                }
                (checks, sources.join(","))
            }
        };
        let status = if checks.is_empty() {
            Status::NotCovered
        } else if checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        };
        criteria_rows.push(CriterionRow {
            id,
            status,
            source,
            checks,
        });
    }
    let doc = ReportDoc {
        config_hash: cfg.hash(),
        commands: manifests
            .iter()
            .map(|m| (m.command.clone(), m.config_hash.clone()))
            .collect(),
        criteria: criteria_rows,
    };
    w.write_csv(
        "report.csv",
        &[
            "command",
            "check",
            "criterion",
            "value",
            "relation",
            "threshold",
            "passed",
        ],
        &table,
    )?;
    let summary: Vec<Vec<String>> = doc
        .criteria
        .iter()
        .map(|c| vec![c.id.to_string(), format!("{:?}", c.status), c.source.clone()])
        .collect();
    w.write_csv("criteria.csv", &["criterion", "status", "source"], &summary)?;
    w.write_json("report.json", &doc)?;
    let checks = doc
        .criteria
        .iter()
        .filter(|c| c.status != Status::NotCovered)
        .map(|c| Check::holds(&format!("criterion {}", c.id), Some(c.id), c.status == Status::Pass))
        .collect();
    let manifest = w.finish("report", cfg.hash(), checks, start.elapsed().as_secs_f64())?;
    Ok((manifest, doc))
}
