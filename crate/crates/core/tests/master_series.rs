use bethe_tau::bethe::{self, BetheState, SolveOptions};
use bethe_tau::fusion::ConventionRecord;
use bethe_tau::hirota::{lattice_grid, residual_lattice, residual_shift, LatticePoint, SamplerConfig};
use bethe_tau::master::{MasterT, MasterTau, Truncation};
use bethe_tau::spinchain::ChainSpec;
use bethe_tau::symfun::Times;
use bethe_tau::Execution;
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn all_states(spec: &ChainSpec) -> Vec<BetheState> {
    let mut out = vec![BetheState::vacuum(spec)];
    for m in 1..=spec.l / 2 {
        let report = bethe::solve(spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
        out.extend(report.states);
        for roots in report.singular {
            out.push(BetheState {
                l: spec.l,
                m,
                levels: vec![roots],
                residual_norm: 0.0,
                energy: None,
                quantum_numbers: None,
            });
        }
    }
    out
}

fn masters(spec: &ChainSpec) -> Vec<MasterT> {
    all_states(spec)
        .iter()
        .map(|s| {
            MasterT::new(s, spec, &ConventionRecord::default(), Truncation::default())
                .unwrap_or_else(|e| panic!("{:?} {:?}: {e}", spec.theta, s.roots()))
        })
        .collect()
}

#[test]
fn hirota_holds_for_every_state_up_to_four_sites() {
    let cfg = SamplerConfig {
        n_samples: 60,
        ..SamplerConfig::default()
    };
    let specs = [
        ChainSpec::homogeneous(3, 1.0),
        ChainSpec::homogeneous(4, 1.0),
        ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0), c(0.2, 0.0)]),
    ];
    for spec in specs {
        for m in masters(&spec) {
            let r = m.hirota_check(&cfg, c(0.1, 0.0), Execution::Parallel).unwrap();
            assert!(
                r.normalized < 1e-9,
                "L = {}, roots {:?}: {}",
                spec.l,
                m.roots,
                r.normalized
            );
        }
    }
}

#[test]
fn zeros_start_at_theta_and_separate_states() {
    let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0)]);
    let ms = masters(&spec);
    let t = Times::zero(1).with(1, c(0.02, 0.0));
    let mut moved = Vec::new();
    for m in &ms {
        let z0 = m.zeros(&Times::zero(1), None).unwrap();
        for (a, b) in z0.iter().zip(&spec.theta) {
            assert!((a - b).norm() < 1e-10);
        }
        moved.push(m.zeros(&t, None).unwrap());
    }
    for i in 0..moved.len() {
        for j in i + 1..moved.len() {
            let d = moved[i]
                .iter()
                .zip(&moved[j])
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(d > 1e-6);
        }
    }
}

#[test]
fn linear_response_of_zeros() {
    let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0)]);
    let dphi = spec.phi().derivative();
    for m in masters(&spec) {
        let eps = 1e-5;
        let z = m.zeros(&Times::zero(1).with(1, c(eps, 0.0)), None).unwrap();
        for (zj, &th) in z.iter().zip(&spec.theta) {
            let predicted = -eps * m.one_row(1).eval(th) / dphi.eval(th);
            assert!(
                (zj - th - predicted).norm() < 1e-3 * predicted.norm(),
                "{zj} {th} {predicted}"
            );
        }
    }
}

#[test]
fn lattice_form_agrees_with_shift_form() {
    let spec = ChainSpec::homogeneous(2, 1.0);
    for m in masters(&spec) {
        let tau = MasterTau {
            master: &m,
            u_base: c(0.1, 0.0),
            delta: m.convention.t0_step,
        };
        let base = Times::zero(4).with(1, c(0.02, 0.01)).with(3, c(-0.01, 0.0));
        let z = [c(0.05, 0.0), c(-0.03, 0.04), c(0.02, -0.06)];
        let one = c(1.0, 0.0);
        let grid = lattice_grid(&tau, &base, z, one, 1).unwrap();
        let lat = residual_lattice(&grid, LatticePoint([0, 0, 0]), z).unwrap();
        let cont = residual_shift(&tau, &base, z, one).unwrap();
        assert!((lat.raw - cont.raw).norm() < 1e-8);
    }
}

#[test]
fn delta_calibration_prefers_two_i() {
    let spec = ChainSpec::homogeneous(2, 1.0);
    let ms = masters(&spec);
    let cfg = SamplerConfig {
        n_samples: 30,
        ..SamplerConfig::default()
    };
    let cal = bethe_tau::master::calibrate_delta(
        &ms,
        &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 2.0)],
        &cfg,
        c(0.1, 0.0),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(cal.chosen, c(0.0, 2.0));
}
