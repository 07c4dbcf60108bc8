use bethe_tau::bethe::{self, BetheState, SolveOptions};
use bethe_tau::fusion::{self, ConventionRecord};
use bethe_tau::poly::ComplexPolynomial;
use bethe_tau::spinchain::{self, ChainSpec, JointState};
use bethe_tau::symfun::partitions_up_to;
use bethe_tau::Execution;
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Vacuum, regular solutions and physical singular ones.
fn eigenstates(spec: &ChainSpec) -> Vec<BetheState> {
    let mut out = vec![BetheState::vacuum(spec)];
    for m in 1..=spec.l / 2 {
        let rep = bethe::solve(spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
        out.extend(rep.states);
        out.extend(rep.singular.into_iter().map(|roots| BetheState {
            l: spec.l,
            m,
            levels: vec![roots],
            residual_norm: 0.0,
            energy: None,
            quantum_numbers: None,
        }));
    }
    out
}

fn closest<'a>(labels: &'a [JointState], m: usize, t1: &ComplexPolynomial) -> &'a JointState {
    labels
        .iter()
        .filter(|j| j.m == m)
        .min_by(|a, b| (&a.t_poly - t1).scale().total_cmp(&(&b.t_poly - t1).scale()))
        .unwrap()
}

fn small_specs() -> Vec<ChainSpec> {
    vec![
        ChainSpec::homogeneous(2, 1.0),
        ChainSpec::homogeneous(3, 1.0),
        ChainSpec::homogeneous(4, 1.0),
        ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0), c(0.2, 0.0)]),
    ]
}

#[test]
fn tq_relation_holds_with_diagonalized_transfer_matrix() {
    let specs = [
        ChainSpec::homogeneous(5, 1.0),
        ChainSpec::homogeneous(6, 1.0),
        ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0), c(0.2, 0.0)]),
    ];
    for spec in specs {
        let labels = spinchain::simultaneous_labels(&spec, &[c(0.0, 1.0)], Execution::Parallel).unwrap();
        for s in eigenstates(&spec) {
            let t1 = bethe::transfer_eigenvalue(&s, &spec, 1e-8).unwrap();
            let ed = &closest(&labels, s.roots().len(), &t1).t_poly;
            let res = bethe::tq_residual(ed, &s, &spec).unwrap();
            let scale = (&spec.a_poly() * &s.q().shifted(c(0.0, -2.0))).scale();
            assert!(res.scale() <= 1e-8 * scale, "L = {}: {:e}", spec.l, res.scale() / scale);
        }
    }
}

#[test]
fn perturbed_root_breaks_tq_relation() {
    let spec = ChainSpec::homogeneous(4, 1.0);
    let rep = bethe::solve(&spec, 2, &SolveOptions::default(), Execution::Sequential).unwrap();
    let s = &rep.states[0];
    let t1 = bethe::transfer_eigenvalue(s, &spec, 1e-8).unwrap();
    let mut moved = s.clone();
    moved.levels[0][0] += 1e-3;
    let res = bethe::tq_residual(&t1, &moved, &spec).unwrap();
    let scale = (&spec.a_poly() * &s.q()).scale();
    let rel = res.scale() / scale;
    assert!(rel > 1e-5 && rel < 1e-1, "{rel}");
}

#[test]
fn three_row_diagrams_vanish() {
    let conv = ConventionRecord::default();
    for spec in small_specs() {
        for s in eigenstates(&spec) {
            // unit: the largest one-row eigenvalue entering the determinants
            let norm = (0..=7)
                .map(|n| fusion::ts_normalized(n, &s, &spec, &conv).unwrap().scale())
                .fold(0.0, f64::max);
            for lam in partitions_up_to(6, 6).into_iter().filter(|l| l.rows() >= 3) {
                let t = fusion::t_lambda(&lam, &s, &spec, &conv).unwrap();
                assert!(
                    t.scale() <= 1e-8 * norm,
                    "{lam} at L = {}: {:e}",
                    spec.l,
                    t.scale() / norm
                );
            }
        }
    }
}

#[test]
fn tsystem_holds_including_singular_states() {
    let conv = ConventionRecord::default();
    for spec in small_specs() {
        let phi = spec.phi();
        for s in eigenstates(&spec) {
            for n in 1..=6 {
                let lhs = fusion::tsystem_lhs(n, &s, &spec, &conv).unwrap();
                let rhs = &phi.shifted(-conv.eta) * &phi.shifted(conv.eta * n as f64);
                // the left side is a difference of products of size |T_s|^2
                let ts = fusion::ts_normalized(n, &s, &spec, &conv).unwrap();
                let unit = (&ts * &ts.shifted(-conv.eta)).scale();
                assert!((&lhs - &rhs).scale() <= 1e-9 * unit, "s = {n}, L = {}", spec.l);
            }
        }
    }
}

#[test]
fn tsystem_recursion_matches_direct_sums() {
    let conv = ConventionRecord::default();
    let spec = ChainSpec::inhomogeneous(1.0, vec![c(0.3, 0.0), c(-0.7, 0.0), c(1.1, 0.0)]);
    for s in eigenstates(&spec) {
        let t1 = fusion::ts_normalized(1, &s, &spec, &conv).unwrap();
        for n in 2..=8 {
            let direct = fusion::ts_normalized(n, &s, &spec, &conv).unwrap();
            let rec = fusion::ts_from_tsystem(n, &t1, &spec, conv.eta).unwrap();
            assert!((&direct - &rec).scale() <= 1e-9 * direct.scale());
        }
    }
}

#[test]
fn singular_state_one_row_family_is_polynomial() {
    let spec = ChainSpec::homogeneous(4, 1.0);
    let conv = ConventionRecord::default();
    let singular = BetheState {
        l: 4,
        m: 2,
        levels: vec![vec![c(0.0, 1.0), c(0.0, -1.0)]],
        residual_norm: 0.0,
        energy: None,
        quantum_numbers: None,
    };
    assert!(fusion::is_singular(singular.roots(), conv.eta));
    for n in 0..=12 {
        let poly = fusion::ts_normalized(n, &singular, &spec, &conv).unwrap();
        let interp = fusion::ts_interpolated(n, &singular, &spec, &conv).unwrap();
        assert_eq!(poly.degree(), Some(4));
        assert!((&poly - &interp).scale() <= 1e-9 * poly.scale(), "s = {n}");
    }
}
