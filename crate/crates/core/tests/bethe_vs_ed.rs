use bethe_tau::bethe::{self, SolveOptions};
use bethe_tau::spinchain::{self, ChainSpec};
use bethe_tau::{Execution, C64};

fn sector_energies(spec: &ChainSpec, m: usize) -> Vec<f64> {
    let h = spinchain::hamiltonian(spec).unwrap();
    spinchain::diagonalize_sector(&h, m)
        .unwrap()
        .iter()
        .map(|p| p.value.re)
        .collect()
}

#[test]
fn energies_are_in_the_ed_spectrum() {
    for l in [2usize, 4, 6] {
        let spec = ChainSpec::homogeneous(l, 1.0);
        for m in 0..=l / 2 {
            let rep = bethe::solve(&spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
            let ed = sector_energies(&spec, m);
            assert!(!rep.states.is_empty(), "L={l} M={m}");
            for s in &rep.states {
                let e = bethe::energy(s, &spec).unwrap();
                let best = ed.iter().map(|x| (x - e).abs()).fold(f64::INFINITY, f64::min);
                assert!(best <= 1e-8 * e.abs().max(1.0), "L={l} M={m} E={e} off by {best}");
                assert!(s.residual_norm <= 1e-9);
            }
            if l <= 4 {
                assert_eq!(
                    rep.states.len() + rep.singular.len(),
                    rep.highest_weight_count,
                    "L={l} M={m}"
                );
            }
            eprintln!(
                "L={l} M={m}: {} regular, {} singular, {} highest weight",
                rep.states.len(),
                rep.singular.len(),
                rep.highest_weight_count
            );
        }
    }
}

#[test]
fn inhomogeneous_states_are_complete() {
    let theta: Vec<C64> = [0.3, -0.7, 1.1, 0.2].iter().map(|&x| C64::new(x, 0.0)).collect();
    let spec = ChainSpec::inhomogeneous(1.0, theta);
    for m in 0..=2 {
        let rep = bethe::solve(&spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
        assert_eq!(rep.states.len(), rep.highest_weight_count, "M={m}");
    }
}

#[test]
fn roots_are_conjugation_symmetric() {
    let spec = ChainSpec::homogeneous(6, 1.0);
    for m in 1..=3 {
        let rep = bethe::solve(&spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
        for s in &rep.states {
            let conj: Vec<C64> = s.roots().iter().map(|v| v.conj()).collect();
            assert!(bethe::root_set_distance(s.roots(), &conj) < 1e-9);
        }
    }
}

#[test]
fn momentum_matches_translation_eigenvalue() {
    let l = 6;
    let spec = ChainSpec::homogeneous(l, 1.0);
    let shift = spinchain::cyclic_shift(l);
    let labels = spinchain::simultaneous_labels(&spec, &[C64::new(0.0, 1.0)], Execution::Parallel).unwrap();
    for m in 1..=3 {
        let rep = bethe::solve(&spec, m, &SolveOptions::default(), Execution::Parallel).unwrap();
        let block = shift.restrict(m).unwrap().matrix.adjoint();
        for s in &rep.states {
            let t1 = bethe::transfer_eigenvalue(s, &spec, 1e-8).unwrap();
            // the ED state carrying the same transfer-matrix eigenvalue
            let joint = labels
                .iter()
                .filter(|j| j.m == m)
                .min_by(|a, b| (&a.t_poly - &t1).scale().total_cmp(&(&b.t_poly - &t1).scale()))
                .unwrap();
            assert!((&joint.t_poly - &t1).scale() < 1e-8 * t1.scale());
            let phase = bethe_tau::linalg::rayleigh(&block, &joint.vector);
            assert!((phase - bethe::momentum_phase(s)).norm() < 1e-8);
        }
    }
}
