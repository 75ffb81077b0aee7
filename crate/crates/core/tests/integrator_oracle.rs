mod common;

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rabi_core::drive::{DriveSpec, ModelParams, SignConvention};
use rabi_core::hamiltonian::{Form, HamiltonianBuilder};
use rabi_core::hilbert::{prepare_state, CavityPrep, CompositeState};
use rabi_core::integrator::{Evolver, IntegratorConfig};

use common::{distance, expm_propagate, random_hermitian, random_state, DenseGenerator};

fn final_state<G: rabi_core::hamiltonian::Generator>(
    g: &G,
    psi0: &[C64],
    t: f64,
    rel_tol: f64,
) -> Vec<C64> {
    let cfg = IntegratorConfig {
        rel_tol,
        ..IntegratorConfig::default()
    };
    let mut ev = Evolver::new(g, &CompositeState::new(psi0.to_vec().into()), &cfg).unwrap();
    ev.advance_to(t).unwrap();
    let s = ev.state();
    let scale = s.log_norm_accumulated.exp();
    s.amplitudes.iter().map(|z| z * scale).collect()
}

#[test]
fn matches_matrix_exponential() {
    for (dim, seed) in [(3, 1), (8, 2), (16, 3)] {
        let h = random_hermitian(dim, seed);
        let psi0 = random_state(dim, seed);
        let exact = expm_propagate(&h, &psi0, 20.0);
        for split in [false, true] {
            let psi = final_state(&DenseGenerator::new(h.clone(), split), &psi0, 20.0, 1e-9);
            let err = distance(&psi, &exact);
            assert!(err < 1e-8, "dim {dim} split {split}: {err:e}");
        }
    }
}

#[test]
fn halving_tolerance_does_not_increase_error() {
    let h = random_hermitian(10, 42);
    let psi0 = random_state(10, 42);
    let exact = expm_propagate(&h, &psi0, 30.0);
    let errs: Vec<f64> = (0..8)
        .map(|k| {
            distance(
                &final_state(
                    &DenseGenerator::new(h.clone(), false),
                    &psi0,
                    30.0,
                    1e-5 / 2f64.powi(k),
                ),
                &exact,
            )
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0], "{errs:?}");
    }
}

/// Constant non-Hermitian drive: the propagator is still exp(−iHt), with the
/// norm growth carried in the log-norm accumulator.
#[test]
fn non_hermitian_constant_drive_matches_expm() {
    let p = ModelParams::new(1.0, 0.8, 6).unwrap();
    let d = DriveSpec::elliptical(0.4, 0.0, 1.0, FRAC_PI_2, FRAC_PI_2, SignConvention::ExpPlus);
    let b = HamiltonianBuilder::new(p, d, Form::FullRabi).unwrap();
    assert!(!b.is_hermitian());
    let h = b.build(0.0);
    let dense: Vec<Vec<C64>> = (0..h.dim())
        .map(|i| (0..h.dim()).map(|j| h.get(i, j)).collect())
        .collect();
    let s0 = prepare_state(0.7, 0.2, CavityPrep::Fock { n: 1 }, p.trunc()).unwrap();
    let psi0 = s0.amplitudes.to_vec();
    let exact = expm_propagate(&dense, &psi0, 15.0);
    let cfg = IntegratorConfig {
        renormalize_threshold: 1.5,
        ..IntegratorConfig::default()
    };
    let mut ev = Evolver::new(&b, &s0, &cfg).unwrap();
    ev.advance_to(15.0).unwrap();
    assert!(ev.renormalizations() > 0);
    let s = ev.state();
    let psi: Vec<C64> = s
        .amplitudes
        .iter()
        .map(|z| z * s.log_norm_accumulated.exp())
        .collect();
    let scale = exact.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(scale > 10.0, "norm grew only to {scale}");
    assert!(
        distance(&psi, &exact) < 1e-8 * scale,
        "{:e}",
        distance(&psi, &exact) / scale
    );
}
