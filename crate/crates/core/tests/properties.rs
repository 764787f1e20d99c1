//! Cross-module properties checked against closed-form oracles.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use boson_qpe::codes::{coherent_state, squeezed_vacuum};
use boson_qpe::crt::crt_solve;
use boson_qpe::metrics::fidelity;
use boson_qpe::noise::{apply_loss, LossChannel};
use boson_qpe::qpe::{outcome_distribution, QpeEngine, QpeSchedule};
use boson_qpe::{Complex, Complex64, FockDim, State, StateF32};
use proptest::prelude::*;

fn dim(d: usize) -> FockDim {
    FockDim::new(d).unwrap()
}

/// Standard phase-estimation outcome law for an eigenphase `phi` (in turns).
fn fejer(rounds: usize, theta: f64, phi: f64) -> f64 {
    let k = (1u64 << rounds) as f64;
    let x = theta - phi;
    let s = (PI * x).sin();
    if s.abs() < 1e-12 {
        1.0
    } else {
        ((k * PI * x).sin() / (k * s)).powi(2)
    }
}

#[test]
fn squeezed_vacuum_population_ratio() {
    let r: f64 = 0.5;
    let psi = squeezed_vacuum(r, dim(60)).unwrap();
    let p = psi.populations();
    assert_abs_diff_eq!(p[2] / p[0], r.tanh().powi(2) / 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p[0], 1.0 / r.cosh(), epsilon = 1e-12);
}

#[test]
fn single_precision_tracks_double() {
    let alpha = Complex64::new(1.3, -0.4);
    let psi64 = coherent_state::<f64>(alpha, dim(30)).unwrap();
    let psi32: StateF32 = coherent_state::<f32>(Complex::new(1.3, -0.4), dim(30)).unwrap();
    let s = QpeSchedule::rotation(5, 3, 1.0).unwrap();
    let d64 = outcome_distribution(&psi64, &s).unwrap();
    let d32 = outcome_distribution(&psi32, &s).unwrap();
    for (a, b) in d64.probabilities().iter().zip(d32.probabilities()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-5);
    }
    assert_abs_diff_eq!(psi32.mean_photon_number() as f64, alpha.norm_sqr(), epsilon = 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crt_reconstructs_every_residue_tuple(x in 0u64..(7 * 15 * 11)) {
        let moduli = [7u64, 15, 11];
        let residues: Vec<u64> = moduli.iter().map(|n| x % n).collect();
        prop_assert_eq!(crt_solve(&residues, &moduli).unwrap(), x);
    }

    #[test]
    fn loss_maps_coherent_to_coherent(re in -2.0f64..2.0, im in -2.0f64..2.0, chi in 0.0f64..1.0) {
        let d = dim(60);
        let alpha = Complex64::new(re, im);
        let lossy = apply_loss(&coherent_state::<f64>(alpha, d).unwrap(), &LossChannel::from_chi(chi).unwrap()).unwrap();
        let expected = coherent_state::<f64>(alpha * (-chi / 2.0).exp(), d).unwrap();
        prop_assert!((lossy.trace() - 1.0).abs() < 1e-10);
        prop_assert!((fidelity(&lossy, &expected).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fock_states_follow_the_phase_estimation_law(n in 0usize..40, modulus in 2u64..8, rounds in 1usize..7) {
        let state = State::fock(n, dim(40)).unwrap();
        let dist = outcome_distribution(&state, &QpeSchedule::rotation(rounds, modulus, 1.0).unwrap()).unwrap();
        let phi = (n as u64 % modulus) as f64 / modulus as f64;
        for (theta, p) in dist.iter() {
            prop_assert!((p - fejer(rounds, theta, phi)).abs() < 1e-10, "theta {} p {} n {}", theta, p, n);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in -1.5f64..1.5, b in -1.5f64..1.5, w in 0.05f64..0.95) {
        let d = dim(30);
        let x = coherent_state::<f64>(Complex64::new(a, 0.0), d).unwrap();
        let y = coherent_state::<f64>(Complex64::new(0.0, b), d).unwrap();
        let mixed = State::mixture(&[(w, &x), (1.0 - w, &y)]).unwrap();
        let f_xy = fidelity(&mixed, &y).unwrap();
        let f_yx = fidelity(&y, &mixed).unwrap();
        prop_assert!((f_xy - f_yx).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f_xy));
        prop_assert!((fidelity(&mixed, &mixed).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn enumerated_branches_conserve_probability(re in -2.0f64..2.0, modulus in 2u64..6, rounds in 1usize..6) {
        let psi = coherent_state::<f64>(Complex64::new(re, 0.5), dim(40)).unwrap();
        let engine = QpeEngine::new(QpeSchedule::rotation(rounds, modulus, 1.0).unwrap(), psi.dim()).unwrap();
        let total: f64 = engine.branch_probabilities(&psi).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
