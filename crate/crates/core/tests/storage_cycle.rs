use eit_memory::cycle::{
    fit_sech, fit_storage_decay, hold_sweep, run_cycle, run_polarization_cycle, CyclePlan, PolarizationState,
};
use eit_memory::{make_sech, sech_matched_cos_theta, SystemParams, TimeGrid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(gamma_c_t: f64, n_atoms: u64) -> SystemParams {
    SystemParams::from_dimensionless(4.0, 30.0, 1.0, gamma_c_t, n_atoms, 1.0).unwrap()
}

#[test]
fn mirrored_sech_release_is_a_sech() {
    let plan = CyclePlan::sech(params(0.0, 1), 4097, 10.0).unwrap();
    let pulse = make_sech(plan.load_schedule.grid, 1.0, 0.0).unwrap();
    let r = run_cycle(&plan, &pulse).unwrap();
    let fit = fit_sech(&r.output.waveform).unwrap();
    assert!(fit.residual < 1e-3, "{fit:?}");
    assert!((fit.width - 1.0).abs() < 1e-2, "{fit:?}");
    assert!((r.ledger.released - r.release_amplitude.norm_sqr()).abs() < 1e-6);
    assert!((r.ledger.total() - 1.0).abs() < 1e-3, "{:?}", r.ledger);
}

#[test]
fn hold_decay_rate_is_independent_of_atom_number() {
    let holds = [0.0, 2.0, 4.0, 8.0];
    for n in [1u64, 100, 10_000] {
        let p = params(0.2, n);
        let grid = TimeGrid::new(-10.0, 10.0, 4097).unwrap();
        let load = sech_matched_cos_theta(&p, grid).unwrap();
        let pulse = make_sech(grid, 1.0, 0.0).unwrap();
        let released = hold_sweep(p, &load, &pulse, &holds).unwrap();
        let rate = fit_storage_decay(&holds, &released).unwrap();
        assert!((rate - 0.2).abs() < 0.01 * 0.2, "N = {n}: {rate}");
    }
}

#[test]
fn random_qubits_survive_storage() {
    let plan = CyclePlan::sech(params(0.05, 1), 4097, 10.0).unwrap();
    let pulse = make_sech(plan.load_schedule.grid, 1.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let q = PolarizationState::normalized(a, b).unwrap();
        let r = run_polarization_cycle(&plan, &pulse, &q).unwrap();
        assert!(1.0 - r.fidelity < 1e-4, "{q:?}: {}", r.fidelity);
        assert!(r.phase_error.abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn stored_ratio_matches_input_ratio(theta in 0.05f64..1.5, phase in -3.0f64..3.0) {
        let plan = CyclePlan::sech(params(0.0, 1), 2049, 1.0).unwrap();
        let pulse = make_sech(plan.load_schedule.grid, 1.0, 0.0).unwrap();
        let q = PolarizationState::new(Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phase)).unwrap();
        let r = run_polarization_cycle(&plan, &pulse, &q).unwrap();
        let ratio = r.stored_plus / r.stored_minus;
        let expected = q.alpha / q.beta;
        prop_assert!((ratio - expected).norm() < 1e-9 * expected.norm().max(1.0));
    }
}
