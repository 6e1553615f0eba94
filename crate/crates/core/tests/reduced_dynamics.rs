use eit_memory::control::{default_cos_theta_start, sech_matched_cos_theta, solve_impedance_matching};
use eit_memory::reduced::{fit_timing_loss, integrate_dark_state, loading_output, quadrature_solution, timing_sensitivity};
use eit_memory::{make_gaussian, make_hyper_gaussian, make_sech, SystemParams, TimeGrid};

fn params() -> SystemParams {
    SystemParams::from_dimensionless(4.0, 30.0, 1.0, 0.0, 1, 1.0).unwrap()
}

fn grid() -> TimeGrid {
    TimeGrid::new(-10.0, 40.0, 8192).unwrap()
}

#[test]
fn matched_sech_population_follows_tanh_law() {
    let p = params();
    let pulse = make_sech(grid(), 1.0, 0.0).unwrap();
    let s = sech_matched_cos_theta(&p, grid()).unwrap();
    let t = integrate_dark_state(&p, &pulse, &s).unwrap();
    let mut worst: f64 = 0.0;
    for (i, time) in grid().times().iter().enumerate() {
        if time.abs() <= 5.0 {
            let law = 0.5 * (1.0 + (2.0 * time).tanh());
            worst = worst.max((t.population[i] - law).abs());
        }
    }
    assert!(worst < 1e-3, "{worst}");
    let i0 = grid().nearest_index(0.0);
    let law0 = 0.5 * (1.0 + (2.0 * grid().time(i0)).tanh());
    assert!((t.population[i0] - law0).abs() < 1e-6);
    assert!((t.final_amplitude().norm_sqr() - 1.0).abs() < 1e-3);
}

#[test]
fn integrator_and_quadrature_agree() {
    let p = params();
    let s = sech_matched_cos_theta(&p, grid()).unwrap();
    for pulse in [
        make_sech(grid(), 1.0, 0.0).unwrap(),
        make_gaussian(grid(), 1.0, 0.0).unwrap(),
        make_hyper_gaussian(grid(), 1.0, 0.0).unwrap(),
    ] {
        let a = integrate_dark_state(&p, &pulse, &s).unwrap();
        let b = quadrature_solution(&p, &pulse, &s).unwrap();
        let err = a.dark.iter().zip(&b.dark).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{:?}: {err}", pulse.family);
        assert!(b.warnings.is_empty());
    }
}

#[test]
fn pulse_shape_robustness() {
    let p = params();
    let s = sech_matched_cos_theta(&p, grid()).unwrap();
    let gauss = integrate_dark_state(&p, &make_gaussian(grid(), 1.0, 0.0).unwrap(), &s).unwrap();
    let hyper = integrate_dark_state(&p, &make_hyper_gaussian(grid(), 1.0, 0.0).unwrap(), &s).unwrap();
    let (dg, dh) = (gauss.final_amplitude().norm(), hyper.final_amplitude().norm());
    assert!((dg - 0.9942).abs() < 1e-3, "{dg}");
    assert!((dh - 0.9778).abs() < 1e-3, "{dh}");
}

#[test]
fn timing_loss_is_quadratic() {
    let p = params();
    let pulse = make_sech(grid(), 1.0, 0.0).unwrap();
    let s = sech_matched_cos_theta(&p, grid()).unwrap();
    let deltas = [0.01, 0.02, 0.03, 0.05, 0.07, 0.1];
    let amps = timing_sensitivity(&p, &pulse, &s, &deltas).unwrap();
    let (_, exponent) = fit_timing_loss(&deltas, &amps).unwrap();
    assert!((exponent - 2.0).abs() < 0.1, "{exponent}");
    assert!(1.0 - amps[0] < 1.0 - amps[3]);

    let small = timing_sensitivity(&p, &pulse, &s, &[0.0, 0.005, 0.01]).unwrap();
    assert!((small[0] - 1.0).abs() < 1e-4);
    let ratio = (1.0 - small[2]) / (1.0 - small[1]);
    assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    let early = timing_sensitivity(&p, &pulse, &s, &[-0.05]).unwrap();
    assert!(early[0] < small[0]);
}

#[test]
fn probability_ledger_closes() {
    let p = params();
    let s = sech_matched_cos_theta(&p, grid()).unwrap();
    for pulse in [make_sech(grid(), 1.0, 0.0).unwrap(), make_gaussian(grid(), 1.0, 0.0).unwrap()] {
        let t = integrate_dark_state(&p, &pulse, &s).unwrap();
        let worst = t.probability_ledger().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }
}

#[test]
fn matched_loading_reflects_nothing() {
    let p = params();
    let pulse = make_sech(grid(), 1.0, 0.0).unwrap();
    let analytic = loading_output(&p, &pulse, &sech_matched_cos_theta(&p, grid()).unwrap()).unwrap();
    assert!(analytic.reflected_energy() < 1e-4, "{}", analytic.reflected_energy());
    let solved = solve_impedance_matching(&p, &pulse, default_cos_theta_start(&p)).unwrap();
    let numeric = loading_output(&p, &pulse, &solved).unwrap();
    assert!(numeric.reflected_energy() < 1e-4, "{}", numeric.reflected_energy());
}

#[test]
fn solved_schedules_store_non_sech_pulses() {
    // the steep hyper-Gaussian front forces cos(theta) = 1 for longer at small gamma T
    for (gamma_t, floor) in [(4.0, 0.98), (16.0, 0.999)] {
        let p = SystemParams::from_dimensionless(gamma_t, 30.0, 1.0, 0.0, 1, 1.0).unwrap();
        for pulse in [make_gaussian(grid(), 1.0, 0.0).unwrap(), make_hyper_gaussian(grid(), 1.0, 0.0).unwrap()] {
            let s = solve_impedance_matching(&p, &pulse, default_cos_theta_start(&p)).unwrap();
            let t = integrate_dark_state(&p, &pulse, &s).unwrap();
            let stored = t.final_amplitude().norm_sqr();
            assert!(stored > floor, "{gamma_t} {:?}: {stored}", pulse.family);
        }
    }
}
