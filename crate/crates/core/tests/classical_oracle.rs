use eit_memory::classical::{roundtrip_simulate, schedule_matching_residual, MirrorCavity};
use eit_memory::control::default_cos_theta_start;
use eit_memory::{make_pulse, solve_impedance_matching, PulseFamily, SystemParams, TimeGrid};

#[test]
fn recursion_agrees_with_rate_equation_for_short_round_trips() {
    let grid = TimeGrid::with_spacing(-10.0, 0.01, 3001).unwrap();
    for family in [PulseFamily::Sech, PulseFamily::Gaussian] {
        let pulse = make_pulse(family, grid, 1.0, 0.0).unwrap();
        let cav = MirrorCavity::lossless(0.01, 0.01).unwrap();
        let rt = roundtrip_simulate(&cav, pulse.waveform()).unwrap();
        assert!(rt.resampled.is_none());
        assert!(rt.max_relative_deviation() < 1e-2, "{family:?}: {}", rt.max_relative_deviation());
    }
}

#[test]
fn solved_schedules_close_the_classical_condition() {
    let grid = TimeGrid::new(-10.0, 40.0, 8192).unwrap();
    for gamma_t in [4.0, 8.0, 16.0] {
        let p = SystemParams::from_dimensionless(gamma_t, 30.0, 1.0, 0.0, 1, 1.0).unwrap();
        for family in [PulseFamily::Sech, PulseFamily::Gaussian, PulseFamily::HyperGaussian] {
            let pulse = make_pulse(family, grid, 1.0, 0.0).unwrap();
            let s = solve_impedance_matching(&p, &pulse, default_cos_theta_start(&p)).unwrap();
            let res = schedule_matching_residual(&p, &s, pulse.waveform()).unwrap();
            assert!(res.evaluated() > 100, "{family:?} at {gamma_t}");
            assert!(res.max_abs() < 1e-6, "{family:?} at {gamma_t}: {}", res.max_abs());
        }
    }
}
