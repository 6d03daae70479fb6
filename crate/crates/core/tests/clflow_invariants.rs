use std::sync::OnceLock;

use proptest::prelude::*;
use twotime_core::clflow::{
    cl_integrate, energy_shifted, functional_if, random_band_limited, vorticity_to_velocity, ClRun, StokesDrift,
    VorticityField,
};
use twotime_core::expr::Expression;

const N: usize = 64;
const DT: f64 = 1e-3;

fn drift() -> StokesDrift {
    StokesDrift::new([0.7, -0.3]).unwrap()
}

fn random_run() -> &'static ClRun {
    static RUN: OnceLock<ClRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let w0 = random_band_limited(N, 4, 2024).unwrap();
        cl_integrate(&w0, &drift(), 1.0, DT, 100)
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn translation_oracle() {
    let w0 = VorticityField::from_expression(N, &Expression::parse("cos(x)*cos(y)").unwrap()).unwrap();
    let d = drift();
    let run = cl_integrate(&w0, &d, 1.0, DT, 1000);
    let exact = w0.translated([0.7, -0.3]);
    let err = run.last().max_diff(&exact);
    assert!(err < 1e-6, "{err}");
    assert!(!run.cfl_warning);
}

#[test]
fn steady_without_drift() {
    let w0 = VorticityField::from_expression(N, &Expression::parse("cos(x)*cos(y)").unwrap()).unwrap();
    let run = cl_integrate(&w0, &StokesDrift::new([0.0, 0.0]).unwrap(), 1.0, DT, 1000);
    let err = run.last().max_diff(&w0);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn shifted_energy_and_enstrophies_conserved() {
    let run = random_run();
    let d = drift();
    let (first, last) = (&run.fields[0], run.last());
    assert!(rel(energy_shifted(last, &d), energy_shifted(first, &d)) < 1e-6);
    for f in ["w^2", "w^4"] {
        let f = Expression::parse(f).unwrap();
        let drift = rel(functional_if(last, &f).unwrap(), functional_if(first, &f).unwrap());
        assert!(drift < 1e-6, "{f}: {drift}");
    }
}

#[test]
fn value_distribution_moments_conserved() {
    let run = random_run();
    let m0 = run.fields[0].moments();
    let m1 = run.last().moments();
    // the mean is zero up to rounding, so it is compared in absolute terms
    assert!((m1[0] - m0[0]).abs() < 1e-12);
    for i in 1..4 {
        assert!(rel(m1[i], m0[i]) < 1e-5, "moment {}: {} vs {}", i + 1, m1[i], m0[i]);
    }
}

#[test]
fn drift_is_a_moving_frame() {
    let w0 = random_band_limited(N, 4, 7).unwrap();
    let t = 0.5;
    let moving = cl_integrate(&w0, &drift(), t, DT, 1000);
    let still = cl_integrate(&w0, &StokesDrift::new([0.0, 0.0]).unwrap(), t, DT, 1000);
    let back = moving.last().translated([-0.7 * t, 0.3 * t]);
    let err = back.max_diff(still.last());
    assert!(err < 1e-7, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn velocity_is_divergence_free(seed in any::<u64>(), modes in 1usize..8) {
        let w = random_band_limited(32, modes, seed).unwrap();
        let v = vorticity_to_velocity(&w);
        prop_assert!(v.max_divergence() < 1e-10 * (1.0 + v.max_speed()));
    }

    #[test]
    fn random_fields_are_deterministic(seed in any::<u64>()) {
        let a = random_band_limited(16, 3, seed).unwrap();
        let b = random_band_limited(16, 3, seed).unwrap();
        prop_assert_eq!(a.values(), b.values());
        let d = drift();
        let ra = cl_integrate(&a, &d, 0.01, DT, 5);
        let rb = cl_integrate(&b, &d, 0.01, DT, 5);
        prop_assert_eq!(ra.last().values(), rb.last().values());
    }
}
