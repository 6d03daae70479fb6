use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use twotime_core::algebra::{builtin_algebra, AlgebraParams, DualElement, LieAlgebra};
use twotime_core::expr::Expression;
use twotime_core::harness::{
    adiabatic_report, check_claims, format_sweep_csv, parse_sweep_csv, run_fast, shifted_energy, sweep,
    FastSlowScenario, SweepRecord,
};

const EPSILONS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn so3() -> LieAlgebra {
    builtin_algebra("so3", &AlgebraParams::default()).unwrap()
}

fn so3_diag() -> LieAlgebra {
    so3().with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]))).unwrap()
}

fn circle(a: LieAlgebra, m: [f64; 3], epsilons: Vec<f64>) -> FastSlowScenario {
    let ex = |s: &str| Expression::parse(s).unwrap();
    FastSlowScenario::new(a, vec![ex("cos(t)"), ex("sin(t)"), ex("0")], DualElement::new(m.to_vec()), epsilons, 5.0)
        .unwrap()
}

fn check_reference(a: LieAlgebra) {
    let s = circle(a, [0.6, 0.0, 0.8], EPSILONS.to_vec());
    let report = sweep(&s).unwrap();
    assert_eq!(report.records.len(), 4);
    assert!(report.records.iter().all(|r| !r.diverged));
    let claims = check_claims(&report);
    let slope = report.slope.unwrap();
    assert!((0.8..=1.2).contains(&slope), "slope {slope}");
    assert!(claims.error_reduction && claims.monotone, "{claims:?}");
    assert!(claims.drift_spread < 3.0, "spread {}", claims.drift_spread);
    assert!(report.averaged.energy < 1e-8 && report.averaged.casimir < 1e-8, "{:?}", report.averaged);
}

#[test]
fn reference_sweep_identity_inertia() {
    check_reference(so3());
}

#[test]
fn reference_sweep_diagonal_inertia() {
    check_reference(so3_diag());
}

#[test]
fn halving_epsilon_roughly_halves_energy_drift() {
    let s = circle(so3(), [0.6, 0.0, 0.8], vec![0.1, 0.05]);
    let d1 = adiabatic_report(&s, &run_fast(&s, 0.1).unwrap()).unwrap();
    let d2 = adiabatic_report(&s, &run_fast(&s, 0.05).unwrap()).unwrap();
    let ratio = d1 / d2;
    assert!((1.4..=2.6).contains(&ratio), "ratio {ratio}");
}

// Constants measured once from reference runs at eps = 0.1 and frozen with
// about 50% headroom.
#[test]
fn adiabatic_constants() {
    let cases = [
        (so3(), [0.6, 0.0, 0.8], 4.0),
        (so3_diag(), [0.6, 0.0, 0.8], 7.5),
        (so3_diag(), [0.06, 0.0, 0.08], 0.5),
    ];
    for (a, m, constant) in cases {
        let s = circle(a, m, vec![0.1]);
        let e0 = shifted_energy(&s.algebra, &s.drift().unwrap(), &s.m_init).unwrap();
        let drift = adiabatic_report(&s, &run_fast(&s, 0.1).unwrap()).unwrap();
        assert!(drift <= constant * 0.1 * e0, "{m:?}: drift {drift}, E0 {e0}");
    }
}

#[test]
fn unforced_equilibrium_has_no_error() {
    let ex = |s: &str| Expression::parse(s).unwrap();
    let s = FastSlowScenario::new(
        so3_diag(),
        vec![ex("0"), ex("0"), ex("0")],
        DualElement::new(vec![0.0, 0.0, 0.7]),
        vec![0.2, 0.1, 0.05],
        2.0,
    )
    .unwrap();
    let report = sweep(&s).unwrap();
    for r in &report.records {
        assert!(r.max_err < 1e-9 && r.energy_drift < 1e-9, "{r:?}");
    }
}

#[test]
fn empty_csv_has_no_summary() {
    assert_eq!(format_sweep_csv(&[], None), "epsilon,max_err,energy_drift,diverged\n");
}

fn record() -> impl Strategy<Value = SweepRecord> {
    (1e-6..1.0f64, any::<f64>(), any::<f64>(), any::<bool>()).prop_map(|(epsilon, a, b, diverged)| SweepRecord {
        epsilon,
        max_err: a.abs(),
        energy_drift: b.abs(),
        diverged,
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(
        records in prop::collection::vec(record(), 0..8),
        slope in prop::option::of(-5.0..5.0f64),
    ) {
        let slope = if records.is_empty() { None } else { slope };
        let text = format_sweep_csv(&records, slope);
        let (back, s) = parse_sweep_csv(&text).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (x, y) in back.iter().zip(&records) {
            prop_assert_eq!(x.epsilon.to_bits(), y.epsilon.to_bits());
            prop_assert_eq!(x.max_err.to_bits(), y.max_err.to_bits());
            prop_assert_eq!(x.energy_drift.to_bits(), y.energy_drift.to_bits());
            prop_assert_eq!(x.diverged, y.diverged);
        }
        prop_assert_eq!(s.map(f64::to_bits), slope.map(f64::to_bits));
    }
}
