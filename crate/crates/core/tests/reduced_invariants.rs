use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use twotime_core::algebra::{builtin_algebra, AlgebraParams, DualElement, LieAlgebra};
use twotime_core::expr::Expression;
use twotime_core::integrate::integrate_fixed;
use twotime_core::reduced::{
    generic_reduced_rhs, natural_energy, natural_reduced_rhs, ConnectionSpec, ReducedHamiltonian, ReducedState,
};

fn rigid_body() -> LieAlgebra {
    builtin_algebra("so3", &AlgebraParams::default())
        .unwrap()
        .with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])))
        .unwrap()
}

fn e(s: &str) -> Expression {
    Expression::parse(s).unwrap()
}

fn one_dim_spec() -> ConnectionSpec {
    let atilde = vec![vec![e("0.3*cos(q1)")], vec![e("0.2*sin(q1)")], vec![e("0.1")]];
    ConnectionSpec::new(3, 1, &atilde, &e("0.5*q1^2")).unwrap()
}

fn two_dim_spec() -> ConnectionSpec {
    let atilde = vec![
        vec![e("0.3*cos(q1)"), e("0.1*q2")],
        vec![e("0.2*sin(q2)"), e("0")],
        vec![e("0.1"), e("0.25*q1")],
    ];
    ConnectionSpec::new(3, 2, &atilde, &e("0.5*q1^2 + q2^2 + 0.1*q1*q2")).unwrap()
}

fn energy_drift(spec: &ConnectionSpec, s0: ReducedState) -> f64 {
    let a = rigid_body();
    let (k, n) = (s0.q.len(), 3);
    let f = |_: f64, x: &[f64]| {
        let s = ReducedState::from_slice(k, n, x).unwrap();
        natural_reduced_rhs(&a, spec, &s).unwrap().to_vec()
    };
    let tr = integrate_fixed(f, &s0.to_vec(), 0.0, 10.0, 1e-3, 10);
    let h = |x: &[f64]| natural_energy(&a, spec, &ReducedState::from_slice(k, n, x).unwrap()).unwrap();
    let h0 = h(&tr.states[0]);
    tr.states.iter().map(|x| (h(x) - h0).abs() / h0.abs()).fold(0.0, f64::max)
}

#[test]
fn energy_conserved_with_one_shape_variable() {
    let s0 = ReducedState::new(vec![0.4], vec![0.1], DualElement::new(vec![0.3, -0.2, 0.5])).unwrap();
    let drift = energy_drift(&one_dim_spec(), s0);
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn energy_conserved_with_two_shape_variables() {
    let s0 = ReducedState::new(vec![0.4, -0.3], vec![0.1, 0.2], DualElement::new(vec![0.3, -0.2, 0.5])).unwrap();
    let drift = energy_drift(&two_dim_spec(), s0);
    assert!(drift < 1e-6, "{drift}");
}

fn state_in_ball(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * k + 3)
        .prop_filter("unit ball", |v| v.iter().map(|x| x * x).sum::<f64>() <= 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generic_matches_natural_one_dim(x in state_in_ball(1)) {
        let a = rigid_body();
        let spec = one_dim_spec();
        let h = ReducedHamiltonian::new(&e("0.5*p1^2 + 0.5*(m1^2 + m2^2/2 + m3^2/3) + 0.5*q1^2"), 1, 3).unwrap();
        let s = ReducedState::from_slice(1, 3, &x).unwrap();
        let nat = natural_reduced_rhs(&a, &spec, &s).unwrap().to_vec();
        let gen = generic_reduced_rhs(&a, &spec, &h, &s).unwrap().to_vec();
        for (p, q) in nat.iter().zip(&gen) {
            prop_assert!((p - q).abs() < 1e-7, "{:?} vs {:?}", nat, gen);
        }
    }

    #[test]
    fn generic_matches_natural_two_dim(x in state_in_ball(2)) {
        let a = rigid_body();
        let spec = two_dim_spec();
        let h = ReducedHamiltonian::new(
            &e("0.5*(p1^2 + p2^2) + 0.5*(m1^2 + m2^2/2 + m3^2/3) + 0.5*q1^2 + q2^2 + 0.1*q1*q2"),
            2,
            3,
        )
        .unwrap();
        let s = ReducedState::from_slice(2, 3, &x).unwrap();
        let nat = natural_reduced_rhs(&a, &spec, &s).unwrap().to_vec();
        let gen = generic_reduced_rhs(&a, &spec, &h, &s).unwrap().to_vec();
        for (p, q) in nat.iter().zip(&gen) {
            prop_assert!((p - q).abs() < 1e-7, "{:?} vs {:?}", nat, gen);
        }
    }
}

#[test]
fn flat_trivial_bundle_reproduces_euler() {
    let a = rigid_body();
    let spec = ConnectionSpec::trivial(3, 2, &e("0.5*(q1^2 + q2^2)")).unwrap();
    let s0 = ReducedState::new(vec![0.3, -0.1], vec![0.0, 0.4], DualElement::new(vec![0.6, -0.3, 0.8])).unwrap();
    let reduced = integrate_fixed(
        |_, x| natural_reduced_rhs(&a, &spec, &ReducedState::from_slice(2, 3, x).unwrap()).unwrap().to_vec(),
        &s0.to_vec(),
        0.0,
        10.0,
        1e-3,
        100,
    );
    let euler = integrate_fixed(
        |_, x| a.euler_rhs(&DualElement::from(x)).unwrap().into_coords(),
        s0.mu.coords(),
        0.0,
        10.0,
        1e-3,
        100,
    );
    assert_eq!(reduced.len(), euler.len());
    for (r, m) in reduced.states.iter().zip(&euler.states) {
        for (x, y) in r[4..].iter().zip(m) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
