use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use twotime_core::algebra::{builtin_algebra, AlgebraElement, AlgebraParams, DualElement, LieAlgebra};
use twotime_core::averaging::{
    averaged_rhs, drift_vector, shift_vector, shifted_averaged_rhs, verify_bracket, CoadjointBilinear,
    OscillationProfile,
};

fn so3() -> LieAlgebra {
    builtin_algebra("so3", &AlgebraParams::default()).unwrap()
}

fn so3_diag() -> LieAlgebra {
    so3().with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]))).unwrap()
}

// Three harmonics per coordinate: coefficients[h][c] = (a, b) for
// a cos((h+1) t) + b sin((h+1) t).
fn harmonics() -> impl Strategy<Value = Vec<[(f64, f64); 3]>> {
    prop::collection::vec(prop::array::uniform3((-1.0..1.0f64, -1.0..1.0f64)), 3)
}

fn profile(coeffs: &[[(f64, f64); 3]], count: usize) -> OscillationProfile {
    OscillationProfile::from_fn(3, count, |t| {
        (0..3)
            .map(|c| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(h, row)| {
                        let k = (h + 1) as f64;
                        row[c].0 * (k * t).cos() + row[c].1 * (k * t).sin()
                    })
                    .sum()
            })
            .collect()
    })
    .unwrap()
}

fn unit_ball_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 3).prop_filter("inside the unit ball", |v| {
        v.iter().map(|x| x * x).sum::<f64>() <= 1.0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn both_averaged_forms_agree(
        coeffs in harmonics(),
        points in prop::collection::vec(unit_ball_point(), 100),
        seed in any::<u64>(),
    ) {
        let a = so3();
        let op = CoadjointBilinear::new(&a);
        let verified = verify_bracket(&op, seed).unwrap();
        let y = profile(&coeffs, 128);
        let shift = shift_vector(&op, &y).unwrap();
        for x in &points {
            let plain = averaged_rhs(&op, &y, x).unwrap();
            let shifted = shifted_averaged_rhs(&verified, &shift, x).unwrap();
            for (p, q) in plain.iter().zip(&shifted) {
                prop_assert!((p - q).abs() < 1e-9, "{:?} vs {:?}", plain, shifted);
            }
        }
    }
}

proptest! {
    #[test]
    fn primitive_has_zero_mean_and_differentiates_back(coeffs in harmonics()) {
        let y = profile(&coeffs, 64);
        let prim = y.oscillating_primitive().unwrap();
        prop_assert!(prim.periodic_mean().iter().all(|m| m.abs() < 1e-14));
        let back = prim.spectral_derivative();
        for (r, s) in back.rows().zip(y.rows()) {
            for (p, q) in r.iter().zip(s) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn drift_is_stable_under_sample_doubling(coeffs in harmonics()) {
        for a in [so3(), so3_diag()] {
            let d128 = drift_vector(&a, &profile(&coeffs, 128)).unwrap();
            let d256 = drift_vector(&a, &profile(&coeffs, 256)).unwrap();
            prop_assert!((&d128 - &d256).max_abs() < 1e-12);
        }
    }

    #[test]
    fn time_correlation_is_antisymmetric(coeffs in harmonics(), m in prop::collection::vec(-1.0..1.0f64, 3)) {
        for a in [so3(), so3_diag()] {
            let v = profile(&coeffs, 64);
            let vt = v.oscillating_primitive().unwrap();
            let m = DualElement::new(m.clone());
            let mut acc = DualElement::zeros(3);
            for (x, xt) in v.rows().zip(vt.rows()) {
                let x = AlgebraElement::from(x);
                let xt = AlgebraElement::from(xt);
                let one = a.coadjoint(&x, &a.coadjoint(&xt, &m).unwrap()).unwrap();
                let two = a.coadjoint(&xt, &a.coadjoint(&x, &m).unwrap()).unwrap();
                acc = &acc + &(&one + &two);
            }
            let avg = acc.scaled(1.0 / v.len() as f64);
            prop_assert!(avg.max_abs() < 1e-10, "{:?}", avg);
        }
    }
}

#[test]
fn circle_drift_oracle() {
    let a = so3();
    for amp in [0.5, 1.0, 2.0] {
        let v = |k| OscillationProfile::from_fn(3, k, |t| vec![amp * t.cos(), amp * t.sin(), 0.0]).unwrap();
        let d256 = drift_vector(&a, &v(256)).unwrap();
        let expected = [0.0, 0.0, -amp * amp / 2.0];
        for (x, e) in d256.coords().iter().zip(expected) {
            assert!((x - e).abs() < 1e-10);
        }
        let d128 = drift_vector(&a, &v(128)).unwrap();
        assert!((&d128 - &d256).max_abs() < 1e-12);
    }
}
