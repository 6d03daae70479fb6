use super::{check_dim, AlgebraElement, AlgebraError, DualElement, LieAlgebra, JACOBI_TOL};

/// Central extension of a Lie algebra by the averaging form
/// `w(X, Y) = <ad*_{V0} I X, Y> = X^T W Y`.
#[derive(Debug, Clone)]
pub struct CentralExtension<'a> {
    base: &'a LieAlgebra,
    // W[i][j] at i * n + j
    cocycle: Vec<f64>,
    drift: AlgebraElement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleResiduals {
    /// `max |W + W^T|`
    pub antisymmetry: f64,
    /// max over basis triples of `w([X,Y],Z) + w([Y,Z],X) + w([Z,X],Y)`
    pub cocycle: f64,
}

/// Matrix of the averaging form, `W[i][j] = <ad*_{V0} I e_i, e_j>`,
/// row-major. Not necessarily antisymmetric: that needs the inertia to be
/// ad-invariant.
pub fn averaging_form(algebra: &LieAlgebra, drift: &AlgebraElement) -> Result<Vec<f64>, AlgebraError> {
    let n = algebra.dim();
    check_dim(n, drift.dim())?;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        let ie = algebra.inertia_apply(&AlgebraElement::basis(n, i))?;
        let row = algebra.coadjoint(drift, &ie)?;
        w[i * n..(i + 1) * n].copy_from_slice(row.coords());
    }
    Ok(w)
}

/// Builds the averaging 2-cocycle for the drift `V0`. Fails with
/// [`AlgebraError::NotACocycle`] when the form is not antisymmetric or
/// violates the cocycle identity (beyond 1e-12).
pub fn averaging_cocycle<'a>(
    algebra: &'a LieAlgebra,
    drift: &AlgebraElement,
) -> Result<CentralExtension<'a>, AlgebraError> {
    let ext = CentralExtension {
        base: algebra,
        cocycle: averaging_form(algebra, drift)?,
        drift: drift.clone(),
    };
    let r = ext.residuals();
    if r.antisymmetry > JACOBI_TOL || r.cocycle > JACOBI_TOL {
        return Err(AlgebraError::NotACocycle {
            antisymmetry: r.antisymmetry,
            cocycle: r.cocycle,
        });
    }
    Ok(ext)
}

impl<'a> CentralExtension<'a> {
    /// Extension by an arbitrary antisymmetric form `W` (row-major), checked
    /// against both cocycle invariants. `drift` is recorded for the
    /// extended Euler equation.
    pub fn new(
        base: &'a LieAlgebra,
        cocycle: Vec<f64>,
        drift: AlgebraElement,
    ) -> Result<Self, AlgebraError> {
        let n = base.dim();
        check_dim(n * n, cocycle.len())?;
        check_dim(n, drift.dim())?;
        let ext = CentralExtension { base, cocycle, drift };
        let r = ext.residuals();
        if r.antisymmetry > JACOBI_TOL || r.cocycle > JACOBI_TOL {
            return Err(AlgebraError::NotACocycle {
                antisymmetry: r.antisymmetry,
                cocycle: r.cocycle,
            });
        }
        Ok(ext)
    }

    pub fn base(&self) -> &LieAlgebra {
        self.base
    }

    pub fn drift(&self) -> &AlgebraElement {
        &self.drift
    }

    pub fn matrix(&self) -> &[f64] {
        &self.cocycle
    }

    /// `w(X, Y) = X^T W Y`.
    pub fn value(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64, AlgebraError> {
        let n = self.base.dim();
        check_dim(n, x.dim())?;
        check_dim(n, y.dim())?;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.cocycle[i * n + j] * y[j];
            }
        }
        Ok(acc)
    }

    pub fn residuals(&self) -> CocycleResiduals {
        let n = self.base.dim();
        let w = &self.cocycle;
        let mut antisymmetry = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                antisymmetry = antisymmetry.max((w[i * n + j] + w[j * n + i]).abs());
            }
        }
        let mut cocycle = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += self.base.structure_constant(i, j, m) * w[m * n + k]
                            + self.base.structure_constant(j, k, m) * w[m * n + i]
                            + self.base.structure_constant(k, i, m) * w[m * n + j];
                    }
                    cocycle = cocycle.max(acc.abs());
                }
            }
        }
        CocycleResiduals {
            antisymmetry,
            cocycle,
        }
    }

    /// Coadjoint action of `(X, a)` on `(m, b)` in the extended algebra,
    /// restricted to the `g*` part: `ad*_X m + b W^T X`.
    pub fn extended_coadjoint(
        &self,
        x: &AlgebraElement,
        central: f64,
        m: &DualElement,
    ) -> Result<DualElement, AlgebraError> {
        let n = self.base.dim();
        let mut out = self.base.coadjoint(x, m)?;
        let coords = out.coords_mut();
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[i] * self.cocycle[i * n + j];
            }
            coords[j] += central * acc;
        }
        Ok(out)
    }

    /// Euler equation on the extended dual at central charge 1:
    /// `-ad*_{I^{-1} m + V0} m`.
    pub fn extended_euler_rhs(&self, m: &DualElement) -> Result<DualElement, AlgebraError> {
        self.base.shifted_euler_rhs(m, &self.drift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{builtin_algebra, pairing, AlgebraParams};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn so3() -> LieAlgebra {
        builtin_algebra("so3", &AlgebraParams::default()).unwrap()
    }

    fn rand_el(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn so3_cocycle_value() {
        let a = so3();
        let e = |i| AlgebraElement::basis(3, i);
        let ext = averaging_cocycle(&a, &e(2)).unwrap();
        // <ad*_{e3} e1*, e2> = <e1*, [e3, e2]> = -1
        assert_eq!(ext.value(&e(0), &e(1)).unwrap(), -1.0);
        let zero = averaging_cocycle(&a, &AlgebraElement::zeros(3)).unwrap();
        assert!(zero.matrix().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn antisymmetric_and_coboundary_on_random_inputs() {
        let a = so3();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v0 = AlgebraElement::new(rand_el(&mut rng, 3));
        let ext = averaging_cocycle(&a, &v0).unwrap();
        let iv0 = a.inertia_apply(&v0).unwrap();
        for _ in 0..100 {
            let x = AlgebraElement::new(rand_el(&mut rng, 3));
            let y = AlgebraElement::new(rand_el(&mut rng, 3));
            assert!(ext.value(&x, &x).unwrap().abs() < 1e-15);
            let coboundary = -pairing(&iv0, &a.bracket(&x, &y).unwrap()).unwrap();
            assert!((ext.value(&x, &y).unwrap() - coboundary).abs() < 1e-12);
        }
    }

    #[test]
    fn extended_coadjoint_examples() {
        let a = so3();
        let e = |i| AlgebraElement::basis(3, i);
        let ext = averaging_cocycle(&a, &e(2)).unwrap();
        let m = DualElement::new(vec![0.4, -0.1, 0.8]);
        let x = AlgebraElement::new(vec![0.3, 0.2, -0.5]);
        assert_eq!(
            ext.extended_coadjoint(&x, 0.0, &m).unwrap(),
            a.coadjoint(&x, &m).unwrap()
        );
        assert_eq!(
            ext.extended_coadjoint(&AlgebraElement::zeros(3), 1.0, &m).unwrap().max_abs(),
            0.0
        );
        let r = ext.extended_coadjoint(&e(0), 1.0, &DualElement::zeros(3)).unwrap();
        assert_eq!(r.coords(), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn extended_euler_examples() {
        let a = so3();
        let v0 = AlgebraElement::new(vec![0.0, 0.0, -0.5]);
        let ext = averaging_cocycle(&a, &v0).unwrap();
        assert_eq!(ext.extended_euler_rhs(&DualElement::zeros(3)).unwrap().max_abs(), 0.0);
        assert_eq!(ext.extended_euler_rhs(&DualElement::basis(3, 2)).unwrap().max_abs(), 0.0);
        let zero = averaging_cocycle(&a, &AlgebraElement::zeros(3)).unwrap();
        let m = DualElement::new(vec![0.3, -0.7, 0.2]);
        assert_eq!(zero.extended_euler_rhs(&m).unwrap(), a.euler_rhs(&m).unwrap());
    }

    #[test]
    fn non_invariant_inertia_is_rejected() {
        let a = so3()
            .with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])))
            .unwrap();
        let err = averaging_cocycle(&a, &AlgebraElement::basis(3, 2)).unwrap_err();
        assert!(matches!(err, AlgebraError::NotACocycle { .. }));
        // the raw form is still available and the extended Euler identity
        // is a statement about it
        let w = averaging_form(&a, &AlgebraElement::basis(3, 2)).unwrap();
        assert_eq!(w[1], -1.0);
        assert_eq!(w[3], 2.0);
    }

    #[test]
    fn cocycle_check_on_custom_form() {
        let a = so3();
        // any antisymmetric form on so(3) is a coboundary, hence a cocycle
        let w = vec![0.0, 1.0, 0.5, -1.0, 0.0, 2.0, -0.5, -2.0, 0.0];
        assert!(CentralExtension::new(&a, w, AlgebraElement::zeros(3)).is_ok());
        let bad = vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(CentralExtension::new(&a, bad, AlgebraElement::zeros(3)).is_err());
    }
}
