//! Finite-dimensional Lie algebras given by structure constants.
//!
//! Conventions: `[e_i, e_j] = sum_k c[i][j][k] e_k` and the coadjoint
//! action is fixed by `<ad*_X mu, Y> = <mu, [X, Y]>`, so
//! `(ad*_X mu)_j = sum_{i,k} X_i c[i][j][k] mu_k`. Everything else
//! (Euler equations, cocycles, drift terms) is derived from these two.

mod builtin;
mod elements;
mod extension;
mod text;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{BoundExpr, ExprError, Expression};

pub use builtin::{builtin_algebra, sine_truncated, AlgebraParams, SineInertia};
pub use elements::{pairing, AlgebraElement, DualElement};
pub use extension::{averaging_cocycle, averaging_form, CentralExtension, CocycleResiduals};
pub use text::{parse_algebra_text, write_algebra_text};

/// Tolerance for the Jacobi identity and cocycle checks.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure constants are not antisymmetric at ({i}, {j}, {k})")]
    NotAntisymmetric { i: usize, j: usize, k: usize },
    #[error("Jacobi identity violated: residual {residual:e}")]
    JacobiViolated { residual: f64 },
    #[error("inertia operator is not symmetric at ({i}, {j})")]
    InertiaNotSymmetric { i: usize, j: usize },
    #[error("inertia operator is not positive definite")]
    InertiaNotPositiveDefinite,
    #[error("unknown algebra `{0}`")]
    UnknownAlgebra(String),
    #[error("sine_truncated needs an odd truncation N >= 3, got {0}")]
    BadTruncation(usize),
    #[error("averaging form is not a 2-cocycle (antisymmetry residual {antisymmetry:e}, cocycle residual {cocycle:e})")]
    NotACocycle { antisymmetry: f64, cocycle: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn check_dim(expected: usize, got: usize) -> Result<(), AlgebraError> {
    if expected == got {
        Ok(())
    } else {
        Err(AlgebraError::DimensionMismatch { expected, got })
    }
}

/// A Lie algebra with a fixed inertia operator `I: g -> g*`.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    name: String,
    dim: usize,
    // dense c[i][j][k] at (i * n + j) * n + k
    constants: Vec<f64>,
    // nonzero entries grouped by (i, j): (k, value)
    rows: Vec<Vec<(usize, f64)>>,
    inertia: DMatrix<f64>,
    inertia_inv: DMatrix<f64>,
}

impl LieAlgebra {
    /// Builds and validates an algebra from sparse structure constants
    /// `(i, j, k, value)`. Only one of each antisymmetric pair needs to be
    /// listed; if both are given they must agree.
    pub fn from_sparse(
        name: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, usize, f64)],
        inertia: DMatrix<f64>,
    ) -> Result<Self, AlgebraError> {
        let mut dense = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in entries {
            for idx in [i, j, k] {
                if idx >= dim {
                    return Err(AlgebraError::DimensionMismatch {
                        expected: dim,
                        got: idx + 1,
                    });
                }
            }
            let a = (i * dim + j) * dim + k;
            let b = (j * dim + i) * dim + k;
            if i == j && v != 0.0 {
                return Err(AlgebraError::NotAntisymmetric { i, j, k });
            }
            if (dense[a] != 0.0 && dense[a] != v) || (dense[b] != 0.0 && dense[b] != -v) {
                return Err(AlgebraError::NotAntisymmetric { i, j, k });
            }
            dense[a] = v;
            dense[b] = -v;
        }
        Self::from_dense(name, dim, dense, inertia)
    }

    /// Builds and validates an algebra from dense structure constants laid
    /// out as `c[(i * n + j) * n + k]`.
    pub fn from_dense(
        name: impl Into<String>,
        dim: usize,
        constants: Vec<f64>,
        inertia: DMatrix<f64>,
    ) -> Result<Self, AlgebraError> {
        check_dim(dim * dim * dim, constants.len())?;
        check_dim(dim, inertia.nrows())?;
        check_dim(dim, inertia.ncols())?;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if constants[(i * dim + j) * dim + k] != -constants[(j * dim + i) * dim + k] {
                        return Err(AlgebraError::NotAntisymmetric { i, j, k });
                    }
                }
            }
        }
        let inertia_inv = invert_inertia(&inertia)?;
        let rows = (0..dim * dim)
            .map(|ij| {
                (0..dim)
                    .filter_map(|k| {
                        let v = constants[ij * dim + k];
                        (v != 0.0).then_some((k, v))
                    })
                    .collect()
            })
            .collect();
        let algebra = LieAlgebra {
            name: name.into(),
            dim,
            constants,
            rows,
            inertia,
            inertia_inv,
        };
        let residual = algebra.jacobi_residual();
        if residual > JACOBI_TOL {
            return Err(AlgebraError::JacobiViolated { residual });
        }
        Ok(algebra)
    }

    /// Same structure constants with a different inertia operator.
    pub fn with_inertia(&self, inertia: DMatrix<f64>) -> Result<Self, AlgebraError> {
        check_dim(self.dim, inertia.nrows())?;
        check_dim(self.dim, inertia.ncols())?;
        let inertia_inv = invert_inertia(&inertia)?;
        Ok(LieAlgebra {
            inertia,
            inertia_inv,
            ..self.clone()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim + j) * self.dim + k]
    }

    /// Nonzero `(i, j, k, c[i][j][k])` entries in index order.
    pub fn nonzero_constants(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let n = self.dim;
        self.rows
            .iter()
            .enumerate()
            .flat_map(move |(ij, row)| row.iter().map(move |&(k, v)| (ij / n, ij % n, k, v)))
    }

    pub fn inertia(&self) -> &DMatrix<f64> {
        &self.inertia
    }

    /// Largest violation of the Jacobi identity over all basis quadruples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut acc = vec![0.0; n];
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        for &(m, cab) in &self.rows[a * n + b] {
                            for &(l, cmc) in &self.rows[m * n + c] {
                                acc[l] += cab * cmc;
                            }
                        }
                    }
                    worst = acc.iter().fold(worst, |w, x| w.max(x.abs()));
                }
            }
        }
        worst
    }

    pub fn bracket(
        &self,
        x: &AlgebraElement,
        y: &AlgebraElement,
    ) -> Result<AlgebraElement, AlgebraError> {
        check_dim(self.dim, x.dim())?;
        check_dim(self.dim, y.dim())?;
        let n = self.dim;
        let mut z = vec![0.0; n];
        for (i, &xi) in x.coords().iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.coords().iter().enumerate() {
                let w = xi * yj;
                if w == 0.0 {
                    continue;
                }
                for &(k, c) in &self.rows[i * n + j] {
                    z[k] += c * w;
                }
            }
        }
        Ok(AlgebraElement::new(z))
    }

    /// `ad*_X mu`, defined by `<ad*_X mu, Y> = <mu, [X, Y]>`.
    pub fn coadjoint(
        &self,
        x: &AlgebraElement,
        mu: &DualElement,
    ) -> Result<DualElement, AlgebraError> {
        check_dim(self.dim, x.dim())?;
        check_dim(self.dim, mu.dim())?;
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (i, &xi) in x.coords().iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                for &(k, c) in &self.rows[i * n + j] {
                    *o += xi * c * mu[k];
                }
            }
        }
        Ok(DualElement::new(out))
    }

    /// `I X`.
    pub fn inertia_apply(&self, x: &AlgebraElement) -> Result<DualElement, AlgebraError> {
        check_dim(self.dim, x.dim())?;
        Ok(DualElement::new(mat_vec(&self.inertia, x.coords())))
    }

    /// `I^{-1} mu`.
    pub fn inertia_solve(&self, mu: &DualElement) -> Result<AlgebraElement, AlgebraError> {
        check_dim(self.dim, mu.dim())?;
        Ok(AlgebraElement::new(mat_vec(&self.inertia_inv, mu.coords())))
    }

    /// Kinetic energy `1/2 <mu, I^{-1} mu>`.
    pub fn energy(&self, mu: &DualElement) -> Result<f64, AlgebraError> {
        Ok(0.5 * pairing(mu, &self.inertia_solve(mu)?)?)
    }

    /// Energy norm `<mu, I^{-1} mu>^{1/2}`.
    pub fn energy_norm(&self, mu: &DualElement) -> Result<f64, AlgebraError> {
        Ok((2.0 * self.energy(mu)?).max(0.0).sqrt())
    }

    /// Euler equation right-hand side `-ad*_{I^{-1} m} m`.
    pub fn euler_rhs(&self, m: &DualElement) -> Result<DualElement, AlgebraError> {
        let omega = self.inertia_solve(m)?;
        Ok(-self.coadjoint(&omega, m)?)
    }

    /// Euler equation with a constant shift, `-ad*_{I^{-1} m + V0} m`.
    pub fn shifted_euler_rhs(
        &self,
        m: &DualElement,
        drift: &AlgebraElement,
    ) -> Result<DualElement, AlgebraError> {
        check_dim(self.dim, drift.dim())?;
        let velocity = &self.inertia_solve(m)? + drift;
        Ok(-self.coadjoint(&velocity, m)?)
    }

    /// Lie-Poisson equation `dm/dt = ad*_{dH} m` for a Hamiltonian written
    /// in the variables `m1..mn`. The differential is taken by central
    /// differences with step `max(1e-6, 1e-6 |m_i|)`.
    pub fn lie_poisson_rhs(
        &self,
        hamiltonian: &LiePoissonHamiltonian,
        m: &DualElement,
    ) -> Result<DualElement, AlgebraError> {
        check_dim(self.dim, hamiltonian.dim)?;
        check_dim(self.dim, m.dim())?;
        let mut probe = m.coords().to_vec();
        let mut grad = vec![0.0; self.dim];
        for i in 0..self.dim {
            let h = (1e-6 * m[i].abs()).max(1e-6);
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = hamiltonian.expr.eval(&probe)?;
            probe[i] = orig - h;
            let minus = hamiltonian.expr.eval(&probe)?;
            probe[i] = orig;
            grad[i] = (plus - minus) / (2.0 * h);
        }
        self.coadjoint(&AlgebraElement::new(grad), m)
    }
}

/// A Hamiltonian on the dual space, bound to variables `m1..mn`.
#[derive(Debug, Clone)]
pub struct LiePoissonHamiltonian {
    dim: usize,
    expr: BoundExpr,
}

impl LiePoissonHamiltonian {
    pub fn new(expr: &Expression, dim: usize) -> Result<Self, AlgebraError> {
        let names = indexed_names("m", dim);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(LiePoissonHamiltonian {
            dim,
            expr: expr.bind(&refs)?,
        })
    }

    pub fn value(&self, m: &DualElement) -> Result<f64, AlgebraError> {
        Ok(self.expr.eval(m.coords())?)
    }
}

/// `prefix1, prefix2, ..., prefix{n}`.
pub fn indexed_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

fn invert_inertia(inertia: &DMatrix<f64>) -> Result<DMatrix<f64>, AlgebraError> {
    let n = inertia.nrows();
    for i in 0..n {
        for j in 0..i {
            if inertia[(i, j)] != inertia[(j, i)] {
                return Err(AlgebraError::InertiaNotSymmetric { i, j });
            }
        }
    }
    let chol = inertia
        .clone()
        .cholesky()
        .ok_or(AlgebraError::InertiaNotPositiveDefinite)?;
    Ok(chol.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn so3() -> LieAlgebra {
        builtin_algebra("so3", &AlgebraParams::default()).unwrap()
    }

    fn h3() -> LieAlgebra {
        builtin_algebra("heisenberg3", &AlgebraParams::default()).unwrap()
    }

    fn el(v: &[f64]) -> AlgebraElement {
        AlgebraElement::from(v)
    }

    fn du(v: &[f64]) -> DualElement {
        DualElement::from(v)
    }

    // Oracle: <ad*_X mu, e_j> = <mu, [X, e_j]> computed basis vector by
    // basis vector through the bracket alone.
    fn coadjoint_oracle(a: &LieAlgebra, x: &AlgebraElement, mu: &DualElement) -> Vec<f64> {
        (0..a.dim())
            .map(|j| {
                let ej = AlgebraElement::basis(a.dim(), j);
                pairing(mu, &a.bracket(x, &ej).unwrap()).unwrap()
            })
            .collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn brackets_of_builtins() {
        let e = |i| AlgebraElement::basis(3, i);
        assert_eq!(so3().bracket(&e(0), &e(1)).unwrap(), e(2));
        assert_eq!(h3().bracket(&e(0), &e(1)).unwrap(), e(2));
        assert_eq!(h3().bracket(&e(0), &e(2)).unwrap(), AlgebraElement::zeros(3));
        let x = el(&[0.3, -1.2, 0.7]);
        assert_eq!(so3().bracket(&x, &x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pairing_examples() {
        let e1 = AlgebraElement::basis(3, 0);
        assert_eq!(pairing(&DualElement::basis(3, 0), &e1).unwrap(), 1.0);
        assert_eq!(
            pairing(&DualElement::basis(3, 0), &AlgebraElement::basis(3, 1)).unwrap(),
            0.0
        );
        assert_eq!(pairing(&du(&[1.0, 2.0, 3.0]), &el(&[4.0, 5.0, 6.0])).unwrap(), 32.0);
        assert!(matches!(
            pairing(&du(&[1.0, 2.0]), &e1),
            Err(AlgebraError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coadjoint_examples() {
        let a = so3();
        let e3 = AlgebraElement::basis(3, 2);
        let e1s = DualElement::basis(3, 0);
        let expected = coadjoint_oracle(&a, &e3, &e1s);
        assert_eq!(expected, vec![0.0, -1.0, 0.0]);
        assert_eq!(a.coadjoint(&e3, &e1s).unwrap().coords(), &expected[..]);
        let x = el(&[0.2, 0.5, -0.1]);
        assert_eq!(a.coadjoint(&x, &DualElement::zeros(3)).unwrap().max_abs(), 0.0);

        let h = h3();
        let e1 = AlgebraElement::basis(3, 0);
        let mu = du(&[0.0, 0.0, 1.0]);
        assert_eq!(coadjoint_oracle(&h, &e1, &mu), vec![0.0, 1.0, 0.0]);
        assert_eq!(h.coadjoint(&e1, &mu).unwrap().coords(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn euler_rhs_examples() {
        let a = so3()
            .with_inertia(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])))
            .unwrap();
        assert_eq!(a.euler_rhs(&du(&[1.0, 0.0, 0.0])).unwrap().max_abs(), 0.0);
        assert!(so3().euler_rhs(&du(&[0.3, -0.4, 1.1])).unwrap().max_abs() < 1e-15);

        // hand evaluation: mdot = (m2 m3, -m1 m3, 0)
        let h = h3();
        let m = du(&[1.0, 1.0, 1.0]);
        assert_eq!(h.euler_rhs(&m).unwrap().coords(), &[1.0, -1.0, 0.0]);
        let omega = h.inertia_solve(&m).unwrap();
        let oracle: Vec<f64> = coadjoint_oracle(&h, &omega, &m).iter().map(|v| -v).collect();
        assert_eq!(oracle, vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn lie_poisson_matches_euler_for_quadratic_hamiltonian() {
        let a = so3()
            .with_inertia(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])))
            .unwrap();
        let h = Expression::parse("-0.5*(m1^2/1 + m2^2/2 + m3^2/3)").unwrap();
        let h = LiePoissonHamiltonian::new(&h, 3).unwrap();
        let m = du(&[0.3, -0.2, 0.9]);
        let lp = a.lie_poisson_rhs(&h, &m).unwrap();
        let eu = a.euler_rhs(&m).unwrap();
        assert!((&lp - &eu).max_abs() < 1e-8);
    }

    #[test]
    fn lie_poisson_constant_and_linear() {
        let a = so3();
        let m = du(&[0.3, -0.2, 0.9]);
        let constant = LiePoissonHamiltonian::new(&Expression::parse("4.2").unwrap(), 3).unwrap();
        assert_eq!(a.lie_poisson_rhs(&constant, &m).unwrap().max_abs(), 0.0);
        let linear = LiePoissonHamiltonian::new(&Expression::parse("m3").unwrap(), 3).unwrap();
        let expected = a.coadjoint(&AlgebraElement::basis(3, 2), &m).unwrap();
        // exact derivative up to cancellation error ~ eps / h
        assert!((&a.lie_poisson_rhs(&linear, &m).unwrap() - &expected).max_abs() < 1e-9);
        let bad = Expression::parse("q1").unwrap();
        assert!(LiePoissonHamiltonian::new(&bad, 3).is_err());
    }

    #[test]
    fn pairing_identity_and_energy_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let algebras = [
            so3(),
            h3(),
            sine_truncated(5, SineInertia::Identity).unwrap(),
            sine_truncated(5, SineInertia::Laplacian).unwrap(),
        ];
        for a in &algebras {
            let n = a.dim();
            for _ in 0..20 {
                let x = AlgebraElement::new(random_vec(&mut rng, n));
                let y = AlgebraElement::new(random_vec(&mut rng, n));
                let mu = DualElement::new(random_vec(&mut rng, n));
                let lhs = pairing(&a.coadjoint(&x, &mu).unwrap(), &y).unwrap();
                let rhs = pairing(&mu, &a.bracket(&x, &y).unwrap()).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{}: {lhs} vs {rhs}", a.name());

                let rate = pairing(&a.euler_rhs(&mu).unwrap(), &a.inertia_solve(&mu).unwrap())
                    .unwrap();
                assert!(rate.abs() < 1e-12, "{}: energy rate {rate}", a.name());
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let eye = DMatrix::identity(3, 3);
        assert!(matches!(
            LieAlgebra::from_sparse("bad", 3, &[(0, 0, 1, 1.0)], eye.clone()),
            Err(AlgebraError::NotAntisymmetric { .. })
        ));
        // [e1,e2]=e1, [e2,e3]=e1, [e1,e3]=e2 is not a Lie algebra
        let not_lie = [(0, 1, 0, 1.0), (1, 2, 0, 1.0), (0, 2, 1, 1.0)];
        assert!(matches!(
            LieAlgebra::from_sparse("bad", 3, &not_lie, eye.clone()),
            Err(AlgebraError::JacobiViolated { .. })
        ));
        let mut asym = eye.clone();
        asym[(0, 1)] = 0.5;
        assert!(matches!(
            so3().with_inertia(asym),
            Err(AlgebraError::InertiaNotSymmetric { .. })
        ));
        assert!(matches!(
            so3().with_inertia(-eye),
            Err(AlgebraError::InertiaNotPositiveDefinite)
        ));
        assert!(so3().bracket(&el(&[1.0, 0.0]), &el(&[1.0, 0.0, 0.0])).is_err());
    }
}
