//! Hamiltonian dynamics on `T*U x g*` for a local trivialization with
//! connection form `A~`, curvature `Omega~` and potential `V`:
//!
//! ```text
//! mu' = -ad*_{dH/dmu - A~ dH/dp} mu
//! p'  = -dH/dq + A~* ad*_{dH/dmu} mu - Omega~*_{dH/dp} mu
//! q'  = dH/dp
//! ```
//!
//! The base metric is Euclidean, so for the natural Hamiltonian
//! `H = |p|^2 / 2 + <mu, I^{-1} mu> / 2 + V(q)` we have `dH/dp = p`.

use thiserror::Error;

use crate::algebra::{indexed_names, pairing, AlgebraElement, AlgebraError, DualElement, LieAlgebra};
use crate::expr::{BoundExpr, ExprError, Expression};

/// Relative step of every central difference in this module.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducedError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("curvature needs two distinct base directions, got u = v = {0}")]
    SameDirection(usize),
    #[error("curvature entry ({0}, {1}) given twice")]
    DuplicateCurvature(usize, usize),
    #[error("base direction {index} out of range for k = {k}")]
    DirectionOutOfRange { index: usize, k: usize },
}

fn check_len(expected: usize, got: usize) -> Result<(), ReducedError> {
    if expected == got {
        Ok(())
    } else {
        Err(ReducedError::DimensionMismatch { expected, got })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: DualElement,
}

impl ReducedState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, mu: DualElement) -> Result<Self, ReducedError> {
        check_len(q.len(), p.len())?;
        Ok(ReducedState { q, p, mu })
    }

    /// Flat layout `(q, p, mu)` used by the integrator.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.q.len() + self.mu.dim());
        v.extend(&self.q);
        v.extend(&self.p);
        v.extend(self.mu.coords());
        v
    }

    pub fn from_slice(k: usize, n: usize, x: &[f64]) -> Result<Self, ReducedError> {
        check_len(2 * k + n, x.len())?;
        Ok(ReducedState {
            q: x[..k].to_vec(),
            p: x[k..2 * k].to_vec(),
            mu: DualElement::from(&x[2 * k..]),
        })
    }
}

/// Time derivative of a [`ReducedState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRates {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dmu: DualElement,
}

impl ReducedRates {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend(&self.dp);
        v.extend(self.dmu.coords());
        v
    }
}

/// Connection form, potential and (optionally) curvature, all as
/// expressions in `q1..qk`.
#[derive(Debug, Clone)]
pub struct ConnectionSpec {
    n: usize,
    k: usize,
    // entry (i, u) at i * k + u: component i of A~(e_u)
    atilde: Vec<BoundExpr>,
    potential: BoundExpr,
    // n expressions per ordered pair (u, v), u < v
    omega: Option<Vec<(usize, usize, Vec<BoundExpr>)>>,
}

impl ConnectionSpec {
    /// `atilde` has `n` rows and `k` columns; column `u` is `A~(e_u)`.
    pub fn new(
        n: usize,
        k: usize,
        atilde: &[Vec<Expression>],
        potential: &Expression,
    ) -> Result<Self, ReducedError> {
        check_len(n, atilde.len())?;
        let names = indexed_names("q", k);
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut flat = Vec::with_capacity(n * k);
        for row in atilde {
            check_len(k, row.len())?;
            for e in row {
                flat.push(e.bind(&vars)?);
            }
        }
        Ok(ConnectionSpec {
            n,
            k,
            atilde: flat,
            potential: potential.bind(&vars)?,
            omega: None,
        })
    }

    /// Zero connection with potential `V`.
    pub fn trivial(n: usize, k: usize, potential: &Expression) -> Result<Self, ReducedError> {
        let zero = vec![vec![Expression::constant(0.0); k]; n];
        Self::new(n, k, &zero, potential)
    }

    /// Supplies curvature entries `Omega~(e_u, e_v)` as `n` expressions each.
    /// Only one of `(u, v)` and `(v, u)` may be given; the other is its
    /// negative and unlisted pairs are zero.
    pub fn with_curvature(mut self, entries: &[(usize, usize, Vec<Expression>)]) -> Result<Self, ReducedError> {
        let names = indexed_names("q", self.k);
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut stored: Vec<(usize, usize, Vec<BoundExpr>)> = Vec::new();
        for (u, v, exprs) in entries {
            let (u, v) = (*u, *v);
            for index in [u, v] {
                if index >= self.k {
                    return Err(ReducedError::DirectionOutOfRange { index, k: self.k });
                }
            }
            if u == v {
                return Err(ReducedError::SameDirection(u));
            }
            check_len(self.n, exprs.len())?;
            let key = (u.min(v), u.max(v));
            if stored.iter().any(|(a, b, _)| (*a, *b) == key) {
                return Err(ReducedError::DuplicateCurvature(key.0, key.1));
            }
            let sign = if u < v { 1.0 } else { -1.0 };
            let bound = exprs
                .iter()
                .map(|e| {
                    let e = if sign < 0.0 {
                        Expression::from_node(crate::expr::Node::Neg(Box::new(e.root().clone())))
                    } else {
                        e.clone()
                    };
                    e.bind(&vars)
                })
                .collect::<Result<Vec<_>, _>>()?;
            stored.push((key.0, key.1, bound));
        }
        self.omega = Some(stored);
        Ok(self)
    }

    pub fn algebra_dim(&self) -> usize {
        self.n
    }

    pub fn base_dim(&self) -> usize {
        self.k
    }

    pub fn has_curvature(&self) -> bool {
        self.omega.is_some()
    }

    /// `A~_q(e_u)`.
    pub fn connection_column(&self, q: &[f64], u: usize) -> Result<AlgebraElement, ReducedError> {
        check_len(self.k, q.len())?;
        let col = (0..self.n)
            .map(|i| self.atilde[i * self.k + u].eval(q))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AlgebraElement::new(col))
    }

    /// `A~_q w` for a base tangent vector `w`.
    pub fn connection_apply(&self, q: &[f64], w: &[f64]) -> Result<AlgebraElement, ReducedError> {
        check_len(self.k, w.len())?;
        let mut out = AlgebraElement::zeros(self.n);
        for (u, wu) in w.iter().enumerate() {
            if *wu != 0.0 {
                out = &out + &self.connection_column(q, u)?.scaled(*wu);
            }
        }
        Ok(out)
    }

    /// `(A~*_q nu)_u = <nu, A~_q e_u>`.
    pub fn connection_dual(&self, q: &[f64], nu: &DualElement) -> Result<Vec<f64>, ReducedError> {
        (0..self.k)
            .map(|u| Ok(pairing(nu, &self.connection_column(q, u)?)?))
            .collect()
    }

    pub fn potential(&self, q: &[f64]) -> Result<f64, ReducedError> {
        check_len(self.k, q.len())?;
        Ok(self.potential.eval(q)?)
    }

    /// Central-difference gradient of `V`.
    pub fn potential_gradient(&self, q: &[f64]) -> Result<Vec<f64>, ReducedError> {
        let h = fd_step(q);
        let mut x = q.to_vec();
        (0..self.k)
            .map(|u| {
                x[u] = q[u] + h;
                let plus = self.potential.eval(&x)?;
                x[u] = q[u] - h;
                let minus = self.potential.eval(&x)?;
                x[u] = q[u];
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }

    /// Supplied curvature `Omega~_q(e_u, e_v)`, or `None` when no curvature
    /// was given.
    pub fn supplied_curvature(&self, q: &[f64], u: usize, v: usize) -> Result<Option<AlgebraElement>, ReducedError> {
        let Some(entries) = &self.omega else {
            return Ok(None);
        };
        check_len(self.k, q.len())?;
        if u == v {
            return Ok(Some(AlgebraElement::zeros(self.n)));
        }
        let (key, sign) = if u < v { ((u, v), 1.0) } else { ((v, u), -1.0) };
        match entries.iter().find(|(a, b, _)| (*a, *b) == key) {
            None => Ok(Some(AlgebraElement::zeros(self.n))),
            Some((_, _, exprs)) => {
                let vals = exprs.iter().map(|e| e.eval(q)).collect::<Result<Vec<_>, _>>()?;
                Ok(Some(AlgebraElement::new(vals).scaled(sign)))
            }
        }
    }

    /// Curvature used by the dynamics: the supplied one, else derived from
    /// the connection.
    pub fn curvature(&self, algebra: &LieAlgebra, q: &[f64], u: usize, v: usize) -> Result<AlgebraElement, ReducedError> {
        match self.supplied_curvature(q, u, v)? {
            Some(omega) => Ok(omega),
            None if u == v => Ok(AlgebraElement::zeros(self.n)),
            None => curvature_from_connection(self, algebra, q, u, v),
        }
    }

    /// Largest entrywise difference between the supplied curvature and the
    /// one derived from the connection; `None` without supplied curvature.
    pub fn curvature_discrepancy(&self, algebra: &LieAlgebra, q: &[f64]) -> Result<Option<f64>, ReducedError> {
        if self.omega.is_none() {
            return Ok(None);
        }
        let mut worst = 0.0_f64;
        for u in 0..self.k {
            for v in u + 1..self.k {
                let given = self.supplied_curvature(q, u, v)?.expect("curvature supplied");
                let derived = curvature_from_connection(self, algebra, q, u, v)?;
                worst = worst.max((&given - &derived).max_abs());
            }
        }
        Ok(Some(worst))
    }

    /// `(Omega~*_{q,w} nu)_u = <nu, Omega~_q(w, e_u)>`.
    pub fn curvature_dual(
        &self,
        algebra: &LieAlgebra,
        q: &[f64],
        w: &[f64],
        nu: &DualElement,
    ) -> Result<Vec<f64>, ReducedError> {
        check_len(self.k, w.len())?;
        let mut out = vec![0.0; self.k];
        for (u, o) in out.iter_mut().enumerate() {
            for (v, wv) in w.iter().enumerate() {
                if v == u || *wv == 0.0 {
                    continue;
                }
                *o += wv * pairing(nu, &self.curvature(algebra, q, v, u)?)?;
            }
        }
        Ok(out)
    }
}

/// Newton search for a critical point of `V` starting at `q0`, with a
/// finite-difference Hessian. Returns the point when `|grad V| < 1e-6`.
pub fn find_potential_equilibrium(spec: &ConnectionSpec, q0: &[f64]) -> Result<Option<Vec<f64>>, ReducedError> {
    check_len(spec.k, q0.len())?;
    let k = spec.k;
    let mut q = q0.to_vec();
    for _ in 0..100 {
        let g = spec.potential_gradient(&q)?;
        if g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6 {
            return Ok(Some(q));
        }
        let h = 1e-4 * q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let mut hess = nalgebra::DMatrix::zeros(k, k);
        for v in 0..k {
            let mut x = q.clone();
            x[v] = q[v] + h;
            let gp = spec.potential_gradient(&x)?;
            x[v] = q[v] - h;
            let gm = spec.potential_gradient(&x)?;
            for u in 0..k {
                hess[(u, v)] = (gp[u] - gm[u]) / (2.0 * h);
            }
        }
        let Some(step) = hess.lu().solve(&nalgebra::DVector::from_vec(g)) else {
            return Ok(None);
        };
        q.iter_mut().zip(step.iter()).for_each(|(x, s)| *x -= s);
        if q.iter().any(|x| !x.is_finite()) {
            return Ok(None);
        }
    }
    Ok(None)
}

fn fd_step(q: &[f64]) -> f64 {
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    FD_STEP * norm.max(1.0)
}

/// `d_u A~(e_v) - d_v A~(e_u) + [A~(e_u), A~(e_v)]` with central
/// differences of step `1e-6 max(1, |q|)`.
pub fn curvature_from_connection(
    spec: &ConnectionSpec,
    algebra: &LieAlgebra,
    q: &[f64],
    u: usize,
    v: usize,
) -> Result<AlgebraElement, ReducedError> {
    check_len(spec.n, algebra.dim())?;
    check_len(spec.k, q.len())?;
    for index in [u, v] {
        if index >= spec.k {
            return Err(ReducedError::DirectionOutOfRange { index, k: spec.k });
        }
    }
    if u == v {
        return Err(ReducedError::SameDirection(u));
    }
    let h = fd_step(q);
    let partial = |dir: usize, col: usize| -> Result<AlgebraElement, ReducedError> {
        let mut x = q.to_vec();
        x[dir] = q[dir] + h;
        let plus = spec.connection_column(&x, col)?;
        x[dir] = q[dir] - h;
        let minus = spec.connection_column(&x, col)?;
        Ok((&plus - &minus).scaled(0.5 / h))
    };
    let bracket = algebra.bracket(&spec.connection_column(q, u)?, &spec.connection_column(q, v)?)?;
    Ok(&(&partial(u, v)? - &partial(v, u)?) + &bracket)
}

// Assembles the right-hand side from the three partial derivatives of H.
fn assemble(
    algebra: &LieAlgebra,
    spec: &ConnectionSpec,
    s: &ReducedState,
    dh_dq: &[f64],
    dh_dp: &[f64],
    dh_dmu: &AlgebraElement,
) -> Result<ReducedRates, ReducedError> {
    let horizontal = spec.connection_apply(&s.q, dh_dp)?;
    let dmu = -algebra.coadjoint(&(dh_dmu - &horizontal), &s.mu)?;
    let coupling = spec.connection_dual(&s.q, &algebra.coadjoint(dh_dmu, &s.mu)?)?;
    let twist = spec.curvature_dual(algebra, &s.q, dh_dp, &s.mu)?;
    let dp = (0..spec.k)
        .map(|u| -dh_dq[u] + coupling[u] - twist[u])
        .collect();
    Ok(ReducedRates {
        dq: dh_dp.to_vec(),
        dp,
        dmu,
    })
}

fn check_state(algebra: &LieAlgebra, spec: &ConnectionSpec, s: &ReducedState) -> Result<(), ReducedError> {
    check_len(spec.n, algebra.dim())?;
    check_len(spec.n, s.mu.dim())?;
    check_len(spec.k, s.q.len())?;
    check_len(spec.k, s.p.len())
}

/// Right-hand side for `H = |p|^2 / 2 + <mu, I^{-1} mu> / 2 + V(q)`.
pub fn natural_reduced_rhs(
    algebra: &LieAlgebra,
    spec: &ConnectionSpec,
    s: &ReducedState,
) -> Result<ReducedRates, ReducedError> {
    check_state(algebra, spec, s)?;
    let grad = spec.potential_gradient(&s.q)?;
    let velocity = algebra.inertia_solve(&s.mu)?;
    assemble(algebra, spec, s, &grad, &s.p, &velocity)
}

/// Natural Hamiltonian `|p|^2 / 2 + <mu, I^{-1} mu> / 2 + V(q)`.
pub fn natural_energy(algebra: &LieAlgebra, spec: &ConnectionSpec, s: &ReducedState) -> Result<f64, ReducedError> {
    check_state(algebra, spec, s)?;
    let kinetic = 0.5 * s.p.iter().map(|x| x * x).sum::<f64>();
    Ok(kinetic + algebra.energy(&s.mu)? + spec.potential(&s.q)?)
}

/// A Hamiltonian expression in `q1..qk, p1..pk, m1..mn`.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    k: usize,
    n: usize,
    bound: BoundExpr,
}

impl ReducedHamiltonian {
    pub fn new(expr: &Expression, k: usize, n: usize) -> Result<Self, ReducedError> {
        let mut names = indexed_names("q", k);
        names.extend(indexed_names("p", k));
        names.extend(indexed_names("m", n));
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(ReducedHamiltonian {
            k,
            n,
            bound: expr.bind(&vars)?,
        })
    }

    pub fn value(&self, s: &ReducedState) -> Result<f64, ReducedError> {
        Ok(self.bound.eval(&s.to_vec())?)
    }

    /// Central-difference gradient in the flat `(q, p, mu)` layout, with
    /// step `1e-6 max(1, |x_i|)` per coordinate.
    pub fn gradient(&self, s: &ReducedState) -> Result<Vec<f64>, ReducedError> {
        let mut x = s.to_vec();
        check_len(2 * self.k + self.n, x.len())?;
        (0..x.len())
            .map(|i| {
                let xi = x[i];
                let h = FD_STEP * xi.abs().max(1.0);
                x[i] = xi + h;
                let plus = self.bound.eval(&x)?;
                x[i] = xi - h;
                let minus = self.bound.eval(&x)?;
                x[i] = xi;
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }
}

/// Right-hand side for a general Hamiltonian, all derivatives by central
/// differences.
pub fn generic_reduced_rhs(
    algebra: &LieAlgebra,
    spec: &ConnectionSpec,
    hamiltonian: &ReducedHamiltonian,
    s: &ReducedState,
) -> Result<ReducedRates, ReducedError> {
    check_state(algebra, spec, s)?;
    check_len(spec.k, hamiltonian.k)?;
    check_len(spec.n, hamiltonian.n)?;
    let g = hamiltonian.gradient(s)?;
    let k = spec.k;
    let dh_dmu = AlgebraElement::from(&g[2 * k..]);
    assemble(algebra, spec, s, &g[..k], &g[k..2 * k], &dh_dmu)
}
