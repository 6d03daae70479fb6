//! Two-timing averaging of `dx/dt = B(x, eps y1(t) + x)` for a bilinear
//! `B` and a `2 pi`-periodic forcing `y1`.
//!
//! With `x = eps^2 xbar` and slow time `s = eps^2 t` the averaged equation
//! is `dxbar/ds = avg B(B(xbar, y1^t), y1) + B(xbar, xbar)`, where `y1^t`
//! is the zero-mean primitive of `y1`. When `B` is itself a Lie bracket
//! the first term collapses to `B(V, xbar)` for a constant shift `V`, and
//! in the coadjoint instantiation `B(x, y) = -ad*_{I^{-1} y} x` it becomes
//! the drift `V0 = 1/2 avg [v, v^t]` inside `-ad*_{I^{-1} m + V0} m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, DualElement, LieAlgebra};
use crate::expr::{ExprError, Expression};

/// Default number of samples per period.
pub const DEFAULT_SAMPLES: usize = 256;
/// Minimum number of samples per period.
pub const MIN_SAMPLES: usize = 16;
/// Largest |mean| accepted as "zero mean".
pub const ZERO_MEAN_TOL: f64 = 1e-10;
/// Residual threshold for the randomized bracket checks.
pub const BRACKET_TOL: f64 = 1e-10;
/// Number of random triples used by the bracket checks.
pub const BRACKET_TRIALS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("profile has nonzero mean (max |mean| = {0:e})")]
    NonZeroMean(f64),
    #[error("need at least {MIN_SAMPLES} samples per period, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bilinear operator is not declared antisymmetric with Jacobi identity")]
    FlagsNotDeclared,
    #[error("bracket checks failed (antisymmetry residual {antisymmetry:e}, Jacobi residual {jacobi:e})")]
    FlagsNotVerified { antisymmetry: f64, jacobi: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// One period of a vector signal sampled at `t_j = 2 pi j / K`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationProfile {
    dim: usize,
    // row-major K x dim
    samples: Vec<f64>,
}

impl OscillationProfile {
    pub fn from_samples(dim: usize, samples: Vec<f64>) -> Result<Self, AveragingError> {
        if dim == 0 || samples.len() % dim != 0 {
            return Err(AveragingError::DimensionMismatch {
                expected: dim,
                got: samples.len(),
            });
        }
        let k = samples.len() / dim;
        if k < MIN_SAMPLES {
            return Err(AveragingError::TooFewSamples(k));
        }
        Ok(OscillationProfile { dim, samples })
    }

    pub fn from_fn(dim: usize, count: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, AveragingError> {
        let mut samples = Vec::with_capacity(dim * count);
        for j in 0..count {
            let row = f(2.0 * PI * j as f64 / count as f64);
            if row.len() != dim {
                return Err(AveragingError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            samples.extend(row);
        }
        Self::from_samples(dim, samples)
    }

    /// Samples per-coordinate expressions in the variable `t`.
    pub fn from_expressions(exprs: &[Expression], count: usize) -> Result<Self, AveragingError> {
        let bound = exprs
            .iter()
            .map(|e| e.bind(&["t"]))
            .collect::<Result<Vec<_>, _>>()?;
        let mut samples = Vec::with_capacity(exprs.len() * count);
        for j in 0..count {
            let t = 2.0 * PI * j as f64 / count as f64;
            for b in &bound {
                samples.push(b.eval(&[t])?);
            }
        }
        Self::from_samples(exprs.len(), samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    /// Rectangle-rule mean over the period.
    pub fn periodic_mean(&self) -> Vec<f64> {
        let k = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= k);
        mean
    }

    fn require_zero_mean(&self) -> Result<(), AveragingError> {
        let worst = self.periodic_mean().iter().fold(0.0_f64, |w, m| w.max(m.abs()));
        if worst > ZERO_MEAN_TOL {
            Err(AveragingError::NonZeroMean(worst))
        } else {
            Ok(())
        }
    }

    /// Zero-mean primitive `y^t = int_0^t y - avg(int_0^t y)`, computed per
    /// coordinate by dividing Fourier coefficients by `i f` and dropping the
    /// constant mode. The Nyquist mode (even `K`) has no real primitive on
    /// the grid and is dropped as well.
    pub fn oscillating_primitive(&self) -> Result<OscillationProfile, AveragingError> {
        self.require_zero_mean()?;
        Ok(self.spectral_map(|f| {
            if f == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / f)
            }
        }))
    }

    /// Spectral derivative `dy/dt` on the grid.
    pub fn spectral_derivative(&self) -> OscillationProfile {
        self.spectral_map(|f| Complex64::new(0.0, f))
    }

    // Multiplies every Fourier coefficient at (signed) frequency f by
    // `factor(f)`, zeroing the Nyquist mode.
    fn spectral_map(&self, factor: impl Fn(f64) -> Complex64) -> OscillationProfile {
        let k = self.len();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(k);
        let inv = planner.plan_fft_inverse(k);
        let mut out = vec![0.0; self.samples.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        for c in 0..self.dim {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(self.samples[j * self.dim + c], 0.0);
            }
            fwd.process(&mut buf);
            for (idx, b) in buf.iter_mut().enumerate() {
                if k % 2 == 0 && idx == k / 2 {
                    *b = Complex64::new(0.0, 0.0);
                    continue;
                }
                *b *= factor(signed_frequency(idx, k));
            }
            inv.process(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                out[j * self.dim + c] = b.re / k as f64;
            }
        }
        OscillationProfile {
            dim: self.dim,
            samples: out,
        }
    }

    /// Trigonometric interpolant of the samples.
    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(self)
    }
}

fn signed_frequency(idx: usize, k: usize) -> f64 {
    if idx <= k / 2 {
        idx as f64
    } else {
        idx as f64 - k as f64
    }
}

/// Band-limited periodic interpolation of an [`OscillationProfile`].
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    dim: usize,
    // per coordinate: constant term, then (cos, sin) amplitudes for f = 1..
    modes: Vec<(f64, Vec<(f64, f64)>)>,
}

impl TrigInterpolant {
    fn new(profile: &OscillationProfile) -> Self {
        let k = profile.len();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(k);
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        let mut modes = Vec::with_capacity(profile.dim);
        for c in 0..profile.dim {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(profile.samples[j * profile.dim + c], 0.0);
            }
            fwd.process(&mut buf);
            let scale = 1.0 / k as f64;
            let mut harmonics = Vec::new();
            for f in 1..=k / 2 {
                let weight = if k % 2 == 0 && f == k / 2 { 1.0 } else { 2.0 };
                let z = buf[f] * scale * weight;
                harmonics.push((z.re, -z.im));
            }
            modes.push((buf[0].re * scale, harmonics));
        }
        TrigInterpolant {
            dim: profile.dim,
            modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        self.modes
            .iter()
            .map(|(c0, harmonics)| {
                let mut acc = *c0;
                for (f, (a, b)) in harmonics.iter().enumerate() {
                    let ft = (f + 1) as f64 * t;
                    acc += a * ft.cos() + b * ft.sin();
                }
                acc
            })
            .collect()
    }
}

/// Declared bracket properties of a bilinear operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BracketFlags {
    pub antisymmetric: bool,
    pub jacobi: bool,
}

/// A bilinear map `B: R^n x R^n -> R^n`.
pub trait Bilinear {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64>;

    fn flags(&self) -> BracketFlags {
        BracketFlags::default()
    }
}

/// Bilinear operator backed by a closure.
pub struct FnBilinear<F> {
    dim: usize,
    flags: BracketFlags,
    f: F,
}

impl<F> FnBilinear<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, flags: BracketFlags, f: F) -> Self {
        FnBilinear { dim, flags, f }
    }
}

impl<F> Bilinear for FnBilinear<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.f)(x, y)
    }

    fn flags(&self) -> BracketFlags {
        self.flags
    }
}

/// `B(x, y) = -ad*_{I^{-1} y} x` on the dual of a Lie algebra.
///
/// It is a Lie bracket only when the inertia form is ad-invariant (e.g.
/// so(3) with the identity); it claims both flags and leaves the decision
/// to [`verify_bracket`].
#[derive(Debug, Clone, Copy)]
pub struct CoadjointBilinear<'a> {
    algebra: &'a LieAlgebra,
}

impl<'a> CoadjointBilinear<'a> {
    pub fn new(algebra: &'a LieAlgebra) -> Self {
        CoadjointBilinear { algebra }
    }

    pub fn algebra(&self) -> &'a LieAlgebra {
        self.algebra
    }
}

impl Bilinear for CoadjointBilinear<'_> {
    fn dim(&self) -> usize {
        self.algebra.dim()
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let velocity = self
            .algebra
            .inertia_solve(&DualElement::from(y))
            .expect("dimension checked by caller");
        let out = self
            .algebra
            .coadjoint(&velocity, &DualElement::from(x))
            .expect("dimension checked by caller");
        out.into_coords().into_iter().map(|v| -v).collect()
    }

    fn flags(&self) -> BracketFlags {
        BracketFlags {
            antisymmetric: true,
            jacobi: true,
        }
    }
}

/// Residuals of the randomized bracket checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketResiduals {
    pub antisymmetry: f64,
    pub jacobi: f64,
}

/// A bilinear operator whose antisymmetry and Jacobi identity have been
/// checked on random inputs. Required by [`shifted_averaged_rhs`].
pub struct VerifiedBracket<'b, B: Bilinear + ?Sized> {
    inner: &'b B,
    residuals: BracketResiduals,
}

impl<'b, B: Bilinear + ?Sized> VerifiedBracket<'b, B> {
    pub fn inner(&self) -> &'b B {
        self.inner
    }

    pub fn residuals(&self) -> BracketResiduals {
        self.residuals
    }
}

/// Max antisymmetry and Jacobi residuals over `trials` random triples in
/// the unit cube.
pub fn bracket_residuals<B: Bilinear + ?Sized>(b: &B, trials: usize, seed: u64) -> BracketResiduals {
    let n = b.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let mut antisymmetry = 0.0_f64;
    let mut jacobi = 0.0_f64;
    for _ in 0..trials {
        let (x, y, z) = (draw(), draw(), draw());
        let xy = b.apply(&x, &y);
        let yx = b.apply(&y, &x);
        antisymmetry = xy.iter().zip(&yx).fold(antisymmetry, |w, (a, c)| w.max((a + c).abs()));
        let t1 = b.apply(&xy, &z);
        let t2 = b.apply(&b.apply(&y, &z), &x);
        let t3 = b.apply(&b.apply(&z, &x), &y);
        for i in 0..n {
            jacobi = jacobi.max((t1[i] + t2[i] + t3[i]).abs());
        }
    }
    BracketResiduals {
        antisymmetry,
        jacobi,
    }
}

/// Checks the declared flags on [`BRACKET_TRIALS`] random triples against
/// [`BRACKET_TOL`].
pub fn verify_bracket<B: Bilinear + ?Sized>(b: &B, seed: u64) -> Result<VerifiedBracket<'_, B>, AveragingError> {
    let flags = b.flags();
    if !(flags.antisymmetric && flags.jacobi) {
        return Err(AveragingError::FlagsNotDeclared);
    }
    let residuals = bracket_residuals(b, BRACKET_TRIALS, seed);
    if residuals.antisymmetry > BRACKET_TOL || residuals.jacobi > BRACKET_TOL {
        return Err(AveragingError::FlagsNotVerified {
            antisymmetry: residuals.antisymmetry,
            jacobi: residuals.jacobi,
        });
    }
    Ok(VerifiedBracket { inner: b, residuals })
}

fn check_len(expected: usize, got: usize) -> Result<(), AveragingError> {
    if expected == got {
        Ok(())
    } else {
        Err(AveragingError::DimensionMismatch { expected, got })
    }
}

/// The averaged vector field `avg B(B(x, y^t), y) + B(x, x)` with the
/// primitive of the profile precomputed.
pub struct AveragedField<'b, B: Bilinear + ?Sized> {
    op: &'b B,
    forcing: OscillationProfile,
    primitive: OscillationProfile,
}

impl<'b, B: Bilinear + ?Sized> AveragedField<'b, B> {
    pub fn new(op: &'b B, forcing: &OscillationProfile) -> Result<Self, AveragingError> {
        check_len(op.dim(), forcing.dim())?;
        let primitive = forcing.oscillating_primitive()?;
        Ok(AveragedField {
            op,
            forcing: forcing.clone(),
            primitive,
        })
    }

    pub fn rhs(&self, xbar: &[f64]) -> Result<Vec<f64>, AveragingError> {
        check_len(self.op.dim(), xbar.len())?;
        let n = self.op.dim();
        let k = self.forcing.len();
        let mut acc = vec![0.0; n];
        for (y, yt) in self.forcing.rows().zip(self.primitive.rows()) {
            let inner = self.op.apply(xbar, yt);
            let outer = self.op.apply(&inner, y);
            acc.iter_mut().zip(&outer).for_each(|(a, o)| *a += o);
        }
        let quad = self.op.apply(xbar, xbar);
        Ok(acc
            .iter()
            .zip(&quad)
            .map(|(a, q)| a / k as f64 + q)
            .collect())
    }
}

/// `avg B(B(xbar, y^t), y) + B(xbar, xbar)` by the rectangle rule.
pub fn averaged_rhs<B: Bilinear + ?Sized>(
    op: &B,
    forcing: &OscillationProfile,
    xbar: &[f64],
) -> Result<Vec<f64>, AveragingError> {
    AveragedField::new(op, forcing)?.rhs(xbar)
}

/// Shift vector `V = 1/2 avg B(y, y^t)` for which the averaged field of a
/// bracket-like `B` equals `B(V + xbar, xbar)`.
pub fn shift_vector<B: Bilinear + ?Sized>(
    op: &B,
    forcing: &OscillationProfile,
) -> Result<Vec<f64>, AveragingError> {
    check_len(op.dim(), forcing.dim())?;
    let primitive = forcing.oscillating_primitive()?;
    let mut acc = vec![0.0; op.dim()];
    for (y, yt) in forcing.rows().zip(primitive.rows()) {
        acc.iter_mut()
            .zip(op.apply(y, yt))
            .for_each(|(a, v)| *a += v);
    }
    let k = forcing.len() as f64;
    Ok(acc.into_iter().map(|a| 0.5 * a / k).collect())
}

/// Shifted form of the averaged field, `B(V + xbar, xbar)`, for an operator
/// that passed [`verify_bracket`].
pub fn shifted_averaged_rhs<B: Bilinear + ?Sized>(
    op: &VerifiedBracket<'_, B>,
    shift: &[f64],
    xbar: &[f64],
) -> Result<Vec<f64>, AveragingError> {
    let n = op.inner.dim();
    check_len(n, shift.len())?;
    check_len(n, xbar.len())?;
    let moved: Vec<f64> = shift.iter().zip(xbar).map(|(v, x)| v + x).collect();
    Ok(op.inner.apply(&moved, xbar))
}

/// Drift vector `V0 = 1/2 avg [v, v^t]` of a zero-mean algebra-valued
/// oscillation `v`.
pub fn drift_vector(
    algebra: &LieAlgebra,
    velocity: &OscillationProfile,
) -> Result<AlgebraElement, AveragingError> {
    check_len(algebra.dim(), velocity.dim())?;
    let primitive = velocity.oscillating_primitive()?;
    let mut acc = AlgebraElement::zeros(algebra.dim());
    for (v, vt) in velocity.rows().zip(primitive.rows()) {
        let b = algebra.bracket(&AlgebraElement::from(v), &AlgebraElement::from(vt))?;
        acc = &acc + &b;
    }
    Ok(acc.scaled(0.5 / velocity.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{builtin_algebra, AlgebraParams};
    use nalgebra::{DMatrix, DVector};

    fn so3() -> LieAlgebra {
        builtin_algebra("so3", &AlgebraParams::default()).unwrap()
    }

    fn circle(count: usize, a: f64) -> OscillationProfile {
        OscillationProfile::from_fn(3, count, |t| vec![a * t.cos(), a * t.sin(), 0.0]).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |w, (x, y)| w.max((x - y).abs()))
    }

    #[test]
    fn periodic_means() {
        let cos = OscillationProfile::from_fn(1, 64, |t| vec![t.cos()]).unwrap();
        assert!(cos.periodic_mean()[0].abs() < 1e-15);
        let c = OscillationProfile::from_fn(2, 64, |_| vec![1.5, -2.0]).unwrap();
        assert_eq!(c.periodic_mean(), vec![1.5, -2.0]);
        let cos2 = OscillationProfile::from_fn(1, 64, |t| vec![t.cos().powi(2)]).unwrap();
        assert!((cos2.periodic_mean()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn primitives() {
        let cos = OscillationProfile::from_fn(1, 64, |t| vec![t.cos()]).unwrap();
        let p = cos.oscillating_primitive().unwrap();
        for (j, row) in p.rows().enumerate() {
            let t = 2.0 * PI * j as f64 / 64.0;
            assert!((row[0] - t.sin()).abs() < 1e-12);
        }
        let sin = OscillationProfile::from_fn(1, 64, |t| vec![t.sin()]).unwrap();
        let p = sin.oscillating_primitive().unwrap();
        for (j, row) in p.rows().enumerate() {
            let t = 2.0 * PI * j as f64 / 64.0;
            assert!((row[0] + t.cos()).abs() < 1e-12);
        }
        let zero = OscillationProfile::from_fn(2, 32, |_| vec![0.0, 0.0]).unwrap();
        assert!(zero.oscillating_primitive().unwrap().rows().all(|r| r == [0.0, 0.0]));
    }

    #[test]
    fn primitive_rejects_nonzero_mean() {
        let p = OscillationProfile::from_fn(1, 32, |t| vec![1.0 + t.cos()]).unwrap();
        assert!(matches!(
            p.oscillating_primitive(),
            Err(AveragingError::NonZeroMean(_))
        ));
        assert!(matches!(
            OscillationProfile::from_fn(1, 8, |t| vec![t.cos()]),
            Err(AveragingError::TooFewSamples(8))
        ));
    }

    #[test]
    fn interpolant_reproduces_band_limited_signal() {
        let p = OscillationProfile::from_fn(2, 32, |t| {
            vec![(3.0 * t).sin() - 0.5 * t.cos(), 0.25 + (2.0 * t).cos()]
        })
        .unwrap();
        let interp = p.interpolant();
        for t in [0.1, 1.3, 2.9, 5.5] {
            let v = interp.value(t);
            assert!((v[0] - ((3.0 * t).sin() - 0.5 * t.cos())).abs() < 1e-13);
            assert!((v[1] - (0.25 + (2.0 * t).cos())).abs() < 1e-13);
        }
    }

    #[test]
    fn averaged_rhs_trivial_cases() {
        let a = so3();
        let b = CoadjointBilinear::new(&a);
        let p = circle(64, 1.0);
        assert_eq!(averaged_rhs(&b, &p, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let h3 = builtin_algebra("heisenberg3", &AlgebraParams::default()).unwrap();
        let bh = CoadjointBilinear::new(&h3);
        let zero = OscillationProfile::from_fn(3, 64, |_| vec![0.0; 3]).unwrap();
        let x = [0.3, 0.5, -0.7];
        assert_eq!(averaged_rhs(&bh, &zero, &x).unwrap(), bh.apply(&x, &x));
    }

    #[test]
    fn so3_circle_is_an_averaged_equilibrium_at_e3() {
        let a = so3();
        let b = CoadjointBilinear::new(&a);
        let p = circle(64, 1.0);
        let r = averaged_rhs(&b, &p, &[0.0, 0.0, 1.0]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-10));
        let v = verify_bracket(&b, 1).unwrap();
        let shift = shift_vector(&b, &p).unwrap();
        let s = shifted_averaged_rhs(&v, &shift, &[0.0, 0.0, 1.0]).unwrap();
        assert!(max_diff(&r, &s) < 1e-10);
    }

    // Hand computation for y = (cos t, sin t, 0), B(x, y) = y x x:
    // avg B(B(x, y^t), y) = (x2 / 2, -x1 / 2, 0).
    #[test]
    fn so3_averaged_field_closed_form() {
        let a = so3();
        let b = CoadjointBilinear::new(&a);
        let p = circle(64, 1.0);
        let x = [0.4, -0.3, 0.8];
        let r = averaged_rhs(&b, &p, &x).unwrap();
        assert!(max_diff(&r, &[x[1] / 2.0, -x[0] / 2.0, 0.0]) < 1e-14);
        let shift = shift_vector(&b, &p).unwrap();
        assert!(max_diff(&shift, &[0.0, 0.0, 0.5]) < 1e-14);
    }

    #[test]
    fn shifted_form_trivial_cases() {
        let a = so3();
        let b = CoadjointBilinear::new(&a);
        let v = verify_bracket(&b, 3).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(shifted_averaged_rhs(&v, &[0.0; 3], &x).unwrap(), b.apply(&x, &x));
        assert_eq!(shifted_averaged_rhs(&v, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn verification_rejects_non_brackets() {
        let a = so3()
            .with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])))
            .unwrap();
        let b = CoadjointBilinear::new(&a);
        assert!(matches!(
            verify_bracket(&b, 0),
            Err(AveragingError::FlagsNotVerified { .. })
        ));
        let undeclared = FnBilinear::new(1, BracketFlags::default(), |x: &[f64], y: &[f64]| {
            vec![x[0] * y[0]]
        });
        assert!(matches!(
            verify_bracket(&undeclared, 0),
            Err(AveragingError::FlagsNotDeclared)
        ));
    }

    #[test]
    fn drift_examples() {
        let a = so3();
        for amp in [0.5, 1.0, 2.0] {
            let d64 = drift_vector(&a, &circle(64, amp)).unwrap();
            let d128 = drift_vector(&a, &circle(128, amp)).unwrap();
            assert!(max_diff(d64.coords(), &[0.0, 0.0, -amp * amp / 2.0]) < 1e-12);
            assert!(max_diff(d64.coords(), d128.coords()) < 1e-12);
        }
        let line = OscillationProfile::from_fn(3, 64, |t| vec![t.cos(), 0.0, 0.0]).unwrap();
        assert!(drift_vector(&a, &line).unwrap().max_abs() < 1e-15);
        let zero = OscillationProfile::from_fn(3, 64, |_| vec![0.0; 3]).unwrap();
        assert_eq!(drift_vector(&a, &zero).unwrap().max_abs(), 0.0);
    }

    // The coadjoint averaged field equals -ad*_{V0} on any algebra and
    // inertia, with V0 the drift of v = I^{-1} y.
    #[test]
    fn averaged_field_matches_drift_form() {
        let a = so3()
            .with_inertia(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])))
            .unwrap();
        let b = CoadjointBilinear::new(&a);
        let v = OscillationProfile::from_fn(3, 64, |t| {
            vec![t.cos(), 0.5 * t.sin() + 0.2 * (2.0 * t).cos(), -(2.0 * t).sin()]
        })
        .unwrap();
        let y = OscillationProfile::from_samples(
            3,
            v.rows()
                .flat_map(|r| a.inertia_apply(&AlgebraElement::from(r)).unwrap().into_coords())
                .collect(),
        )
        .unwrap();
        let drift = drift_vector(&a, &v).unwrap();
        let m = [0.3, -0.6, 0.4];
        let avg = averaged_rhs(&b, &y, &m).unwrap();
        let shifted = a.shifted_euler_rhs(&DualElement::from(&m[..]), &drift).unwrap();
        assert!(max_diff(&avg, shifted.coords()) < 1e-12);
    }
}
