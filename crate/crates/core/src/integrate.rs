//! Fixed-step classical RK4.

use std::convert::Infallible;
use std::f64::consts::PI;

use crate::averaging::{AveragingError, Bilinear, OscillationProfile, TrigInterpolant};
use crate::expr::{BoundExpr, ExprError, Expression};

/// Default number of RK4 steps per forcing period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 256;

/// Sampled solution curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stride: usize,
    pub dt: f64,
    /// Time of the first step that produced a non-finite state. The
    /// trajectory stops at the last finite state.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    /// Piecewise cubic (Hermite with finite-difference slopes) interpolation
    /// of the sampled states; clamps outside the sampled range.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        if n == 1 || t <= self.times[0] {
            return Some(self.states[0].clone());
        }
        if t >= self.times[n - 1] {
            return Some(self.states[n - 1].clone());
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Some(self.states[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let slope = |j: usize, c: usize| -> f64 {
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(n - 1);
            (self.states[hi][c] - self.states[lo][c]) / (self.times[hi] - self.times[lo])
        };
        let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
        let h10 = u.powi(3) - 2.0 * u * u + u;
        let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
        let h11 = u.powi(3) - u * u;
        Some(
            (0..self.states[i].len())
                .map(|c| {
                    h00 * self.states[i][c]
                        + h10 * h * slope(i, c)
                        + h01 * self.states[i + 1][c]
                        + h11 * h * slope(i + 1, c)
                })
                .collect(),
        )
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// One classical RK4 step with a fallible right-hand side.
pub fn try_rk4_step<E>(
    f: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    x: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>, E> {
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(x, dt, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// One classical RK4 step. Non-finite stages propagate into the result.
pub fn rk4_step(mut f: impl FnMut(f64, &[f64]) -> Vec<f64>, x: &[f64], t: f64, dt: f64) -> Vec<f64> {
    let mut g = |t: f64, x: &[f64]| Ok::<_, Infallible>(f(t, x));
    match try_rk4_step(&mut g, x, t, dt) {
        Ok(v) => v,
        Err(never) => match never {},
    }
}

/// Number of steps taken by [`integrate_fixed`].
pub fn step_count(t0: f64, t1: f64, dt: f64) -> usize {
    ((t1 - t0) / dt).round() as usize
}

/// Integrates from `t0` to `t1` with `round((t1 - t0) / dt)` steps,
/// recording every `stride`-th state plus the first and last. Evaluation
/// errors abort; non-finite states end the run with `diverged_at` set.
pub fn try_integrate_fixed<E>(
    mut f: impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory, E> {
    assert!(dt > 0.0 && t1 > t0, "need t1 > t0 and dt > 0");
    let stride = stride.max(1);
    let steps = step_count(t0, t1, dt);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        stride,
        dt,
        diverged_at: None,
    };
    let mut x = x0.to_vec();
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        let next = try_rk4_step(&mut f, &x, t, dt)?;
        let t_next = t0 + (i + 1) as f64 * dt;
        if next.iter().any(|v| !v.is_finite()) {
            traj.diverged_at = Some(t_next);
            if *traj.times.last().unwrap() != t {
                traj.times.push(t);
                traj.states.push(x);
            }
            return Ok(traj);
        }
        x = next;
        if (i + 1) % stride == 0 || i + 1 == steps {
            traj.times.push(t_next);
            traj.states.push(x.clone());
        }
    }
    Ok(traj)
}

pub fn integrate_fixed(
    mut f: impl FnMut(f64, &[f64]) -> Vec<f64>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    stride: usize,
) -> Trajectory {
    match try_integrate_fixed(|t, x| Ok::<_, Infallible>(f(t, x)), x0, t0, t1, dt, stride) {
        Ok(traj) => traj,
        Err(never) => match never {},
    }
}

/// The oscillating part `y1(t)` of the fast system.
#[derive(Debug, Clone)]
pub enum Forcing {
    /// Per-coordinate expressions in `t`.
    Expressions(Vec<BoundExpr>),
    /// Trigonometric interpolation of sampled data.
    Sampled(TrigInterpolant),
}

impl Forcing {
    pub fn from_expressions(exprs: &[Expression]) -> Result<Self, ExprError> {
        Ok(Forcing::Expressions(
            exprs.iter().map(|e| e.bind(&["t"])).collect::<Result<_, _>>()?,
        ))
    }

    pub fn from_profile(profile: &OscillationProfile) -> Self {
        Forcing::Sampled(profile.interpolant())
    }

    pub fn dim(&self) -> usize {
        match self {
            Forcing::Expressions(e) => e.len(),
            Forcing::Sampled(s) => s.dim(),
        }
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>, ExprError> {
        match self {
            Forcing::Expressions(e) => e.iter().map(|b| b.eval(&[t])).collect(),
            Forcing::Sampled(s) => Ok(s.value(t)),
        }
    }

    /// Samples one period at `count` points.
    pub fn profile(&self, count: usize) -> Result<OscillationProfile, AveragingError> {
        let mut samples = Vec::with_capacity(count * self.dim());
        for j in 0..count {
            samples.extend(self.value(2.0 * PI * j as f64 / count as f64)?);
        }
        OscillationProfile::from_samples(self.dim(), samples)
    }
}

/// `B(x, eps y1(t) + x)`.
pub fn fast_system_rhs<B: Bilinear + ?Sized>(
    op: &B,
    forcing: &Forcing,
    eps: f64,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>, AveragingError> {
    let n = op.dim();
    for got in [forcing.dim(), x.len()] {
        if got != n {
            return Err(AveragingError::DimensionMismatch { expected: n, got });
        }
    }
    let y = forcing.value(t)?;
    let arg: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| eps * yi + xi).collect();
    Ok(op.apply(x, &arg))
}
