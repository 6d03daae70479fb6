//! Pseudo-spectral solver for the 2D Craik-Leibovich vorticity equation
//! on the torus `[0, 2 pi)^2`:
//!
//! ```text
//! d omega / ds + (v + V0) . grad omega = 0
//! ```
//!
//! where `v` comes from the stream function `psi` with `lap psi = -omega`
//! and `v = (-d_y psi, d_x psi)`, and `V0` is a constant Stokes drift.
//! Forward transforms are unnormalized, inverse transforms divide by `N^2`.
//! Products are dealiased with the 2/3 rule.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::harness::format_float;
use crate::expr::{ExprError, Expression};
use crate::integrate::try_integrate_fixed;

/// Largest accepted `|mean(omega)|`.
pub const MEAN_TOL: f64 = 1e-12;
/// CFL number above which a run is flagged.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClError {
    #[error("grid size must be a power of two >= 16, got {0}")]
    BadGridSize(usize),
    #[error("expected {expected} grid values, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("vorticity must have zero mean, got {0:e}")]
    NonZeroMean(f64),
    #[error("non-finite grid value")]
    NonFinite,
    #[error("non-finite Stokes drift")]
    BadDrift,
    #[error("grid sizes differ ({0} vs {1})")]
    GridMismatch(usize, usize),
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Vorticity on the `N x N` grid; node `(i, j)` sits at
/// `(2 pi i / N, 2 pi j / N)` and is stored at `i * N + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityField {
    n: usize,
    omega: Vec<f64>,
}

fn check_grid(n: usize) -> Result<(), ClError> {
    if n >= 16 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(ClError::BadGridSize(n))
    }
}

impl VorticityField {
    pub fn new(n: usize, omega: Vec<f64>) -> Result<Self, ClError> {
        check_grid(n)?;
        if omega.len() != n * n {
            return Err(ClError::BadLength {
                expected: n * n,
                got: omega.len(),
            });
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(ClError::NonFinite);
        }
        let field = VorticityField { n, omega };
        let mean = field.mean();
        if mean.abs() > MEAN_TOL {
            return Err(ClError::NonZeroMean(mean));
        }
        Ok(field)
    }

    pub fn zeros(n: usize) -> Result<Self, ClError> {
        Self::new(n, vec![0.0; n * n])
    }

    /// Samples an expression in `x` and `y`.
    pub fn from_expression(n: usize, expr: &Expression) -> Result<Self, ClError> {
        check_grid(n)?;
        let bound = expr.bind(&["x", "y"])?;
        let h = 2.0 * PI / n as f64;
        let mut omega = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                omega.push(bound.eval(&[h * i as f64, h * j as f64])?);
            }
        }
        Self::new(n, omega)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.n + j]
    }

    pub fn mean(&self) -> f64 {
        self.omega.iter().sum::<f64>() / self.omega.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.omega.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }

    pub fn max_diff(&self, other: &VorticityField) -> f64 {
        self.omega
            .iter()
            .zip(&other.omega)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Band-limited translate `omega(x - shift)`, evaluated on the grid.
    pub fn translated(&self, shift: [f64; 2]) -> VorticityField {
        let spec = Spectral::new(self.n);
        let mut hat = spec.forward(&self.omega);
        for i in 0..self.n {
            for j in 0..self.n {
                let (kx, ky) = (spec.wave(i), spec.wave(j));
                let (kx, ky) = (nyquist_zero(kx, self.n), nyquist_zero(ky, self.n));
                hat[i * self.n + j] *= Complex64::from_polar(1.0, -(kx * shift[0] + ky * shift[1]));
            }
        }
        VorticityField {
            n: self.n,
            omega: spec.inverse_real(hat),
        }
    }

    /// Row-major CSV with a `# N=<N>` header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# N={}\n", self.n);
        for row in self.omega.chunks_exact(self.n) {
            let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ClError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(ClError::Csv {
            line: 1,
            message: "empty file".into(),
        })?;
        let n: usize = header
            .trim()
            .strip_prefix("# N=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or(ClError::Csv {
                line: 1,
                message: "expected `# N=<N>` header".into(),
            })?;
        let mut omega = Vec::with_capacity(n * n);
        for (idx, line) in lines {
            for tok in line.split(',') {
                omega.push(tok.trim().parse::<f64>().map_err(|_| ClError::Csv {
                    line: idx + 1,
                    message: format!("bad number `{}`", tok.trim()),
                })?);
            }
        }
        Self::new(n, omega)
    }

    /// Mean, variance, third and fourth central moments of the grid values.
    pub fn moments(&self) -> [f64; 4] {
        let n = self.omega.len() as f64;
        let mean = self.mean();
        let mut m = [mean, 0.0, 0.0, 0.0];
        for w in &self.omega {
            let d = w - mean;
            m[1] += d * d;
            m[2] += d * d * d;
            m[3] += d * d * d * d;
        }
        m[1] /= n;
        m[2] /= n;
        m[3] /= n;
        m
    }
}

/// Random band-limited zero-mean field `sum a_k cos(k.x) + b_k sin(k.x)`
/// over wavevectors `0 < |k| <= max_mode`, with `a_k, b_k` uniform in
/// `[-1, 1]` divided by `|k|`.
pub fn random_band_limited(n: usize, max_mode: usize, seed: u64) -> Result<VorticityField, ClError> {
    check_grid(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = max_mode as i64;
    let mut modes = Vec::new();
    for kx in 0..=m {
        for ky in -m..=m {
            let upper = kx > 0 || ky > 0;
            if upper && kx * kx + ky * ky <= m * m {
                let norm = ((kx * kx + ky * ky) as f64).sqrt();
                let a = rng.gen_range(-1.0..=1.0) / norm;
                let b = rng.gen_range(-1.0..=1.0) / norm;
                modes.push((kx as f64, ky as f64, a, b));
            }
        }
    }
    let h = 2.0 * PI / n as f64;
    let mut omega = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (h * i as f64, h * j as f64);
            omega.push(
                modes
                    .iter()
                    .map(|(kx, ky, a, b)| {
                        let phase = kx * x + ky * y;
                        a * phase.cos() + b * phase.sin()
                    })
                    .sum::<f64>(),
            );
        }
    }
    let mean = omega.iter().sum::<f64>() / omega.len() as f64;
    omega.iter_mut().for_each(|w| *w -= mean);
    VorticityField::new(n, omega)
}

/// Constant Stokes drift `V0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StokesDrift(pub [f64; 2]);

impl StokesDrift {
    pub fn new(v0: [f64; 2]) -> Result<Self, ClError> {
        if v0.iter().all(|v| v.is_finite()) {
            Ok(StokesDrift(v0))
        } else {
            Err(ClError::BadDrift)
        }
    }

    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }
}

/// Velocity components on the grid, same layout as [`VorticityField`].
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub n: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Velocity {
    pub fn max_speed(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Max of the spectral divergence `d_x u + d_y v`.
    pub fn max_divergence(&self) -> f64 {
        let spec = Spectral::new(self.n);
        let uh = spec.forward(&self.u);
        let vh = spec.forward(&self.v);
        let mut div = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                let idx = i * self.n + j;
                let kx = nyquist_zero(spec.wave(i), self.n);
                let ky = nyquist_zero(spec.wave(j), self.n);
                div[idx] = Complex64::i() * (kx * uh[idx] + ky * vh[idx]);
            }
        }
        spec.inverse_real(div).iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

fn nyquist_zero(k: f64, n: usize) -> f64 {
    if k.abs() == (n / 2) as f64 {
        0.0
    } else {
        k
    }
}

/// Plans and wavenumber tables for one grid size.
struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // 2/3-rule mask per 1D index
    keep: Vec<bool>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let cutoff = n as f64 / 3.0;
        let keep = (0..n)
            .map(|i| {
                let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                k.abs() <= cutoff
            })
            .collect();
        Spectral {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            keep,
        }
    }

    fn wave(&self, i: usize) -> f64 {
        if i <= self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = real.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    fn inverse_real(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut hat, &self.inv);
        let scale = 1.0 / (self.n * self.n) as f64;
        hat.iter().map(|c| c.re * scale).collect()
    }

    fn dealias(&self, hat: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if !(self.keep[i] && self.keep[j]) {
                    hat[i * n + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    fn velocity_hat(&self, omega_hat: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        let mut uh = vec![zero; n * n];
        let mut vh = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let (kx, ky) = (self.wave(i), self.wave(j));
                let k2 = kx * kx + ky * ky;
                if k2 == 0.0 {
                    continue;
                }
                let (kx, ky) = (nyquist_zero(kx, n), nyquist_zero(ky, n));
                let psi = omega_hat[idx] / k2;
                uh[idx] = Complex64::i() * (-ky) * psi;
                vh[idx] = Complex64::i() * kx * psi;
            }
        }
        (uh, vh)
    }

    fn velocity(&self, omega: &[f64]) -> Velocity {
        let (uh, vh) = self.velocity_hat(&self.forward(omega));
        Velocity {
            n: self.n,
            u: self.inverse_real(uh),
            v: self.inverse_real(vh),
        }
    }

    fn rhs(&self, omega: &[f64], drift: &StokesDrift) -> Vec<f64> {
        let n = self.n;
        let mut hat = self.forward(omega);
        self.dealias(&mut hat);
        let (uh, vh) = self.velocity_hat(&hat);
        let mut dx = vec![Complex64::new(0.0, 0.0); n * n];
        let mut dy = dx.clone();
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let kx = nyquist_zero(self.wave(i), n);
                let ky = nyquist_zero(self.wave(j), n);
                dx[idx] = Complex64::i() * kx * hat[idx];
                dy[idx] = Complex64::i() * ky * hat[idx];
            }
        }
        let u = self.inverse_real(uh);
        let v = self.inverse_real(vh);
        let wx = self.inverse_real(dx);
        let wy = self.inverse_real(dy);
        let product: Vec<f64> = (0..n * n)
            .map(|p| -((u[p] + drift.0[0]) * wx[p] + (v[p] + drift.0[1]) * wy[p]))
            .collect();
        let mut ph = self.forward(&product);
        self.dealias(&mut ph);
        let mean = ph[0].re / (n * n) as f64;
        let scale = 1.0 + product.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
        debug_assert!(mean.abs() <= 1e-10 * scale, "advection term has mean {mean:e}");
        ph[0] = Complex64::new(0.0, 0.0);
        self.inverse_real(ph)
    }
}

/// Velocity `v_hat = i k_perp omega_hat / |k|^2` with `k_perp = (-k2, k1)`.
pub fn vorticity_to_velocity(w: &VorticityField) -> Velocity {
    Spectral::new(w.n).velocity(&w.omega)
}

/// `-(v + V0) . grad omega`.
pub fn cl_vorticity_rhs(w: &VorticityField, d: &StokesDrift) -> VorticityField {
    VorticityField {
        n: w.n,
        omega: Spectral::new(w.n).rhs(&w.omega, d),
    }
}

/// `dt (max |v| + |V0|) N / (2 pi)`.
pub fn cfl_number(w: &VorticityField, d: &StokesDrift, dt: f64) -> f64 {
    let speed = vorticity_to_velocity(w).max_speed() + d.norm();
    dt * speed * w.n as f64 / (2.0 * PI)
}

/// Outcome of a CL run.
#[derive(Debug, Clone)]
pub struct ClRun {
    pub times: Vec<f64>,
    pub fields: Vec<VorticityField>,
    /// Largest CFL number seen over the recorded fields.
    pub max_cfl: f64,
    pub cfl_warning: bool,
    pub diverged_at: Option<f64>,
}

impl ClRun {
    pub fn last(&self) -> &VorticityField {
        self.fields.last().expect("runs record the initial field")
    }
}

/// One RK4 step.
pub fn cl_step(w: &VorticityField, d: &StokesDrift, dt: f64) -> Result<VorticityField, ClError> {
    let spec = Spectral::new(w.n);
    let next = crate::integrate::rk4_step(|_, x| spec.rhs(x, d), &w.omega, 0.0, dt);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(ClError::NonFinite);
    }
    Ok(VorticityField { n: w.n, omega: next })
}

/// RK4 over `[0, t_end]`, keeping every `stride`-th field and the last.
pub fn cl_integrate(w0: &VorticityField, d: &StokesDrift, t_end: f64, dt: f64, stride: usize) -> ClRun {
    let spec = Spectral::new(w0.n);
    let traj = match try_integrate_fixed(
        |_, x| Ok::<_, std::convert::Infallible>(spec.rhs(x, d)),
        &w0.omega,
        0.0,
        t_end,
        dt,
        stride,
    ) {
        Ok(t) => t,
        Err(never) => match never {},
    };
    let fields: Vec<VorticityField> = traj
        .states
        .into_iter()
        .map(|omega| VorticityField { n: w0.n, omega })
        .collect();
    let max_cfl = fields
        .iter()
        .map(|f| dt * (spec.velocity(&f.omega).max_speed() + d.norm()) * w0.n as f64 / (2.0 * PI))
        .fold(0.0_f64, f64::max);
    ClRun {
        times: traj.times,
        fields,
        max_cfl,
        cfl_warning: max_cfl > CFL_LIMIT,
        diverged_at: traj.diverged_at,
    }
}

/// `(2 pi / N)^2 sum f(omega_ij)` for an expression `f` in `w`.
pub fn functional_if(w: &VorticityField, f: &Expression) -> Result<f64, ClError> {
    let bound = f.bind(&["w"])?;
    let cell = (2.0 * PI / w.n as f64).powi(2);
    let mut acc = 0.0;
    for v in &w.omega {
        acc += bound.eval(&[*v])?;
    }
    Ok(cell * acc)
}

/// `1/2 (2 pi / N)^2 sum |v + V0|^2`.
pub fn energy_shifted(w: &VorticityField, d: &StokesDrift) -> f64 {
    let vel = vorticity_to_velocity(w);
    let cell = (2.0 * PI / w.n as f64).powi(2);
    let sum: f64 = vel
        .u
        .iter()
        .zip(&vel.v)
        .map(|(u, v)| (u + d.0[0]).powi(2) + (v + d.0[1]).powi(2))
        .sum();
    0.5 * cell * sum
}

/// CSV time series `t,energy,<name>...` of the shifted energy and the given
/// functionals along a run.
pub fn functional_series(
    run: &ClRun,
    d: &StokesDrift,
    functionals: &[(String, Expression)],
) -> Result<String, ClError> {
    let mut out = String::from("t,energy");
    for (name, _) in functionals {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, f) in run.times.iter().zip(&run.fields) {
        write!(out, "{},{}", format_float(*t), format_float(energy_shifted(f, d))).expect("string write");
        for (_, e) in functionals {
            write!(out, ",{}", format_float(functional_if(f, e)?)).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, s: &str) -> VorticityField {
        VorticityField::from_expression(n, &Expression::parse(s).unwrap()).unwrap()
    }

    fn grid_max(n: usize, values: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        let h = 2.0 * PI / n as f64;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((values[i * n + j] - f(h * i as f64, h * j as f64)).abs());
            }
        }
        worst
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(VorticityField::zeros(8), Err(ClError::BadGridSize(8))));
        assert!(matches!(VorticityField::zeros(24), Err(ClError::BadGridSize(24))));
        let err = VorticityField::from_expression(16, &Expression::parse("1 + cos(x)").unwrap());
        assert!(matches!(err, Err(ClError::NonZeroMean(_))));
    }

    #[test]
    fn velocity_convention() {
        let w = field(32, "sin(x)");
        let vel = vorticity_to_velocity(&w);
        assert!(vel.u.iter().all(|u| u.abs() < 1e-14));
        assert!(grid_max(32, &vel.v, |x, _| x.cos()) < 1e-14);
        let zero = vorticity_to_velocity(&VorticityField::zeros(16).unwrap());
        assert!(zero.u.iter().chain(&zero.v).all(|c| *c == 0.0));
    }

    #[test]
    fn rhs_examples() {
        let w = field(32, "cos(x) * cos(y)");
        assert!(cl_vorticity_rhs(&w, &StokesDrift::default()).max_abs() < 1e-12);
        let w = field(32, "cos(x)");
        let r = cl_vorticity_rhs(&w, &StokesDrift([1.0, 0.0]));
        assert!(grid_max(32, r.values(), |x, _| x.sin()) < 1e-13);
        let zero = VorticityField::zeros(16).unwrap();
        assert_eq!(cl_vorticity_rhs(&zero, &StokesDrift([0.3, 0.2])).max_abs(), 0.0);
    }

    #[test]
    fn functional_examples() {
        let w = field(32, "cos(x)");
        let one = functional_if(&w, &Expression::constant(1.0)).unwrap();
        assert!((one - 4.0 * PI * PI).abs() < 1e-12);
        assert!(functional_if(&w, &Expression::parse("w").unwrap()).unwrap().abs() < 1e-12);
        let sq = functional_if(&w, &Expression::parse("w^2").unwrap()).unwrap();
        assert!((sq - 2.0 * PI * PI).abs() < 1e-12);
        let zero = VorticityField::zeros(16).unwrap();
        assert!(functional_if(&zero, &Expression::parse("1 / w").unwrap()).is_err());
    }

    #[test]
    fn energy_examples() {
        let zero = VorticityField::zeros(16).unwrap();
        assert!((energy_shifted(&zero, &StokesDrift([1.0, 0.0])) - 2.0 * PI * PI).abs() < 1e-12);
        let w = field(32, "cos(x)");
        let e = energy_shifted(&w, &StokesDrift::default());
        assert!((e - PI * PI).abs() < 1e-12);
        let c = 0.7;
        let vel = vorticity_to_velocity(&w);
        let cell = (2.0 * PI / 32.0_f64).powi(2);
        let int_v2: f64 = cell * vel.v.iter().sum::<f64>();
        let expected = PI * PI + 0.5 * c * c * 4.0 * PI * PI + c * int_v2;
        assert!((energy_shifted(&w, &StokesDrift([0.0, c])) - expected).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let w = field(16, "sin(x + 2*y) - 0.3 * cos(3*x)");
        let text = w.to_csv();
        assert!(text.starts_with("# N=16\n"));
        assert_eq!(VorticityField::from_csv(&text).unwrap(), w);
    }

    #[test]
    fn translation_oracle_short() {
        let w = field(32, "cos(x) * cos(y)");
        let shifted = w.translated([0.3, -0.2]);
        assert!(grid_max(32, shifted.values(), |x, y| (x - 0.3).cos() * (y + 0.2).cos()) < 1e-13);
    }

    #[test]
    fn random_fields_are_reproducible() {
        let a = random_band_limited(32, 4, 7).unwrap();
        assert_eq!(a, random_band_limited(32, 4, 7).unwrap());
        assert_ne!(a, random_band_limited(32, 4, 8).unwrap());
        assert!(a.mean().abs() < 1e-15);
        let hat = Spectral::new(32).forward(a.values());
        for i in 0..32 {
            for j in 0..32 {
                let (kx, ky) = (Spectral::new(32).wave(i), Spectral::new(32).wave(j));
                if kx * kx + ky * ky > 16.0 {
                    assert!(hat[i * 32 + j].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cfl_guard() {
        let w = field(16, "cos(x) * cos(y)");
        let run = cl_integrate(&w, &StokesDrift([10.0, 0.0]), 0.5, 0.5, 1);
        assert!(run.cfl_warning);
        let run = cl_integrate(&w, &StokesDrift([0.1, 0.0]), 0.01, 0.01, 1);
        assert!(!run.cfl_warning);
    }
}
