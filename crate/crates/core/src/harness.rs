//! Epsilon sweeps comparing the fast system
//! `dmu/dt = -ad*_{eps v1(t) + I^{-1} mu} mu`, `mu(0) = eps^2 m_init`, with
//! its averaged counterpart `dm/ds = -ad*_{I^{-1} m + V1} m`, `s = eps^2 t`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, DualElement, LieAlgebra};
use crate::averaging::{drift_vector, AveragingError, DEFAULT_SAMPLES};
use crate::expr::{ExprError, Expression};
use crate::integrate::{try_integrate_fixed, Forcing, Trajectory, DEFAULT_STEPS_PER_PERIOD};

/// Default number of slow-time steps of the averaged run.
pub const DEFAULT_AVERAGED_STEPS: usize = 4096;
/// Accepted band for the fitted log-log slope.
pub const SLOPE_BAND: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("sweep CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fast/slow experiment on a Lie algebra.
#[derive(Debug, Clone)]
pub struct FastSlowScenario {
    pub algebra: LieAlgebra,
    /// Velocity oscillation `v1(t)`, one expression per coordinate.
    pub v1: Vec<Expression>,
    pub m_init: DualElement,
    pub epsilons: Vec<f64>,
    /// Slow horizon `T`.
    pub horizon: f64,
    pub steps_per_period: usize,
    /// Samples per period used for the drift.
    pub samples: usize,
    pub averaged_steps: usize,
    /// Radius (energy norm) the averaged solution must stay inside for the
    /// claim checks to apply.
    pub ball_radius: Option<f64>,
}

impl FastSlowScenario {
    pub fn new(
        algebra: LieAlgebra,
        v1: Vec<Expression>,
        m_init: DualElement,
        epsilons: Vec<f64>,
        horizon: f64,
    ) -> Result<Self, HarnessError> {
        let s = FastSlowScenario {
            algebra,
            v1,
            m_init,
            epsilons,
            horizon,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            samples: DEFAULT_SAMPLES,
            averaged_steps: DEFAULT_AVERAGED_STEPS,
            ball_radius: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let n = self.algebra.dim();
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.v1.len() != n {
            return bad(format!("v1 has {} components, algebra has dimension {n}", self.v1.len()));
        }
        if self.m_init.dim() != n {
            return bad(format!("m_init has {} components, algebra has dimension {n}", self.m_init.dim()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("epsilons must lie in (0, 1)".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be distinct and decreasing".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("T must be positive".into());
        }
        if self.steps_per_period == 0 || self.averaged_steps == 0 {
            return bad("step counts must be positive".into());
        }
        self.forcing()?.profile(self.samples)?.oscillating_primitive()?;
        Ok(())
    }

    pub fn forcing(&self) -> Result<Forcing, HarnessError> {
        Ok(Forcing::from_expressions(&self.v1)?)
    }

    /// `V1 = 1/2 avg [v1, v1^t]` from `samples` points per period.
    pub fn drift(&self) -> Result<AlgebraElement, HarnessError> {
        let profile = self.forcing()?.profile(self.samples)?;
        Ok(drift_vector(&self.algebra, &profile)?)
    }
}

/// `E = 1/2 <mu + I V, I^{-1} mu + V>`.
pub fn shifted_energy(algebra: &LieAlgebra, drift: &AlgebraElement, mu: &DualElement) -> Result<f64, HarnessError> {
    let moved = mu + &algebra.inertia_apply(drift)?;
    let velocity = &algebra.inertia_solve(mu)? + drift;
    Ok(0.5 * crate::algebra::pairing(&moved, &velocity)?)
}

/// Fast system over `[0, T / eps^2]`, returning `mu / eps^2` once per
/// forcing period.
pub fn run_fast(s: &FastSlowScenario, eps: f64) -> Result<Trajectory, HarnessError> {
    if !(eps > 0.0) {
        return Err(HarnessError::Scenario(format!("epsilon must be positive, got {eps}")));
    }
    let forcing = s.forcing()?;
    let a = &s.algebra;
    let dt = 2.0 * PI / s.steps_per_period as f64;
    let x0: Vec<f64> = s.m_init.coords().iter().map(|m| eps * eps * m).collect();
    let mut traj = try_integrate_fixed(
        |t, x| -> Result<Vec<f64>, HarnessError> {
            let mu = DualElement::from(x);
            let v1 = AlgebraElement::new(forcing.value(t)?);
            let velocity = &v1.scaled(eps) + &a.inertia_solve(&mu)?;
            Ok((-a.coadjoint(&velocity, &mu)?).into_coords())
        },
        &x0,
        0.0,
        s.horizon / (eps * eps),
        dt,
        s.steps_per_period,
    )?;
    let scale = 1.0 / (eps * eps);
    for state in &mut traj.states {
        state.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(traj)
}

/// Averaged system over slow time `[0, T]`, every step recorded.
pub fn run_averaged(s: &FastSlowScenario) -> Result<Trajectory, HarnessError> {
    let drift = s.drift()?;
    let a = &s.algebra;
    try_integrate_fixed(
        |_, x| -> Result<Vec<f64>, HarnessError> {
            Ok(a.shifted_euler_rhs(&DualElement::from(x), &drift)?.into_coords())
        },
        s.m_init.coords(),
        0.0,
        s.horizon,
        s.horizon / s.averaged_steps as f64,
        1,
    )
}

/// One row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub max_err: f64,
    pub energy_drift: f64,
    pub diverged: bool,
}

/// Energy-norm distance between the fast samples taken at whole forcing
/// periods and the averaged solution at `s = eps^2 t`.
pub fn compare_runs(
    s: &FastSlowScenario,
    eps: f64,
    fast: &Trajectory,
    averaged: &Trajectory,
) -> Result<f64, HarnessError> {
    let period = 2.0 * PI;
    let slow_end = averaged.times.last().copied().unwrap_or(0.0);
    let mut worst = 0.0_f64;
    for (t, mu) in fast.times.iter().zip(&fast.states) {
        let cycles = t / period;
        if (cycles - cycles.round()).abs() > 1e-9 {
            continue;
        }
        let slow = eps * eps * t;
        if slow > slow_end * (1.0 + 1e-12) {
            break;
        }
        let reference = averaged.interpolate(slow).expect("averaged run is non-empty");
        let diff: Vec<f64> = mu.iter().zip(&reference).map(|(a, b)| a - b).collect();
        worst = worst.max(s.algebra.energy_norm(&DualElement::new(diff))?);
    }
    Ok(worst)
}

/// `max |E(mu*(t)) - E(mu*(0))|` over the fast samples.
pub fn adiabatic_report(s: &FastSlowScenario, fast: &Trajectory) -> Result<f64, HarnessError> {
    let drift = s.drift()?;
    let Some(first) = fast.states.first() else {
        return Ok(0.0);
    };
    let e0 = shifted_energy(&s.algebra, &drift, &DualElement::from(first.as_slice()))?;
    let mut worst = 0.0_f64;
    for state in &fast.states {
        let e = shifted_energy(&s.algebra, &drift, &DualElement::from(state.as_slice()))?;
        worst = worst.max((e - e0).abs());
    }
    Ok(worst)
}

/// Unweighted least-squares slope of `log(max_err)` against `log(eps)` over
/// non-diverged records with positive error.
pub fn fit_slope(records: &[SweepRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.diverged && r.max_err > 0.0 && r.max_err.is_finite())
        .map(|r| (r.epsilon.ln(), r.max_err.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Drift of the averaged-run invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedInvariants {
    /// Relative drift of the shifted energy.
    pub energy: f64,
    /// Relative drift of `|m|`.
    pub casimir: f64,
    /// Largest energy norm along the run.
    pub max_norm: f64,
}

pub fn averaged_invariants(s: &FastSlowScenario, averaged: &Trajectory) -> Result<AveragedInvariants, HarnessError> {
    let drift = s.drift()?;
    let energy = |x: &[f64]| shifted_energy(&s.algebra, &drift, &DualElement::from(x));
    let radius = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let first = &averaged.states[0];
    let (e0, r0) = (energy(first)?, radius(first));
    let mut out = AveragedInvariants {
        energy: 0.0,
        casimir: 0.0,
        max_norm: 0.0,
    };
    for x in &averaged.states {
        out.energy = out.energy.max((energy(x)? - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        out.casimir = out.casimir.max((radius(x) - r0).abs() / r0.max(f64::MIN_POSITIVE));
        out.max_norm = out.max_norm.max(s.algebra.energy_norm(&DualElement::from(x.as_slice()))?);
    }
    Ok(out)
}

/// Everything a sweep produces.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub slope: Option<f64>,
    pub averaged: AveragedInvariants,
    /// False when the averaged solution left the configured ball.
    pub inside_ball: bool,
    pub warnings: Vec<String>,
}

/// Runs every epsilon (in parallel) against one averaged run.
pub fn sweep(s: &FastSlowScenario) -> Result<SweepReport, HarnessError> {
    s.validate()?;
    let averaged = run_averaged(s)?;
    let mut warnings = Vec::new();
    if averaged.diverged() {
        warnings.push("averaged run diverged".to_string());
    }
    let invariants = averaged_invariants(s, &averaged)?;
    let inside_ball = match s.ball_radius {
        Some(r) if invariants.max_norm > r => {
            warnings.push(format!(
                "averaged solution reaches norm {} outside the ball of radius {r}; claim checks skipped",
                format_float(invariants.max_norm)
            ));
            false
        }
        _ => true,
    };
    let records = s
        .epsilons
        .par_iter()
        .map(|&eps| -> Result<SweepRecord, HarnessError> {
            let fast = run_fast(s, eps)?;
            Ok(SweepRecord {
                epsilon: eps,
                max_err: compare_runs(s, eps, &fast, &averaged)?,
                energy_drift: adiabatic_report(s, &fast)?,
                diverged: fast.diverged(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if records.iter().filter(|r| !r.diverged).count() < 2 {
        warnings.push("fewer than two convergent runs; no slope".to_string());
    }
    Ok(SweepReport {
        slope: fit_slope(&records),
        records,
        averaged: invariants,
        inside_ball,
        warnings,
    })
}

/// Outcome of the scaling claims on a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimCheck {
    pub slope_in_band: bool,
    /// `max_err(smallest eps) < max_err(largest eps) / 4`.
    pub error_reduction: bool,
    /// `max_err` non-increasing as eps decreases, one inversion allowed.
    pub monotone: bool,
    /// Spread (max / min) of `energy_drift / eps`.
    pub drift_spread: f64,
}

impl ClaimCheck {
    pub fn passed(&self) -> bool {
        self.slope_in_band && self.error_reduction && self.monotone
    }
}

pub fn check_claims(report: &SweepReport) -> ClaimCheck {
    let r = &report.records;
    let slope_in_band = report
        .slope
        .is_some_and(|m| (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&m));
    let error_reduction = match (r.first(), r.last()) {
        (Some(a), Some(b)) if r.len() >= 2 => b.max_err < a.max_err / 4.0,
        _ => false,
    };
    let inversions = r.windows(2).filter(|w| w[1].max_err > w[0].max_err).count();
    let ratios: Vec<f64> = r.iter().map(|x| x.energy_drift / x.epsilon).collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ClaimCheck {
        slope_in_band,
        error_reduction,
        monotone: inversions <= 1,
        drift_spread: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    }
}

/// Shortest round-trip decimal form; exponent notation outside
/// `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v:?}")
    } else {
        format!("{v:e}")
    }
}

pub const SWEEP_HEADER: &str = "epsilon,max_err,energy_drift,diverged";

pub fn format_sweep_csv(records: &[SweepRecord], slope: Option<f64>) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            format_float(r.epsilon),
            format_float(r.max_err),
            format_float(r.energy_drift),
            r.diverged
        )
        .expect("string write");
    }
    if let Some(m) = slope {
        writeln!(out, "# slope={}", format_float(m)).expect("string write");
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<(Vec<SweepRecord>, Option<f64>), HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SWEEP_HEADER => {}
        _ => {
            return Err(HarnessError::Csv {
                line: 1,
                message: format!("expected header `{SWEEP_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    let mut slope = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let err = |message: String| HarnessError::Csv { line: line_no, message };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = line.strip_prefix("# slope=") {
            slope = Some(v.parse().map_err(|_| err(format!("bad slope `{v}`")))?);
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err("expected 4 fields".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        records.push(SweepRecord {
            epsilon: num(f[0])?,
            max_err: num(f[1])?,
            energy_drift: num(f[2])?,
            diverged: f[3].parse().map_err(|_| err(format!("bad flag `{}`", f[3])))?,
        });
    }
    Ok((records, slope))
}

pub fn emit_csv(records: &[SweepRecord], slope: Option<f64>, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, format_sweep_csv(records, slope))?;
    Ok(())
}

/// Log-log plot of `max_err` against `eps` as a standalone SVG.
pub fn sweep_svg(records: &[SweepRecord]) -> String {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.max_err > 0.0 && r.max_err.is_finite())
        .map(|r| (r.epsilon.log10(), r.max_err.log10()))
        .collect();
    let (w, h, pad) = (480.0, 360.0, 40.0);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.len() >= 2 {
        let span = |sel: fn(&(f64, f64)) -> f64| {
            let lo = pts.iter().map(sel).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
            (lo, (hi - lo).max(1e-12))
        };
        let (x0, dx) = span(|p| p.0);
        let (y0, dy) = span(|p| p.1);
        let map = |p: &(f64, f64)| {
            (
                pad + (p.0 - x0) / dx * (w - 2.0 * pad),
                h - pad - (p.1 - y0) / dy * (h - 2.0 * pad),
            )
        };
        let poly: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>",
            poly.join(" ")
        )
        .expect("string write");
        for p in &pts {
            let (x, y) = map(p);
            writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\"/>").expect("string write");
        }
    }
    writeln!(
        out,
        "<text x=\"{pad}\" y=\"20\" font-size=\"12\">log10 max_err vs log10 epsilon</text>\n</svg>"
    )
    .expect("string write");
    out
}
