use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use twotime_core::algebra::{
    averaging_cocycle, builtin_algebra, parse_algebra_text, AlgebraElement, AlgebraError, AlgebraParams,
    DualElement, LieAlgebra, LiePoissonHamiltonian, SineInertia,
};
use twotime_core::averaging::{
    averaged_rhs, drift_vector, shift_vector, shifted_averaged_rhs, verify_bracket, CoadjointBilinear,
    OscillationProfile, DEFAULT_SAMPLES,
};
use twotime_core::clflow::{
    cl_integrate, functional_series, random_band_limited, StokesDrift, VorticityField, CFL_LIMIT,
};
use twotime_core::expr::Expression;
use twotime_core::harness::{
    check_claims, format_float, format_sweep_csv, shifted_energy, sweep, sweep_svg, FastSlowScenario,
    DEFAULT_AVERAGED_STEPS, SLOPE_BAND,
};
use twotime_core::integrate::{try_integrate_fixed, Forcing, Trajectory, DEFAULT_STEPS_PER_PERIOD};
use twotime_core::reduced::{
    find_potential_equilibrium, generic_reduced_rhs, natural_energy, natural_reduced_rhs, ConnectionSpec,
    ReducedHamiltonian, ReducedState,
};

use crate::config::{Config, ConfigError};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    AlgebraCheck,
    AvgRhs,
    EulerRun,
    ReducedRun,
    Cl2d,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::AlgebraCheck,
        Command::AvgRhs,
        Command::EulerRun,
        Command::ReducedRun,
        Command::Cl2d,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::AlgebraCheck => "algebra-check",
            Command::AvgRhs => "avg-rhs",
            Command::EulerRun => "euler-run",
            Command::ReducedRun => "reduced-run",
            Command::Cl2d => "cl2d",
            Command::Sweep => "sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
}

const ALGEBRA_KEYS: &[&str] = &["name", "truncation", "sine_inertia", "inertia", "file"];

struct Ctx<'a> {
    inv: &'a Invocation,
    cfg: Config,
}

impl Ctx<'_> {
    fn config_error(&self, e: ConfigError) -> CliError {
        CliError::Config {
            path: self.inv.config.clone(),
            line: e.line,
            message: e.message,
        }
    }

    fn bad(&self, line: Option<usize>, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.inv.config.clone(),
            line,
            message: message.into(),
        }
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.cfg.section(section).map(|s| s.line)
    }

    fn key_line(&self, section: &str, key: &str) -> Option<usize> {
        self.cfg.get(section, key).map(|e| e.line).or(self.section_line(section))
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.inv.out).map_err(|e| CliError::Io(format!("{}: {e}", self.inv.out.display())))?;
        Ok(self.inv.out.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_file(name)?;
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

macro_rules! cfg {
    ($ctx:expr, $e:expr) => {
        $e.map_err(|err| $ctx.config_error(err))?
    };
}

pub fn execute(inv: &Invocation, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&inv.config).map_err(|e| CliError::Config {
        path: inv.config.clone(),
        line: None,
        message: format!("cannot read configuration: {e}"),
    })?;
    let cfg = Config::parse(&text).map_err(|e| CliError::Config {
        path: inv.config.clone(),
        line: e.line,
        message: e.message,
    })?;
    let ctx = Ctx { inv, cfg };
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match inv.command {
        Command::AlgebraCheck => algebra_check(&ctx, out)?,
        Command::AvgRhs => avg_rhs(&ctx, out)?,
        Command::EulerRun => euler_run(&ctx, out)?,
        Command::ReducedRun => reduced_run(&ctx, out, err)?,
        Command::Cl2d => cl2d(&ctx, out, err)?,
        Command::Sweep => sweep_cmd(&ctx, out, err)?,
    }
    out.flush().map_err(io)
}

/// Scientific notation with at least one fractional digit, shortest
/// round-trip otherwise.
pub fn sci(v: f64) -> String {
    let s = format!("{v:e}");
    match s.split_once('e') {
        Some((m, e)) if !m.contains('.') && v.is_finite() => format!("{m}.0e{e}"),
        _ => s,
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(", ")
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Row-major inertia from either `n` diagonal entries or `n^2` entries.
fn diag_or_full(n: usize, values: &[f64]) -> Option<Vec<f64>> {
    if values.len() == n {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = values[i];
        }
        Some(m)
    } else if values.len() == n * n {
        Some(values.to_vec())
    } else {
        None
    }
}

// Loads [algebra]. Jacobi failures are returned separately so that
// algebra-check can report them as a failed claim.
fn load_algebra(ctx: &Ctx) -> Result<Result<LieAlgebra, AlgebraError>, CliError> {
    let c = &ctx.cfg;
    let at = |key: &str| ctx.key_line("algebra", key);
    if !c.has_section("algebra") {
        return Err(ctx.bad(None, "missing section [algebra]"));
    }
    let base = if let Some(file) = cfg!(ctx, c.str_opt("algebra", "file")) {
        let dir = ctx.inv.config.parent().unwrap_or(Path::new("."));
        let path = dir.join(file);
        let text = fs::read_to_string(&path)
            .map_err(|e| ctx.bad(at("file"), format!("cannot read {}: {e}", path.display())))?;
        let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or(file);
        let name = cfg!(ctx, c.str_opt("algebra", "name")).unwrap_or(stem).to_string();
        match parse_algebra_text(&name, &text) {
            Ok(a) => a,
            Err(e @ AlgebraError::JacobiViolated { .. }) => return Ok(Err(e)),
            Err(e) => return Err(ctx.bad(at("file"), format!("{}: {e}", path.display()))),
        }
    } else {
        let name = cfg!(ctx, c.str("algebra", "name"));
        let sine_inertia = match cfg!(ctx, c.str_opt("algebra", "sine_inertia")) {
            None | Some("identity") => SineInertia::Identity,
            Some("laplacian") => SineInertia::Laplacian,
            Some(other) => {
                return Err(ctx.bad(
                    at("sine_inertia"),
                    format!("sine_inertia must be \"identity\" or \"laplacian\", got \"{other}\""),
                ))
            }
        };
        let params = AlgebraParams {
            truncation: cfg!(ctx, c.usize_opt("algebra", "truncation")),
            sine_inertia,
            inertia: None,
        };
        match builtin_algebra(name, &params) {
            Ok(a) => a,
            Err(e @ AlgebraError::JacobiViolated { .. }) => return Ok(Err(e)),
            Err(e) => return Err(ctx.bad(at("name"), e.to_string())),
        }
    };
    match cfg!(ctx, c.f64_list_opt("algebra", "inertia")) {
        None => Ok(Ok(base)),
        Some(values) => {
            let n = base.dim();
            let full = diag_or_full(n, &values).ok_or_else(|| {
                ctx.bad(at("inertia"), format!("inertia needs {n} diagonal or {} entries", n * n))
            })?;
            let m = nalgebra::DMatrix::from_row_slice(n, n, &full);
            base.with_inertia(m)
                .map(Ok)
                .map_err(|e| ctx.bad(at("inertia"), e.to_string()))
        }
    }
}

fn algebra(ctx: &Ctx) -> Result<LieAlgebra, CliError> {
    load_algebra(ctx)?.map_err(|e| ctx.bad(ctx.section_line("algebra"), e.to_string()))
}

fn dual(ctx: &Ctx, section: &str, key: &str, n: usize) -> Result<DualElement, CliError> {
    let v = cfg!(ctx, ctx.cfg.f64_list(section, key));
    if v.len() != n {
        return Err(ctx.bad(ctx.key_line(section, key), format!("`{key}` needs {n} entries, got {}", v.len())));
    }
    Ok(DualElement::new(v))
}

fn exprs(ctx: &Ctx, section: &str, key: &str, n: usize) -> Result<Vec<Expression>, CliError> {
    let v = cfg!(ctx, ctx.cfg.expr_list(section, key));
    if v.len() != n {
        return Err(ctx.bad(ctx.key_line(section, key), format!("`{key}` needs {n} entries, got {}", v.len())));
    }
    Ok(v)
}

fn velocity_profile(ctx: &Ctx, section: &str, n: usize) -> Result<OscillationProfile, CliError> {
    let v1 = exprs(ctx, section, "v1", n)?;
    let samples = cfg!(ctx, ctx.cfg.usize_opt(section, "samples")).unwrap_or(DEFAULT_SAMPLES);
    let line = ctx.key_line(section, "v1");
    let forcing = Forcing::from_expressions(&v1).map_err(|e| ctx.bad(line, e.to_string()))?;
    forcing.profile(samples).map_err(|e| ctx.bad(line, e.to_string()))
}

fn algebra_check(ctx: &Ctx, out: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[("algebra", ALGEBRA_KEYS), ("cocycle", &["drift", "v1", "samples"])]));
    let a = match load_algebra(ctx)? {
        Ok(a) => a,
        Err(AlgebraError::JacobiViolated { residual }) => {
            writeln!(out, "jacobi_residual = {}", sci(residual)).map_err(io_err)?;
            return Err(CliError::ClaimFailed(format!("Jacobi residual {} exceeds 1e-12", sci(residual))));
        }
        Err(e) => return Err(ctx.bad(ctx.section_line("algebra"), e.to_string())),
    };
    writeln!(out, "algebra = {}", a.name()).map_err(io_err)?;
    writeln!(out, "dimension = {}", a.dim()).map_err(io_err)?;
    writeln!(out, "jacobi_residual = {}", sci(a.jacobi_residual())).map_err(io_err)?;
    if !ctx.cfg.has_section("cocycle") {
        return Ok(());
    }
    let drift = if ctx.cfg.get("cocycle", "drift").is_some() {
        let d = cfg!(ctx, ctx.cfg.f64_list("cocycle", "drift"));
        if d.len() != a.dim() {
            return Err(ctx.bad(ctx.key_line("cocycle", "drift"), format!("`drift` needs {} entries", a.dim())));
        }
        AlgebraElement::new(d)
    } else {
        let profile = velocity_profile(ctx, "cocycle", a.dim())?;
        drift_vector(&a, &profile).map_err(|e| ctx.bad(ctx.key_line("cocycle", "v1"), e.to_string()))?
    };
    writeln!(out, "drift = {}", list(drift.coords())).map_err(io_err)?;
    match averaging_cocycle(&a, &drift) {
        Ok(ext) => {
            let r = ext.residuals();
            writeln!(out, "cocycle_antisymmetry = {}", sci(r.antisymmetry)).map_err(io_err)?;
            writeln!(out, "cocycle_identity = {}", sci(r.cocycle)).map_err(io_err)?;
            Ok(())
        }
        Err(AlgebraError::NotACocycle { antisymmetry, cocycle }) => {
            writeln!(out, "cocycle_antisymmetry = {}", sci(antisymmetry)).map_err(io_err)?;
            writeln!(out, "cocycle_identity = {}", sci(cocycle)).map_err(io_err)?;
            Err(CliError::ClaimFailed(
                "the averaging form is not a 2-cocycle (inertia is not ad-invariant)".into(),
            ))
        }
        Err(e) => Err(ctx.bad(ctx.section_line("cocycle"), e.to_string())),
    }
}

fn avg_rhs(ctx: &Ctx, out: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[("algebra", ALGEBRA_KEYS), ("forcing", &["v1", "samples"]), ("point", &["x"])]));
    let a = algebra(ctx)?;
    let n = a.dim();
    let velocity = velocity_profile(ctx, "forcing", n)?;
    let x = dual(ctx, "point", "x", n)?;
    let line = ctx.key_line("forcing", "v1");
    let forcing = OscillationProfile::from_samples(
        n,
        velocity
            .rows()
            .flat_map(|r| a.inertia_apply(&AlgebraElement::from(r)).expect("dimension checked").into_coords())
            .collect(),
    )
    .map_err(|e| ctx.bad(line, e.to_string()))?;
    let op = CoadjointBilinear::new(&a);
    let avg = averaged_rhs(&op, &forcing, x.coords()).map_err(|e| ctx.bad(line, e.to_string()))?;
    let drift = drift_vector(&a, &velocity).map_err(|e| ctx.bad(line, e.to_string()))?;
    let drift_form = a.shifted_euler_rhs(&x, &drift).expect("dimension checked");
    writeln!(out, "drift = {}", list(drift.coords())).map_err(io_err)?;
    writeln!(out, "averaged_rhs = {}", list(&avg)).map_err(io_err)?;
    writeln!(out, "drift_form_rhs = {}", list(drift_form.coords())).map_err(io_err)?;
    match verify_bracket(&op, ctx.inv.seed) {
        Ok(verified) => {
            let shift = shift_vector(&op, &forcing).map_err(|e| ctx.bad(line, e.to_string()))?;
            let shifted = shifted_averaged_rhs(&verified, &shift, x.coords()).expect("dimension checked");
            let gap = avg
                .iter()
                .zip(&shifted)
                .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
            writeln!(out, "shift = {}", list(&shift)).map_err(io_err)?;
            writeln!(out, "shifted_rhs = {}", list(&shifted)).map_err(io_err)?;
            writeln!(out, "discrepancy = {}", sci(gap)).map_err(io_err)?;
        }
        Err(e) => {
            writeln!(out, "shifted_rhs = unavailable ({e})").map_err(io_err)?;
        }
    }
    Ok(())
}

fn trajectory_csv(header: &str, traj: &Trajectory, extra: impl Fn(&[f64]) -> Vec<f64>) -> String {
    let mut s = format!("{header}\n");
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![format_float(*t)];
        row.extend(x.iter().map(|v| format_float(*v)));
        row.extend(extra(x).into_iter().map(format_float));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn run_params(ctx: &Ctx, section: &str) -> Result<(f64, f64, usize), CliError> {
    let t = cfg!(ctx, ctx.cfg.f64(section, "T"));
    let dt = cfg!(ctx, ctx.cfg.f64(section, "dt"));
    let stride = cfg!(ctx, ctx.cfg.usize_opt(section, "stride")).unwrap_or(1).max(1);
    if !(t > 0.0 && dt > 0.0) {
        return Err(ctx.bad(ctx.section_line(section), "T and dt must be positive"));
    }
    Ok((t, dt, stride))
}

fn max_rel_drift(values: &[f64]) -> f64 {
    let Some(&v0) = values.first() else { return 0.0 };
    let scale = v0.abs().max(f64::MIN_POSITIVE);
    values.iter().fold(0.0_f64, |m, v| m.max((v - v0).abs() / scale))
}

fn euler_run(ctx: &Ctx, out: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[
        ("algebra", ALGEBRA_KEYS),
        ("euler", &["m_init", "T", "dt", "stride", "drift", "hamiltonian"]),
    ]));
    let a = algebra(ctx)?;
    let n = a.dim();
    let m0 = dual(ctx, "euler", "m_init", n)?;
    let (t_end, dt, stride) = run_params(ctx, "euler")?;
    let drift = match cfg!(ctx, ctx.cfg.f64_list_opt("euler", "drift")) {
        Some(d) if d.len() == n => AlgebraElement::new(d),
        Some(_) => return Err(ctx.bad(ctx.key_line("euler", "drift"), format!("`drift` needs {n} entries"))),
        None => AlgebraElement::zeros(n),
    };
    let hamiltonian = match cfg!(ctx, ctx.cfg.expr_opt("euler", "hamiltonian")) {
        Some(h) => Some(
            LiePoissonHamiltonian::new(&h, n).map_err(|e| ctx.bad(ctx.key_line("euler", "hamiltonian"), e.to_string()))?,
        ),
        None => None,
    };
    let traj = try_integrate_fixed(
        |_, x| {
            let m = DualElement::from(x);
            match &hamiltonian {
                Some(h) => a.lie_poisson_rhs(h, &m),
                None => a.shifted_euler_rhs(&m, &drift),
            }
            .map(DualElement::into_coords)
        },
        m0.coords(),
        0.0,
        t_end,
        dt,
        stride,
    )
    .map_err(|e| CliError::Diverged(format!("evaluation failed: {e}")))?;
    let energy = |x: &[f64]| -> f64 {
        let m = DualElement::from(x);
        match &hamiltonian {
            Some(h) => h.value(&m).unwrap_or(f64::NAN),
            None => shifted_energy(&a, &drift, &m).unwrap_or(f64::NAN),
        }
    };
    let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut header = vec!["t".to_string()];
    header.extend(names("m", n));
    header.extend(["energy".to_string(), "norm2".to_string()]);
    let csv = trajectory_csv(&header.join(","), &traj, |x| vec![energy(x), norm2(x)]);
    let path = ctx.write("euler.csv", &csv)?;
    let energies: Vec<f64> = traj.states.iter().map(|x| energy(x)).collect();
    let norms: Vec<f64> = traj.states.iter().map(|x| norm2(x)).collect();
    writeln!(out, "samples = {}", traj.len()).map_err(io_err)?;
    writeln!(out, "energy_drift = {}", sci(max_rel_drift(&energies))).map_err(io_err)?;
    writeln!(out, "norm2_drift = {}", sci(max_rel_drift(&norms))).map_err(io_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    if let Some(t) = traj.diverged_at {
        return Err(CliError::Diverged(format!("Euler run became non-finite at t = {}", format_float(t))));
    }
    Ok(())
}

fn reduced_run(ctx: &Ctx, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[
        ("algebra", ALGEBRA_KEYS),
        (
            "reduced",
            &["k", "atilde", "potential", "omega_*", "q_init", "p_init", "mu_init", "T", "dt", "stride", "hamiltonian"],
        ),
    ]));
    let a = algebra(ctx)?;
    let n = a.dim();
    let c = &ctx.cfg;
    let k = cfg!(ctx, c.usize("reduced", "k"));
    if k == 0 {
        return Err(ctx.bad(ctx.key_line("reduced", "k"), "k must be positive"));
    }
    let atilde = match cfg!(ctx, c.expr_list_opt("reduced", "atilde")) {
        Some(v) if v.len() == n * k => v.chunks(k).map(|r| r.to_vec()).collect::<Vec<_>>(),
        Some(v) => {
            return Err(ctx.bad(
                ctx.key_line("reduced", "atilde"),
                format!("`atilde` needs n*k = {} entries (row-major), got {}", n * k, v.len()),
            ))
        }
        None => vec![vec![Expression::constant(0.0); k]; n],
    };
    let potential = cfg!(ctx, c.expr_opt("reduced", "potential")).unwrap_or(Expression::constant(0.0));
    let line = ctx.section_line("reduced");
    let mut spec = ConnectionSpec::new(n, k, &atilde, &potential).map_err(|e| ctx.bad(line, e.to_string()))?;
    let mut curvature = Vec::new();
    for e in &c.section("reduced").expect("schema checked").entries {
        let Some(rest) = e.key.strip_prefix("omega_") else { continue };
        let idx: Option<(usize, usize)> = rest
            .split_once('_')
            .and_then(|(u, v)| Some((u.parse().ok()?, v.parse().ok()?)));
        let Some((u, v)) = idx.filter(|(u, v)| *u >= 1 && *v >= 1) else {
            return Err(ctx.bad(Some(e.line), format!("curvature keys look like omega_1_2, got `{}`", e.key)));
        };
        let exprs = exprs(ctx, "reduced", &e.key, n)?;
        curvature.push((u - 1, v - 1, exprs));
    }
    if !curvature.is_empty() {
        spec = spec.with_curvature(&curvature).map_err(|e| ctx.bad(line, e.to_string()))?;
    }
    let q0 = cfg!(ctx, c.f64_list("reduced", "q_init"));
    let p0 = cfg!(ctx, c.f64_list("reduced", "p_init"));
    if q0.len() != k || p0.len() != k {
        return Err(ctx.bad(line, format!("q_init and p_init need {k} entries")));
    }
    let mu0 = dual(ctx, "reduced", "mu_init", n)?;
    let (t_end, dt, stride) = run_params(ctx, "reduced")?;
    let hamiltonian = match cfg!(ctx, c.expr_opt("reduced", "hamiltonian")) {
        Some(h) => Some(
            ReducedHamiltonian::new(&h, k, n).map_err(|e| ctx.bad(ctx.key_line("reduced", "hamiltonian"), e.to_string()))?,
        ),
        None => None,
    };
    let s0 = ReducedState::new(q0.clone(), p0, mu0).map_err(|e| ctx.bad(line, e.to_string()))?;

    match find_potential_equilibrium(&spec, &q0) {
        Ok(Some(_)) => {}
        _ => writeln!(err, "warning: no equilibrium of the potential found near q_init").map_err(io_err)?,
    }
    if let Ok(Some(gap)) = spec.curvature_discrepancy(&a, &q0) {
        writeln!(out, "curvature_discrepancy = {}", sci(gap)).map_err(io_err)?;
    }

    let energy = |x: &[f64]| -> f64 {
        let Ok(s) = ReducedState::from_slice(k, n, x) else { return f64::NAN };
        match &hamiltonian {
            Some(h) => h.value(&s).unwrap_or(f64::NAN),
            None => natural_energy(&a, &spec, &s).unwrap_or(f64::NAN),
        }
    };
    let traj = try_integrate_fixed(
        |_, x| {
            let s = ReducedState::from_slice(k, n, x)?;
            match &hamiltonian {
                Some(h) => generic_reduced_rhs(&a, &spec, h, &s),
                None => natural_reduced_rhs(&a, &spec, &s),
            }
            .map(|r| r.to_vec())
        },
        &s0.to_vec(),
        0.0,
        t_end,
        dt,
        stride,
    )
    .map_err(|e| CliError::Diverged(format!("evaluation failed: {e}")))?;
    let mut header = vec!["t".to_string()];
    header.extend(names("q", k));
    header.extend(names("p", k));
    header.extend(names("m", n));
    header.push("H".to_string());
    let csv = trajectory_csv(&header.join(","), &traj, |x| vec![energy(x)]);
    let path = ctx.write("reduced.csv", &csv)?;
    let energies: Vec<f64> = traj.states.iter().map(|x| energy(x)).collect();
    writeln!(out, "samples = {}", traj.len()).map_err(io_err)?;
    writeln!(out, "energy_drift = {}", sci(max_rel_drift(&energies))).map_err(io_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    if let Some(t) = traj.diverged_at {
        return Err(CliError::Diverged(format!("reduced run became non-finite at t = {}", format_float(t))));
    }
    Ok(())
}

fn cl2d(ctx: &Ctx, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[(
        "cl2d",
        &["N", "omega0", "random_modes", "V0", "T", "dt", "stride", "functionals", "save_field"],
    )]));
    let c = &ctx.cfg;
    let n = cfg!(ctx, c.usize("cl2d", "N"));
    let line = ctx.section_line("cl2d");
    let w0 = match (cfg!(ctx, c.expr_opt("cl2d", "omega0")), cfg!(ctx, c.usize_opt("cl2d", "random_modes"))) {
        (Some(e), None) => VorticityField::from_expression(n, &e)
            .map_err(|e| ctx.bad(ctx.key_line("cl2d", "omega0"), e.to_string()))?,
        (None, Some(m)) => random_band_limited(n, m, ctx.inv.seed)
            .map_err(|e| ctx.bad(ctx.key_line("cl2d", "random_modes"), e.to_string()))?,
        _ => return Err(ctx.bad(line, "give exactly one of `omega0` and `random_modes`")),
    };
    let v0 = cfg!(ctx, c.f64_list_opt("cl2d", "V0")).unwrap_or(vec![0.0, 0.0]);
    let drift = match v0.as_slice() {
        [a, b] => StokesDrift::new([*a, *b]).map_err(|e| ctx.bad(ctx.key_line("cl2d", "V0"), e.to_string()))?,
        _ => return Err(ctx.bad(ctx.key_line("cl2d", "V0"), "`V0` needs 2 entries")),
    };
    let (t_end, dt, stride) = run_params(ctx, "cl2d")?;
    let functionals: Vec<(String, Expression)> = cfg!(ctx, c.expr_list_opt("cl2d", "functionals"))
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, e)| (format!("I{}", i + 1), e))
        .collect();
    for (name, e) in &functionals {
        e.check_variables(&["w"])
            .map_err(|err| ctx.bad(ctx.key_line("cl2d", "functionals"), err.to_string()))?;
        writeln!(out, "{name} = {e}").map_err(io_err)?;
    }
    let run = cl_integrate(&w0, &drift, t_end, dt, stride);
    if run.cfl_warning {
        writeln!(
            err,
            "warning: CFL number {} exceeds {}",
            format_float(run.max_cfl),
            format_float(CFL_LIMIT)
        )
        .map_err(io_err)?;
    }
    let series = functional_series(&run, &drift, &functionals)
        .map_err(|e| ctx.bad(ctx.key_line("cl2d", "functionals"), e.to_string()))?;
    let path = ctx.write("cl2d.csv", &series)?;
    if cfg!(ctx, c.bool_opt("cl2d", "save_field")).unwrap_or(false) {
        ctx.write("field_initial.csv", &w0.to_csv())?;
        ctx.write("field_final.csv", &run.last().to_csv())?;
    }
    writeln!(out, "samples = {}", run.times.len()).map_err(io_err)?;
    writeln!(out, "max_cfl = {}", format_float(run.max_cfl)).map_err(io_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    if let Some(t) = run.diverged_at {
        return Err(CliError::Diverged(format!("CL run became non-finite at t = {}", format_float(t))));
    }
    Ok(())
}

fn sweep_cmd(ctx: &Ctx, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    cfg!(ctx, ctx.cfg.check_schema(&[
        ("algebra", ALGEBRA_KEYS),
        (
            "scenario",
            &["v1", "m_init", "epsilons", "T", "steps_per_period", "samples", "averaged_steps", "ball_radius", "svg"],
        ),
    ]));
    let a = algebra(ctx)?;
    let n = a.dim();
    let c = &ctx.cfg;
    let v1 = exprs(ctx, "scenario", "v1", n)?;
    let m_init = dual(ctx, "scenario", "m_init", n)?;
    let epsilons = cfg!(ctx, c.f64_list("scenario", "epsilons"));
    let horizon = cfg!(ctx, c.f64("scenario", "T"));
    let scenario = FastSlowScenario {
        algebra: a,
        v1,
        m_init,
        epsilons,
        horizon,
        steps_per_period: cfg!(ctx, c.usize_opt("scenario", "steps_per_period")).unwrap_or(DEFAULT_STEPS_PER_PERIOD),
        samples: cfg!(ctx, c.usize_opt("scenario", "samples")).unwrap_or(DEFAULT_SAMPLES),
        averaged_steps: cfg!(ctx, c.usize_opt("scenario", "averaged_steps")).unwrap_or(DEFAULT_AVERAGED_STEPS),
        ball_radius: cfg!(ctx, c.f64_opt("scenario", "ball_radius")),
    };
    scenario
        .validate()
        .map_err(|e| ctx.bad(ctx.section_line("scenario"), e.to_string()))?;
    let report = sweep(&scenario).map_err(|e| CliError::Diverged(e.to_string()))?;
    for w in &report.warnings {
        writeln!(err, "warning: {w}").map_err(io_err)?;
    }
    let csv = format_sweep_csv(&report.records, report.slope);
    let path = ctx.write("sweep.csv", &csv)?;
    if cfg!(ctx, c.bool_opt("scenario", "svg")).unwrap_or(false) {
        ctx.write("sweep.svg", &sweep_svg(&report.records))?;
    }
    out.write_all(csv.as_bytes()).map_err(io_err)?;
    let claims = check_claims(&report);
    writeln!(out, "averaged_energy_drift = {}", sci(report.averaged.energy)).map_err(io_err)?;
    writeln!(out, "averaged_casimir_drift = {}", sci(report.averaged.casimir)).map_err(io_err)?;
    writeln!(out, "error_reduction = {}", claims.error_reduction).map_err(io_err)?;
    writeln!(out, "monotone = {}", claims.monotone).map_err(io_err)?;
    writeln!(out, "drift_spread = {}", format_float(claims.drift_spread)).map_err(io_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    if let Some(r) = report.records.iter().find(|r| r.diverged) {
        return Err(CliError::Diverged(format!("fast run at epsilon = {} diverged", format_float(r.epsilon))));
    }
    if !report.inside_ball {
        return Ok(());
    }
    match report.slope {
        Some(m) if (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&m) => Ok(()),
        Some(m) => Err(CliError::ClaimFailed(format!(
            "slope {} outside [{}, {}]",
            format_float(m),
            SLOPE_BAND.0,
            SLOPE_BAND.1
        ))),
        None => Err(CliError::ClaimFailed("no slope could be fitted".into())),
    }
}
