//! The five subcommands. Each returns an [`Outcome`]; [`execute`] turns it
//! into files, a manifest and an exit code.

use std::fmt;
use std::path::{Path, PathBuf};

use ohx_core::analysis::{
    energy_balance_residual, entropy_tolerance, gronwall_energy_check, kruzkov_certificate,
    quantile_constants, random_test_functions, stability_check, weak_form_residual, Convergence,
    EstimateReport, TestFunction,
};
use ohx_core::flux::{default_x_extent, linspace, make_flux, validate_assumptions};
use ohx_core::grid::{check_grid_size, make_grid, mollify_initial, project_initial};
use ohx_core::nonlocal::cumulative_primitive;
use ohx_core::solver::{solve, viscosity_sweep, Snapshot};
use ohx_core::{Error as CoreError, Field, FluxModel, Grid, InitialData, RunHistory, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, FluxChoice, RunConfig};
use crate::output::{
    float, snapshots_csv, trend_csv, unix_ms, Artifacts, Manifest, ManifestConstants,
};
use crate::tables::read_columns;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_FAULT: i32 = 3;

/// Output directory used when neither `--out` nor `output.dir` is given.
pub const DEFAULT_OUT_DIR: &str = "ohx-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ValidateFlux,
    Run,
    Certify,
    Sweep,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ValidateFlux => "validate-flux",
            Command::Run => "run",
            Command::Certify => "certify",
            Command::Sweep => "sweep",
            Command::Converge => "converge",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_PRECONDITION,
            CliError::Core(e) => match e {
                CoreError::UnknownFamily(_)
                | CoreError::InvalidParameter { .. }
                | CoreError::Precondition(_) => EXIT_PRECONDITION,
                CoreError::NonFinite(_)
                | CoreError::OutsideStateBox { .. }
                | CoreError::SolverFault { .. } => EXIT_FAULT,
            },
            CliError::Io(_) => EXIT_FAULT,
        }
    }

    fn status(&self) -> &'static str {
        match self.exit_code() {
            EXIT_PRECONDITION if matches!(self, CliError::Config(_)) => "config-error",
            EXIT_PRECONDITION => "precondition",
            _ => "fault",
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn from_checks(what: &str, failed: &[String]) -> Self {
        if failed.is_empty() {
            Self {
                code: EXIT_OK,
                message: format!("{what}: all checks pass"),
            }
        } else {
            Self {
                code: EXIT_CHECK_FAILED,
                message: format!("{what}: failed: {}", failed.join(", ")),
            }
        }
    }
}

/// What [`execute`] reports back to the caller.
#[derive(Debug, Clone)]
pub struct Report {
    pub code: i32,
    pub message: String,
    /// `None` when the output directory could not be created.
    pub out_dir: Option<PathBuf>,
}

/// Mutable state shared by a command: the artifact sink plus manifest fields.
struct Session {
    artifacts: Artifacts,
    constants: Option<ManifestConstants>,
    warnings: Vec<String>,
}

impl Session {
    fn note_model(&mut self, model: &FluxModel) {
        self.constants = Some(ManifestConstants::new(
            model.constants(),
            model.state_box_m(),
        ));
    }

    fn note_history(&mut self, h: &RunHistory) {
        for w in &h.warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(w.clone());
            }
        }
    }

    fn write_snapshots(
        &mut self,
        snapshots: &[Snapshot],
        with_primitive: bool,
    ) -> Result<(), CliError> {
        self.artifacts.write(
            "snapshots.csv",
            snapshots_csv(snapshots, with_primitive).as_bytes(),
        )?;
        Ok(())
    }
}

/// Loads `config_path`, runs `command` and writes the manifest. Never panics
/// on bad input; every failure becomes an exit code in 0..=3.
pub fn execute(command: Command, config_path: &Path, out: Option<&Path>) -> Report {
    let started = unix_ms();
    let loaded = RunConfig::load(config_path);
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let artifacts = match Artifacts::create(&dir) {
        Ok(a) => a,
        Err(e) => {
            return Report {
                code: EXIT_FAULT,
                message: format!("cannot create output directory {}: {e}", dir.display()),
                out_dir: None,
            }
        }
    };
    let mut session = Session {
        artifacts,
        constants: None,
        warnings: Vec::new(),
    };
    let (config_echo, result) = match loaded {
        Ok(cfg) => {
            let r = dispatch(command, &cfg, &mut session);
            (cfg.ini.echo(), r)
        }
        Err(e) => (Default::default(), Err(CliError::from(e))),
    };
    let (code, status, message) = match result {
        Ok(o) => {
            let status = if o.code == EXIT_OK {
                "ok"
            } else {
                "check-failed"
            };
            (o.code, status, o.message)
        }
        Err(e) => (e.exit_code(), e.status(), format!("{command}: {e}")),
    };
    let manifest = Manifest {
        command: command.name().to_string(),
        version: format!("ohx {}", env!("CARGO_PKG_VERSION")),
        exit_code: code,
        status: status.to_string(),
        message: message.clone(),
        config: config_echo,
        constants: session.constants,
        files: session.artifacts.files().to_vec(),
        warnings: session.warnings.clone(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
    };
    if let Err(e) = session.artifacts.write_manifest(&manifest) {
        return Report {
            code: EXIT_FAULT,
            message: format!("{message}; cannot write manifest: {e}"),
            out_dir: Some(dir),
        };
    }
    Report {
        code,
        message,
        out_dir: Some(dir),
    }
}

fn dispatch(command: Command, cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    match command {
        Command::ValidateFlux => cmd_validate_flux(cfg, s),
        Command::Run => cmd_run(cfg, s),
        Command::Certify => cmd_certify(cfg, s),
        Command::Sweep => cmd_sweep(cfg, s),
        Command::Converge => cmd_converge(cfg, s),
    }
}

pub fn build_model(cfg: &RunConfig) -> Result<FluxModel, CoreError> {
    match &cfg.flux {
        FluxChoice::Zero => Ok(FluxModel::zero()),
        FluxChoice::Family(spec) => make_flux(spec),
    }
}

/// Projected (and optionally mollified) initial data on an `n`-cell grid,
/// checked against the grid-size rule.
pub fn initial_field(cfg: &RunConfig, model: &FluxModel, n: usize) -> Result<Field, CliError> {
    let init = cfg.init()?;
    let g = cfg.grid()?;
    let grid = make_grid(g.x_max, n)?;
    let mut u0 = project_initial(&init.data, &grid, init.zero_mean)?;
    if let Some(delta) = init.mollify {
        u0 = mollify_initial(&u0, delta)?;
    }
    check_grid_size(&u0, model.constants().l, cfg.solver.t_end, g.override_rule)?;
    Ok(u0)
}

#[derive(Serialize)]
struct FaultReport<'a> {
    time: f64,
    reason: &'a str,
    last_snapshot_time: f64,
    snapshots: usize,
}

/// Solves and, on a fault, dumps the partial history before passing the error on.
fn solve_with_dump(
    u0: &Field,
    model: &FluxModel,
    config: &SolverConfig,
    dump_primitive: bool,
    s: &mut Session,
) -> Result<RunHistory, CliError> {
    match solve(u0, model, config) {
        Ok(h) => {
            s.note_history(&h);
            Ok(h)
        }
        Err(CoreError::SolverFault {
            time,
            reason,
            partial,
        }) => {
            s.note_history(&partial);
            s.write_snapshots(&partial.snapshots, dump_primitive)?;
            s.artifacts.write_json(
                "report_fault.json",
                &FaultReport {
                    time,
                    reason: &reason,
                    last_snapshot_time: partial.snapshots.last().map_or(0.0, Snapshot::time),
                    snapshots: partial.snapshots.len(),
                },
            )?;
            Err(CoreError::SolverFault {
                time,
                reason,
                partial,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_validate_flux(cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    s.note_model(&model);
    let m = if model.state_box_m().is_finite() {
        model.state_box_m()
    } else {
        1.0
    };
    let x_hi = match (&cfg.flux, cfg.validate.x_hi) {
        (_, Some(x)) => x,
        (FluxChoice::Family(spec), None) => default_x_extent(&spec.family),
        (FluxChoice::Zero, None) => 50.0,
    };
    if !(x_hi > cfg.validate.x_lo) {
        return Err(cfg
            .value_error("validate.x_hi", "must exceed validate.x_lo")
            .into());
    }
    let xs = linspace(cfg.validate.x_lo, x_hi, cfg.validate.n_x);
    let report = validate_assumptions(&model, &xs, (-m, m), cfg.validate.tol);
    s.artifacts.write_json("report_flux.json", &report)?;
    for w in report.warnings() {
        s.warnings
            .push(format!("{} (warn-only): {}", w.name, w.detail));
    }
    let failed: Vec<String> = report
        .failures()
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    Ok(Outcome::from_checks(
        &format!("validate-flux {}", report.flux),
        &failed,
    ))
}

fn cmd_run(cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    s.note_model(&model);
    let u0 = initial_field(cfg, &model, cfg.grid()?.n)?;
    let h = solve_with_dump(&u0, &model, &cfg.solver, cfg.output.dump_primitive, s)?;
    s.write_snapshots(&h.snapshots, cfg.output.dump_primitive)?;
    Ok(Outcome {
        code: EXIT_OK,
        message: format!(
            "run: reached t = {} in {} steps, {} snapshots",
            h.last().time(),
            h.steps.len(),
            h.snapshots.len()
        ),
    })
}

/// History read back from a `t,x,u` table on the configured grid.
fn import_history(cfg: &RunConfig, model: &FluxModel, path: &Path) -> Result<RunHistory, CliError> {
    let bad = |msg: String| CliError::from(cfg.value_error("certify.import", msg));
    let cols = read_columns(path, 3).map_err(bad)?;
    let g = cfg.grid()?;
    let grid = make_grid(g.x_max, g.n)?;
    let n = grid.n();
    let rows = cols[0].len();
    if rows % n != 0 {
        return Err(bad(format!(
            "{rows} rows is not a whole number of {n}-cell snapshots"
        )));
    }
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(rows / n);
    for k in 0..rows / n {
        let r = k * n..(k + 1) * n;
        let t = cols[0][r.start];
        if cols[0][r.clone()].iter().any(|&v| v != t) {
            return Err(bad(format!("snapshot {k} mixes several times")));
        }
        for (i, &x) in cols[1][r.clone()].iter().enumerate() {
            if (x - grid.center(i)).abs() > 1e-9 * g.x_max {
                return Err(bad(format!(
                    "x = {x} in snapshot {k} is not cell centre {}",
                    grid.center(i)
                )));
            }
        }
        if snapshots.last().is_some_and(|p| p.time() >= t) {
            return Err(bad(format!("snapshot times must increase (t = {t})")));
        }
        let field = Field::new(grid, cols[2][r].to_vec(), t)?;
        let primitive = cumulative_primitive(&field);
        snapshots.push(Snapshot { field, primitive });
    }
    if snapshots.len() < 2 || snapshots[0].time() != 0.0 {
        return Err(bad("need at least two snapshots starting at t = 0".into()));
    }
    let t_end = snapshots[snapshots.len() - 1].time();
    let p0 = &snapshots[0].primitive;
    let dx = grid.dx();
    let moments = (
        dx * p0.values().iter().sum::<f64>(),
        dx * p0.values().iter().map(|p| p * p).sum::<f64>(),
    );
    Ok(RunHistory {
        grid,
        flux_name: model.name(),
        constants: model.constants(),
        state_box_m: model.state_box_m(),
        config: SolverConfig {
            t_end,
            ..cfg.solver.clone()
        },
        snapshots,
        steps: Vec::new(),
        initial_primitive_moments: moments,
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct WeakReport<'a> {
    test_functions: &'a [TestFunction],
    residuals: Vec<f64>,
    report: EstimateReport,
}

#[derive(Serialize)]
struct KruzkovReport<'a> {
    kappa: f64,
    constants: &'a [f64],
    test_functions: &'a [TestFunction],
    /// Row-major over `constants × test_functions`.
    report: EstimateReport,
}

#[derive(Serialize)]
struct StabilityReport {
    r: f64,
    seed_v: u64,
    amplitude: f64,
    pass: bool,
    pairs: Vec<EstimateReport>,
}

/// `u₀ + amplitude·‖u₀‖_∞·w/‖w‖_∞` with `w` a zero-mean random profile.
pub fn perturbed_partner(u0: &Field, seed: u64, amplitude: f64) -> Result<Field, CoreError> {
    let w = project_initial(&InitialData::RandomZeroMean { seed }, u0.grid(), true)?;
    let scale =
        amplitude * u0.sup_norm().max(f64::MIN_POSITIVE) / w.sup_norm().max(f64::MIN_POSITIVE);
    let values = u0
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| a + scale * b)
        .collect();
    Field::new(*u0.grid(), values, 0.0)
}

fn cmd_certify(cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    s.note_model(&model);
    let seed = cfg.require_seed(cfg.entropy.seed, "entropy.seed")?;
    let stability = match cfg.stability.r {
        Some(r) if cfg.import.is_none() => Some((
            r,
            cfg.require_seed(cfg.stability.seed_v, "stability.seed_v")?,
        )),
        Some(_) => {
            s.warnings
                .push("stability check skipped for an imported history".into());
            None
        }
        None => None,
    };

    let (history, u0) = match &cfg.import {
        Some(path) => (import_history(cfg, &model, path)?, None),
        None => {
            let u0 = initial_field(cfg, &model, cfg.grid()?.n)?;
            // Fail on the stability precondition before paying for any solve.
            if let Some((r, _)) = stability {
                let k = model.constants();
                if r + k.l * cfg.solver.t_end > u0.grid().x_max() {
                    return Err(CoreError::Precondition(format!(
                        "stability.R + L·T = {r} + {:.4}·{} = {:.4} exceeds x_max = {}",
                        k.l,
                        cfg.solver.t_end,
                        r + k.l * cfg.solver.t_end,
                        u0.grid().x_max()
                    ))
                    .into());
                }
            }
            let h = solve_with_dump(&u0, &model, &cfg.solver, cfg.output.dump_primitive, s)?;
            (h, Some(u0))
        }
    };
    s.write_snapshots(&history.snapshots, cfg.output.dump_primitive)?;
    let grid: Grid = history.grid;
    let t_end = history.config.t_end;
    let mut failed = Vec::new();

    let gronwall = gronwall_energy_check(&history, history.constants.c)?;
    s.artifacts.write_json("report_gronwall.json", &gronwall)?;
    if !gronwall.pass {
        failed.push("gronwall".to_string());
    }

    if history.config.epsilon > 0.0 {
        let energy = energy_balance_residual(&history, &model)?;
        s.artifacts.write_json("report_energy.json", &energy)?;
        if !energy.report.pass {
            failed.push("energy".to_string());
        }
    }

    let phis = random_test_functions(seed, &grid, t_end, cfg.entropy.n_testfns)?;
    let residuals = phis
        .iter()
        .map(|phi| weak_form_residual(&history, &model, phi))
        .collect::<Result<Vec<_>, _>>()?;
    let tols = phis
        .iter()
        .map(|phi| entropy_tolerance(cfg.entropy.kappa, grid.dx(), phi))
        .collect();
    let weak = WeakReport {
        test_functions: &phis,
        report: EstimateReport::from_sides(
            "weak",
            residuals.iter().map(|r| r.abs()).collect(),
            tols,
            0.0,
            Vec::new(),
        ),
        residuals,
    };
    s.artifacts.write_json("report_weak.json", &weak)?;
    if !weak.report.pass {
        failed.push("weak".to_string());
    }

    let constants = quantile_constants(&history, cfg.entropy.c_quantiles);
    let kruzkov = KruzkovReport {
        kappa: cfg.entropy.kappa,
        constants: &constants,
        test_functions: &phis,
        report: kruzkov_certificate(&history, &model, &constants, &phis, cfg.entropy.kappa)?,
    };
    s.artifacts.write_json("report_kruzkov.json", &kruzkov)?;
    if !kruzkov.report.pass {
        failed.push("kruzkov".to_string());
    }

    if let (Some((r, seed_v)), Some(u0)) = (stability, u0) {
        let partners = (0..cfg.stability.pairs as u64)
            .map(|k| perturbed_partner(&u0, seed_v.wrapping_add(k), cfg.stability.amplitude))
            .collect::<Result<Vec<_>, _>>()?;
        let runs: Vec<Result<RunHistory, CoreError>> = partners
            .par_iter()
            .map(|v0| solve(v0, &model, &cfg.solver))
            .collect();
        let mut pairs = Vec::with_capacity(runs.len());
        for run in runs {
            let v = run?;
            s.note_history(&v);
            pairs.push(stability_check(&history, &v, r)?);
        }
        let pass = pairs.iter().all(|p| p.pass);
        s.artifacts.write_json(
            "report_stability.json",
            &StabilityReport {
                r,
                seed_v,
                amplitude: cfg.stability.amplitude,
                pass,
                pairs,
            },
        )?;
        if !pass {
            failed.push("stability".to_string());
        }
    }

    Ok(Outcome::from_checks("certify", &failed))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    eps: &'a [f64],
    successive: &'a [f64],
    to_inviscid: &'a [f64],
    strictly_decreasing: bool,
}

fn cmd_sweep(cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    s.note_model(&model);
    let eps = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| cfg.ini.missing("sweep.eps_list", ""))?;
    if eps.len() < 2 {
        return Err(CoreError::Precondition(format!(
            "a sweep needs at least two viscosities, got {}",
            eps.len()
        ))
        .into());
    }
    let u0 = initial_field(cfg, &model, cfg.grid()?.n)?;
    let report = viscosity_sweep(&u0, &model, &cfg.solver, eps)?;
    let levels: Vec<String> = eps.iter().map(|e| float(*e)).collect();
    s.artifacts.write(
        "trend_sweep.csv",
        trend_csv(&levels, &report.successive).as_bytes(),
    )?;
    if !report.to_inviscid.is_empty() {
        s.artifacts.write(
            "trend_sweep_inviscid.csv",
            trend_csv(&levels, &report.to_inviscid).as_bytes(),
        )?;
    }
    let decreasing = report.successive.windows(2).all(|w| w[1] < w[0]);
    s.artifacts.write_json(
        "report_sweep.json",
        &SweepSummary {
            eps,
            successive: &report.successive,
            to_inviscid: &report.to_inviscid,
            strictly_decreasing: decreasing,
        },
    )?;
    let failed = if decreasing {
        Vec::new()
    } else {
        vec![format!(
            "successive distances not strictly decreasing: {:?}",
            report.successive
        )]
    };
    Ok(Outcome::from_checks("sweep", &failed))
}

#[derive(Serialize)]
struct ConvergeSummary<'a> {
    convergence: &'a Convergence,
    cfl: Vec<f64>,
    min_order: f64,
    pass: bool,
}

fn cmd_converge(cfg: &RunConfig, s: &mut Session) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    s.note_model(&model);
    let ns = cfg
        .converge
        .n_list
        .as_ref()
        .ok_or_else(|| cfg.ini.missing("converge.n_list", ""))?;
    if ns.len() < 3 {
        return Err(CoreError::Precondition(format!(
            "a convergence study needs at least three resolutions, got {}",
            ns.len()
        ))
        .into());
    }
    if let Some(w) = ns.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(CoreError::Precondition(format!(
            "resolutions must double: {} then {}",
            w[0], w[1]
        ))
        .into());
    }
    let cfl: Vec<f64> = ns
        .iter()
        .map(|&n| {
            if cfg.converge.scale_cfl {
                cfg.solver.cfl * ns[0] as f64 / n as f64
            } else {
                cfg.solver.cfl
            }
        })
        .collect();
    let initial = ns
        .iter()
        .map(|&n| initial_field(cfg, &model, n))
        .collect::<Result<Vec<_>, _>>()?;
    let runs: Vec<Result<RunHistory, CoreError>> = initial
        .par_iter()
        .zip(&cfl)
        .map(|(u0, &c)| {
            let config = SolverConfig {
                cfl: c,
                ..cfg.solver.clone()
            };
            solve(u0, &model, &config)
        })
        .collect();
    let mut finals = Vec::with_capacity(runs.len());
    for run in runs {
        let h = run?;
        s.note_history(&h);
        finals.push(h.last().clone());
    }
    let conv = ohx_core::analysis::convergence_of_fields(&finals)?;
    let levels: Vec<String> = conv.n[1..].iter().map(|n| n.to_string()).collect();
    s.artifacts.write(
        "trend_converge.csv",
        trend_csv(&levels, &conv.differences).as_bytes(),
    )?;
    let min_order = cfg.converge.min_order;
    let pass = conv.orders.iter().all(|&p| p >= min_order);
    s.artifacts.write_json(
        "report_converge.json",
        &ConvergeSummary {
            convergence: &conv,
            cfl,
            min_order,
            pass,
        },
    )?;
    let failed = if pass {
        Vec::new()
    } else {
        vec![format!(
            "observed orders {:?} below {min_order}",
            conv.orders
        )]
    };
    Ok(Outcome::from_checks("converge", &failed))
}
