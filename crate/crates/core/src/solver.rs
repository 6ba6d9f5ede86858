//! Method-of-lines solver for `u_t + f(x, u)_x = P + ε u_xx`.
//!
//! Convection uses a two-point monotone flux (Rusanov or Engquist–Osher),
//! diffusion the centred second difference, and the source the primitive
//! recomputed from the stage values. Stages are advanced by SSP Runge–Kutta.
//!
//! Boundaries: at `x = 0` the convective flux sees the Dirichlet state 0 and
//! the diffusive stencil the odd ghost `u₀ = −u₁`; at `x_max` both see the
//! ghost value 0.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{FluxConstants, FluxModel};
use crate::grid::{Field, Grid};
use crate::nonlocal::{cumulative_into, cumulative_primitive, sup_window, Primitive};
use crate::quadrature::compensated_sum;

/// Panels of the sign-change scan for sonic points.
pub const SONIC_PANELS: usize = 64;

/// Abort once `sup|u|` exceeds this multiple of the state box.
pub const BLOWUP_FACTOR: f64 = 10.0;

/// Cells next to `x_max` watched for activity.
pub const RIGHT_EDGE_CELLS: usize = 5;

const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericalFluxKind {
    Rusanov,
    EngquistOsher,
}

impl FromStr for NumericalFluxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rusanov" => Ok(Self::Rusanov),
            "engquist-osher" => Ok(Self::EngquistOsher),
            other => Err(Error::invalid(
                "solver.flux_kind",
                format!("`{other}` is not one of rusanov, engquist-osher"),
            )),
        }
    }
}

impl fmt::Display for NumericalFluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rusanov => "rusanov",
            Self::EngquistOsher => "engquist-osher",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    SspRk2,
    SspRk3,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssp-rk2" => Ok(Self::SspRk2),
            "ssp-rk3" => Ok(Self::SspRk3),
            other => Err(Error::invalid(
                "solver.integrator",
                format!("`{other}` is not one of ssp-rk2, ssp-rk3"),
            )),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SspRk2 => "ssp-rk2",
            Self::SspRk3 => "ssp-rk3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub numerical_flux: NumericalFluxKind,
    pub integrator: Integrator,
    pub cfl: f64,
    pub t_end: f64,
    /// Snapshot every this many steps (the final state is always kept).
    pub output_stride: usize,
    /// Turning the source off reduces the model to a local conservation
    /// law; only meant for exact-solution checks.
    pub include_source: bool,
    /// Window for the `sup|u|`, `sup|P|` monitors; whole domain if `None`.
    pub monitor_window: Option<(f64, f64)>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            numerical_flux: NumericalFluxKind::EngquistOsher,
            integrator: Integrator::SspRk2,
            cfl: 0.5,
            t_end: 1.0,
            output_stride: 1,
            include_source: true,
            monitor_window: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::invalid(
                "solver.cfl",
                format!("must lie in (0, 1], got {}", self.cfl),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(
                "solver.epsilon",
                format!("must be finite and ≥ 0, got {}", self.epsilon),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(
                "solver.t_end",
                format!("must be finite and > 0, got {}", self.t_end),
            ));
        }
        if self.output_stride == 0 {
            return Err(Error::invalid("solver.output_stride", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub primitive: Primitive,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.field.time()
    }
}

/// Diagnostics after one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    /// `dx·Σ uᵢ`.
    pub mean: f64,
    pub l2: f64,
    pub sup_u: f64,
    pub sup_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub grid: Grid,
    pub flux_name: String,
    pub constants: FluxConstants,
    pub state_box_m: f64,
    pub config: SolverConfig,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    /// `(dx·Σ P_i(0), dx·Σ P_i(0)²)`.
    pub initial_primitive_moments: (f64, f64),
    pub warnings: Vec<String>,
}

impl RunHistory {
    pub fn initial(&self) -> &Field {
        &self.snapshots[0].field
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1].field
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::time).collect()
    }

    /// Largest `|mean|` over the initial state and every step.
    pub fn max_abs_mean(&self) -> f64 {
        let m0 = crate::nonlocal::mean(self.initial()).abs();
        self.steps.iter().fold(m0, |m, s| m.max(s.mean.abs()))
    }
}

/// Interface flux for the states `uL | uR` at position `x`.
pub fn numerical_flux_value(
    model: &FluxModel,
    x: f64,
    u_left: f64,
    u_right: f64,
    kind: NumericalFluxKind,
) -> Result<f64> {
    if !(u_left.is_finite() && u_right.is_finite()) {
        return Err(Error::NonFinite("numerical flux states"));
    }
    Ok(flux_value(model, x, u_left, u_right, kind))
}

#[inline]
fn flux_value(model: &FluxModel, x: f64, ul: f64, ur: f64, kind: NumericalFluxKind) -> f64 {
    if ul == ur {
        return model.eval(x, ul);
    }
    match kind {
        NumericalFluxKind::Rusanov => {
            let alpha = model.du(x, ul).abs().max(model.du(x, ur).abs());
            0.5 * (model.eval(x, ul) + model.eval(x, ur)) - 0.5 * alpha * (ur - ul)
        }
        NumericalFluxKind::EngquistOsher => {
            let f0 = model.eval(x, 0.0);
            let (pos, _) = signed_parts(model, x, ul, f0);
            let (_, neg) = signed_parts(model, x, ur, f0);
            f0 + pos + neg
        }
    }
}

/// `(∫₀ᵘ max(f_v, 0) dv, ∫₀ᵘ min(f_v, 0) dv)`, signed for `u < 0`.
///
/// Between consecutive sonic points `f_v` keeps one sign, so each piece is
/// an exact flux difference.
fn signed_parts(model: &FluxModel, x: f64, u: f64, f0: f64) -> (f64, f64) {
    if u == 0.0 {
        return (0.0, 0.0);
    }
    let (lo, hi) = if u > 0.0 { (0.0, u) } else { (u, 0.0) };
    let h = (hi - lo) / SONIC_PANELS as f64;
    let node = |k: usize| {
        if k == SONIC_PANELS {
            hi
        } else {
            lo + k as f64 * h
        }
    };

    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut left = lo;
    let mut f_left = if lo == 0.0 { f0 } else { model.eval(x, lo) };
    let mut g_prev = model.du(x, lo);
    let close = |right: f64, f_left: &mut f64, left: &mut f64, pos: &mut f64, neg: &mut f64| {
        let f_right = if right == 0.0 {
            f0
        } else {
            model.eval(x, right)
        };
        let df = f_right - *f_left;
        let s = model.du(x, 0.5 * (*left + right));
        if s > 0.0 || (s == 0.0 && df > 0.0) {
            *pos += df;
        } else {
            *neg += df;
        }
        *f_left = f_right;
        *left = right;
    };
    for k in 1..=SONIC_PANELS {
        let b = node(k);
        let g = model.du(x, b);
        if g_prev * g < 0.0 {
            let root = bisect(model, x, node(k - 1), b, g_prev);
            if root > left && root < hi {
                close(root, &mut f_left, &mut left, &mut pos, &mut neg);
            }
        }
        if g == 0.0 && b > left && b < hi {
            close(b, &mut f_left, &mut left, &mut pos, &mut neg);
        }
        g_prev = g;
    }
    if hi > left {
        close(hi, &mut f_left, &mut left, &mut pos, &mut neg);
    }
    if u > 0.0 {
        (pos, neg)
    } else {
        (-pos, -neg)
    }
}

fn bisect(model: &FluxModel, x: f64, mut a: f64, mut b: f64, g_a: f64) -> f64 {
    let sa = g_a.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let g = model.du(x, m);
        if g == 0.0 {
            return m;
        }
        if g.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Reusable buffers for tendency evaluation.
struct Workspace {
    fluxes: Vec<f64>,
    primitive: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            fluxes: vec![0.0; n + 1],
            primitive: vec![0.0; n],
        }
    }
}

fn tendency(
    grid: &Grid,
    model: &FluxModel,
    config: &SolverConfig,
    u: &[f64],
    out: &mut [f64],
    ws: &mut Workspace,
) -> Result<()> {
    let n = grid.n();
    let dx = grid.dx();
    let m = model.state_box_m();
    if m.is_finite() {
        if let Some(i) = u.iter().position(|v| v.abs() > m) {
            return Err(Error::OutsideStateBox {
                x: grid.center(i),
                value: u[i],
                m,
            });
        }
    }
    let kind = config.numerical_flux;
    ws.fluxes[0] = flux_value(model, 0.0, 0.0, u[0], kind);
    for k in 1..n {
        ws.fluxes[k] = flux_value(model, grid.interface(k), u[k - 1], u[k], kind);
    }
    ws.fluxes[n] = flux_value(model, grid.x_max(), u[n - 1], 0.0, kind);

    if config.include_source {
        cumulative_into(u, dx, &mut ws.primitive);
    } else {
        ws.primitive.iter_mut().for_each(|p| *p = 0.0);
    }

    let nu = config.epsilon / (dx * dx);
    for i in 0..n {
        let mut r = -(ws.fluxes[i + 1] - ws.fluxes[i]) / dx + ws.primitive[i];
        if nu > 0.0 {
            let left = if i == 0 { -u[0] } else { u[i - 1] };
            let right = if i + 1 == n { 0.0 } else { u[i + 1] };
            r += nu * (right - 2.0 * u[i] + left);
        }
        out[i] = r;
    }
    Ok(())
}

/// `du/dt` of the semi-discrete scheme.
pub fn semi_discrete_rhs(u: &Field, model: &FluxModel, config: &SolverConfig) -> Result<Vec<f64>> {
    let grid = u.grid();
    let mut out = vec![0.0; grid.n()];
    let mut ws = Workspace::new(grid.n());
    tendency(grid, model, config, u.values(), &mut out, &mut ws)?;
    Ok(out)
}

/// `cfl·min(dx/α_max, dx²/(2ε), 1/(x_max + 1))`; the source cap is dropped
/// when the source is switched off.
pub fn stable_dt(u: &Field, model: &FluxModel, config: &SolverConfig) -> f64 {
    dt_for(u.grid(), u.values(), model, config)
}

fn dt_for(grid: &Grid, u: &[f64], model: &FluxModel, config: &SolverConfig) -> f64 {
    let dx = grid.dx();
    let alpha = u
        .iter()
        .enumerate()
        .fold(0.0_f64, |a, (i, &v)| {
            a.max(model.du(grid.center(i), v).abs())
        })
        .max(ALPHA_FLOOR);
    let mut cap = dx / alpha;
    if config.epsilon > 0.0 {
        cap = cap.min(dx * dx / (2.0 * config.epsilon));
    }
    if config.include_source {
        cap = cap.min(1.0 / (grid.x_max() + 1.0));
    }
    config.cfl * cap
}

fn l2(dx: f64, u: &[f64]) -> f64 {
    (dx * compensated_sum(u.iter().map(|v| v * v))).sqrt()
}

fn snapshot(grid: &Grid, u: &[f64], t: f64) -> Snapshot {
    let field = Field::from_parts(*grid, u.to_vec(), t);
    let primitive = cumulative_primitive(&field);
    Snapshot { field, primitive }
}

/// Advances `u0` to `config.t_end`.
///
/// Faults (state leaving the validation box, blow-up, non-finite values)
/// come back as [`Error::SolverFault`] carrying the history up to the last
/// finite state.
pub fn solve(u0: &Field, model: &FluxModel, config: &SolverConfig) -> Result<RunHistory> {
    config.validate()?;
    let grid = *u0.grid();
    let n = grid.n();
    let dx = grid.dx();
    let window = config.monitor_window.unwrap_or((0.0, grid.x_max()));
    sup_window(&grid, u0.values(), window)?;

    let p0 = cumulative_primitive(u0);
    let mut warnings = Vec::new();
    let mean0 = p0.right_edge();
    if mean0.abs() > 1e-10 * (1.0 + u0.sup_norm()) {
        let w = format!("initial data has nonzero mean {mean0:.3e}");
        log::warn!("{w}");
        warnings.push(w);
    }
    let initial_primitive_moments = (
        dx * compensated_sum(p0.values().iter().copied()),
        dx * compensated_sum(p0.values().iter().map(|p| p * p)),
    );

    let mut history = RunHistory {
        grid,
        flux_name: model.name(),
        constants: model.constants(),
        state_box_m: model.state_box_m(),
        config: config.clone(),
        snapshots: vec![Snapshot {
            field: Field::from_parts(grid, u0.values().to_vec(), 0.0),
            primitive: p0,
        }],
        steps: Vec::new(),
        initial_primitive_moments,
        warnings,
    };

    let mut u = u0.values().to_vec();
    let mut stage = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut ws = Workspace::new(n);
    let mut t = 0.0_f64;
    let mut step = 0usize;
    let edge_cut = 1e-6 * u0.sup_norm().max(f64::MIN_POSITIVE);
    let mut edge_warned = false;
    let blowup = BLOWUP_FACTOR * model.state_box_m();

    while t < config.t_end {
        let mut dt = dt_for(&grid, &u, model, config);
        let last = t + dt >= config.t_end * (1.0 - 1e-14);
        if last {
            dt = config.t_end - t;
        }

        let advanced = advance(&grid, model, config, &u, dt, &mut stage, &mut rate, &mut ws);
        let next = match advanced {
            Ok(v) => v,
            Err(e) => return Err(fault(history, &u, t, e.to_string())),
        };
        let sup = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() {
            return Err(fault(history, &u, t, "non-finite state".into()));
        }
        if sup > blowup {
            return Err(fault(
                history,
                &u,
                t,
                format!("sup|u| = {sup:.3e} exceeds {BLOWUP_FACTOR}×M = {blowup}"),
            ));
        }
        u = next;
        t = if last { config.t_end } else { t + dt };
        step += 1;

        let total = cumulative_into(&u, dx, &mut ws.primitive);
        let record = StepRecord {
            step,
            time: t,
            dt,
            mean: total,
            l2: l2(dx, &u),
            sup_u: sup_window(&grid, &u, window)?,
            sup_p: sup_window(&grid, &ws.primitive, window)?,
        };
        history.steps.push(record);

        if !edge_warned
            && u[n.saturating_sub(RIGHT_EDGE_CELLS)..]
                .iter()
                .any(|v| v.abs() > edge_cut)
        {
            edge_warned = true;
            let w = format!("solution reaches the last {RIGHT_EDGE_CELLS} cells at t = {t:.4}; consider a larger x_max");
            log::warn!("{w}");
            history.warnings.push(w);
        }
        if last || step.is_multiple_of(config.output_stride) {
            history.snapshots.push(snapshot(&grid, &u, t));
        }
    }
    Ok(history)
}

fn fault(mut history: RunHistory, u: &[f64], t: f64, reason: String) -> Error {
    let last_time = history.snapshots.last().map(Snapshot::time).unwrap_or(0.0);
    if t > last_time {
        history.snapshots.push(snapshot(&history.grid, u, t));
    }
    log::error!("solver fault at t = {t}: {reason}");
    Error::SolverFault {
        time: t,
        reason,
        partial: Box::new(history),
    }
}

#[allow(clippy::too_many_arguments)]
fn advance(
    grid: &Grid,
    model: &FluxModel,
    config: &SolverConfig,
    u: &[f64],
    dt: f64,
    stage: &mut [f64],
    rate: &mut [f64],
    ws: &mut Workspace,
) -> Result<Vec<f64>> {
    tendency(grid, model, config, u, rate, ws)?;
    for i in 0..u.len() {
        stage[i] = u[i] + dt * rate[i];
    }
    tendency(grid, model, config, stage, rate, ws)?;
    match config.integrator {
        Integrator::SspRk2 => Ok((0..u.len())
            .map(|i| 0.5 * u[i] + 0.5 * (stage[i] + dt * rate[i]))
            .collect()),
        Integrator::SspRk3 => {
            for i in 0..u.len() {
                stage[i] = 0.75 * u[i] + 0.25 * (stage[i] + dt * rate[i]);
            }
            tendency(grid, model, config, stage, rate, ws)?;
            Ok((0..u.len())
                .map(|i| u[i] / 3.0 + 2.0 / 3.0 * (stage[i] + dt * rate[i]))
                .collect())
        }
    }
}

/// `dx·Σ|aᵢ − bᵢ|`.
pub fn l1_distance(a: &Field, b: &Field) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::Precondition("fields live on different grids".into()));
    }
    Ok(a.grid().dx()
        * compensated_sum(
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs()),
        ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub finals: Vec<Field>,
    /// `d(ε_k → ε_{k+1})` at `t_end`.
    pub successive: Vec<f64>,
    /// Distance of each `ε > 0` run to the `ε = 0` run, when the list ends in 0.
    pub to_inviscid: Vec<f64>,
}

/// One solve per viscosity, run concurrently; results keep list order.
pub fn viscosity_sweep(
    u0: &Field,
    model: &FluxModel,
    base: &SolverConfig,
    eps_list: &[f64],
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(Error::invalid("sweep.eps_list", "empty"));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) || eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::invalid(
            "sweep.eps_list",
            "must be nonnegative and nonincreasing",
        ));
    }
    let runs: Vec<Result<RunHistory>> = eps_list
        .par_iter()
        .map(|&eps| {
            let cfg = SolverConfig {
                epsilon: eps,
                ..base.clone()
            };
            solve(u0, model, &cfg)
        })
        .collect();
    let mut finals = Vec::with_capacity(runs.len());
    for r in runs {
        finals.push(r?.last().clone());
    }
    let successive = finals
        .windows(2)
        .map(|w| l1_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let to_inviscid = if eps_list.len() > 1 && eps_list[eps_list.len() - 1] == 0.0 {
        let zero = &finals[finals.len() - 1];
        finals[..finals.len() - 1]
            .iter()
            .map(|f| l1_distance(f, zero))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(SweepReport {
        eps: eps_list.to_vec(),
        finals,
        successive,
        to_inviscid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{make_flux, FluxFamily, FluxSpec};
    use crate::grid::{make_grid, project_initial, InitialData};

    fn burgers() -> FluxModel {
        make_flux(&FluxSpec::new(FluxFamily::Burgers)).unwrap()
    }

    fn weighted() -> FluxModel {
        make_flux(&FluxSpec::new(FluxFamily::WeightedBurgers {
            a: 4.0,
            s: 1.0,
        }))
        .unwrap()
    }

    #[test]
    fn eo_burgers_closed_forms() {
        let b = burgers();
        let eo = NumericalFluxKind::EngquistOsher;
        assert!((numerical_flux_value(&b, 0.0, 1.0, -1.0, eo).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(numerical_flux_value(&b, 0.0, -1.0, 1.0, eo).unwrap(), 0.0);
        // transonic expansion in the other direction
        assert!((numerical_flux_value(&b, 0.0, 2.0, 3.0, eo).unwrap() - 2.0).abs() < 1e-15);
        assert!((numerical_flux_value(&b, 0.0, -3.0, -2.0, eo).unwrap() - 2.0).abs() < 1e-15);
        assert!(numerical_flux_value(&b, 0.0, f64::NAN, 1.0, eo).is_err());
    }

    #[test]
    fn rusanov_closed_form() {
        let b = burgers();
        let v = numerical_flux_value(&b, 0.0, 1.0, -1.0, NumericalFluxKind::Rusanov).unwrap();
        // ½(½ + ½) − ½·1·(−2)
        assert_eq!(v, 1.5);
    }

    #[derive(Debug)]
    struct ShiftedBurgers;
    impl crate::flux::Flux for ShiftedBurgers {
        fn name(&self) -> String {
            "shifted".into()
        }
        fn eval(&self, _x: f64, u: f64) -> f64 {
            0.5 * (u - 0.3) * (u - 0.3)
        }
        fn du(&self, _x: f64, u: f64) -> f64 {
            u - 0.3
        }
        fn dx(&self, _x: f64, _u: f64) -> f64 {
            0.0
        }
        fn dxu(&self, _x: f64, _u: f64) -> f64 {
            0.0
        }
        fn duu(&self, _x: f64, _u: f64) -> f64 {
            1.0
        }
    }

    #[test]
    fn eo_splits_at_interior_sonic_point() {
        let m = FluxModel::from_flux(std::sync::Arc::new(ShiftedBurgers), 4.0, 1.0).unwrap();
        // f(0) + ∫₀¹ max(s − .3, 0) ds + ∫₀^{-1} min(s − .3, 0) ds
        let pos = 0.5 * 0.7 * 0.7;
        let neg = 0.5 * 1.3 * 1.3 - 0.5 * 0.3 * 0.3;
        let want = 0.045 + pos + neg;
        let got =
            numerical_flux_value(&m, 0.0, 1.0, -1.0, NumericalFluxKind::EngquistOsher).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn stable_dt_examples() {
        let b = burgers();
        let g = make_grid(10.0, 100).unwrap();
        let cfg = SolverConfig {
            cfl: 0.9,
            ..Default::default()
        };
        assert!((stable_dt(&Field::zeros(g), &b, &cfg) - 0.9 / 11.0).abs() < 1e-15);

        let g = make_grid(10.0, 200).unwrap();
        let mut v = vec![0.0; 200];
        v[10] = 2.0;
        let u = Field::new(g, v, 0.0).unwrap();
        let cfg = SolverConfig {
            cfl: 0.5,
            ..Default::default()
        };
        assert!((stable_dt(&u, &b, &cfg) - 0.0125).abs() < 1e-15);
        let cfg = SolverConfig {
            cfl: 0.5,
            epsilon: 0.1,
            ..Default::default()
        };
        assert!((stable_dt(&u, &b, &cfg) - 0.5 * 0.0125).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_steady() {
        let g = make_grid(30.0, 120).unwrap();
        let cfg = SolverConfig {
            t_end: 0.5,
            ..Default::default()
        };
        let r = semi_discrete_rhs(&Field::zeros(g), &weighted(), &cfg).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let h = solve(&Field::zeros(g), &weighted(), &cfg).unwrap();
        assert!(h
            .snapshots
            .iter()
            .all(|s| s.field.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_flux_tendency_is_primitive() {
        let g = make_grid(10.0, 50).unwrap();
        let u =
            project_initial(&InitialData::GaussianDipole { mu: 5.0, w: 1.0 }, &g, true).unwrap();
        let r = semi_discrete_rhs(&u, &FluxModel::zero(), &SolverConfig::default()).unwrap();
        assert_eq!(r, cumulative_primitive(&u).values());
    }

    #[test]
    fn box_exit_is_reported() {
        let g = make_grid(10.0, 50).unwrap();
        let mut v = vec![0.0; 50];
        v[3] = 9.0;
        let u = Field::new(g, v, 0.0).unwrap();
        let e = semi_discrete_rhs(&u, &burgers(), &SolverConfig::default()).unwrap_err();
        assert!(matches!(e, Error::OutsideStateBox { .. }));
    }

    #[test]
    fn snapshot_times_and_stride() {
        let g = make_grid(10.0, 40).unwrap();
        let u =
            project_initial(&InitialData::GaussianDipole { mu: 5.0, w: 1.0 }, &g, true).unwrap();
        let cfg = SolverConfig {
            t_end: 0.3,
            output_stride: 3,
            ..Default::default()
        };
        let h = solve(&u, &weighted(), &cfg).unwrap();
        let t = h.times();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 0.3);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        for s in &h.snapshots {
            assert_eq!(s.primitive, cumulative_primitive(&s.field));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SolverConfig {
                cfl: 0.0,
                ..Default::default()
            },
            SolverConfig {
                cfl: 1.5,
                ..Default::default()
            },
            SolverConfig {
                epsilon: -1.0,
                ..Default::default()
            },
            SolverConfig {
                t_end: 0.0,
                ..Default::default()
            },
            SolverConfig {
                output_stride: 0,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
        assert!("upwind".parse::<NumericalFluxKind>().is_err());
        assert_eq!("ssp-rk3".parse::<Integrator>().unwrap(), Integrator::SspRk3);
    }

    #[test]
    fn sweep_edge_cases() {
        let g = make_grid(10.0, 40).unwrap();
        let u =
            project_initial(&InitialData::GaussianDipole { mu: 5.0, w: 1.0 }, &g, true).unwrap();
        let base = SolverConfig {
            t_end: 0.1,
            ..Default::default()
        };
        let one = viscosity_sweep(&u, &weighted(), &base, &[0.0]).unwrap();
        assert!(one.successive.is_empty() && one.to_inviscid.is_empty());
        let twice = viscosity_sweep(&u, &weighted(), &base, &[0.05, 0.05]).unwrap();
        assert_eq!(twice.successive, vec![0.0]);
        assert!(viscosity_sweep(&u, &weighted(), &base, &[0.0, 0.1]).is_err());
    }
}
