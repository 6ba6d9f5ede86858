//! Spatially dependent fluxes `f(x, u)`.
//!
//! A [`FluxModel`] bundles a flux with its partials (`f_u`, `f_x`, `f_xu`,
//! `f_uu`) and the constants `(C, L₁, L)` that bound them on a declared state
//! box `[-M, M]`:
//!
//! - `|f_xu| ≤ C` and `|f_x| ≤ C |u|`,
//! - `|f_x(x, u) - f_x(x, v)| ≤ L₁ |u - v|`,
//! - `|f_u| ≤ L`.
//!
//! The constants are never taken on trust: [`make_flux`] measures them by
//! dense sampling, and [`validate_assumptions`] re-measures them on any
//! requested sample set and reports the tighter values.
//!
//! Partials follow the convention `f_x(x, u) ≠ ∂ₓ[f(x, u(x))]`, i.e. `f_x` is
//! the derivative at fixed state, and `∂ₓ f(x, u) = f_u u_x + f_x`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Default half-width `M` of the validated state box.
pub const DEFAULT_STATE_BOX_M: f64 = 8.0;

/// Samples per axis for constant measurement.
const SAMPLES_PER_AXIS: usize = 201;

/// `|f_uu(x, u)|` counts as vanishing below this fraction of `sup_v |f_uu(x, v)|`.
/// Relative to the local curvature so that a weight decaying in `x` does not
/// read as degeneracy.
pub const NONLINEARITY_THRESHOLD: f64 = 1e-12;

/// Required fraction of samples with `|f_uu|` above [`NONLINEARITY_THRESHOLD`].
pub const NONLINEARITY_FRACTION: f64 = 0.99;

/// Decay at an extreme x sample: `sup_u |g(x_ext, u)| ≤ DECAY_RATIO · sup_{x,u} |g|`.
pub const DECAY_RATIO: f64 = 1e-3;

/// Step of the central differences used for derivative consistency.
const FD_STEP: f64 = 1e-5;

/// A flux `f(x, u)` together with its first and mixed/second partials.
pub trait Flux: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn eval(&self, x: f64, u: f64) -> f64;
    fn du(&self, x: f64, u: f64) -> f64;
    fn dx(&self, x: f64, u: f64) -> f64;
    fn dxu(&self, x: f64, u: f64) -> f64;
    fn duu(&self, x: f64, u: f64) -> f64;
}

/// `f(u) = u²/2`, independent of `x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Burgers;

impl Flux for Burgers {
    fn name(&self) -> String {
        "burgers".into()
    }
    fn eval(&self, _x: f64, u: f64) -> f64 {
        0.5 * u * u
    }
    fn du(&self, _x: f64, u: f64) -> f64 {
        u
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

/// `f ≡ 0`. Outside the admissible class; isolates the nonlocal source
/// for exact-solution checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFlux;

impl Flux for ZeroFlux {
    fn name(&self) -> String {
        "zero".into()
    }
    fn eval(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
    fn du(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
    fn dx(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
    fn dxu(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
    fn duu(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
}

/// `f(x, u) = b(x) u²/2` with `b(x) = a·x·e^{-x/s}`.
///
/// `b` vanishes at `x = 0` and as `x → ∞`, and peaks at `x = s` with value `a·s/e`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedBurgers {
    pub a: f64,
    pub s: f64,
}

impl WeightedBurgers {
    pub fn weight(&self, x: f64) -> f64 {
        self.a * x * (-x / self.s).exp()
    }

    pub fn weight_prime(&self, x: f64) -> f64 {
        self.a * (-x / self.s).exp() * (1.0 - x / self.s)
    }
}

impl Default for WeightedBurgers {
    fn default() -> Self {
        Self { a: 4.0, s: 1.0 }
    }
}

impl Flux for WeightedBurgers {
    fn name(&self) -> String {
        format!("weighted-burgers(a={}, s={})", self.a, self.s)
    }
    fn eval(&self, x: f64, u: f64) -> f64 {
        0.5 * self.weight(x) * u * u
    }
    fn du(&self, x: f64, u: f64) -> f64 {
        self.weight(x) * u
    }
    fn dx(&self, x: f64, u: f64) -> f64 {
        0.5 * self.weight_prime(x) * u * u
    }
    fn dxu(&self, x: f64, u: f64) -> f64 {
        self.weight_prime(x) * u
    }
    fn duu(&self, x: f64, _u: f64) -> f64 {
        self.weight(x)
    }
}

/// `f(x, u) = w(x) u²/2` with `w` a natural cubic spline through a table.
///
/// Outside the tabulated range `w` is held at its end values.
#[derive(Debug, Clone)]
pub struct TabulatedWeight {
    spline: CubicSpline,
}

impl TabulatedWeight {
    pub fn new(xs: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        Ok(Self {
            spline: CubicSpline::natural(xs, ws)?,
        })
    }
}

impl Flux for TabulatedWeight {
    fn name(&self) -> String {
        format!("custom-table({} knots)", self.spline.xs.len())
    }
    fn eval(&self, x: f64, u: f64) -> f64 {
        0.5 * self.spline.value(x) * u * u
    }
    fn du(&self, x: f64, u: f64) -> f64 {
        self.spline.value(x) * u
    }
    fn dx(&self, x: f64, u: f64) -> f64 {
        0.5 * self.spline.derivative(x) * u * u
    }
    fn dxu(&self, x: f64, u: f64) -> f64 {
        self.spline.derivative(x) * u
    }
    fn duu(&self, x: f64, _u: f64) -> f64 {
        self.spline.value(x)
    }
}

#[derive(Debug, Clone)]
struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::invalid(
                "flux.table",
                "need at least two (x, w) rows of equal length",
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flux table"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "flux.table",
                "x must be strictly increasing",
            ));
        }
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = xs[i] - xs[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= self.xs.len() => self.xs.len() - 2,
            p => p - 1,
        }
    }

    fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

/// Bounds `(C, L₁, L)` on the flux partials over a state box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxConstants {
    /// `|f_xu| ≤ C`, `|f_x| ≤ C|u|`.
    pub c: f64,
    /// Lipschitz constant of `u ↦ f_x(x, u)`.
    pub l1: f64,
    /// Speed bound `|f_u| ≤ L`.
    pub l: f64,
}

impl FluxConstants {
    fn min(self, other: Self) -> Self {
        Self {
            c: self.c.min(other.c),
            l1: self.l1.min(other.l1),
            l: self.l.min(other.l),
        }
    }
}

/// Identifier plus parameters of a built-in flux family.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxFamily {
    Burgers,
    WeightedBurgers { a: f64, s: f64 },
    CustomTable { xs: Vec<f64>, ws: Vec<f64> },
}

impl FluxFamily {
    /// Parses a family identifier. `a`/`s` default to 4 and 1 for
    /// `weighted-burgers`; `custom-table` requires `table`.
    pub fn parse(
        id: &str,
        a: Option<f64>,
        s: Option<f64>,
        table: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        match id {
            "burgers" => Ok(FluxFamily::Burgers),
            "weighted-burgers" => Ok(FluxFamily::WeightedBurgers {
                a: a.unwrap_or(4.0),
                s: s.unwrap_or(1.0),
            }),
            "custom-table" => {
                let (xs, ws) = table.ok_or_else(|| {
                    Error::invalid("flux.table", "custom-table family needs a weight table")
                })?;
                Ok(FluxFamily::CustomTable { xs, ws })
            }
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            FluxFamily::Burgers => "burgers",
            FluxFamily::WeightedBurgers { .. } => "weighted-burgers",
            FluxFamily::CustomTable { .. } => "custom-table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSpec {
    pub family: FluxFamily,
    pub state_box_m: f64,
}

impl FluxSpec {
    pub fn new(family: FluxFamily) -> Self {
        Self {
            family,
            state_box_m: DEFAULT_STATE_BOX_M,
        }
    }

    pub fn with_state_box(mut self, m: f64) -> Self {
        self.state_box_m = m;
        self
    }
}

/// A flux plus the constants valid on its state box. Cheap to clone and
/// safe to share across threads.
#[derive(Clone)]
pub struct FluxModel {
    flux: Arc<dyn Flux>,
    constants: FluxConstants,
    state_box_m: f64,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("flux", &self.flux.name())
            .field("constants", &self.constants)
            .field("state_box_m", &self.state_box_m)
            .finish()
    }
}

impl FluxModel {
    /// Wraps an arbitrary flux and measures its constants on `[-m, m]`
    /// over `x ∈ [0, x_extent]`. `m` may be infinite for fluxes whose
    /// partials are bounded independently of the state (e.g. the zero flux);
    /// constants are then measured on `[-1, 1]`.
    pub fn from_flux(flux: Arc<dyn Flux>, m: f64, x_extent: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::invalid("flux.state_box_m", "must be positive"));
        }
        if !(x_extent.is_finite() && x_extent > 0.0) {
            return Err(Error::invalid("x_extent", "must be positive and finite"));
        }
        let xs = linspace(0.0, x_extent, SAMPLES_PER_AXIS);
        let probe = if m.is_finite() { m } else { 1.0 };
        let measured = measure(&*flux, &xs, -probe, probe);
        if !measured.finite {
            return Err(Error::NonFinite("flux sampling"));
        }
        Ok(Self {
            flux,
            constants: measured.constants,
            state_box_m: m,
        })
    }

    /// The zero flux with an unbounded state box.
    pub fn zero() -> Self {
        Self {
            flux: Arc::new(ZeroFlux),
            constants: FluxConstants {
                c: 0.0,
                l1: 0.0,
                l: 0.0,
            },
            state_box_m: f64::INFINITY,
        }
    }

    pub fn flux(&self) -> &Arc<dyn Flux> {
        &self.flux
    }

    pub fn name(&self) -> String {
        self.flux.name()
    }

    pub fn constants(&self) -> FluxConstants {
        self.constants
    }

    pub fn state_box_m(&self) -> f64 {
        self.state_box_m
    }

    /// Same flux, different constants (e.g. the tighter ones from validation).
    pub fn with_constants(&self, constants: FluxConstants) -> Self {
        Self {
            constants,
            ..self.clone()
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        self.flux.eval(x, u)
    }
    #[inline]
    pub fn du(&self, x: f64, u: f64) -> f64 {
        self.flux.du(x, u)
    }
    #[inline]
    pub fn dx(&self, x: f64, u: f64) -> f64 {
        self.flux.dx(x, u)
    }
    #[inline]
    pub fn dxu(&self, x: f64, u: f64) -> f64 {
        self.flux.dxu(x, u)
    }
    #[inline]
    pub fn duu(&self, x: f64, u: f64) -> f64 {
        self.flux.duu(x, u)
    }
}

/// Right end of the x range on which a family's constants are measured:
/// `50·max(1, s)` for weighted-burgers, 50 for burgers, the last table node
/// for custom-table.
pub fn default_x_extent(family: &FluxFamily) -> f64 {
    match family {
        FluxFamily::Burgers => 50.0,
        FluxFamily::WeightedBurgers { s, .. } => 50.0 * s.max(1.0),
        FluxFamily::CustomTable { xs, .. } => {
            xs.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE)
        }
    }
}

/// Builds the model for a spec, with constants measured on `[-M, M]`.
pub fn make_flux(spec: &FluxSpec) -> Result<FluxModel> {
    let m = spec.state_box_m;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::invalid(
            "flux.state_box_m",
            format!("must be positive and finite, got {m}"),
        ));
    }
    match &spec.family {
        FluxFamily::Burgers => {
            FluxModel::from_flux(Arc::new(Burgers), m, default_x_extent(&spec.family))
        }
        FluxFamily::WeightedBurgers { a, s } => {
            if !a.is_finite() || !s.is_finite() {
                return Err(Error::NonFinite("weighted-burgers parameters"));
            }
            if *s <= 0.0 {
                return Err(Error::invalid("flux.s", "must be positive"));
            }
            FluxModel::from_flux(
                Arc::new(WeightedBurgers { a: *a, s: *s }),
                m,
                default_x_extent(&spec.family),
            )
        }
        FluxFamily::CustomTable { xs, ws } => {
            let flux = TabulatedWeight::new(xs.clone(), ws.clone())?;
            FluxModel::from_flux(Arc::new(flux), m, default_x_extent(&spec.family))
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

struct Measured {
    constants: FluxConstants,
    finite: bool,
    min_abs_fuu: f64,
    nonlinear_fraction: f64,
    sup_abs_f: f64,
    sup_abs_fx: f64,
}

fn measure(flux: &dyn Flux, xs: &[f64], u_lo: f64, u_hi: f64) -> Measured {
    let us = linspace(u_lo, u_hi, SAMPLES_PER_AXIS);
    let mut finite = true;
    let mut c = 0.0_f64;
    let mut l = 0.0_f64;
    let mut l1 = 0.0_f64;
    let mut min_fuu = f64::INFINITY;
    let mut nonlinear = 0usize;
    let mut total = 0usize;
    let mut sup_f = 0.0_f64;
    let mut sup_fx = 0.0_f64;
    let mut fx_row = vec![0.0; us.len()];
    let mut fuu_row = vec![0.0; us.len()];
    for &x in xs {
        for (k, &u) in us.iter().enumerate() {
            let f = flux.eval(x, u);
            let fu = flux.du(x, u);
            let fx = flux.dx(x, u);
            let fxu = flux.dxu(x, u);
            let fuu = flux.duu(x, u);
            if ![f, fu, fx, fxu, fuu].iter().all(|v| v.is_finite()) {
                finite = false;
            }
            sup_f = sup_f.max(f.abs());
            sup_fx = sup_fx.max(fx.abs());
            l = l.max(fu.abs());
            c = c.max(fxu.abs());
            if u != 0.0 {
                c = c.max(fx.abs() / u.abs());
            }
            min_fuu = min_fuu.min(fuu.abs());
            fx_row[k] = fx;
            fuu_row[k] = fuu.abs();
        }
        let scale = fuu_row.iter().fold(0.0_f64, |m, v| m.max(*v));
        nonlinear += fuu_row
            .iter()
            .filter(|&&v| scale > 0.0 && v > NONLINEARITY_THRESHOLD * scale)
            .count();
        total += us.len();
        for i in 0..us.len() {
            for j in i + 1..us.len() {
                let q = (fx_row[j] - fx_row[i]).abs() / (us[j] - us[i]);
                l1 = l1.max(q);
            }
        }
    }
    Measured {
        constants: FluxConstants { c, l1, l },
        finite,
        min_abs_fuu: min_fuu,
        nonlinear_fraction: if total == 0 {
            0.0
        } else {
            nonlinear as f64 / total as f64
        },
        sup_abs_f: sup_f,
        sup_abs_fx: sup_fx,
    }
}

/// Outcome of one hypothesis.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// A failing warn-only check does not fail the report.
    pub warn_only: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self {
            name,
            pass,
            warn_only: false,
            detail,
        }
    }

    fn warn(mut self) -> Self {
        self.warn_only = true;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub flux: String,
    pub u_box: (f64, f64),
    pub x_range: (f64, f64),
    pub declared: FluxConstants,
    pub measured: FluxConstants,
    pub min_abs_fuu: f64,
    pub nonlinear_fraction: f64,
    /// `(sup_u |f|, sup_u |f_x|)` at the smallest x sample.
    pub decay_at_zero: (f64, f64),
    /// `(sup_u |f|, sup_u |f_x|)` at the largest x sample.
    pub decay_at_infinity: (f64, f64),
    pub max_derivative_mismatch: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// All non-warn-only checks pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.warn_only)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass && !c.warn_only)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass && c.warn_only)
    }

    /// Elementwise minimum of declared and measured constants.
    pub fn effective_constants(&self) -> FluxConstants {
        self.declared.min(self.measured)
    }
}

/// Machine check of the flux hypotheses on `x_samples × u_box`.
///
/// Failures are report entries, never errors. The check names are
/// `derivative-consistency`, `A1-nonlinear`, `A1-decay-infinity`,
/// `A1-decay-zero` (warn-only), `A2`, `A3` and `A4`.
pub fn validate_assumptions(
    model: &FluxModel,
    x_samples: &[f64],
    u_box: (f64, f64),
    tol: f64,
) -> ValidationReport {
    let flux = &**model.flux();
    let (u_lo, u_hi) = u_box;
    let declared = model.constants();
    let mut xs: Vec<f64> = x_samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = measure(flux, &xs, u_lo, u_hi);
    let us = linspace(u_lo, u_hi, SAMPLES_PER_AXIS);

    let mut checks = Vec::new();

    // Derivative consistency against central differences. Second
    // derivatives are differenced from the first-derivative callables.
    let h = FD_STEP;
    let mut worst = 0.0_f64;
    let mut worst_at = (0.0, 0.0, "");
    for &x in &xs {
        let xc = x.max(h);
        for &u in &us {
            let pairs = [
                (
                    "f_u",
                    flux.du(xc, u),
                    (flux.eval(xc, u + h) - flux.eval(xc, u - h)) / (2.0 * h),
                ),
                (
                    "f_x",
                    flux.dx(xc, u),
                    (flux.eval(xc + h, u) - flux.eval(xc - h, u)) / (2.0 * h),
                ),
                (
                    "f_xu",
                    flux.dxu(xc, u),
                    (flux.du(xc + h, u) - flux.du(xc - h, u)) / (2.0 * h),
                ),
                (
                    "f_xu",
                    flux.dxu(xc, u),
                    (flux.dx(xc, u + h) - flux.dx(xc, u - h)) / (2.0 * h),
                ),
                (
                    "f_uu",
                    flux.duu(xc, u),
                    (flux.du(xc, u + h) - flux.du(xc, u - h)) / (2.0 * h),
                ),
            ];
            for (which, exact, fd) in pairs {
                let err = (exact - fd).abs() / (1.0 + exact.abs());
                let err = if err.is_nan() { f64::INFINITY } else { err };
                if err > worst {
                    worst = err;
                    worst_at = (xc, u, which);
                }
            }
        }
    }
    checks.push(Check::new(
        "derivative-consistency",
        worst <= tol,
        format!(
            "max relative mismatch {worst:.3e} (tol {tol:.1e}) in {} at x={}, u={}",
            worst_at.2, worst_at.0, worst_at.1
        ),
    ));

    checks.push(Check::new(
        "A1-nonlinear",
        m.nonlinear_fraction >= NONLINEARITY_FRACTION,
        format!(
            "|f_uu| > {NONLINEARITY_THRESHOLD:e}·sup_u|f_uu| on {:.2}% of samples (need {:.0}%), min |f_uu| = {:.3e}",
            100.0 * m.nonlinear_fraction,
            100.0 * NONLINEARITY_FRACTION,
            m.min_abs_fuu
        ),
    ));

    let sup_at = |x: f64| -> (f64, f64) {
        us.iter().fold((0.0_f64, 0.0_f64), |(a, b), &u| {
            (a.max(flux.eval(x, u).abs()), b.max(flux.dx(x, u).abs()))
        })
    };
    let x_first = xs.first().copied().unwrap_or(0.0);
    let x_last = xs.last().copied().unwrap_or(0.0);
    let at_zero = sup_at(x_first);
    let at_inf = sup_at(x_last);
    let decays =
        |(f, fx): (f64, f64)| f <= DECAY_RATIO * m.sup_abs_f && fx <= DECAY_RATIO * m.sup_abs_fx;
    checks.push(Check::new(
        "A1-decay-infinity",
        decays(at_inf),
        format!(
            "at x={x_last}: sup|f| = {:.3e}, sup|f_x| = {:.3e} (global sups {:.3e}, {:.3e}; ratio {DECAY_RATIO:e})",
            at_inf.0, at_inf.1, m.sup_abs_f, m.sup_abs_fx
        ),
    ));
    checks.push(
        Check::new(
            "A1-decay-zero",
            decays(at_zero),
            format!(
                "at x={x_first}: sup|f| = {:.3e}, sup|f_x| = {:.3e} (global sups {:.3e}, {:.3e}; ratio {DECAY_RATIO:e})",
                at_zero.0, at_zero.1, m.sup_abs_f, m.sup_abs_fx
            ),
        )
        .warn(),
    );

    let bounded = |measured: f64, declared: f64| {
        measured.is_finite() && measured <= declared * (1.0 + tol) + tol
    };
    checks.push(Check::new(
        "A2",
        bounded(m.constants.c, declared.c),
        format!(
            "measured C = {:.6e} (declared {:.6e})",
            m.constants.c, declared.c
        ),
    ));
    checks.push(Check::new(
        "A3",
        bounded(m.constants.l1, declared.l1),
        format!(
            "measured L1 = {:.6e} (declared {:.6e})",
            m.constants.l1, declared.l1
        ),
    ));
    checks.push(Check::new(
        "A4",
        bounded(m.constants.l, declared.l),
        format!(
            "measured L = {:.6e} (declared {:.6e})",
            m.constants.l, declared.l
        ),
    ));
    if !m.finite {
        checks.push(Check::new(
            "finite",
            false,
            "non-finite flux or derivative value on the sample set".into(),
        ));
    }

    ValidationReport {
        flux: model.name(),
        u_box,
        x_range: (x_first, x_last),
        declared,
        measured: m.constants,
        min_abs_fuu: m.min_abs_fuu,
        nonlinear_fraction: m.nonlinear_fraction,
        decay_at_zero: at_zero,
        decay_at_infinity: at_inf,
        max_derivative_mismatch: worst,
        checks,
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Kružkov entropy flux `sign(u - c)(f(x, u) - f(x, c))`.
#[inline]
pub fn kruzkov_flux(model: &FluxModel, x: f64, u: f64, c: f64) -> f64 {
    sign(u - c) * (model.eval(x, u) - model.eval(x, c))
}

/// Gauss–Legendre approximation of `q(x, u) = ∫₀ᵘ η′(v) f_v(x, v) dv`,
/// splitting the range at `breakpoints` (kinks of `η′`).
pub fn entropy_flux_quadrature(
    model: &FluxModel,
    eta_prime: impl Fn(f64) -> f64,
    x: f64,
    u: f64,
    n_quad: usize,
    breakpoints: &[f64],
) -> Result<f64> {
    entropy_flux_between(model, eta_prime, x, 0.0, u, n_quad, breakpoints)
}

/// `∫_lower^upper η′(v) f_v(x, v) dv`.
pub fn entropy_flux_between(
    model: &FluxModel,
    eta_prime: impl Fn(f64) -> f64,
    x: f64,
    lower: f64,
    upper: f64,
    n_quad: usize,
    breakpoints: &[f64],
) -> Result<f64> {
    if n_quad < 2 {
        return Err(Error::invalid("n_quad", "need at least two nodes"));
    }
    if lower == upper {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(n_quad);
    let mut finite = true;
    let value = rule.integrate_split(lower, upper, breakpoints, |v| {
        let g = eta_prime(v) * model.du(x, v);
        if !g.is_finite() {
            finite = false;
        }
        g
    });
    if finite {
        Ok(value)
    } else {
        Err(Error::NonFinite("entropy flux integrand"))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex entropy `η` with its derivative; the entropy flux is generated by
/// quadrature against the model's `f_u`.
#[derive(Clone)]
pub struct EntropyPair {
    eta: ScalarFn,
    eta_prime: ScalarFn,
    kruzkov_c: Option<f64>,
}

impl fmt::Debug for EntropyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EntropyPair")
            .field("kruzkov_c", &self.kruzkov_c)
            .finish_non_exhaustive()
    }
}

impl EntropyPair {
    pub fn new(
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        eta_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eta: Arc::new(eta),
            eta_prime: Arc::new(eta_prime),
            kruzkov_c: None,
        }
    }

    /// `η(u) = u²/2`.
    pub fn quadratic() -> Self {
        Self::new(|u| 0.5 * u * u, |u| u)
    }

    /// `η(u) = |u - c|`.
    pub fn kruzkov(c: f64) -> Self {
        Self {
            eta: Arc::new(move |u| (u - c).abs()),
            eta_prime: Arc::new(move |u| sign(u - c)),
            kruzkov_c: Some(c),
        }
    }

    pub fn kruzkov_c(&self) -> Option<f64> {
        self.kruzkov_c
    }

    pub fn eta(&self, u: f64) -> f64 {
        (self.eta)(u)
    }

    pub fn eta_prime(&self, u: f64) -> f64 {
        (self.eta_prime)(u)
    }

    /// Entropy flux. For the Kružkov pair the integral is based at `c`
    /// (where `η` vanishes), which makes it coincide with [`kruzkov_flux`];
    /// otherwise it is based at 0.
    pub fn q(&self, model: &FluxModel, x: f64, u: f64, n_quad: usize) -> Result<f64> {
        match self.kruzkov_c {
            Some(c) => entropy_flux_between(model, &*self.eta_prime, x, c, u, n_quad, &[c]),
            None => entropy_flux_quadrature(model, &*self.eta_prime, x, u, n_quad, &[]),
        }
    }
}
