//! Uniform truncation of the half-line, cell-centred fields and initial data.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::compensated_sum;
use crate::rng::SeededStream;

/// `n` cells of width `dx = x_max / n` covering `(0, x_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Centre of cell `i` (0-based): `(i + ½)·dx`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Interface `k` for `k = 0..=n`: `k·dx`. The last one is exactly `x_max`.
    #[inline]
    pub fn interface(&self, k: usize) -> f64 {
        if k == self.n {
            self.x_max
        } else {
            k as f64 * self.dx
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    pub fn interfaces(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.interface(k)).collect()
    }

    /// The grid with half as many cells.
    pub fn coarsen(&self) -> Result<Grid> {
        if !self.n.is_multiple_of(2) {
            return Err(Error::invalid(
                "grid.n",
                "odd cell count cannot be coarsened 2-to-1",
            ));
        }
        make_grid(self.x_max, self.n / 2)
    }
}

pub fn make_grid(x_max: f64, n: usize) -> Result<Grid> {
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(Error::invalid(
            "grid.x_max",
            format!("must be positive and finite, got {x_max}"),
        ));
    }
    if n < 4 {
        return Err(Error::invalid(
            "grid.n",
            format!("need at least 4 cells, got {n}"),
        ));
    }
    Ok(Grid {
        x_max,
        n,
        dx: x_max / n as f64,
    })
}

/// Cell-centred values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(
                "field",
                format!("{} values for a grid of {} cells", values.len(), grid.n()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::invalid("time", "must be finite and nonnegative"));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
            time: 0.0,
        }
    }

    /// Skips the finiteness scan; callers guarantee it.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `dx·Σ uᵢ²`.
    pub fn square_mass(&self) -> f64 {
        self.grid.dx() * compensated_sum(self.values.iter().map(|v| v * v))
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid.dx() * compensated_sum(self.values.iter().map(|v| v.abs()))
    }

    /// 2-to-1 cell averaging onto the coarser grid.
    pub fn restrict(&self) -> Result<Field> {
        let coarse = self.grid.coarsen()?;
        let values = self
            .values
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        Ok(Field::from_parts(coarse, values, self.time))
    }
}

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of dipoles in a [`InitialData::RandomZeroMean`] profile.
pub const RANDOM_DIPOLES: usize = 8;

/// Initial profiles `u₀(x)`.
#[derive(Clone)]
pub enum InitialData {
    Zero,
    Constant(f64),
    /// `(x - μ)·exp(-(x - μ)²/w)`.
    GaussianDipole {
        mu: f64,
        w: f64,
    },
    /// `+1` on `[μ - w, μ)`, `-1` on `[μ, μ + w)`.
    BoxDipole {
        mu: f64,
        w: f64,
    },
    /// Sum of [`RANDOM_DIPOLES`] gaussian dipoles with centres, widths and
    /// amplitudes drawn from the seeded stream; centres in `[2, 8]`.
    RandomZeroMean {
        seed: u64,
    },
    /// Linear interpolation through `(x, u)` rows, zero outside the table.
    Table {
        xs: Vec<f64>,
        us: Vec<f64>,
    },
    Function(ProfileFn),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Zero => write!(f, "Zero"),
            InitialData::Constant(c) => write!(f, "Constant({c})"),
            InitialData::GaussianDipole { mu, w } => {
                write!(f, "GaussianDipole {{ mu: {mu}, w: {w} }}")
            }
            InitialData::BoxDipole { mu, w } => write!(f, "BoxDipole {{ mu: {mu}, w: {w} }}"),
            InitialData::RandomZeroMean { seed } => write!(f, "RandomZeroMean {{ seed: {seed} }}"),
            InitialData::Table { xs, .. } => write!(f, "Table({} rows)", xs.len()),
            InitialData::Function(_) => write!(f, "Function"),
        }
    }
}

impl InitialData {
    pub fn function(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialData::Function(Arc::new(g))
    }

    pub fn table(xs: Vec<f64>, us: Vec<f64>) -> Result<Self> {
        if xs.len() != us.len() || xs.len() < 2 {
            return Err(Error::invalid(
                "init.table",
                "need at least two (x, u) rows",
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "init.table",
                "x must be strictly increasing",
            ));
        }
        Ok(InitialData::Table { xs, us })
    }

    /// Evaluates the profile; `RandomZeroMean` draws its parameters once.
    pub fn sampler(&self) -> ProfileFn {
        match self {
            InitialData::Zero => Arc::new(|_| 0.0),
            InitialData::Constant(c) => {
                let c = *c;
                Arc::new(move |_| c)
            }
            InitialData::GaussianDipole { mu, w } => {
                let (mu, w) = (*mu, *w);
                Arc::new(move |x| gaussian_dipole(x, mu, w))
            }
            InitialData::BoxDipole { mu, w } => {
                let (mu, w) = (*mu, *w);
                Arc::new(move |x| {
                    if x >= mu - w && x < mu {
                        1.0
                    } else if x >= mu && x < mu + w {
                        -1.0
                    } else {
                        0.0
                    }
                })
            }
            InitialData::RandomZeroMean { seed } => {
                let mut s = SeededStream::new(*seed);
                let terms: Vec<(f64, f64, f64)> = (0..RANDOM_DIPOLES)
                    .map(|_| {
                        let mu = s.uniform_in(2.0, 8.0);
                        let w = s.uniform_in(0.1, 1.0);
                        let amp = s.uniform_in(-1.0, 1.0);
                        (mu, w, amp)
                    })
                    .collect();
                Arc::new(move |x| {
                    terms
                        .iter()
                        .map(|&(mu, w, amp)| amp * gaussian_dipole(x, mu, w))
                        .sum()
                })
            }
            InitialData::Table { xs, us } => {
                let (xs, us) = (xs.clone(), us.clone());
                Arc::new(move |x| interpolate(&xs, &us, x))
            }
            InitialData::Function(g) => g.clone(),
        }
    }
}

fn gaussian_dipole(x: f64, mu: f64, w: f64) -> f64 {
    let d = x - mu;
    d * (-d * d / w).exp()
}

fn interpolate(xs: &[f64], us: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    us[k - 1] + t * (us[k] - us[k - 1])
}

/// Subtracts the discrete mean twice; the second pass removes the rounding
/// left by the first.
pub fn subtract_mean(values: &mut [f64]) {
    for _ in 0..2 {
        let m = compensated_sum(values.iter().copied()) / values.len() as f64;
        for v in values.iter_mut() {
            *v -= m;
        }
    }
}

/// Samples the profile at the cell centres.
pub fn project_initial(data: &InitialData, grid: &Grid, enforce_zero_mean: bool) -> Result<Field> {
    let g = data.sampler();
    let mut values: Vec<f64> = (0..grid.n()).map(|i| g(grid.center(i))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!(
            "initial profile is non-finite at x = {}",
            grid.center(i)
        )));
    }
    if enforce_zero_mean {
        subtract_mean(&mut values);
    }
    Ok(Field::from_parts(*grid, values, 0.0))
}

/// Standard bump `exp(-1/(1 - z²))` on `(-1, 1)`, zero outside.
#[inline]
pub fn bump(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

/// Discrete convolution with the unit-mass bump of radius `delta`
/// (zero-extended past both ends), followed by mean re-subtraction.
pub fn mollify_initial(field: &Field, delta: f64) -> Result<Field> {
    let grid = field.grid();
    let dx = grid.dx();
    if !(delta >= dx) {
        return Err(Error::invalid(
            "delta",
            format!("smoothing width {delta} is below dx = {dx}"),
        ));
    }
    let reach = (delta / dx).floor() as usize;
    let mut kernel: Vec<f64> = (0..=reach).map(|k| bump(k as f64 * dx / delta)).collect();
    let mass = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
    for w in &mut kernel {
        *w /= mass;
    }
    let u = field.values();
    let n = u.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = kernel[0] * u[i];
        for (k, &w) in kernel.iter().enumerate().skip(1) {
            if w == 0.0 {
                continue;
            }
            if i >= k {
                acc += w * u[i - k];
            }
            if i + k < n {
                acc += w * u[i + k];
            }
        }
        *o = acc;
    }
    subtract_mean(&mut out);
    Ok(Field::from_parts(*grid, out, field.time()))
}

/// Largest centre where `|u|` exceeds `rel_threshold·‖u‖_∞`; 0 for the zero field.
pub fn support_radius(field: &Field, rel_threshold: f64) -> f64 {
    let cut = rel_threshold * field.sup_norm();
    if cut == 0.0 {
        return 0.0;
    }
    field
        .values()
        .iter()
        .rposition(|v| v.abs() > cut)
        .map(|i| field.grid().center(i))
        .unwrap_or(0.0)
}

/// Relative threshold defining the support radius in [`check_grid_size`].
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Safety factor on the domain of influence.
pub const GRID_MARGIN: f64 = 1.2;

/// Requires `x_max ≥ (r + L·T)·1.2` with `r` the support radius of `u₀`.
/// With `override_rule` a violation is logged and tolerated.
pub fn check_grid_size(
    u0: &Field,
    speed_bound: f64,
    t_end: f64,
    override_rule: bool,
) -> Result<()> {
    let r = support_radius(u0, SUPPORT_THRESHOLD);
    let need = (r + speed_bound * t_end) * GRID_MARGIN;
    let x_max = u0.grid().x_max();
    if x_max >= need {
        return Ok(());
    }
    let msg = format!(
        "x_max = {x_max} is below (support radius {r:.4} + L·T = {:.4})·{GRID_MARGIN} = {need:.4}",
        speed_bound * t_end
    );
    if override_rule {
        log::warn!("grid-size rule overridden: {msg}");
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{msg}; enlarge grid.x_max or set grid.override = true"
        )))
    }
}
