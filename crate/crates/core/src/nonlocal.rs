//! The nonlocal primitive `P(t, x) = ∫₀ˣ u(y, t) dy` on cell centres.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::quadrature::compensated_sum;

/// Primitive values at the cell centres of the paired field.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
    total: f64,
}

impl Primitive {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `P(x_max) = dx·Σ uᵢ`, the full integral.
    pub fn right_edge(&self) -> f64 {
        self.total
    }
}

/// Writes `P_i = dx·Σ_{j≤i} u_j − (dx/2)·u_i` into `out` and returns the full
/// sum `dx·Σ u_j`. The running sum is compensated.
pub fn cumulative_into(u: &[f64], dx: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for (p, &v) in out.iter_mut().zip(u) {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        *p = dx * ((sum + comp) - 0.5 * v);
    }
    dx * (sum + comp)
}

pub fn cumulative_primitive(u: &Field) -> Primitive {
    let mut values = vec![0.0; u.values().len()];
    let total = cumulative_into(u.values(), u.grid().dx(), &mut values);
    Primitive {
        grid: *u.grid(),
        values,
        time: u.time(),
        total,
    }
}

/// `dx·Σ uᵢ`.
pub fn mean(u: &Field) -> f64 {
    u.grid().dx() * compensated_sum(u.values().iter().copied())
}

/// `max |P_i|` over centres inside `window`.
pub fn sup_local(p: &Primitive, window: (f64, f64)) -> Result<f64> {
    sup_window(p.grid(), p.values(), window)
}

pub(crate) fn sup_window(grid: &Grid, values: &[f64], (lo, hi): (f64, f64)) -> Result<f64> {
    if !(lo >= 0.0 && hi <= grid.x_max() && lo <= hi) {
        return Err(Error::invalid(
            "window",
            format!("[{lo}, {hi}] is not inside [0, {}]", grid.x_max()),
        ));
    }
    let mut found = false;
    let mut m = 0.0_f64;
    for (i, v) in values.iter().enumerate() {
        let x = grid.center(i);
        if x >= lo && x <= hi {
            found = true;
            m = m.max(v.abs());
        }
    }
    if found {
        Ok(m)
    } else {
        Err(Error::invalid(
            "window",
            format!("[{lo}, {hi}] contains no cell centre"),
        ))
    }
}
