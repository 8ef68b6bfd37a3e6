//! Conservative explicit finite differences for the degenerate flux.
//!
//! Fluxes live on cell faces: the face gradient is `(u_R - u_L)/h_i` and the
//! coefficient is evaluated at the face centre. Dirichlet faces use a ghost
//! value `2 g - u` so the face gradient spans half a cell.

mod boundary;
pub mod dump;
mod grid;
mod initial;

pub use boundary::{BoundaryData, BoundaryKind};
pub use grid::{Field, Grid, MonitorReport, Trajectory};
pub use initial::InitialCondition;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::{flux, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEuler,
    /// Heun's method, a convex combination of two Euler steps.
    ExplicitRk2,
}

fn default_cfl() -> f64 {
    0.4
}
fn default_eps_reg() -> f64 {
    1e-8
}
fn default_max_steps() -> usize {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub boundary: BoundaryKind,
    #[serde(default = "default_eps_reg")]
    pub eps_reg: f64,
    /// Store slices only at multiples of this interval (plus the final time).
    #[serde(default)]
    pub output_interval: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt_max: f64, boundary: BoundaryKind) -> Self {
        Self {
            scheme,
            cfl_safety: default_cfl(),
            dt_max,
            boundary,
            eps_reg: default_eps_reg(),
            output_interval: None,
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid(format!("cfl_safety = {} must lie in (0, 1]", self.cfl_safety)));
        }
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return Err(invalid(format!("dt_max = {} must be positive", self.dt_max)));
        }
        if !(self.eps_reg.is_finite() && self.eps_reg > 0.0) {
            return Err(invalid(format!("eps_reg = {} must be positive", self.eps_reg)));
        }
        if let Some(d) = self.output_interval {
            if !(d.is_finite() && d > 0.0) {
                return Err(invalid(format!("output_interval = {d} must be positive")));
            }
        }
        Ok(())
    }
}

const PAR_THRESHOLD: usize = 8192;

/// Neighbour lookup along one axis: `Some(cell)` or a boundary face.
enum Side {
    Cell(usize),
    Face(f64),
}

fn upper_neighbour(grid: &Grid, bc: &BoundaryData, axis: usize, c: usize) -> Side {
    let k = grid.index_along(c, axis);
    let s = grid.strides()[axis];
    let m = grid.counts()[axis];
    if k + 1 < m {
        Side::Cell(c + s)
    } else {
        match bc.kind {
            BoundaryKind::Periodic => Side::Cell(c - (m - 1) * s),
            BoundaryKind::DirichletFromInitial => Side::Face(bc.upper_value(axis, c)),
        }
    }
}

/// Gradient on the upper face of `cell` along `axis`.
#[inline]
fn upper_gradient(grid: &Grid, bc: &BoundaryData, u: &[f64], axis: usize, c: usize) -> f64 {
    let h = grid.h()[axis];
    match upper_neighbour(grid, bc, axis, c) {
        Side::Cell(r) => (u[r] - u[c]) / h,
        Side::Face(g) => 2.0 * (g - u[c]) / h,
    }
}

/// Gradient on the lower Dirichlet face of a cell with index 0 along `axis`.
#[inline]
fn lower_boundary_gradient(grid: &Grid, bc: &BoundaryData, u: &[f64], axis: usize, c: usize) -> f64 {
    2.0 * (u[c] - bc.lower_value(axis, c)) / grid.h()[axis]
}

/// Face gradient of `field` on the upper (`upper = true`) or lower face of
/// `cell` along `axis`, using the boundary rule where the face is on the edge.
pub fn face_gradient(field: &Field, bc: &BoundaryData, axis: usize, cell: usize, upper: bool) -> f64 {
    let g = &field.grid;
    let u = &field.values;
    if upper {
        return upper_gradient(g, bc, u, axis, cell);
    }
    let k = g.index_along(cell, axis);
    if k > 0 {
        upper_gradient(g, bc, u, axis, cell - g.strides()[axis])
    } else {
        match bc.kind {
            BoundaryKind::Periodic => upper_gradient(g, bc, u, axis, cell + (g.counts()[axis] - 1) * g.strides()[axis]),
            BoundaryKind::DirichletFromInitial => lower_boundary_gradient(g, bc, u, axis, cell),
        }
    }
}

#[inline]
fn face_point(grid: &Grid, c: usize, axis: usize, upper: bool, x: &mut [f64]) {
    grid.center_into(c, x);
    let half = 0.5 * grid.h()[axis];
    x[axis] += if upper { half } else { -half };
}

fn coefficient_at(spec: &ProblemSpec, grid: &Grid, c: usize, axis: usize, upper: bool, t: f64, x: &mut [f64]) -> f64 {
    if spec.coefficients.is_constant() {
        spec.coefficient(axis, &[], t)
    } else {
        face_point(grid, c, axis, upper, x);
        spec.coefficient(axis, x, t)
    }
}

fn map_cells<T: Send>(len: usize, n: usize, f: impl Fn(usize, &mut [f64]) -> T + Sync + Send) -> Vec<T> {
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map_init(|| vec![0.0; n], |x, c| f(c, x)).collect()
    } else {
        let mut x = vec![0.0; n];
        (0..len).map(|c| f(c, &mut x)).collect()
    }
}

/// Discrete `sum_i d_i F_i(d_i u)` at every cell.
pub fn divergence_of_flux(field: &Field, spec: &ProblemSpec, bc: &BoundaryData, t: f64) -> Result<Vec<f64>> {
    check_compat(field, spec, bc)?;
    let div = divergence_raw(&field.grid, &field.values, spec, bc, t);
    if let Some(c) = div.iter().position(|d| !d.is_finite()) {
        return Err(Error::NumericalAbort(format!("non-finite divergence at cell {c}, t = {t}")));
    }
    Ok(div)
}

fn divergence_raw(grid: &Grid, u: &[f64], spec: &ProblemSpec, bc: &BoundaryData, t: f64) -> Vec<f64> {
    let n = grid.dim();
    let p = spec.p();
    let upper: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            map_cells(grid.len(), n, |c, x| {
                let g = upper_gradient(grid, bc, u, i, c);
                let a = coefficient_at(spec, grid, c, i, true, t, x);
                flux(g, a, p[i], spec.delta[i])
            })
        })
        .collect();
    map_cells(grid.len(), n, |c, x| {
        let mut d = 0.0;
        for i in 0..n {
            let k = grid.index_along(c, i);
            let lower = if k > 0 {
                upper[i][c - grid.strides()[i]]
            } else {
                match bc.kind {
                    BoundaryKind::Periodic => upper[i][c + (grid.counts()[i] - 1) * grid.strides()[i]],
                    BoundaryKind::DirichletFromInitial => {
                        let g = lower_boundary_gradient(grid, bc, u, i, c);
                        let a = coefficient_at(spec, grid, c, i, false, t, x);
                        flux(g, a, p[i], spec.delta[i])
                    }
                }
            };
            d += (upper[i][c] - lower) / grid.h()[i];
        }
        d
    })
}

/// Effective diffusivity of one face: the linearised coefficient
/// `a (p - 1)(|g| - delta + eps)_+^(p - 2)`, or the secant `F(g)/g` when that
/// is larger (only possible for `p < 2`).
#[inline]
fn face_diffusivity(g: f64, a: f64, p: f64, delta: f64, eps: f64) -> f64 {
    let y = g.abs() - delta;
    // for p < 2 the slope blows up as y -> 0+, so eps caps it instead of shifting it
    let lin = if p < 2.0 {
        (p - 1.0) * (y.max(0.0) + eps).powf(p - 2.0)
    } else if y + eps > 0.0 {
        (p - 1.0) * (y + eps).powf(p - 2.0)
    } else {
        0.0
    };
    let sec = if y > 0.0 { y.powf(p - 1.0) / g.abs() } else { 0.0 };
    a * lin.max(sec)
}

/// `cfl_safety * min_i h_i^2 / (n max_faces D_i)`, clamped by `dt_max`.
/// Dirichlet faces count twice since their gradient spans half a cell.
pub fn stable_dt(field: &Field, spec: &ProblemSpec, bc: &BoundaryData, config: &SchemeConfig, t: f64) -> Result<f64> {
    check_compat(field, spec, bc)?;
    config.validate()?;
    Ok(stable_dt_raw(&field.grid, &field.values, spec, bc, config, t))
}

fn stable_dt_raw(grid: &Grid, u: &[f64], spec: &ProblemSpec, bc: &BoundaryData, config: &SchemeConfig, t: f64) -> f64 {
    let n = grid.dim();
    let p = spec.p();
    let mut dt = config.dt_max;
    for i in 0..n {
        let faces = map_cells(grid.len(), n, |c, x| {
            let g = upper_gradient(grid, bc, u, i, c);
            let a = coefficient_at(spec, grid, c, i, true, t, x);
            let mut d = face_diffusivity(g, a, p[i], spec.delta[i], config.eps_reg);
            let k = grid.index_along(c, i);
            let dirichlet = bc.kind == BoundaryKind::DirichletFromInitial;
            if dirichlet && k + 1 == grid.counts()[i] {
                d *= 2.0;
            }
            if dirichlet && k == 0 {
                let g = lower_boundary_gradient(grid, bc, u, i, c);
                let a = coefficient_at(spec, grid, c, i, false, t, x);
                d = d.max(2.0 * face_diffusivity(g, a, p[i], spec.delta[i], config.eps_reg));
            }
            d
        });
        let dmax = faces.into_iter().fold(0.0, f64::max);
        if dmax > 0.0 {
            let h = grid.h()[i];
            dt = dt.min(config.cfl_safety * h * h / (n as f64 * dmax));
        }
    }
    dt
}

fn check_compat(field: &Field, spec: &ProblemSpec, bc: &BoundaryData) -> Result<()> {
    if field.grid.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "grid dimension {} vs exponent dimension {}",
            field.grid.dim(),
            spec.dim()
        )));
    }
    if field.values.len() != field.grid.len() {
        return Err(Error::DimensionMismatch("field length".into()));
    }
    let _ = bc;
    Ok(())
}

fn euler(grid: &Grid, u: &[f64], spec: &ProblemSpec, bc: &BoundaryData, t: f64, dt: f64) -> Vec<f64> {
    let div = divergence_raw(grid, u, spec, bc, t);
    u.iter().zip(&div).map(|(u, d)| u + dt * d).collect()
}

/// One accepted step of the configured scheme.
pub fn step(field: &Field, spec: &ProblemSpec, bc: &BoundaryData, scheme: Scheme, dt: f64) -> Result<Field> {
    check_compat(field, spec, bc)?;
    let g = &field.grid;
    let t = field.time;
    let values = match scheme {
        Scheme::ExplicitEuler => euler(g, &field.values, spec, bc, t, dt),
        Scheme::ExplicitRk2 => {
            let u1 = euler(g, &field.values, spec, bc, t, dt);
            let u2 = euler(g, &u1, spec, bc, t + dt, dt);
            field.values.iter().zip(&u2).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    };
    if let Some(c) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort(format!("non-finite value at cell {c} after step to t = {}", t + dt)));
    }
    Ok(Field { grid: g.clone(), values, time: t + dt })
}

/// Integrates from `initial.time` to `t_end`.
pub fn advance(
    initial: &Field,
    spec: &ProblemSpec,
    bc: &BoundaryData,
    config: &SchemeConfig,
    t_end: f64,
) -> Result<Trajectory> {
    check_compat(initial, spec, bc)?;
    config.validate()?;
    if bc.kind != config.boundary {
        return Err(invalid("boundary data kind differs from the scheme configuration"));
    }
    let t0 = initial.time;
    if !(t_end.is_finite() && t_end >= t0) {
        return Err(invalid(format!("t_end = {t_end} precedes the initial time {t0}")));
    }
    if let Some(c) = initial.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort(format!("non-finite initial value at cell {c}")));
    }

    let (mut lo, mut hi) = (initial.min(), initial.max());
    if let Some((a, b)) = bc.range(&initial.grid) {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let mut monitor = MonitorReport {
        lower_bound: lo,
        upper_bound: hi,
        tolerance: 1e-9 * (hi - lo),
        violations: 0,
        worst_excess: 0.0,
    };

    let tiny = 1e-12 * (1.0 + t_end.abs());
    let mut times = vec![t0];
    let mut slices = vec![initial.values.clone()];
    let mut dts = Vec::new();
    let mut cur = initial.clone();
    let mut next_out = 1usize;
    while cur.time < t_end - tiny {
        if dts.len() >= config.max_steps {
            return Err(Error::NumericalAbort(format!(
                "step budget of {} exhausted at t = {}",
                config.max_steps, cur.time
            )));
        }
        let target = match config.output_interval {
            Some(d) => (t0 + next_out as f64 * d).min(t_end),
            None => t_end,
        };
        let stable = stable_dt_raw(&cur.grid, &cur.values, spec, bc, config, cur.time);
        let remaining = target - cur.time;
        let lands = stable >= remaining - tiny;
        let dt = if lands { remaining } else { stable };
        if !(dt > 0.0) {
            return Err(Error::NumericalAbort(format!("time step collapsed at t = {}", cur.time)));
        }
        let mut next = step(&cur, spec, bc, config.scheme, dt)?;
        if lands {
            next.time = target;
        }
        let (mn, mx) = (next.min(), next.max());
        let excess = (lo - mn).max(mx - hi);
        if excess > monitor.tolerance {
            monitor.violations += 1;
            monitor.worst_excess = monitor.worst_excess.max(excess);
        }
        dts.push(dt);
        cur = next;
        let store = match config.output_interval {
            None => true,
            Some(_) => lands,
        };
        if store {
            times.push(cur.time);
            slices.push(cur.values.clone());
            if lands {
                next_out += 1;
            }
        }
    }
    Ok(Trajectory { grid: initial.grid.clone(), times, slices, dts, monitor })
}
