//! Quadrature over trajectories: truncations, Steklov averages, level-set
//! measures, the energy ledger and the anisotropic embedding check.
//!
//! Space integrals use cell-centre (midpoint) quadrature. Time integrals use
//! the cells between consecutive slices, with `u` interpolated linearly to the
//! cell centre. Suprema in time are maxima over stored slices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{AxisBump, Cutoff};
use crate::error::{invalid, Error, Result};
use crate::flux::{ExponentVector, ProblemSpec};
use crate::geometry::Cylinder;
use crate::quad::{pairwise_sum, pos_pow};
use crate::solver::{Field, Grid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    /// `(u - k)_+`
    Plus,
    /// `(u - k)_- = (k - u)_+`
    Minus,
}

impl Sign {
    #[inline]
    pub fn excess(self, u: f64, k: f64) -> f64 {
        match self {
            Sign::Plus => (u - k).max(0.0),
            Sign::Minus => (k - u).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub level: f64,
    pub sign: Sign,
}

impl Truncation {
    pub fn apply(&self, u: f64) -> f64 {
        self.sign.excess(u, self.level)
    }
    pub fn apply_field(&self, f: &Field) -> Field {
        Field { grid: f.grid.clone(), values: f.values.iter().map(|u| self.apply(*u)).collect(), time: f.time }
    }
}

/// `(u - k)_+` or `(u - k)_-` of every slice.
pub fn truncate(traj: &Trajectory, k: f64, sign: Sign) -> Trajectory {
    let mut out = traj.clone();
    for s in &mut out.slices {
        for v in s.iter_mut() {
            *v = sign.excess(*v, k);
        }
    }
    out
}

/// `[v]_h(t) = (1/h) int_t^(t+h) v ds` for slices with `t + h <= t_last`,
/// zero on the remaining tail. Between slices `v` is linear in time.
pub fn steklov_average(traj: &Trajectory, h: f64) -> Result<Trajectory> {
    let (t0, t1) = (traj.t_first(), traj.t_last());
    if !(h > 0.0 && h < t1 - t0) {
        return Err(invalid(format!("Steklov step {h} must lie in (0, {})", t1 - t0)));
    }
    let tol = 1e-12 * (1.0 + t1.abs());
    let len = traj.grid.len();
    let slices = traj
        .times
        .iter()
        .map(|&t| {
            if t + h > t1 + tol {
                return vec![0.0; len];
            }
            let end = (t + h).min(t1);
            let mut acc = vec![0.0; len];
            for m in 1..traj.times.len() {
                let (a, b) = (traj.times[m - 1], traj.times[m]);
                let lo = a.max(t);
                let hi = b.min(end);
                if hi <= lo {
                    continue;
                }
                // exact integral of the linear interpolant over [lo, hi]
                let wl = (lo - a) / (b - a);
                let wh = (hi - a) / (b - a);
                let wm = 0.5 * (wl + wh);
                for (c, s) in acc.iter_mut().enumerate() {
                    let v = traj.slices[m - 1][c] * (1.0 - wm) + traj.slices[m][c] * wm;
                    *s += (hi - lo) * v;
                }
            }
            acc.iter().map(|s| s / h).collect()
        })
        .collect();
    Ok(Trajectory {
        grid: traj.grid.clone(),
        times: traj.times.clone(),
        slices,
        dts: traj.dts.clone(),
        monitor: traj.monitor.clone(),
    })
}

/// Spatial cells of a cylinder; errors when it leaves the grid or the stored
/// time range.
pub(crate) fn cylinder_cells(traj: &Trajectory, cyl: &Cylinder) -> Result<Vec<usize>> {
    if cyl.dim() != traj.grid.dim() {
        return Err(Error::DimensionMismatch("cylinder and grid dimensions differ".into()));
    }
    let (cells, exits) = traj.grid.cells_in_box(&cyl.center, &cyl.half_widths);
    let tol = 1e-12 * (1.0 + traj.t_last().abs());
    if exits || cyl.t_lo < traj.t_first() - tol || cyl.t_hi > traj.t_last() + tol {
        return Err(Error::DomainMismatch("cylinder leaves the computed space-time region".into()));
    }
    Ok(cells)
}

fn time_cells_in(traj: &Trajectory, cyl: &Cylinder) -> Vec<(f64, f64, usize)> {
    traj.time_cells().filter(|(tc, _, _)| cyl.contains_time(*tc)).collect()
}

/// Quadrature of `|{u > k} cap Q|` (or `u < k`); ties are excluded.
pub fn level_set_measure(traj: &Trajectory, cyl: &Cylinder, k: f64, sign: Sign) -> Result<f64> {
    let cells = cylinder_cells(traj, cyl)?;
    let vol = traj.grid.cell_volume();
    let parts: Vec<f64> = time_cells_in(traj, cyl)
        .into_iter()
        .map(|(_, w, m)| {
            let count = cells.iter().filter(|&&c| sign.excess(traj.mid_value(m, c), k) > 0.0).count();
            w * vol * count as f64
        })
        .collect();
    Ok(pairwise_sum(&parts))
}

/// Quadrature of `int int_Q f(u)` with `f` applied to the interpolated values.
pub fn cylinder_integral(traj: &Trajectory, cyl: &Cylinder, f: impl Fn(f64) -> f64 + Sync) -> Result<f64> {
    let cells = cylinder_cells(traj, cyl)?;
    let vol = traj.grid.cell_volume();
    let parts: Vec<f64> = time_cells_in(traj, cyl)
        .into_par_iter()
        .map(|(_, w, m)| {
            let vals: Vec<f64> = cells.iter().map(|&c| f(traj.mid_value(m, c))).collect();
            w * vol * pairwise_sum(&vals)
        })
        .collect();
    Ok(pairwise_sum(&parts))
}

/// Discrete measure of a cylinder (sum of the quadrature weights).
pub fn cylinder_weight(traj: &Trajectory, cyl: &Cylinder) -> Result<f64> {
    cylinder_integral(traj, cyl, |_| 1.0)
}

/// Maximum of `f(u)` over the stored slices lying in the cylinder.
pub fn cylinder_max(traj: &Trajectory, cyl: &Cylinder, f: impl Fn(f64) -> f64) -> Result<f64> {
    let cells = cylinder_cells(traj, cyl)?;
    let mut best = f64::NEG_INFINITY;
    for (m, &t) in traj.times.iter().enumerate() {
        if cyl.contains_time(t) {
            for &c in &cells {
                best = best.max(f(traj.slices[m][c]));
            }
        }
    }
    Ok(best)
}

/// Both sides of the energy inequality for one level and one cut-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub k: f64,
    pub sign: Sign,
    /// `sup_t int (u - k)_pm^2 zeta`
    pub sup_term: f64,
    /// `sum_i int int (|d_i u| - delta_i)_+^p_i zeta 1[(u - k)_pm > 0]`
    pub gradient_term: f64,
    /// `int int (u - k)_pm^2 |d_t zeta|`
    pub time_term: f64,
    /// `sum_i int int (u - k)_pm^p_i |d_i zeta^(1/p_i)|^p_i`
    pub space_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` when both vanish.
    pub ratio: Option<f64>,
}

fn check_cutoff_fits(cyl: &Cylinder, z: &Cutoff) -> Result<()> {
    if z.dim() != cyl.dim() {
        return Err(Error::DimensionMismatch("cut-off and cylinder dimensions differ".into()));
    }
    let tol = 1e-9;
    for (i, b) in z.bumps.iter().enumerate() {
        if (b.center - cyl.center[i]).abs() + b.outer > cyl.half_widths[i] * (1.0 + tol) + tol {
            return Err(Error::DomainMismatch(format!("cut-off support exceeds the cylinder along axis {i}")));
        }
    }
    let scale = tol * (1.0 + cyl.t_lo.abs() + cyl.t_hi.abs());
    if z.ramp.start < cyl.t_lo - scale || (z.t_top - cyl.t_hi).abs() > scale {
        return Err(Error::DomainMismatch("cut-off time support differs from the cylinder".into()));
    }
    Ok(())
}

/// Mean over the available faces of `(|d_i u| - delta_i)_+^p_i` at a cell.
fn gradient_factor(grid: &Grid, u: &[f64], c: usize, i: usize, p: f64, delta: f64) -> f64 {
    let k = grid.index_along(c, i);
    let s = grid.strides()[i];
    let h = grid.h()[i];
    let mut acc = 0.0;
    let mut cnt = 0;
    if k > 0 {
        acc += pos_pow(((u[c] - u[c - s]) / h).abs() - delta, p);
        cnt += 1;
    }
    if k + 1 < grid.counts()[i] {
        acc += pos_pow(((u[c + s] - u[c]) / h).abs() - delta, p);
        cnt += 1;
    }
    if cnt == 0 {
        0.0
    } else {
        acc / cnt as f64
    }
}

pub fn energy_ledger(
    traj: &Trajectory,
    spec: &ProblemSpec,
    cyl: &Cylinder,
    zeta: &Cutoff,
    k: f64,
    sign: Sign,
) -> Result<EnergyLedger> {
    if spec.dim() != traj.grid.dim() {
        return Err(Error::DimensionMismatch("problem and grid dimensions differ".into()));
    }
    check_cutoff_fits(cyl, zeta)?;
    let cells = cylinder_cells(traj, cyl)?;
    let grid = &traj.grid;
    let n = grid.dim();
    let vol = grid.cell_volume();
    let p = spec.p();
    let centers: Vec<Vec<f64>> = cells.iter().map(|&c| grid.center(c)).collect();

    let mut sup_term: f64 = 0.0;
    for (m, &t) in traj.times.iter().enumerate() {
        if !cyl.contains_time(t) {
            continue;
        }
        let vals: Vec<f64> = cells
            .iter()
            .zip(&centers)
            .map(|(&c, x)| {
                let e = sign.excess(traj.slices[m][c], k);
                if e > 0.0 {
                    e * e * zeta.value(x, t)
                } else {
                    0.0
                }
            })
            .collect();
        sup_term = sup_term.max(vol * pairwise_sum(&vals));
    }

    let parts: Vec<[f64; 3]> = time_cells_in(traj, cyl)
        .into_par_iter()
        .map(|(tc, w, m)| {
            let mid = traj.mid_slice(m);
            let mut grad = Vec::with_capacity(cells.len());
            let mut time = Vec::with_capacity(cells.len());
            let mut space = Vec::with_capacity(cells.len());
            for (&c, x) in cells.iter().zip(&centers) {
                let e = sign.excess(mid[c], k);
                if e <= 0.0 {
                    continue;
                }
                let z = zeta.value(x, tc);
                let mut g = 0.0;
                let mut s = 0.0;
                for i in 0..n {
                    if z > 0.0 {
                        g += gradient_factor(grid, &mid, c, i, p[i], spec.delta[i]) * z;
                    }
                    s += e.powf(p[i]) * zeta.space_factor(i, x, tc);
                }
                grad.push(g);
                space.push(s);
                time.push(e * e * zeta.dt(x, tc).abs());
            }
            let f = w * vol;
            [f * pairwise_sum(&grad), f * pairwise_sum(&time), f * pairwise_sum(&space)]
        })
        .collect();
    let col = |j: usize| pairwise_sum(&parts.iter().map(|r| r[j]).collect::<Vec<_>>());
    let (gradient_term, time_term, space_term) = (col(0), col(1), col(2));
    let lhs = sup_term + gradient_term;
    let rhs = time_term + space_term;
    let ratio = if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs > 0.0 {
        Some(f64::INFINITY)
    } else {
        None
    };
    Ok(EnergyLedger { k, sign, sup_term, gradient_term, time_term, space_term, lhs, rhs, ratio })
}

/// Both forms of the anisotropic embedding for a compactly supported grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TroisiReport {
    pub p_star: f64,
    /// `||v||_{p*}`
    pub norm: f64,
    /// `||d_i v||_{p_i}`
    pub derivative_norms: Vec<f64>,
    /// `prod_i ||d_i v||_{p_i}^(1/n)`
    pub product_rhs: f64,
    /// `||v||_{p*} / prod_i ||d_i v||_{p_i}^(1/n)`
    pub product_ratio: Option<f64>,
    /// `(int |v|^{p*})^(pbar/p*)`
    pub power_lhs: f64,
    /// `sum_i int |d_i v|^p_i`
    pub power_rhs: f64,
    pub power_ratio: Option<f64>,
}

pub fn troisi_check(v: &Field, p: &ExponentVector) -> Result<TroisiReport> {
    let grid = &v.grid;
    let n = grid.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch("exponents and grid dimensions differ".into()));
    }
    let pbar = p.harmonic_mean();
    let p_star = p.sobolev_conjugate()?;
    let u = &v.values;
    let scale = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for c in 0..grid.len() {
        let on_edge = (0..n).any(|i| {
            let k = grid.index_along(c, i);
            k == 0 || k + 1 == grid.counts()[i]
        });
        if on_edge && u[c].abs() > 1e-12 * scale {
            return Err(invalid("function does not vanish on the boundary layer of its box"));
        }
    }
    let vol = grid.cell_volume();
    let lp: Vec<f64> = u.iter().map(|x| x.abs().powf(p_star)).collect();
    let int_star = vol * pairwise_sum(&lp);
    let mut deriv_int = Vec::with_capacity(n);
    for i in 0..n {
        let s = grid.strides()[i];
        let h = grid.h()[i];
        let terms: Vec<f64> = (0..grid.len())
            .map(|c| {
                let k = grid.index_along(c, i);
                let right = if k + 1 < grid.counts()[i] { u[c + s] } else { 0.0 };
                let mut t = ((right - u[c]) / h).abs().powf(p.as_slice()[i]);
                if k == 0 {
                    t += (u[c] / h).abs().powf(p.as_slice()[i]);
                }
                t
            })
            .collect();
        deriv_int.push(vol * pairwise_sum(&terms));
    }
    let derivative_norms: Vec<f64> = deriv_int.iter().zip(p.as_slice()).map(|(d, pi)| d.powf(1.0 / pi)).collect();
    let norm = int_star.powf(1.0 / p_star);
    let product_rhs = derivative_norms.iter().map(|d| d.powf(1.0 / n as f64)).product();
    let power_lhs = int_star.powf(pbar / p_star);
    let power_rhs: f64 = deriv_int.iter().sum();
    let div = |a: f64, b: f64| if b > 0.0 { Some(a / b) } else { None };
    Ok(TroisiReport {
        p_star,
        norm,
        product_ratio: div(norm, product_rhs),
        derivative_norms,
        product_rhs,
        power_ratio: div(power_lhs, power_rhs),
        power_lhs,
        power_rhs,
    })
}

/// `prod_i bump_i(x_i)` sampled at cell centres.
pub fn tensor_bump(grid: &Grid, bumps: &[AxisBump]) -> Result<Field> {
    if bumps.len() != grid.dim() {
        return Err(Error::DimensionMismatch("one bump per axis expected".into()));
    }
    Ok(Field::from_fn(grid, 0.0, |x| bumps.iter().zip(x).map(|(b, x)| b.value(*x)).product()))
}
