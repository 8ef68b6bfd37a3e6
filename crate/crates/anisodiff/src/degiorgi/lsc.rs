use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::ExponentVector;
use crate::geometry::Side;
use crate::solver::Trajectory;

/// Output of [`lsc_regularize`].
#[derive(Debug, Clone, PartialEq)]
pub struct LscResult {
    pub regularized: Trajectory,
    /// `u - u_*` on the lower side, `u^* - u` on the upper side; never negative.
    pub gap: Vec<Vec<f64>>,
    pub summary: LscSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LscSummary {
    /// Radius of the finest backward cylinder that still reaches one neighbour
    /// along every axis and one earlier slice.
    pub finest_rho: f64,
    /// Cells whose finest cylinder leaves the computed region (left unchanged).
    pub flagged: usize,
    /// Cells whose value was replaced.
    pub replaced: usize,
    pub max_gap: f64,
    pub passes: usize,
}

fn finest_rho(traj: &Trajectory, p: &ExponentVector) -> f64 {
    let pbar = p.harmonic_mean();
    let dt_max = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut need = dt_max.powf(1.0 / pbar);
    for (h, pi) in traj.grid.h().iter().zip(p.as_slice()) {
        need = need.max(h.powf(pi / pbar));
    }
    let mut rho = 2f64.powi(need.log2().floor() as i32);
    let reaches = |rho: f64| {
        rho.powf(pbar) > dt_max && traj.grid.h().iter().zip(p.as_slice()).all(|(h, pi)| rho.powf(pbar / pi) > *h)
    };
    while !reaches(rho) {
        rho *= 2.0;
    }
    while reaches(0.5 * rho) {
        rho *= 0.5;
    }
    rho
}

/// Lower (or upper) semicontinuous regularization on the grid.
///
/// Dyadic backward cylinders `(x, t) + Q_rho` shrink until they hold a single
/// neighbour layer in space and one earlier slice. At that scale a cell value
/// exceeding every other sample of its cylinder is an isolated value that an
/// essential infimum does not see; it is replaced by the cylinder minimum.
/// Replacement is repeated until nothing changes, so the result is a fixed
/// point. Solver output obeys the discrete maximum principle and is left as is.
pub fn lsc_regularize(traj: &Trajectory, p: &ExponentVector, side: Side) -> Result<LscResult> {
    let grid = &traj.grid;
    let n = grid.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch("exponents and grid dimensions differ".into()));
    }
    let pbar = p.harmonic_mean();
    let rho = finest_rho(traj, p);
    let depth = rho.powf(pbar);
    let hw: Vec<f64> = p.as_slice().iter().map(|pi| rho.powf(pbar / pi)).collect();
    // neighbours strictly inside the half-width
    let reach: Vec<usize> = hw.iter().zip(grid.h()).map(|(w, h)| ((w / h).ceil() as usize).saturating_sub(1)).collect();

    let sgn = match side {
        Side::Lower => 1.0,
        Side::Upper => -1.0,
    };
    let mut v: Vec<Vec<f64>> = traj.slices.iter().map(|s| s.iter().map(|x| sgn * x).collect()).collect();

    let tol_t = 1e-12 * (1.0 + traj.t_last().abs());
    let windows: Vec<Option<usize>> = traj
        .times
        .iter()
        .map(|&t| {
            if t - depth < traj.t_first() - tol_t {
                return None;
            }
            traj.times.iter().position(|&s| s > t - depth)
        })
        .collect();
    let inside: Vec<bool> = (0..grid.len())
        .map(|c| {
            (0..n).all(|i| {
                let x = grid.coord(i, grid.index_along(c, i));
                x - hw[i] >= grid.lower()[i] - 1e-12 && x + hw[i] <= grid.upper()[i] + 1e-12
            })
        })
        .collect();
    let flagged = (0..traj.len())
        .map(|m| if windows[m].is_none() { grid.len() } else { inside.iter().filter(|b| !**b).count() })
        .sum();

    let mut replaced = 0;
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changes = Vec::new();
        for m in 0..traj.len() {
            let Some(first) = windows[m] else { continue };
            for c in 0..grid.len() {
                if !inside[c] {
                    continue;
                }
                let ranges: Vec<std::ops::Range<usize>> = (0..n)
                    .map(|i| {
                        let k = grid.index_along(c, i);
                        k - reach[i]..k + reach[i] + 1
                    })
                    .collect();
                let cells = grid.cells_of_ranges(&ranges);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (mm, slice) in v.iter().enumerate().take(m + 1).skip(first) {
                    for &cc in &cells {
                        if mm == m && cc == c {
                            continue;
                        }
                        lo = lo.min(slice[cc]);
                        hi = hi.max(slice[cc]);
                    }
                }
                let own = v[m][c];
                if hi.is_finite() && own > hi + 1e-12 * (1.0 + hi.abs()) {
                    changes.push((m, c, lo));
                }
            }
        }
        if changes.is_empty() {
            break;
        }
        replaced += changes.len();
        for (m, c, val) in changes {
            v[m][c] = val;
        }
        if passes > 10_000 {
            return Err(Error::NumericalAbort("regularization did not settle".into()));
        }
    }

    let slices: Vec<Vec<f64>> = v.iter().map(|s| s.iter().map(|x| sgn * x).collect()).collect();
    let gap: Vec<Vec<f64>> = traj
        .slices
        .iter()
        .zip(&slices)
        .map(|(u, r)| u.iter().zip(r).map(|(u, r)| sgn * (u - r) + 0.0).collect())
        .collect();
    let max_gap = gap.iter().flatten().cloned().fold(0.0, f64::max);
    let mut regularized = traj.clone();
    regularized.slices = slices;
    Ok(LscResult { regularized, gap, summary: LscSummary { finest_rho: rho, flagged, replaced, max_gap, passes } })
}
