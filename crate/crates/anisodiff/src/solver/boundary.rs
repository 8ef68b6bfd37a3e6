use serde::{Deserialize, Serialize};

use super::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Boundary faces keep the values the initial data has there.
    DirichletFromInitial,
    Periodic,
}

/// Boundary face values. For Dirichlet data, `lower[i][c]` is the value on
/// the lower face of cell `c` along axis `i` (meaningful only when `c` touches
/// that face); likewise `upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub kind: BoundaryKind,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn periodic() -> Self {
        Self { kind: BoundaryKind::Periodic, lower: Vec::new(), upper: Vec::new() }
    }

    /// Face values from a pointwise function evaluated at face centres.
    pub fn dirichlet_from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.dim();
        let mut lower = vec![vec![0.0; grid.len()]; n];
        let mut upper = vec![vec![0.0; grid.len()]; n];
        let mut x = vec![0.0; n];
        for c in 0..grid.len() {
            for i in 0..n {
                let k = grid.index_along(c, i);
                if k == 0 {
                    grid.center_into(c, &mut x);
                    x[i] = grid.lower()[i];
                    lower[i][c] = f(&x);
                }
                if k + 1 == grid.counts()[i] {
                    grid.center_into(c, &mut x);
                    x[i] = grid.upper()[i];
                    upper[i][c] = f(&x);
                }
            }
        }
        Self { kind: BoundaryKind::DirichletFromInitial, lower, upper }
    }

    /// Face values extrapolated linearly from the two nearest cells of a field.
    pub fn dirichlet_extrapolated(field: &Field) -> Self {
        let g = &field.grid;
        let n = g.dim();
        let u = &field.values;
        let mut lower = vec![vec![0.0; g.len()]; n];
        let mut upper = vec![vec![0.0; g.len()]; n];
        for c in 0..g.len() {
            for i in 0..n {
                let k = g.index_along(c, i);
                let m = g.counts()[i];
                let s = g.strides()[i];
                if k == 0 {
                    lower[i][c] = if m > 1 { 0.5 * (3.0 * u[c] - u[c + s]) } else { u[c] };
                }
                if k + 1 == m {
                    upper[i][c] = if m > 1 { 0.5 * (3.0 * u[c] - u[c - s]) } else { u[c] };
                }
            }
        }
        Self { kind: BoundaryKind::DirichletFromInitial, lower, upper }
    }

    #[inline]
    pub fn lower_value(&self, axis: usize, cell: usize) -> f64 {
        self.lower[axis][cell]
    }

    #[inline]
    pub fn upper_value(&self, axis: usize, cell: usize) -> f64 {
        self.upper[axis][cell]
    }

    /// Range of all boundary face values on the given grid.
    pub fn range(&self, grid: &Grid) -> Option<(f64, f64)> {
        if self.kind == BoundaryKind::Periodic {
            return None;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in 0..grid.len() {
            for i in 0..grid.dim() {
                let k = grid.index_along(c, i);
                if k == 0 {
                    lo = lo.min(self.lower[i][c]);
                    hi = hi.max(self.lower[i][c]);
                }
                if k + 1 == grid.counts()[i] {
                    lo = lo.min(self.upper[i][c]);
                    hi = hi.max(self.upper[i][c]);
                }
            }
        }
        Some((lo, hi))
    }

    /// Negated data, for symmetry checks.
    pub fn negated(&self) -> Self {
        let neg = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        Self { kind: self.kind, lower: neg(&self.lower), upper: neg(&self.upper) }
    }
}
