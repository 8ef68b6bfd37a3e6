use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on `prod [lower_i, upper_i]`, stored row-major
/// (axis 0 varies slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch("grid bounds and counts differ in length".into()));
        }
        let mut total: usize = 1;
        for i in 0..n {
            if !(lower[i].is_finite() && upper[i].is_finite() && upper[i] > lower[i]) {
                return Err(Error::InvalidParameter(format!("axis {i} has empty extent")));
            }
            if counts[i] == 0 {
                return Err(Error::InvalidParameter(format!("axis {i} has no cells")));
            }
            total = total.checked_mul(counts[i]).ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
        }
        if total > 1 << 28 {
            return Err(Error::InvalidParameter(format!("grid with {total} cells is too large")));
        }
        let h = (0..n).map(|i| (upper[i] - lower[i]) / counts[i] as f64).collect();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        Ok(Self { lower, upper, counts, h, strides })
    }

    /// Grid with given spacings and the lower corner at the origin.
    pub fn from_spacing(counts: Vec<usize>, h: Vec<f64>) -> Result<Self> {
        if counts.len() != h.len() {
            return Err(Error::DimensionMismatch("counts and spacings differ in length".into()));
        }
        let upper = counts.iter().zip(&h).map(|(c, h)| *c as f64 * h).collect();
        Self::new(vec![0.0; counts.len()], upper, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn h(&self) -> &[f64] {
        &self.h
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lower[axis] + (k as f64 + 0.5) * self.h[axis]
    }

    #[inline]
    pub fn index_along(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.counts[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dim()).map(|i| self.index_along(flat, i)).collect()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Writes the centre of cell `flat` into `x`.
    #[inline]
    pub fn center_into(&self, flat: usize, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = self.coord(i, self.index_along(flat, i));
        }
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.center_into(flat, &mut x);
        x
    }

    /// Per-axis index ranges of cells whose centres satisfy `|x_i - c_i| < w_i`.
    /// The flag reports whether the box reaches past the grid.
    pub fn box_ranges(&self, center: &[f64], half_widths: &[f64]) -> (Vec<std::ops::Range<usize>>, bool) {
        let mut ranges = Vec::with_capacity(self.dim());
        let mut exits = false;
        for i in 0..self.dim() {
            let lo = center[i] - half_widths[i];
            let hi = center[i] + half_widths[i];
            exits |= lo < self.lower[i] - 1e-12 * (1.0 + self.lower[i].abs())
                || hi > self.upper[i] + 1e-12 * (1.0 + self.upper[i].abs());
            // first k with coord > lo, first k with coord >= hi
            let a = ((lo - self.lower[i]) / self.h[i] - 0.5).floor();
            let mut k0 = a.max(0.0) as usize;
            while k0 < self.counts[i] && self.coord(i, k0) <= lo {
                k0 += 1;
            }
            let b = ((hi - self.lower[i]) / self.h[i] - 0.5).ceil();
            let mut k1 = (b.max(0.0) as usize).min(self.counts[i]);
            while k1 > k0 && self.coord(i, k1 - 1) >= hi {
                k1 -= 1;
            }
            while k1 < self.counts[i] && self.coord(i, k1) < hi {
                k1 += 1;
            }
            ranges.push(k0..k1.max(k0));
        }
        (ranges, exits)
    }

    /// Flat indices of the cells in a box, in storage order.
    pub fn cells_in_box(&self, center: &[f64], half_widths: &[f64]) -> (Vec<usize>, bool) {
        let (ranges, exits) = self.box_ranges(center, half_widths);
        (self.cells_of_ranges(&ranges), exits)
    }

    pub fn cells_of_ranges(&self, ranges: &[std::ops::Range<usize>]) -> Vec<usize> {
        if ranges.iter().any(|r| r.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(ranges.iter().map(|r| r.len()).product());
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        loop {
            out.push(self.flat(&idx));
            let mut ax = self.dim();
            loop {
                if ax == 0 {
                    return out;
                }
                ax -= 1;
                idx[ax] += 1;
                if idx[ax] < ranges[ax].end {
                    break;
                }
                idx[ax] = ranges[ax].start;
            }
        }
    }
}

/// One time slice of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: &Grid, time: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|c| {
                grid.center_into(c, &mut x);
                f(&x)
            })
            .collect();
        Self { grid: grid.clone(), values, time }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Counters from the discrete maximum-principle monitor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Stored slices of a run together with its step record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<f64>>,
    pub dts: Vec<f64>,
    pub monitor: MonitorReport,
}

impl Trajectory {
    /// A trajectory assembled from given slices (no step record).
    pub fn from_slices(grid: Grid, times: Vec<f64>, slices: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != slices.len() || times.is_empty() {
            return Err(Error::DimensionMismatch("times and slices differ in length".into()));
        }
        if slices.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::DimensionMismatch("slice length differs from grid size".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("slice times must increase strictly".into()));
        }
        Ok(Self { grid, times, slices, dts: Vec::new(), monitor: MonitorReport::default() })
    }

    pub fn from_fn(grid: &Grid, times: &[f64], f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let slices = times.iter().map(|&t| Field::from_fn(grid, t, |x| f(x, t)).values).collect();
        Self::from_slices(grid.clone(), times.to_vec(), slices)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.slices.last().cloned().unwrap_or_default(),
            time: *self.times.last().unwrap_or(&0.0),
        }
    }

    pub fn slice(&self, m: usize) -> Field {
        Field { grid: self.grid.clone(), values: self.slices[m].clone(), time: self.times[m] }
    }

    pub fn t_first(&self) -> f64 {
        self.times[0]
    }
    pub fn t_last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Time cells between consecutive slices: `(centre, width, right slice index)`.
    pub fn time_cells(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (1..self.times.len()).map(move |m| {
            let (a, b) = (self.times[m - 1], self.times[m]);
            (0.5 * (a + b), b - a, m)
        })
    }

    /// Linear interpolation between slices `m - 1` and `m` at the cell centre.
    #[inline]
    pub fn mid_value(&self, m: usize, cell: usize) -> f64 {
        0.5 * (self.slices[m - 1][cell] + self.slices[m][cell])
    }

    pub fn mid_slice(&self, m: usize) -> Vec<f64> {
        self.slices[m - 1].iter().zip(&self.slices[m]).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}
