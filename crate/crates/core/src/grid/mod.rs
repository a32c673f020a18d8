//! Uniform Cartesian grids, regions sampled at cell centers, grid functions,
//! weighted norms and finite-difference operators.

mod fd;
mod field;
mod io;
mod region;

pub use fd::{divergence_fd, face_count, face_index, jacobian_fd, jacobian_lp_norm, FaceField};
pub use field::{weighted_lp_norm, CellSet, GridFunction, LocalField};
pub use io::{read_grid_function_binary, read_grid_function_csv, write_grid_function_binary, write_grid_function_csv};
pub use region::{AaBox, Ball, Region};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `shape[0] × … × shape[n-1]` cubic cells of side `h`.
/// Cells are numbered with axis 0 varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        if origin.is_empty() || origin.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: origin.len().max(1), found: shape.len() });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size must be positive, got {h}")));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidParameter("every grid axis needs at least one cell".into()));
        }
        Ok(Self { origin, h, shape })
    }

    /// Smallest grid with spacing `h` and origin `bbox.lo` whose cells cover `bbox`.
    pub fn covering(bbox: &AaBox, h: f64) -> Result<Self> {
        let shape = bbox.lo.iter().zip(&bbox.hi).map(|(lo, hi)| (((hi - lo) / h) - 1e-9).ceil().max(1.0) as usize).collect();
        Self::new(bbox.lo.clone(), h, shape)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn extent(&self) -> AaBox {
        let hi = self.origin.iter().zip(&self.shape).map(|(o, &s)| o + s as f64 * self.h).collect();
        AaBox::new(self.origin.clone(), hi)
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for (k, &s) in self.shape.iter().enumerate() {
            out[k] = idx % s;
            idx /= s;
        }
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim()).rev() {
            idx = idx * self.shape[k] + multi[k];
        }
        idx
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.shape[..axis].iter().product()
    }

    pub fn center(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in 0..self.dim() {
            let i = rest % self.shape[k];
            rest /= self.shape[k];
            out[k] = self.origin[k] + (i as f64 + 0.5) * self.h;
        }
    }

    pub fn center_vec(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.center(idx, &mut c);
        c
    }

    /// Neighbor of `idx` one step along `axis` in direction `forward`.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let stride = self.stride(axis);
        let i = (idx / stride) % self.shape[axis];
        if forward {
            (i + 1 < self.shape[axis]).then(|| idx + stride)
        } else {
            (i > 0).then(|| idx - stride)
        }
    }

    /// Per-axis index ranges of the cells whose centers can lie in the open box.
    pub fn index_ranges(&self, bbox: &AaBox) -> Option<Vec<(usize, usize)>> {
        let mut ranges = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let lo = (bbox.lo[k] - self.origin[k]) / self.h - 0.5;
            let hi = (bbox.hi[k] - self.origin[k]) / self.h - 0.5;
            let first = (lo.floor() + 1.0).max(0.0);
            let last = (hi.ceil() - 1.0).min(self.shape[k] as f64 - 1.0);
            if last < first {
                return None;
            }
            ranges.push((first as usize, last as usize));
        }
        Some(ranges)
    }

    /// Visits every cell whose center could lie in `bbox`, in increasing index order.
    pub fn for_each_cell_in<F: FnMut(usize, &[f64])>(&self, bbox: &AaBox, mut visit: F) {
        let Some(ranges) = self.index_ranges(bbox) else {
            return;
        };
        let n = self.dim();
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut center = vec![0.0; n];
        loop {
            for k in 0..n {
                center[k] = self.origin[k] + (multi[k] as f64 + 0.5) * self.h;
            }
            visit(self.linear_index(&multi), &center);
            let mut axis = 0;
            loop {
                if axis == n {
                    return;
                }
                if multi[axis] < ranges[axis].1 {
                    multi[axis] += 1;
                    break;
                }
                multi[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }
}

/// Measure of `region` on `grid`: hⁿ times the number of cell centers inside.
pub fn measure(region: &Region, grid: &Grid) -> f64 {
    region.cells(grid).len() as f64 * grid.cell_measure()
}
