use std::sync::Arc;

use super::{weighted_lp_norm, Grid, GridFunction};
use crate::error::{Error, Result};

/// Derivative of component `comp` of `u` along `axis` at `idx`: centered where
/// both neighbors are in the mask, one-sided where only one is, zero otherwise.
fn partial(u: &GridFunction, idx: usize, comp: usize, axis: usize) -> f64 {
    let grid = u.grid();
    let mask = u.mask();
    let k = u.components();
    let v = |i: usize| u.values()[i * k + comp];
    let back = grid.neighbor(idx, axis, false).filter(|&i| mask[i]);
    let fwd = grid.neighbor(idx, axis, true).filter(|&i| mask[i]);
    match (back, fwd) {
        (Some(b), Some(f)) => (v(f) - v(b)) / (2.0 * grid.h()),
        (None, Some(f)) => (v(f) - v(idx)) / grid.h(),
        (Some(b), None) => (v(idx) - v(b)) / grid.h(),
        (None, None) => 0.0,
    }
}

fn check_vector_field(u: &GridFunction) -> Result<()> {
    let n = u.grid().dim();
    if u.components() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.components() });
    }
    Ok(())
}

/// Discrete divergence of a vector field on its mask.
pub fn divergence_fd(u: &GridFunction) -> Result<GridFunction> {
    check_vector_field(u)?;
    let n = u.grid().dim();
    let mut out = GridFunction::zeros(u.grid().clone(), u.mask().clone(), 1)?;
    let cells: Vec<usize> = u.masked_cells().collect();
    for idx in cells {
        out.values_mut()[idx] = (0..n).map(|a| partial(u, idx, a, a)).sum();
    }
    Ok(out)
}

/// Index of the lower (or upper) face along `axis` of the cell at `multi`,
/// on the grid extended by one layer along `axis`.
pub fn face_index(grid: &Grid, multi: &[usize], axis: usize, upper: bool) -> usize {
    let shape = grid.shape();
    let mut idx = 0;
    for k in (0..multi.len()).rev() {
        let s = if k == axis { shape[k] + 1 } else { shape[k] };
        let m = if k == axis && upper { multi[k] + 1 } else { multi[k] };
        idx = idx * s + m;
    }
    idx
}

/// Number of faces normal to `axis`.
pub fn face_count(grid: &Grid, axis: usize) -> usize {
    grid.shape().iter().enumerate().map(|(k, &s)| if k == axis { s + 1 } else { s }).product()
}

/// Normal components of a vector field on all grid faces.
#[derive(Debug, Clone)]
pub struct FaceField {
    grid: Arc<Grid>,
    values: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = (0..grid.dim()).map(|k| vec![0.0; face_count(&grid, k)]).collect();
        Self { grid, values }
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.values[axis]
    }

    /// Adds `(face, value)` pairs on one axis.
    pub fn add(&mut self, axis: usize, faces: &[(usize, f64)]) {
        let v = &mut self.values[axis];
        for &(i, x) in faces {
            v[i] += x;
        }
    }

    /// Flux divergence `Σ_k (F_k(x + he_k/2) − F_k(x − he_k/2)) / h` on `mask`.
    pub fn divergence(&self, mask: Arc<Vec<bool>>) -> Result<GridFunction> {
        let grid = self.grid.clone();
        let n = grid.dim();
        let h = grid.h();
        let mut out = GridFunction::zeros(grid.clone(), mask, 1)?;
        let cells: Vec<usize> = out.masked_cells().collect();
        let mut multi = vec![0; n];
        for idx in cells {
            grid.multi_index(idx, &mut multi);
            out.values_mut()[idx] = (0..n)
                .map(|k| (self.values[k][face_index(&grid, &multi, k, true)] - self.values[k][face_index(&grid, &multi, k, false)]) / h)
                .sum();
        }
        Ok(out)
    }
}

/// Discrete Jacobian; component `i * n + j` holds ∂u_i/∂x_j.
pub fn jacobian_fd(u: &GridFunction) -> Result<GridFunction> {
    check_vector_field(u)?;
    let n = u.grid().dim();
    let mut out = GridFunction::zeros(u.grid().clone(), u.mask().clone(), n * n)?;
    let cells: Vec<usize> = u.masked_cells().collect();
    for idx in cells {
        let row = out.value_mut(idx);
        for i in 0..n {
            for j in 0..n {
                row[i * n + j] = partial(u, idx, i, j);
            }
        }
    }
    Ok(out)
}

/// Weighted Lᵖ norm of the Frobenius magnitude of the discrete Jacobian.
pub fn jacobian_lp_norm(u: &GridFunction, weight: Option<&[f64]>, p: f64) -> Result<f64> {
    weighted_lp_norm(&jacobian_fd(u)?, weight, p)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{AaBox, Grid};

    fn field(h: f64, f: impl Fn(&[f64]) -> [f64; 2]) -> GridFunction {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), h).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        let mut u = GridFunction::zeros(grid.clone(), mask, 2).unwrap();
        for idx in 0..grid.len() {
            let v = f(&grid.center_vec(idx));
            u.value_mut(idx).copy_from_slice(&v);
        }
        u
    }

    #[test]
    fn divergence_of_linear_field_is_exact() {
        let u = field(1.0 / 16.0, |x| [2.0 * x[0] - x[1], 3.0 * x[1] + x[0]]);
        let div = divergence_fd(&u).unwrap();
        assert!(div.values().iter().all(|d| (d - 5.0).abs() < 1e-12));
    }

    #[test]
    fn jacobian_of_linear_field() {
        let u = field(1.0 / 8.0, |x| [2.0 * x[0] - x[1], 3.0 * x[1] + x[0]]);
        let jac = jacobian_fd(&u).unwrap();
        for idx in 0..jac.grid().len() {
            let j = jac.value(idx);
            for (a, b) in j.iter().zip([2.0, -1.0, 1.0, 3.0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let expected = 15f64.sqrt();
        assert!((jacobian_lp_norm(&u, None, 2.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn centered_divergence_is_second_order() {
        let err = |h: f64| {
            let u = field(h, |x| [x[0].sin() * x[1], (2.0 * x[1]).cos()]);
            let div = divergence_fd(&u).unwrap();
            let grid = div.grid().clone();
            let mut worst: f64 = 0.0;
            for idx in 0..grid.len() {
                let c = grid.center_vec(idx);
                if c.iter().all(|x| *x > 0.1 && *x < 0.9) {
                    let exact = c[0].cos() * c[1] - 2.0 * (2.0 * c[1]).sin();
                    worst = worst.max((div.values()[idx] - exact).abs());
                }
            }
            worst
        };
        let ratio = err(1.0 / 16.0) / err(1.0 / 32.0);
        assert!(ratio > 3.5, "ratio {ratio}");
    }
}
