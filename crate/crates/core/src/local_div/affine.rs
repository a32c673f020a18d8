use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// `F(x̂) = B x̂ + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    offset: DVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineConditioning {
    pub p: f64,
    pub norm_b: f64,
    pub norm_inverse_transpose: f64,
    /// `‖B‖_p ‖(B⁻¹)′‖_p`.
    pub predicted_inflation: f64,
    /// False when the p-norm was estimated by sampling.
    pub exact: bool,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.ncols() });
        }
        if offset.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: offset.len() });
        }
        let det = matrix.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidMap);
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::InvalidMap)?;
        Ok(Self { matrix, inverse, offset })
    }

    pub fn scaling(n: usize, lambda: f64, offset: Vec<f64>) -> Result<Self> {
        Self::new(DMatrix::identity(n, n) * lambda, DVector::from_vec(offset))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x) + &self.offset).iter().copied().collect()
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        (&self.inverse * (DVector::from_column_slice(x) - &self.offset)).iter().copied().collect()
    }

    pub fn conditioning(&self, p: f64) -> AffineConditioning {
        let (norm_b, exact_b) = matrix_p_norm(&self.matrix, p);
        let (norm_it, exact_it) = matrix_p_norm(&self.inverse.transpose(), p);
        AffineConditioning { p, norm_b, norm_inverse_transpose: norm_it, predicted_inflation: norm_b * norm_it, exact: exact_b && exact_it }
    }
}

/// Operator p-norm `sup ‖Av‖_p/‖v‖_p`: exact for p ∈ {1, 2, ∞}, otherwise the
/// maximum over a fixed set of quasi-random directions (a lower estimate).
pub fn matrix_p_norm(a: &DMatrix<f64>, p: f64) -> (f64, bool) {
    if p == 1.0 {
        let v = (0..a.ncols()).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        return (v, true);
    }
    if p.is_infinite() {
        let v = (0..a.nrows()).map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        return (v, true);
    }
    if p == 2.0 {
        let sv = a.clone().svd(false, false).singular_values;
        return (sv.iter().copied().fold(0.0, f64::max), true);
    }
    let n = a.ncols();
    let pnorm = |v: &DVector<f64>| v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    let mut best: f64 = 0.0;
    let samples = 4096;
    for k in 0..samples {
        // Deterministic quasi-random directions.
        let v = DVector::from_iterator(n, (0..n).map(|i| ((k as f64 + 1.0) * (0.754877666 + 0.569840291 * i as f64)).fract() * 2.0 - 1.0));
        let nv = pnorm(&v);
        if nv > 0.0 {
            best = best.max(pnorm(&(a * &v)) / nv);
        }
    }
    (best, false)
}

/// `u(x) = B v̂(F⁻¹ x)` on the masked cells of the target grid, sampling `v̂`
/// at the nearest source cell; zero where `F⁻¹ x` leaves the source mask.
pub fn affine_transfer(v: &GridFunction, map: &AffineMap, target: Arc<Grid>, mask: Arc<Vec<bool>>) -> Result<GridFunction> {
    let n = map.dim();
    if v.components() != n || v.grid().dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.components() });
    }
    let src = v.grid();
    let mut u = GridFunction::zeros(target.clone(), mask, n)?;
    let mut multi = vec![0usize; n];
    let cells: Vec<usize> = u.masked_cells().collect();
    for c in cells {
        let xh = map.apply_inverse(&target.center_vec(c));
        let mut inside = true;
        for k in 0..n {
            let i = ((xh[k] - src.origin()[k]) / src.h()).floor();
            if i < 0.0 || i >= src.shape()[k] as f64 {
                inside = false;
                break;
            }
            multi[k] = i as usize;
        }
        if !inside {
            continue;
        }
        let s = src.linear_index(&multi);
        if !v.mask()[s] {
            continue;
        }
        let bv = map.matrix() * DVector::from_column_slice(v.value(s));
        u.value_mut(c).copy_from_slice(bv.as_slice());
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AaBox;
    use nalgebra::dmatrix;

    #[test]
    fn diagonal_inflation() {
        let map = AffineMap::new(dmatrix![2.0, 0.0; 0.0, 1.0], DVector::zeros(2)).unwrap();
        assert!((map.conditioning(2.0).predicted_inflation - 2.0).abs() < 1e-12);
        assert!((map.conditioning(f64::INFINITY).predicted_inflation - 2.0).abs() < 1e-12);
        assert!((map.conditioning(1.0).predicted_inflation - 2.0).abs() < 1e-12);
        let sampled = map.conditioning(3.0);
        assert!(!sampled.exact);
        assert!((sampled.predicted_inflation - 2.0).abs() < 1e-3);
    }

    #[test]
    fn singular_map_is_rejected() {
        assert!(matches!(AffineMap::new(dmatrix![1.0, 2.0; 2.0, 4.0], DVector::zeros(2)), Err(Error::InvalidMap)));
    }

    #[test]
    fn identity_transfer_reproduces_field() {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), 0.125).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        let mut v = GridFunction::zeros(grid.clone(), mask.clone(), 2).unwrap();
        for c in 0..grid.len() {
            let x = grid.center_vec(c);
            v.value_mut(c).copy_from_slice(&[x[0] * x[1], x[0] - x[1]]);
        }
        let id = AffineMap::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let u = affine_transfer(&v, &id, grid, mask).unwrap();
        assert_eq!(u.values(), v.values());
    }

    #[test]
    fn round_trip_points() {
        let map = AffineMap::new(dmatrix![1.0, 0.5; -0.25, 2.0], DVector::from_vec(vec![0.3, -1.0])).unwrap();
        let x = [0.7, -0.2];
        let back = map.apply_inverse(&map.apply(&x));
        assert!((back[0] - x[0]).abs() < 1e-15 && (back[1] - x[1]).abs() < 1e-15);
    }
}
