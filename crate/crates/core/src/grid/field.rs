use std::sync::Arc;

use super::Grid;
use crate::error::{Error, Result};
use crate::numerics::Accumulator;

/// Sorted, deduplicated set of linear cell indices. Cloning is cheap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellSet {
    cells: Arc<Vec<usize>>,
}

impl CellSet {
    pub fn from_sorted(cells: Vec<usize>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        Self { cells: Arc::new(cells) }
    }

    pub fn from_unsorted(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self::from_sorted(cells)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().copied()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.cells.binary_search(&idx).is_ok()
    }

    /// Position of `idx` within the set.
    pub fn position(&self, idx: usize) -> Option<usize> {
        self.cells.binary_search(&idx).ok()
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let (a, b) = (self.as_slice(), other.as_slice());
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        CellSet::from_sorted(out)
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let (a, b) = (self.as_slice(), other.as_slice());
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        CellSet::from_sorted(out)
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        CellSet::from_sorted(self.iter().filter(|&c| !other.contains(c)).collect())
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.iter().all(|c| other.contains(c))
    }

    /// Cells of the set plus every cell within `rings` axis steps of it.
    pub fn dilate(&self, grid: &Grid, rings: usize) -> CellSet {
        let mut current = self.clone();
        for _ in 0..rings {
            let mut next: Vec<usize> = current.as_slice().to_vec();
            for c in current.iter() {
                for axis in 0..grid.dim() {
                    for forward in [false, true] {
                        if let Some(nb) = grid.neighbor(c, axis, forward) {
                            next.push(nb);
                        }
                    }
                }
            }
            current = CellSet::from_unsorted(next);
        }
        current
    }
}

/// Vector- or scalar-valued function on the cells of a grid, defined on the
/// masked cells and zero elsewhere. Values are stored cell-major.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    mask: Arc<Vec<bool>>,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>, mask: Arc<Vec<bool>>, components: usize) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: mask.len() });
        }
        if components == 0 {
            return Err(Error::InvalidParameter("a grid function needs at least one component".into()));
        }
        let values = vec![0.0; grid.len() * components];
        Ok(Self { grid, mask, components, values })
    }

    pub fn from_values(grid: Arc<Grid>, mask: Arc<Vec<bool>>, components: usize, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(grid, mask, components)?;
        if values.len() != f.values.len() {
            return Err(Error::DimensionMismatch { expected: f.values.len(), found: values.len() });
        }
        f.values = values;
        f.clear_outside_mask();
        Ok(f)
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: Arc<Grid>, mask: Arc<Vec<bool>>, mut f: F) -> Result<Self> {
        let mut out = Self::zeros(grid, mask, 1)?;
        let mut c = vec![0.0; out.grid.dim()];
        for idx in 0..out.grid.len() {
            if out.mask[idx] {
                out.grid.center(idx, &mut c);
                out.values[idx] = f(&c);
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mask(&self) -> &Arc<Vec<bool>> {
        &self.mask
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.components..(idx + 1) * self.components]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.components..(idx + 1) * self.components]
    }

    pub fn masked_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    fn clear_outside_mask(&mut self) {
        let k = self.components;
        for (idx, &m) in self.mask.iter().enumerate() {
            if !m {
                self.values[idx * k..(idx + 1) * k].fill(0.0);
            }
        }
    }

    /// Integral of each component over the mask.
    pub fn integral(&self) -> Vec<f64> {
        let mut acc = vec![Accumulator::new(); self.components];
        for idx in self.masked_cells() {
            for (a, v) in acc.iter_mut().zip(self.value(idx)) {
                a.add(*v);
            }
        }
        let dv = self.grid.cell_measure();
        acc.iter().map(|a| a.value() * dv).collect()
    }

    /// L¹ norm of the pointwise Euclidean magnitude.
    pub fn l1_norm(&self) -> f64 {
        let mut acc = Accumulator::new();
        for idx in self.masked_cells() {
            acc.add(magnitude(self.value(idx)));
        }
        acc.value() * self.grid.cell_measure()
    }

    /// Subtracts the mean of every component over the mask.
    pub fn subtract_mean(&mut self) {
        let count = self.masked_cells().count();
        if count == 0 {
            return;
        }
        let vol = count as f64 * self.grid.cell_measure();
        let means: Vec<f64> = self.integral().iter().map(|i| i / vol).collect();
        let mask = Arc::clone(&self.mask);
        for (idx, &m) in mask.iter().enumerate() {
            if m {
                for (v, mean) in self.value_mut(idx).iter_mut().zip(&means) {
                    *v -= mean;
                }
            }
        }
    }

    pub fn add_local(&mut self, local: &LocalField) {
        assert_eq!(local.components, self.components);
        for (i, idx) in local.cells.iter().enumerate() {
            if self.mask[idx] {
                for (v, w) in self.value_mut(idx).iter_mut().zip(local.value(i)) {
                    *v += w;
                }
            }
        }
    }

    pub fn restrict(&self, cells: &CellSet) -> LocalField {
        let mut values = Vec::with_capacity(cells.len() * self.components);
        for idx in cells.iter() {
            values.extend_from_slice(self.value(idx));
        }
        LocalField { cells: cells.clone(), components: self.components, values }
    }
}

#[inline]
pub(crate) fn magnitude(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Function stored only on a sparse set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalField {
    pub cells: CellSet,
    pub components: usize,
    pub values: Vec<f64>,
}

impl LocalField {
    pub fn zeros(cells: CellSet, components: usize) -> Self {
        let values = vec![0.0; cells.len() * components];
        Self { cells, components, values }
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn integral(&self, cell_measure: f64) -> Vec<f64> {
        let mut acc = vec![Accumulator::new(); self.components];
        for i in 0..self.cells.len() {
            for (a, v) in acc.iter_mut().zip(self.value(i)) {
                a.add(*v);
            }
        }
        acc.iter().map(|a| a.value() * cell_measure).collect()
    }

    pub fn l1_norm(&self, cell_measure: f64) -> f64 {
        let mut acc = Accumulator::new();
        for i in 0..self.cells.len() {
            acc.add(magnitude(self.value(i)));
        }
        acc.value() * cell_measure
    }

    /// Largest cell index carrying a nonzero value outside `support`.
    pub fn leaks_outside(&self, support: &CellSet) -> Option<usize> {
        (0..self.cells.len())
            .find(|&i| !support.contains(self.cells.as_slice()[i]) && self.value(i).iter().any(|v| *v != 0.0))
            .map(|i| self.cells.as_slice()[i])
    }

    pub fn to_grid_function(&self, grid: Arc<Grid>, mask: Arc<Vec<bool>>) -> Result<GridFunction> {
        let mut out = GridFunction::zeros(grid, mask, self.components)?;
        out.add_local(self);
        Ok(out)
    }
}

/// Weighted Lᵖ norm `‖f·ω‖_p = (hⁿ Σ |f(x) ω(x)|ᵖ)^{1/p}` over the mask, with
/// |·| the Euclidean magnitude; `p = ∞` gives the masked maximum. Weights must
/// be strictly positive on the mask.
pub fn weighted_lp_norm(f: &GridFunction, weight: Option<&[f64]>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p must be at least 1, got {p}")));
    }
    if let Some(w) = weight {
        if w.len() != f.grid.len() {
            return Err(Error::DimensionMismatch { expected: f.grid.len(), found: w.len() });
        }
        if let Some(idx) = f.masked_cells().find(|&i| !(w[i] > 0.0 && w[i].is_finite())) {
            return Err(Error::InvalidWeight { cell: idx, value: w[idx] });
        }
    }
    let weight_at = |idx: usize| weight.map_or(1.0, |w| w[idx]);
    if p.is_infinite() {
        return Ok(f.masked_cells().map(|i| magnitude(f.value(i)) * weight_at(i)).fold(0.0, f64::max));
    }
    let mut acc = Accumulator::new();
    for idx in f.masked_cells() {
        let m = magnitude(f.value(idx));
        if m == 0.0 {
            continue;
        }
        acc.add((m * weight_at(idx)).powf(p));
    }
    Ok((acc.value() * f.grid.cell_measure()).powf(1.0 / p))
}
