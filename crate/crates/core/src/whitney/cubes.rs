use rayon::prelude::*;
use serde::Serialize;

use super::WhitneyDomain;
use crate::error::{Error, Result};
use crate::grid::{AaBox, Grid};

/// Smallest admissible cube side, in grid cells.
pub const MIN_CUBE_CELLS: f64 = 16.0;

/// A closed dyadic cube `origin + scale 2^{−level} (index + [0,1]ⁿ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyCube {
    pub level: u32,
    pub index: Vec<i64>,
    pub lo: Vec<f64>,
    pub side: f64,
}

impl WhitneyCube {
    fn new(origin: &[f64], scale: f64, level: u32, index: Vec<i64>) -> Self {
        let side = scale / (1u64 << level) as f64;
        let lo = origin.iter().zip(&index).map(|(o, i)| o + *i as f64 * side).collect();
        Self { level, index, lo, side }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cube(&self) -> AaBox {
        AaBox::cube(&self.lo, self.side)
    }

    /// Same center, side `(1 + ε) l`.
    pub fn expanded(&self, epsilon: f64) -> AaBox {
        self.cube().scaled(1.0 + epsilon)
    }

    pub fn diameter(&self) -> f64 {
        self.side * (self.dim() as f64).sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().map(|x| x + 0.5 * self.side).collect()
    }

    fn children(&self, origin: &[f64], scale: f64) -> Vec<WhitneyCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|code| {
                let index = (0..n).map(|k| 2 * self.index[k] + ((code >> k) & 1) as i64).collect();
                WhitneyCube::new(origin, scale, self.level + 1, index)
            })
            .collect()
    }

    /// Corner and side in units of `2^{−shift}` times the finest side at `max_level`.
    pub(crate) fn integer_box(&self, max_level: u32, shift: u32) -> (Vec<i64>, i64) {
        let s = max_level - self.level + shift;
        (self.index.iter().map(|i| i << s).collect(), 1i64 << s)
    }
}

/// Dyadic frame of the bounding box: anchored at its lower corner, level-0
/// side equal to its longest side.
pub fn dyadic_frame(domain: &WhitneyDomain) -> (Vec<f64>, f64) {
    let bbox = domain.region().bbox();
    (bbox.lo.clone(), bbox.sides().into_iter().fold(0.0, f64::max))
}

/// Cube `Q` is admissible when its center lies in `Ω` and
/// `diam Q ≤ dist(Q, ∂Ω)`; returns the maximal admissible dyadic cubes up to
/// `max_level`, sorted by level and index.
pub fn whitney_decompose(domain: &WhitneyDomain, grid: &Grid, max_level: u32) -> Result<Vec<WhitneyCube>> {
    if grid.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: domain.dim() });
    }
    if max_level > 30 {
        return Err(Error::InvalidParameter(format!("max_level {max_level} exceeds 30")));
    }
    let (origin, scale) = dyadic_frame(domain);
    let finest = scale / (1u64 << max_level) as f64;
    if finest < MIN_CUBE_CELLS * grid.h() * (1.0 - 1e-12) {
        return Err(Error::RefineGrid(format!("cubes of side {finest} at level {max_level} need h ≤ {}", finest / MIN_CUBE_CELLS)));
    }
    let ratio = finest / grid.h();
    let offsets_aligned = origin.iter().zip(grid.origin()).all(|(o, g)| ((o - g) / grid.h()).fract().abs() < 1e-9);
    if (ratio - ratio.round()).abs() > 1e-9 || !offsets_aligned {
        return Err(Error::InvalidParameter(
            "cube faces must fall on grid lines: choose h = side / 2^k and a grid anchored at the domain's corner".into(),
        ));
    }
    if domain.region().cells(grid).is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut kept = Vec::new();
    let mut frontier = vec![WhitneyCube::new(&origin, scale, 0, vec![0; domain.dim()])];
    for level in 0..=max_level {
        let verdicts: Vec<(bool, bool)> = frontier
            .par_iter()
            .map(|q| {
                let inside = domain.region().contains(&q.center());
                let dist = domain.distance_to_box(&q.cube());
                (inside && dist >= q.diameter(), inside || dist <= domain.spacing())
            })
            .collect();
        let mut next = Vec::new();
        for (q, (admissible, meets)) in frontier.into_iter().zip(verdicts) {
            if admissible {
                kept.push(q);
            } else if meets && level < max_level {
                next.extend(q.children(&origin, scale));
            }
        }
        frontier = next;
    }
    if kept.is_empty() {
        return Err(Error::RefineGrid(format!("no Whitney cube down to level {max_level}")));
    }
    kept.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.index.cmp(&b.index)));
    Ok(kept)
}
