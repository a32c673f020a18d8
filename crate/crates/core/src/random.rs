//! Seeded random test data on masked grids.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, GridFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cell-wise uniform values in [−1, 1] on the mask.
pub fn uniform(grid: &Arc<Grid>, mask: &Arc<Vec<bool>>, rng: &mut impl Rng) -> GridFunction {
    let values = mask.iter().map(|&m| if m { rng.gen_range(-1.0..=1.0) } else { 0.0 }).collect();
    GridFunction::from_values(grid.clone(), mask.clone(), 1, values).expect("shapes match")
}

/// Cell-wise uniform values in [−1, 1], then mean-subtracted on the mask.
pub fn uniform_zero_mean(grid: &Arc<Grid>, mask: &Arc<Vec<bool>>, rng: &mut impl Rng) -> GridFunction {
    let mut f = uniform(grid, mask, rng);
    f.subtract_mean();
    f
}

/// Sum of `terms` random plane waves with integer frequencies up to
/// `max_frequency` over the grid extent, mean-subtracted on the mask.
pub fn smooth_zero_mean(grid: &Arc<Grid>, mask: &Arc<Vec<bool>>, rng: &mut impl Rng, terms: usize, max_frequency: u32) -> GridFunction {
    let extent = grid.extent();
    let sides = extent.sides();
    let n = grid.dim();
    let waves: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let k: Vec<f64> = (0..n).map(|d| rng.gen_range(0..=max_frequency) as f64 / sides[d]).collect();
            (k, rng.gen_range(0.0..TAU), rng.gen_range(-1.0..=1.0))
        })
        .collect();
    let origin = extent.lo.clone();
    let mut f = GridFunction::from_fn(grid.clone(), mask.clone(), |x| {
        waves
            .iter()
            .map(|(k, phase, amp)| {
                let arg: f64 = k.iter().zip(x).zip(&origin).map(|((k, x), o)| k * (x - o)).sum();
                amp * (TAU * arg + phase).cos()
            })
            .sum()
    })
    .expect("shapes match");
    f.subtract_mean();
    f
}
