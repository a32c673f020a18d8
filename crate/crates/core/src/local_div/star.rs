use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AaBox, Ball, Grid, Region};

/// A region assumed star-shaped with respect to a ball inside it.
#[derive(Debug, Clone)]
pub struct StarRegion {
    pub region: Region,
    pub ball: Ball,
}

#[derive(Debug, Clone, Serialize)]
pub struct StarTest {
    pub segments: usize,
    pub failures: usize,
}

impl StarTest {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl StarRegion {
    pub fn new(region: Region, ball: Ball) -> Result<Self> {
        if ball.center.len() != region.dim() {
            return Err(Error::DimensionMismatch { expected: region.dim(), found: ball.center.len() });
        }
        if !(ball.radius > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {}", ball.radius)));
        }
        Ok(Self { region, ball })
    }

    /// A box with its inscribed ball (radius half the shortest side).
    pub fn from_box(b: &AaBox) -> Result<Self> {
        let radius = 0.5 * b.sides().iter().copied().fold(f64::INFINITY, f64::min);
        Self::new(Region::boxed(b.clone()), Ball::new(b.center(), radius))
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        self.region.bbox().diameter()
    }

    /// `(R/ρ)^{n+1}`.
    pub fn galdi_ratio(&self) -> f64 {
        (self.diameter() / self.ball.radius).powi(self.dim() as i32 + 1)
    }

    /// Every cell of the ball is a cell of the region.
    pub fn check_containment(&self, grid: &Grid) -> Result<()> {
        let region_cells = self.region.cells(grid);
        let ball_cells = Region::ball(self.ball.clone()).cells(grid);
        if ball_cells.is_empty() {
            return Err(Error::RefineGrid(format!("ball of radius {} contains no cell center", self.ball.radius)));
        }
        if let Some(c) = ball_cells.iter().find(|&c| !region_cells.contains(c)) {
            return Err(Error::Containment(format!("ball cell {c} lies outside the region")));
        }
        Ok(())
    }

    /// Segment test: for ball-boundary samples `a`, region samples `z` and
    /// `s ∈ (0,1)`, the point `s a + (1−s) z` must lie in the region.
    pub fn sampled_star_test(&self, region_samples: &[Vec<f64>], ball_samples: usize, s_samples: usize) -> StarTest {
        let shrink = 1.0 - 1e-9;
        let ball_points: Vec<Vec<f64>> = sphere_directions(self.dim(), ball_samples)
            .into_iter()
            .map(|(e, _)| self.ball.center.iter().zip(&e).map(|(c, e)| c + shrink * self.ball.radius * e).collect())
            .collect();
        let mut failures = 0;
        let mut segments = 0;
        let mut point = vec![0.0; self.dim()];
        for a in &ball_points {
            for z in region_samples {
                segments += 1;
                for j in 1..=s_samples {
                    let s = j as f64 / (s_samples + 1) as f64;
                    for k in 0..point.len() {
                        point[k] = s * a[k] + (1.0 - s) * z[k];
                    }
                    if !self.region.contains(&point) {
                        failures += 1;
                        break;
                    }
                }
            }
        }
        StarTest { segments, failures }
    }

    /// Star test against a subsample of the region's cell centers.
    pub fn star_test_on_grid(&self, grid: &Grid, max_region_samples: usize) -> StarTest {
        let cells = self.region.cells(grid);
        let stride = (cells.len() / max_region_samples.max(1)).max(1);
        let samples: Vec<Vec<f64>> = cells.iter().step_by(stride).map(|c| grid.center_vec(c)).collect();
        self.sampled_star_test(&samples, 32, 32)
    }
}

/// Unit directions with quadrature weights summing to the sphere area.
/// Exact equal-angle points on the circle; sign/diagonal directions in
/// higher dimension.
pub fn sphere_directions(n: usize, circle_points: usize) -> Vec<(Vec<f64>, f64)> {
    match n {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let w = std::f64::consts::TAU / circle_points as f64;
            (0..circle_points)
                .map(|k| {
                    let a = std::f64::consts::TAU * (k as f64 + 0.5) / circle_points as f64;
                    (vec![a.cos(), a.sin()], w)
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            let total = 3usize.pow(n as u32);
            for code in 0..total {
                let mut v: Vec<f64> = (0..n).map(|k| ((code / 3usize.pow(k as u32)) % 3) as f64 - 1.0).collect();
                let len = crate::numerics::norm(&v);
                if len == 0.0 {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= len);
                dirs.push(v);
            }
            let w = sphere_area(n) / dirs.len() as f64;
            dirs.into_iter().map(|d| (d, w)).collect()
        }
    }
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * std::f64::consts::TAU / n as f64,
    }
}

/// Area of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn galdi_ratio_of_unit_square() {
        let s = StarRegion::from_box(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])).unwrap();
        assert!((s.galdi_ratio() - (2.0 * 2f64.sqrt()).powi(3)).abs() < 1e-12);
        assert!((s.galdi_ratio() - 22.63).abs() < 0.01);
        let big = StarRegion::from_box(&AaBox::new(vec![0.0, 0.0], vec![7.0, 7.0])).unwrap();
        assert!((big.galdi_ratio() - s.galdi_ratio()).abs() < 1e-9);
    }

    #[test]
    fn rectangle_geometry() {
        let l = 0.25;
        let s = StarRegion::from_box(&AaBox::new(vec![0.0, 0.0], vec![l, 1.5 * l])).unwrap();
        assert_eq!(s.ball.radius, l / 2.0);
        assert!((s.diameter() - l * 13f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn convex_box_is_star_shaped_and_annulus_is_not() {
        let grid = Grid::covering(&AaBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]), 1.0 / 16.0).unwrap();
        let square = StarRegion::from_box(&AaBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])).unwrap();
        assert!(square.star_test_on_grid(&grid, 64).passed());
        let annulus = Region::predicate(AaBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]), |p| {
            let r = crate::numerics::norm(p);
            r > 0.5
        });
        let bad = StarRegion::new(annulus, Ball::new(vec![0.75, 0.0], 0.2)).unwrap();
        assert!(!bad.star_test_on_grid(&grid, 64).passed());
    }

    #[test]
    fn ball_outside_region_is_a_containment_error() {
        let grid = Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), 1.0 / 16.0).unwrap();
        let s = StarRegion::new(Region::boxed(AaBox::new(vec![0.0, 0.0], vec![0.5, 1.0])), Ball::new(vec![0.5, 0.5], 0.3)).unwrap();
        assert!(matches!(s.check_containment(&grid), Err(Error::Containment(_))));
    }

    #[test]
    fn sphere_weights_sum_to_area() {
        for n in 1..=4 {
            let total: f64 = sphere_directions(n, 16).iter().map(|(_, w)| w).sum();
            assert!((total - sphere_area(n)).abs() < 1e-12, "n = {n}");
        }
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
