use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{AaBox, Region};

/// A bounded open set with a point cloud sampling its boundary.
#[derive(Debug, Clone)]
pub struct WhitneyDomain {
    region: Region,
    boundary: Vec<f64>,
    spacing: f64,
}

impl WhitneyDomain {
    /// `boundary` holds points on `∂Ω` no farther than `spacing` apart.
    pub fn new(region: Region, boundary: Vec<Vec<f64>>, spacing: f64) -> Result<Self> {
        let n = region.dim();
        if !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("boundary spacing must be positive, got {spacing}")));
        }
        if boundary.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut flat = Vec::with_capacity(boundary.len() * n);
        for p in boundary {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.len() });
            }
            flat.extend(p);
        }
        Ok(Self { region, boundary: flat, spacing })
    }

    /// Simple polygon given by its vertices in order; membership by even-odd rule.
    pub fn polygon(vertices: &[[f64; 2]], spacing: f64) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("a polygon needs at least three vertices".into()));
        }
        let mut lo = vec![f64::INFINITY; 2];
        let mut hi = vec![f64::NEG_INFINITY; 2];
        for v in vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let mut boundary = Vec::new();
        for (i, a) in vertices.iter().enumerate() {
            let b = vertices[(i + 1) % vertices.len()];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let steps = (len / spacing).ceil().max(1.0) as usize;
            for j in 0..steps {
                let s = j as f64 / steps as f64;
                boundary.push(vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        let verts = vertices.to_vec();
        let region = Region::predicate(AaBox::new(lo, hi), move |p| point_in_polygon(&verts, p));
        Self::new(region, boundary, spacing)
    }

    /// `(0,1)² ∖ [1/2,1)²`.
    pub fn l_shape(spacing: f64) -> Result<Self> {
        Self::polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]], spacing)
    }

    pub fn disk(center: [f64; 2], radius: f64, spacing: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("disk radius must be positive, got {radius}")));
        }
        let count = (std::f64::consts::TAU * radius / spacing).ceil() as usize;
        let boundary = (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        let region = Region::ball(crate::grid::Ball::new(center.to_vec(), radius));
        Self::new(region, boundary, spacing)
    }

    /// Boundary cloud from a lattice of step `spacing`: midpoints of lattice
    /// edges with one end inside and one outside.
    pub fn sampled(region: Region, spacing: f64) -> Result<Self> {
        let n = region.dim();
        let bbox = region.bbox().dilated(spacing);
        let counts: Vec<usize> = bbox.sides().iter().map(|s| (s / spacing).ceil() as usize + 1).collect();
        let total: usize = counts.iter().product();
        let point = |mut idx: usize| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let i = idx % counts[k];
                    idx /= counts[k];
                    bbox.lo[k] + i as f64 * spacing
                })
                .collect()
        };
        let boundary: Vec<Vec<f64>> = (0..total)
            .into_par_iter()
            .flat_map_iter(|idx| {
                let p = point(idx);
                let inside = region.contains(&p);
                let mut out = Vec::new();
                let mut stride = 1;
                for k in 0..n {
                    let i = (idx / stride) % counts[k];
                    if i + 1 < counts[k] {
                        let q = point(idx + stride);
                        if region.contains(&q) != inside {
                            out.push(p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect());
                        }
                    }
                    stride *= counts[k];
                }
                out
            })
            .collect();
        Self::new(region, boundary, spacing)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len() / self.dim()
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = &[f64]> {
        self.boundary.chunks(self.dim())
    }

    /// Distance from a closed box to the boundary cloud.
    pub fn distance_to_box(&self, b: &AaBox) -> f64 {
        self.boundary_points().map(|p| b.distance_to_point(p)).fold(f64::INFINITY, f64::min)
    }
}

fn point_in_polygon(vertices: &[[f64; 2]], p: &[f64]) -> bool {
    let mut inside = false;
    let mut j = vertices.len() - 1;
    for i in 0..vertices.len() {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}
