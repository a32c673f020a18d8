//! Domains with an external cusp `{0 < x < a, |y| < φ(x)}`: the sequence
//! `x_i`, the path tree of subdomains `x_{i+2} < x < x_i`, the weight
//! `ϖ = φ(x)/x` and the splitting into star-shaped slabs.

mod profile;

pub use profile::{CuspProfile, ProfileCheck, ProfileKind, PROFILE_SAMPLES};

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AaBox, Ball, Grid, GridFunction, Region};
use crate::local_div::{sphere_directions, StarRegion, StarTest};
use crate::numerics::bisect;
use crate::tree::{DomainTree, TreeNode, TreeOnGrid};

/// Default truncation depth.
pub const DEFAULT_DEPTH: usize = 8;

/// Scan steps per unit interval when bracketing the largest root.
const SCAN_STEPS: usize = 1024;

/// `x₀ = a`, and `x_{i+1}` the largest root of `φ(x) + x − x_i` in `(0, x_i)`,
/// for `i < depth`.
pub fn cusp_sequence(profile: &CuspProfile, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::InvalidParameter("cusp depth must be at least 1".into()));
    }
    let mut xs = vec![profile.a];
    for _ in 0..depth {
        let xi = *xs.last().unwrap();
        let g = |x: f64| profile.eval(x) + x - xi;
        let step = xi / SCAN_STEPS as f64;
        let mut hi = xi;
        let mut bracket = None;
        for k in 1..=SCAN_STEPS {
            let lo = xi - k as f64 * step;
            if g(lo) <= 0.0 {
                bracket = Some((lo, hi));
                break;
            }
            hi = lo;
        }
        let Some((lo, hi)) = bracket else {
            return Err(Error::ProfileViolation(format!("no root of φ(x) + x = {xi} bracketed in (0, {xi})")));
        };
        let root = if g(lo) == 0.0 { lo } else { bisect(g, lo, hi, 60) };
        if !(root > 0.0 && root < xi) {
            return Err(Error::ProfileViolation(format!("sequence stalled at x = {xi}")));
        }
        xs.push(root);
    }
    Ok(xs)
}

fn radial(p: &[f64]) -> f64 {
    p[1..].iter().map(|y| y * y).sum::<f64>().sqrt()
}

/// `{lo < x < hi, |y| < φ(x)}` in `ℝⁿ`.
pub fn slab_region(profile: &CuspProfile, lo: f64, hi: f64, n: usize) -> Region {
    let height = sampled_max_on(profile, lo, hi) * (1.0 + 1e-12);
    let mut blo = vec![-height; n];
    let mut bhi = vec![height; n];
    blo[0] = lo;
    bhi[0] = hi;
    let p = profile.clone();
    Region::predicate(AaBox::new(blo, bhi), move |x| x[0] > lo && x[0] < hi && radial(x) < p.eval(x[0]))
}

fn sampled_max_on(profile: &CuspProfile, lo: f64, hi: f64) -> f64 {
    (0..=PROFILE_SAMPLES).map(|k| profile.eval(lo + (hi - lo) * k as f64 / PROFILE_SAMPLES as f64)).fold(0.0, f64::max)
}

/// The whole cusp domain.
pub fn cusp_domain(profile: &CuspProfile, n: usize) -> Region {
    slab_region(profile, 0.0, profile.a, n)
}

/// Path tree over the cusp subdomains.
#[derive(Debug, Clone)]
pub struct CuspCover {
    pub profile: CuspProfile,
    pub dim: usize,
    /// `x₀ … x_{depth+1}`.
    pub xs: Vec<f64>,
    pub depth: usize,
    pub tree: Arc<DomainTree>,
}

impl CuspCover {
    /// Nodes `0..=depth`: `Ω_i = {x_{i+2} < x < x_i}` and `B_i = {x_{i+1} < x < x_i}`;
    /// the deepest node takes the whole tail `{x < x_depth}`.
    pub fn new(profile: CuspProfile, depth: usize, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("cusp domains need n ≥ 2, got {dim}")));
        }
        profile.validate()?;
        let xs = cusp_sequence(&profile, depth + 1)?;
        let mut nodes = Vec::with_capacity(depth + 1);
        for i in 0..=depth {
            let lo = if i == depth { 0.0 } else { xs[i + 2] };
            let omega = slab_region(&profile, lo, xs[i], dim);
            if i == 0 {
                nodes.push(TreeNode::root(omega));
            } else {
                nodes.push(TreeNode::child(omega, slab_region(&profile, xs[i + 1], xs[i], dim), i - 1));
            }
        }
        let tree = Arc::new(DomainTree::new(nodes, 2)?.with_truncation_depth(depth));
        Ok(Self { profile, dim, xs, depth, tree })
    }

    pub fn domain(&self) -> Region {
        cusp_domain(&self.profile, self.dim)
    }

    /// Grid on the bounding box of the domain, anchored at the origin in `x`.
    pub fn grid(&self, h: f64) -> Result<Grid> {
        Grid::covering(self.domain().bbox(), h)
    }

    /// Discretizes the cover; thin connectors without cells are a refine-grid error.
    pub fn on_grid(&self, grid: Arc<Grid>) -> Result<TreeOnGrid> {
        let cells = self.domain().cells(&grid);
        let mut mask = vec![false; grid.len()];
        for c in cells.iter() {
            mask[c] = true;
        }
        let tog = TreeOnGrid::new(self.tree.clone(), grid.clone(), Arc::new(mask))?;
        if let Some(&t) = tog.validate().empty_connectors.first() {
            return Err(Error::RefineGrid(format!("connector of node {t} has no cell at h = {}", grid.h())));
        }
        Ok(tog)
    }

    /// Sequence identity and comparability bounds, sampled on each `[x_{i+1}, x_i]`.
    pub fn comparability(&self) -> CuspComparability {
        let (k1, k2) = (self.profile.k1, self.profile.k2);
        let mut identity: f64 = 0.0;
        let mut violations = 0;
        for i in 0..self.xs.len() - 1 {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            identity = identity.max((self.profile.eval(x1) + x1 - x0).abs());
            let f1 = self.profile.eval(x1);
            for k in 0..=64 {
                let x = x1 + (x0 - x1) * k as f64 / 64.0;
                let fx = self.profile.eval(x);
                let tol = 1e-12 * x0;
                if x > (k1 + 1.0) * x1 + tol || fx < f1 / k2 - tol || fx > (k1 + 1.0) * f1 + tol {
                    violations += 1;
                }
            }
        }
        CuspComparability { identity_error: identity, violations }
    }

    /// `(ϖ^{1−κ}, ϖ^{−κ})` on the masked cells.
    pub fn varpi_weights(&self, grid: Arc<Grid>, mask: Arc<Vec<bool>>, kappa: f64) -> Result<(GridFunction, GridFunction)> {
        varpi_weight(&self.profile, grid, mask, kappa)
    }

    /// Star region for the local solve on `Ω_i`: the whole subdomain with the
    /// largest ball, among centers on the axis, that passes a sampled star test.
    pub fn local_star(&self, i: usize) -> LocalStar {
        let lo = if i == self.depth { 0.0 } else { self.xs[i + 2] };
        let hi = self.xs[i];
        let region = slab_region(&self.profile, lo, hi, self.dim);
        let samples = region_samples(&region, 24);
        let center_lo = if i == self.depth { self.xs[i + 1] } else { lo };
        let candidates: Vec<LocalStar> = (1..16)
            .into_par_iter()
            .map(|k| {
                let xc = center_lo + (hi - center_lo) * k as f64 / 16.0;
                let mut radius = (xc - lo).min(hi - xc).min(self.profile.eval(xc)) * 0.999;
                let mut center = vec![0.0; self.dim];
                center[0] = xc;
                for _ in 0..40 {
                    let star = StarRegion::new(region.clone(), Ball::new(center.clone(), radius)).expect("positive radius");
                    let test = star.sampled_star_test(&samples, 16, 16);
                    if test.passed() {
                        return LocalStar { star, test, star_shaped: true };
                    }
                    radius *= 0.85;
                }
                let star = StarRegion::new(region.clone(), Ball::new(center, radius / 0.85)).expect("positive radius");
                let test = star.sampled_star_test(&samples, 16, 16);
                LocalStar { star, test, star_shaped: false }
            })
            .collect();
        candidates
            .into_iter()
            .max_by(|a, b| (a.star_shaped, a.star.ball.radius).partial_cmp(&(b.star_shaped, b.star.ball.radius)).expect("finite radii"))
            .expect("at least one candidate")
    }
}

#[derive(Debug, Clone)]
pub struct LocalStar {
    pub star: StarRegion,
    pub test: StarTest,
    pub star_shaped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CuspComparability {
    /// `max_i |φ(x_{i+1}) + x_{i+1} − x_i|`.
    pub identity_error: f64,
    pub violations: usize,
}

/// `(ϖ^{1−κ}, ϖ^{−κ})` with `ϖ = φ(x)/x`.
pub fn varpi_weight(profile: &CuspProfile, grid: Arc<Grid>, mask: Arc<Vec<bool>>, kappa: f64) -> Result<(GridFunction, GridFunction)> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("κ must be ≥ 0, got {kappa}")));
    }
    let bar = GridFunction::from_fn(grid.clone(), mask.clone(), |x| profile.varpi(x[0]).powf(1.0 - kappa))?;
    let hat = GridFunction::from_fn(grid, mask, |x| profile.varpi(x[0]).powf(-kappa))?;
    Ok((bar, hat))
}

/// Lattice points of the region's bounding box (`per_dim` per axis) that lie
/// in the region.
fn region_samples(region: &Region, per_dim: usize) -> Vec<Vec<f64>> {
    let b = region.bbox();
    let n = b.dim();
    let total = per_dim.pow(n as u32);
    (0..total)
        .filter_map(|mut code| {
            let p: Vec<f64> = (0..n)
                .map(|k| {
                    let i = code % per_dim;
                    code /= per_dim;
                    b.lo[k] + (b.hi[k] - b.lo[k]) * (i as f64 + 0.5) / per_dim as f64
                })
                .collect();
            region.contains(&p).then_some(p)
        })
        .collect()
}

/// One slab `U_j = {r_{j−1} < x < r_{j+1}}` of `Ω_i` with its ball.
#[derive(Debug, Clone, Serialize)]
pub struct StarPiece {
    pub j: usize,
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub radius: f64,
    /// Bounding-box diagonal of `U_j`.
    pub diameter: f64,
    /// `(R/ρ)^{n+1}`.
    pub galdi: f64,
    pub ball_inside: bool,
    pub test: StarTest,
}

#[derive(Debug, Clone, Serialize)]
pub struct StarSplit {
    pub node: usize,
    pub m: usize,
    /// `φ(x_{i+1})`.
    pub scale: f64,
    pub spacing: f64,
    /// `φ(x_{i+1})/m ≤ |r_j − r_{j−1}| ≤ φ(x_{i+1})/(8K₁²K₂)`.
    pub spacing_ok: bool,
    pub pieces: Vec<StarPiece>,
}

impl StarSplit {
    pub fn passed(&self) -> bool {
        self.spacing_ok && self.pieces.iter().all(|p| p.ball_inside && p.test.passed())
    }

    pub fn max_ratio(&self) -> f64 {
        self.pieces.iter().map(|p| p.diameter / p.radius).fold(0.0, f64::max)
    }

    pub fn max_galdi(&self) -> f64 {
        self.pieces.iter().map(|p| p.galdi).fold(0.0, f64::max)
    }
}

/// Splits `Ω_i` (`i < depth`) into `m − 1` slabs with balls centered at
/// `(r_j, 0)` of radius `(r_{j+1} − r_{j−1})/2`, and star-tests each one
/// with 32 samples per dimension, per sphere direction and per segment.
pub fn star_split(cover: &CuspCover, i: usize, m: usize) -> Result<StarSplit> {
    let (k1, k2) = (cover.profile.k1.max(1.0), cover.profile.k2.max(1.0));
    if (m as f64) <= 16.0 * k1 * k1 * k2 * k2 {
        return Err(Error::InvalidParameter(format!("m = {m} must exceed 16 K₁² K₂² = {}", 16.0 * k1 * k1 * k2 * k2)));
    }
    if i >= cover.depth {
        return Err(Error::InvalidParameter(format!("node {i} is the truncated tail or beyond (depth {})", cover.depth)));
    }
    let n = cover.dim;
    let (lo, hi) = (cover.xs[i + 2], cover.xs[i]);
    let spacing = (hi - lo) / m as f64;
    let r: Vec<f64> = (0..=m).map(|j| lo + spacing * j as f64).collect();
    let scale = cover.profile.eval(cover.xs[i + 1]);
    let tol = 1e-12 * scale;
    let spacing_ok = spacing >= scale / m as f64 - tol && spacing <= scale / (8.0 * k1 * k1 * k2) + tol;
    let dirs = sphere_directions(n, 32);
    let pieces: Result<Vec<StarPiece>> = (1..m)
        .into_par_iter()
        .map(|j| {
            let region = slab_region(&cover.profile, r[j - 1], r[j + 1], n);
            let radius = 0.5 * (r[j + 1] - r[j - 1]);
            let mut center = vec![0.0; n];
            center[0] = r[j];
            let star = StarRegion::new(region.clone(), Ball::new(center.clone(), radius))?;
            let shrink = 1.0 - 1e-9;
            let ball_inside = dirs.iter().all(|(e, _)| {
                let p: Vec<f64> = center.iter().zip(e).map(|(c, e)| c + shrink * radius * e).collect();
                region.contains(&p)
            });
            let samples = region_samples(&region, 32);
            let test = star.sampled_star_test(&samples, 32, 32);
            Ok(StarPiece {
                j,
                lo: r[j - 1],
                hi: r[j + 1],
                center: r[j],
                radius,
                diameter: star.diameter(),
                galdi: star.galdi_ratio(),
                ball_inside,
                test,
            })
        })
        .collect();
    let split = StarSplit { node: i, m, scale, spacing, spacing_ok, pieces: pieces? };
    if let Some(p) = split.pieces.iter().find(|p| !p.ball_inside || !p.test.passed()) {
        return Err(Error::ProfileViolation(format!(
            "slab {} of node {i} is not star-shaped with respect to its ball ({} of {} segments leave it); check K₁, K₂",
            p.j, p.test.failures, p.test.segments
        )));
    }
    Ok(split)
}

/// Largest `(R/ρ)^{n+1}` over the slabs of nodes `0..depth`.
pub fn max_star_ratio(cover: &CuspCover, m: usize) -> Result<f64> {
    (0..cover.depth).map(|i| star_split(cover, i, m).map(|s| s.max_galdi())).try_fold(0.0f64, |a, r| r.map(|r| a.max(r)))
}

/// `(R/ρ)^{n+1}` with `R` the bounding-box diagonal of `U`, after checking
/// the ball lies in `U` cell by cell.
pub fn galdi_constant_bound(u: &Region, ball: &Ball, grid: &Grid) -> Result<f64> {
    let star = StarRegion::new(u.clone(), ball.clone())?;
    star.check_containment(grid)?;
    Ok(star.galdi_ratio())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> CuspProfile {
        CuspProfile::power(2.0, 1.0).unwrap()
    }

    #[test]
    fn golden_ratio_start() {
        let xs = cusp_sequence(&square(), 2).unwrap();
        assert_eq!(xs[0], 1.0);
        assert!((xs[1] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        let x2 = (-1.0 + (1.0 + 4.0 * xs[1]).sqrt()) / 2.0;
        assert!((xs[2] - x2).abs() < 1e-12);
    }

    #[test]
    fn cover_validates_with_two_overlaps() {
        let cover = CuspCover::new(square(), 3, 2).unwrap();
        let grid = Arc::new(cover.grid(1.0 / 128.0).unwrap());
        let tog = cover.on_grid(grid).unwrap();
        let r = tog.validate();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.max_cover, 2);
        let c = cover.comparability();
        assert_eq!(c.violations, 0);
        assert!(c.identity_error < 1e-10);
    }

    #[test]
    fn coarse_grid_cannot_resolve_deep_connectors() {
        let cover = CuspCover::new(square(), 8, 2).unwrap();
        let grid = Arc::new(cover.grid(1.0 / 16.0).unwrap());
        assert!(matches!(cover.on_grid(grid), Err(Error::RefineGrid(_))));
    }

    #[test]
    fn varpi_with_zero_kappa_is_one() {
        let cover = CuspCover::new(square(), 2, 2).unwrap();
        let grid = Arc::new(cover.grid(1.0 / 32.0).unwrap());
        let mask = Arc::new(cover.domain().cells(&grid).iter().fold(vec![false; grid.len()], |mut m, c| {
            m[c] = true;
            m
        }));
        let (bar, hat) = cover.varpi_weights(grid, mask, 0.0).unwrap();
        assert!(hat.masked_cells().all(|c| hat.value(c)[0] == 1.0));
        assert!(bar.masked_cells().all(|c| bar.value(c)[0] <= 2.0));
    }

    #[test]
    fn star_split_needs_enough_slabs() {
        let cover = CuspCover::new(square(), 4, 2).unwrap();
        assert!(star_split(&cover, 0, 64).is_err());
        let s = star_split(&cover, 1, 65).unwrap();
        assert_eq!(s.pieces.len(), 64);
        assert!(s.passed());
        assert!(s.spacing_ok);
    }

    #[test]
    fn misdeclared_profile_is_rejected() {
        let p = CuspProfile::power(2.0, 1.0).unwrap().with_constants(0.5, 1.0);
        assert!(matches!(CuspCover::new(p, 3, 2), Err(Error::ProfileViolation(_))));
    }

    #[test]
    fn galdi_bound_of_the_unit_square() {
        let u = Region::boxed(AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]));
        let grid = Grid::covering(&AaBox::new(vec![-1.0, -1.0], vec![2.0, 2.0]), 1.0 / 32.0).unwrap();
        let r = galdi_constant_bound(&u, &Ball::new(vec![0.5, 0.5], 0.5), &grid).unwrap();
        assert!((r - 8.0 * 2f64.sqrt().powi(3)).abs() < 1e-12);
        assert!(galdi_constant_bound(&u, &Ball::new(vec![0.9, 0.5], 0.5), &grid).is_err());
    }
}
