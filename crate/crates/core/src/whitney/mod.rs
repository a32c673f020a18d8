//! Whitney decompositions of bounded domains, trees of minimal face chains,
//! shadows and the shadow weight.

mod chain;
mod cubes;
mod domain;

pub use chain::{build_chain_tree, default_root, epsilon_inequality, ExactChecks, WhitneyTree, EXACT_EPSILON, GRID_EPSILON};
pub use cubes::{dyadic_frame, whitney_decompose, WhitneyCube, MIN_CUBE_CELLS};
pub use domain::WhitneyDomain;

use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{Grid, GridFunction};
use crate::tree::TreeOnGrid;

/// Whitney tree sampled on a grid. Masked cells are the domain cells covered
/// by some `Q*_t`; the rest are counted as truncated.
#[derive(Debug, Clone)]
pub struct WhitneyBuild {
    pub domain: WhitneyDomain,
    pub whitney: WhitneyTree,
    pub tog: TreeOnGrid,
    pub truncated_cells: usize,
}

impl WhitneyBuild {
    /// Decomposes, builds the chain tree and sets the overlap bound to the
    /// observed maximum cover.
    pub fn new(domain: WhitneyDomain, grid: Arc<Grid>, max_level: u32) -> Result<Self> {
        let cubes = whitney_decompose(&domain, &grid, max_level)?;
        let whitney = build_chain_tree(cubes, None, GRID_EPSILON)?;
        let inside = domain.region().cells(&grid);
        let mut covered = vec![false; grid.len()];
        for node in whitney.tree.nodes() {
            for c in node.omega.cells(&grid).iter() {
                covered[c] = true;
            }
        }
        let mut mask = vec![false; grid.len()];
        let mut truncated = 0;
        for c in inside.iter() {
            if covered[c] {
                mask[c] = true;
            } else {
                truncated += 1;
            }
        }
        let tog = TreeOnGrid::new(whitney.tree.clone(), grid, Arc::new(mask))?;
        let max_cover = tog.validate().max_cover;
        let tog = tog.with_overlap_bound(max_cover);
        let mut whitney = whitney;
        whitney.tree = tog.tree().clone();
        Ok(Self { domain, whitney, tog, truncated_cells: truncated })
    }

    /// `|S(Q_t)|` by cell counting.
    pub fn shadows(&self) -> Vec<f64> {
        shadows(&self.tog)
    }

    pub fn shadow_weight(&self) -> GridFunction {
        shadow_weight(&self.whitney, &self.tog)
    }

    pub fn geometry(&self) -> Result<WhitneyGeometry> {
        whitney_geometry(self)
    }
}

/// `|S(Q_t)| = |⋃_{s ⪰ t} Q*_s|` for every node.
pub fn shadows(tog: &TreeOnGrid) -> Vec<f64> {
    (0..tog.tree().len()).map(|t| tog.subtree_measure(t)).collect()
}

/// `ω̄ = min_{Q_k ∩ Q_s ≠ ∅} |Q_k| / |S(Q_k)|` on the cells of `Q_s`; cells
/// covered only by expanded cubes take the least value of the cubes whose
/// `Q*` contains them.
pub fn shadow_weight(whitney: &WhitneyTree, tog: &TreeOnGrid) -> GridFunction {
    let grid = tog.grid();
    let dv = grid.cell_measure();
    let m = whitney.len();
    let cube_cells: Vec<_> = whitney.cubes.iter().map(|q| crate::grid::Region::boxed(q.cube()).cells(grid)).collect();
    let ratio: Vec<f64> = (0..m)
        .map(|k| {
            let q = cube_cells[k].iter().filter(|&c| tog.mask()[c]).count() as f64 * dv;
            q / tog.subtree_measure(k)
        })
        .collect();
    let per_cube: Vec<f64> = (0..m).map(|s| whitney.touching[s].iter().map(|&k| ratio[k]).fold(ratio[s], f64::min)).collect();
    let mut values = vec![f64::INFINITY; grid.len()];
    for (s, cells) in cube_cells.iter().enumerate() {
        for c in cells.iter() {
            values[c] = per_cube[s];
        }
    }
    for (c, v) in values.iter_mut().enumerate() {
        if !tog.mask()[c] {
            *v = 0.0;
        } else if v.is_infinite() {
            *v = tog.covering_nodes(c).map(|k| per_cube[k]).fold(f64::INFINITY, f64::min);
        }
    }
    GridFunction::from_values(grid.clone(), tog.mask().clone(), 1, values).expect("shapes match")
}

/// Condition linking `ω̄` to the tree weight: `sup_{Ω_t} ω̄ ≤ M₁ inf_{Ω_t} ω`.
#[derive(Debug, Clone, Serialize)]
pub struct M1Report {
    /// `max_t sup_{Ω_t} ω̄ / inf_{Ω_t} ω`.
    pub worst_ratio: f64,
    pub worst_node: usize,
    pub bound: f64,
    pub passed: bool,
}

/// Worst ratio of `sup ω̄` to `inf ω` over the subdomains, against `bound`.
pub fn verify_m1(tog: &TreeOnGrid, bar_omega: &GridFunction, bound: f64) -> M1Report {
    let omega = tog.tree_weight();
    let (mut worst, mut worst_node) = (0.0, tog.tree().root());
    for t in 0..tog.tree().len() {
        let cells = tog.omega_cells(t);
        let sup = cells.iter().map(|c| bar_omega.value(c)[0]).fold(0.0, f64::max);
        let inf = cells.iter().map(|c| omega.value(c)[0]).fold(f64::INFINITY, f64::min);
        let r = sup / inf;
        if r > worst {
            worst = r;
            worst_node = t;
        }
    }
    M1Report { worst_ratio: worst, worst_node, bound, passed: worst <= bound }
}

/// `2^{11n}`.
pub fn whitney_m1(n: usize) -> f64 {
    2f64.powi(11 * n as i32)
}

/// Geometry of a Whitney build measured against the boundary cloud and the grid.
#[derive(Debug, Clone, Serialize)]
pub struct WhitneyGeometry {
    pub cubes: usize,
    pub min_level: u32,
    pub max_level: u32,
    /// Boundary sample spacing used as tolerance in distance checks.
    pub tolerance: f64,
    pub distance_violations: usize,
    /// Least `dist / diam` and largest `dist / diam` over cubes.
    pub min_distance_ratio: f64,
    pub max_distance_ratio: f64,
    pub max_cover: usize,
    pub cover_bound: usize,
    pub truncated_cells: usize,
    /// Exact checks at `ε = 2⁻⁷`.
    pub exact: ExactChecks,
    /// Grid connectors leaving `Ω_t ∩ Ω_{t_p}`, meeting each other or meeting
    /// a third subdomain, by cell enumeration.
    pub connector_cell_violations: usize,
    pub epsilon_inequality: bool,
}

impl WhitneyGeometry {
    pub fn passed(&self) -> bool {
        self.distance_violations == 0
            && self.max_cover <= self.cover_bound
            && self.exact.passed()
            && self.connector_cell_violations == 0
            && self.epsilon_inequality
    }
}

fn whitney_geometry(build: &WhitneyBuild) -> Result<WhitneyGeometry> {
    let w = &build.whitney;
    let tog = &build.tog;
    let tol = build.domain.spacing();
    let mut violations = 0;
    let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    for q in &w.cubes {
        let d = build.domain.distance_to_box(&q.cube());
        let diam = q.diameter();
        if !(diam <= d + tol && d <= 4.0 * diam + tol) {
            violations += 1;
        }
        lo_ratio = lo_ratio.min(d / diam);
        hi_ratio = hi_ratio.max(d / diam);
    }
    let report = tog.validate();
    let mut connector_cells = report.misplaced_connectors.len() + report.overlapping_connectors.len() + report.empty_connectors.len();
    for t in 0..w.len() {
        let Some(p) = w.parent[t] else { continue };
        let b = tog.connector_cells(t);
        let third = b.iter().any(|c| tog.covering_nodes(c).any(|s| s != t && s != p));
        if third {
            connector_cells += 1;
        }
    }
    let n = w.cubes[0].dim();
    Ok(WhitneyGeometry {
        cubes: w.len(),
        min_level: w.cubes.iter().map(|q| q.level).min().unwrap_or(0),
        max_level: w.cubes.iter().map(|q| q.level).max().unwrap_or(0),
        tolerance: tol,
        distance_violations: violations,
        min_distance_ratio: lo_ratio,
        max_distance_ratio: hi_ratio,
        max_cover: report.max_cover,
        cover_bound: 12usize.pow(n as u32),
        truncated_cells: build.truncated_cells,
        exact: w.exact_checks(7)?,
        connector_cell_violations: connector_cells,
        epsilon_inequality: epsilon_inequality(EXACT_EPSILON),
    })
}
