use serde::Serialize;

use super::{NodeReport, SolveReport};
use crate::tree::TreeOnGrid;

#[derive(Debug, Clone, Serialize)]
pub struct GridStats {
    pub dim: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
    pub masked_cells: usize,
    /// Domain cells left outside every subdomain.
    pub truncated_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    pub overlap_bound: usize,
    pub min_cover: usize,
    pub max_cover: usize,
    pub cover_valid: bool,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct Constants {
    pub N: usize,
    pub M1: f64,
    pub M1_theory: Option<f64>,
    pub M2: f64,
    pub MT: f64,
    pub MT_theory: Option<f64>,
    pub C_theory: f64,
    pub C_emp: Option<f64>,
}

/// Run report with stable field names; contains no timestamps or paths
/// beyond what the configuration carries.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub grid: GridStats,
    pub tree_stats: TreeStats,
    pub constants: Constants,
    pub residual: Option<f64>,
    pub residual_centered: Option<f64>,
    pub residual_tolerance: f64,
    pub estimate_passed: bool,
    pub residual_passed: bool,
    pub non_star_nodes: Vec<usize>,
    pub per_node: Vec<NodeReport>,
}

impl Report {
    pub fn new(config: serde_json::Value, tog: &TreeOnGrid, truncated_cells: usize, solve: &SolveReport) -> Self {
        Self {
            config,
            grid: grid_stats(tog, truncated_cells),
            tree_stats: tree_stats(tog),
            constants: Constants {
                N: solve.n,
                M1: solve.m1,
                M1_theory: solve.m1_theory,
                M2: solve.m2,
                MT: solve.mt,
                MT_theory: solve.mt_theory,
                C_theory: solve.c_theory,
                C_emp: solve.c_emp,
            },
            residual: solve.residual,
            residual_centered: solve.residual_centered,
            residual_tolerance: solve.residual_tolerance,
            estimate_passed: solve.estimate_passed,
            residual_passed: solve.residual_passed,
            non_star_nodes: solve.non_star_nodes.clone(),
            per_node: solve.per_node.clone(),
        }
    }

    pub fn passed(&self) -> bool {
        self.estimate_passed && self.residual_passed
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn grid_stats(tog: &TreeOnGrid, truncated_cells: usize) -> GridStats {
    let grid = tog.grid();
    GridStats {
        dim: grid.dim(),
        h: grid.h(),
        origin: grid.origin().to_vec(),
        shape: grid.shape().to_vec(),
        masked_cells: tog.masked_cell_count(),
        truncated_cells,
    }
}

pub fn tree_stats(tog: &TreeOnGrid) -> TreeStats {
    let tree = tog.tree();
    let cover = tog.validate();
    TreeStats {
        nodes: tree.len(),
        leaves: (0..tree.len()).filter(|&t| tree.children(t).is_empty()).count(),
        depth: (0..tree.len()).map(|t| tree.depth(t)).max().unwrap_or(0),
        overlap_bound: tree.overlap_bound(),
        min_cover: cover.min_cover,
        max_cover: cover.max_cover,
        cover_valid: cover.passed(),
    }
}
