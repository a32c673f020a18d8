//! Rooted trees of subdomains, their discretization on a grid, the tree
//! decomposition of integrable functions, the averaging operator `T` and the
//! tree weight.

mod bounds;
mod decompose;
mod hardy;

pub use bounds::{
    c1_constant, c2_constant, c_theory, t_operator_bound, unweighted_bound, verify_decomposition_bound, verify_t_bound,
    DecompositionBoundReport, TBoundReport,
};
pub use decompose::DecompositionResult;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSet, Grid, Region};

/// One subdomain `Ω_t` with its connector `B_t ⊆ Ω_t ∩ Ω_{t_p}`.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub omega: Region,
    pub connector: Option<Region>,
    pub parent: Option<usize>,
}

impl TreeNode {
    pub fn root(omega: Region) -> Self {
        Self { omega, connector: None, parent: None }
    }

    pub fn child(omega: Region, connector: Region, parent: usize) -> Self {
        Self { omega, connector: Some(connector), parent: Some(parent) }
    }
}

/// A rooted tree of subdomains with a declared overlap bound `N`.
#[derive(Debug, Clone)]
pub struct DomainTree {
    nodes: Vec<TreeNode>,
    root: usize,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    overlap: usize,
    truncation_depth: Option<usize>,
}

impl DomainTree {
    pub fn new(nodes: Vec<TreeNode>, overlap: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedTree("tree has no nodes".into()));
        }
        if overlap == 0 {
            return Err(Error::InvalidParameter("overlap bound N must be at least 1".into()));
        }
        let n = nodes.len();
        let roots: Vec<usize> = (0..n).filter(|&t| nodes[t].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::MalformedTree(format!("expected exactly one root, found {}", roots.len())));
        }
        let root = roots[0];
        let dim = nodes[root].omega.dim();
        let mut children = vec![Vec::new(); n];
        for (t, node) in nodes.iter().enumerate() {
            if node.omega.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: node.omega.dim() });
            }
            match (node.parent, &node.connector) {
                (Some(p), Some(b)) => {
                    if p >= n || p == t {
                        return Err(Error::MalformedTree(format!("node {t} has invalid parent {p}")));
                    }
                    if b.dim() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
                    }
                    children[p].push(t);
                }
                (Some(_), None) => return Err(Error::MalformedTree(format!("node {t} has no connector set"))),
                (None, Some(_)) => return Err(Error::MalformedTree("the root must not carry a connector".into())),
                (None, None) => {}
            }
        }
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(t) = stack.pop() {
            for &s in &children[t] {
                depth[s] = depth[t] + 1;
                seen += 1;
                stack.push(s);
            }
        }
        if seen != n {
            return Err(Error::MalformedTree(format!("{} nodes are not reachable from the root (cycle)", n - seen)));
        }
        Ok(Self { nodes, root, children, depth, overlap, truncation_depth: None })
    }

    pub fn with_truncation_depth(mut self, depth: usize) -> Self {
        self.truncation_depth = Some(depth);
        self
    }

    pub fn truncation_depth(&self) -> Option<usize> {
        self.truncation_depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[self.root].omega.dim()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, t: usize) -> &TreeNode {
        &self.nodes[t]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn parent(&self, t: usize) -> Option<usize> {
        self.nodes[t].parent
    }

    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }

    pub fn depth(&self, t: usize) -> usize {
        self.depth[t]
    }

    pub fn overlap_bound(&self) -> usize {
        self.overlap
    }

    pub fn set_overlap_bound(&mut self, overlap: usize) {
        self.overlap = overlap.max(1);
    }

    /// Nodes ordered so that every child precedes its parent.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = self.pre_order();
        order.reverse();
        order
    }

    /// Nodes ordered so that every parent precedes its children.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(t) = stack.pop() {
            order.push(t);
            stack.extend(self.children[t].iter().rev());
        }
        order
    }

    /// `s ⪰ t`: `s` lies in the subtree rooted at `t`.
    pub fn is_descendant(&self, s: usize, t: usize) -> bool {
        let mut k = s;
        loop {
            if k == t {
                return true;
            }
            match self.nodes[k].parent {
                Some(p) => k = p,
                None => return false,
            }
        }
    }
}

/// Cover and connector verdicts of a tree discretized on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub nodes: usize,
    pub overlap_bound: usize,
    pub min_cover: usize,
    pub max_cover: usize,
    pub uncovered_cells: usize,
    pub empty_connectors: Vec<usize>,
    /// Nodes whose connector has a cell outside `Ω_t ∩ Ω_{t_p}`.
    pub misplaced_connectors: Vec<usize>,
    /// Pairs of nodes whose connectors share a cell.
    pub overlapping_connectors: Vec<(usize, usize)>,
    pub locally_finite: bool,
}

impl CoverReport {
    pub fn cover_ok(&self) -> bool {
        self.uncovered_cells == 0 && self.max_cover <= self.overlap_bound
    }

    pub fn connectors_ok(&self) -> bool {
        self.empty_connectors.is_empty() && self.misplaced_connectors.is_empty() && self.overlapping_connectors.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.cover_ok() && self.connectors_ok() && self.locally_finite
    }

    /// The first structural failure as an error; a cover count above `N`
    /// alone is not structural.
    pub fn structural_error(&self, tog: &TreeOnGrid) -> Option<Error> {
        if self.uncovered_cells > 0 {
            let cell = (0..tog.grid.len()).find(|&c| tog.mask[c] && tog.cover_count(c) == 0).unwrap_or(0);
            return Some(Error::CoverGap { cell });
        }
        if let Some(&node) = self.empty_connectors.first() {
            return Some(Error::DegenerateConnector { node });
        }
        if let Some(&t) = self.misplaced_connectors.first() {
            return Some(Error::MalformedTree(format!("connector of node {t} leaves Ω_t ∩ Ω_parent")));
        }
        if let Some(&(s, t)) = self.overlapping_connectors.first() {
            return Some(Error::MalformedTree(format!("connectors of nodes {s} and {t} intersect")));
        }
        None
    }
}

/// A [`DomainTree`] sampled on a grid: cell sets of every `Ω_t` and `B_t`
/// (restricted to the mask), per-cell cover lists, and the cached measures
/// `|B_t|` and `|W_t|`.
#[derive(Debug, Clone)]
pub struct TreeOnGrid {
    tree: Arc<DomainTree>,
    grid: Arc<Grid>,
    mask: Arc<Vec<bool>>,
    omega: Vec<CellSet>,
    connectors: Vec<CellSet>,
    cover_offsets: Vec<u32>,
    cover_nodes: Vec<u32>,
    b_measure: Vec<f64>,
    w_measure: Vec<f64>,
    report: CoverReport,
}

impl TreeOnGrid {
    pub fn new(tree: Arc<DomainTree>, grid: Arc<Grid>, mask: Arc<Vec<bool>>) -> Result<Self> {
        if tree.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: tree.dim() });
        }
        if mask.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: mask.len() });
        }
        let restrict = |region: &Region| {
            let cells = region.cells(&grid);
            CellSet::from_sorted(cells.iter().filter(|&c| mask[c]).collect())
        };
        let omega: Vec<CellSet> = tree.nodes.par_iter().map(|node| restrict(&node.omega)).collect();
        let connectors: Vec<CellSet> =
            tree.nodes.par_iter().map(|node| node.connector.as_ref().map(&restrict).unwrap_or_default()).collect();

        let mut counts = vec![0u32; grid.len() + 1];
        for cells in &omega {
            for c in cells.iter() {
                counts[c + 1] += 1;
            }
        }
        for i in 0..grid.len() {
            counts[i + 1] += counts[i];
        }
        let cover_offsets = counts;
        let mut cursor = cover_offsets.clone();
        let mut cover_nodes = vec![0u32; *cover_offsets.last().unwrap() as usize];
        for (t, cells) in omega.iter().enumerate() {
            for c in cells.iter() {
                cover_nodes[cursor[c] as usize] = t as u32;
                cursor[c] += 1;
            }
        }

        let dv = grid.cell_measure();
        let b_measure = connectors.iter().map(|b| b.len() as f64 * dv).collect();
        let mut tog = Self {
            tree,
            grid,
            mask,
            omega,
            connectors,
            cover_offsets,
            cover_nodes,
            b_measure,
            w_measure: Vec::new(),
            report: CoverReport {
                nodes: 0,
                overlap_bound: 0,
                min_cover: 0,
                max_cover: 0,
                uncovered_cells: 0,
                empty_connectors: Vec::new(),
                misplaced_connectors: Vec::new(),
                overlapping_connectors: Vec::new(),
                locally_finite: true,
            },
        };
        let ones = vec![1.0; tog.grid.len()];
        tog.w_measure = tog.subtree_union_integrals(&ones);
        tog.report = tog.compute_report();
        Ok(tog)
    }

    fn compute_report(&self) -> CoverReport {
        let tree = &self.tree;
        let (mut min_cover, mut max_cover, mut uncovered) = (usize::MAX, 0, 0);
        for c in 0..self.grid.len() {
            if self.mask[c] {
                let k = self.cover_count(c);
                min_cover = min_cover.min(k);
                max_cover = max_cover.max(k);
                if k == 0 {
                    uncovered += 1;
                }
            }
        }
        if min_cover == usize::MAX {
            min_cover = 0;
        }
        let mut empty = Vec::new();
        let mut misplaced = Vec::new();
        let mut overlapping = Vec::new();
        let mut owner = vec![u32::MAX; self.grid.len()];
        for t in 0..tree.len() {
            let Some(p) = tree.parent(t) else { continue };
            let b = &self.connectors[t];
            if b.is_empty() {
                empty.push(t);
            }
            if !b.iter().all(|c| self.omega[t].contains(c) && self.omega[p].contains(c)) {
                misplaced.push(t);
            }
            for c in b.iter() {
                let o = owner[c];
                if o != u32::MAX {
                    let pair = (o as usize, t);
                    if overlapping.last() != Some(&pair) {
                        overlapping.push(pair);
                    }
                } else {
                    owner[c] = t as u32;
                }
            }
        }
        overlapping.sort_unstable();
        overlapping.dedup();
        CoverReport {
            nodes: tree.len(),
            overlap_bound: tree.overlap_bound(),
            min_cover,
            max_cover,
            uncovered_cells: uncovered,
            empty_connectors: empty,
            misplaced_connectors: misplaced,
            overlapping_connectors: overlapping,
            locally_finite: true,
        }
    }

    /// Replaces the declared overlap bound, e.g. by the observed maximum cover.
    pub fn with_overlap_bound(mut self, overlap: usize) -> Self {
        let mut tree = (*self.tree).clone();
        tree.set_overlap_bound(overlap);
        self.tree = Arc::new(tree);
        self.report.overlap_bound = self.tree.overlap_bound();
        self
    }

    /// Cover counts, connector containment and disjointness on this grid.
    pub fn validate(&self) -> &CoverReport {
        &self.report
    }

    pub fn require_structure(&self) -> Result<()> {
        match self.report.structural_error(self) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn tree(&self) -> &Arc<DomainTree> {
        &self.tree
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mask(&self) -> &Arc<Vec<bool>> {
        &self.mask
    }

    pub fn omega_cells(&self, t: usize) -> &CellSet {
        &self.omega[t]
    }

    pub fn connector_cells(&self, t: usize) -> &CellSet {
        &self.connectors[t]
    }

    pub fn connector_measure(&self, t: usize) -> f64 {
        self.b_measure[t]
    }

    pub fn subtree_measure(&self, t: usize) -> f64 {
        self.w_measure[t]
    }

    pub fn cover_count(&self, cell: usize) -> usize {
        (self.cover_offsets[cell + 1] - self.cover_offsets[cell]) as usize
    }

    pub fn covering_nodes(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = (self.cover_offsets[cell] as usize, self.cover_offsets[cell + 1] as usize);
        self.cover_nodes[a..b].iter().map(|&t| t as usize)
    }

    pub fn masked_cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `∫_{W_t} v` for every node, where `W_t` is the union of the subdomains in
    /// the subtree of `t` and `v` is a per-cell density. Each cell contributes
    /// once to every node whose subtree touches it.
    pub fn subtree_union_integrals(&self, values: &[f64]) -> Vec<f64> {
        let n = self.tree.len();
        let mut acc = vec![crate::numerics::Accumulator::new(); n];
        let mut stamp = vec![usize::MAX; n];
        for c in 0..self.grid.len() {
            if !self.mask[c] || values[c] == 0.0 {
                continue;
            }
            for k in self.covering_nodes(c) {
                let mut t = k;
                while stamp[t] != c {
                    stamp[t] = c;
                    acc[t].add(values[c]);
                    match self.tree.parent(t) {
                        Some(p) => t = p,
                        None => break,
                    }
                }
            }
        }
        let dv = self.grid.cell_measure();
        acc.iter().map(|a| a.value() * dv).collect()
    }

    /// Cells of `W_t`.
    pub fn subtree_cells(&self, t: usize) -> CellSet {
        let mut cells = Vec::new();
        let mut stack = vec![t];
        while let Some(s) = stack.pop() {
            cells.extend(self.omega[s].iter());
            stack.extend(self.tree.children(s));
        }
        CellSet::from_unsorted(cells)
    }
}
