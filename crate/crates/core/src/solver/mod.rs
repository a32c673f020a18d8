//! Global right inverse of the divergence: decompose `f` over a tree, solve
//! on every subdomain, sum, and compare the weighted estimate with the
//! constant `2NM₁M₂(N + 2M_Tᵖ)^{1/p}`.

mod report;

pub use report::{grid_stats, tree_stats, Constants, GridStats, Report, TreeStats};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{divergence_fd, jacobian_lp_norm, weighted_lp_norm, FaceField, Grid, GridFunction, LocalField};
use crate::local_div::{BogovskiiSolver, FaceFlux, FluxSolution, StarRegion, MEAN_TOLERANCE};

/// Target flux residual of each local solve, relative to its data.
pub const LOCAL_FLUX_TOLERANCE: f64 = 1e-3;

/// Largest number of defect corrections per local solve.
pub const MAX_CORRECTIONS: usize = 3;
use crate::numerics::Accumulator;
use crate::tree::{c_theory, unweighted_bound, verify_t_bound, TBoundReport, TreeOnGrid};

/// The region and ball used for the local solve on one subdomain.
#[derive(Debug, Clone)]
pub struct LocalSolver {
    pub star: StarRegion,
    /// False when the region failed its sampled star test.
    pub star_shaped: bool,
}

/// Inscribed-ball solvers for trees whose subdomains are boxes.
pub fn box_solvers(tog: &TreeOnGrid) -> Result<Vec<LocalSolver>> {
    tog.tree()
        .nodes()
        .iter()
        .enumerate()
        .map(|(t, node)| match node.omega.boxes() {
            Some([b]) => Ok(LocalSolver { star: StarRegion::from_box(b)?, star_shaped: true }),
            _ => Err(Error::InvalidParameter(format!("node {t} is not a single box; give it a star region"))),
        })
        .collect()
}

/// `(ω̄, ŵ)` and the theoretical `M₁` when the construction provides one.
#[derive(Debug, Clone, Default)]
pub struct Weights {
    pub bar: Option<GridFunction>,
    pub hat: Option<GridFunction>,
    pub m1_theory: Option<f64>,
}

impl Weights {
    pub fn unweighted() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeReport {
    pub node: usize,
    pub parent: Option<usize>,
    pub cells: usize,
    /// `∫ g_t`.
    pub integral: f64,
    /// `‖g_t ŵ‖_p`.
    pub g_norm: f64,
    /// `‖Du_t ŵ‖_p`.
    pub du_norm: f64,
    /// `‖Du_t ŵ‖_p / ‖g_t ŵ‖_p`.
    pub m2: Option<f64>,
    /// `sup ω̄ over supp Du_t / inf_{Ω_t} ω`.
    pub m1: Option<f64>,
    pub star_shaped: bool,
    /// `(R/ρ)^{n+1}` of the local region.
    pub galdi: f64,
    /// Flux residual of the local solve relative to `‖g_t‖₂`.
    pub local_residual: f64,
    pub corrections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub p: f64,
    pub n: usize,
    pub m1: f64,
    pub m1_theory: Option<f64>,
    pub m2: f64,
    pub mt: f64,
    /// `2(pN/(p−1))^{1/p}`, for unit `ŵ`.
    pub mt_theory: Option<f64>,
    pub c_theory: f64,
    /// `‖Du ω̄ŵ‖_p / ‖fŵ‖_p`; absent when `f = 0`.
    pub c_emp: Option<f64>,
    /// `‖div u − f‖₂ / ‖f‖₂` on the mask, `div` taken as face-flux balance.
    pub residual: Option<f64>,
    /// The same with the centered difference of cell values.
    pub residual_centered: Option<f64>,
    pub residual_tolerance: f64,
    pub estimate_passed: bool,
    pub residual_passed: bool,
    /// Nodes whose region failed the star test.
    pub non_star_nodes: Vec<usize>,
    pub per_node: Vec<NodeReport>,
}

impl SolveReport {
    pub fn passed(&self) -> bool {
        self.estimate_passed && self.residual_passed
    }
}

/// `|∫ f| ≤ 10⁻¹⁰ ‖f‖₁` on the mask.
pub fn check_zero_mean(f: &GridFunction) -> Result<()> {
    let mean = f.integral()[0].abs();
    let tol = MEAN_TOLERANCE * f.l1_norm();
    if mean > tol {
        return Err(Error::MeanViolation { mean, tol });
    }
    Ok(())
}

fn values_or_none(w: &Option<GridFunction>) -> Option<&[f64]> {
    w.as_ref().map(|w| w.values())
}

/// Output of [`solve_divergence`].
#[derive(Debug, Clone)]
pub struct Solution {
    /// `u` at cell centers.
    pub u: GridFunction,
    /// Face-flux divergence of `u`.
    pub divergence: GridFunction,
    pub report: SolveReport,
}

/// Solves `div u = f` as `u = Σ_t u_t` with `div u_t = g_t` on `Ω_t`.
/// Local solves run in parallel; `u` is accumulated in node order.
pub fn solve_divergence(
    tog: &TreeOnGrid,
    f: &GridFunction,
    weights: &Weights,
    p: f64,
    locals: &[LocalSolver],
    residual_tolerance: f64,
) -> Result<Solution> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must satisfy 1 < p < ∞, got {p}")));
    }
    let tree = tog.tree();
    if locals.len() != tree.len() {
        return Err(Error::InvalidParameter(format!("{} local solvers for {} nodes", locals.len(), tree.len())));
    }
    check_zero_mean(f)?;
    let grid = tog.grid().clone();
    let mask = tog.mask().clone();
    let n = grid.dim();
    let hat = values_or_none(&weights.hat);
    if let Some(w) = hat {
        if let Some(c) = (0..grid.len()).find(|&c| mask[c] && !(w[c] > 0.0 && w[c].is_finite())) {
            return Err(Error::InvalidWeight { cell: c, value: w[c] });
        }
    }
    let decomposition = tog.decompose(f)?;

    let solutions: Vec<Result<FluxSolution>> = (0..tree.len())
        .into_par_iter()
        .map(|t| {
            let g = &decomposition.parts[t];
            let local = &locals[t];
            if g.values.iter().all(|v| *v == 0.0) {
                let cells = local.star.region.cells(&grid);
                return Ok(FluxSolution {
                    u: LocalField::zeros(cells, n),
                    flux: FaceFlux { faces: vec![Vec::new(); n] },
                    residual: 0.0,
                    steps: 0,
                });
            }
            let solve = || -> Result<FluxSolution> {
                let solver = BogovskiiSolver::new(local.star.clone(), grid.clone())?;
                let cells = solver.cells().clone();
                let mut values = vec![0.0; cells.len()];
                for (i, c) in g.cells.iter().enumerate() {
                    match cells.position(c) {
                        Some(j) => values[j] = g.values[i],
                        None if g.values[i] != 0.0 => {
                            return Err(Error::Containment(format!("g_t is nonzero at cell {c}, outside the local region")))
                        }
                        None => {}
                    }
                }
                solver.solve_flux(&LocalField { cells, components: 1, values }, LOCAL_FLUX_TOLERANCE, MAX_CORRECTIONS)
            };
            solve().map_err(|e| Error::LocalSolve { node: t, source: Box::new(e) })
        })
        .collect();
    let solutions: Vec<FluxSolution> = solutions.into_iter().collect::<Result<_>>()?;

    let mut u = GridFunction::zeros(grid.clone(), mask.clone(), n)?;
    let mut faces = FaceField::zeros(grid.clone());
    for sol in &solutions {
        u.add_local(&sol.u);
        for (k, list) in sol.flux.faces.iter().enumerate() {
            faces.add(k, list);
        }
    }

    let omega = tog.tree_weight();
    let bar = values_or_none(&weights.bar);
    let per_node: Vec<NodeReport> = (0..tree.len())
        .into_par_iter()
        .map(|t| {
            let g = &decomposition.parts[t];
            let g_norm = local_norm(g, &grid, hat, p);
            let (du_norm, support) = local_jacobian_norm(&solutions[t].u, &grid, &mask, hat, p);
            let inf_omega = tog.omega_cells(t).iter().map(|c| omega.value(c)[0]).fold(f64::INFINITY, f64::min);
            let sup_bar = support.iter().map(|&c| bar.map_or(1.0, |w| w[c])).fold(0.0, f64::max);
            NodeReport {
                node: t,
                parent: tree.parent(t),
                cells: tog.omega_cells(t).len(),
                integral: decomposition.integrals[t],
                g_norm,
                du_norm,
                m2: (g_norm > 0.0).then(|| du_norm / g_norm),
                m1: (!support.is_empty()).then(|| sup_bar / inf_omega),
                star_shaped: locals[t].star_shaped,
                galdi: locals[t].star.galdi_ratio(),
                local_residual: solutions[t].residual,
                corrections: solutions[t].steps,
            }
        })
        .collect();

    let overlap = tree.overlap_bound();
    let m1 = per_node.iter().filter_map(|r| r.m1).fold(0.0, f64::max);
    let m2 = per_node.iter().filter_map(|r| r.m2).fold(0.0, f64::max);
    let f_norm = weighted_lp_norm(f, hat, p)?;
    let mt = if f_norm > 0.0 { weighted_lp_norm(&tog.hardy_operator(f)?, hat, p)? / f_norm } else { 0.0 };
    let c_th = c_theory(p, overlap, m1, m2, mt);
    let combined: Option<Vec<f64>> = match (bar, hat) {
        (None, None) => None,
        _ => Some((0..grid.len()).map(|c| if mask[c] { bar.map_or(1.0, |w| w[c]) * hat.map_or(1.0, |w| w[c]) } else { 0.0 }).collect()),
    };
    let c_emp = if f_norm > 0.0 { Some(jacobian_lp_norm(&u, combined.as_deref(), p)? / f_norm) } else { None };

    let divergence = faces.divergence(mask.clone())?;
    let residual = relative_l2(&divergence, f);
    let residual_centered = relative_l2(&divergence_fd(&u)?, f);

    let estimate_passed = c_emp.is_none_or(|c| c <= c_th);
    let residual_passed = residual.is_none_or(|r| r <= residual_tolerance);
    let report = SolveReport {
        p,
        n: overlap,
        m1,
        m1_theory: weights.m1_theory,
        m2,
        mt,
        mt_theory: hat.is_none().then(|| crate::tree::t_operator_bound(p, overlap)),
        c_theory: c_th,
        c_emp,
        residual,
        residual_centered,
        residual_tolerance,
        estimate_passed,
        residual_passed,
        non_star_nodes: locals.iter().enumerate().filter(|(_, l)| !l.star_shaped).map(|(t, _)| t).collect(),
        per_node,
    };
    Ok(Solution { u, divergence, report })
}

/// `‖a − f‖₂ / ‖f‖₂` over the mask of `f`; absent for `f = 0`.
fn relative_l2(a: &GridFunction, f: &GridFunction) -> Option<f64> {
    let mut num = Accumulator::new();
    let mut den = Accumulator::new();
    for c in f.masked_cells() {
        let r = a.value(c)[0] - f.value(c)[0];
        num.add(r * r);
        den.add(f.value(c)[0] * f.value(c)[0]);
    }
    (den.value() > 0.0).then(|| (num.value() / den.value()).sqrt())
}

fn local_norm(g: &LocalField, grid: &Grid, weight: Option<&[f64]>, p: f64) -> f64 {
    let mut acc = Accumulator::new();
    for (i, c) in g.cells.iter().enumerate() {
        let m = g.value(i).iter().map(|v| v * v).sum::<f64>().sqrt() * weight.map_or(1.0, |w| w[c]);
        if m > 0.0 {
            acc.add(m.powf(p));
        }
    }
    (acc.value() * grid.cell_measure()).powf(1.0 / p)
}

/// `‖Du ŵ‖_p` for a field stored on a cell set, with the same stencils as
/// the global difference operators, and the cells where `Du ≠ 0`.
fn local_jacobian_norm(u: &LocalField, grid: &Grid, mask: &[bool], weight: Option<&[f64]>, p: f64) -> (f64, Vec<usize>) {
    let n = grid.dim();
    let h = grid.h();
    let value = |c: usize, k: usize| u.cells.position(c).map_or(0.0, |i| u.value(i)[k]);
    let mut acc = Accumulator::new();
    let mut support = Vec::new();
    for c in u.cells.dilate(grid, 1).iter().filter(|&c| mask[c]) {
        let mut frob = 0.0;
        for axis in 0..n {
            let back = grid.neighbor(c, axis, false).filter(|&i| mask[i]);
            let fwd = grid.neighbor(c, axis, true).filter(|&i| mask[i]);
            for k in 0..n {
                let d = match (back, fwd) {
                    (Some(b), Some(f)) => (value(f, k) - value(b, k)) / (2.0 * h),
                    (None, Some(f)) => (value(f, k) - value(c, k)) / h,
                    (Some(b), None) => (value(c, k) - value(b, k)) / h,
                    (None, None) => 0.0,
                };
                frob += d * d;
            }
        }
        if frob > 0.0 {
            support.push(c);
            acc.add((frob.sqrt() * weight.map_or(1.0, |w| w[c])).powf(p));
        }
    }
    ((acc.value() * grid.cell_measure()).powf(1.0 / p), support)
}

/// Unweighted solve compared with `2M₁M₂N^{1+1/p}(1 + 2^{p+1}p/(p−1))^{1/p}`,
/// valid when the tree weight satisfies `ω ≥ 1/M₁`.
#[derive(Debug, Clone, Serialize)]
pub struct UnweightedReport {
    pub m1: f64,
    pub min_weight: f64,
    /// Nodes whose connector carries `ω < 1/M₁`.
    pub weight_violations: Vec<usize>,
    pub bound: f64,
    pub solve: SolveReport,
    pub passed: bool,
}

pub fn unweighted_divp_check(
    tog: &TreeOnGrid,
    f: &GridFunction,
    locals: &[LocalSolver],
    p: f64,
    m1: f64,
    residual_tolerance: f64,
) -> Result<(GridFunction, UnweightedReport)> {
    let tree = tog.tree();
    let mut min_weight = f64::INFINITY;
    let mut weight_violations = Vec::new();
    for t in 0..tree.len() {
        if t == tree.root() {
            continue;
        }
        let w = tog.connector_measure(t) / tog.subtree_measure(t);
        min_weight = min_weight.min(w);
        if w < 1.0 / m1 {
            weight_violations.push(t);
        }
    }
    let Solution { u, report: solve, .. } = solve_divergence(tog, f, &Weights::unweighted(), p, locals, residual_tolerance)?;
    let bound = unweighted_bound(p, tree.overlap_bound(), m1, solve.m2);
    let passed = weight_violations.is_empty() && solve.c_emp.is_none_or(|c| c <= bound);
    Ok((u, UnweightedReport { m1, min_weight, weight_violations, bound, solve, passed }))
}

/// Largest `‖Tg ŵ‖_p / ‖gŵ‖_p` over random `g`; compared with
/// `2(pN/(p−1))^{1/p}` when `ŵ ≡ 1`.
pub fn operator_t_weighted_check(tog: &TreeOnGrid, hat: Option<&GridFunction>, p: f64, trials: usize, seed: u64) -> Result<TBoundReport> {
    verify_t_bound(tog, p, trials, seed, hat.map(|w| w.values()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{AaBox, Region};
    use crate::random;
    use crate::tree::{DomainTree, TreeNode};

    fn square_tree(h: f64) -> TreeOnGrid {
        let b = AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let grid = Arc::new(Grid::covering(&b, h).unwrap());
        let tree = Arc::new(DomainTree::new(vec![TreeNode::root(Region::boxed(b))], 1).unwrap());
        TreeOnGrid::new(tree, grid.clone(), Arc::new(vec![true; grid.len()])).unwrap()
    }

    #[test]
    fn single_node_reduces_to_one_local_solve() {
        let tog = square_tree(1.0 / 16.0);
        let f = random::smooth_zero_mean(tog.grid(), tog.mask(), &mut random::rng(3), 4, 2);
        let locals = box_solvers(&tog).unwrap();
        let Solution { u, report, .. } = solve_divergence(&tog, &f, &Weights::unweighted(), 2.0, &locals, 1.0).unwrap();
        let b = AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let solver = BogovskiiSolver::new(StarRegion::from_box(&b).unwrap(), tog.grid().clone()).unwrap();
        let direct = solver.solve_flux(&f.restrict(solver.cells()), LOCAL_FLUX_TOLERANCE, MAX_CORRECTIONS).unwrap();
        let direct = direct.u.to_grid_function(tog.grid().clone(), tog.mask().clone()).unwrap();
        assert_eq!(u.values(), direct.values());
        assert_eq!(report.n, 1);
        assert!(report.estimate_passed);
    }

    #[test]
    fn zero_data_has_no_empirical_constant() {
        let tog = square_tree(1.0 / 8.0);
        let f = GridFunction::zeros(tog.grid().clone(), tog.mask().clone(), 1).unwrap();
        let Solution { u, report, .. } = solve_divergence(&tog, &f, &Weights::unweighted(), 2.0, &box_solvers(&tog).unwrap(), 0.1).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
        assert!(report.c_emp.is_none() && report.residual.is_none());
        assert!(report.passed());
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let tog = square_tree(1.0 / 8.0);
        let f = GridFunction::from_fn(tog.grid().clone(), tog.mask().clone(), |_| 1.0).unwrap();
        let r = solve_divergence(&tog, &f, &Weights::unweighted(), 2.0, &box_solvers(&tog).unwrap(), 0.1);
        assert!(matches!(r, Err(Error::MeanViolation { .. })));
    }

    #[test]
    fn local_jacobian_matches_global() {
        let tog = square_tree(1.0 / 16.0);
        let f = random::smooth_zero_mean(tog.grid(), tog.mask(), &mut random::rng(5), 4, 2);
        let Solution { u, report, .. } = solve_divergence(&tog, &f, &Weights::unweighted(), 2.0, &box_solvers(&tog).unwrap(), 1.0).unwrap();
        let global = jacobian_lp_norm(&u, None, 2.0).unwrap();
        assert!((report.per_node[0].du_norm - global).abs() < 1e-12 * global);
    }
}
