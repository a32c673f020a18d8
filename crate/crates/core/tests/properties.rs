use std::sync::Arc;

use divtree_core::grid::weighted_lp_norm;
use divtree_core::local_div::{BogovskiiSolver, StarRegion};
use divtree_core::tree::{c1_constant, t_operator_bound, verify_decomposition_bound};
use divtree_core::{AaBox, DomainTree, Grid, GridFunction, LocalField, Region, TreeNode, TreeOnGrid};
use proptest::prelude::*;

const H: f64 = 0.125;

fn interval(lo: f64, hi: f64) -> Region {
    Region::boxed(AaBox::new(vec![lo], vec![hi]))
}

/// Chain of intervals in cell units: node `i + 1` starts inside node `i`
/// and ends past it, and node `i + 2` starts at or after the end of node `i`,
/// so every cell is covered at most twice.
fn chain_strategy() -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((1u32..4, 1u32..6), 1..6).prop_map(|steps| {
        let mut nodes = vec![(0u32, 4u32)];
        for (overlap, extra) in steps {
            let &(lo, hi) = nodes.last().unwrap();
            let floor = if nodes.len() >= 2 { nodes[nodes.len() - 2].1 } else { lo + 1 };
            let start = (hi - overlap.min(hi - lo - 1)).max(floor).max(lo + 1);
            if start >= hi {
                break;
            }
            nodes.push((start, hi + extra));
        }
        nodes
    })
}

fn chain_on_grid(nodes: &[(u32, u32)]) -> TreeOnGrid {
    let x = |k: u32| k as f64 * H;
    let mut tree = vec![TreeNode::root(interval(x(nodes[0].0), x(nodes[0].1)))];
    for i in 1..nodes.len() {
        let (lo, hi) = nodes[i];
        tree.push(TreeNode::child(interval(x(lo), x(hi)), interval(x(lo), x(nodes[i - 1].1)), i - 1));
    }
    let end = nodes.iter().map(|n| n.1).max().unwrap();
    let tree = DomainTree::new(tree, 2).unwrap();
    let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0], vec![x(end)]), H).unwrap());
    let mask = Arc::new(vec![true; grid.len()]);
    TreeOnGrid::new(Arc::new(tree), grid, mask).unwrap()
}

fn field(tog: &TreeOnGrid, raw: &[f64], zero_mean: bool) -> GridFunction {
    let n = tog.grid().len();
    let values = (0..n).map(|i| raw[i % raw.len()]).collect();
    let mut f = GridFunction::from_values(tog.grid().clone(), tog.mask().clone(), 1, values).unwrap();
    if zero_mean {
        f.subtract_mean();
    }
    f
}

fn data() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chains_cover_with_overlap_two(nodes in chain_strategy()) {
        let tog = chain_on_grid(&nodes);
        let cover = tog.validate();
        prop_assert!(cover.passed(), "{cover:?}");
        prop_assert!(cover.max_cover <= 2);
    }

    #[test]
    fn decomposition_sums_to_f_with_zero_means(nodes in chain_strategy(), raw in data()) {
        let tog = chain_on_grid(&nodes);
        let f = field(&tog, &raw, true);
        let d = tog.decompose(&f).unwrap();
        let sum = d.reconstruct(&tog).unwrap();
        let scale = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for c in f.masked_cells() {
            prop_assert!((sum.value(c)[0] - f.value(c)[0]).abs() <= 1e-12 * scale);
        }
        let l1 = f.l1_norm();
        let root = tog.tree().root();
        for (t, g) in d.parts.iter().enumerate() {
            prop_assert!(g.leaks_outside(tog.omega_cells(t)).is_none());
            if t != root {
                prop_assert!(d.integrals[t].abs() <= 1e-10 * l1.max(1e-300));
            }
        }
    }

    #[test]
    fn decomposition_is_linear(nodes in chain_strategy(), a in data(), b in data(), alpha in -3.0f64..3.0) {
        let tog = chain_on_grid(&nodes);
        let (fa, fb) = (field(&tog, &a, true), field(&tog, &b, true));
        let mut combo = fa.clone();
        for (v, w) in combo.values_mut().iter_mut().zip(fb.values()) {
            *v = alpha * *v + w;
        }
        let (da, db, dc) = (tog.decompose(&fa).unwrap(), tog.decompose(&fb).unwrap(), tog.decompose(&combo).unwrap());
        let scale = combo.values().iter().chain(fa.values()).fold(1.0f64, |m, v| m.max(v.abs()));
        for t in 0..dc.parts.len() {
            for i in 0..dc.parts[t].values.len() {
                let expect = alpha * da.parts[t].values[i] + db.parts[t].values[i];
                prop_assert!((dc.parts[t].values[i] - expect).abs() <= 1e-11 * scale);
            }
        }
    }

    #[test]
    fn decomposition_bound_holds(nodes in chain_strategy(), raw in data(), p in 1.1f64..4.0) {
        let tog = chain_on_grid(&nodes);
        let f = field(&tog, &raw, true);
        let r = verify_decomposition_bound(&tog, &f, None, p, None).unwrap();
        prop_assert!(r.passed, "ratio {} against {}", r.ratio, r.constant);
        prop_assert!((r.constant - c1_constant(p, 2)).abs() < 1e-12 * r.constant);
    }

    #[test]
    fn hardy_operator_is_bounded_and_positive(nodes in chain_strategy(), raw in data(), p in 1.1f64..4.0) {
        let tog = chain_on_grid(&nodes);
        let f = field(&tog, &raw, false);
        let tf = tog.hardy_operator(&f).unwrap();
        prop_assert!(tf.values().iter().all(|v| *v >= 0.0));
        let ratio = weighted_lp_norm(&tf, None, p).unwrap() / weighted_lp_norm(&f, None, p).unwrap().max(1e-300);
        prop_assert!(ratio <= t_operator_bound(p, 2) * (1.0 + 1e-12));
    }

    #[test]
    fn tree_weight_lies_in_unit_interval(nodes in chain_strategy()) {
        let tog = chain_on_grid(&nodes);
        let w = tog.tree_weight();
        prop_assert!(w.values().iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-12));
    }
}

fn square_solver(cells: usize, shift: f64) -> BogovskiiSolver {
    let b = AaBox::new(vec![shift, 0.0], vec![shift + 1.0, 1.0]);
    let grid = Arc::new(Grid::covering(&b, 1.0 / cells as f64).unwrap());
    BogovskiiSolver::new(StarRegion::from_box(&b).unwrap(), grid).unwrap()
}

fn local(solver: &BogovskiiSolver, raw: &[f64]) -> LocalField {
    let cells = solver.cells().clone();
    let n = cells.len();
    let mut values: Vec<f64> = (0..n).map(|i| raw[i % raw.len()] + i as f64 / n as f64).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    LocalField { cells, values, components: 1 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bogovskii_is_linear_and_supported(a in data(), b in data(), alpha in -2.0f64..2.0, shift in 0u32..4) {
        let solver = square_solver(8, shift as f64 * 0.25);
        let (fa, fb) = (local(&solver, &a), local(&solver, &b));
        let mut fc = fa.clone();
        for (v, w) in fc.values.iter_mut().zip(&fb.values) {
            *v = alpha * *v + w;
        }
        let sols = solver.solve_flux_many(&[fa, fb, fc], 0.0, 0).unwrap();
        prop_assert_eq!(&sols[0].u.cells, solver.cells());
        let scale = sols.iter().flat_map(|s| s.u.values.iter()).fold(1e-300f64, |m, v| m.max(v.abs()));
        for i in 0..sols[2].u.values.len() {
            let expect = alpha * sols[0].u.values[i] + sols[1].u.values[i];
            prop_assert!((sols[2].u.values[i] - expect).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn flux_divergence_integrates_to_zero(a in data()) {
        let solver = square_solver(8, 0.0);
        let f = local(&solver, &a);
        let s = solver.solve_flux(&f, 0.0, 0).unwrap();
        prop_assert!(s.residual.is_finite());
        prop_assert!(s.residual < 0.5, "raw residual {}", s.residual);
    }
}

#[test]
fn zero_data_gives_zero_field() {
    let solver = square_solver(8, 0.0);
    let f = LocalField::zeros(solver.cells().clone(), 1);
    let s = solver.solve_flux(&f, 0.0, 0).unwrap();
    assert!(s.u.values.iter().all(|v| *v == 0.0));
}
