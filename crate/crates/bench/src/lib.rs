//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use divtree_core::local_div::{BogovskiiSolver, StarRegion};
use divtree_core::pipeline::{Pipeline, RunConfig};
use divtree_core::{random, AaBox, Grid, LocalField};

/// Unit-square solver at cell size `1/cells` with `rhs` smooth zero-mean
/// right-hand sides restricted to it.
pub fn square_problem(cells: usize, rhs: usize) -> (BogovskiiSolver, Vec<LocalField>) {
    let b = AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]);
    let grid = Arc::new(Grid::covering(&b, 1.0 / cells as f64).expect("grid"));
    let mask = Arc::new(vec![true; grid.len()]);
    let solver = BogovskiiSolver::new(StarRegion::from_box(&b).expect("star"), grid.clone()).expect("solver");
    let mut rng = random::rng(7);
    let fs = (0..rhs).map(|_| random::smooth_zero_mean(&grid, &mask, &mut rng, 6, 3).restrict(solver.cells())).collect();
    (solver, fs)
}

pub fn pipeline(json: &str) -> Pipeline {
    Pipeline::build(RunConfig::from_json(json).expect("config")).expect("pipeline")
}

pub const CHAIN: &str = r#"{
  "domain": {
    "family": "custom_tree",
    "overlap": 2,
    "nodes": [
      { "omega": { "box": { "lo": [0.0], "hi": [2.0] } } },
      { "omega": { "box": { "lo": [1.0], "hi": [3.0] } }, "connector": { "box": { "lo": [1.0], "hi": [2.0] } }, "parent": 0 },
      { "omega": { "box": { "lo": [2.5], "hi": [4.0] } }, "connector": { "box": { "lo": [2.5], "hi": [3.0] } }, "parent": 1 }
    ]
  },
  "h": 0.0009765625
}"#;

pub const HOLDER: &str = r#"{
  "domain": { "family": "holder", "profile": { "kind": "power_hump", "alpha": 0.5, "c": 0.4, "l": 0.25 } },
  "h": 0.015625,
  "kappa": 0.5
}"#;

pub const CUSP: &str = r#"{
  "domain": { "family": "cusp", "profile": { "kind": "power", "gamma": 2.0, "a": 1.0 } },
  "h": 0.015625,
  "depth": 6,
  "kappa": 1.0
}"#;
