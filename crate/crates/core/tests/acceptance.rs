//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use divtree_core::cusp::{cusp_sequence, star_split, CuspCover, CuspProfile};
use divtree_core::grid::jacobian_lp_norm;
use divtree_core::local_div::{bogovskii_solve, BogovskiiSolver, StarRegion};
use divtree_core::pipeline::{FamilyBuild, Pipeline, RunConfig};
use divtree_core::tree::{c1_constant, t_operator_bound, verify_decomposition_bound, verify_t_bound};
use divtree_core::whitney::epsilon_inequality;
use divtree_core::{random, AaBox, Grid, GridFunction, LocalField};

const TRIALS: usize = 20;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn pipeline(json: &str) -> Pipeline {
    Pipeline::build(RunConfig::from_json(json).expect("config parses")).expect("pipeline builds")
}

const CHAIN: &str = r#"{
  "domain": {
    "family": "custom_tree",
    "overlap": 2,
    "nodes": [
      { "omega": { "box": { "lo": [0.0], "hi": [2.0] } } },
      { "omega": { "box": { "lo": [1.0], "hi": [3.0] } }, "connector": { "box": { "lo": [1.0], "hi": [2.0] } }, "parent": 0 },
      { "omega": { "box": { "lo": [2.5], "hi": [4.0] } }, "connector": { "box": { "lo": [2.5], "hi": [3.0] } }, "parent": 1 }
    ]
  },
  "h": 0.015625
}"#;

const WHITNEY_L6: &str = r#"{ "domain": { "family": "whitney", "shape": { "kind": "l_shape" } }, "h": 0.0009765625, "depth": 6 }"#;

const CUSP: &str = r#"{
  "domain": { "family": "cusp", "profile": { "kind": "power", "gamma": 2.0, "a": 1.0 } },
  "h": 0.015625, "depth": 6, "kappa": 1.0, "seed": 1, "data": { "kind": "random" }
}"#;

const HOLDER: &str = r#"{
  "domain": { "family": "holder", "profile": { "kind": "power_hump", "alpha": 0.5, "c": 0.4, "l": 0.25 } },
  "h": 0.015625, "kappa": 0.5, "seed": 1, "data": { "kind": "random" }
}"#;

const WHITNEY_SOLVE: &str = r#"{
  "domain": { "family": "whitney", "shape": { "kind": "l_shape" } },
  "h": 0.00390625, "depth": 4, "seed": 1, "data": { "kind": "random" }
}"#;

struct Family {
    name: &'static str,
    pipeline: Pipeline,
    build_time: Duration,
    fs: Vec<GridFunction>,
}

fn families() -> Vec<Family> {
    [("chain", CHAIN), ("whitney", WHITNEY_L6), ("cusp", CUSP), ("holder", HOLDER)]
        .into_iter()
        .map(|(name, json)| {
            let start = Instant::now();
            let pipeline = pipeline(json);
            let build_time = start.elapsed();
            let tog = &pipeline.tog;
            let mut rng = random::rng(2024);
            let fs = (0..TRIALS).map(|_| random::uniform_zero_mean(tog.grid(), tog.mask(), &mut rng)).collect();
            Family { name, pipeline, build_time, fs }
        })
        .collect()
}

/// Criterion 1: Σg_t = f, zero means off the root, supports inside Ω_t.
fn decomposition_exactness(families: &[Family]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for fam in families {
        let start = Instant::now();
        let tog = &fam.pipeline.tog;
        let root = tog.tree().root();
        let (mut sum_err, mut mean_err, mut leaks) = (0.0f64, 0.0f64, 0usize);
        for f in &fam.fs {
            let d = tog.decompose(f).unwrap();
            let sum = d.reconstruct(tog).unwrap();
            let scale = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for c in f.masked_cells() {
                sum_err = sum_err.max((sum.value(c)[0] - f.value(c)[0]).abs() / scale);
            }
            let l1 = f.l1_norm();
            for (t, g) in d.parts.iter().enumerate() {
                if t != root {
                    mean_err = mean_err.max(d.integrals[t].abs() / l1);
                }
                leaks += usize::from(g.leaks_outside(tog.omega_cells(t)).is_some());
            }
        }
        let time = start.elapsed() + fam.build_time;
        let ok = sum_err <= 1e-12 && mean_err <= 1e-10 && leaks == 0 && time <= Duration::from_secs(60);
        passed &= ok;
        parts.push(format!("{} sum {sum_err:.1e} mean {mean_err:.1e} leaks {leaks} {:.1}s", fam.name, time.as_secs_f64()));
    }
    outcome(passed, parts.join("; "))
}

/// Criterion 2: C₁ bound for p in {1.5, 2, 3}.
fn decomposition_bound(families: &[Family]) -> Outcome {
    let mut violations = 0;
    let mut parts = Vec::new();
    for fam in families {
        let tog = &fam.pipeline.tog;
        let ds: Vec<_> = fam.fs.iter().map(|f| tog.decompose(f).unwrap()).collect();
        let mut worst = Vec::new();
        for p in [1.5, 2.0, 3.0] {
            let mut w = 0.0f64;
            for (f, d) in fam.fs.iter().zip(&ds) {
                let r = verify_decomposition_bound(tog, f, Some(d), p, None).unwrap();
                violations += usize::from(!r.passed);
                w = w.max(r.ratio * r.constant);
            }
            worst.push(format!("p={p} {w:.3}/{:.1}", c1_constant(p, tog.tree().overlap_bound())));
        }
        parts.push(format!("{} worst ratio/C1 {}", fam.name, worst.join(" ")));
    }
    outcome(violations == 0, format!("{violations} violations; {}", parts.join("; ")))
}

/// Criterion 3: ‖Tf‖_p/‖f‖_p ≤ 2(pN/(p−1))^{1/p} over 100 random f.
fn t_bound(families: &[Family]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for fam in families {
        let tog = &fam.pipeline.tog;
        let r = verify_t_bound(tog, 2.0, 100, 7, None).unwrap();
        passed &= r.passed;
        parts.push(format!("{} {:.3} <= {:.3}", fam.name, r.worst_ratio, t_operator_bound(2.0, tog.tree().overlap_bound())));
    }
    outcome(passed, parts.join("; "))
}

/// Criterion 4: Whitney geometry on the L-shape.
fn whitney_geometry(families: &[Family]) -> Outcome {
    let fam = families.iter().find(|f| f.name == "whitney").unwrap();
    let FamilyBuild::Whitney(build) = &fam.pipeline.family else { unreachable!() };
    let start = Instant::now();
    let g = build.geometry().unwrap();
    let time = start.elapsed() + fam.build_time;
    let ok = g.distance_violations == 0
        && g.max_cover <= 144
        && g.exact.passed()
        && g.exact.epsilon == 2f64.powi(-7)
        && g.connector_cell_violations == 0
        && epsilon_inequality(2f64.powi(-7))
        && time <= Duration::from_secs(30);
    outcome(
        ok,
        format!(
            "{} cubes, dist/diam in [{:.3}, {:.3}], cover {} <= 144, exact checks {}, {:.1}s",
            g.cubes,
            g.min_distance_ratio,
            g.max_distance_ratio,
            g.max_cover,
            if g.exact.passed() { "clean" } else { "violated" },
            time.as_secs_f64()
        ),
    )
}

/// Criterion 5: cusp sequence against bisection.
fn cusp_sequence_oracle() -> Outcome {
    let profile = CuspProfile::power(2.0, 1.0).unwrap();
    let xs = cusp_sequence(&profile, 10).unwrap();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid + mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x1_err = (xs[1] - 0.5 * (lo + hi)).abs();
    let closed = (5f64.sqrt() - 1.0) / 2.0;
    let identity = (0..=8).map(|i| (xs[i + 1] * xs[i + 1] + xs[i + 1] - xs[i]).abs()).fold(0.0, f64::max);
    outcome(
        x1_err <= 1e-9 && (xs[1] - closed).abs() <= 1e-9 && identity <= 1e-10,
        format!("x1 = {:.12}, |x1 - bisection| = {x1_err:.1e}, max identity error {identity:.1e}", xs[1]),
    )
}

/// Criterion 6: star splits with m = 65 and stability of max (R/ρ)^{n+1}.
fn cusp_star_constants() -> Outcome {
    let profile = CuspProfile::power(2.0, 1.0).unwrap().with_constants(2.0, 1.0);
    let cover = CuspCover::new(profile, 8, 2).unwrap();
    let mut maxima = Vec::new();
    let mut all_inside = true;
    for i in 0..8 {
        match star_split(&cover, i, 65) {
            Ok(s) => {
                all_inside &= s.passed();
                maxima.push(s.max_galdi());
            }
            Err(_) => {
                all_inside = false;
                maxima.push(f64::NAN);
            }
        }
    }
    let prefix = |d: usize| maxima[..d].iter().cloned().fold(0.0f64, f64::max);
    let (m4, m8) = (prefix(4), prefix(8));
    let drift = (m8 - m4).abs() / m4;
    outcome(
        all_inside && drift <= 0.05,
        format!("segments inside: {all_inside}; max (R/rho)^3 {m4:.4e} at depth 4, {m8:.4e} at depth 8, drift {drift:.1e}"),
    )
}

/// Criterion 7: Hölder geometry.
fn holder_geometry(families: &[Family]) -> Outcome {
    let fam = families.iter().find(|f| f.name == "holder").unwrap();
    let FamilyBuild::Holder(build) = &fam.pipeline.family else { unreachable!() };
    let g = build.geometry();
    let n_exact = fam.pipeline.tog.tree().overlap_bound() == 2 && g.max_cover == 2;
    outcome(
        g.passed() && n_exact,
        format!(
            "{} cubes, d_G/l in [{:.3}, {:.3}] against [1, {:.3}], N = {}, |B_t| errors {}",
            g.cubes, g.min_distance_ratio, g.max_distance_ratio, g.distance_constant, g.max_cover, g.connector_measure_errors
        ),
    )
}

fn unit_square(cells: usize, side: f64) -> (BogovskiiSolver, Arc<Grid>, Arc<Vec<bool>>) {
    let b = AaBox::new(vec![0.0, 0.0], vec![side, side]);
    let grid = Arc::new(Grid::covering(&b, side / cells as f64).unwrap());
    let mask = Arc::new(vec![true; grid.len()]);
    let solver = BogovskiiSolver::new(StarRegion::from_box(&b).unwrap(), grid.clone()).unwrap();
    (solver, grid, mask)
}

fn raw_residuals(cells: usize, smooth: bool) -> Vec<f64> {
    let (solver, grid, mask) = unit_square(cells, 1.0);
    let mut rng = random::rng(8);
    let fs: Vec<LocalField> = (0..10)
        .map(|_| {
            let f = if smooth {
                random::smooth_zero_mean(&grid, &mask, &mut rng, 6, 3)
            } else {
                random::uniform_zero_mean(&grid, &mask, &mut rng)
            };
            f.restrict(solver.cells())
        })
        .collect();
    solver.solve_flux_many(&fs, 0.0, 0).unwrap().iter().map(|s| s.residual).collect()
}

/// Criterion 8: local solver accuracy, self-convergence and dilation invariance.
fn local_solver() -> Outcome {
    let coarse_random = raw_residuals(64, false);
    let worst_random = coarse_random.iter().cloned().fold(0.0, f64::max);
    let coarse = raw_residuals(64, true);
    let fine = raw_residuals(128, true);
    let worst_ratio = fine.iter().zip(&coarse).map(|(f, c)| f / c).fold(0.0, f64::max);

    let ratio_at = |side: f64| {
        let b = AaBox::new(vec![0.0, 0.0], vec![side, side]);
        let grid = Arc::new(Grid::covering(&b, side / 16.0).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        let f = random::uniform_zero_mean(&grid, &mask, &mut random::rng(9));
        let u = bogovskii_solve(&f, &StarRegion::from_box(&b).unwrap()).unwrap();
        jacobian_lp_norm(&u, None, 2.0).unwrap() / divtree_core::grid::weighted_lp_norm(&f, None, 2.0).unwrap()
    };
    let (r1, r3) = (ratio_at(1.0), ratio_at(3.0));
    let dilation = (r1 - r3).abs() / r1;
    outcome(
        worst_random <= 0.1 && worst_ratio <= 2.0 / 3.0 && dilation <= 1e-8,
        format!(
            "worst residual at h=1/64 {worst_random:.3e}; worst h=1/128 over h=1/64 ratio {worst_ratio:.3} (smooth f); dilation drift {dilation:.1e}"
        ),
    )
}

/// Criterion 9: end-to-end weighted estimate.
fn end_to_end() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, json) in [("whitney", WHITNEY_SOLVE), ("cusp", CUSP), ("holder", HOLDER)] {
        let start = Instant::now();
        let p = pipeline(json);
        let f = p.data().unwrap();
        let (_, report) = p.solve(&f).unwrap();
        let time = start.elapsed();
        let c = &report.constants;
        let residual = report.residual.unwrap_or(f64::NAN);
        let ok = c.C_emp.is_some_and(|e| e <= c.C_theory) && residual <= 0.15 && time <= Duration::from_secs(300);
        passed &= ok;
        parts.push(format!(
            "{name} C_emp {:.3} <= C_theory {:.3}, residual {residual:.2e}, {:.0}s",
            c.C_emp.unwrap_or(f64::NAN),
            c.C_theory,
            time.as_secs_f64()
        ));
    }
    outcome(passed, parts.join("; "))
}

/// Criterion 10: identical config and seed give identical report JSON.
fn reproducibility() -> Outcome {
    let run = || {
        let p = pipeline(HOLDER);
        let f = p.data().unwrap();
        p.solve(&f).unwrap().1.to_json()
    };
    let (a, b) = (run(), run());
    outcome(a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let start = Instant::now();
    let fams = families();
    let results = [
        ("decomposition exactness", decomposition_exactness(&fams)),
        ("decomposition bound", decomposition_bound(&fams)),
        ("tree operator bound", t_bound(&fams)),
        ("whitney geometry", whitney_geometry(&fams)),
        ("cusp sequence", cusp_sequence_oracle()),
        ("cusp star constants", cusp_star_constants()),
        ("holder geometry", holder_geometry(&fams)),
        ("local solver", local_solver()),
        ("end-to-end estimate", end_to_end()),
        ("reproducibility", reproducibility()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        println!("criterion {:>2} {:<24} {}  {}", i + 1, name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} of {} criteria passed in {:.0}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
