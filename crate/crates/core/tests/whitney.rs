use std::sync::Arc;

use divtree_core::grid::{AaBox, Grid, Region};
use divtree_core::whitney::*;

const L_VERTICES: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]];

fn segment_box_distance(a: [f64; 2], b: [f64; 2], q: &AaBox) -> f64 {
    // The distance is convex along the segment; golden-section search plus endpoints.
    let at = |s: f64| q.distance_to_point(&[a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) <= at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi)).min(at(0.0)).min(at(1.0))
}

fn polygon_distance(q: &AaBox) -> f64 {
    (0..L_VERTICES.len()).map(|i| segment_box_distance(L_VERTICES[i], L_VERTICES[(i + 1) % 6], q)).fold(f64::INFINITY, f64::min)
}

fn in_l(p: &[f64]) -> bool {
    p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0 && !(p[0] >= 0.5 && p[1] >= 0.5)
}

/// Enumerates every dyadic cube of levels 0..=max_level and keeps the
/// admissible ones whose parent is not admissible.
fn oracle_cubes(max_level: u32) -> Vec<(u32, i64, i64)> {
    let admissible = |level: u32, i: i64, j: i64| {
        let side = 1.0 / (1u64 << level) as f64;
        let q = AaBox::cube(&[i as f64 * side, j as f64 * side], side);
        let c = q.center();
        in_l(&c) && polygon_distance(&q) >= side * 2f64.sqrt() - 1e-12
    };
    let mut out = Vec::new();
    for level in 0..=max_level {
        let count = 1i64 << level;
        for i in 0..count {
            for j in 0..count {
                if admissible(level, i, j) && (level == 0 || !admissible(level - 1, i / 2, j / 2)) {
                    out.push((level, i, j));
                }
            }
        }
    }
    out.sort();
    out
}

fn l_shape_build(h: f64, max_level: u32) -> WhitneyBuild {
    let d = WhitneyDomain::l_shape(h / 2.0).unwrap();
    let grid = Arc::new(Grid::covering(d.region().bbox(), h).unwrap());
    WhitneyBuild::new(d, grid, max_level).unwrap()
}

#[test]
fn l_shape_cubes_match_brute_force_selector() {
    let b = l_shape_build(1.0 / 1024.0, 6);
    let mut ours: Vec<(u32, i64, i64)> = b.whitney.cubes.iter().map(|q| (q.level, q.index[0], q.index[1])).collect();
    ours.sort();
    assert_eq!(ours, oracle_cubes(6));
}

#[test]
fn l_shape_geometry_and_connectors() {
    let b = l_shape_build(1.0 / 1024.0, 6);
    let g = b.geometry().unwrap();
    assert!(g.passed(), "{g:?}");
    assert!(g.max_cover <= 144);
    assert!(b.tog.validate().passed());
}

#[test]
fn l_shape_shadows_match_explicit_unions() {
    let b = l_shape_build(1.0 / 512.0, 5);
    let s = b.shadows();
    let dv = b.tog.grid().cell_measure();
    for t in (0..b.whitney.len()).step_by(7) {
        let mut boxes = Vec::new();
        let mut stack = vec![t];
        while let Some(u) = stack.pop() {
            boxes.push(b.whitney.cubes[u].expanded(GRID_EPSILON));
            stack.extend(b.tog.tree().children(u));
        }
        let oracle = Region::box_union(boxes).cells(b.tog.grid()).iter().filter(|&c| b.tog.mask()[c]).count() as f64 * dv;
        assert_eq!(s[t], oracle, "node {t}");
        assert!(s[t] >= b.whitney.cubes[t].expanded(GRID_EPSILON).volume() - 1e-12);
    }
}

#[test]
fn l_shape_shadow_weight_and_m1() {
    let b = l_shape_build(1.0 / 512.0, 5);
    let bar = b.shadow_weight();
    assert!(bar.masked_cells().all(|c| bar.value(c)[0] > 0.0 && bar.value(c)[0] <= 1.0));
    let r = verify_m1(&b.tog, &bar, whitney_m1(2));
    assert_eq!(whitney_m1(2), 4194304.0);
    assert!(r.passed, "{r:?}");
}

#[test]
fn disk_cubes_pass_dense_boundary_distance() {
    let h = 1.0 / 512.0;
    let d = WhitneyDomain::disk([0.5, 0.5], 0.5, h / 2.0).unwrap();
    let grid = Arc::new(Grid::covering(d.region().bbox(), h).unwrap());
    let cubes = whitney_decompose(&d, &grid, 5).unwrap();
    // Oracle: exact distance to the circle.
    for q in &cubes {
        let c = q.center();
        let half = q.side / 2.0;
        let far = ((c[0] - 0.5).abs() + half).hypot((c[1] - 0.5).abs() + half);
        let dist = 0.5 - far;
        assert!(q.diameter() <= dist + h / 2.0 && dist <= 4.0 * q.diameter(), "{q:?}");
    }
}
