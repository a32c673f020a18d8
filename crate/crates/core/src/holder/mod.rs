//! Cubes piled under a Hölder graph, the induced tree of rectangles, the
//! graph distance `d_G` and the weights `d_G^{1−α}`, `d_G^{−κ}`.

mod profile;

pub use profile::{HolderCheck, HolderKind, HolderProfile, HOLDER_SAMPLES};

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AaBox, Grid, GridFunction, Region};
use crate::tree::{DomainTree, TreeNode, TreeOnGrid};

/// Vertical positions are stored in units of `l · 2^{−UNIT_BITS}`.
const UNIT_BITS: u32 = 40;

/// Smallest piled side, in grid cells.
pub const MIN_SIDE_CELLS: f64 = 4.0;

/// `3√(4n−3)`.
pub fn distance_constant(n: usize) -> f64 {
    3.0 * ((4 * n - 3) as f64).sqrt()
}

/// `Q_t = Q′_t × (y₁, y₁ + l_t)` with `l_t = l 2^{−k}` and
/// `Q′_t = −l/2 + l_t (i, i+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiledCube {
    /// Pile level `m`.
    pub level: usize,
    /// Side exponent `k`.
    pub k: u32,
    pub index: i64,
    /// `y₁` in units of `l 2^{−40}`.
    pub y_units: i64,
    pub parent: Option<usize>,
}

impl PiledCube {
    fn side_units(&self) -> i64 {
        1i64 << (UNIT_BITS - self.k)
    }

    /// `(x_lo, x_hi, y₁, y₂)` in units of `l 2^{−40}`, `x` measured from `−l/2`.
    pub fn integer_cube(&self) -> [i64; 4] {
        let s = self.side_units();
        [self.index * s, (self.index + 1) * s, self.y_units, self.y_units + s]
    }

    /// `Ω_t` in integer units; the root is its cube.
    pub fn integer_omega(&self) -> [i64; 4] {
        let mut c = self.integer_cube();
        if self.parent.is_some() {
            c[2] -= self.side_units() / 2;
        }
        c
    }

    pub fn side(&self, l: f64) -> f64 {
        l / (1u64 << self.k) as f64
    }

    fn to_box(&self, c: [i64; 4], l: f64) -> AaBox {
        let u = l / (1u64 << UNIT_BITS) as f64;
        AaBox::new(vec![-0.5 * l + c[0] as f64 * u, c[2] as f64 * u], vec![-0.5 * l + c[1] as f64 * u, c[3] as f64 * u])
    }

    pub fn cube(&self, l: f64) -> AaBox {
        self.to_box(self.integer_cube(), l)
    }

    pub fn omega(&self, l: f64) -> AaBox {
        self.to_box(self.integer_omega(), l)
    }

    /// `B_t = Q′_t × (y₁ − l_t/2, y₁)`.
    pub fn connector(&self, l: f64) -> Option<AaBox> {
        self.parent?;
        let c = self.integer_cube();
        Some(self.to_box([c[0], c[1], c[2] - self.side_units() / 2, c[2]], l))
    }
}

#[derive(Debug, Clone)]
pub struct PiledCubes {
    pub profile: HolderProfile,
    pub cubes: Vec<PiledCube>,
    /// Node ids per pile level.
    pub levels: Vec<Vec<usize>>,
    /// Containment tests evaluated by exact minimum of `φ`.
    pub tests: usize,
}

fn open_overlap(a: &[i64; 4], b: &[i64; 4]) -> bool {
    a[0] < b[1] && b[0] < a[1] && a[2] < b[3] && b[2] < a[3]
}

impl PiledCubes {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn children(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.cubes.iter().enumerate().filter(move |(_, c)| c.parent == Some(t)).map(|(s, _)| s)
    }

    /// Pairs of cubes with intersecting interiors, exact.
    pub fn cube_overlaps(&self) -> usize {
        let boxes: Vec<[i64; 4]> = self.cubes.iter().map(PiledCube::integer_cube).collect();
        pair_count(&boxes, |_, _| false)
    }

    /// Pairs of subdomains meeting although neither is the other's parent, exact.
    pub fn omega_overlaps(&self) -> usize {
        let boxes: Vec<[i64; 4]> = self.cubes.iter().map(PiledCube::integer_omega).collect();
        pair_count(&boxes, |s, t| self.cubes[s].parent == Some(t) || self.cubes[t].parent == Some(s))
    }

    /// Cubes with a side larger than their parent's.
    pub fn monotonicity_violations(&self) -> usize {
        self.cubes.iter().filter(|c| c.parent.is_some_and(|p| c.k < self.cubes[p].k)).count()
    }
}

fn pair_count(boxes: &[[i64; 4]], allowed: impl Fn(usize, usize) -> bool + Sync) -> usize {
    (0..boxes.len())
        .into_par_iter()
        .map(|s| (s + 1..boxes.len()).filter(|&t| open_overlap(&boxes[s], &boxes[t]) && !allowed(s, t)).count())
        .sum()
}

/// Piles cubes from `Q_a = (−l/2, l/2) × (0, l)`: a cube whose raised triple
/// `3(Q_t + l_t e_n)` fits under the graph gets one raised child of the same
/// side, otherwise two half-side children on its top face. Children smaller
/// than `min_side` are not emitted.
pub fn pile_cubes(profile: &HolderProfile, max_levels: usize, min_side: f64) -> Result<PiledCubes> {
    profile.validate()?;
    let l = profile.l;
    if profile.min_on(-0.5 * l, 0.5 * l) <= l {
        return Err(Error::MalformedProfile("root cube (−l/2, l/2) × (0, l) is not under the graph".into()));
    }
    if max_levels as u32 >= UNIT_BITS {
        return Err(Error::InvalidParameter(format!("at most {} pile levels", UNIT_BITS - 1)));
    }
    let mut cubes = vec![PiledCube { level: 0, k: 0, index: 0, y_units: 0, parent: None }];
    let mut levels = vec![vec![0]];
    let mut tests = 0;
    for m in 0..max_levels {
        let frontier = levels[m].clone();
        let fits: Vec<bool> = frontier
            .par_iter()
            .map(|&t| {
                let q = &cubes[t];
                let b = q.cube(l);
                let side = q.side(l);
                let (x0, x1) = (b.lo[0] - side, b.hi[0] + side);
                x0 >= -1.5 * l && x1 <= 1.5 * l && b.hi[1] + 2.0 * side <= profile.min_on(x0, x1)
            })
            .collect();
        tests += frontier.len();
        let mut next = Vec::new();
        for (&t, fit) in frontier.iter().zip(fits) {
            let q = cubes[t].clone();
            let [_, _, _, top] = q.integer_cube();
            let children: Vec<PiledCube> = if fit {
                vec![PiledCube { level: m + 1, k: q.k, index: q.index, y_units: top, parent: Some(t) }]
            } else {
                (0..2).map(|j| PiledCube { level: m + 1, k: q.k + 1, index: 2 * q.index + j, y_units: top, parent: Some(t) }).collect()
            };
            for c in children {
                if c.side(l) >= min_side * (1.0 - 1e-12) {
                    next.push(cubes.len());
                    cubes.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    Ok(PiledCubes { profile: profile.clone(), cubes, levels, tests })
}

/// Points of the graph `G` over `[−5l/2, 5l/2]`, consecutive points at most
/// `spacing` apart, sorted by abscissa.
#[derive(Debug, Clone)]
pub struct GraphCloud {
    pub points: Vec<[f64; 2]>,
    pub spacing: f64,
}

impl GraphCloud {
    pub fn new(profile: &HolderProfile, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("graph spacing must be positive, got {spacing}")));
        }
        let reach = 2.5 * profile.l;
        let coarse = (2.0 * reach / spacing).ceil() as usize;
        let mut points = Vec::with_capacity(coarse + 1);
        let p = |x: f64| [x, profile.eval(x)];
        points.push(p(-reach));
        let mut knots: Vec<f64> = (1..=coarse).map(|k| -reach + 2.0 * reach * k as f64 / coarse as f64).collect();
        if let HolderKind::Tabulated { xs, .. } = &profile.kind {
            knots.extend(xs.iter().copied().filter(|x| x.abs() < reach));
            knots.sort_by(f64::total_cmp);
            knots.dedup();
        }
        for x in knots {
            let a = *points.last().unwrap();
            refine(&p, a, p(x), spacing, 0, &mut points);
        }
        Ok(Self { points, spacing })
    }

    /// `d_G(z)` to within half the spacing.
    pub fn distance(&self, z: &[f64]) -> f64 {
        let k = self.points.partition_point(|q| q[0] < z[0]);
        let mut best = f64::INFINITY;
        for q in self.points[k..].iter() {
            let dx = q[0] - z[0];
            if dx >= best {
                break;
            }
            best = best.min(dx.hypot(q[1] - z[1]));
        }
        for q in self.points[..k].iter().rev() {
            let dx = z[0] - q[0];
            if dx >= best {
                break;
            }
            best = best.min(dx.hypot(q[1] - z[1]));
        }
        best
    }

    pub fn distance_to_box(&self, b: &AaBox) -> f64 {
        self.points.iter().map(|q| b.distance_to_point(q)).fold(f64::INFINITY, f64::min)
    }
}

fn refine(p: &impl Fn(f64) -> [f64; 2], a: [f64; 2], b: [f64; 2], spacing: f64, depth: u32, out: &mut Vec<[f64; 2]>) {
    if depth < 60 && (b[0] - a[0]).hypot(b[1] - a[1]) > spacing {
        let m = p(0.5 * (a[0] + b[0]));
        refine(p, a, m, spacing, depth + 1, out);
        refine(p, m, b, spacing, depth + 1, out);
    } else {
        out.push(b);
    }
}

/// `d_G` on the masked cells, from a cloud of spacing `h/2`.
pub fn graph_distance(profile: &HolderProfile, grid: Arc<Grid>, mask: Arc<Vec<bool>>) -> Result<GridFunction> {
    let cloud = GraphCloud::new(profile, 0.5 * grid.h())?;
    graph_distance_from(&cloud, grid, mask)
}

fn graph_distance_from(cloud: &GraphCloud, grid: Arc<Grid>, mask: Arc<Vec<bool>>) -> Result<GridFunction> {
    let values: Vec<f64> =
        (0..grid.len()).into_par_iter().map(|c| if mask[c] { cloud.distance(&grid.center_vec(c)) } else { 0.0 }).collect();
    GridFunction::from_values(grid, mask, 1, values)
}

/// `{|x| < l/2, 0 < y < φ(x)}`.
pub fn holder_domain(profile: &HolderProfile) -> Region {
    let l = profile.l;
    let top = profile.max_over_base();
    let p = profile.clone();
    Region::predicate(AaBox::new(vec![-0.5 * l, 0.0], vec![0.5 * l, top]), move |z| {
        z[0].abs() < 0.5 * l && z[1] > 0.0 && z[1] < p.eval(z[0])
    })
}

/// Piled cubes and their tree sampled on a grid anchored at `(−l/2, 0)`.
/// Domain cells outside every `Ω_t` (the strip under the graph beyond the
/// last pile level) are masked out and counted.
#[derive(Debug, Clone)]
pub struct HolderBuild {
    pub piled: PiledCubes,
    pub tog: TreeOnGrid,
    pub cloud: GraphCloud,
    pub truncated_cells: usize,
}

impl HolderBuild {
    /// Requires `l/h` to be a power of two; piling stops at side `4h`.
    pub fn new(profile: HolderProfile, h: f64, max_levels: usize) -> Result<Self> {
        let l = profile.l;
        let ratio = l / h;
        if !(ratio >= 8.0) || (ratio.log2() - ratio.log2().round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("l/h must be a power of two ≥ 8, got {ratio}")));
        }
        let piled = pile_cubes(&profile, max_levels, MIN_SIDE_CELLS * h)?;
        let domain = holder_domain(&profile);
        let grid = Arc::new(Grid::covering(domain.bbox(), h)?);
        let nodes: Vec<TreeNode> = piled
            .cubes
            .iter()
            .map(|q| match (q.parent, q.connector(l)) {
                (Some(p), Some(b)) => TreeNode::child(Region::boxed(q.omega(l)), Region::boxed(b), p),
                _ => TreeNode::root(Region::boxed(q.omega(l))),
            })
            .collect();
        let tree = Arc::new(DomainTree::new(nodes, 2)?);
        let inside = domain.cells(&grid);
        let mut covered = vec![false; grid.len()];
        for q in &piled.cubes {
            for c in Region::boxed(q.omega(l)).cells(&grid).iter() {
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
        let tog = TreeOnGrid::new(tree, grid.clone(), Arc::new(mask))?;
        if let Some(e) = tog.validate().structural_error(&tog) {
            return Err(e);
        }
        let cloud = GraphCloud::new(&profile, 0.5 * h)?;
        Ok(Self { piled, tog, cloud, truncated_cells: truncated })
    }

    pub fn profile(&self) -> &HolderProfile {
        &self.piled.profile
    }

    pub fn graph_distance(&self) -> Result<GridFunction> {
        graph_distance_from(&self.cloud, self.tog.grid().clone(), self.tog.mask().clone())
    }

    pub fn geometry(&self) -> HolderGeometry {
        let l = self.profile().l;
        let cn = distance_constant(2);
        let tol = self.cloud.spacing;
        let ratios: Vec<f64> = self.piled.cubes.par_iter().map(|q| self.cloud.distance_to_box(&q.cube(l)) / q.side(l)).collect();
        let violations = self
            .piled
            .cubes
            .iter()
            .zip(&ratios)
            .filter(|(q, r)| {
                let s = q.side(l);
                let d = *r * s;
                d < s - tol || d > cn * s + tol
            })
            .count();
        let h = self.tog.grid().h();
        let dv = self.tog.grid().cell_measure();
        let connector_errors = self
            .piled
            .cubes
            .iter()
            .enumerate()
            .filter(|(t, q)| {
                q.parent.is_some() && {
                    let cells = (self.tog.connector_measure(*t) / dv).round();
                    let side_cells = (q.side(l) / h).round();
                    cells != side_cells * side_cells / 2.0
                }
            })
            .count();
        let report = self.tog.validate();
        HolderGeometry {
            cubes: self.piled.len(),
            levels: self.piled.levels.len(),
            tolerance: tol,
            distance_constant: cn,
            distance_violations: violations,
            min_distance_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            max_distance_ratio: ratios.iter().copied().fold(0.0, f64::max),
            cube_overlaps: self.piled.cube_overlaps(),
            omega_overlaps: self.piled.omega_overlaps(),
            monotonicity_violations: self.piled.monotonicity_violations(),
            max_cover: report.max_cover,
            connector_measure_errors: connector_errors,
            truncated_cells: self.truncated_cells,
            cover_valid: report.passed(),
        }
    }

    /// `(d_G^{1−α}, d_G^{−κ})` and the node-wise comparison of `d_G^{1−α}`
    /// with the tree weight.
    pub fn weights(&self, kappa: f64) -> Result<(GridFunction, GridFunction, HolderWeightReport)> {
        holder_weights(self, kappa)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderGeometry {
    pub cubes: usize,
    pub levels: usize,
    pub tolerance: f64,
    pub distance_constant: f64,
    /// Cubes outside `l_t ≤ d_G(Q_t) ≤ 3√(4n−3) l_t`.
    pub distance_violations: usize,
    pub min_distance_ratio: f64,
    pub max_distance_ratio: f64,
    pub cube_overlaps: usize,
    pub omega_overlaps: usize,
    pub monotonicity_violations: usize,
    pub max_cover: usize,
    /// Connectors whose cell count differs from `l_tⁿ/2`.
    pub connector_measure_errors: usize,
    pub truncated_cells: usize,
    pub cover_valid: bool,
}

impl HolderGeometry {
    pub fn passed(&self) -> bool {
        self.distance_violations == 0
            && self.cube_overlaps == 0
            && self.omega_overlaps == 0
            && self.monotonicity_violations == 0
            && self.max_cover <= 2
            && self.connector_measure_errors == 0
            && self.cover_valid
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderWeightReport {
    /// `max_t sup_{Ω_t} d_G^{1−α} / inf_{Ω_t} ω`.
    pub m1: f64,
    pub worst_node: usize,
    /// `max_t |W_t| / ((K_φ + l_t^{1−α}) l_t^{n−1+α})`.
    pub subtree_constant: f64,
}

pub fn holder_weights(build: &HolderBuild, kappa: f64) -> Result<(GridFunction, GridFunction, HolderWeightReport)> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("κ must be ≥ 0, got {kappa}")));
    }
    let profile = build.profile();
    let (alpha, l) = (profile.alpha, profile.l);
    let d = build.graph_distance()?;
    let grid = build.tog.grid().clone();
    let mask = build.tog.mask().clone();
    let pow = |e: f64| -> Result<GridFunction> {
        let values = d.values().iter().zip(mask.iter()).map(|(v, m)| if *m { v.powf(e) } else { 0.0 }).collect();
        GridFunction::from_values(grid.clone(), mask.clone(), 1, values)
    };
    let bar = pow(1.0 - alpha)?;
    let hat = pow(-kappa)?;
    let omega = build.tog.tree_weight();
    let (mut m1, mut worst) = (0.0, 0);
    let mut subtree_constant = 0.0f64;
    for (t, q) in build.piled.cubes.iter().enumerate() {
        let cells = build.tog.omega_cells(t);
        let sup = cells.iter().map(|c| bar.value(c)[0]).fold(0.0, f64::max);
        let inf = cells.iter().map(|c| omega.value(c)[0]).fold(f64::INFINITY, f64::min);
        if sup / inf > m1 {
            m1 = sup / inf;
            worst = t;
        }
        let s = q.side(l);
        subtree_constant =
            subtree_constant.max(build.tog.subtree_measure(t) / ((profile.k_phi + s.powf(1.0 - alpha)) * s.powf(1.0 + alpha)));
    }
    Ok((bar, hat, HolderWeightReport { m1, worst_node: worst, subtree_constant }))
}
