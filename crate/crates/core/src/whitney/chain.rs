use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::WhitneyCube;
use crate::error::{Error, Result};
use crate::grid::{AaBox, Region};
use crate::tree::{DomainTree, TreeNode};

/// `ε` of the expanded cubes in the geometric statements, `2⁻⁷`.
pub const EXACT_EPSILON: f64 = 1.0 / 128.0;

/// `ε` used for the subdomains that are sampled on a grid.
pub const GRID_EPSILON: f64 = 1.0 / 8.0;

/// Extra binary digits below the finest cube side in exact checks.
const SHIFT: u32 = 12;

/// Whitney cubes linked into a tree by minimal face chains.
#[derive(Debug, Clone)]
pub struct WhitneyTree {
    pub cubes: Vec<WhitneyCube>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
    pub epsilon: f64,
    /// Grid-scale connector boxes; `None` at the root.
    pub connectors: Vec<Option<AaBox>>,
    /// Cubes sharing at least a point with each cube, itself excluded.
    pub touching: Vec<Vec<usize>>,
    pub tree: Arc<DomainTree>,
    max_level: u32,
}

struct IntCube {
    lo: Vec<i64>,
    side: i64,
}

impl IntCube {
    fn hi(&self, k: usize) -> i64 {
        self.lo[k] + self.side
    }
}

fn integer_cubes(cubes: &[WhitneyCube], max_level: u32) -> Vec<IntCube> {
    cubes
        .iter()
        .map(|q| {
            let (lo, side) = q.integer_box(max_level, SHIFT);
            IntCube { lo, side }
        })
        .collect()
}

/// Axis along which two closed cubes share an (n−1)-face, if any.
fn shared_face(a: &IntCube, b: &IntCube) -> Option<usize> {
    let n = a.lo.len();
    let mut axis = None;
    for k in 0..n {
        if a.hi(k) == b.lo[k] || b.hi(k) == a.lo[k] {
            if axis.is_some() {
                return None;
            }
            axis = Some(k);
        } else if !(a.lo[k] < b.hi(k) && b.lo[k] < a.hi(k)) {
            return None;
        }
    }
    axis
}

fn closed_touch(a: &IntCube, b: &IntCube) -> bool {
    (0..a.lo.len()).all(|k| a.lo[k] <= b.hi(k) && b.lo[k] <= a.hi(k))
}

/// Default root: a largest cube, ties broken by the lexicographic index.
pub fn default_root(cubes: &[WhitneyCube]) -> usize {
    let mut best = 0;
    for (i, q) in cubes.iter().enumerate() {
        let b = &cubes[best];
        if q.level < b.level || (q.level == b.level && q.index < b.index) {
            best = i;
        }
    }
    best
}

/// Breadth-first face chains from `root`; a cube's parent is the
/// lowest-index face neighbour one step closer to the root. Subdomains are
/// `Q*_t` with factor `1 + ε` and connectors are boxes on the shared faces.
pub fn build_chain_tree(cubes: Vec<WhitneyCube>, root: Option<usize>, epsilon: f64) -> Result<WhitneyTree> {
    if cubes.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::InvalidParameter(format!("expansion factor ε must lie in (0, 1/4), got {epsilon}")));
    }
    let root = root.unwrap_or_else(|| default_root(&cubes));
    if root >= cubes.len() {
        return Err(Error::InvalidParameter(format!("root {root} is not a cube index")));
    }
    let n = cubes[0].dim();
    let max_level = cubes.iter().map(|q| q.level).max().unwrap_or(0);
    let ints = integer_cubes(&cubes, max_level);
    let m = cubes.len();
    let mut faces = vec![Vec::new(); m];
    let mut touching = vec![Vec::new(); m];
    for i in 0..m {
        for j in i + 1..m {
            if closed_touch(&ints[i], &ints[j]) {
                touching[i].push(j);
                touching[j].push(i);
                if shared_face(&ints[i], &ints[j]).is_some() {
                    faces[i].push(j);
                    faces[j].push(i);
                }
            }
        }
    }
    let mut dist = vec![usize::MAX; m];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(t) = queue.pop_front() {
        for &s in &faces[t] {
            if dist[s] == usize::MAX {
                dist[s] = dist[t] + 1;
                queue.push_back(s);
            }
        }
    }
    if dist.contains(&usize::MAX) {
        return Err(Error::Disconnected { sizes: component_sizes(&faces) });
    }
    let parent: Vec<Option<usize>> =
        (0..m).map(|t| if t == root { None } else { faces[t].iter().copied().filter(|&s| dist[s] + 1 == dist[t]).min() }).collect();

    let expanded: Vec<AaBox> = cubes.iter().map(|q| q.expanded(epsilon)).collect();
    let mut connectors = vec![None; m];
    for t in 0..m {
        let Some(p) = parent[t] else { continue };
        connectors[t] = Some(grid_connector(&cubes, &ints, &expanded, &touching, t, p, epsilon)?);
    }
    let nodes = (0..m)
        .map(|t| match parent[t] {
            None => TreeNode::root(Region::boxed(expanded[t].clone())),
            Some(p) => {
                TreeNode::child(Region::boxed(expanded[t].clone()), Region::boxed(connectors[t].clone().expect("child has a connector")), p)
            }
        })
        .collect();
    let overlap = 12usize.pow(n as u32);
    let tree = Arc::new(DomainTree::new(nodes, overlap)?);
    Ok(WhitneyTree { cubes, parent, root, epsilon, connectors, touching, tree, max_level })
}

fn component_sizes(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut sizes = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(t) = stack.pop() {
            size += 1;
            for &u in &adj[t] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Face center and normal axis of the face shared by `t` and `p`, in real
/// coordinates; the face is that of the smaller cube.
fn face_center(cubes: &[WhitneyCube], ints: &[IntCube], t: usize, p: usize) -> (Vec<f64>, usize, f64) {
    let axis = shared_face(&ints[t], &ints[p]).expect("tree edges share a face");
    let small = if cubes[t].side <= cubes[p].side { t } else { p };
    let other = if small == t { p } else { t };
    let mut c = cubes[small].center();
    let touching_hi = (ints[small].hi(axis) - ints[other].lo[axis]).abs() == 0;
    c[axis] = if touching_hi { cubes[small].lo[axis] + cubes[small].side } else { cubes[small].lo[axis] };
    (c, axis, cubes[small].side)
}

/// Box on the shared face: normal half-thickness `ε min(l_t, l_p)/2`,
/// tangential half-width at most a quarter of the face side and shrunk until
/// it avoids every other expanded cube.
fn grid_connector(
    cubes: &[WhitneyCube],
    ints: &[IntCube],
    expanded: &[AaBox],
    touching: &[Vec<usize>],
    t: usize,
    p: usize,
    epsilon: f64,
) -> Result<AaBox> {
    let n = cubes[t].dim();
    let (c, axis, face_side) = face_center(cubes, ints, t, p);
    let thickness = 0.5 * epsilon * cubes[t].side.min(cubes[p].side);
    let mut width = 0.25 * face_side;
    let make = |w: f64| {
        let lo = (0..n).map(|k| c[k] - if k == axis { thickness } else { w }).collect();
        let hi = (0..n).map(|k| c[k] + if k == axis { thickness } else { w }).collect();
        AaBox::new(lo, hi)
    };
    let mut candidates: Vec<usize> = touching[t].iter().chain(&touching[p]).copied().filter(|&s| s != t && s != p).collect();
    candidates.sort_unstable();
    candidates.dedup();
    for s in candidates {
        if !make(width).overlaps(&expanded[s]) {
            continue;
        }
        let gap =
            (0..n).filter(|&k| k != axis).map(|k| (expanded[s].lo[k] - c[k]).max(c[k] - expanded[s].hi[k]).max(0.0)).fold(0.0, f64::max);
        width = width.min(gap);
    }
    if width <= 0.0 {
        return Err(Error::DegenerateConnector { node: t });
    }
    Ok(make(width))
}

/// Verdicts of the exact dyadic checks at a given `ε = 2^{−e}`.
#[derive(Debug, Clone, Serialize)]
pub struct ExactChecks {
    pub epsilon: f64,
    pub cubes: usize,
    /// Pairs of cubes whose interiors meet.
    pub interior_overlaps: usize,
    /// Ordered pairs where `Q*_s ∩ Q_t ≠ ∅` disagrees with `Q_s` touching `Q_t`.
    pub touch_mismatches: usize,
    /// Touching pairs with side ratio above 4.
    pub comparability_violations: usize,
    /// Connectors of side `ε l_t/4` on the face center that leave
    /// `Q*_t ∩ Q*_{t_p}` or meet another `Q*_s`.
    pub connector_violations: usize,
}

impl ExactChecks {
    pub fn passed(&self) -> bool {
        self.interior_overlaps == 0 && self.touch_mismatches == 0 && self.comparability_violations == 0 && self.connector_violations == 0
    }
}

/// `l/8 − 8εl > εl/8` with `l = 1`.
pub fn epsilon_inequality(epsilon: f64) -> bool {
    0.125 - 8.0 * epsilon > epsilon / 8.0
}

impl WhitneyTree {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Integer-arithmetic checks with `ε = 2^{−e}`, `e ≤ 9`.
    pub fn exact_checks(&self, e: u32) -> Result<ExactChecks> {
        if e > 9 {
            return Err(Error::InvalidParameter(format!("exact checks support ε = 2^-e with e ≤ 9, got e = {e}")));
        }
        let ints = integer_cubes(&self.cubes, self.max_level);
        let n = self.cubes[0].dim();
        let m = ints.len();
        // Margin ε l/2 and expanded boxes as (lo, hi) vectors.
        let star: Vec<(Vec<i64>, Vec<i64>)> = ints
            .iter()
            .map(|q| {
                let margin = q.side >> (e + 1);
                ((0..n).map(|k| q.lo[k] - margin).collect(), (0..n).map(|k| q.hi(k) + margin).collect())
            })
            .collect();
        let open_overlap = |a: &(Vec<i64>, Vec<i64>), b: &(Vec<i64>, Vec<i64>)| (0..n).all(|k| a.0[k] < b.1[k] && b.0[k] < a.1[k]);
        let mut report = ExactChecks {
            epsilon: 1.0 / (1u64 << e) as f64,
            cubes: m,
            interior_overlaps: 0,
            touch_mismatches: 0,
            comparability_violations: 0,
            connector_violations: 0,
        };
        for s in 0..m {
            for t in 0..m {
                if s == t {
                    continue;
                }
                let (a, b) = (&ints[s], &ints[t]);
                let touch = closed_touch(a, b);
                if s < t {
                    if (0..n).all(|k| a.lo[k] < b.hi(k) && b.lo[k] < a.hi(k)) {
                        report.interior_overlaps += 1;
                    }
                    if touch && (a.side > 4 * b.side || b.side > 4 * a.side) {
                        report.comparability_violations += 1;
                    }
                }
                let meets = (0..n).all(|k| star[s].0[k] < b.hi(k) && b.lo[k] < star[s].1[k]);
                if meets != touch {
                    report.touch_mismatches += 1;
                }
            }
        }
        for t in 0..m {
            let Some(p) = self.parent[t] else { continue };
            let axis = shared_face(&ints[t], &ints[p]).expect("tree edges share a face");
            let small = if ints[t].side <= ints[p].side { t } else { p };
            let other = if small == t { p } else { t };
            // Center times two keeps the half-side of the face integral.
            let mut c2: Vec<i64> = (0..n).map(|k| 2 * ints[small].lo[k] + ints[small].side).collect();
            c2[axis] = if ints[small].hi(axis) == ints[other].lo[axis] { 2 * ints[small].hi(axis) } else { 2 * ints[small].lo[axis] };
            // Side ε l_t/4, so half-side ε l_t/8, doubled.
            let half2 = ints[t].side >> (e + 2);
            let b = ((0..n).map(|k| c2[k] - half2).collect::<Vec<_>>(), (0..n).map(|k| c2[k] + half2).collect::<Vec<_>>());
            let doubled =
                |q: &(Vec<i64>, Vec<i64>)| (q.0.iter().map(|x| 2 * x).collect::<Vec<_>>(), q.1.iter().map(|x| 2 * x).collect::<Vec<_>>());
            let inside = |q: &(Vec<i64>, Vec<i64>)| (0..n).all(|k| q.0[k] <= b.0[k] && b.1[k] <= q.1[k]);
            let mut bad = half2 == 0 || !inside(&doubled(&star[t])) || !inside(&doubled(&star[p]));
            for s in 0..m {
                if s != t && s != p && open_overlap(&b, &doubled(&star[s])) {
                    bad = true;
                }
            }
            if bad {
                report.connector_violations += 1;
            }
        }
        Ok(report)
    }

    /// `level,index,lo…,side,parent` with `-1` as the root's parent.
    pub fn write_cubes_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.cubes[0].dim();
        let mut header = vec!["level".to_string(), "index".to_string()];
        header.extend((0..n).map(|k| format!("lo{k}")));
        header.extend(["side".to_string(), "parent".to_string()]);
        writeln!(out, "{}", header.join(","))?;
        for (t, q) in self.cubes.iter().enumerate() {
            let index: Vec<String> = q.index.iter().map(|i| i.to_string()).collect();
            let lo: Vec<String> = q.lo.iter().map(|x| format!("{x:e}")).collect();
            let parent = self.parent[t].map_or(-1, |p| p as i64);
            writeln!(out, "{},{},{},{:e},{}", q.level, index.join(";"), lo.join(","), q.side, parent)?;
        }
        Ok(())
    }
}
