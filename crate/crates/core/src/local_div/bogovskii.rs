use std::sync::Arc;

use rayon::prelude::*;

use super::star::{sphere_directions, unit_ball_volume, StarRegion};
use crate::error::{Error, Result};
use crate::grid::{face_index, CellSet, Grid, GridFunction, LocalField, Region};
use crate::numerics::{gauss_legendre, Accumulator};

/// Largest number of cells one local solve accepts.
pub const MAX_LOCAL_CELLS: usize = 1 << 14;

/// Relative tolerance on `|∫f| / ‖f‖₁` accepted as zero mean.
pub const MEAN_TOLERANCE: f64 = 1e-10;

/// Discretized Bogovskii operator on a star region:
/// `u(x) = Σ_y f(y) N(x,y) hⁿ` with
/// `N(x,y) = (x−y)/|x−y|ⁿ ∫_{|x−y|}^∞ θ(y + r(x−y)/|x−y|) r^{n−1} dr`
/// and `θ ∝ (1 − |z−c|²/ρ²)⁴` on the ball.
#[derive(Debug, Clone)]
pub struct BogovskiiSolver {
    grid: Arc<Grid>,
    star: StarRegion,
    cells: CellSet,
    centers: Vec<f64>,
    /// Normalization of θ divided by ρ⁸.
    theta_scale: f64,
    /// Per-cell `r₀ Σ_e e A_x(e) dσ`, the surrogate for the singular cell.
    self_term: Vec<f64>,
    quadrature: (Vec<f64>, Vec<f64>),
}

impl BogovskiiSolver {
    pub fn new(star: StarRegion, grid: Arc<Grid>) -> Result<Self> {
        Self::with_cap(star, grid, MAX_LOCAL_CELLS)
    }

    pub fn with_cap(star: StarRegion, grid: Arc<Grid>, max_cells: usize) -> Result<Self> {
        let n = grid.dim();
        if star.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: star.dim() });
        }
        star.check_containment(&grid)?;
        let cells = star.region.cells(&grid);
        if cells.len() > max_cells {
            return Err(Error::InvalidParameter(format!(
                "local solve over {} cells exceeds the cap of {max_cells}; use a coarser grid for this subdomain",
                cells.len()
            )));
        }
        let rho = star.ball.radius;
        let mut bump = Accumulator::new();
        let mut z = vec![0.0; n];
        for c in Region::ball(star.ball.clone()).cells(&grid).iter() {
            grid.center(c, &mut z);
            let r2: f64 = z.iter().zip(&star.ball.center).map(|(a, b)| (a - b) * (a - b)).sum();
            bump.add((1.0 - r2 / (rho * rho)).max(0.0).powi(4));
        }
        let theta_scale = 1.0 / (bump.value() * grid.cell_measure() * rho.powi(8));
        let mut centers = Vec::with_capacity(cells.len() * n);
        for c in cells.iter() {
            centers.extend(grid.center_vec(c));
        }
        let order = (8 + n).div_ceil(2);
        let mut solver = Self { grid, star, cells, centers, theta_scale, self_term: Vec::new(), quadrature: gauss_legendre(order) };
        solver.self_term = solver.compute_self_term();
        Ok(solver)
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn star(&self) -> &StarRegion {
        &self.star
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn compute_self_term(&self) -> Vec<f64> {
        let n = self.grid.dim();
        let r0 = (self.grid.cell_measure() / unit_ball_volume(n)).powf(1.0 / n as f64);
        let dirs = sphere_directions(n, 16);
        let mut out = vec![0.0; self.centers.len()];
        for (i, x) in self.centers.chunks(n).enumerate() {
            for (e, w) in &dirs {
                let a = self.radial(x, e, 0.0);
                for k in 0..n {
                    out[i * n + k] += r0 * e[k] * a * w;
                }
            }
        }
        out
    }

    /// `∫_{d0}^∞ θ(y + r e) r^{n−1} dr` for a unit vector `e`.
    fn radial(&self, y: &[f64], e: &[f64], d0: f64) -> f64 {
        let n = y.len();
        let c = &self.star.ball.center;
        let rho = self.star.ball.radius;
        let (mut q, mut b) = (0.0, 0.0);
        for k in 0..n {
            let yc = y[k] - c[k];
            q += yc * yc;
            b += e[k] * yc;
        }
        // With s = r + b: |y + r e − c|² = s² + q − b², so θ ∝ (D − s²)⁴.
        let d = rho * rho - q + b * b;
        if d <= 0.0 {
            return 0.0;
        }
        let hi = d.sqrt();
        let lo = (d0 + b).max(-hi);
        if lo >= hi {
            return 0.0;
        }
        let value = match n {
            1 => quartic_primitive(d, hi) - quartic_primitive(d, lo),
            2 => {
                let prim = |s: f64| -(d - s * s).powi(5) / 10.0 - b * quartic_primitive(d, s);
                prim(hi) - prim(lo)
            }
            _ => {
                let (nodes, weights) = &self.quadrature;
                let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(t, w)| {
                        let s = mid + half * t;
                        w * (s - b).powi(n as i32 - 1) * (d - s * s).powi(4)
                    })
                    .sum::<f64>()
                    * half
            }
        };
        value * self.theta_scale
    }

    /// `∫_cell N(x, y) dy` for the cell centered at `yc`, as a signed sum over
    /// the pyramids joining `x` to each cell face. In the coordinates
    /// `y = x + t(P − x)`, `P` on a face, the Jacobian `t^{n−1}` cancels the
    /// kernel singularity, so `x` may lie on the cell boundary.
    fn add_cell_pyramids(&self, x: &[f64], yc: &[f64], rule: &PyramidRule, out: &mut [f64]) {
        let n = x.len();
        let half = 0.5 * self.grid.h();
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut e = vec![0.0; n];
        for axis in 0..n {
            for side in [-1.0, 1.0] {
                let d = side * (yc[axis] + side * half - x[axis]);
                if d.abs() < 1e-14 * half {
                    continue;
                }
                for (s, ws) in &rule.face {
                    let mut j = 0;
                    for k in 0..n {
                        p[k] = if k == axis {
                            yc[k] + side * half
                        } else {
                            j += 1;
                            yc[k] + half * s[j - 1]
                        };
                    }
                    let mut len2 = 0.0;
                    for k in 0..n {
                        e[k] = p[k] - x[k];
                        len2 += e[k] * e[k];
                    }
                    let len = len2.sqrt();
                    for v in e.iter_mut() {
                        *v /= -len;
                    }
                    let mut radial = 0.0;
                    for (t, wt) in &rule.depth {
                        for k in 0..n {
                            y[k] = x[k] - t * len * e[k];
                        }
                        radial += wt * self.radial(&y, &e, t * len);
                    }
                    // −(P − x)/|P − x|ⁿ · d · face area element.
                    let scale = ws * radial * d * (2.0 * half).powi(n as i32 - 1) / len.powi(n as i32 - 1);
                    for k in 0..n {
                        out[k] += scale * e[k];
                    }
                }
            }
        }
    }

    /// `N(x, y) hⁿ` accumulated into `out` with weight `fy`; `e` is scratch.
    #[inline]
    fn add_kernel(&self, x: &[f64], y: &[f64], weight: f64, e: &mut [f64], out: &mut [f64]) {
        let n = x.len();
        let mut d2 = 0.0;
        for k in 0..n {
            e[k] = x[k] - y[k];
            d2 += e[k] * e[k];
        }
        let dist = d2.sqrt();
        for v in e.iter_mut() {
            *v /= dist;
        }
        let radial = self.radial(y, e, dist);
        if radial == 0.0 {
            return;
        }
        let scale = weight * radial / dist.powi(n as i32 - 1);
        for k in 0..n {
            out[k] += scale * e[k];
        }
    }

    /// Source weights per region cell, `m` per row.
    fn source_weights(&self, fs: &[LocalField]) -> Result<Vec<f64>> {
        let m = fs.len();
        let dv = self.grid.cell_measure();
        let mut weights = vec![0.0; self.cells.len() * m];
        for (r, f) in fs.iter().enumerate() {
            if f.components != 1 {
                return Err(Error::DimensionMismatch { expected: 1, found: f.components });
            }
            let mean = f.integral(dv)[0];
            let l1 = f.l1_norm(dv);
            if mean.abs() > MEAN_TOLERANCE * l1 {
                return Err(Error::MeanViolation { mean: mean.abs(), tol: MEAN_TOLERANCE * l1 });
            }
            for (i, c) in f.cells.iter().enumerate() {
                let v = f.values[i];
                if v == 0.0 {
                    continue;
                }
                match self.cells.position(c) {
                    Some(j) => weights[j * m + r] = v,
                    None => return Err(Error::Containment(format!("f is nonzero at cell {c}, outside the region"))),
                }
            }
        }
        Ok(weights)
    }

    fn sources(&self, weights: &[f64], m: usize) -> Vec<usize> {
        (0..self.cells.len()).filter(|&j| weights[j * m..(j + 1) * m].iter().any(|w| *w != 0.0)).collect()
    }

    /// `Σ_y w(y) N(x, y) hⁿ` for every right-hand side, `n` values per side.
    /// `self_cell` marks `x` as the center of that region cell.
    fn accumulate(&self, x: &[f64], self_cell: Option<usize>, sources: &[usize], weights: &[f64], m: usize) -> Vec<f64> {
        let n = self.grid.dim();
        let h = self.grid.h();
        let dv = self.grid.cell_measure();
        let near2 = (NEAR_FIELD_CELLS * h) * (NEAR_FIELD_CELLS * h);
        let touch2 = TOUCH_CELLS * TOUCH_CELLS * h * h;
        let sub = subcell_offsets(n, h, 4);
        let pyramids = PyramidRule::new(n, 4, 8);
        let mut acc = vec![0.0; n * m];
        let mut kernel = vec![0.0; n];
        let mut e = vec![0.0; n];
        let mut yq = vec![0.0; n];
        let centers = &self.centers;
        for &j in sources {
            let w = &weights[j * m..(j + 1) * m];
            kernel.iter_mut().for_each(|v| *v = 0.0);
            if self_cell == Some(j) {
                kernel.copy_from_slice(&self.self_term[j * n..(j + 1) * n]);
            } else {
                let y = &centers[j * n..(j + 1) * n];
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                // Face points lie on the boundary of the touching source cells.
                if self_cell.is_none() && d2 < touch2 {
                    self.add_cell_pyramids(x, y, &pyramids, &mut kernel);
                } else if d2 < near2 {
                    let qw = dv / sub.len() as f64;
                    for off in &sub {
                        for k in 0..n {
                            yq[k] = y[k] + off[k];
                        }
                        self.add_kernel(x, &yq, qw, &mut e, &mut kernel);
                    }
                } else {
                    self.add_kernel(x, y, dv, &mut e, &mut kernel);
                }
            }
            for (r, wr) in w.iter().enumerate() {
                if *wr != 0.0 {
                    for k in 0..n {
                        acc[r * n + k] += wr * kernel[k];
                    }
                }
            }
        }
        acc
    }

    /// Interior faces of the region as `(cell, axis, lower neighbor)`: the
    /// lower face of `cell` along `axis`, shared with a region cell.
    fn interior_faces(&self) -> Vec<(usize, usize, usize)> {
        let n = self.grid.dim();
        let mut out = Vec::with_capacity(self.cells.len() * n);
        for (i, c) in self.cells.iter().enumerate() {
            for k in 0..n {
                if let Some(j) = self.grid.neighbor(c, k, false).and_then(|nb| self.cells.position(nb)) {
                    out.push((i, k, j));
                }
            }
        }
        out
    }

    /// Face-averaged normal velocity on each interior face, one value per face
    /// and right-hand side.
    fn face_values(&self, faces: &[(usize, usize, usize)], weights: &[f64], m: usize) -> Vec<f64> {
        let n = self.grid.dim();
        let h = self.grid.h();
        let sources = self.sources(weights, m);
        faces
            .par_iter()
            .flat_map_iter(|&(i, k, _)| {
                let mut x = self.centers[i * n..(i + 1) * n].to_vec();
                x[k] -= 0.5 * h;
                let band2 = (FACE_BAND_CELLS * h) * (FACE_BAND_CELLS * h);
                let (near, far): (Vec<usize>, Vec<usize>) = sources.iter().partition(|&&j| {
                    let y = &self.centers[j * n..(j + 1) * n];
                    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < band2
                });
                let acc = self.accumulate(&x, None, &far, weights, m);
                let mut mean: Vec<f64> = (0..m).map(|r| acc[r * n + k]).collect();
                let mut xq = x.clone();
                for (off, w) in face_rule(n, k, h) {
                    for a in 0..n {
                        xq[a] = x[a] + off[a];
                    }
                    let acc = self.accumulate(&xq, None, &near, weights, m);
                    for r in 0..m {
                        mean[r] += w * acc[r * n + k];
                    }
                }
                mean
            })
            .collect()
    }

    /// Solves `div u = f` with `u` at cell centers and as normal fluxes on
    /// faces. Boundary faces carry zero flux, so the flux balance of each
    /// cell sums to `∫f`. The flux residual is reduced by defect correction
    /// until it is at most `tolerance` relative to `f`, or `max_steps`
    /// corrections have been made.
    pub fn solve_flux(&self, f: &LocalField, tolerance: f64, max_steps: usize) -> Result<FluxSolution> {
        Ok(self.solve_flux_many(std::slice::from_ref(f), tolerance, max_steps)?.pop().expect("one input"))
    }

    /// [`Self::solve_flux`] for several right-hand sides sharing each kernel pass.
    pub fn solve_flux_many(&self, fs: &[LocalField], tolerance: f64, max_steps: usize) -> Result<Vec<FluxSolution>> {
        let n = self.grid.dim();
        let h = self.grid.h();
        let m = fs.len();
        let len = self.cells.len();
        let faces = self.interior_faces();
        let target = self.source_weights(fs)?;
        let norms: Vec<f64> = (0..m).map(|r| (0..len).map(|i| target[i * m + r].powi(2)).sum::<f64>().sqrt()).collect();
        let mut rhs = target.clone();
        let mut centers = vec![0.0; len * n * m];
        let mut flux = vec![0.0; faces.len() * m];
        let mut residual = vec![0.0; m];
        let mut steps = vec![0; m];
        let mut active: Vec<bool> = norms.iter().map(|&v| v > 0.0).collect();
        while active.iter().any(|a| *a) {
            let sources = self.sources(&rhs, m);
            let c: Vec<f64> = (0..len)
                .into_par_iter()
                .flat_map_iter(|i| self.accumulate(&self.centers[i * n..(i + 1) * n], Some(i), &sources, &rhs, m))
                .collect();
            let fl = self.face_values(&faces, &rhs, m);
            centers.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            flux.iter_mut().zip(&fl).for_each(|(a, b)| *a += b);
            let mut r: Vec<f64> = target.iter().map(|g| -g).collect();
            for (e, &(i, _, j)) in faces.iter().enumerate() {
                for q in 0..m {
                    let v = flux[e * m + q] / h;
                    r[i * m + q] -= v;
                    r[j * m + q] += v;
                }
            }
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..m {
                if !active[q] {
                    continue;
                }
                residual[q] = (0..len).map(|i| r[i * m + q].powi(2)).sum::<f64>().sqrt() / norms[q];
                if residual[q] <= tolerance || steps[q] == max_steps {
                    active[q] = false;
                    continue;
                }
                steps[q] += 1;
                let mean = (0..len).map(|i| r[i * m + q]).sum::<f64>() / len as f64;
                for i in 0..len {
                    rhs[i * m + q] = mean - r[i * m + q];
                }
            }
        }
        let mut multi = vec![0; n];
        let ids: Vec<(usize, usize)> = faces
            .iter()
            .map(|&(i, k, _)| {
                self.grid.multi_index(self.cells.as_slice()[i], &mut multi);
                (k, face_index(&self.grid, &multi, k, false))
            })
            .collect();
        Ok((0..m)
            .map(|q| {
                let mut lists = vec![Vec::new(); n];
                for (e, &(k, id)) in ids.iter().enumerate() {
                    lists[k].push((id, flux[e * m + q]));
                }
                let mut values = Vec::with_capacity(len * n);
                for i in 0..len {
                    values.extend_from_slice(&centers[i * n * m + q * n..i * n * m + (q + 1) * n]);
                }
                FluxSolution {
                    u: LocalField { cells: self.cells.clone(), components: n, values },
                    flux: FaceFlux { faces: lists },
                    residual: residual[q],
                    steps: steps[q],
                }
            })
            .collect())
    }

    /// Solves `div u = f` for `f` supported in the region with zero mean.
    /// Returns `u` on the region cells.
    pub fn solve(&self, f: &LocalField) -> Result<LocalField> {
        Ok(self.solve_many(std::slice::from_ref(f))?.pop().expect("one input"))
    }

    /// Solves for several right-hand sides in one pass over the kernel.
    pub fn solve_many(&self, fs: &[LocalField]) -> Result<Vec<LocalField>> {
        let n = self.grid.dim();
        let m = fs.len();
        let weights = self.source_weights(fs)?;
        let sources = self.sources(&weights, m);
        let values: Vec<f64> = (0..self.cells.len())
            .into_par_iter()
            .flat_map_iter(|i| self.accumulate(&self.centers[i * n..(i + 1) * n], Some(i), &sources, &weights, m))
            .collect();
        let cells_len = self.cells.len();
        Ok((0..m)
            .map(|r| {
                let mut vals = Vec::with_capacity(cells_len * n);
                for i in 0..cells_len {
                    vals.extend_from_slice(&values[i * n * m + r * n..i * n * m + (r + 1) * n]);
                }
                LocalField { cells: self.cells.clone(), components: n, values: vals }
            })
            .collect())
    }
}

/// Source cells closer than this many cell widths are integrated with
/// subcell points.
const NEAR_FIELD_CELLS: f64 = 2.5;

/// Midpoints of a `perⁿ` subdivision of a cell, relative to its center.
fn subcell_offsets(n: usize, h: f64, per: usize) -> Vec<Vec<f64>> {
    let ticks: Vec<f64> = (0..per).map(|a| ((a as f64 + 0.5) / per as f64 - 0.5) * h).collect();
    let total = per.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        out.push(
            (0..n)
                .map(|_| {
                    let t = ticks[code % per];
                    code /= per;
                    t
                })
                .collect(),
        );
    }
    out
}

/// Offsets from a face center and weights summing to one for the face normal
/// to `axis`.
fn face_rule(n: usize, axis: usize, h: f64) -> Vec<(Vec<f64>, f64)> {
    let (nodes, weights) = gauss_legendre(if n == 2 { 3 } else { 2 });
    let q = nodes.len();
    let total = q.pow(n as u32 - 1);
    (0..total)
        .map(|mut code| {
            let mut off = vec![0.0; n];
            let mut w = 1.0;
            for (a, o) in off.iter_mut().enumerate() {
                if a != axis {
                    *o = 0.5 * h * nodes[code % q];
                    w *= 0.5 * weights[code % q];
                    code /= q;
                }
            }
            (off, w)
        })
        .collect()
}

/// Gauss rule on `[0, 1]` along pyramid rays and on `[−1, 1]^{n−1}` over a
/// face, weights normalized to the unit interval and unit face.
#[derive(Debug, Clone)]
struct PyramidRule {
    depth: Vec<(f64, f64)>,
    face: Vec<(Vec<f64>, f64)>,
}

impl PyramidRule {
    fn new(n: usize, depth_order: usize, face_order: usize) -> Self {
        let (tn, tw) = gauss_legendre(depth_order);
        let depth = tn.iter().zip(&tw).map(|(t, w)| (0.5 * (t + 1.0), 0.5 * w)).collect();
        let (sn, sw) = gauss_legendre(face_order);
        let q = sn.len();
        let face = (0..q.pow(n as u32 - 1))
            .map(|mut code| {
                let mut pt = Vec::with_capacity(n - 1);
                let mut w = 1.0;
                for _ in 0..n - 1 {
                    pt.push(sn[code % q]);
                    w *= 0.5 * sw[code % q];
                    code /= q;
                }
                (pt, w)
            })
            .collect();
        Self { depth, face }
    }
}

/// Sources within this many cells of a face center are averaged over the
/// face; farther ones use the face center alone.
const FACE_BAND_CELLS: f64 = 4.0;
/// Source cells whose centers lie within this many widths of a face point
/// touch it and are integrated with the pyramid rule.
const TOUCH_CELLS: f64 = 1.01;

/// Output of [`BogovskiiSolver::solve_flux`].
#[derive(Debug, Clone)]
pub struct FluxSolution {
    pub u: LocalField,
    pub flux: FaceFlux,
    /// `‖Σ_faces flux − f‖₂ / ‖f‖₂` over the region cells.
    pub residual: f64,
    /// Defect corrections applied.
    pub steps: usize,
}

/// Normal velocity on faces, one list of `(face index, value)` per axis.
#[derive(Debug, Clone, Default)]
pub struct FaceFlux {
    pub faces: Vec<Vec<(usize, f64)>>,
}

/// `∫ (D − s²)⁴ ds`.
fn quartic_primitive(d: f64, s: f64) -> f64 {
    let s2 = s * s;
    s * (d.powi(4) - s2 * (4.0 / 3.0 * d.powi(3) - s2 * (6.0 / 5.0 * d * d - s2 * (4.0 / 7.0 * d - s2 / 9.0))))
}

/// Solves on a whole grid function whose mask and support lie in the region.
pub fn bogovskii_solve(f: &GridFunction, star: &StarRegion) -> Result<GridFunction> {
    let solver = BogovskiiSolver::new(star.clone(), f.grid().clone())?;
    let outside = f.masked_cells().find(|&c| f.value(c)[0] != 0.0 && !solver.cells.contains(c));
    if let Some(c) = outside {
        return Err(Error::Containment(format!("f is nonzero at cell {c}, outside the region")));
    }
    let u = solver.solve(&f.restrict(&solver.cells))?;
    u.to_grid_function(f.grid().clone(), f.mask().clone())
}

/// Solves on a box with its inscribed ball.
pub fn solve_on_box(f: &GridFunction, b: &crate::grid::AaBox) -> Result<GridFunction> {
    bogovskii_solve(f, &StarRegion::from_box(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FaceField;
    use crate::grid::{divergence_fd, AaBox, Ball};

    #[test]
    fn quartic_primitive_matches_quadrature() {
        let (x, w) = gauss_legendre(8);
        let (d, a, b) = (0.7, -0.3, 0.6);
        let q: f64 =
            x.iter().zip(&w).map(|(t, w)| w * (d - (0.5 * (a + b) + 0.5 * (b - a) * t).powi(2)).powi(4)).sum::<f64>() * 0.5 * (b - a);
        assert!((quartic_primitive(d, b) - quartic_primitive(d, a) - q).abs() < 1e-14);
    }

    #[test]
    fn closed_form_radial_agrees_with_quadrature() {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), 1.0 / 16.0).unwrap());
        let star = StarRegion::new(Region::boxed(AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])), Ball::new(vec![0.5, 0.5], 0.4)).unwrap();
        let solver = BogovskiiSolver::new(star, grid).unwrap();
        let (nodes, weights) = gauss_legendre(64);
        for (y, e, d0) in [([0.1, 0.2], [0.6, 0.8], 0.05), ([0.5, 0.45], [-1.0, 0.0], 0.0), ([0.9, 0.9], [-0.8, -0.6], 0.3)] {
            // Direct quadrature of θ(y + r e) r over r ∈ [d0, 2].
            let (lo, hi) = (d0, 2.0);
            let direct: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| {
                    let r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
                    let z = [y[0] + r * e[0] - 0.5, y[1] + r * e[1] - 0.5];
                    let v = (0.16 - z[0] * z[0] - z[1] * z[1]).max(0.0);
                    w * v.powi(4) * r
                })
                .sum::<f64>()
                * 0.5
                * (hi - lo)
                * solver.theta_scale;
            let closed = solver.radial(&y, &e, d0);
            assert!((closed - direct).abs() < 1e-3 * direct.abs().max(1e-12), "{closed} vs {direct}");
        }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), 1.0 / 16.0).unwrap());
        let f = GridFunction::zeros(grid.clone(), Arc::new(vec![true; grid.len()]), 1).unwrap();
        let u = solve_on_box(&f, &AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), 1.0 / 8.0).unwrap());
        let f = GridFunction::from_fn(grid, Arc::new(vec![true; 64]), |_| 1.0).unwrap();
        let err = solve_on_box(&f, &AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::MeanViolation { .. }));
    }

    #[test]
    fn sign_pattern_residual() {
        let h = 1.0 / 32.0;
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), h).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        let f = GridFunction::from_fn(grid, mask, |x| if x[0] < 0.5 { 1.0 } else { -1.0 }).unwrap();
        let star = StarRegion::new(Region::boxed(AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])), Ball::new(vec![0.5, 0.5], 0.4)).unwrap();
        let u = bogovskii_solve(&f, &star).unwrap();
        let div = divergence_fd(&u).unwrap();
        let err: f64 = div.values().iter().zip(f.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 0.25, "relative residual {}", err / norm);
    }

    fn flux_residual(h: f64, steps: usize, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), h).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        let mut f = GridFunction::from_fn(grid.clone(), mask.clone(), |x| f(x)).unwrap();
        let mean = f.values().iter().sum::<f64>() / grid.len() as f64;
        f.values_mut().iter_mut().for_each(|v| *v -= mean);
        let star = StarRegion::new(Region::boxed(AaBox::new(vec![0.0, 0.0], vec![1.0, 1.0])), Ball::new(vec![0.5, 0.5], 0.4)).unwrap();
        let solver = BogovskiiSolver::new(star, grid.clone()).unwrap();
        let sol = solver.solve_flux(&f.restrict(&solver.cells), 0.0, steps).unwrap();
        let mut field = FaceField::zeros(grid);
        for (k, faces) in sol.flux.faces.iter().enumerate() {
            field.add(k, faces);
        }
        let div = field.divergence(mask).unwrap();
        let err: f64 = div.values().iter().zip(f.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        (err / norm, sol.residual)
    }

    type Profile = fn(&[f64]) -> f64;

    #[test]
    fn face_flux_residual_on_jumps() {
        let cases: [(&str, Profile); 3] = [
            ("sign", |x| if x[0] < 0.5 { 1.0 } else { -1.0 }),
            ("spike", |x| if x[0] > 0.25 && x[0] < 0.3125 { 1.0 } else { 0.0 }),
            ("checker", |x| if ((x[0] * 32.0) as i64 + (x[1] * 32.0) as i64) % 2 == 0 { 1.0 } else { -1.0 }),
        ];
        for (name, f) in cases {
            let mut last = f64::INFINITY;
            for steps in 0..3 {
                let (global, local) = flux_residual(1.0 / 32.0, steps, f);
                assert!((global - local).abs() <= 1e-10, "{name}: {global} vs {local}");
                assert!(global < 0.05 * 0.1f64.powi(steps as i32), "{name} after {steps} steps: {global}");
                assert!(global < last);
                last = global;
            }
        }
    }
}
