//! Run configuration, domain specifications and the end-to-end pipeline
//! shared by the command-line front end and the test suites.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cusp::{CuspCover, CuspProfile};
use crate::error::{Error, Result};
use crate::grid::{read_grid_function_csv, AaBox, Ball, Grid, GridFunction, Region};
use crate::holder::{HolderBuild, HolderProfile};
use crate::local_div::StarRegion;
use crate::random;
use crate::solver::{box_solvers, solve_divergence, LocalSolver, Report, Solution, Weights};
use crate::tree::{verify_decomposition_bound, verify_t_bound, DecompositionResult, DomainTree, TreeNode, TreeOnGrid};
use crate::whitney::{dyadic_frame, whitney_m1, WhitneyBuild, WhitneyDomain};

/// Everything a run needs. Absent numeric fields take the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Whitney `max_level`, cusp truncation depth or Hölder piling levels.
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub residual_tolerance: Option<f64>,
    /// Directory that relative paths in the configuration resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

pub const DEFAULT_H: f64 = 1.0 / 64.0;
pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Whitney {
        shape: WhitneyShape,
        /// Boundary sample spacing; defaults to `h/2`.
        #[serde(default)]
        boundary_spacing: Option<f64>,
    },
    Cusp {
        profile: CuspProfileSpec,
        #[serde(default = "two")]
        dim: usize,
    },
    Holder {
        profile: HolderProfileSpec,
    },
    CustomTree {
        nodes: Vec<NodeSpec>,
        overlap: usize,
    },
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WhitneyShape {
    LShape,
    Polygon { vertices: Vec<[f64; 2]> },
    Disk { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspProfileSpec {
    #[serde(flatten)]
    pub kind: CuspKind,
    /// Declared `K₁`, `K₂`; override the defaults of analytic profiles.
    #[serde(default)]
    pub k1: Option<f64>,
    #[serde(default)]
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CuspKind {
    Power { gamma: f64, a: f64 },
    Exp { a: f64 },
    Oscillating { gamma: f64, a: f64 },
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HolderProfileSpec {
    PowerHump { alpha: f64, c: f64, l: f64 },
    Tabulated { xs: Vec<f64>, ys: Vec<f64>, alpha: f64, k_phi: f64, l: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub omega: RegionSpec,
    #[serde(default)]
    pub connector: Option<RegionSpec>,
    #[serde(default)]
    pub parent: Option<usize>,
    /// Ball the subdomain is star-shaped with respect to; needed unless
    /// `omega` is a single box or a ball.
    #[serde(default)]
    pub star_ball: Option<Ball>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Box(AaBox),
    Ball(Ball),
    Boxes(Vec<AaBox>),
}

impl RegionSpec {
    fn region(&self) -> Region {
        match self {
            RegionSpec::Box(b) => Region::boxed(b.clone()),
            RegionSpec::Ball(b) => Region::ball(b.clone()),
            RegionSpec::Boxes(bs) => Region::box_union(bs.clone()),
        }
    }
}

/// Right-hand side of the divergence problem.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Cellwise uniform on `[−1, 1]`, mean-subtracted on the mask.
    #[default]
    Random,
    Smooth {
        #[serde(default = "smooth_terms")]
        terms: usize,
        #[serde(default = "smooth_frequency")]
        max_frequency: u32,
    },
    /// `±1` on either side of the middle of the masked extent along `axis`,
    /// mean-subtracted.
    Sign {
        #[serde(default)]
        axis: usize,
    },
    /// Taken as given; a nonzero value has nonzero mean.
    Constant { value: f64 },
    /// Grid-function CSV as written by the `solve` command.
    File { path: PathBuf },
}

fn smooth_terms() -> usize {
    6
}

fn smooth_frequency() -> u32 {
    3
}

impl RunConfig {
    pub fn new(domain: DomainSpec) -> Self {
        Self {
            domain,
            h: None,
            p: None,
            kappa: None,
            depth: None,
            seed: None,
            data: DataSpec::Random,
            residual_tolerance: None,
            base_dir: None,
        }
    }

    /// Parses a domain file; errors name the offending field, line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::DomainFile(format!("line {} column {}, field `{path}`: {inner}", inner.line(), inner.column()))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::DomainFile(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(DEFAULT_H)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(DEFAULT_P)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(0.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.residual_tolerance.unwrap_or(DEFAULT_RESIDUAL_TOLERANCE)
    }

    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(match self.domain {
            DomainSpec::Whitney { .. } => 4,
            DomainSpec::Cusp { .. } => 6,
            DomainSpec::Holder { .. } => 30,
            DomainSpec::CustomTree { .. } => 0,
        })
    }

    pub fn family(&self) -> &'static str {
        match self.domain {
            DomainSpec::Whitney { .. } => "whitney",
            DomainSpec::Cusp { .. } => "cusp",
            DomainSpec::Holder { .. } => "holder",
            DomainSpec::CustomTree { .. } => "custom_tree",
        }
    }

    /// `p > 1`, `κ ≥ 0`, `h > 0`, tolerance positive.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must satisfy p > 1, got {p}")));
        }
        let kappa = self.kappa();
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must satisfy kappa >= 0, got {kappa}")));
        }
        let h = self.h();
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
        }
        let tol = self.residual_tolerance();
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("residual tolerance must be positive, got {tol}")));
        }
        Ok(())
    }

    /// The effective configuration with defaults filled in, as recorded in reports.
    pub fn resolved(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.h = Some(self.h());
        c.p = Some(self.p());
        c.kappa = Some(self.kappa());
        c.depth = Some(self.depth());
        c.seed = Some(self.seed());
        c.residual_tolerance = Some(self.residual_tolerance());
        serde_json::to_value(c).expect("config serializes")
    }
}

/// `h = scale · 2^{−k}` for some `k ≥ 0`.
fn check_dyadic(h: f64, scale: f64) -> Result<()> {
    let k = (scale / h).log2();
    if k < -1e-9 || (k - k.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("h = {h} must be {scale} times a power of two 2^-k")));
    }
    Ok(())
}

/// The family-specific construction behind a pipeline.
#[derive(Debug, Clone)]
pub enum FamilyBuild {
    Whitney(Box<WhitneyBuild>),
    Cusp(Box<CuspCover>),
    Holder(Box<HolderBuild>),
    Custom,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub family: FamilyBuild,
    pub tog: TreeOnGrid,
    pub truncated_cells: usize,
    pub weights: Weights,
    pub locals: Vec<LocalSolver>,
}

/// One row of the verification matrix.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Pipeline {
    pub fn build(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let h = config.h();
        let depth = config.depth();
        let kappa = config.kappa();
        let (family, tog, truncated_cells, weights, locals) = match &config.domain {
            DomainSpec::Whitney { shape, boundary_spacing } => {
                let spacing = boundary_spacing.unwrap_or(0.5 * h);
                let domain = match shape {
                    WhitneyShape::LShape => WhitneyDomain::l_shape(spacing)?,
                    WhitneyShape::Polygon { vertices } => WhitneyDomain::polygon(vertices, spacing)?,
                    WhitneyShape::Disk { center, radius } => WhitneyDomain::disk(*center, *radius, spacing)?,
                };
                let (_, scale) = dyadic_frame(&domain);
                check_dyadic(h, scale)?;
                let grid = Arc::new(Grid::covering(domain.region().bbox(), h)?);
                let level = u32::try_from(depth).map_err(|_| Error::InvalidParameter(format!("max_level {depth} is too large")))?;
                let build = WhitneyBuild::new(domain, grid, level)?;
                let tog = build.tog.clone();
                let weights = Weights { bar: Some(build.shadow_weight()), hat: None, m1_theory: Some(whitney_m1(tog.grid().dim())) };
                let locals = box_solvers(&tog)?;
                let truncated = build.truncated_cells;
                (FamilyBuild::Whitney(Box::new(build)), tog, truncated, weights, locals)
            }
            DomainSpec::Cusp { profile, dim } => {
                check_dyadic(h, 1.0)?;
                let mut prof = match &profile.kind {
                    CuspKind::Power { gamma, a } => CuspProfile::power(*gamma, *a)?,
                    CuspKind::Exp { a } => CuspProfile::exp_cusp(*a)?,
                    CuspKind::Oscillating { gamma, a } => CuspProfile::oscillating(*gamma, *a)?,
                    CuspKind::Tabulated { xs, ys } => CuspProfile::tabulated(
                        xs.clone(),
                        ys.clone(),
                        profile.k1.ok_or_else(|| Error::DomainFile("tabulated cusp profile needs k1".into()))?,
                        profile.k2.ok_or_else(|| Error::DomainFile("tabulated cusp profile needs k2".into()))?,
                    )?,
                };
                if profile.k1.is_some() || profile.k2.is_some() {
                    let (k1, k2) = (profile.k1.unwrap_or(prof.k1), profile.k2.unwrap_or(prof.k2));
                    prof = prof.with_constants(k1, k2);
                }
                let cover = CuspCover::new(prof, depth, *dim)?;
                let grid = Arc::new(cover.grid(h)?);
                let tog = cover.on_grid(grid.clone())?;
                let (bar, hat) = cover.varpi_weights(grid, tog.mask().clone(), kappa)?;
                let locals = (0..=cover.depth)
                    .map(|i| {
                        let s = cover.local_star(i);
                        LocalSolver { star: s.star, star_shaped: s.star_shaped }
                    })
                    .collect();
                let weights = Weights { bar: Some(bar), hat: Some(hat), m1_theory: None };
                (FamilyBuild::Cusp(Box::new(cover)), tog, 0, weights, locals)
            }
            DomainSpec::Holder { profile } => {
                let prof = match profile {
                    HolderProfileSpec::PowerHump { alpha, c, l } => HolderProfile::power_hump(*alpha, *c, *l)?,
                    HolderProfileSpec::Tabulated { xs, ys, alpha, k_phi, l } => {
                        HolderProfile::tabulated(xs.clone(), ys.clone(), *alpha, *k_phi, *l)?
                    }
                };
                let build = HolderBuild::new(prof, h, depth)?;
                let (bar, hat, _) = build.weights(kappa)?;
                let tog = build.tog.clone();
                let locals = box_solvers(&tog)?;
                let truncated = build.truncated_cells;
                let weights = Weights { bar: Some(bar), hat: Some(hat), m1_theory: None };
                (FamilyBuild::Holder(Box::new(build)), tog, truncated, weights, locals)
            }
            DomainSpec::CustomTree { nodes, overlap } => {
                check_dyadic(h, 1.0)?;
                let (tog, locals) = custom_tree(nodes, *overlap, h)?;
                (FamilyBuild::Custom, tog, 0, Weights::unweighted(), locals)
            }
        };
        Ok(Self { config, family, tog, truncated_cells, weights, locals })
    }

    /// The right-hand side named by the configuration.
    pub fn data(&self) -> Result<GridFunction> {
        let grid = self.tog.grid();
        let mask = self.tog.mask();
        let mut rng = random::rng(self.config.seed());
        Ok(match &self.config.data {
            DataSpec::Random => random::uniform_zero_mean(grid, mask, &mut rng),
            DataSpec::Smooth { terms, max_frequency } => random::smooth_zero_mean(grid, mask, &mut rng, *terms, *max_frequency),
            DataSpec::Sign { axis } => {
                if *axis >= grid.dim() {
                    return Err(Error::InvalidParameter(format!("sign axis {axis} exceeds dimension {}", grid.dim())));
                }
                let (lo, hi) = (0..grid.len()).filter(|&c| mask[c]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    let x = grid.center_vec(c)[*axis];
                    (lo.min(x), hi.max(x))
                });
                let mid = 0.5 * (lo + hi);
                let mut f = GridFunction::from_fn(grid.clone(), mask.clone(), |x| if x[*axis] < mid { 1.0 } else { -1.0 })?;
                f.subtract_mean();
                f
            }
            DataSpec::Constant { value } => GridFunction::from_fn(grid.clone(), mask.clone(), |_| *value)?,
            DataSpec::File { path } => {
                let path = match &self.config.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let file = std::fs::File::open(&path).map_err(|e| Error::DomainFile(format!("{}: {e}", path.display())))?;
                read_grid_function_csv(grid.clone(), mask.clone(), std::io::BufReader::new(file))?
            }
        })
    }

    pub fn decompose(&self, f: &GridFunction) -> Result<DecompositionResult> {
        self.tog.decompose(f)
    }

    pub fn solve(&self, f: &GridFunction) -> Result<(Solution, Report)> {
        let solution = solve_divergence(&self.tog, f, &self.weights, self.config.p(), &self.locals, self.config.residual_tolerance())?;
        let report = Report::new(self.config.resolved(), &self.tog, self.truncated_cells, &solution.report);
        Ok((solution, report))
    }

    /// Structural and analytic checks for the configured family.
    pub fn verify(&self) -> Result<Vec<Check>> {
        let p = self.config.p();
        let seed = self.config.seed();
        let mut rows = Vec::new();
        let cover = self.tog.validate();
        rows.push(Check {
            name: "cover",
            passed: cover.cover_ok(),
            detail: format!("cover counts {}..{} against N = {}", cover.min_cover, cover.max_cover, self.tog.tree().overlap_bound()),
        });
        rows.push(Check {
            name: "connectors",
            passed: cover.connectors_ok(),
            detail: "connectors nonempty, inside Ω_t ∩ Ω_parent and pairwise disjoint".into(),
        });
        let f = random::uniform_zero_mean(self.tog.grid(), self.tog.mask(), &mut random::rng(seed));
        let d = self.tog.decompose(&f)?;
        let l1 = f.l1_norm();
        let worst_mean =
            (0..self.tog.tree().len()).filter(|&t| t != self.tog.tree().root()).map(|t| d.integrals[t].abs()).fold(0.0, f64::max);
        let rebuilt = d.reconstruct(&self.tog)?;
        let worst_sum = f.values().iter().zip(rebuilt.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rows.push(Check {
            name: "zero_means",
            passed: worst_mean <= 1e-10 * l1 && worst_sum <= 1e-12 * scale,
            detail: format!("max |∫g_t| = {worst_mean:.3e}, max |Σg_t − f| = {worst_sum:.3e}"),
        });
        let t = verify_t_bound(&self.tog, p, 20, seed, None)?;
        rows.push(Check {
            name: "t_bound",
            passed: t.passed,
            detail: format!("worst ratio {:.4} against {:.4}", t.worst_ratio, t.bound.unwrap_or(f64::NAN)),
        });
        let c1 = verify_decomposition_bound(&self.tog, &f, Some(&d), p, None)?;
        rows.push(Check {
            name: "c1_bound",
            passed: c1.passed,
            detail: format!("ratio {:.4e} against C₁ = {:.4}", c1.ratio * c1.constant, c1.constant),
        });
        let non_star: Vec<usize> = self.locals.iter().enumerate().filter(|(_, l)| !l.star_shaped).map(|(t, _)| t).collect();
        rows.push(Check { name: "star_shape", passed: non_star.is_empty(), detail: format!("nodes failing the star test: {non_star:?}") });
        match &self.family {
            FamilyBuild::Whitney(build) => {
                let g = build.geometry()?;
                rows.push(Check {
                    name: "whitney_geometry",
                    passed: g.passed(),
                    detail: format!(
                        "{} cubes, dist/diam in [{:.3}, {:.3}], cover {} ≤ {}, connector violations {}",
                        g.cubes, g.min_distance_ratio, g.max_distance_ratio, g.max_cover, g.cover_bound, g.connector_cell_violations
                    ),
                });
            }
            FamilyBuild::Cusp(cover) => {
                let c = cover.comparability();
                rows.push(Check {
                    name: "cusp_comparability",
                    passed: c.violations == 0,
                    detail: format!("identity error {:.3e}, violations {}", c.identity_error, c.violations),
                });
            }
            FamilyBuild::Holder(build) => {
                let g = build.geometry();
                rows.push(Check {
                    name: "disjointness",
                    passed: g.cube_overlaps == 0 && g.omega_overlaps == 0 && g.monotonicity_violations == 0,
                    detail: format!(
                        "cube overlaps {}, Ω overlaps {}, monotonicity {}",
                        g.cube_overlaps, g.omega_overlaps, g.monotonicity_violations
                    ),
                });
                rows.push(Check {
                    name: "d_g_bracket",
                    passed: g.distance_violations == 0,
                    detail: format!(
                        "d_G/l_t in [{:.3}, {:.3}] against [1, {:.3}]",
                        g.min_distance_ratio, g.max_distance_ratio, g.distance_constant
                    ),
                });
            }
            FamilyBuild::Custom => {}
        }
        Ok(rows)
    }
}

fn custom_tree(nodes: &[NodeSpec], overlap: usize, h: f64) -> Result<(TreeOnGrid, Vec<LocalSolver>)> {
    let tree_nodes: Vec<TreeNode> = nodes
        .iter()
        .map(|n| TreeNode { omega: n.omega.region(), connector: n.connector.as_ref().map(RegionSpec::region), parent: n.parent })
        .collect();
    let tree = DomainTree::new(tree_nodes, overlap)?;
    let bbox = tree.nodes().iter().map(|n| n.omega.bbox().clone()).reduce(|a, b| a.union_bbox(&b)).expect("tree has nodes");
    let grid = Arc::new(Grid::covering(&bbox, h)?);
    let mut mask = vec![false; grid.len()];
    for node in tree.nodes() {
        for c in node.omega.cells(&grid).iter() {
            mask[c] = true;
        }
    }
    let tog = TreeOnGrid::new(Arc::new(tree), grid.clone(), Arc::new(mask))?;
    tog.require_structure()?;
    let locals = nodes
        .iter()
        .enumerate()
        .map(|(t, n)| {
            let star = match (&n.star_ball, &n.omega) {
                (Some(ball), omega) => StarRegion::new(omega.region(), ball.clone())?,
                (None, RegionSpec::Box(b)) => StarRegion::from_box(b)?,
                (None, RegionSpec::Ball(b)) => StarRegion::new(Region::ball(b.clone()), Ball::new(b.center.clone(), 0.5 * b.radius))?,
                (None, RegionSpec::Boxes(_)) => {
                    return Err(Error::DomainFile(format!("node {t}: a union of boxes needs `star_ball`")));
                }
            };
            let star_shaped = n.star_ball.is_none() || star.star_test_on_grid(&grid, 4096).passed();
            Ok(LocalSolver { star, star_shaped })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tog, locals))
}
