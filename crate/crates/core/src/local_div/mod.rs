//! Local right inverses of the divergence: a Bogovskii-type integral
//! operator on star-shaped regions and the affine (Piola) transfer.

mod affine;
mod bogovskii;
mod star;

pub use affine::{affine_transfer, matrix_p_norm, AffineConditioning, AffineMap};
pub use bogovskii::{bogovskii_solve, solve_on_box, BogovskiiSolver, FaceFlux, FluxSolution, MAX_LOCAL_CELLS, MEAN_TOLERANCE};
pub use star::{sphere_area, sphere_directions, unit_ball_volume, StarRegion, StarTest};
