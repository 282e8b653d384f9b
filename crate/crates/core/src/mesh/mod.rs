//! Structured box grids, node fields, the forward-gradient / backward-divergence
//! pair, and discrete norms.

mod field;
mod grid;
pub mod io;
mod norm;

#[cfg(test)]
pub(crate) use field::divergence_add;
pub use field::{
    divergence, gradient, inner, inner_gradient, GradientField, Trajectory, VectorField,
};
pub(crate) use field::{dot, gradient_into, same_grid};
pub use grid::{GridSpec, GHOST};
pub use norm::{linf, pointwise_magnitudes, NormKind, Normed};

use rand::Rng;

/// Field with i.i.d. entries uniform in `[-1, 1)`.
pub fn random_field<R: Rng>(grid: &GridSpec, rng: &mut R) -> VectorField {
    let n = grid.node_count() * grid.dim();
    let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    VectorField::from_values(grid, values).expect("finite random values")
}

/// Gradient field with i.i.d. entries uniform in `[-1, 1)`.
pub fn random_gradient_field<R: Rng>(grid: &GridSpec, rng: &mut R) -> GradientField {
    let d = grid.dim();
    let n = grid.point_count() * d * d;
    let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GradientField::from_values(grid, values).expect("finite random values")
}
