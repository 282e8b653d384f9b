//! Initial-data presets.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::{random_field, GridSpec, VectorField};
use crate::mollify::mollify_space;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Datum {
    Zero,
    /// `prod_k sin(pi x_k / L_k)` along the diagonal direction `(1, .., 1) / sqrt(d)`.
    Bump,
    /// Indicator of the middle half of the box along the diagonal, mollified at `4h`.
    Box,
    /// Seeded uniform noise mollified at `4h`.
    RandomSmooth,
}

impl Datum {
    pub fn build(self, grid: &GridSpec, amplitude: f64, seed: u64) -> VectorField {
        let d = grid.dim();
        let diag = amplitude / (d as f64).sqrt();
        let extents = grid.extents().to_vec();
        let radius = 4.0 * grid.min_spacing();
        match self {
            Datum::Zero => VectorField::zeros(grid),
            Datum::Bump => VectorField::from_fn(grid, |x, out| {
                let s: f64 = (0..d).map(|k| (PI * x[k] / extents[k]).sin()).product();
                out.iter_mut().for_each(|o| *o = diag * s);
            }),
            Datum::Box => {
                let raw = VectorField::from_fn(grid, |x, out| {
                    let inside = (0..d).all(|k| {
                        let r = x[k] / extents[k];
                        (0.25..=0.75).contains(&r)
                    });
                    if inside {
                        out.iter_mut().for_each(|o| *o = diag);
                    }
                });
                mollify_space(&raw, radius).expect("positive radius")
            }
            Datum::RandomSmooth => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw = random_field(grid, &mut rng).scaled(amplitude);
                mollify_space(&raw, radius).expect("positive radius")
            }
        }
    }
}
