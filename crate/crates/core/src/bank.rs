//! Seeded test-function banks for weak probes, Minty gaps, certificates and
//! the negative-Sobolev duality proxy.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::{random_field, GridSpec, NormKind, Normed, VectorField};
use crate::mollify::mollify_with;
use crate::mollify::Kernel;

const MODES: [[usize; 3]; 8] = [
    [1, 1, 1],
    [1, 2, 1],
    [2, 1, 2],
    [2, 2, 1],
    [1, 3, 2],
    [3, 1, 1],
    [2, 3, 3],
    [3, 2, 2],
];

/// `count` tensor-product sine fields; field `j` lives in component `j mod d`.
pub fn sine_bank(grid: &GridSpec, count: usize) -> Vec<VectorField> {
    let d = grid.dim();
    let extents = grid.extents().to_vec();
    (0..count)
        .map(|j| {
            let modes = MODES[j % MODES.len()];
            let boost = 1 + j / MODES.len();
            VectorField::from_fn(grid, |x, out| {
                let mut s = 1.0;
                for k in 0..d {
                    s *= (PI * (modes[k] * boost) as f64 * x[k] / extents[k]).sin();
                }
                out[j % d] = s;
            })
        })
        .collect()
}

/// `count` seeded noise fields mollified at `2h, 4h, 8h, ...` (cycling).
pub fn random_smooth_bank(grid: &GridSpec, count: usize, seed: u64) -> Vec<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = grid.min_spacing();
    (0..count)
        .map(|j| {
            let raw = random_field(grid, &mut rng);
            let radius = h * (2u32 << (j % 4)) as f64;
            let kernel = Kernel::new(grid, radius).expect("positive radius");
            mollify_with(&raw, &kernel)
        })
        .collect()
}

/// 8 sine fields followed by 4 mollified random fields.
pub fn test_bank(grid: &GridSpec, seed: u64) -> Vec<VectorField> {
    let mut bank = sine_bank(grid, 8);
    bank.extend(random_smooth_bank(grid, 4, seed));
    bank
}

/// Rescale every field to unit `W^{1,2}_0` seminorm; zero fields are dropped.
pub fn normalized_h1(bank: Vec<VectorField>) -> Vec<VectorField> {
    bank.into_iter()
        .filter_map(|w| {
            let s = w.norm(&NormKind::W1pSeminorm(2.0)).ok()?;
            (s > 0.0).then(|| w.scaled(1.0 / s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        let g = GridSpec::unit(2, 16).unwrap();
        let a = test_bank(&g, 5);
        let b = test_bank(&g, 5);
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
        }
        let c = test_bank(&g, 6);
        assert_ne!(a[10].values(), c[10].values());
    }

    #[test]
    fn sine_fields_are_distinct_and_nonzero() {
        let g = GridSpec::unit(2, 16).unwrap();
        let bank = sine_bank(&g, 16);
        for (i, a) in bank.iter().enumerate() {
            assert!(!a.is_zero());
            for b in &bank[i + 1..] {
                assert_ne!(a.values(), b.values());
            }
        }
    }

    #[test]
    fn normalization() {
        let g = GridSpec::unit(2, 16).unwrap();
        let mut bank = sine_bank(&g, 3);
        bank.push(VectorField::zeros(&g));
        let n = normalized_h1(bank);
        assert_eq!(n.len(), 3);
        for w in &n {
            let s = w.norm(&NormKind::W1pSeminorm(2.0)).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
