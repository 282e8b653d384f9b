use serde::{Deserialize, Serialize};

use crate::error::{PlapError, Result};

use super::field::{gradient, Trajectory, VectorField};

/// Discrete norms. Exponents may be `f64::INFINITY`.
///
/// Spatial integrals use the node (or gradient-point) weight `h`; Bochner
/// norms integrate in time with the right-endpoint rule `dt * sum_{n=1..N}`,
/// which matches the backward-Euler cells `(t_{n-1}, t_n]`. The `L^inf` in
/// time is the maximum over every stored sample including `t_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    Lp(f64),
    Linf,
    W1pSeminorm(f64),
    Bochner { outer: f64, inner: Box<NormKind> },
}

impl NormKind {
    pub fn bochner(outer: f64, inner: NormKind) -> Self {
        NormKind::Bochner {
            outer,
            inner: Box::new(inner),
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |p: f64| {
            if p >= 1.0 && !p.is_nan() {
                Ok(())
            } else {
                Err(PlapError::usage(format!(
                    "norm exponent must lie in [1, inf], got {p}"
                )))
            }
        };
        match self {
            NormKind::Lp(p) | NormKind::W1pSeminorm(p) => check(*p),
            NormKind::Linf => Ok(()),
            NormKind::Bochner { outer, inner } => {
                check(*outer)?;
                if matches!(**inner, NormKind::Bochner { .. }) {
                    return Err(PlapError::usage("Bochner norms cannot be nested"));
                }
                inner.validate()
            }
        }
    }
}

pub trait Normed {
    fn norm(&self, kind: &NormKind) -> Result<f64>;
}

impl Normed for VectorField {
    fn norm(&self, kind: &NormKind) -> Result<f64> {
        kind.validate()?;
        match kind {
            NormKind::Lp(p) => Ok(lp_of_pointwise(
                &pointwise_magnitudes(self),
                *p,
                self.grid().cell_volume(),
            )),
            NormKind::Linf => Ok(linf(self)),
            NormKind::W1pSeminorm(p) => {
                let g = gradient(self);
                let mags: Vec<f64> = g.squared_magnitudes().iter().map(|s| s.sqrt()).collect();
                Ok(lp_of_pointwise(&mags, *p, self.grid().cell_volume()))
            }
            NormKind::Bochner { .. } => Err(PlapError::usage(
                "Bochner norms apply to trajectories, not single fields",
            )),
        }
    }
}

impl Normed for Trajectory {
    fn norm(&self, kind: &NormKind) -> Result<f64> {
        kind.validate()?;
        let NormKind::Bochner { outer, inner } = kind else {
            return Err(PlapError::usage(
                "trajectories take Bochner norms; use a spatial norm per field",
            ));
        };
        if outer.is_infinite() {
            let mut m: f64 = 0.0;
            for f in self.fields() {
                m = m.max(f.norm(inner)?);
            }
            return Ok(m);
        }
        let mut acc = 0.0;
        for f in &self.fields()[1..] {
            acc += f.norm(inner)?.powf(*outer);
        }
        Ok((self.dt() * acc).powf(1.0 / outer))
    }
}

/// Euclidean length of the vector at each node.
pub fn pointwise_magnitudes(v: &VectorField) -> Vec<f64> {
    v.values()
        .chunks_exact(v.dim())
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect()
}

/// `max_x |v(x)|`.
pub fn linf(v: &VectorField) -> f64 {
    pointwise_magnitudes(v).into_iter().fold(0.0, f64::max)
}

/// `(h * sum |m|^p)^(1/p)`, or the max for `p = inf`.
pub(crate) fn lp_of_pointwise(mags: &[f64], p: f64, weight: f64) -> f64 {
    if p.is_infinite() {
        return mags.iter().copied().fold(0.0, f64::max);
    }
    let mut acc = 0.0;
    if p == 2.0 {
        for m in mags {
            acc += m * m;
        }
        return (weight * acc).sqrt();
    }
    for m in mags {
        acc += m.powf(p);
    }
    (weight * acc).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_support::random_field;
    use crate::mesh::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kinds() -> Vec<NormKind> {
        vec![
            NormKind::Lp(1.0),
            NormKind::Lp(1.5),
            NormKind::Lp(2.0),
            NormKind::Linf,
            NormKind::W1pSeminorm(1.5),
            NormKind::W1pSeminorm(2.0),
        ]
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = GridSpec::unit(2, 6).unwrap();
        let z = VectorField::zeros(&g);
        for k in kinds() {
            assert_eq!(z.norm(&k).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_one_on_three_nodes() {
        let g = GridSpec::new(&[1.0], &[3]).unwrap();
        let v = VectorField::from_values(&g, vec![1.0; 3]).unwrap();
        let n = v.norm(&NormKind::Lp(2.0)).unwrap();
        assert!((n - (0.75f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn homogeneity_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridSpec::unit(2, 12).unwrap();
        for _ in 0..10 {
            let u = random_field(&g, &mut rng);
            let w = random_field(&g, &mut rng);
            let sum = u.combine(1.0, &w, 1.0).unwrap();
            for k in kinds() {
                let nu = u.norm(&k).unwrap();
                let nw = w.norm(&k).unwrap();
                let scaled = u.scaled(-2.5).norm(&k).unwrap();
                assert!((scaled - 2.5 * nu).abs() <= 1e-12 * scaled);
                assert!(sum.norm(&k).unwrap() <= (nu + nw) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn bochner_of_repeated_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = GridSpec::unit(2, 10).unwrap();
        let f = random_field(&g, &mut rng);
        let traj = Trajectory::new(vec![f.clone(); 9], 0.125).unwrap();
        let t: f64 = 1.0;
        for p in [1.0, 1.5, 2.0] {
            let kind = NormKind::bochner(p, NormKind::Lp(p));
            let b = traj.norm(&kind).unwrap();
            let s = f.norm(&NormKind::Lp(p)).unwrap();
            assert!((b - t.powf(1.0 / p) * s).abs() <= 1e-12 * b);
        }
        let sup = traj
            .norm(&NormKind::bochner(f64::INFINITY, NormKind::Lp(2.0)))
            .unwrap();
        assert_eq!(sup, f.norm(&NormKind::Lp(2.0)).unwrap());
    }

    #[test]
    fn kind_argument_mismatch_is_usage_error() {
        let g = GridSpec::unit(1, 4).unwrap();
        let f = VectorField::zeros(&g);
        let traj = Trajectory::new(vec![f.clone(), f.clone()], 0.1).unwrap();
        assert!(f.norm(&NormKind::bochner(2.0, NormKind::Lp(2.0))).is_err());
        assert!(traj.norm(&NormKind::Lp(2.0)).is_err());
        assert!(f.norm(&NormKind::Lp(0.5)).is_err());
        assert!(traj
            .norm(&NormKind::bochner(
                2.0,
                NormKind::bochner(2.0, NormKind::Linf)
            ))
            .is_err());
    }
}
