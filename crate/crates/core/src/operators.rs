//! The regularized p-Laplacian coefficient and flux, centered convection,
//! the operator `A` paired against test fields, and the pointwise / integral
//! inequalities used by the existence argument.

use serde::{Deserialize, Serialize};

use crate::error::{PlapError, Result};
use crate::mesh::{
    dot, gradient, inner, inner_gradient, same_grid, GradientField, GridSpec, NormKind, Normed,
    VectorField, GHOST,
};
use crate::mollify::{mollify_with, Kernel};

/// Stand-in for `mu = 0` where the coefficient would be singular.
pub const MU_MACHINE: f64 = 1e-14;

/// Transport velocity used in the convective term `w . grad v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvectionMode {
    /// `w = J_eps(v)` with the configured convection radius.
    Mollified,
    /// `w = v` (the unregularized limit system).
    Raw,
    /// No convective term.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: f64,
    pub mu: f64,
    pub nu: f64,
    /// Radius of `J` in the convective term; `None` couples it to `sqrt(mu) * L`.
    pub conv_radius: Option<f64>,
    /// Space-time radius for the dual coefficients.
    pub eta: f64,
    pub convection: ConvectionMode,
}

impl ProblemParams {
    pub fn new(p: f64, mu: f64, nu: f64) -> Result<Self> {
        let params = ProblemParams {
            p,
            mu,
            nu,
            conv_radius: None,
            eta: 0.0,
            convection: ConvectionMode::Mollified,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_convection(mut self, mode: ConvectionMode) -> Self {
        self.convection = mode;
        self
    }

    pub fn with_conv_radius(mut self, radius: f64) -> Self {
        self.conv_radius = Some(radius);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(PlapError::usage(format!(
                "p must lie in (1, 2], got {}",
                self.p
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(PlapError::usage(format!(
                "mu must be finite and >= 0, got {}",
                self.mu
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(PlapError::usage(format!(
                "nu must be finite and >= 0, got {}",
                self.nu
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(PlapError::usage(format!(
                "eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if let Some(r) = self.conv_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(PlapError::usage(format!(
                    "convection radius must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    /// `mu` with the machine floor applied.
    pub fn mu_eff(&self) -> f64 {
        floored(self.mu)
    }

    /// Convection radius on the given grid.
    pub fn conv_radius_on(&self, grid: &GridSpec) -> f64 {
        self.conv_radius.unwrap_or_else(|| {
            let scale = grid.extents().iter().copied().fold(0.0, f64::max);
            self.mu_eff().sqrt() * scale
        })
    }

    /// The convection kernel, or `None` unless convection is mollified.
    pub fn conv_kernel(&self, grid: &GridSpec) -> Result<Option<Kernel>> {
        match self.convection {
            ConvectionMode::Mollified => Ok(Some(Kernel::new(grid, self.conv_radius_on(grid))?)),
            _ => Ok(None),
        }
    }

    /// Transport velocity for field `v`.
    pub fn transport(&self, v: &VectorField, kernel: Option<&Kernel>) -> Option<VectorField> {
        match self.convection {
            ConvectionMode::Off => None,
            ConvectionMode::Raw => Some(v.clone()),
            ConvectionMode::Mollified => Some(match kernel {
                Some(k) => mollify_with(v, k),
                None => v.clone(),
            }),
        }
    }
}

pub(crate) fn floored(mu: f64) -> f64 {
    if mu > 0.0 {
        mu
    } else {
        MU_MACHINE
    }
}

/// `(mu + g2)^((p - 2) / 2)`.
pub fn diffusivity(g2: f64, mu: f64, p: f64) -> Result<f64> {
    let s = mu + g2;
    if s <= 0.0 {
        if p == 2.0 {
            return Ok(1.0);
        }
        return Err(PlapError::Singular { p });
    }
    Ok(diffusivity_unchecked(s, p))
}

#[inline]
pub(crate) fn diffusivity_unchecked(s: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p == 1.5 {
        1.0 / s.sqrt().sqrt()
    } else {
        s.powf(0.5 * (p - 2.0))
    }
}

/// Scalar coefficient per gradient point.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusivityField {
    values: Vec<f64>,
}

impl DiffusivityField {
    pub fn from_gradient(g: &GradientField, mu: f64, p: f64) -> Result<Self> {
        let values = g
            .squared_magnitudes()
            .into_iter()
            .map(|g2| diffusivity(g2, mu, p))
            .collect::<Result<_>>()?;
        Ok(DiffusivityField { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `a(mu, v) grad v` at every gradient point.
pub fn p_flux(v: &VectorField, mu: f64, p: f64) -> Result<GradientField> {
    flux_of_gradient(&gradient(v), mu, p)
}

pub fn flux_of_gradient(g: &GradientField, mu: f64, p: f64) -> Result<GradientField> {
    let a = DiffusivityField::from_gradient(g, mu, p)?;
    Ok(g.scale_pointwise(a.values()))
}

/// Centered-difference advection `(w . grad) v` at the nodes.
pub fn convective(w: &VectorField, v: &VectorField) -> Result<VectorField> {
    same_grid(w.grid(), v.grid())?;
    let mut out = vec![0.0; v.values().len()];
    convective_add(v.grid(), w.values(), v.values(), 1.0, &mut out);
    VectorField::from_values(v.grid(), out)
}

/// `out += scale * (w . grad_c) v` on raw slices.
pub(crate) fn convective_add(grid: &GridSpec, w: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let d = grid.dim();
    for k in 0..d {
        let s = 0.5 * scale / grid.spacing(k);
        for (node, &[lo, hi]) in grid.neighbors(k).iter().enumerate() {
            let wk = w[node * d + k] * s;
            if wk == 0.0 {
                continue;
            }
            for i in 0..d {
                let a = if lo == GHOST {
                    0.0
                } else {
                    v[lo as usize * d + i]
                };
                let b = if hi == GHOST {
                    0.0
                } else {
                    v[hi as usize * d + i]
                };
                out[node * d + i] += wk * (b - a);
            }
        }
    }
}

/// `out += scale * C(w)^T psi`, the exact transpose of [`convective_add`]:
/// `-(delta_c (w_k psi))` summed over axes.
pub(crate) fn convective_transpose_add(
    grid: &GridSpec,
    w: &[f64],
    psi: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let d = grid.dim();
    for k in 0..d {
        let s = 0.5 * scale / grid.spacing(k);
        for (node, &[lo, hi]) in grid.neighbors(k).iter().enumerate() {
            let wk = w[node * d + k] * s;
            if wk == 0.0 {
                continue;
            }
            for i in 0..d {
                let x = wk * psi[node * d + i];
                if hi != GHOST {
                    out[hi as usize * d + i] += x;
                }
                if lo != GHOST {
                    out[lo as usize * d + i] -= x;
                }
            }
        }
    }
}

/// Centered divergence `sum_k delta_c w_k` of a transport field, per node.
pub fn transport_divergence(w: &VectorField) -> Vec<f64> {
    let grid = w.grid();
    let d = grid.dim();
    let mut out = vec![0.0; grid.node_count()];
    for k in 0..d {
        let s = 0.5 / grid.spacing(k);
        for (node, &[lo, hi]) in grid.neighbors(k).iter().enumerate() {
            let a = if lo == GHOST {
                0.0
            } else {
                w.values()[lo as usize * d + k]
            };
            let b = if hi == GHOST {
                0.0
            } else {
                w.values()[hi as usize * d + k]
            };
            out[node] += s * (b - a);
        }
    }
    out
}

/// `A(v)` as a linear functional `w -> nu (grad v, grad w) + (a grad v, grad w) + (J(v) . grad v, w)`.
#[derive(Clone, Debug)]
pub struct OperatorA {
    pub viscous: GradientField,
    pub flux: GradientField,
    pub transport: Option<VectorField>,
}

impl OperatorA {
    pub fn pair(&self, w: &VectorField) -> Result<f64> {
        let gw = gradient(w);
        let mut total = inner_gradient(&self.viscous, &gw)? + inner_gradient(&self.flux, &gw)?;
        if let Some(t) = &self.transport {
            total += inner(t, w)?;
        }
        Ok(total)
    }

    pub fn is_zero(&self) -> bool {
        self.viscous.values().iter().all(|&x| x == 0.0)
            && self.flux.values().iter().all(|&x| x == 0.0)
            && self.transport.as_ref().is_none_or(|t| t.is_zero())
    }
}

pub fn apply_a(v: &VectorField, params: &ProblemParams) -> Result<OperatorA> {
    params.validate()?;
    let g = gradient(v);
    let viscous = g.scale_pointwise(&vec![params.nu; g.grid().point_count()]);
    let flux = flux_of_gradient(&g, params.mu_eff(), params.p)?;
    let kernel = params.conv_kernel(v.grid())?;
    let transport = match params.transport(v, kernel.as_ref()) {
        Some(w) => Some(convective(&w, v)?),
        None => None,
    };
    Ok(OperatorA {
        viscous,
        flux,
        transport,
    })
}

/// `(a(mu, g1) g1 - a(mu, g2) g2) . (g1 - g2)` for two gradient tensors.
pub fn pointwise_gap(g1: &[f64], g2: &[f64], mu: f64, p: f64) -> f64 {
    let mu = floored(mu);
    let a1 = diffusivity_unchecked(mu + dot(g1, g1), p);
    let a2 = diffusivity_unchecked(mu + dot(g2, g2), p);
    g1.iter()
        .zip(g2)
        .map(|(x, y)| (a1 * x - a2 * y) * (x - y))
        .sum()
}

/// `h * sum_points (a(u) grad u - a(w) grad w) : (grad u - grad w)`.
pub fn monotonicity_gap(u: &VectorField, w: &VectorField, mu: f64, p: f64) -> Result<f64> {
    same_grid(u.grid(), w.grid())?;
    monotonicity_gap_gradients(&gradient(u), &gradient(w), mu, p)
}

pub fn monotonicity_gap_gradients(
    gu: &GradientField,
    gw: &GradientField,
    mu: f64,
    p: f64,
) -> Result<f64> {
    same_grid(gu.grid(), gw.grid())?;
    let grid = gu.grid();
    let mut acc = 0.0;
    for pt in 0..grid.point_count() {
        acc += pointwise_gap(gu.tensor(pt), gw.tensor(pt), mu, p);
    }
    Ok(grid.cell_volume() * acc)
}

/// Scale for judging the sign of a gap: `h * sum |a(u) grad u| |grad u| + ...`.
pub fn gap_scale(gu: &GradientField, gw: &GradientField, mu: f64, p: f64) -> f64 {
    let mu = floored(mu);
    let grid = gu.grid();
    let mut acc = 0.0;
    for pt in 0..grid.point_count() {
        let (x, y) = (gu.tensor(pt), gw.tensor(pt));
        let (x2, y2) = (dot(x, x), dot(y, y));
        let ax = diffusivity_unchecked(mu + x2, p);
        let ay = diffusivity_unchecked(mu + y2, p);
        let (nx, ny) = (x2.sqrt(), y2.sqrt());
        acc += (ax * nx + ay * ny) * (nx + ny);
    }
    grid.cell_volume() * acc
}

/// Both sides of `int |grad v|^p <= 2^((2-p)/2) int a(mu,v) |grad v|^2 + mu^(p/2) |Omega|`.
pub fn gradient_lp_control(v: &VectorField, mu: f64, p: f64, measure: f64) -> Result<(f64, f64)> {
    gradient_lp_control_gradients(&gradient(v), mu, p, measure)
}

pub fn gradient_lp_control_gradients(
    g: &GradientField,
    mu: f64,
    p: f64,
    measure: f64,
) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(PlapError::usage("gradient control needs mu > 0"));
    }
    let h = g.grid().cell_volume();
    let mut lhs = 0.0;
    let mut weighted = 0.0;
    for g2 in g.squared_magnitudes() {
        lhs += g2.powf(0.5 * p);
        weighted += diffusivity(g2, mu, p)? * g2;
    }
    let rhs = 2f64.powf(0.5 * (2.0 - p)) * h * weighted + mu.powf(0.5 * p) * measure;
    Ok((h * lhs, rhs))
}

/// Operator-norm proxy and growth bound for the operator growth estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub value: f64,
    pub bound: f64,
}

/// `c(mu)`: the convection kernel's `L^2 -> L^inf` constant (0 without convection).
pub fn convection_constant(params: &ProblemParams, grid: &GridSpec) -> Result<f64> {
    match params.convection {
        ConvectionMode::Off => Ok(0.0),
        ConvectionMode::Mollified => Ok(params.conv_kernel(grid)?.map_or(0.0, |k| k.l2_constant())),
        ConvectionMode::Raw => Err(PlapError::usage(
            "certificates need a mollified (or disabled) convective term",
        )),
    }
}

/// `max_w |<A(v), w>|` over test fields with `||grad w||_2 = 1`, against
/// `(1 + ||grad v||_2)(2 + c(mu) ||v||_2)`.
///
/// The bound as written needs `nu <= 1`, `|Omega| <= 1` and a Poincare
/// constant at most one, all of which hold on boxes of measure at most one.
pub fn certificate_c3(
    v: &VectorField,
    params: &ProblemParams,
    bank: &[VectorField],
) -> Result<Certificate> {
    if !(params.mu > 0.0 && params.nu > 0.0) {
        return Err(PlapError::usage("growth certificate needs mu, nu > 0"));
    }
    if params.nu > 1.0 || v.grid().measure() > 1.0 {
        return Err(PlapError::usage(
            "growth certificate is stated for nu <= 1 and |Omega| <= 1",
        ));
    }
    let op = apply_a(v, params)?;
    let mut proxy: f64 = 0.0;
    for w in bank {
        let scale = w.norm(&NormKind::W1pSeminorm(2.0))?;
        if scale == 0.0 {
            continue;
        }
        proxy = proxy.max(op.pair(w)?.abs() / scale);
    }
    let c = convection_constant(params, v.grid())?;
    let w12 = v.norm(&NormKind::W1pSeminorm(2.0))?;
    let l2 = v.norm(&NormKind::Lp(2.0))?;
    Ok(Certificate {
        value: proxy,
        bound: (1.0 + w12) * (2.0 + c * l2),
    })
}

/// `<A(v), v>` against `(nu/2) ||grad v||^2 - c(nu,mu) ||v||^4` with
/// `c(nu, mu) = c(mu)^2 / (2 nu)` from Young's inequality.
pub fn certificate_c5(v: &VectorField, params: &ProblemParams) -> Result<Certificate> {
    if !(params.mu > 0.0 && params.nu > 0.0) {
        return Err(PlapError::usage("coercivity certificate needs mu, nu > 0"));
    }
    let op = apply_a(v, params)?;
    let pairing = op.pair(v)?;
    let c = convection_constant(params, v.grid())?;
    let w12 = v.norm(&NormKind::W1pSeminorm(2.0))?;
    let l2 = v.norm(&NormKind::Lp(2.0))?;
    let c_nu_mu = c * c / (2.0 * params.nu);
    Ok(Certificate {
        value: pairing,
        bound: 0.5 * params.nu * w12 * w12 - c_nu_mu * l2.powi(4),
    })
}

/// Symmetric frozen operator `x / dt + D^T (c D x)` with a scalar weight `c`
/// per gradient point, applied per component.
pub(crate) struct FrozenOperator<'a> {
    pub grid: &'a GridSpec,
    pub mass: f64,
    pub coef: &'a [f64],
}

impl FrozenOperator<'_> {
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.mass * xi;
        }
        let d = self.grid.dim();
        for k in 0..d {
            let inv_h2 = 1.0 / (self.grid.spacing(k) * self.grid.spacing(k));
            for (pt, &[lo, hi]) in self.grid.edges(k).iter().enumerate() {
                let c = self.coef[pt] * inv_h2;
                match (lo == GHOST, hi == GHOST) {
                    (false, false) => {
                        let (lo, hi) = (lo as usize * d, hi as usize * d);
                        for i in 0..d {
                            let f = c * (x[hi + i] - x[lo + i]);
                            y[hi + i] += f;
                            y[lo + i] -= f;
                        }
                    }
                    (true, false) => {
                        let hi = hi as usize * d;
                        for i in 0..d {
                            y[hi + i] += c * x[hi + i];
                        }
                    }
                    (false, true) => {
                        let lo = lo as usize * d;
                        for i in 0..d {
                            y[lo + i] += c * x[lo + i];
                        }
                    }
                    (true, true) => {}
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut diag = vec![self.mass; self.grid.node_count() * d];
        for k in 0..d {
            let inv_h2 = 1.0 / (self.grid.spacing(k) * self.grid.spacing(k));
            for (pt, &[lo, hi]) in self.grid.edges(k).iter().enumerate() {
                let c = self.coef[pt] * inv_h2;
                for node in [lo, hi] {
                    if node != GHOST {
                        for i in 0..d {
                            diag[node as usize * d + i] += c;
                        }
                    }
                }
            }
        }
        diag
    }
}

#[cfg(test)]
/// `D^T (c D v)` as a field; used to cross-check the frozen operator.
pub(crate) fn weighted_laplacian(v: &VectorField, coef: &[f64]) -> VectorField {
    let g = gradient(v).scale_pointwise(coef);
    let mut out = vec![0.0; v.values().len()];
    crate::mesh::divergence_add(v.grid(), g.values(), -1.0, &mut out);
    VectorField::from_values(v.grid(), out).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{random_field, random_gradient_field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_point_gradient(entry: f64) -> GradientField {
        let g = GridSpec::new(&[1.0, 1.0], &[1, 1]).unwrap();
        let mut vals = vec![0.0; g.point_count() * 4];
        vals[0] = entry;
        GradientField::from_values(&g, vals).unwrap()
    }

    #[test]
    fn diffusivity_closed_forms() {
        assert_eq!(diffusivity(3.0, 0.7, 2.0).unwrap(), 1.0);
        assert!((diffusivity(0.0, 0.04, 1.5).unwrap() - 5f64.sqrt()).abs() < 1e-14);
        assert!((diffusivity(3.0, 1.0, 1.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            diffusivity(0.0, 0.0, 1.5),
            Err(PlapError::Singular { .. })
        ));
        assert!((diffusivity(2.0, 0.5, 1.3).unwrap() - 2.5f64.powf(-0.35)).abs() < 1e-15);
    }

    #[test]
    fn diffusivity_is_bounded_by_mu_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mu: f64 = 10f64.powf(rng.gen_range(-6.0..1.0));
            let g2: f64 = rng.gen_range(0.0..100.0);
            let p = rng.gen_range(1.01..2.0);
            assert!(diffusivity(g2, mu, p).unwrap() <= mu.powf(0.5 * (p - 2.0)));
        }
    }

    #[test]
    fn flux_closed_forms() {
        let g = GridSpec::unit(2, 8).unwrap();
        assert!(p_flux(&VectorField::zeros(&g), 0.1, 1.5)
            .unwrap()
            .values()
            .iter()
            .all(|&x| x == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_field(&g, &mut rng);
        assert_eq!(p_flux(&v, 0.3, 2.0).unwrap(), gradient(&v));
        let single = flux_of_gradient(&single_point_gradient(1.0), 1.0, 1.5).unwrap();
        assert!((single.values()[0] - 2f64.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn convective_edge_cases() {
        let g = GridSpec::new(&[1.0], &[7]).unwrap();
        let w = VectorField::from_values(&g, vec![1.0; 7]).unwrap();
        let v = VectorField::from_fn(&g, |x, out| out[0] = x[0]);
        let c = convective(&w, &v).unwrap();
        for &x in &c.values()[1..6] {
            assert!((x - 1.0).abs() < 1e-14);
        }
        assert!(convective(&VectorField::zeros(&g), &v).unwrap().is_zero());
        let g2 = GridSpec::unit(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w2 = random_field(&g2, &mut rng);
        let mut const_v = vec![0.0; g2.node_count() * 2];
        // constant in space on the full-stencil nodes only
        for i in 0..g2.node_count() {
            const_v[2 * i] = 1.0;
        }
        let cv = convective(&w2, &VectorField::from_values(&g2, const_v).unwrap()).unwrap();
        for i in 0..g2.node_count() {
            let m = g2.node_multi_index(i);
            if (1..6).contains(&m[0]) && (1..6).contains(&m[1]) {
                assert!(cv.at(i)[0].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn convective_transpose_is_exact() {
        let g = GridSpec::unit(2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let psi = random_field(&g, &mut rng);
        let cv = convective(&w, &v).unwrap();
        let mut ct = vec![0.0; v.values().len()];
        convective_transpose_add(&g, w.values(), psi.values(), 1.0, &mut ct);
        let lhs = inner(&cv, &psi).unwrap();
        let rhs = inner(&v, &VectorField::from_values(&g, ct).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
    }

    #[test]
    fn frozen_operator_matches_field_assembly() {
        let g = GridSpec::unit(2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_field(&g, &mut rng);
        let coef: Vec<f64> = (0..g.point_count())
            .map(|_| rng.gen_range(0.1..2.0))
            .collect();
        let op = FrozenOperator {
            grid: &g,
            mass: 3.0,
            coef: &coef,
        };
        let mut y = vec![0.0; v.values().len()];
        op.apply(v.values(), &mut y);
        let expect = weighted_laplacian(&v, &coef).combine(1.0, &v, 3.0).unwrap();
        for (a, b) in y.iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
        let diag = op.diagonal();
        let mut e = vec![0.0; y.len()];
        e[7] = 1.0;
        op.apply(&e, &mut y);
        assert!((y[7] - diag[7]).abs() < 1e-10 * diag[7]);
    }

    #[test]
    fn apply_a_edge_cases() {
        let g = GridSpec::unit(2, 16).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.2).unwrap();
        assert!(apply_a(&VectorField::zeros(&g), &params).unwrap().is_zero());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_field(&g, &mut rng);
        let w = random_field(&g, &mut rng);
        let linear = ProblemParams::new(2.0, 0.1, 0.2)
            .unwrap()
            .with_convection(ConvectionMode::Off);
        let pair = apply_a(&v, &linear).unwrap().pair(&w).unwrap();
        let expect = 1.2 * inner_gradient(&gradient(&v), &gradient(&w)).unwrap();
        assert!((pair - expect).abs() < 1e-13 * expect.abs());
    }

    #[test]
    fn apply_a_matches_term_by_term() {
        let g = GridSpec::unit(2, 16).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_field(&g, &mut rng);
        let w = random_field(&g, &mut rng);
        let pair = apply_a(&v, &params).unwrap().pair(&w).unwrap();
        let gv = gradient(&v);
        let gw = gradient(&w);
        let t1 = 0.2 * inner_gradient(&gv, &gw).unwrap();
        let t2 = inner_gradient(&p_flux(&v, 0.1, 1.5).unwrap(), &gw).unwrap();
        let jv = crate::mollify::mollify_space(&v, 0.1f64.sqrt()).unwrap();
        let t3 = inner(&convective(&jv, &v).unwrap(), &w).unwrap();
        let sum = t1 + t2 + t3;
        let scale = t1.abs() + t2.abs() + t3.abs();
        assert!((pair - sum).abs() <= 1e-13 * scale);
    }

    #[test]
    fn single_point_gap() {
        let gu = single_point_gradient(1.0);
        let gw = single_point_gradient(0.0);
        let gap = monotonicity_gap_gradients(&gu, &gw, 1.0, 1.5).unwrap();
        let h = gu.grid().cell_volume();
        assert!((gap - 2f64.powf(-0.25) * h).abs() < 1e-15);
        let g = GridSpec::unit(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_field(&g, &mut rng);
        assert_eq!(monotonicity_gap(&u, &u, 0.5, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn random_gaps_are_nonnegative() {
        let g = GridSpec::unit(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &p in &[1.1, 1.5, 1.9] {
            for _ in 0..300 {
                let gu = random_gradient_field(&g, &mut rng);
                let gw = random_gradient_field(&g, &mut rng).scale_pointwise(&vec![
                    rng.gen_range(
                        0.0..3.0
                    );
                    g.point_count()
                ]);
                let gap = monotonicity_gap_gradients(&gu, &gw, 1e-2, p).unwrap();
                assert!(gap >= -1e-12 * gap_scale(&gu, &gw, 1e-2, p));
            }
        }
    }

    #[test]
    fn gradient_control_closed_forms() {
        let g = GridSpec::unit(2, 8).unwrap();
        let (lhs, rhs) = gradient_lp_control(&VectorField::zeros(&g), 0.3, 1.5, 1.0).unwrap();
        assert_eq!(lhs, 0.0);
        assert!((rhs - 0.3f64.powf(0.75)).abs() < 1e-15);

        // one point of the 2x2 lattice, |grad v| = 1, weight h = 1/4; rescale to |Omega| = 1
        let single = single_point_gradient(1.0);
        let h = single.grid().cell_volume();
        let (lhs, rhs) = gradient_lp_control_gradients(&single, 1.0, 1.5, 1.0).unwrap();
        assert!((lhs / h - 1.0).abs() < 1e-15);
        // per-point rhs: 2^(1/4) 2^(-1/4) 1 + 1 = 2 on a unit-measure domain
        assert!(((rhs - 1.0) / h + 1.0 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_control_never_violated() {
        let g = GridSpec::unit(2, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for &mu in &[1e-4, 1e-2, 1.0] {
            for _ in 0..30 {
                let v = random_field(&g, &mut rng).scaled(rng.gen_range(0.0..0.2));
                let (lhs, rhs) = gradient_lp_control(&v, mu, 1.5, g.measure()).unwrap();
                assert!(lhs <= rhs);
            }
        }
    }

    #[test]
    fn certificates_on_zero_field() {
        let g = GridSpec::unit(2, 8).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.1).unwrap();
        let bank = vec![VectorField::from_fn(&g, |x, o| {
            o[0] = (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin();
        })];
        let c3 = certificate_c3(&VectorField::zeros(&g), &params, &bank).unwrap();
        assert_eq!(c3.value, 0.0);
        assert_eq!(c3.bound, 2.0);
        let c5 = certificate_c5(&VectorField::zeros(&g), &params).unwrap();
        assert_eq!((c5.value, c5.bound), (0.0, 0.0));
    }

    #[test]
    fn c5_linear_case() {
        let g = GridSpec::unit(2, 12).unwrap();
        let params = ProblemParams::new(2.0, 0.1, 0.3)
            .unwrap()
            .with_convection(ConvectionMode::Off);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = random_field(&g, &mut rng);
        let c5 = certificate_c5(&v, &params).unwrap();
        let g2 = v.norm(&NormKind::W1pSeminorm(2.0)).unwrap().powi(2);
        assert!((c5.value - 1.3 * g2).abs() < 1e-12 * c5.value);
        assert!(c5.value >= c5.bound);
    }
}
