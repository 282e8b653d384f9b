//! Discrete convolution smoothers: the spatial mollifier `J_eps`, the
//! separable space-time mollifier applied to gradient trajectories, and the
//! convergence checks built on them.
//!
//! Kernels sample the bump `exp(-1 / (1 - r^2))`, `r = |y| / eps < 1`, at
//! lattice offsets and are renormalized to unit sum, so every output value is
//! a convex combination of input values and zeros (the field is extended by
//! zero outside the box).

use serde::Serialize;

use crate::error::{PlapError, Result};
use crate::mesh::{GradientField, GridSpec, NormKind, Normed, Trajectory, VectorField};
use crate::operators::diffusivity;

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Spatial kernel sampled on a grid.
#[derive(Clone, Debug)]
pub struct Kernel {
    radius: f64,
    half_width: Vec<usize>,
    offsets: Vec<[isize; 3]>,
    weights: Vec<f64>,
    l2_constant: f64,
}

/// What audit reports print about a kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSummary {
    pub radius: f64,
    pub half_width: Vec<usize>,
    pub support_points: usize,
    pub l2_constant: f64,
    pub degenerate: bool,
}

impl Kernel {
    pub fn new(grid: &GridSpec, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(PlapError::usage(format!(
                "mollifier radius must be positive, got {radius}"
            )));
        }
        let d = grid.dim();
        let spacings = grid.spacings();
        let half_width: Vec<usize> = spacings
            .iter()
            .map(|h| (radius / h).ceil() as usize)
            .collect();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut hw = [0isize; 3];
        for k in 0..d {
            hw[k] = half_width[k] as isize;
        }
        for o0 in -hw[0]..=hw[0] {
            for o1 in -hw[1]..=hw[1] {
                for o2 in -hw[2]..=hw[2] {
                    let o = [o0, o1, o2];
                    let r2: f64 = (0..d)
                        .map(|k| {
                            let y = o[k] as f64 * spacings[k] / radius;
                            y * y
                        })
                        .sum();
                    let w = bump(r2);
                    if w > 0.0 {
                        offsets.push(o);
                        weights.push(w);
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        let l2_constant = (sum_sq / grid.cell_volume()).sqrt();
        Ok(Kernel {
            radius,
            half_width,
            offsets,
            weights,
            l2_constant,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest weight (the center sample).
    pub fn peak(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Discrete `L^2 -> L^inf` constant `sqrt(sum w^2 / h)`.
    pub fn l2_constant(&self) -> f64 {
        self.l2_constant
    }

    /// A kernel narrower than one spacing collapses to the identity.
    pub fn is_degenerate(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            radius: self.radius,
            half_width: self.half_width.clone(),
            support_points: self.weights.len(),
            l2_constant: self.l2_constant,
            degenerate: self.is_degenerate(),
        }
    }

    /// Zero-extended convolution on a lattice of `dims` sites with `ncomp` values each.
    fn convolve(&self, dims: [usize; 3], ncomp: usize, input: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (o, &w) in self.offsets.iter().zip(&self.weights) {
            // out[x] += w * in[x - o] for x - o inside the lattice
            let lo: Vec<usize> = (0..3).map(|k| o[k].max(0) as usize).collect();
            let hi: Vec<usize> = (0..3)
                .map(|k| (dims[k] as isize + o[k].min(0)).max(0) as usize)
                .collect();
            for x0 in lo[0]..hi[0] {
                let s0 = (x0 as isize - o[0]) as usize;
                for x1 in lo[1]..hi[1] {
                    let s1 = (x1 as isize - o[1]) as usize;
                    let row_out = (x0 * dims[1] + x1) * dims[2];
                    let row_in = (s0 * dims[1] + s1) * dims[2];
                    if hi[2] <= lo[2] {
                        continue;
                    }
                    let a = (row_out + lo[2]) * ncomp;
                    let len = (hi[2] - lo[2]) * ncomp;
                    let b = ((row_in as isize + lo[2] as isize - o[2]) as usize) * ncomp;
                    for (y, &v) in out[a..a + len].iter_mut().zip(&input[b..b + len]) {
                        *y += w * v;
                    }
                }
            }
        }
    }
}

fn padded_dims(counts: &[usize], extra: usize) -> [usize; 3] {
    let mut dims = [1; 3];
    for (k, n) in counts.iter().enumerate() {
        dims[k] = n + extra;
    }
    dims
}

/// `J_eps(v)` with a freshly sampled kernel.
pub fn mollify_space(v: &VectorField, eps: f64) -> Result<VectorField> {
    let kernel = Kernel::new(v.grid(), eps)?;
    Ok(mollify_with(v, &kernel))
}

/// `J_eps(v)` with a prebuilt kernel for the same grid.
pub fn mollify_with(v: &VectorField, kernel: &Kernel) -> VectorField {
    let grid = v.grid();
    if kernel.is_degenerate() {
        return v.clone();
    }
    let mut out = vec![0.0; v.values().len()];
    kernel.convolve(
        padded_dims(grid.counts(), 0),
        grid.dim(),
        v.values(),
        &mut out,
    );
    VectorField::from_values(grid, out).expect("convex combination of finite values")
}

/// Symmetric time kernel with `K = ceil(eta / dt)` lags on each side.
#[derive(Clone, Debug)]
pub struct TimeKernel {
    radius: f64,
    weights: Vec<f64>,
}

impl TimeKernel {
    pub fn new(dt: f64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(PlapError::usage(format!(
                "time radius must be positive, got {radius}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PlapError::usage("time kernel needs dt > 0"));
        }
        let k = (radius / dt).ceil() as isize;
        let mut weights: Vec<f64> = (-k..=k)
            .map(|j| {
                let s = j as f64 * dt / radius;
                bump(s * s)
            })
            .collect();
        // Drop the zero-weight tails so the width reflects the real support.
        let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = weights.len() - 1 - first;
        weights = weights[first..=last].to_vec();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(TimeKernel { radius, weights })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of lags on each side of the center.
    pub fn half_width(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Space-time mollifier: a time kernel times a spatial kernel, both of radius `eta`.
#[derive(Clone, Debug)]
pub struct SpaceTimeKernel {
    pub time: TimeKernel,
    pub space: Kernel,
}

impl SpaceTimeKernel {
    pub fn new(grid: &GridSpec, dt: f64, eta: f64) -> Result<Self> {
        Ok(SpaceTimeKernel {
            time: TimeKernel::new(dt, eta)?,
            space: Kernel::new(grid, eta)?,
        })
    }
}

/// Convolves a gradient trajectory in time (clamped extension), then in space
/// (zero extension on the point lattice).
pub fn mollify_spacetime(
    fields: &[GradientField],
    dt: f64,
    eta: f64,
) -> Result<Vec<GradientField>> {
    let first = fields
        .first()
        .ok_or_else(|| PlapError::usage("empty gradient trajectory"))?;
    let kernel = SpaceTimeKernel::new(first.grid(), dt, eta)?;
    mollify_spacetime_with(fields, &kernel)
}

pub fn mollify_spacetime_with(
    fields: &[GradientField],
    kernel: &SpaceTimeKernel,
) -> Result<Vec<GradientField>> {
    let tk = &kernel.time;
    if fields.len() < tk.width() {
        return Err(PlapError::usage(format!(
            "trajectory of {} samples is shorter than the time stencil ({} samples)",
            fields.len(),
            tk.width()
        )));
    }
    let grid = fields[0].grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(PlapError::usage("gradient trajectory mixes grids"));
    }
    let d = grid.dim();
    let len = fields[0].values().len();
    let half = tk.half_width() as isize;
    let last = fields.len() as isize - 1;
    let dims = padded_dims(grid.counts(), 1);
    let mut out = Vec::with_capacity(fields.len());
    let mut smoothed = vec![0.0; len];
    for m in 0..fields.len() as isize {
        smoothed.iter_mut().for_each(|x| *x = 0.0);
        for (j, &w) in tk.weights().iter().enumerate() {
            let src = (m + j as isize - half).clamp(0, last) as usize;
            for (y, &g) in smoothed.iter_mut().zip(fields[src].values()) {
                *y += w * g;
            }
        }
        let values = if kernel.space.is_degenerate() {
            smoothed.clone()
        } else {
            let mut buf = vec![0.0; len];
            kernel.space.convolve(dims, d * d, &smoothed, &mut buf);
            buf
        };
        out.push(GradientField::from_values(grid, values)?);
    }
    Ok(out)
}

/// One-sided kernel on lags `k dt in (0, eps)`, a bump centered at `eps / 2`.
/// Its first moment is about `eps / 2`, so it carries an `O(eps)` bias on
/// linear-in-time data.
fn causal_weights(dt: f64, eps: f64) -> Vec<f64> {
    let k = (eps / dt).ceil() as usize;
    let mut w: Vec<f64> = (0..=k)
        .map(|j| {
            let s = 2.0 * j as f64 * dt / eps - 1.0;
            bump(s * s)
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return vec![1.0];
    }
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `||phi_eps * f - f||` in `L^p(0,T; L^p)` for each radius, with a normalized
/// one-sided time kernel and the trajectory clamped before `t_0`.
pub fn time_kernel_limit_check(f: &Trajectory, eps_list: &[f64], p: f64) -> Result<Vec<f64>> {
    let kind = NormKind::bochner(p, NormKind::Lp(p));
    let grid = f.grid();
    let mut residuals = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(PlapError::usage(format!(
                "time radius must be positive, got {eps}"
            )));
        }
        let w = causal_weights(f.dt(), eps);
        let mut diffs = Vec::with_capacity(f.fields().len());
        for m in 0..f.fields().len() {
            let mut acc = vec![0.0; f.field(m).values().len()];
            for (j, &wj) in w.iter().enumerate() {
                let src = m.saturating_sub(j);
                for (a, &x) in acc.iter_mut().zip(f.field(src).values()) {
                    *a += wj * x;
                }
            }
            for (a, &x) in acc.iter_mut().zip(f.field(m).values()) {
                *a -= x;
            }
            diffs.push(VectorField::from_values(grid, acc)?);
        }
        let diff = Trajectory::with_start(diffs, f.dt(), f.t_start())?;
        residuals.push(diff.norm(&kind)?);
    }
    Ok(residuals)
}

/// `||a_eta(mu, v) - a(mu, v)||_{L^2(Omega_T)}` for each `eta`.
pub fn coefficient_convergence_check(
    v: &Trajectory,
    mu: f64,
    p: f64,
    eta_list: &[f64],
) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(PlapError::usage("coefficient check needs mu > 0"));
    }
    let grads: Vec<GradientField> = v.fields().iter().map(crate::mesh::gradient).collect();
    let exact: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| coefficient_field(g, mu, p))
        .collect::<Result<_>>()?;
    let h = v.grid().cell_volume();
    let mut out = Vec::with_capacity(eta_list.len());
    for &eta in eta_list {
        let smooth = mollify_spacetime(&grads, v.dt(), eta)?;
        let mut acc = 0.0;
        for (g, a) in smooth.iter().zip(&exact).skip(1) {
            let a_eta = coefficient_field(g, mu, p)?;
            for (x, y) in a_eta.iter().zip(a) {
                acc += (x - y) * (x - y);
            }
        }
        out.push((v.dt() * h * acc).sqrt());
    }
    Ok(out)
}

fn coefficient_field(g: &GradientField, mu: f64, p: f64) -> Result<Vec<f64>> {
    g.squared_magnitudes()
        .into_iter()
        .map(|g2| diffusivity(g2, mu, p))
        .collect()
}
