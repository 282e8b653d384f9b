use crate::error::{PlapError, Result};

use super::grid::{GridSpec, GHOST};

/// `d`-component field on the interior nodes of a grid; the boundary is an
/// implicit zero. Values are node-major with components interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &GridSpec) -> Self {
        VectorField {
            values: vec![0.0; grid.node_count() * grid.dim()],
            grid: grid.clone(),
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        let want = grid.node_count() * grid.dim();
        if values.len() != want {
            return Err(PlapError::usage(format!(
                "field needs {want} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PlapError::usage("field values must be finite"));
        }
        Ok(VectorField {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x, out)` at every interior node; `out` has `d` slots.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let d = grid.dim();
        let mut values = vec![0.0; grid.node_count() * d];
        for (i, chunk) in values.chunks_exact_mut(d).enumerate() {
            let x = grid.node_coords(i);
            f(&x[..d], chunk);
        }
        VectorField {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count() * grid.dim());
        VectorField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Components at interior node `i`.
    pub fn at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        VectorField::from_raw(&self.grid, self.values.iter().map(|v| lambda * v).collect())
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &VectorField, beta: f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(VectorField::from_raw(&self.grid, values))
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }
}

/// `d x d` tensor per gradient point; entry `(i, k)` is the axis-`k`
/// difference of component `i`, stored at `values[point * d * d + i * d + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GradientField {
    pub fn zeros(grid: &GridSpec) -> Self {
        let d = grid.dim();
        GradientField {
            values: vec![0.0; grid.point_count() * d * d],
            grid: grid.clone(),
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        let d = grid.dim();
        let want = grid.point_count() * d * d;
        if values.len() != want {
            return Err(PlapError::usage(format!(
                "gradient field needs {want} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PlapError::usage("gradient values must be finite"));
        }
        Ok(GradientField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &GridSpec, values: Vec<f64>) -> Self {
        GradientField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tensor(&self, point: usize) -> &[f64] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.values[point * dd..(point + 1) * dd]
    }

    /// Frobenius `|G|^2` at every point.
    pub fn squared_magnitudes(&self) -> Vec<f64> {
        let dd = self.grid.dim() * self.grid.dim();
        self.values
            .chunks_exact(dd)
            .map(|t| t.iter().map(|g| g * g).sum())
            .collect()
    }

    /// Multiplies the tensor at each point by a scalar.
    pub fn scale_pointwise(&self, factors: &[f64]) -> Self {
        let dd = self.grid.dim() * self.grid.dim();
        debug_assert_eq!(factors.len(), self.grid.point_count());
        let values = self
            .values
            .chunks_exact(dd)
            .zip(factors)
            .flat_map(|(t, &a)| t.iter().map(move |g| a * g))
            .collect();
        GradientField::from_raw(&self.grid, values)
    }

    pub fn combine(&self, alpha: f64, other: &GradientField, beta: f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(GradientField::from_raw(&self.grid, values))
    }
}

/// Uniformly sampled sequence of fields `v(t_start + n dt)`, `n = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    fields: Vec<VectorField>,
    dt: f64,
    t_start: f64,
}

impl Trajectory {
    pub fn new(fields: Vec<VectorField>, dt: f64) -> Result<Self> {
        Trajectory::with_start(fields, dt, 0.0)
    }

    pub fn with_start(fields: Vec<VectorField>, dt: f64, t_start: f64) -> Result<Self> {
        if fields.len() < 2 {
            return Err(PlapError::usage("a trajectory needs at least two samples"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PlapError::usage(format!(
                "trajectory dt must be positive, got {dt}"
            )));
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return Err(PlapError::usage("trajectory fields must share one grid"));
        }
        Ok(Trajectory {
            fields,
            dt,
            t_start,
        })
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn field(&self, n: usize) -> &VectorField {
        &self.fields[n]
    }

    pub fn first(&self) -> &VectorField {
        &self.fields[0]
    }

    pub fn last(&self) -> &VectorField {
        &self.fields[self.fields.len() - 1]
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    /// Horizon `T = N dt`.
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }

    /// Samples `0..=n`.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.steps() {
            return Err(PlapError::usage(format!(
                "cannot truncate a {}-step trajectory to {n} steps",
                self.steps()
            )));
        }
        Trajectory::with_start(self.fields[..=n].to_vec(), self.dt, self.t_start)
    }

    pub fn same_lattice(&self, other: &Trajectory) -> bool {
        self.fields.len() == other.fields.len()
            && self.dt == other.dt
            && self.grid() == other.grid()
    }
}

pub(crate) fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(PlapError::usage("fields live on different grids"));
    }
    Ok(())
}

/// Forward-difference gradient with zero ghost values at the walls.
pub fn gradient(v: &VectorField) -> GradientField {
    let grid = v.grid();
    let mut out = vec![0.0; grid.point_count() * grid.dim() * grid.dim()];
    gradient_into(grid, v.values(), &mut out);
    GradientField::from_raw(grid, out)
}

/// Raw-slice gradient; `out` has `point_count * d * d` slots and is overwritten.
pub(crate) fn gradient_into(grid: &GridSpec, v: &[f64], out: &mut [f64]) {
    let d = grid.dim();
    let dd = d * d;
    for k in 0..d {
        let inv_h = 1.0 / grid.spacing(k);
        for (p, &[lo, hi]) in grid.edges(k).iter().enumerate() {
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
                out[p * dd + i * d + k] = (b - a) * inv_h;
            }
        }
    }
}

/// Backward-difference divergence, the exact negative adjoint of [`gradient`].
pub fn divergence(f: &GradientField) -> VectorField {
    let grid = f.grid();
    let mut out = vec![0.0; grid.node_count() * grid.dim()];
    divergence_add(grid, f.values(), 1.0, &mut out);
    VectorField::from_raw(grid, out)
}

/// `out += scale * div(F)` on raw slices.
pub(crate) fn divergence_add(grid: &GridSpec, f: &[f64], scale: f64, out: &mut [f64]) {
    let d = grid.dim();
    let dd = d * d;
    for k in 0..d {
        let s = scale / grid.spacing(k);
        for (p, &[lo, hi]) in grid.edges(k).iter().enumerate() {
            for i in 0..d {
                let flux = f[p * dd + i * d + k] * s;
                if hi != GHOST {
                    out[hi as usize * d + i] -= flux;
                }
                if lo != GHOST {
                    out[lo as usize * d + i] += flux;
                }
            }
        }
    }
}

/// `(u, w) = h * sum_nodes u . w`.
pub fn inner(u: &VectorField, w: &VectorField) -> Result<f64> {
    same_grid(u.grid(), w.grid())?;
    Ok(u.grid().cell_volume() * dot(u.values(), w.values()))
}

/// `(F, G) = h * sum_points F : G`.
pub fn inner_gradient(f: &GradientField, g: &GradientField) -> Result<f64> {
    same_grid(f.grid(), g.grid())?;
    Ok(f.grid().cell_volume() * dot(f.values(), g.values()))
}

/// Fixed-order dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
