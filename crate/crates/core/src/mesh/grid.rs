use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PlapError, Result};

/// Marker for a neighbor slot that falls on the zero Dirichlet boundary.
pub const GHOST: u32 = u32::MAX;

/// Box domain `[0, L_1] x ... x [0, L_d]` with `n_k` interior nodes per axis.
///
/// Nodes sit at `x_k = (i_k + 1) h_k` for `i_k in 0..n_k`; the boundary
/// layer `i_k = -1, n_k` is an implicit zero ghost. Gradients live on the
/// point lattice `j_k in 0..=n_k`, where point `j` carries the forward
/// difference from node `j - 1` to node `j` along each axis (nodes indexed
/// with the ghost layer included, so lattice point 0 starts at the wall).
#[derive(Clone, Serialize, Deserialize)]
#[serde(into = "GridDesc", try_from = "GridDesc")]
pub struct GridSpec {
    extents: Vec<f64>,
    counts: Vec<usize>,
    topo: Arc<Topology>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GridDesc {
    extents: Vec<f64>,
    counts: Vec<usize>,
}

impl From<GridSpec> for GridDesc {
    fn from(g: GridSpec) -> Self {
        GridDesc {
            extents: g.extents,
            counts: g.counts,
        }
    }
}

impl TryFrom<GridDesc> for GridSpec {
    type Error = PlapError;

    fn try_from(desc: GridDesc) -> Result<Self> {
        GridSpec::new(&desc.extents, &desc.counts)
    }
}

impl std::fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSpec")
            .field("extents", &self.extents)
            .field("counts", &self.counts)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts && self.extents == other.extents
    }
}

#[derive(Debug)]
struct Topology {
    node_count: usize,
    point_count: usize,
    /// Per axis, per lattice point: (lower node, upper node) of its forward difference.
    edges: Vec<Vec<[u32; 2]>>,
    /// Per axis, per node: (node - e_k, node + e_k).
    neighbors: Vec<Vec<[u32; 2]>>,
}

impl GridSpec {
    pub fn new(extents: &[f64], counts: &[usize]) -> Result<Self> {
        let d = extents.len();
        if !(1..=3).contains(&d) {
            return Err(PlapError::usage(format!(
                "grid dimension must be 1, 2 or 3, got {d}"
            )));
        }
        if counts.len() != d {
            return Err(PlapError::usage(
                "extents and counts must have the same length",
            ));
        }
        if let Some(l) = extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(PlapError::usage(format!(
                "grid extent must be positive and finite, got {l}"
            )));
        }
        if counts.contains(&0) {
            return Err(PlapError::usage(
                "every axis needs at least one interior node",
            ));
        }
        let total: usize = counts.iter().map(|n| n + 1).product();
        if total >= GHOST as usize {
            return Err(PlapError::usage("grid too large for 32-bit node indices"));
        }
        let topo = Arc::new(Topology::build(counts));
        Ok(GridSpec {
            extents: extents.to_vec(),
            counts: counts.to_vec(),
            topo,
        })
    }

    /// Unit box with `cells` cells per axis (`cells - 1` interior nodes, `h = 1/cells`).
    pub fn unit(d: usize, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(PlapError::usage(
                "a unit grid needs at least 2 cells per axis",
            ));
        }
        GridSpec::new(&vec![1.0; d], &vec![cells - 1; d])
    }

    /// Rebuilds a grid from counts and spacings so that `spacing(k)` reproduces
    /// each `h_k` bit for bit.
    pub fn from_spacings(counts: &[usize], spacings: &[f64]) -> Result<Self> {
        if counts.len() != spacings.len() {
            return Err(PlapError::usage(
                "counts and spacings must have the same length",
            ));
        }
        let mut extents = Vec::with_capacity(counts.len());
        for (&n, &h) in counts.iter().zip(spacings) {
            if !(h.is_finite() && h > 0.0) {
                return Err(PlapError::Format(format!("invalid spacing {h}")));
            }
            let cells = (n + 1) as f64;
            let mut l = h * cells;
            // Walk a few ulps until L/(n+1) lands exactly on h.
            let mut found = false;
            for _ in 0..64 {
                let hh = l / cells;
                if hh == h {
                    found = true;
                    break;
                }
                l = if hh < h { next_up(l) } else { next_down(l) };
            }
            if !found {
                return Err(PlapError::Format(format!(
                    "spacing {h} is not representable as L/{}",
                    n + 1
                )));
            }
            extents.push(l);
        }
        GridSpec::new(&extents, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.extents[k] / (self.counts[k] + 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spacing(k)).collect()
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight `h = prod h_k` shared by nodes and gradient points.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// `|Omega| = prod L_k`.
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.topo.node_count
    }

    pub fn point_count(&self) -> usize {
        self.topo.point_count
    }

    /// Physical coordinates of interior node `index` (row-major, last axis fastest).
    pub fn node_coords(&self, index: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = index;
        for k in (0..self.dim()).rev() {
            let n = self.counts[k];
            out[k] = ((rem % n) + 1) as f64 * self.spacing(k);
            rem /= n;
        }
        out
    }

    /// Multi-index of interior node `index`.
    pub fn node_multi_index(&self, index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = index;
        for k in (0..self.dim()).rev() {
            let n = self.counts[k];
            out[k] = rem % n;
            rem /= n;
        }
        out
    }

    /// Flat index of the interior node with the given multi-index.
    pub fn node_index(&self, multi: &[usize]) -> usize {
        self.counts[..self.dim()]
            .iter()
            .zip(multi)
            .fold(0, |idx, (n, m)| idx * n + m)
    }

    /// Lattice coordinates `j` of gradient point `index` (`j_k in 0..=n_k`).
    pub fn point_multi_index(&self, index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = index;
        for k in (0..self.dim()).rev() {
            let n = self.counts[k] + 1;
            out[k] = rem % n;
            rem /= n;
        }
        out
    }

    /// Location where the axis-`k` difference of point `index` is second-order accurate:
    /// the midpoint of the edge it spans.
    pub fn face_center(&self, index: usize, k: usize) -> [f64; 3] {
        let j = self.point_multi_index(index);
        let mut out = [0.0; 3];
        for m in 0..self.dim() {
            let shift = if m == k { 0.5 } else { 0.0 };
            out[m] = (j[m] as f64 + shift) * self.spacing(m);
        }
        out
    }

    pub(crate) fn edges(&self, k: usize) -> &[[u32; 2]] {
        &self.topo.edges[k]
    }

    pub(crate) fn neighbors(&self, k: usize) -> &[[u32; 2]] {
        &self.topo.neighbors[k]
    }
}

impl Topology {
    fn build(counts: &[usize]) -> Self {
        let d = counts.len();
        let node_count: usize = counts.iter().product();
        let point_count: usize = counts.iter().map(|n| n + 1).product();

        let node_of = |full: &[isize]| -> u32 {
            // `full` uses 1-based interior coordinates, 0 and n+1 are ghosts.
            let mut idx = 0usize;
            for k in 0..d {
                let c = full[k];
                if c < 1 || c > counts[k] as isize {
                    return GHOST;
                }
                idx = idx * counts[k] + (c - 1) as usize;
            }
            idx as u32
        };

        let mut edges = vec![Vec::with_capacity(point_count); d];
        let mut j = [0isize; 3];
        for _ in 0..point_count {
            for (k, axis) in edges.iter_mut().enumerate() {
                let lo = node_of(&j[..d]);
                let mut up = j;
                up[k] += 1;
                let hi = node_of(&up[..d]);
                axis.push([lo, hi]);
            }
            // Advance the point lattice counter (last axis fastest).
            for k in (0..d).rev() {
                j[k] += 1;
                if j[k] <= counts[k] as isize {
                    break;
                }
                j[k] = 0;
            }
        }

        let mut neighbors = vec![Vec::with_capacity(node_count); d];
        let mut c = [1isize; 3];
        for _ in 0..node_count {
            for (k, axis) in neighbors.iter_mut().enumerate() {
                let mut lo = c;
                lo[k] -= 1;
                let mut hi = c;
                hi[k] += 1;
                axis.push([node_of(&lo[..d]), node_of(&hi[..d])]);
            }
            for k in (0..d).rev() {
                c[k] += 1;
                if c[k] <= counts[k] as isize {
                    break;
                }
                c[k] = 1;
            }
        }

        Topology {
            node_count,
            point_count,
            edges,
            neighbors,
        }
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}
