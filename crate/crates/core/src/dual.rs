//! The dual problem: a linear parabolic system with frozen, time-reversed,
//! space-time mollified coefficients, and the audits built on it (L¹
//! contraction, the duality identity, the L∞ certificate).
//!
//! Dual step `m` (backward over primal step `n = N - 1 - m`) solves
//!
//! ```text
//! psi^n / dt + D^T((nu + B^n) D psi^n) + T_n psi^n = psi^{n+1} / dt
//! ```
//!
//! with `B^n = a_eta(mu, v)` at primal time `n + 1` and `T_n` either the exact
//! transpose of the primal's centered convection with velocity `J(v^n)` or a
//! flux-form upwind discretization of `-div(J(v^n) psi)`. With the exact
//! transpose, pairing against the primal steps telescopes to
//!
//! ```text
//! (v^N, phi0) = (v^0, psi^0) + I_eta,
//! I_eta = sum_n dt ((B^n - a(mu, v^{n+1})) D v^{n+1}, D psi^n).
//! ```

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{PlapError, Result};
use crate::linalg::pcg;
use crate::mesh::{
    gradient, gradient_into, inner, linf, pointwise_magnitudes, GradientField, GridSpec, NormKind,
    Normed, Trajectory, VectorField, GHOST,
};
use crate::mollify::mollify_spacetime;
use crate::operators::{
    convective_transpose_add, diffusivity_unchecked, floored, transport_divergence, FrozenOperator,
    ProblemParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualTransport {
    /// Transpose of the primal's centered convection.
    Adjoint,
    /// Flux-form upwinding of `-div(w psi)`.
    Upwind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualConfig {
    /// Relative update tolerance of the transport fixed point.
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub transport: DualTransport,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            tol: 1e-13,
            max_iter: 200,
            linear_tol: 1e-13,
            linear_max_iter: 20_000,
            transport: DualTransport::Adjoint,
        }
    }
}

/// Coefficients of the dual problem on `[0, t]`, stored in dual-time order.
#[derive(Clone, Debug)]
pub struct DualCoefficients {
    grid: GridSpec,
    dt: f64,
    t: f64,
    mu: f64,
    p: f64,
    eta: f64,
    /// `b[m]` per gradient point.
    b: Vec<Vec<f64>>,
    /// `w[m] = J(v^{N-1-m})`, absent without convection.
    transport: Option<Vec<VectorField>>,
}

/// Result of the M-matrix check on the adjoint transport.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MMatrixCheck {
    pub holds: bool,
    /// `min (nu + b) / h - |w_k| / 2` over nodes and axes.
    pub worst_margin: f64,
}

impl DualCoefficients {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn steps(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self, m: usize) -> &[f64] {
        &self.b[m]
    }

    pub fn transport(&self, m: usize) -> Option<&VectorField> {
        self.transport.as_ref().map(|w| &w[m])
    }

    /// Centered divergence of the transport field at dual step `m`.
    pub fn transport_divergence(&self, m: usize) -> Option<Vec<f64>> {
        self.transport(m).map(transport_divergence)
    }

    /// `(min b, max b)` over all steps and points.
    pub fn b_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for b in &self.b {
            for &x in b {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }

    /// Whether every dual step matrix (with the adjoint transport) is an
    /// M-matrix, which makes each step an L¹ contraction.
    pub fn m_matrix_check(&self, nu: f64) -> MMatrixCheck {
        let d = self.grid.dim();
        let mut worst = f64::INFINITY;
        let Some(ws) = &self.transport else {
            return MMatrixCheck {
                holds: true,
                worst_margin: worst,
            };
        };
        for (b, w) in self.b.iter().zip(ws) {
            for k in 0..d {
                let h = self.grid.spacing(k);
                for (pt, &[lo, hi]) in self.grid.edges(k).iter().enumerate() {
                    let c = (nu + b[pt]) / h;
                    for node in [lo, hi] {
                        if node != GHOST {
                            let wk = w.values()[node as usize * d + k].abs();
                            worst = worst.min(c - 0.5 * wk);
                        }
                    }
                }
            }
        }
        MMatrixCheck {
            holds: worst >= 0.0,
            worst_margin: worst,
        }
    }
}

/// Number of primal steps covering `[t_start, t]`.
fn segment_steps(traj: &Trajectory, t: f64) -> Result<usize> {
    let span = t - traj.t_start();
    let n = (span / traj.dt()).round();
    if !(n >= 1.0) || (n * traj.dt() - span).abs() > 1e-9 * traj.dt().max(span) {
        return Err(PlapError::usage(format!(
            "t = {t} is not a positive multiple of dt past the trajectory start"
        )));
    }
    let n = n as usize;
    if n > traj.steps() {
        return Err(PlapError::usage(format!(
            "t = {t} exceeds the trajectory horizon {}",
            traj.time(traj.steps())
        )));
    }
    Ok(n)
}

/// Time-reverse `traj` on `[0, t]`, mollify its gradients in space-time with
/// radius `eta`, and evaluate the diffusivity; also the lagged transport
/// velocities the primal used.
pub fn build_dual_coefficients(
    traj: &Trajectory,
    t: f64,
    params: &ProblemParams,
    eta: f64,
) -> Result<DualCoefficients> {
    if !(params.mu > 0.0) {
        return Err(PlapError::usage("dual coefficients need mu > 0"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(PlapError::usage(format!("eta must be positive, got {eta}")));
    }
    let n = segment_steps(traj, t)?;
    let grid = traj.grid().clone();
    let reversed: Vec<GradientField> = (0..=n).rev().map(|j| gradient(traj.field(j))).collect();
    let smooth = mollify_spacetime(&reversed, traj.dt(), eta)?;
    let mu = params.mu;
    let p = params.p;
    let b = smooth[..n]
        .iter()
        .map(|g| {
            g.squared_magnitudes()
                .into_iter()
                .map(|g2| diffusivity_unchecked(mu + g2, p))
                .collect()
        })
        .collect();
    let kernel = params.conv_kernel(&grid)?;
    let transport = (0..n)
        .map(|m| params.transport(traj.field(n - 1 - m), kernel.as_ref()))
        .collect::<Option<Vec<_>>>();
    Ok(DualCoefficients {
        grid,
        dt: traj.dt(),
        t,
        mu,
        p,
        eta,
        b,
        transport,
    })
}

/// `out += scale * delta_up(w psi)`, flux form, upwinded against `-w`.
pub(crate) fn upwind_divergence_add(
    grid: &GridSpec,
    w: &[f64],
    psi: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let d = grid.dim();
    for k in 0..d {
        let s = scale / grid.spacing(k);
        for &[lo, hi] in grid.edges(k) {
            let wl = if lo == GHOST {
                0.0
            } else {
                w[lo as usize * d + k]
            };
            let wh = if hi == GHOST {
                0.0
            } else {
                w[hi as usize * d + k]
            };
            let wf = 0.5 * (wl + wh);
            let up = if wf > 0.0 { hi } else { lo };
            if up == GHOST || wf == 0.0 {
                continue;
            }
            for i in 0..d {
                let f = s * wf * psi[up as usize * d + i];
                if hi != GHOST {
                    out[hi as usize * d + i] -= f;
                }
                if lo != GHOST {
                    out[lo as usize * d + i] += f;
                }
            }
        }
    }
}

/// Dual trajectory in dual time `s`: `psi[0] = phi0`, `psi[m] = psi^{N-m}`.
#[derive(Clone, Debug)]
pub struct DualRun {
    pub psi: Vec<VectorField>,
    pub ds: f64,
    pub eta: f64,
    pub l1: Vec<f64>,
    /// Fixed-point update at acceptance, per dual step.
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub m_matrix: MMatrixCheck,
    pub transport: DualTransport,
}

impl DualRun {
    pub fn phi0(&self) -> &VectorField {
        &self.psi[0]
    }

    /// `psi^0`, the dual state paired with the primal datum.
    pub fn last(&self) -> &VectorField {
        self.psi.last().expect("nonempty")
    }

    /// CSV with columns `s,l1,linf,residual`.
    pub fn audit_csv(&self) -> String {
        let mut s = String::from("# plap-dual v1\ns,l1,linf,residual\n");
        for (m, psi) in self.psi.iter().enumerate() {
            let res = if m == 0 { 0.0 } else { self.residuals[m - 1] };
            s.push_str(&format!(
                "{:?},{:?},{:?},{:?}\n",
                m as f64 * self.ds,
                self.l1[m],
                linf(psi),
                res
            ));
        }
        s
    }
}

/// Backward-Euler-in-`s` solve of the dual system from `phi0`.
pub fn solve_dual(
    phi0: &VectorField,
    coeffs: &DualCoefficients,
    nu: f64,
    config: &DualConfig,
) -> Result<DualRun> {
    if !(nu > 0.0) {
        return Err(PlapError::usage("the dual problem needs nu > 0"));
    }
    if phi0.grid() != coeffs.grid() {
        return Err(PlapError::usage("phi0 is not on the coefficient grid"));
    }
    let grid = coeffs.grid();
    let dt = coeffs.dt;
    let len = phi0.values().len();
    let mut psi = vec![phi0.clone()];
    let mut l1 = vec![phi0.norm(&NormKind::Lp(1.0))?];
    let mut residuals = Vec::with_capacity(coeffs.steps());
    let mut iterations = Vec::with_capacity(coeffs.steps());
    let mut coef = vec![0.0; grid.point_count()];
    let mut rhs = vec![0.0; len];
    for m in 0..coeffs.steps() {
        for (c, b) in coef.iter_mut().zip(&coeffs.b[m]) {
            *c = nu + b;
        }
        let op = FrozenOperator {
            grid,
            mass: 1.0 / dt,
            coef: &coef,
        };
        let diag = op.diagonal();
        let prev = psi[m].values();
        let w = coeffs.transport(m);
        let mut x = prev.to_vec();
        let mut y = x.clone();
        let mut last = 0.0;
        let mut accepted = None;
        for it in 1..=config.max_iter {
            for (r, v) in rhs.iter_mut().zip(prev) {
                *r = v / dt;
            }
            if let Some(w) = w {
                match config.transport {
                    DualTransport::Adjoint => {
                        convective_transpose_add(grid, w.values(), &x, -1.0, &mut rhs)
                    }
                    DualTransport::Upwind => {
                        upwind_divergence_add(grid, w.values(), &x, 1.0, &mut rhs)
                    }
                }
            }
            y.copy_from_slice(&x);
            let stats = pcg(
                |a, b| op.apply(a, b),
                &diag,
                &rhs,
                &mut y,
                config.linear_tol,
                config.linear_max_iter,
            );
            if !stats.converged {
                return Err(PlapError::LinearSolver {
                    step: m + 1,
                    iterations: stats.iterations,
                    residual: stats.relative_residual,
                });
            }
            let (mut diff, mut size) = (0.0, 0.0);
            for (a, b) in y.iter().zip(&x) {
                diff += (a - b) * (a - b);
                size += a * a;
            }
            last = if size == 0.0 {
                diff.sqrt()
            } else {
                (diff / size).sqrt()
            };
            std::mem::swap(&mut x, &mut y);
            if w.is_none() || last < config.tol {
                accepted = Some(it);
                break;
            }
        }
        let Some(it) = accepted else {
            return Err(PlapError::NonConvergence {
                step: m + 1,
                iterations: config.max_iter,
                residual: last,
            });
        };
        let next = VectorField::from_values(grid, x)?;
        l1.push(next.norm(&NormKind::Lp(1.0))?);
        residuals.push(last);
        iterations.push(it);
        psi.push(next);
    }
    let m_matrix = match config.transport {
        DualTransport::Adjoint => coeffs.m_matrix_check(nu),
        DualTransport::Upwind => MMatrixCheck {
            holds: true,
            worst_margin: f64::INFINITY,
        },
    };
    Ok(DualRun {
        psi,
        ds: dt,
        eta: coeffs.eta,
        l1,
        residuals,
        iterations,
        m_matrix,
        transport: config.transport,
    })
}

/// `max_s ||psi(s)||_1 / ||phi0||_1`; 1 for a zero datum.
pub fn l1_audit(run: &DualRun) -> f64 {
    let l0 = run.l1[0];
    if l0 == 0.0 {
        return 1.0;
    }
    run.l1.iter().fold(0.0f64, |m, &x| m.max(x / l0))
}

/// Both sides of the duality identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityIdentity {
    /// `(v(t), phi0)`.
    pub lhs: f64,
    /// `(v0, psi(t)) + I_eta`.
    pub rhs: f64,
    pub i_eta: f64,
    /// `|lhs - rhs| / (|lhs| + |(v0, psi(t))| + |I_eta|)`, 0 when all vanish.
    pub relative_residual: f64,
}

/// Pair the primal trajectory against a dual run built from it.
pub fn duality_identity(
    traj: &Trajectory,
    coeffs: &DualCoefficients,
    run: &DualRun,
) -> Result<DualityIdentity> {
    let n = coeffs.steps();
    if traj.grid() != coeffs.grid() || run.psi.len() != n + 1 || (traj.dt() - coeffs.dt).abs() > 0.0
    {
        return Err(PlapError::usage(
            "dual run was not built from this trajectory",
        ));
    }
    if segment_steps(traj, coeffs.t)? != n {
        return Err(PlapError::usage("dual run covers a different time segment"));
    }
    let grid = traj.grid();
    let d2 = grid.dim() * grid.dim();
    let h = grid.cell_volume();
    let mu = floored(coeffs.mu);
    let mut gv = vec![0.0; grid.point_count() * d2];
    let mut gp = vec![0.0; grid.point_count() * d2];
    let mut i_eta = 0.0;
    for m in 0..n {
        let step = n - 1 - m;
        gradient_into(grid, traj.field(step + 1).values(), &mut gv);
        gradient_into(grid, run.psi[m + 1].values(), &mut gp);
        let b = &coeffs.b[m];
        let mut acc = 0.0;
        for (pt, (x, y)) in gv.chunks_exact(d2).zip(gp.chunks_exact(d2)).enumerate() {
            let g2: f64 = x.iter().map(|t| t * t).sum();
            let a = diffusivity_unchecked(mu + g2, coeffs.p);
            let pair: f64 = x.iter().zip(y).map(|(s, t)| s * t).sum();
            acc += (b[pt] - a) * pair;
        }
        i_eta += coeffs.dt * h * acc;
    }
    let lhs = inner(traj.field(n), run.phi0())?;
    let base = inner(traj.first(), run.last())?;
    let rhs = base + i_eta;
    let scale = lhs.abs() + base.abs() + i_eta.abs();
    Ok(DualityIdentity {
        lhs,
        rhs,
        i_eta,
        relative_residual: if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        },
    })
}

/// `v / ||v||_1`, or `v` itself when it vanishes.
pub fn normalized_l1(v: &VectorField) -> Result<VectorField> {
    let l1 = v.norm(&NormKind::Lp(1.0))?;
    Ok(if l1 > 0.0 {
        v.scaled(1.0 / l1)
    } else {
        v.clone()
    })
}

/// One-hot probe at `node` along `direction`, with unit L¹ norm.
pub fn one_hot_probe(grid: &GridSpec, node: usize, direction: &[f64]) -> VectorField {
    let d = grid.dim();
    let len: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut values = vec![0.0; grid.node_count() * d];
    for i in 0..d {
        values[node * d + i] = direction[i] / (len * grid.cell_volume());
    }
    VectorField::from_values(grid, values).expect("finite probe")
}

/// Probe bank: every one-hot probe (along `v(t)`, or `e_1` where it vanishes)
/// on grids with at most `32^d` nodes, otherwise the maximizer of `|v(t)|`
/// plus `random` seeded nodes.
pub fn probe_bank(v: &VectorField, random: usize, seed: u64) -> Vec<VectorField> {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let grid = v.grid();
    let d = grid.dim();
    let direction = |i: usize| {
        let x = v.at(i);
        if x.iter().all(|&c| c == 0.0) {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        } else {
            x.to_vec()
        }
    };
    let nodes: Vec<usize> = if grid.node_count() <= 32usize.pow(d as u32) {
        (0..grid.node_count()).collect()
    } else {
        let mags = pointwise_magnitudes(v);
        let argmax = (0..mags.len()).fold(0, |b, i| if mags[i] > mags[b] { i } else { b });
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = vec![argmax];
        for i in sample(&mut rng, grid.node_count(), random.min(grid.node_count())).into_iter() {
            if i != argmax {
                nodes.push(i);
            }
        }
        nodes
    };
    nodes
        .into_iter()
        .map(|i| one_hot_probe(grid, i, &direction(i)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfCertificate {
    /// `max_probe |(v(t), phi0)|`, a lower bound of `||v(t)||_inf`.
    pub lower: f64,
    /// `max_probe |(v0, psi(t))| + |I_eta|`.
    pub pairing_upper: f64,
    /// `||v0||_inf * max L¹ ratio + max |I_eta|`.
    pub upper: f64,
    pub measured: f64,
    pub max_l1_ratio: f64,
    pub max_i_eta: f64,
    pub probes: usize,
}

pub fn linf_certificate(
    traj: &Trajectory,
    coeffs: &DualCoefficients,
    nu: f64,
    config: &DualConfig,
    probes: &[VectorField],
) -> Result<LinfCertificate> {
    let n = coeffs.steps();
    let v_t = traj.field(n);
    let mut lower: f64 = 0.0;
    let mut pairing_upper: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let mut max_i: f64 = 0.0;
    for phi0 in probes {
        let run = solve_dual(phi0, coeffs, nu, config)?;
        let id = duality_identity(traj, coeffs, &run)?;
        lower = lower.max(inner(v_t, phi0)?.abs());
        pairing_upper = pairing_upper.max((id.rhs - id.i_eta).abs() + id.i_eta.abs());
        max_ratio = max_ratio.max(l1_audit(&run));
        max_i = max_i.max(id.i_eta.abs());
    }
    Ok(LinfCertificate {
        lower,
        pairing_upper,
        upper: linf(traj.first()) * max_ratio + max_i,
        measured: linf(v_t),
        max_l1_ratio: max_ratio,
        max_i_eta: max_i,
        probes: probes.len(),
    })
}

pub const L1_BUDGET: f64 = 1.01;
pub const DUALITY_BUDGET: f64 = 5e-2;

/// L¹ ratio, duality residual and M-matrix property of one dual run.
pub fn dual_audits(run: &DualRun, identity: &DualityIdentity) -> AuditReport {
    let mut r = AuditReport::new();
    r.at_most(
        "l1-contraction",
        l1_audit(run),
        L1_BUDGET,
        "max_s ||psi||_1 / ||phi0||_1",
    );
    r.at_most(
        "duality-identity",
        identity.relative_residual,
        DUALITY_BUDGET,
        format!(
            "lhs {:e} rhs {:e} I_eta {:e}",
            identity.lhs, identity.rhs, identity.i_eta
        ),
    );
    r.record(
        "m-matrix",
        run.m_matrix.holds,
        run.m_matrix.worst_margin,
        0.0,
        "min (nu + b)/h - |w|/2",
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{convective_add, ConvectionMode};
    use crate::presets::Datum;
    use crate::solver::{solve_pfepv, SolveConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn zero_traj(grid: &GridSpec, n: usize, dt: f64) -> Trajectory {
        Trajectory::new(vec![VectorField::zeros(grid); n + 1], dt).unwrap()
    }

    #[test]
    fn zero_primal_coefficients() {
        let g = GridSpec::unit(2, 8).unwrap();
        let params = ProblemParams::new(1.5, 0.04, 0.1).unwrap();
        let c = build_dual_coefficients(&zero_traj(&g, 10, 0.01), 0.1, &params, 0.01).unwrap();
        assert_eq!(c.steps(), 10);
        let expect = 0.04f64.powf(-0.25);
        for m in 0..10 {
            assert!(c.b(m).iter().all(|&b| (b - expect).abs() < 1e-12));
            assert!(c.transport(m).unwrap().is_zero());
        }
        assert!(build_dual_coefficients(&zero_traj(&g, 10, 0.01), 0.2, &params, 0.01).is_err());
    }

    #[test]
    fn constant_trajectory_gives_constant_coefficients() {
        let g = GridSpec::unit(2, 8).unwrap();
        let v = Datum::Bump.build(&g, 1.0, 0);
        let traj = Trajectory::new(vec![v; 9], 0.01).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.1).unwrap();
        let c = build_dual_coefficients(&traj, 0.08, &params, 0.02).unwrap();
        for m in 1..c.steps() {
            for (a, b) in c.b(m).iter().zip(c.b(0)) {
                assert!((a - b).abs() <= 1e-14 * b);
            }
        }
        let (lo, hi) = c.b_range();
        assert!(lo > 0.0 && hi <= 0.1f64.powf(-0.25));
    }

    #[test]
    fn zero_datum_stays_zero() {
        let g = GridSpec::unit(2, 8).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.1).unwrap();
        let c = build_dual_coefficients(&zero_traj(&g, 5, 0.01), 0.05, &params, 0.02).unwrap();
        let run = solve_dual(&VectorField::zeros(&g), &c, 0.1, &DualConfig::default()).unwrap();
        assert!(run.psi.iter().all(|p| p.is_zero()));
        assert_eq!(l1_audit(&run), 1.0);
    }

    #[test]
    fn zero_primal_heat_recurrence() {
        let g = GridSpec::new(&[1.0], &[255]).unwrap();
        let (nu, mu, p, ds) = (0.1, 1.0, 1.5, 1e-3);
        let params = ProblemParams::new(p, mu, nu).unwrap();
        let c = build_dual_coefficients(
            &zero_traj(&g, 40, ds),
            40.0 * ds,
            &params,
            4.0 * g.spacing(0),
        )
        .unwrap();
        let phi0 = VectorField::from_fn(&g, |x, o| o[0] = (PI * x[0]).sin());
        let run = solve_dual(&phi0, &c, nu, &DualConfig::default()).unwrap();
        let factor = 1.0 / (1.0 + (nu + mu.powf(0.5 * (p - 2.0))) * PI * PI * ds);
        let expect = factor.powi(40);
        for (a, b) in run.last().values().iter().zip(phi0.values()) {
            assert!((a - expect * b).abs() <= 1e-4 * b.abs() + 1e-14);
        }
        assert!(l1_audit(&run) <= 1.0 + 1e-10);
    }

    #[test]
    fn upwind_is_conservative_in_the_interior() {
        let g = GridSpec::unit(2, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = crate::mesh::random_field(&g, &mut rng);
        let psi = crate::mesh::random_field(&g, &mut rng);
        let mut out = vec![0.0; psi.values().len()];
        upwind_divergence_add(&g, w.values(), psi.values(), 1.0, &mut out);
        // Flux form: the total is the net boundary flux, which is zero when the
        // boundary-adjacent values vanish.
        let mut psi_in = psi.values().to_vec();
        for i in 0..g.node_count() {
            let m = g.node_multi_index(i);
            if m[0] == 0 || m[1] == 0 || m[0] == 10 || m[1] == 10 {
                psi_in[2 * i] = 0.0;
                psi_in[2 * i + 1] = 0.0;
            }
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        upwind_divergence_add(&g, w.values(), &psi_in, 1.0, &mut out);
        let total: f64 = out.iter().sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn transpose_matches_primal_convection() {
        let g = GridSpec::unit(2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = crate::mesh::random_field(&g, &mut rng);
        let v = crate::mesh::random_field(&g, &mut rng);
        let psi = crate::mesh::random_field(&g, &mut rng);
        let mut cv = vec![0.0; v.values().len()];
        convective_add(&g, w.values(), v.values(), 1.0, &mut cv);
        let mut ct = vec![0.0; v.values().len()];
        convective_transpose_add(&g, w.values(), psi.values(), 1.0, &mut ct);
        let a: f64 = cv.iter().zip(psi.values()).map(|(x, y)| x * y).sum();
        let b: f64 = ct.iter().zip(v.values()).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn identity_and_contraction_on_a_short_run() {
        let g = GridSpec::unit(2, 16).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.5, 1e-1, 1e-1).unwrap();
        let cfg = SolveConfig::new(2e-3, 0.2);
        let run = solve_pfepv(&v0, &params, &cfg).unwrap();
        let coeffs = build_dual_coefficients(&run.trajectory, 0.2, &params, g.spacing(0)).unwrap();
        let phi0 = Datum::Bump.build(&g, 1.0, 0);
        let dual = solve_dual(&phi0, &coeffs, params.nu, &DualConfig::default()).unwrap();
        let id = duality_identity(&run.trajectory, &coeffs, &dual).unwrap();
        assert!(id.relative_residual < 1e-8, "{id:?}");
        assert!(id.i_eta != 0.0);
        assert!(dual.m_matrix.holds);
        assert!(l1_audit(&dual) <= 1.0 + 1e-12);
        assert!(dual_audits(&dual, &id).passed());

        let upwind = DualConfig {
            transport: DualTransport::Upwind,
            ..DualConfig::default()
        };
        let dual_up = solve_dual(&phi0, &coeffs, params.nu, &upwind).unwrap();
        assert!(l1_audit(&dual_up) <= 1.0 + 1e-12);
        assert!(
            duality_identity(&run.trajectory, &coeffs, &dual_up)
                .unwrap()
                .relative_residual
                < 5e-2
        );
    }

    #[test]
    fn one_hot_probes_reproduce_the_max() {
        let g = GridSpec::unit(2, 8).unwrap();
        let v = Datum::RandomSmooth.build(&g, 1.0, 3);
        let bank = probe_bank(&v, 0, 0);
        assert_eq!(bank.len(), g.node_count());
        let best = bank
            .iter()
            .map(|p| inner(&v, p).unwrap().abs())
            .fold(0.0, f64::max);
        assert!((best - linf(&v)).abs() < 1e-14);
        for p in &bank {
            assert!((p.norm(&NormKind::Lp(1.0)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_on_zero_and_short_runs() {
        let g = GridSpec::unit(2, 6).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.1).unwrap();
        let zero = zero_traj(&g, 4, 0.01);
        let c = build_dual_coefficients(&zero, 0.04, &params, 0.01).unwrap();
        let cert = linf_certificate(
            &zero,
            &c,
            0.1,
            &DualConfig::default(),
            &probe_bank(zero.last(), 0, 0),
        )
        .unwrap();
        assert_eq!((cert.lower, cert.measured, cert.max_i_eta), (0.0, 0.0, 0.0));

        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let run = solve_pfepv(&v0, &params, &SolveConfig::new(1e-2, 0.04)).unwrap();
        let c = build_dual_coefficients(&run.trajectory, 0.04, &params, 0.01).unwrap();
        let probes = probe_bank(run.trajectory.last(), 0, 0);
        let cert =
            linf_certificate(&run.trajectory, &c, 0.1, &DualConfig::default(), &probes).unwrap();
        assert!((cert.lower - cert.measured).abs() < 1e-12);
        assert!(cert.lower <= cert.pairing_upper + 1e-10);
        assert!(cert.lower <= cert.upper);
    }

    #[test]
    fn raw_convection_needs_no_kernel() {
        let g = GridSpec::unit(2, 8).unwrap();
        let v = Datum::Bump.build(&g, 1.0, 0);
        let traj = Trajectory::new(vec![v.clone(); 5], 0.01).unwrap();
        let params = ProblemParams::new(1.5, 0.1, 0.1)
            .unwrap()
            .with_convection(ConvectionMode::Raw);
        let c = build_dual_coefficients(&traj, 0.04, &params, 0.01).unwrap();
        assert_eq!(c.transport(0).unwrap().values(), v.values());
        assert!(c.transport_divergence(0).unwrap().iter().any(|&x| x != 0.0));
    }
}
