//! Backward-Euler time stepping with Kačanov iteration, the per-step energy
//! ledger, the closed-form local bounds, and the run-level audits.
//!
//! One step solves
//!
//! ```text
//! (v' - v) / dt - div((nu + a(mu, v')) grad v') + J(v) . grad v' = 0
//! ```
//!
//! by freezing `a` (and the transported field) at the previous Kačanov
//! iterate, which leaves an SPD system for PCG.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{PlapError, Result};
use crate::linalg::pcg;
use crate::mesh::io::{load_field, save_field};
use crate::mesh::{
    gradient_into, inner, linf, GridSpec, NormKind, Normed, Trajectory, VectorField,
};
use crate::mollify::Kernel;
use crate::operators::{
    convective_add, diffusivity_unchecked, ConvectionMode, FrozenOperator, ProblemParams,
};

pub const LEDGER_SCHEMA: &str = "# plap-ledger v1";

/// What the transported field in `J(v_n) . grad v` is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvectionTreatment {
    /// Velocity from `v_n`, transported field implicit (`v_{n+1}`).
    Lagged,
    /// Both from `v_n`.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub convection: ConvectionTreatment,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            dt: 1e-3,
            t_final: 0.25,
            tol: 1e-10,
            max_iter: 50,
            linear_tol: 1e-12,
            linear_max_iter: 20_000,
            convection: ConvectionTreatment::Lagged,
        }
    }
}

impl SolveConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SolveConfig {
            dt,
            t_final,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PlapError::usage(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(PlapError::usage(format!(
                "T must be positive, got {}",
                self.t_final
            )));
        }
        if self.dt > self.t_final {
            return Err(PlapError::usage(format!(
                "dt <= T violated: dt = {} > T = {}",
                self.dt, self.t_final
            )));
        }
        if !(self.tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(PlapError::usage("tolerances must be positive"));
        }
        if self.max_iter == 0 || self.linear_max_iter == 0 {
            return Err(PlapError::usage("iteration limits must be positive"));
        }
        self.steps().map(|_| ())
    }

    /// `N = T / dt`, which must be (numerically) an integer.
    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_final / self.dt).round();
        if n < 1.0 || ((n * self.dt - self.t_final).abs() > 1e-9 * self.t_final) {
            return Err(PlapError::usage(format!(
                "T = {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Which system a run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `mu, nu > 0`, mollified convection.
    Pfepv,
    /// `nu = 0`, `mu > 0`.
    Pfep,
    /// `nu = 0`, `mu` at the machine floor, raw convection ("floored direct solve").
    Limit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    /// `1/2 ||v^n||^2`.
    pub kinetic: f64,
    pub viscous: f64,
    pub pdiss: f64,
    pub convpower: f64,
    /// Relative Kačanov update at acceptance.
    pub residual: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial_kinetic: f64,
    pub rows: Vec<LedgerRow>,
}

/// Per-step energy balance: `excess = dK + viscous + pdiss + convpower`,
/// allowed up to `slack`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyCheck {
    pub step: usize,
    pub excess: f64,
    pub slack: f64,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn energy_checks(&self) -> Vec<EnergyCheck> {
        let mut prev = self.initial_kinetic;
        self.rows
            .iter()
            .map(|r| {
                let excess = r.kinetic - prev + r.viscous + r.pdiss + r.convpower;
                let scale = prev + r.kinetic + r.viscous + r.pdiss + r.convpower.abs();
                let slack = 1e-8f64.max(10.0 * r.residual) * scale;
                prev = r.kinetic;
                EnergyCheck {
                    step: r.step,
                    excess,
                    slack,
                }
            })
            .collect()
    }

    pub fn energy_violations(&self) -> Vec<EnergyCheck> {
        self.energy_checks()
            .into_iter()
            .filter(|c| c.excess > c.slack)
            .collect()
    }

    /// CSV with a schema line, then `step,t,kinetic,viscous,pdiss,convpower,residual,linf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{LEDGER_SCHEMA}").unwrap();
        writeln!(s, "step,t,kinetic,viscous,pdiss,convpower,residual,linf").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.step, r.t, r.kinetic, r.viscous, r.pdiss, r.convpower, r.residual, r.linf
            )
            .unwrap();
        }
        s
    }
}

/// Convergence record of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
    pub linear_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub regime: Regime,
    pub params: ProblemParams,
    pub config: SolveConfig,
    pub trajectory: Trajectory,
    pub ledger: EnergyLedger,
    pub steps: Vec<StepInfo>,
    pub audits: AuditReport,
}

/// `nu mu^{3/2} / (2 ||v0||^2)`; `t_final` when `v0 = 0`.
pub fn local_horizon(nu: f64, mu: f64, v0: &VectorField, t_final: f64) -> Result<f64> {
    if !(nu > 0.0 && mu > 0.0) {
        return Err(PlapError::usage("local horizon needs nu, mu > 0"));
    }
    let e0 = inner(v0, v0)?;
    if e0 == 0.0 {
        return Ok(t_final);
    }
    Ok(nu * mu.powf(1.5) / (2.0 * e0))
}

/// `nu mu^{3/2} ||v0||^2 / (nu mu^{3/2} - ||v0||^2 t)`.
pub fn energy_bound(t: f64, nu: f64, mu: f64, v0: &VectorField) -> Result<f64> {
    if !(nu > 0.0 && mu > 0.0) {
        return Err(PlapError::usage("energy bound needs nu, mu > 0"));
    }
    let e0 = inner(v0, v0)?;
    let c = nu * mu.powf(1.5);
    if e0 == 0.0 {
        return Ok(0.0);
    }
    let denom = c - e0 * t;
    if !(denom > 0.0) {
        return Err(PlapError::BoundVoid { t, blowup: c / e0 });
    }
    Ok(c * e0 / denom)
}

struct Stepper<'a> {
    grid: GridSpec,
    params: &'a ProblemParams,
    config: &'a SolveConfig,
    kernel: Option<Kernel>,
    mu: f64,
    grad: Vec<f64>,
    coef: Vec<f64>,
    rhs: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &GridSpec, params: &'a ProblemParams, config: &'a SolveConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let d = grid.dim();
        Ok(Stepper {
            grid: grid.clone(),
            params,
            config,
            kernel: params.conv_kernel(grid)?,
            mu: params.mu_eff(),
            grad: vec![0.0; grid.point_count() * d * d],
            coef: vec![0.0; grid.point_count()],
            rhs: vec![0.0; grid.node_count() * d],
        })
    }

    /// `coef = nu + a(mu, x)` at every gradient point.
    fn freeze(&mut self, x: &[f64]) {
        let d2 = self.grid.dim() * self.grid.dim();
        gradient_into(&self.grid, x, &mut self.grad);
        for (c, g) in self.coef.iter_mut().zip(self.grad.chunks_exact(d2)) {
            let g2: f64 = g.iter().map(|t| t * t).sum();
            *c = self.params.nu + diffusivity_unchecked(self.mu + g2, self.params.p);
        }
    }

    fn advance(
        &mut self,
        v_n: &VectorField,
        step: usize,
    ) -> Result<(VectorField, StepInfo, Option<VectorField>)> {
        let dt = self.config.dt;
        let w = self.params.transport(v_n, self.kernel.as_ref());
        let mut x = v_n.values().to_vec();
        let mut y = x.clone();
        let mut linear_iterations = 0;
        let mut last = f64::INFINITY;
        for it in 1..=self.config.max_iter {
            self.freeze(&x);
            for (r, v) in self.rhs.iter_mut().zip(v_n.values()) {
                *r = v / dt;
            }
            if let Some(w) = &w {
                let transported = match self.config.convection {
                    ConvectionTreatment::Lagged => &x[..],
                    ConvectionTreatment::Explicit => v_n.values(),
                };
                convective_add(&self.grid, w.values(), transported, -1.0, &mut self.rhs);
            }
            let op = FrozenOperator {
                grid: &self.grid,
                mass: 1.0 / dt,
                coef: &self.coef,
            };
            let diag = op.diagonal();
            y.copy_from_slice(&x);
            let stats = pcg(
                |a, b| op.apply(a, b),
                &diag,
                &self.rhs,
                &mut y,
                self.config.linear_tol,
                self.config.linear_max_iter,
            );
            linear_iterations += stats.iterations;
            if !stats.converged {
                return Err(PlapError::LinearSolver {
                    step,
                    iterations: stats.iterations,
                    residual: stats.relative_residual,
                });
            }
            let mut diff = 0.0;
            let mut size = 0.0;
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
            if last < self.config.tol {
                let info = StepInfo {
                    iterations: it,
                    residual: last,
                    linear_iterations,
                };
                return Ok((VectorField::from_values(&self.grid, x)?, info, w));
            }
        }
        Err(PlapError::NonConvergence {
            step,
            iterations: self.config.max_iter,
            residual: last,
        })
    }

    fn ledger_row(
        &mut self,
        step: usize,
        v: &VectorField,
        w: Option<&VectorField>,
        residual: f64,
    ) -> Result<LedgerRow> {
        let dt = self.config.dt;
        let h = self.grid.cell_volume();
        let d2 = self.grid.dim() * self.grid.dim();
        gradient_into(&self.grid, v.values(), &mut self.grad);
        let (mut g2sum, mut asum) = (0.0, 0.0);
        for g in self.grad.chunks_exact(d2) {
            let g2: f64 = g.iter().map(|t| t * t).sum();
            g2sum += g2;
            if g2 > 0.0 {
                asum += diffusivity_unchecked(self.mu + g2, self.params.p) * g2;
            }
        }
        let convpower = match w {
            Some(w) => {
                let mut c = vec![0.0; v.values().len()];
                convective_add(&self.grid, w.values(), v.values(), 1.0, &mut c);
                dt * h * c.iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>()
            }
            None => 0.0,
        };
        Ok(LedgerRow {
            step,
            t: step as f64 * dt,
            kinetic: 0.5 * inner(v, v)?,
            viscous: dt * self.params.nu * h * g2sum,
            pdiss: dt * h * asum,
            convpower,
            residual,
            linf: linf(v),
        })
    }
}

/// One backward-Euler step from `v_n`.
pub fn step(
    v_n: &VectorField,
    params: &ProblemParams,
    config: &SolveConfig,
) -> Result<(VectorField, StepInfo)> {
    let mut s = Stepper::new(v_n.grid(), params, config)?;
    s.advance(v_n, 1).map(|(v, info, _)| (v, info))
}

/// Integrate `params` from `v0` over `[0, T]`.
pub fn solve(
    v0: &VectorField,
    params: &ProblemParams,
    config: &SolveConfig,
    regime: Regime,
) -> Result<RunResult> {
    let mut stepper = Stepper::new(v0.grid(), params, config)?;
    let n = config.steps()?;
    let mut fields = Vec::with_capacity(n + 1);
    fields.push(v0.clone());
    let mut ledger = EnergyLedger {
        initial_kinetic: 0.5 * inner(v0, v0)?,
        rows: Vec::with_capacity(n),
    };
    let mut steps = Vec::with_capacity(n);
    for k in 1..=n {
        let (v, info, w) = stepper.advance(&fields[k - 1], k)?;
        ledger
            .rows
            .push(stepper.ledger_row(k, &v, w.as_ref(), info.residual)?);
        steps.push(info);
        fields.push(v);
    }
    let trajectory = Trajectory::new(fields, config.dt)?;
    let mut run = RunResult {
        regime,
        params: params.clone(),
        config: config.clone(),
        trajectory,
        ledger,
        steps,
        audits: AuditReport::new(),
    };
    run.audits = run_audits(&run)?;
    Ok(run)
}

/// The approximating system with `mu, nu > 0`.
pub fn solve_pfepv(
    v0: &VectorField,
    params: &ProblemParams,
    config: &SolveConfig,
) -> Result<RunResult> {
    if !(params.mu > 0.0 && params.nu > 0.0) {
        return Err(PlapError::usage(
            "the viscous regularized system needs mu, nu > 0",
        ));
    }
    solve(v0, params, config, Regime::Pfepv)
}

/// The intermediate system: `nu = 0`, `mu > 0`.
pub fn solve_pfep(
    v0: &VectorField,
    params: &ProblemParams,
    config: &SolveConfig,
) -> Result<RunResult> {
    if !(params.mu > 0.0) {
        return Err(PlapError::usage("the intermediate system needs mu > 0"));
    }
    let mut params = params.clone();
    params.nu = 0.0;
    solve(v0, &params, config, Regime::Pfep)
}

/// The limit system with `mu` at the machine floor and unmollified convection.
pub fn solve_limit(v0: &VectorField, p: f64, config: &SolveConfig) -> Result<RunResult> {
    let params = ProblemParams::new(p, 0.0, 0.0)?.with_convection(ConvectionMode::Raw);
    let mut config = config.clone();
    config.max_iter = config.max_iter.max(200);
    solve(v0, &params, &config, Regime::Limit)
}

/// `max_t ||v(t)||_inf / ||v0||_inf - 1` (0 for a zero datum).
pub fn max_principle_overshoot(traj: &Trajectory) -> f64 {
    let l0 = linf(traj.first());
    let peak = traj.fields().iter().map(linf).fold(0.0, f64::max);
    if l0 == 0.0 {
        if peak == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        peak / l0 - 1.0
    }
}

/// `||v||^2_{C(L^2)} + nu ||grad v||^2_{L^2(L^2)} + ||grad v||^p_{L^p(L^p)}`.
pub fn k1_aggregate(traj: &Trajectory, nu: f64, p: f64) -> Result<f64> {
    let sup = traj.norm(&NormKind::bochner(f64::INFINITY, NormKind::Lp(2.0)))?;
    let visc = traj.norm(&NormKind::bochner(2.0, NormKind::W1pSeminorm(2.0)))?;
    let grad = traj.norm(&NormKind::bochner(p, NormKind::W1pSeminorm(p)))?;
    Ok(sup * sup + nu * visc * visc + grad.powf(p))
}

/// `max_n ||v^{n+1} - v^n||_2`.
pub fn time_modulus(traj: &Trajectory) -> Result<f64> {
    let mut m: f64 = 0.0;
    for pair in traj.fields().windows(2) {
        m = m.max(pair[1].sub(&pair[0])?.norm(&NormKind::Lp(2.0))?);
    }
    Ok(m)
}

/// Largest `||v(t)||^2 / energy_bound(t)` over `t <= T*/2`.
pub fn local_bound_ratio(traj: &Trajectory, nu: f64, mu: f64) -> Result<f64> {
    let v0 = traj.first();
    let horizon = local_horizon(nu, mu, v0, traj.horizon())?;
    let mut worst: f64 = 0.0;
    for (n, v) in traj.fields().iter().enumerate() {
        let t = traj.time(n) - traj.t_start();
        if t > 0.5 * horizon {
            break;
        }
        let bound = energy_bound(t, nu, mu, v0)?;
        let e = inner(v, v)?;
        if bound > 0.0 {
            worst = worst.max(e / bound);
        } else if e > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

pub const MAX_PRINCIPLE_BUDGET: f64 = 0.02;
pub const LOCAL_BOUND_BUDGET: f64 = 1.01;

fn run_audits(run: &RunResult) -> Result<AuditReport> {
    let mut report = AuditReport::new();
    let violations = run.ledger.energy_violations();
    let worst = violations
        .iter()
        .map(|c| c.excess - c.slack)
        .fold(0.0, f64::max);
    report.at_most(
        "energy-inequality",
        violations.len() as f64,
        0.0,
        format!("violating steps; worst excess over slack {worst:e}"),
    );
    let overshoot = max_principle_overshoot(&run.trajectory);
    report.at_most(
        "max-principle",
        overshoot,
        MAX_PRINCIPLE_BUDGET,
        "max_t ||v||_inf / ||v0||_inf - 1",
    );
    let p = &run.params;
    if run.regime == Regime::Pfepv {
        let ratio = local_bound_ratio(&run.trajectory, p.nu, p.mu)?;
        report.at_most(
            "local-energy-bound",
            ratio,
            LOCAL_BOUND_BUDGET,
            "max ||v||^2 / bound on [0, T*/2]",
        );
    }
    let k1 = k1_aggregate(&run.trajectory, p.nu, p.p)?;
    report.record("k1-aggregate", k1.is_finite(), k1, f64::INFINITY, "finite");
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct RunMeta {
    regime: Regime,
    params: ProblemParams,
    config: SolveConfig,
    grid: GridSpec,
    steps: usize,
    snapshot_stride: usize,
    snapshots: Vec<(usize, String)>,
    iterations: Vec<usize>,
    linear_iterations: Vec<usize>,
    overshoot: f64,
    k1_aggregate: f64,
    time_modulus: f64,
    audits: AuditReport,
}

/// A run read back from disk.
#[derive(Clone, Debug)]
pub struct StoredRun {
    pub regime: Regime,
    pub params: ProblemParams,
    pub config: SolveConfig,
    /// Stored snapshots; its step is `dt * stride`.
    pub trajectory: Trajectory,
    pub stride: usize,
}

impl RunResult {
    pub fn iterations(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.iterations).collect()
    }

    pub fn overshoot(&self) -> f64 {
        max_principle_overshoot(&self.trajectory)
    }

    pub fn k1_aggregate(&self) -> Result<f64> {
        k1_aggregate(&self.trajectory, self.params.nu, self.params.p)
    }

    fn snapshot_indices(&self, stride: usize) -> Vec<usize> {
        let n = self.trajectory.steps();
        let mut idx: Vec<usize> = (0..=n).step_by(stride.max(1)).collect();
        if *idx.last().unwrap() != n {
            idx.push(n);
        }
        idx
    }

    pub fn metadata_json(&self, stride: usize) -> Result<String> {
        let stride = stride.max(1);
        let meta = RunMeta {
            regime: self.regime,
            params: self.params.clone(),
            config: self.config.clone(),
            grid: self.trajectory.grid().clone(),
            steps: self.trajectory.steps(),
            snapshot_stride: stride,
            snapshots: self
                .snapshot_indices(stride)
                .into_iter()
                .map(|n| (n, snapshot_name(n)))
                .collect(),
            iterations: self.iterations(),
            linear_iterations: self.steps.iter().map(|s| s.linear_iterations).collect(),
            overshoot: self.overshoot(),
            k1_aggregate: self.k1_aggregate()?,
            time_modulus: time_modulus(&self.trajectory)?,
            audits: self.audits.clone(),
        };
        Ok(serde_json::to_string_pretty(&meta)?)
    }

    /// `run.json`, `ledger.csv` and one PLAPFIELD dump per stored snapshot.
    pub fn write_artifacts(&self, dir: &Path, stride: usize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run.json"), self.metadata_json(stride)?)?;
        std::fs::write(dir.join("ledger.csv"), self.ledger.to_csv())?;
        for n in self.snapshot_indices(stride) {
            save_field(self.trajectory.field(n), &dir.join(snapshot_name(n)))?;
        }
        Ok(())
    }
}

fn snapshot_name(n: usize) -> String {
    format!("snap_{n:06}.plapfield")
}

/// Read back a run written by [`RunResult::write_artifacts`]. Snapshots must be
/// evenly spaced.
pub fn load_run(dir: &Path) -> Result<StoredRun> {
    let text = std::fs::read_to_string(dir.join("run.json"))?;
    let meta: RunMeta =
        serde_json::from_str(&text).map_err(|e| PlapError::Format(format!("run.json: {e}")))?;
    let stride = meta.snapshot_stride.max(1);
    if !meta.steps.is_multiple_of(stride) {
        return Err(PlapError::Format(format!(
            "{} steps are not a multiple of the snapshot stride {stride}",
            meta.steps
        )));
    }
    let mut fields = Vec::with_capacity(meta.snapshots.len());
    for (k, (n, name)) in meta.snapshots.iter().enumerate() {
        if *n != k * stride {
            return Err(PlapError::Format(format!(
                "snapshot {name} is out of sequence"
            )));
        }
        let v = load_field(&dir.join(name))?;
        if *v.grid() != meta.grid {
            return Err(PlapError::Format(format!(
                "snapshot {name} is on a different grid"
            )));
        }
        fields.push(v);
    }
    if fields.len() < 2 {
        return Err(PlapError::Format(
            "run holds fewer than two snapshots".into(),
        ));
    }
    Ok(StoredRun {
        regime: meta.regime,
        params: meta.params,
        config: meta.config.clone(),
        trajectory: Trajectory::new(fields, meta.config.dt * stride as f64)?,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Datum;
    use std::f64::consts::PI;

    #[test]
    fn horizon_and_bound_closed_forms() {
        let g = GridSpec::new(&[1.0], &[1]).unwrap();
        // one node, weight h = 1/2: ||v||^2 = v^2 / 2
        let v = VectorField::from_values(&g, vec![1.0]).unwrap();
        assert!((local_horizon(1.0, 1.0, &v, 5.0).unwrap() - 1.0).abs() < 1e-15);
        let v02 = VectorField::from_values(&g, vec![0.4f64.sqrt()]).unwrap();
        assert!((local_horizon(0.1, 0.04, &v02, 5.0).unwrap() - 0.002).abs() < 1e-15);
        assert!((local_horizon(0.2, 0.04, &v02, 5.0).unwrap() - 0.004).abs() < 1e-15);
        assert_eq!(
            local_horizon(1.0, 1.0, &VectorField::zeros(&g), 5.0).unwrap(),
            5.0
        );

        let v1 = VectorField::from_values(&g, vec![2f64.sqrt()]).unwrap();
        assert!((energy_bound(0.0, 1.0, 1.0, &v1).unwrap() - 1.0).abs() < 1e-15);
        assert!((energy_bound(0.5, 1.0, 1.0, &v1).unwrap() - 2.0).abs() < 1e-15);
        assert!(
            energy_bound(0.9, 1.0, 1.0, &v1).unwrap() < energy_bound(0.99, 1.0, 1.0, &v1).unwrap()
        );
        assert!(matches!(
            energy_bound(1.0, 1.0, 1.0, &v1),
            Err(PlapError::BoundVoid { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::new(0.5, 0.25)
            .validate()
            .unwrap_err()
            .to_string()
            .contains("dt <= T"));
        assert!(SolveConfig::new(0.3, 1.0).validate().is_err());
        assert_eq!(SolveConfig::new(1e-3, 0.25).steps().unwrap(), 250);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = GridSpec::unit(2, 16).unwrap();
        let params = ProblemParams::new(1.5, 1e-2, 1e-2).unwrap();
        let (v, info) = step(
            &VectorField::zeros(&g),
            &params,
            &SolveConfig::new(1e-3, 1e-2),
        )
        .unwrap();
        assert!(v.is_zero());
        assert_eq!(info.iterations, 1);
    }

    #[test]
    fn heat_factor_for_linear_case() {
        let g = GridSpec::new(&[1.0], &[255]).unwrap();
        let nu = 0.3;
        let dt = 1e-3;
        let params = ProblemParams::new(2.0, 0.5, nu)
            .unwrap()
            .with_convection(ConvectionMode::Off);
        let v = VectorField::from_fn(&g, |x, o| o[0] = (PI * x[0]).sin());
        let (v1, _) = step(&v, &params, &SolveConfig::new(dt, dt)).unwrap();
        let h = g.spacing(0);
        let lambda = 4.0 / (h * h) * (0.5 * PI * h).sin().powi(2);
        let discrete = 1.0 / (1.0 + (nu + 1.0) * lambda * dt);
        let closed = 1.0 / (1.0 + (nu + 1.0) * PI * PI * dt);
        for (a, b) in v1.values().iter().zip(v.values()) {
            assert!((a - discrete * b).abs() < 1e-10);
            assert!((a - closed * b).abs() < 1e-6);
        }
    }

    #[test]
    fn bump_run_passes_its_audits() {
        let g = GridSpec::unit(2, 24).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.5, 1e-1, 1e-1).unwrap();
        let run = solve_pfepv(&v0, &params, &SolveConfig::new(1e-3, 0.02)).unwrap();
        assert_eq!(run.ledger.len(), run.trajectory.steps());
        assert!(run.audits.passed(), "{}", run.audits);
        for r in &run.ledger.rows {
            assert!(r.viscous >= 0.0 && r.pdiss >= 0.0);
        }
        let mut prev = run.ledger.initial_kinetic;
        for r in &run.ledger.rows {
            assert!(r.kinetic < prev);
            prev = r.kinetic;
        }
    }

    #[test]
    fn explicit_convection_variant_runs() {
        let g = GridSpec::unit(2, 16).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.5, 1e-1, 1e-1).unwrap();
        let mut cfg = SolveConfig::new(1e-3, 5e-3);
        cfg.convection = ConvectionTreatment::Explicit;
        let run = solve_pfepv(&v0, &params, &cfg).unwrap();
        assert!(run.audits.get("max-principle").unwrap().passed);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let g = GridSpec::unit(2, 16).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.2, 1e-3, 0.0).unwrap();
        let mut cfg = SolveConfig::new(0.1, 0.1);
        cfg.max_iter = 1;
        cfg.tol = 1e-14;
        assert!(matches!(
            solve(&v0, &params, &cfg, Regime::Pfep),
            Err(PlapError::NonConvergence { step: 1, .. })
        ));
    }

    #[test]
    fn artifacts_round_trip() {
        let g = GridSpec::unit(2, 8).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.5, 1e-1, 1e-1).unwrap();
        let run = solve_pfepv(&v0, &params, &SolveConfig::new(1e-3, 4e-3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run.write_artifacts(dir.path(), 1).unwrap();
        let back = load_run(dir.path()).unwrap();
        assert_eq!(back.params, params);
        for (a, b) in back.trajectory.fields().iter().zip(run.trajectory.fields()) {
            assert_eq!(a.values(), b.values());
        }
        let csv = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2 + 4);
        run.write_artifacts(dir.path(), 2).unwrap();
        assert_eq!(load_run(dir.path()).unwrap().trajectory.steps(), 2);
    }
}
