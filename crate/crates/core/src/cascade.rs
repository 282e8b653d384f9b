//! The two limit processes (`nu -> 0` at fixed `mu`, then `mu -> 0` with
//! `nu = 0`) measured as Cauchy sequences, plus Minty gaps and the discrete
//! integration-by-parts identity.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::bank::{normalized_h1, test_bank};
use crate::error::{PlapError, Result};
use crate::mesh::{
    gradient, gradient_into, inner, inner_gradient, GradientField, GridSpec, NormKind, Normed,
    Trajectory, VectorField,
};
use crate::operators::{
    diffusivity_unchecked, floored, gap_scale, monotonicity_gap_gradients, ProblemParams,
};
use crate::presets::Datum;
use crate::solver::{self, solve_limit, RunResult, SolveConfig, MAX_PRINCIPLE_BUDGET};

pub const CASCADE_SCHEMA: &str = "# plap-cascade v1";
pub const UNIFORMITY_BUDGET: f64 = 0.1;
pub const CROSS_CHECK_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Swept {
    Nu,
    Mu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub datum: Datum,
    pub amplitude: f64,
    pub seed: u64,
    pub p: f64,
    /// Fixed `mu` of a `nu`-sweep.
    pub mu: f64,
    pub swept: Swept,
    pub schedule: Vec<f64>,
    pub dim: usize,
    pub cells: usize,
    pub solve: SolveConfig,
    /// Compare the last `mu`-sweep point with the floored direct solve.
    pub cross_check: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            datum: Datum::Bump,
            amplitude: 1.0,
            seed: 0,
            p: 1.5,
            mu: 1e-2,
            swept: Swept::Nu,
            schedule: halving(0.1, 5),
            dim: 2,
            cells: 64,
            solve: SolveConfig::default(),
            cross_check: false,
        }
    }
}

/// `start, start/2, ..., start/2^{k-1}`.
pub fn halving(start: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| start / 2f64.powi(i as i32)).collect()
}

impl SweepPlan {
    pub fn nu_default() -> Self {
        Self::default()
    }

    pub fn mu_default() -> Self {
        SweepPlan {
            swept: Swept::Mu,
            schedule: halving(0.1, 5),
            cross_check: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.len() < 2 {
            return Err(PlapError::usage(format!(
                "schedule needs at least 2 points, got {}",
                self.schedule.len()
            )));
        }
        if self.schedule.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(PlapError::usage("schedule values must be positive"));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(PlapError::usage("schedule is not strictly decreasing"));
        }
        if !(1..=3).contains(&self.dim) || self.cells < 2 {
            return Err(PlapError::usage(
                "grid needs 1 <= dim <= 3 and at least 2 cells",
            ));
        }
        if !(self.amplitude.is_finite()) {
            return Err(PlapError::usage("amplitude must be finite"));
        }
        self.solve.validate()?;
        self.params(self.schedule[0])?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::unit(self.dim, self.cells)
    }

    /// Problem parameters at one schedule value.
    pub fn params(&self, value: f64) -> Result<ProblemParams> {
        match self.swept {
            Swept::Nu => {
                if !(self.mu > 0.0) {
                    return Err(PlapError::usage("a nu-sweep needs a fixed mu > 0"));
                }
                ProblemParams::new(self.p, self.mu, value)
            }
            Swept::Mu => ProblemParams::new(self.p, value, 0.0),
        }
    }
}

/// Digest of one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub k1: f64,
    pub overshoot: f64,
    pub energy_violations: usize,
    pub final_kinetic: f64,
    pub total_dissipation: f64,
    pub iterations: usize,
    /// `sup_psi nu |int_0^T (grad v, grad psi)| / ||grad psi||_{L^2(Omega_T)}` (nu-sweeps).
    pub viscosity_probe: Option<f64>,
    /// `||a(mu, psi) grad psi - |grad psi|^{p-2} grad psi||_{p'}` per bank field (mu-sweeps).
    pub coefficient_collapse: Option<Vec<f64>>,
    /// `int_0^T (a(mu, v) grad v, grad psi)` per bank field.
    pub weak_probes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub plan: SweepPlan,
    pub points: Vec<SweepPoint>,
    /// `D_k = ||v_k - v_{k+1}||_{L^p(L^p)}`.
    pub distances: Vec<f64>,
    /// Same distances in `L^2(L^2)`, not gated.
    pub distances_l2: Vec<f64>,
    /// Minty gaps of the last point against the comparison bank.
    pub minty_gaps: Vec<f64>,
    pub minty_scale: f64,
    /// `||v_direct - v_last||_{L^p(L^p)}` for mu-sweeps with the cross check.
    pub limit_distance: Option<f64>,
    pub audits: AuditReport,
    /// Number of schedule points that finished.
    pub completed: usize,
    pub error: Option<String>,
}

impl CascadeReport {
    pub fn is_partial(&self) -> bool {
        self.completed < self.plan.schedule.len()
    }

    pub fn passed(&self) -> bool {
        !self.is_partial() && self.audits.passed()
    }

    /// One row per sweep point.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CASCADE_SCHEMA}").unwrap();
        writeln!(
            s,
            "index,value,k1,overshoot,distance_next,viscosity_probe,collapse_max,energy_violations,iterations"
        )
        .unwrap();
        for (i, pt) in self.points.iter().enumerate() {
            let dist = self
                .distances
                .get(i)
                .map_or(String::new(), |d| format!("{d:?}"));
            let probe = pt
                .viscosity_probe
                .map_or(String::new(), |x| format!("{x:?}"));
            let collapse = pt.coefficient_collapse.as_ref().map_or(String::new(), |c| {
                format!("{:?}", c.iter().copied().fold(0.0, f64::max))
            });
            writeln!(
                s,
                "{i},{:?},{:?},{:?},{dist},{probe},{collapse},{},{}",
                pt.value, pt.k1, pt.overshoot, pt.energy_violations, pt.iterations
            )
            .unwrap();
        }
        s
    }
}

/// `||a - b||_{L^q(L^q)}` over the shared lattice.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, q: f64) -> Result<f64> {
    if !a.same_lattice(b) {
        return Err(PlapError::usage("trajectories live on different lattices"));
    }
    let diffs = a
        .fields()
        .iter()
        .zip(b.fields())
        .map(|(x, y)| x.sub(y))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::with_start(diffs, a.dt(), a.t_start())?.norm(&NormKind::bochner(q, NormKind::Lp(q)))
}

/// `|grad psi|^{p-2} grad psi`, zero where the gradient vanishes.
fn limit_flux(g: &GradientField, p: f64) -> GradientField {
    let scale: Vec<f64> = g
        .squared_magnitudes()
        .into_iter()
        .map(|g2| {
            if g2 > 0.0 {
                g2.powf(0.5 * (p - 2.0))
            } else {
                0.0
            }
        })
        .collect();
    g.scale_pointwise(&scale)
}

/// `||a(mu, psi) grad psi - |grad psi|^{p-2} grad psi||_{L^{p'}(Omega)}`.
pub fn coefficient_collapse(psi: &VectorField, mu: f64, p: f64) -> Result<f64> {
    let g = gradient(psi);
    let reg = crate::operators::flux_of_gradient(&g, mu, p)?;
    let diff = reg.combine(1.0, &limit_flux(&g, p), -1.0)?;
    let q = p / (p - 1.0);
    let h = g.grid().cell_volume();
    let sum: f64 = diff
        .squared_magnitudes()
        .into_iter()
        .map(|x| x.sqrt().powf(q))
        .sum();
    Ok((h * sum).powf(1.0 / q))
}

fn digest(run: &RunResult, bank: &[VectorField], swept: Swept) -> Result<SweepPoint> {
    let traj = &run.trajectory;
    let grid = traj.grid();
    let dt = traj.dt();
    let d2 = grid.dim() * grid.dim();
    let mu = floored(run.params.mu);
    let p = run.params.p;
    let bank_grads: Vec<GradientField> = bank.iter().map(gradient).collect();
    let mut plain = vec![0.0; bank.len()];
    let mut weak = vec![0.0; bank.len()];
    let mut g = vec![0.0; grid.point_count() * d2];
    for n in 1..=traj.steps() {
        gradient_into(grid, traj.field(n).values(), &mut g);
        let gv = GradientField::from_values(grid, g.clone())?;
        let a: Vec<f64> = gv
            .squared_magnitudes()
            .into_iter()
            .map(|g2| diffusivity_unchecked(mu + g2, p))
            .collect();
        let flux = gv.scale_pointwise(&a);
        for (j, gp) in bank_grads.iter().enumerate() {
            plain[j] += dt * inner_gradient(&gv, gp)?;
            weak[j] += dt * inner_gradient(&flux, gp)?;
        }
    }
    let horizon = traj.horizon();
    let viscosity_probe = match swept {
        Swept::Nu => {
            let mut sup: f64 = 0.0;
            for (j, gp) in bank_grads.iter().enumerate() {
                let norm = (horizon * inner_gradient(gp, gp)?).sqrt();
                if norm > 0.0 {
                    sup = sup.max(run.params.nu * plain[j].abs() / norm);
                }
            }
            Some(sup)
        }
        Swept::Mu => None,
    };
    let coefficient_collapse = match swept {
        Swept::Mu => Some(
            bank.iter()
                .map(|psi| coefficient_collapse(psi, run.params.mu, p))
                .collect::<Result<Vec<_>>>()?,
        ),
        Swept::Nu => None,
    };
    let ledger = &run.ledger;
    Ok(SweepPoint {
        value: match swept {
            Swept::Nu => run.params.nu,
            Swept::Mu => run.params.mu,
        },
        k1: run.k1_aggregate()?,
        overshoot: run.overshoot(),
        energy_violations: ledger.energy_violations().len(),
        final_kinetic: ledger
            .rows
            .last()
            .map_or(ledger.initial_kinetic, |r| r.kinetic),
        total_dissipation: ledger.rows.iter().map(|r| r.viscous + r.pdiss).sum(),
        iterations: run.iterations().iter().sum(),
        viscosity_probe,
        coefficient_collapse,
        weak_probes: weak,
    })
}

/// Minty gaps `int_{Omega_T} (chi - a(mu, phi) grad phi) . (grad v - grad phi)`
/// with `chi = a(mu, v) grad v` the run's own flux, and their common scale.
pub fn minty_check(
    run: &RunResult,
    bank: &[VectorField],
    mu: f64,
    p: f64,
) -> Result<(Vec<f64>, f64)> {
    let traj = &run.trajectory;
    let dt = traj.dt();
    let grads: Vec<GradientField> = traj.fields()[1..].iter().map(gradient).collect();
    let mut gaps = Vec::with_capacity(bank.len());
    let mut scale: f64 = 0.0;
    for phi in bank {
        let gp = gradient(phi);
        let mut gap = 0.0;
        let mut sc = 0.0;
        for gv in &grads {
            gap += dt * monotonicity_gap_gradients(gv, &gp, mu, p)?;
            sc += dt * gap_scale(gv, &gp, mu, p);
        }
        gaps.push(gap);
        scale = scale.max(sc);
    }
    Ok((gaps, scale))
}

/// Bank for Minty gaps: the test bank at three amplitudes.
pub fn comparison_bank(grid: &GridSpec, seed: u64) -> Vec<VectorField> {
    let base = test_bank(grid, seed);
    let mut out = Vec::with_capacity(3 * base.len());
    for s in [0.1, 1.0, 10.0] {
        out.extend(base.iter().map(|f| f.scaled(s)));
    }
    out
}

fn solve_point(plan: &SweepPlan, v0: &VectorField, value: f64) -> Result<RunResult> {
    let params = plan.params(value)?;
    match plan.swept {
        Swept::Nu => solver::solve_pfepv(v0, &params, &plan.solve),
        Swept::Mu => solver::solve_pfep(v0, &params, &plan.solve),
    }
}

/// Solve every schedule point, up to `jobs` at a time; results come back in
/// schedule order, truncated at the first failure.
fn run_points(
    plan: &SweepPlan,
    v0: &VectorField,
    jobs: usize,
) -> (Vec<RunResult>, Option<(usize, PlapError)>) {
    let k = plan.schedule.len();
    let slots: Vec<Mutex<Option<Result<RunResult>>>> = (0..k).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= k {
            break;
        }
        let r = solve_point(plan, v0, plan.schedule[i]);
        *slots[i].lock().unwrap() = Some(r);
    };
    let jobs = jobs.clamp(1, k);
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }
    let mut runs = Vec::with_capacity(k);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) => runs.push(r),
            Some(Err(e)) => return (runs, Some((i, e))),
            None => unreachable!("every slot is filled"),
        }
    }
    (runs, None)
}

/// Run the sweep described by `plan` (either direction).
pub fn run_sweep(plan: &SweepPlan, jobs: usize) -> Result<CascadeReport> {
    plan.validate()?;
    let grid = plan.grid()?;
    let v0 = plan.datum.build(&grid, plan.amplitude, plan.seed);
    let bank = normalized_h1(test_bank(&grid, plan.seed));
    let (runs, failure) = run_points(plan, &v0, jobs);
    let mut report = CascadeReport {
        plan: plan.clone(),
        points: Vec::with_capacity(runs.len()),
        distances: Vec::new(),
        distances_l2: Vec::new(),
        minty_gaps: Vec::new(),
        minty_scale: 0.0,
        limit_distance: None,
        audits: AuditReport::new(),
        completed: runs.len(),
        error: failure
            .as_ref()
            .map(|(i, e)| format!("schedule point {i} ({}) failed: {e}", plan.schedule[*i])),
    };
    for run in &runs {
        report.points.push(digest(run, &bank, plan.swept)?);
    }
    for w in runs.windows(2) {
        report.distances.push(trajectory_distance(
            &w[0].trajectory,
            &w[1].trajectory,
            plan.p,
        )?);
        report.distances_l2.push(trajectory_distance(
            &w[0].trajectory,
            &w[1].trajectory,
            2.0,
        )?);
    }
    if let Some(last) = runs.last() {
        let (gaps, scale) = minty_check(
            last,
            &comparison_bank(&grid, plan.seed),
            last.params.mu_eff(),
            plan.p,
        )?;
        report.minty_gaps = gaps;
        report.minty_scale = scale;
    }
    if failure.is_none() && plan.swept == Swept::Mu && plan.cross_check {
        let direct = solve_limit(&v0, plan.p, &plan.solve);
        match direct {
            Ok(direct) => {
                let last = runs.last().expect("complete sweep");
                report.limit_distance = Some(trajectory_distance(
                    &direct.trajectory,
                    &last.trajectory,
                    plan.p,
                )?);
            }
            Err(e) => report.error = Some(format!("floored direct solve failed: {e}")),
        }
    }
    report.audits = sweep_audits(&report);
    Ok(report)
}

pub fn nu_sweep(plan: &SweepPlan, jobs: usize) -> Result<CascadeReport> {
    if plan.swept != Swept::Nu {
        return Err(PlapError::usage("nu_sweep needs a plan sweeping nu"));
    }
    run_sweep(plan, jobs)
}

pub fn mu_sweep(plan: &SweepPlan, jobs: usize) -> Result<CascadeReport> {
    if plan.swept != Swept::Mu {
        return Err(PlapError::usage("mu_sweep needs a plan sweeping mu"));
    }
    run_sweep(plan, jobs)
}

/// `D_k > D_{k+1}` for every consecutive pair from the second distance on.
pub fn cauchy_monotone(distances: &[f64]) -> bool {
    let all_zero = distances.iter().all(|&d| d == 0.0);
    all_zero
        || distances
            .get(1..)
            .is_none_or(|tail| tail.windows(2).all(|w| w[1] < w[0]))
}

/// `(max - min) / max` of the aggregate across points.
pub fn k1_variation(points: &[SweepPoint]) -> f64 {
    let max = points.iter().map(|p| p.k1).fold(0.0, f64::max);
    let min = points.iter().map(|p| p.k1).fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

/// Worst `(probe_{k+1} / probe_k) / sqrt(nu_{k+1} / nu_k)`; at most 1 when the
/// probe decays at least like `nu^{1/2}`.
pub fn viscosity_decay_ratio(points: &[SweepPoint]) -> f64 {
    let mut worst: f64 = 0.0;
    for w in points.windows(2) {
        let (Some(a), Some(b)) = (w[0].viscosity_probe, w[1].viscosity_probe) else {
            continue;
        };
        if a == 0.0 {
            if b > 0.0 {
                worst = f64::INFINITY;
            }
            continue;
        }
        worst = worst.max((b / a) / (w[1].value / w[0].value).sqrt());
    }
    worst
}

fn sweep_audits(report: &CascadeReport) -> AuditReport {
    let mut r = AuditReport::new();
    let plan = &report.plan;
    r.record(
        "complete",
        !report.is_partial(),
        report.completed as f64,
        plan.schedule.len() as f64,
        report.error.clone().unwrap_or_default(),
    );
    r.record(
        "cauchy-monotone",
        cauchy_monotone(&report.distances),
        report.distances.last().copied().unwrap_or(0.0),
        0.0,
        format!("distances {:?}", report.distances),
    );
    r.at_most(
        "k1-uniformity",
        k1_variation(&report.points),
        UNIFORMITY_BUDGET,
        "(max - min) / max of the aggregate",
    );
    let overshoot = report
        .points
        .iter()
        .map(|p| p.overshoot)
        .fold(0.0, f64::max);
    r.at_most(
        "max-principle",
        overshoot,
        MAX_PRINCIPLE_BUDGET,
        "worst overshoot over the sweep",
    );
    let violations: usize = report.points.iter().map(|p| p.energy_violations).sum();
    r.at_most(
        "energy-inequality",
        violations as f64,
        0.0,
        "violating steps over the sweep",
    );
    let worst_gap = report
        .minty_gaps
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    r.at_least(
        "minty",
        if report.minty_gaps.is_empty() {
            0.0
        } else {
            worst_gap
        },
        -1e-10 * report.minty_scale,
        "most negative gap",
    );
    match plan.swept {
        Swept::Nu => {
            r.at_most(
                "viscosity-probe",
                viscosity_decay_ratio(&report.points),
                1.0,
                "worst decay ratio relative to nu^{1/2}",
            );
        }
        Swept::Mu => {
            let mut monotone = true;
            for w in report.points.windows(2) {
                if let (Some(a), Some(b)) = (&w[0].coefficient_collapse, &w[1].coefficient_collapse)
                {
                    monotone &= a
                        .iter()
                        .zip(b)
                        .all(|(x, y)| y < x || (*x == 0.0 && *y == 0.0));
                }
            }
            r.record(
                "coefficient-collapse",
                monotone,
                0.0,
                0.0,
                "decreasing for every bank field",
            );
            if let Some(last) = report.points.last() {
                r.at_most(
                    "final-max-principle",
                    last.overshoot,
                    MAX_PRINCIPLE_BUDGET,
                    "last point",
                );
            }
            if plan.cross_check {
                let budget = CROSS_CHECK_FACTOR * report.distances.last().copied().unwrap_or(0.0);
                r.at_most(
                    "limit-cross-check",
                    report.limit_distance.unwrap_or(f64::INFINITY),
                    budget,
                    "distance to the floored direct solve vs 4x last Cauchy increment",
                );
            }
        }
    }
    r
}

/// Residual of `(u_N, w_N) - (u_0, w_0) = sum_n dt [<d_t u, w>_mid + <u, d_t w>_mid]`,
/// relative to the sum of absolute terms.
pub fn ibp_identity_check(u: &Trajectory, w: &Trajectory) -> Result<f64> {
    if !u.same_lattice(w) {
        return Err(PlapError::usage(
            "integration by parts needs trajectories on one lattice",
        ));
    }
    let dt = u.dt();
    let n = u.steps();
    let lhs = inner(u.field(n), w.field(n))? - inner(u.first(), w.first())?;
    let mut rhs = 0.0;
    let mut scale = inner(u.field(n), w.field(n))?.abs() + inner(u.first(), w.first())?.abs();
    for k in 0..n {
        let du = u.field(k + 1).sub(u.field(k))?.scaled(1.0 / dt);
        let dw = w.field(k + 1).sub(w.field(k))?.scaled(1.0 / dt);
        let wm = w.field(k).combine(0.5, w.field(k + 1), 0.5)?;
        let um = u.field(k).combine(0.5, u.field(k + 1), 0.5)?;
        let a = dt * inner(&du, &wm)?;
        let b = dt * inner(&um, &dw)?;
        rhs += a + b;
        scale += a.abs() + b.abs();
    }
    Ok(if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    })
}

/// `||f||_{L^p(L^p)} + ||g||_{L^{p'}(W^{-1,p'})}` for a decomposition
/// `f + g = d_t u`, the negative norm taken as `sup_psi <g, psi> / ||grad psi||_p`
/// over `bank`.
pub fn sum_norm_upper(
    u: &Trajectory,
    f: &[VectorField],
    g: &[VectorField],
    p: f64,
    bank: &[VectorField],
) -> Result<f64> {
    let n = u.steps();
    if f.len() != n || g.len() != n {
        return Err(PlapError::usage(format!(
            "decomposition needs {n} samples per part, got {} and {}",
            f.len(),
            g.len()
        )));
    }
    let dt = u.dt();
    let mut worst: f64 = 0.0;
    let mut size: f64 = 0.0;
    for k in 0..n {
        let du = u.field(k + 1).sub(u.field(k))?.scaled(1.0 / dt);
        let sum = f[k].combine(1.0, &g[k], 1.0)?;
        for (a, b) in sum.values().iter().zip(du.values()) {
            worst = worst.max((a - b).abs());
            size = size.max(b.abs());
        }
    }
    if worst > 1e-10 * size.max(1.0) {
        return Err(PlapError::usage(format!(
            "f + g differs from d_t u by {worst:e}"
        )));
    }
    let q = p / (p - 1.0);
    let mut fp = 0.0;
    let mut gq = 0.0;
    let denoms = bank
        .iter()
        .map(|psi| psi.norm(&NormKind::W1pSeminorm(p)))
        .collect::<Result<Vec<_>>>()?;
    for k in 0..n {
        fp += dt * f[k].norm(&NormKind::Lp(p))?.powf(p);
        let mut sup: f64 = 0.0;
        if !g[k].is_zero() {
            for (psi, &den) in bank.iter().zip(&denoms) {
                if den > 0.0 {
                    sup = sup.max(inner(&g[k], psi)?.abs() / den);
                }
            }
        }
        gq += dt * sup.powf(q);
    }
    Ok(fp.powf(1.0 / p) + gq.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_plan(swept: Swept) -> SweepPlan {
        SweepPlan {
            swept,
            schedule: halving(0.1, 3),
            cells: 12,
            solve: SolveConfig::new(2e-3, 0.02),
            cross_check: swept == Swept::Mu,
            ..SweepPlan::default()
        }
    }

    #[test]
    fn plan_validation() {
        let mut p = small_plan(Swept::Nu);
        p.schedule = vec![0.1, 0.1];
        assert!(p
            .validate()
            .unwrap_err()
            .to_string()
            .contains("strictly decreasing"));
        p.schedule = vec![0.1];
        assert!(p.validate().is_err());
        assert!(SweepPlan::nu_default().validate().is_ok());
        assert!(SweepPlan::mu_default().validate().is_ok());
    }

    #[test]
    fn zero_datum_sweep_has_zero_distances() {
        let mut plan = small_plan(Swept::Mu);
        plan.datum = Datum::Zero;
        let report = mu_sweep(&plan, 1).unwrap();
        assert!(report.distances.iter().all(|&d| d == 0.0));
        assert_eq!(report.limit_distance, Some(0.0));
        assert!(report.passed(), "{}", report.audits);
    }

    #[test]
    fn minimal_plan_has_one_distance() {
        let mut plan = small_plan(Swept::Nu);
        plan.schedule = vec![0.1, 0.05];
        let report = nu_sweep(&plan, 1).unwrap();
        assert_eq!(report.distances.len(), 1);
        assert_eq!(report.points.len(), 2);
        assert!(report.distances[0] > 0.0);
    }

    #[test]
    fn small_sweeps_pass_their_gates() {
        let nu = nu_sweep(&small_plan(Swept::Nu), 2).unwrap();
        assert!(nu.passed(), "{}", nu.audits);
        let serial = nu_sweep(&small_plan(Swept::Nu), 1).unwrap();
        assert_eq!(serial.to_csv(), nu.to_csv());
        let mu = mu_sweep(&small_plan(Swept::Mu), 1).unwrap();
        assert!(mu.audits.get("coefficient-collapse").unwrap().passed);
        assert!(mu.audits.get("minty").unwrap().passed);
        assert_eq!(mu.to_csv().lines().count(), 2 + 3);
    }

    #[test]
    fn failing_point_gives_partial_report() {
        let mut plan = small_plan(Swept::Mu);
        plan.solve.max_iter = 1;
        plan.solve.tol = 1e-15;
        let report = mu_sweep(&plan, 1).unwrap();
        assert!(report.is_partial());
        assert_eq!(report.completed, 0);
        assert!(report.error.is_some());
        assert!(!report.passed());
    }

    #[test]
    fn minty_gap_closed_forms() {
        let g = GridSpec::unit(2, 10).unwrap();
        let v0 = Datum::Bump.build(&g, 1.0, 0);
        let params = ProblemParams::new(1.5, 0.1, 0.1).unwrap();
        let run = solver::solve_pfepv(&v0, &params, &SolveConfig::new(1e-2, 0.02)).unwrap();
        // phi = 0 gives the dissipation integral, which is positive
        let (gaps, _) = minty_check(&run, &[VectorField::zeros(&g)], 0.1, 1.5).unwrap();
        let pdiss: f64 = run.ledger.rows.iter().map(|r| r.pdiss).sum();
        assert!((gaps[0] - pdiss).abs() < 1e-12 * pdiss);
        // phi = v(t) on a constant-in-time run gives zero
        let traj = Trajectory::new(vec![v0.clone(); 3], 0.01).unwrap();
        let frozen = RunResult {
            trajectory: traj,
            ..run.clone()
        };
        let (gaps, _) = minty_check(&frozen, &[v0], 0.1, 1.5).unwrap();
        assert_eq!(gaps[0], 0.0);
    }

    #[test]
    fn collapse_decreases_with_mu() {
        let g = GridSpec::unit(2, 16).unwrap();
        let psi = &crate::bank::sine_bank(&g, 1)[0];
        let vals: Vec<f64> = halving(0.1, 5)
            .into_iter()
            .map(|mu| coefficient_collapse(psi, mu, 1.5).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert_eq!(
            coefficient_collapse(&VectorField::zeros(&g), 0.1, 1.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn ibp_identity_cases() {
        let g = GridSpec::unit(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let constant = Trajectory::new(vec![a.clone(); 4], 0.1).unwrap();
        assert_eq!(ibp_identity_check(&constant, &constant).unwrap(), 0.0);
        let affine =
            Trajectory::new((0..5).map(|n| a.scaled(n as f64 * 0.1)).collect(), 0.1).unwrap();
        let fixed = Trajectory::new(vec![b.clone(); 5], 0.1).unwrap();
        assert!(ibp_identity_check(&affine, &fixed).unwrap() < 1e-12);
        let other = Trajectory::new(vec![b; 4], 0.2).unwrap();
        assert!(ibp_identity_check(&constant, &other).is_err());
    }

    #[test]
    fn sum_norm_cases() {
        let g = GridSpec::unit(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bank = test_bank(&g, 1);
        let a = random_field(&g, &mut rng);
        let constant = Trajectory::new(vec![a.clone(); 3], 0.1).unwrap();
        let zeros = vec![VectorField::zeros(&g); 2];
        assert_eq!(
            sum_norm_upper(&constant, &zeros, &zeros, 1.5, &bank).unwrap(),
            0.0
        );

        let u = Trajectory::new((0..3).map(|n| a.scaled(n as f64)).collect(), 0.1).unwrap();
        let du: Vec<VectorField> = (0..2).map(|_| a.scaled(10.0)).collect();
        let as_f = sum_norm_upper(&u, &du, &zeros, 1.5, &bank).unwrap();
        let expect = Trajectory::new(vec![a.scaled(10.0); 3], 0.1)
            .unwrap()
            .norm(&NormKind::bochner(1.5, NormKind::Lp(1.5)))
            .unwrap();
        assert!((as_f - expect).abs() < 1e-12 * expect);
        let as_g = sum_norm_upper(&u, &zeros, &du, 1.5, &bank).unwrap();
        assert!(as_g > 0.0 && as_g != as_f);
        assert!(sum_norm_upper(&u, &zeros, &zeros, 1.5, &bank).is_err());
    }
}
