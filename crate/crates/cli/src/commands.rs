use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plap_core::audit::AuditReport;
use plap_core::cascade::{run_sweep, CascadeReport, Swept};
use plap_core::dual::{
    build_dual_coefficients, dual_audits, duality_identity, linf_certificate, normalized_l1,
    probe_bank, solve_dual, LinfCertificate,
};
use plap_core::mesh::io::save_field;
use plap_core::solver::{load_run, solve, solve_limit, Regime};
use plap_core::{suites, PlapError};
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("partial sweep: {completed} of {total} points completed; {reason}")]
    Partial {
        completed: usize,
        total: usize,
        reason: String,
    },
    #[error("audit failed:\n{0}")]
    Audit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Audit(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Partial { .. } => 4,
        }
    }
}

impl From<PlapError> for CliError {
    fn from(e: PlapError) -> Self {
        match e {
            PlapError::Singular { .. }
            | PlapError::NonConvergence { .. }
            | PlapError::LinearSolver { .. }
            | PlapError::BoundVoid { .. } => CliError::Solver(e.to_string()),
            PlapError::Usage(_) | PlapError::Format(_) | PlapError::Io(_) | PlapError::Json(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io(e: std::io::Error, path: &Path) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io(e, path))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io(e, path))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Elapsed wall time lives in its own file so the other artifacts stay reproducible.
pub fn write_timing(dir: &Path, command: &str, seconds: f64) {
    let _ = std::fs::write(
        dir.join(format!("{command}.timing.json")),
        format!("{{\"command\": \"{command}\", \"seconds\": {seconds:?}}}\n"),
    );
}

fn audit_csv(report: &AuditReport) -> String {
    let mut s = String::from("# plap-audit v1\nname,passed,measured,budget\n");
    for e in &report.entries {
        writeln!(s, "{},{},{:?},{:?}", e.name, e.passed, e.measured, e.budget).unwrap();
    }
    s
}

fn finish(report: &AuditReport) -> Result<()> {
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let lines: String = report
            .failures()
            .map(|e| {
                format!(
                    "{}: measured {:e} against budget {:e}\n",
                    e.name, e.measured, e.budget
                )
            })
            .collect();
        Err(CliError::Audit(lines))
    }
}

pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let grid = config.grid()?;
    let params = config.params()?;
    let v0 = config
        .datum
        .kind
        .build(&grid, config.datum.amplitude, config.seed);
    let run = match config.regime {
        Regime::Limit => solve_limit(&v0, params.p, &config.solve)?,
        regime => solve(&v0, &params, &config.solve, regime)?,
    };
    mkdir(out)?;
    write(&out.join("config.toml"), config.to_toml())?;
    run.write_artifacts(out, config.snapshot_stride)?;
    write(&out.join("audit.csv"), audit_csv(&run.audits))?;
    println!(
        "solved {} steps on {:?} nodes, {} Kacanov iterations",
        run.trajectory.steps(),
        grid.counts(),
        run.iterations().iter().sum::<usize>()
    );
    finish(&run.audits)
}

#[derive(Serialize)]
struct DualSummary {
    run: PathBuf,
    t: f64,
    eta: f64,
    nu: f64,
    steps: usize,
    snapshot_stride: usize,
    b_range: (f64, f64),
    identity: plap_core::dual::DualityIdentity,
    l1_ratio: f64,
    certificate: Option<LinfCertificate>,
    audits: AuditReport,
}

pub fn cmd_dual_audit(config: &RunConfig, out: &Path) -> Result<()> {
    let run_dir = config.dual.run.clone().unwrap_or_else(|| out.to_path_buf());
    let stored = load_run(&run_dir).map_err(|e| match e {
        PlapError::Io(err) => CliError::Config(format!(
            "cannot read stored run in {}: {err}",
            run_dir.display()
        )),
        other => CliError::Config(format!("stored run in {}: {other}", run_dir.display())),
    })?;
    let traj = &stored.trajectory;
    let grid = traj.grid();
    let t = config.dual.t.unwrap_or(traj.t_start() + traj.horizon());
    let eta = config.dual.eta.unwrap_or(4.0 * grid.min_spacing());
    let nu = config.dual.nu.unwrap_or(stored.params.nu);
    let params = stored.params.clone().with_eta(eta);
    let coeffs = build_dual_coefficients(traj, t, &params, eta)?;
    let phi0 = normalized_l1(&config.dual.phi0.build(grid, 1.0, config.seed))?;
    let dual = solve_dual(&phi0, &coeffs, nu, &config.dual.solver)?;
    let identity = duality_identity(traj, &coeffs, &dual)?;
    let mut audits = dual_audits(&dual, &identity);
    let certificate = if config.dual.certificate {
        let probes = probe_bank(
            traj.field(coeffs.steps()),
            config.dual.random_probes,
            config.seed,
        );
        let cert = linf_certificate(traj, &coeffs, nu, &config.dual.solver, &probes)?;
        audits.at_most(
            "certificate-lower",
            cert.lower,
            cert.measured * (1.0 + 1e-12),
            "probe pairing never exceeds the measured sup norm",
        );
        Some(cert)
    } else {
        None
    };
    let dual_dir = out.join("dual");
    mkdir(&dual_dir)?;
    write(&dual_dir.join("config.toml"), config.to_toml())?;
    write(&dual_dir.join("l1.csv"), dual.audit_csv())?;
    write(
        &dual_dir.join("duality.csv"),
        format!(
            "# plap-duality v1\nlhs,rhs,i_eta,relative_residual\n{:?},{:?},{:?},{:?}\n",
            identity.lhs, identity.rhs, identity.i_eta, identity.relative_residual
        ),
    )?;
    save_field(dual.phi0(), &dual_dir.join("phi0.plapfield"))?;
    save_field(dual.last(), &dual_dir.join("psi_t.plapfield"))?;
    let summary = DualSummary {
        run: run_dir,
        t,
        eta,
        nu,
        steps: coeffs.steps(),
        snapshot_stride: stored.stride,
        b_range: coeffs.b_range(),
        identity,
        l1_ratio: plap_core::dual::l1_audit(&dual),
        certificate,
        audits: audits.clone(),
    };
    write(&dual_dir.join("dual.json"), json(&summary))?;
    if let Some(c) = &certificate {
        println!(
            "certificate: {:e} <= ||v(t)||_inf = {:e} <= {:e} ({} probes)",
            c.lower, c.measured, c.upper, c.probes
        );
    }
    finish(&audits)
}

pub fn cmd_cascade(config: &RunConfig, out: &Path, swept: Swept, jobs: usize) -> Result<()> {
    config.validate()?;
    let plan = config.sweep_plan(swept)?;
    let report = run_sweep(&plan, jobs)?;
    let name = match swept {
        Swept::Nu => "cascade-nu",
        Swept::Mu => "cascade-mu",
    };
    let dir = out.join(name);
    write_cascade(&dir, config, &report)?;
    print!("{}", report.to_csv());
    if report.is_partial() {
        print!("{}", report.audits);
        return Err(CliError::Partial {
            completed: report.completed,
            total: plan.schedule.len(),
            reason: report.error.clone().unwrap_or_default(),
        });
    }
    finish(&report.audits)
}

fn write_cascade(dir: &Path, config: &RunConfig, report: &CascadeReport) -> Result<()> {
    let points = dir.join("points");
    mkdir(&points)?;
    write(&dir.join("config.toml"), config.to_toml())?;
    for (i, pt) in report.points.iter().enumerate() {
        write(&points.join(format!("point_{i:02}.json")), json(pt))?;
    }
    write(&dir.join("report.json"), json(report))?;
    write(&dir.join("report.csv"), report.to_csv())?;
    write(&dir.join("audit.csv"), audit_csv(&report.audits))
}

pub fn cmd_certify(config: &RunConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let report = suites::certify(config.seed)?;
    mkdir(out)?;
    write(&out.join("certify.csv"), audit_csv(&report))?;
    write(&out.join("certify.json"), json(&report))?;
    finish(&report)
}

pub fn cmd_ibp_test(config: &RunConfig, out: &Path) -> Result<()> {
    let report = suites::ibp_suite(config.seed, 100)?;
    mkdir(out)?;
    write(&out.join("ibp.csv"), audit_csv(&report))?;
    finish(&report)
}
