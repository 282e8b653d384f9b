use plap_core::dual::{
    build_dual_coefficients, dual_audits, duality_identity, normalized_l1, solve_dual, DualConfig,
};
use plap_core::mesh::GridSpec;
use plap_core::operators::ProblemParams;
use plap_core::presets::Datum;
use plap_core::solver::{load_run, solve_pfep, solve_pfepv, SolveConfig};

#[test]
fn stored_run_reproduces_the_in_memory_dual_audit() {
    let grid = GridSpec::unit(2, 12).unwrap();
    let v0 = Datum::Box.build(&grid, 1.0, 0);
    let params = ProblemParams::new(1.5, 1e-2, 5e-2).unwrap();
    let run = solve_pfepv(&v0, &params, &SolveConfig::new(2e-3, 0.06)).unwrap();
    assert!(run.audits.passed(), "{}", run.audits);

    let dir = tempfile::tempdir().unwrap();
    run.write_artifacts(dir.path(), 1).unwrap();
    let stored = load_run(dir.path()).unwrap();
    assert_eq!(stored.trajectory, run.trajectory);
    assert_eq!(stored.params, run.params);

    let eta = 0.01;
    let phi0 = normalized_l1(&Datum::Bump.build(&grid, 1.0, 0)).unwrap();
    let mut ids = Vec::new();
    for traj in [&run.trajectory, &stored.trajectory] {
        let coeffs = build_dual_coefficients(traj, 0.06, &params, eta).unwrap();
        let dual = solve_dual(&phi0, &coeffs, params.nu, &DualConfig::default()).unwrap();
        let id = duality_identity(traj, &coeffs, &dual).unwrap();
        assert!(dual_audits(&dual, &id).passed());
        ids.push(id);
    }
    assert_eq!(ids[0], ids[1]);
}

#[test]
fn strided_snapshots_load_at_the_coarse_step() {
    let grid = GridSpec::unit(2, 8).unwrap();
    let v0 = Datum::Bump.build(&grid, 1.0, 0);
    let params = ProblemParams::new(1.5, 0.1, 0.0).unwrap();
    let run = solve_pfep(&v0, &params, &SolveConfig::new(5e-3, 0.05)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write_artifacts(dir.path(), 5).unwrap();
    let stored = load_run(dir.path()).unwrap();
    assert_eq!(stored.stride, 5);
    assert_eq!(stored.trajectory.steps(), 2);
    assert!((stored.trajectory.dt() - 0.025).abs() < 1e-15);
    assert_eq!(stored.trajectory.last(), run.trajectory.last());

    run.write_artifacts(dir.path(), 3).unwrap();
    assert!(load_run(dir.path()).is_err());
}

#[test]
fn ledger_csv_has_schema_and_one_row_per_step() {
    let grid = GridSpec::unit(2, 8).unwrap();
    let v0 = Datum::RandomSmooth.build(&grid, 2.0, 5);
    let params = ProblemParams::new(1.2, 0.05, 0.05).unwrap();
    let run = solve_pfepv(&v0, &params, &SolveConfig::new(1e-2, 0.1)).unwrap();
    let csv = run.ledger.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# plap-ledger v1"));
    assert_eq!(lines.count(), 1 + 10);
    assert!(run.ledger.energy_violations().is_empty());
}
