//! Seeded brute-force property suites shared by `plap certify` and the
//! acceptance tests. Each returns an [`AuditReport`] with one entry per gate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::AuditReport;
use crate::bank::{normalized_h1, test_bank};
use crate::cascade::ibp_identity_check;
use crate::error::Result;
use crate::mesh::{
    divergence, gradient, inner, inner_gradient, linf, random_field, random_gradient_field,
    GridSpec, NormKind, Normed, Trajectory, VectorField,
};
use crate::mollify::{mollify_with, time_kernel_limit_check, Kernel};
use crate::operators::{
    certificate_c3, certificate_c5, gap_scale, gradient_lp_control, monotonicity_gap_gradients,
    ProblemParams,
};

pub const SBP_BUDGET: f64 = 1e-13;
pub const MONOTONICITY_BUDGET: f64 = 1e-12;
pub const IBP_BUDGET: f64 = 1e-12;
pub const NONEXPANSIVE_SLACK: f64 = 1e-12;
pub const HALVING_TOLERANCE: f64 = 0.2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn sbp_grid(d: usize) -> GridSpec {
    match d {
        1 => GridSpec::new(&[1.0], &[40]).unwrap(),
        2 => GridSpec::new(&[1.0, 0.7], &[12, 9]).unwrap(),
        _ => GridSpec::new(&[1.0, 0.8, 0.6], &[6, 5, 4]).unwrap(),
    }
}

/// `|(div F, w) + (F, grad w)| / (||F|| ||w||)` over random pairs, `d = 1, 2, 3`.
pub fn sbp_suite(seed: u64, pairs: usize) -> Result<AuditReport> {
    let mut report = AuditReport::new();
    for d in 1..=3 {
        let grid = sbp_grid(d);
        let mut r = rng(seed, d as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let f = random_gradient_field(&grid, &mut r);
            let w = random_field(&grid, &mut r);
            let defect = inner(&divergence(&f), &w)? + inner_gradient(&f, &gradient(&w))?;
            let scale = inner_gradient(&f, &f)?.sqrt() * inner(&w, &w)?.sqrt();
            if scale > 0.0 {
                worst = worst.max(defect.abs() / scale);
            }
        }
        report.at_most(
            &format!("sbp-d{d}"),
            worst,
            SBP_BUDGET,
            format!("{pairs} random pairs"),
        );
    }
    Ok(report)
}

/// Monotonicity gaps on random gradient pairs, `p in {1.1, 1.5, 1.9}`,
/// `mu in {1e-4, 1e-2, 1}`; worst `gap / scale` against `-1e-12`.
pub fn monotonicity_suite(seed: u64, pairs: usize) -> Result<AuditReport> {
    let grid = GridSpec::unit(2, 6)?;
    let mut r = rng(seed, 10);
    let mut fields = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let s: f64 = 10f64.powf(r.gen_range(-3.0..1.0));
        let a = random_gradient_field(&grid, &mut r);
        let a = a.combine(s, &a, 0.0)?;
        let b = random_gradient_field(&grid, &mut r);
        // every other pair is a small perturbation of the first field
        let b = if i % 2 == 1 {
            let delta: f64 = 10f64.powf(r.gen_range(-8.0..0.0));
            a.combine(1.0, &b, s * delta)?
        } else {
            b
        };
        fields.push((a, b));
    }
    let mut report = AuditReport::new();
    for p in [1.1, 1.5, 1.9] {
        for mu in [1e-4, 1e-2, 1.0] {
            let mut worst = f64::INFINITY;
            let mut violations = 0usize;
            for (a, b) in &fields {
                let gap = monotonicity_gap_gradients(a, b, mu, p)?;
                let scale = gap_scale(a, b, mu, p);
                let rel = if scale > 0.0 { gap / scale } else { 0.0 };
                worst = worst.min(rel);
                if rel < -MONOTONICITY_BUDGET {
                    violations += 1;
                }
            }
            report.record(
                &format!("monotonicity-p{p}-mu{mu:e}"),
                violations == 0,
                worst,
                -MONOTONICITY_BUDGET,
                format!("{violations} of {pairs} below budget"),
            );
        }
    }
    Ok(report)
}

/// `int |grad v|^p` against its coefficient-weighted bound on random fields.
pub fn gradient_control_suite(seed: u64, count: usize) -> Result<AuditReport> {
    let grid = GridSpec::unit(2, 10)?;
    let mut r = rng(seed, 20);
    let mut report = AuditReport::new();
    for mu in [1e-4, 1e-2, 1.0] {
        let mut worst: f64 = 0.0;
        let mut violations = 0usize;
        for i in 0..count {
            let p = [1.1, 1.5, 1.9][i % 3];
            let s: f64 = 10f64.powf(r.gen_range(-3.0..1.0));
            let v = random_field(&grid, &mut r).scaled(s);
            let (lhs, rhs) = gradient_lp_control(&v, mu, p, grid.measure())?;
            worst = worst.max(lhs / rhs);
            if lhs > rhs {
                violations += 1;
            }
        }
        report.record(
            &format!("gradient-control-mu{mu:e}"),
            violations == 0,
            worst,
            1.0,
            format!("worst lhs/rhs, {violations} violations"),
        );
    }
    Ok(report)
}

/// Non-expansiveness, the sup bound, the `L^2 -> L^inf` gain, convergence as
/// the radius halves, and the first-order bias of the causal time kernel.
pub fn mollifier_suite(seed: u64, count: usize) -> Result<AuditReport> {
    let grid = GridSpec::unit(2, 24)?;
    let kernel = Kernel::new(&grid, 0.12)?;
    let mut r = rng(seed, 30);
    let mut m1: f64 = 0.0;
    let mut m3: f64 = 0.0;
    let mut m2: f64 = 0.0;
    let mut m2_violations = 0usize;
    for _ in 0..count {
        let v = random_field(&grid, &mut r);
        let j = mollify_with(&v, &kernel);
        for p in [1.0, 1.5, 2.0] {
            let kind = NormKind::Lp(p);
            m1 = m1.max(j.norm(&kind)? / v.norm(&kind)? - 1.0);
        }
        m3 = m3.max(linf(&j) - linf(&v));
        let bound = kernel.l2_constant() * inner(&v, &v)?.sqrt();
        m2 = m2.max(linf(&j) / bound);
        if linf(&j) > bound {
            m2_violations += 1;
        }
    }
    let mut report = AuditReport::new();
    report.at_most(
        "mollifier-nonexpansive",
        m1,
        NONEXPANSIVE_SLACK,
        "worst relative growth in L^1, L^1.5, L^2",
    );
    report.at_most("mollifier-sup", m3, 0.0, "worst sup-norm growth");
    report.record(
        "mollifier-gain",
        m2_violations == 0,
        m2,
        1.0,
        format!("worst sup / (c ||v||_2), c = {:e}", kernel.l2_constant()),
    );

    let fine = GridSpec::unit(2, 128)?;
    let smooth = VectorField::from_fn(&fine, |x, out| {
        let s = (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin();
        out[0] = s;
        out[1] = s * s;
    });
    let residuals: Vec<f64> = [0.2, 0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&eps| {
            let j = mollify_with(&smooth, &Kernel::new(&fine, eps)?);
            j.sub(&smooth)?.norm(&NormKind::Lp(2.0))
        })
        .collect::<Result<_>>()?;
    let worst = residuals
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    report.at_most(
        "mollifier-convergence",
        worst,
        NONEXPANSIVE_SLACK,
        format!("largest increase over 4 halvings, residuals {residuals:?}"),
    );

    let small = GridSpec::unit(2, 6)?;
    let w = random_field(&small, &mut r);
    let dt = 1e-3;
    let linear = Trajectory::new((0..=400).map(|n| w.scaled(n as f64 * dt)).collect(), dt)?;
    let eps_list = [0.08, 0.04, 0.02, 0.01];
    let res = time_kernel_limit_check(&linear, &eps_list, 1.5)?;
    let worst = res
        .windows(2)
        .map(|w| (w[1] / w[0] / 0.5 - 1.0).abs())
        .fold(0.0, f64::max);
    report.at_most(
        "time-kernel-halving",
        worst,
        HALVING_TOLERANCE,
        format!("worst deviation of the halving ratio from 1/2, residuals {res:?}"),
    );
    Ok(report)
}

/// Both operator certificates on random fields for `(nu, mu) in {0.1, 1}^2`.
pub fn certificate_suite(seed: u64, count: usize) -> Result<AuditReport> {
    let grid = GridSpec::unit(2, 16)?;
    let bank = normalized_h1(test_bank(&grid, seed));
    let mut report = AuditReport::new();
    for nu in [0.1, 1.0] {
        for mu in [0.1, 1.0] {
            let params = ProblemParams::new(1.5, mu, nu)?;
            let mut r = rng(seed, 40);
            let mut c3_worst: f64 = 0.0;
            let mut c5_worst = f64::INFINITY;
            let (mut c3_bad, mut c5_bad) = (0usize, 0usize);
            for _ in 0..count {
                let s: f64 = 10f64.powf(r.gen_range(-2.0..1.0));
                let v = random_field(&grid, &mut r).scaled(s);
                let c3 = certificate_c3(&v, &params, &bank)?;
                c3_worst = c3_worst.max(c3.value / c3.bound);
                if c3.value > c3.bound * (1.0 + 1e-12) {
                    c3_bad += 1;
                }
                let c5 = certificate_c5(&v, &params)?;
                let tol = 1e-12 * c5.value.abs().max(c5.bound.abs());
                let margin = c5.value - c5.bound;
                c5_worst = c5_worst.min(margin / c5.value.abs().max(f64::MIN_POSITIVE));
                if margin < -tol {
                    c5_bad += 1;
                }
            }
            report.record(
                &format!("c3-nu{nu}-mu{mu}"),
                c3_bad == 0,
                c3_worst,
                1.0,
                format!("worst proxy / bound, {c3_bad} violations"),
            );
            report.record(
                &format!("c5-nu{nu}-mu{mu}"),
                c5_bad == 0,
                c5_worst,
                0.0,
                format!("worst (pairing - bound) / pairing, {c5_bad} violations"),
            );
        }
    }
    Ok(report)
}

/// Discrete integration by parts on random trajectory pairs.
pub fn ibp_suite(seed: u64, pairs: usize) -> Result<AuditReport> {
    let grid = GridSpec::unit(2, 8)?;
    let mut r = rng(seed, 50);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let steps = r.gen_range(1..12);
        let dt = r.gen_range(1e-3..1e-1);
        let u: Vec<VectorField> = (0..=steps).map(|_| random_field(&grid, &mut r)).collect();
        let w: Vec<VectorField> = (0..=steps).map(|_| random_field(&grid, &mut r)).collect();
        let res = ibp_identity_check(&Trajectory::new(u, dt)?, &Trajectory::new(w, dt)?)?;
        worst = worst.max(res);
    }
    let mut report = AuditReport::new();
    report.at_most(
        "ibp-identity",
        worst,
        IBP_BUDGET,
        format!("{pairs} random trajectory pairs"),
    );
    Ok(report)
}

/// Every property suite at its acceptance size.
pub fn certify(seed: u64) -> Result<AuditReport> {
    let mut report = AuditReport::new();
    report.extend("", sbp_suite(seed, 100)?);
    report.extend("", monotonicity_suite(seed, 1000)?);
    report.extend("", gradient_control_suite(seed, 300)?);
    report.extend("", mollifier_suite(seed, 100)?);
    report.extend("", certificate_suite(seed, 100)?);
    report.extend("", ibp_suite(seed, 100)?);
    Ok(report)
}
