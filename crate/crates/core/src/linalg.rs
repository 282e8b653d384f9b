//! Jacobi-preconditioned conjugate gradients on flat slices.

/// Outcome of a [`pcg`] call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CgStats {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` (Euclidean, unweighted).
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for SPD `A`, starting from the contents of `x`.
///
/// The system is rescaled to `||b||_inf = 1` so tiny data cannot underflow.
pub(crate) fn pcg<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgStats
where
    F: Fn(&[f64], &mut [f64]),
{
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if bmax == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let b: Vec<f64> = b.iter().map(|v| v / bmax).collect();
    x.iter_mut().for_each(|v| *v /= bmax);
    let stats = pcg_scaled(apply, diag, &b, x, tol, max_iter);
    x.iter_mut().for_each(|v| *v *= bmax);
    stats
}

fn pcg_scaled<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgStats
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > tol && it < max_iter {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = dot(&r, &r).sqrt() / bnorm;
    }
    CgStats {
        iterations: it,
        relative_residual: res,
        converged: res <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 3.0 * x[i] - l - r;
        }
    }

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        tridiag(&truth, &mut b);
        let mut x = vec![0.0; n];
        let stats = pcg(tridiag, &vec![3.0; n], &b, &mut x, 1e-14, 200);
        assert!(stats.converged);
        for (a, t) in x.iter().zip(&truth) {
            assert!((a - t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 4];
        let stats = pcg(tridiag, &[3.0; 4], &[0.0; 4], &mut x, 1e-12, 10);
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn exact_warm_start_needs_no_iterations() {
        let truth = vec![1.0, -2.0, 0.5];
        let mut b = vec![0.0; 3];
        tridiag(&truth, &mut b);
        let mut x = truth.clone();
        let stats = pcg(tridiag, &[3.0; 3], &b, &mut x, 1e-12, 10);
        assert_eq!(stats.iterations, 0);
    }
}
