//! Small linear solvers used by the semi-implicit stepper.

use num_complex::Complex64;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Unpreconditioned BiCGSTAB for complex, non-Hermitian systems. `x` holds
/// the initial guess and receives the solution.
pub fn bicgstab<F>(apply: F, b: &[Complex64], x: &mut [Complex64], tol: f64, max_iter: usize) -> SolveStats
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|z| *z = Complex64::default());
        return SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let ax = apply(x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r_hat = r.clone();
    let mut rho = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    let mut v = vec![Complex64::default(); n];
    let mut p = vec![Complex64::default(); n];
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return SolveStats {
            iterations: 0,
            relative_residual: rel,
            converged: true,
        };
    }
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = apply(&p);
        alpha = rho_new / dot(&r_hat, &v);
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return SolveStats {
                iterations: it,
                relative_residual: norm(&s) / b_norm,
                converged: true,
            };
        }
        let t = apply(&s);
        let tt = dot(&t, &t);
        omega = if tt.norm() == 0.0 { Complex64::default() } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return SolveStats {
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    SolveStats {
        iterations: max_iter,
        relative_residual: rel,
        converged: false,
    }
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored. Requires a diagonally dominant
/// system (no pivoting).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicgstab_solves_nonhermitian_system() {
        let n = 40;
        let apply = |x: &[Complex64]| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let l = x[(i + n - 1) % n];
                    let r = x[(i + 1) % n];
                    x[i] * Complex64::new(4.0, 0.5) - l * Complex64::new(1.0, 0.3) - r * Complex64::new(1.0, -0.7)
                })
                .collect()
        };
        let truth: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
        let b = apply(&truth);
        let mut x = vec![Complex64::default(); n];
        let st = bicgstab(apply, &b, &mut x, 1e-13, 200);
        assert!(st.converged);
        for i in 0..n {
            assert!((x[i] - truth[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn tridiagonal_matches_direct_multiplication() {
        let n = 25;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64).cos()).collect();
        let truth: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * truth[i];
                if i > 0 {
                    s += lower[i] * truth[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * truth[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for i in 0..n {
            assert!((x[i] - truth[i]).abs() < 1e-13);
        }
    }
}
