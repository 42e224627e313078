//! Preconditioned conjugate gradients and inverse power iteration for the
//! smallest eigenpair of `K u = tau M u`.

use crate::error::{Error, Result};
use crate::fem::{dot, norm2, SparseSymMatrix};

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||Ax - b|| / ||b||`.
    pub residual: f64,
    /// Rounding stopped progress before `tol` was reached.
    pub stagnated: bool,
}

fn iteration_cap(n: usize) -> usize {
    20 * n + 200
}

/// Solves `A x = b` for SPD `A` to `||Ax - b|| <= tol ||b||`.
pub fn solve_spd(a: &SparseSymMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    solve_spd_from(a, b, None, tol).map(|r| r.x)
}

/// Jacobi-preconditioned CG with an optional initial guess.
pub fn solve_spd_from(
    a: &SparseSymMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
) -> Result<SolveReport> {
    pcg(a, b, x0, tol, false)
}

/// Like [`solve_spd_from`], but returns the best iterate once rounding
/// prevents further progress instead of failing.
pub fn solve_spd_attainable(
    a: &SparseSymMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
) -> Result<SolveReport> {
    pcg(a, b, x0, tol, true)
}

const MAX_RESETS: usize = 4;

fn pcg(
    a: &SparseSymMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    allow_stagnation: bool,
) -> Result<SolveReport> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Contract(format!("rhs length {} for dimension {n}", b.len())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            stagnated: false,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    if x0.is_some() {
        a.mul_vec_into(&x, &mut ap);
        for (ri, ai) in r.iter_mut().zip(&ap) {
            *ri -= ai;
        }
    }
    let target = tol * bnorm;
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(SolveReport {
            x,
            iterations: 0,
            residual: rnorm / bnorm,
            stagnated: false,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let cap = iteration_cap(n);
    let mut resets = 0;
    let mut best_true = f64::INFINITY;
    for it in 1..=cap {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Contract(format!(
                "matrix is not positive definite (p^T A p = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target {
            // guard against drift of the recursive residual
            a.mul_vec_into(&x, &mut ap);
            let true_res = b.iter().zip(&ap).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
            if true_res <= target {
                return Ok(SolveReport {
                    x,
                    iterations: it,
                    residual: true_res / bnorm,
                    stagnated: false,
                });
            }
            if true_res < 0.5 * best_true {
                best_true = true_res;
                resets = 0;
            } else {
                resets += 1;
            }
            if resets >= MAX_RESETS {
                if allow_stagnation {
                    return Ok(SolveReport {
                        x,
                        iterations: it,
                        residual: true_res / bnorm,
                        stagnated: true,
                    });
                }
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: true_res / bnorm,
                });
            }
            // restart from the true residual
            for i in 0..n {
                r[i] = b[i] - ap[i];
                z[i] = r[i] * inv_diag[i];
                p[i] = z[i];
            }
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: cap,
        residual: rnorm / bnorm,
    })
}

/// Tuning of the outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual bound `||K u - tau M u|| / ||M u||`.
    pub tol: f64,
    /// Relative change of successive Rayleigh quotients.
    pub rq_change: f64,
    pub max_outer: usize,
    pub inner_start: f64,
    pub inner_floor: f64,
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Self::default()
        }
    }
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            rq_change: 1e-12,
            max_outer: 500,
            inner_start: 1e-6,
            inner_floor: 1e-12,
        }
    }
}

/// Smallest eigenpair of the reduced pencil.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// M-normalized eigenvector in reduced coordinates.
    pub vector: Vec<f64>,
    /// `||K u - tau M u||_2 / ||M u||_2`.
    pub residual: f64,
    /// Rayleigh quotient after each outer step.
    pub history: Vec<f64>,
    pub inner_iterations: usize,
}

pub fn smallest_eigenpair(k: &SparseSymMatrix, m: &SparseSymMatrix, tol: f64) -> Result<EigenPair> {
    smallest_eigenpair_with(k, m, EigenOptions::with_tol(tol))
}

pub fn smallest_eigenpair_with(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    opts: EigenOptions,
) -> Result<EigenPair> {
    let n = k.dim();
    if m.dim() != n || n == 0 {
        return Err(Error::Contract(format!(
            "pencil dimensions {} and {}",
            n,
            m.dim()
        )));
    }
    let mut x = vec![1.0; n];
    let mnorm = m.quadratic_form(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= mnorm);

    let mut mx = m.mul_vec(&x);
    let mut kx = k.mul_vec(&x);
    let mut rq = m_rayleigh(k, m, &x);
    let mut history = vec![rq];
    let mut inner_tol = opts.inner_start;
    let mut inner_total = 0;
    let mut guess: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;

    for _ in 0..opts.max_outer {
        let report = solve_spd_attainable(k, &mx, guess.as_deref(), inner_tol)?;
        inner_total += report.iterations;
        let mut y = report.x;
        let ynorm = m.quadratic_form(&y).sqrt();
        if !(ynorm > 0.0) || !ynorm.is_finite() {
            return Err(Error::Contract("inverse iteration produced a null vector".into()));
        }
        y.iter_mut().for_each(|v| *v /= ynorm);
        m.mul_vec_into(&y, &mut mx);
        k.mul_vec_into(&y, &mut kx);
        let rq_new = m_rayleigh(k, m, &y);
        if rq_new < 0.0 {
            return Err(Error::NegativeRayleigh(rq_new));
        }
        let res: f64 = kx
            .iter()
            .zip(&mx)
            .map(|(a, b)| (a - rq_new * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = res / norm2(&mx);
        let change = (rq_new - rq).abs() / rq_new.abs().max(f64::MIN_POSITIVE);
        history.push(rq_new);
        // next solve sees K y' = M y with y' close to y / rq
        guess = Some(y.iter().map(|v| v / rq_new).collect());
        x = y;
        rq = rq_new;

        let converged = change < opts.rq_change && residual <= opts.tol && inner_tol <= opts.inner_floor;
        if converged {
            break;
        }
        inner_tol = (inner_tol * 0.1).max(opts.inner_floor);
    }
    let last_change = if history.len() >= 2 {
        let a = history[history.len() - 1];
        let b = history[history.len() - 2];
        (a - b).abs() / a.abs()
    } else {
        f64::INFINITY
    };
    if !(last_change < opts.rq_change && residual <= opts.tol) {
        return Err(Error::NonConvergence {
            iterations: history.len() - 1,
            residual,
        });
    }
    let weight: f64 = dot(&mx, &vec![1.0; n]);
    if weight < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let value = m_rayleigh(k, m, &x);
    Ok(EigenPair {
        value,
        vector: x,
        residual,
        history,
        inner_iterations: inner_total,
    })
}

/// `x^T K x / x^T M x`.
pub fn m_rayleigh(k: &SparseSymMatrix, m: &SparseSymMatrix, x: &[f64]) -> f64 {
    k.quadratic_form(x) / m.quadratic_form(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    l[i][i] = (a[i][i] - s).sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (b[i] - s) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
            x[i] = (y[i] - s) / l[i][i];
        }
        x
    }

    // cyclic Jacobi, returns eigenvalues
    fn dense_symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    #[test]
    fn identity_returns_rhs() {
        let a = SparseSymMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 1.0).collect();
        let x = solve_spd(&a, &b, 1e-14).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_system() {
        let a = SparseSymMatrix::from_triplets(5, (0..5).map(|i| (i, i, (i + 1) as f64)).collect());
        let x = solve_spd(&a, &[1.0; 5], 1e-14).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_matches_cholesky() {
        let n = 50;
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rnd()).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>();
            }
            a[i][i] += n as f64 * 0.1;
        }
        let b: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let oracle = dense_cholesky_solve(&a, &b);
        let x = solve_spd(&SparseSymMatrix::from_dense(&a), &b, 1e-13).unwrap();
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8);
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        // indefinite matrix is caught rather than looping
        let a = SparseSymMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(solve_spd(&a, &[1.0, 1.0], 1e-12).is_err());
    }

    #[test]
    fn diagonal_pencil() {
        let k = SparseSymMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 5.0]]);
        let m = SparseSymMatrix::identity(2);
        let ep = smallest_eigenpair(&k, &m, 1e-10).unwrap();
        assert!((ep.value - 2.0).abs() < 1e-12);
        assert!(ep.vector[0] > 0.0);
        assert!(ep.vector[1].abs() < 1e-6);
    }

    #[test]
    fn equal_matrices_give_unit_value() {
        let k = SparseSymMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let ep = smallest_eigenpair(&k, &k.clone(), 1e-10).unwrap();
        assert!((ep.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_graph_matches_jacobi_oracle() {
        let n = 10;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = 2.0;
            if i + 1 < n {
                dense[i][i + 1] = -1.0;
                dense[i + 1][i] = -1.0;
            }
        }
        let oracle = dense_symmetric_eigenvalues(dense.clone())[0];
        let k = SparseSymMatrix::from_dense(&dense);
        let ep = smallest_eigenpair(&k, &SparseSymMatrix::identity(n), 1e-11).unwrap();
        assert!((ep.value - oracle).abs() < 1e-10);
        assert!(ep.vector.iter().all(|&v| v > 0.0));
        let mnorm = dot(&ep.vector, &ep.vector);
        assert!((mnorm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_history_is_monotone() {
        let n = 30;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = 2.0 + (i as f64) * 0.01;
            if i + 1 < n {
                dense[i][i + 1] = -1.0;
                dense[i + 1][i] = -1.0;
            }
        }
        let k = SparseSymMatrix::from_dense(&dense);
        let m = SparseSymMatrix::identity(n);
        let ep = smallest_eigenpair(&k, &m, 1e-10).unwrap();
        for w in ep.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-13));
        }
        let rq = m_rayleigh(&k, &m, &ep.vector);
        assert!((rq - ep.value).abs() <= 1e-12 * ep.value);
    }
}
