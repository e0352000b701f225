//! Sparse symmetric storage, the direct and iterative solvers used on the
//! condensed system, and extreme-eigenvalue estimates.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HhoError, Result};

/// Compressed sparse column matrix with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the matrix from `(row, col, value)` entries, summing duplicates in
    /// input order so the result only depends on the entry sequence.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(HhoError::InvalidInput(format!("entry ({r}, {c}) outside a {n}x{n} matrix")));
        }
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&i| (entries[i].1, entries[i].0));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::new();
        let mut val = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for i in order {
            let (r, c, v) = entries[i];
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                val.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self { n, col_ptr, row_idx, val })
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(i) => self.val[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (c, &xc) in x.iter().enumerate() {
            for i in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[i]] += self.val[i] * xc;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for c in 0..self.n {
            for i in self.col_ptr[c]..self.col_ptr[c + 1] {
                d[(self.row_idx[i], c)] += self.val[i];
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for c in 0..self.n {
            for i in self.col_ptr[c]..self.col_ptr[c + 1] {
                worst = worst.max((self.val[i] - self.get(c, self.row_idx[i])).abs());
            }
        }
        worst / scale
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for c in 0..self.n {
            for i in self.col_ptr[c]..self.col_ptr[c + 1] {
                t.push(Triplet::new(self.row_idx[i], c, self.val[i]));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| HhoError::Factorization(format!("sparse matrix construction: {e:?}")))
    }
}

/// Sparse Cholesky factor of an SPD matrix.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| HhoError::Factorization(format!("sparse Cholesky failed, matrix is not positive definite: {e:?}")))?;
        Ok(Self { n: a.n, llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖A x - b‖ / ‖b‖`, or `‖A x‖` when `b = 0`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb == 0.0 { norm(&r) } else { norm(&r) / nb }
}

/// Direct solve with up to three steps of iterative refinement until the
/// relative residual is at most `tol`, or at most the double-precision
/// rounding floor `u ‖ |A| |x| ‖ / ‖b‖` when that is larger.
pub fn solve_direct(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    if a.n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let chol = SparseCholesky::new(a)?;
    let mut x = chol.solve(b);
    let mut res = relative_residual(a, &x, b);
    for _ in 0..3 {
        if res <= tol {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = chol.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        res = relative_residual(a, &x, b);
    }
    // Below the rounding floor no double-precision x does better.
    let limit = tol.max(rounding_floor(a, &x, b));
    if !res.is_finite() || res > limit {
        return Err(HhoError::Factorization(format!("relative residual {res:.3e} above {limit:.1e} after refinement")));
    }
    Ok((x, res))
}

/// Relative residual attainable in double precision: `u ‖ |A| |x| ‖ / ‖b‖`.
fn rounding_floor(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.n];
    for j in 0..a.n {
        for p in a.col_ptr[j]..a.col_ptr[j + 1] {
            ax[a.row_idx[p]] += (a.val[p] * x[j]).abs();
        }
    }
    f64::EPSILON * norm(&ax) / norm(b)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_pcg(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let nb = norm(b);
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(HhoError::Factorization("conjugate gradients met a non-positive curvature direction".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * nb {
            return Ok((x, it));
        }
        z = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(HhoError::Convergence(format!("conjugate gradients did not reach {tol:.1e} in {max_iter} iterations")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CondMethod {
    /// Dense eigensolve up to [`DENSE_COND_LIMIT`] unknowns, Lanczos beyond.
    Auto,
    Dense,
    Lanczos,
}

pub const DENSE_COND_LIMIT: usize = 2000;

/// Settings for the Lanczos extreme-eigenvalue estimate.
#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 400, seed: 0x5eed }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by Lanczos
/// with full reorthogonalization. Stops once the Ritz residual bound is below
/// `tol` times the Ritz value.
pub fn lanczos_largest(n: usize, op: impl Fn(&[f64]) -> Vec<f64>, opts: &LanczosOptions) -> Result<f64> {
    if n == 0 {
        return Err(HhoError::InvalidInput("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = opts.max_iter.min(n);
    for j in 0..steps {
        let mut w = op(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let bound = b * eig.eigenvectors[(m - 1, imax)].abs();
        if bound <= opts.tol * theta.abs() || b <= 1e-14 * theta.abs() || m == n {
            return Ok(theta);
        }
        if j + 1 == steps {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    Err(HhoError::Convergence(format!("Lanczos did not converge in {steps} iterations")))
}

/// Extreme eigenvalues `(λ_min, λ_max)` of an SPD sparse matrix.
pub fn extreme_eigenvalues(a: &SparseMatrix, method: CondMethod, opts: &LanczosOptions) -> Result<(f64, f64)> {
    if a.n == 0 {
        return Err(HhoError::InvalidInput("condition number of an empty system".into()));
    }
    let dense = match method {
        CondMethod::Auto => a.n <= DENSE_COND_LIMIT,
        CondMethod::Dense => true,
        CondMethod::Lanczos => false,
    };
    if dense {
        let d = a.to_dense();
        let ev = SymmetricEigen::new((&d + d.transpose()) * 0.5).eigenvalues;
        return Ok((ev.min(), ev.max()));
    }
    let lmax = lanczos_largest(a.n, |x| a.mul_vec(x), opts)?;
    let chol = SparseCholesky::new(a)?;
    let inv_max = lanczos_largest(a.n, |x| chol.solve(x), opts)?;
    Ok((1.0 / inv_max, lmax))
}

/// Spectral condition number `λ_max / λ_min` of an SPD sparse matrix.
pub fn condition_number(a: &SparseMatrix, method: CondMethod, opts: &LanczosOptions) -> Result<f64> {
    let (lmin, lmax) = extreme_eigenvalues(a, method, opts)?;
    if lmin <= 0.0 {
        return Err(HhoError::Factorization(format!("matrix is not positive definite (smallest eigenvalue {lmin:.3e})")));
    }
    Ok(lmax / lmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, 5.0)]).unwrap();
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert!(SparseMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn direct_and_cg_agree() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, res) = solve_direct(&a, &b, 1e-12).unwrap();
        assert!(res <= 1e-12);
        let (y, _) = solve_pcg(&a, &b, 1e-13, 500).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_matrix_fails_to_factor() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(solve_direct(&a, &[1.0, 1.0], 1e-10), Err(HhoError::Factorization(_))));
    }

    #[test]
    fn condition_number_examples() {
        let id = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        assert!((condition_number(&id, CondMethod::Dense, &Default::default()).unwrap() - 1.0).abs() < 1e-14);
        let d = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 10.0)]).unwrap();
        assert!((condition_number(&d, CondMethod::Dense, &Default::default()).unwrap() - 10.0).abs() < 1e-12);
        assert!((condition_number(&d, CondMethod::Lanczos, &Default::default()).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn lanczos_matches_closed_form_spectrum() {
        let n = 400;
        let a = laplacian_1d(n);
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let lmin = 2.0 - 2.0 * h.cos();
        let lmax = 2.0 + 2.0 * h.cos();
        let (emin, emax) = extreme_eigenvalues(&a, CondMethod::Lanczos, &Default::default()).unwrap();
        assert!((emin - lmin).abs() <= 1e-3 * lmin, "{emin} vs {lmin}");
        assert!((emax - lmax).abs() <= 1e-3 * lmax, "{emax} vs {lmax}");
    }
}
