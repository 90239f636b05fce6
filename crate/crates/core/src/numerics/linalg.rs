use super::{DenseMatrix, DenseVector};
use crate::{Error, Real, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative tolerance on the R diagonal used for numerical rank decisions.
pub(crate) const RANK_TOL: f64 = 1e-11;

/// LU factorization with partial pivoting.
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

/// Factors a square matrix, failing when a pivot drops below `pivot_tol`.
pub fn lu_factor<T: Real>(a: &DenseMatrix<T>, pivot_tol: f64) -> Result<LuFactors<T>> {
    assert!(a.is_square(), "lu_factor needs a square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best.as_f64() < pivot_tol {
            return Err(Error::SingularMatrix { step: k, pivot: best.as_f64() });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
        }
        let piv = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / piv;
            lu[(i, k)] = m;
            for j in k + 1..n {
                let akj = lu[(k, j)];
                lu[(i, j)] -= m * akj;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl<T: Real> LuFactors<T> {
    /// Solves `A x = b` with the stored factors.
    pub fn solve(&self, b: &DenseVector<T>) -> DenseVector<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "lu solve length mismatch");
        let mut y: Vec<T> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            for j in 0..i {
                let m = self.lu[(i, j)] * y[j];
                y[i] = y[i] - m;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let m = self.lu[(i, j)] * y[j];
                y[i] = y[i] - m;
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        DenseVector::from_vec_unchecked(y)
    }
}

/// One-shot linear solve `A x = b`.
pub fn solve_linear<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseVector<T>,
    pivot_tol: f64,
) -> Result<DenseVector<T>> {
    Ok(lu_factor(a, pivot_tol)?.solve(b))
}

/// Dense inverse via LU on the identity columns.
pub fn invert<T: Real>(a: &DenseMatrix<T>, pivot_tol: f64) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    let f = lu_factor(a, pivot_tol)?;
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DenseVector::zeros(n);
        e[j] = T::one();
        let col = f.solve(&e);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Householder QR with column pivoting: `A P = Q R`.
pub struct PivotedQr<T> {
    /// Orthogonal factor, `rows x rows`.
    pub q: DenseMatrix<T>,
    /// Upper-trapezoidal factor, `rows x cols`.
    pub r: DenseMatrix<T>,
    /// Column `j` of `R` corresponds to column `perm[j]` of the input.
    pub perm: Vec<usize>,
}

impl<T: Real> PivotedQr<T> {
    /// Numerical rank from the R diagonal: entries above `rel_tol` relative to
    /// the leading diagonal entry (itself gated absolutely by `rel_tol`).
    pub fn rank(&self, rel_tol: f64) -> usize {
        let k = self.r.rows().min(self.r.cols());
        if k == 0 {
            return 0;
        }
        let d0 = self.r[(0, 0)].abs();
        if d0.as_f64() < rel_tol {
            return 0;
        }
        let cut = T::of(rel_tol) * d0.max(T::one());
        (0..k).filter(|&i| self.r[(i, i)].abs() > cut).count()
    }
}

fn householder_qr<T: Real>(a: &DenseMatrix<T>, pivot: bool) -> PivotedQr<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut q = DenseMatrix::identity(m);
    let mut perm: Vec<usize> = (0..n).collect();
    let tiny = T::of(1e-300);
    for k in 0..m.min(n) {
        if pivot {
            // column with the largest remaining norm
            let mut jmax = k;
            let mut best = T::neg_infinity();
            for j in k..n {
                let mut s = T::zero();
                for i in k..m {
                    s += r[(i, j)] * r[(i, j)];
                }
                if s > best {
                    best = s;
                    jmax = j;
                }
            }
            if jmax != k {
                for i in 0..m {
                    let tmp = r[(i, k)];
                    r[(i, k)] = r[(i, jmax)];
                    r[(i, jmax)] = tmp;
                }
                perm.swap(k, jmax);
            }
        }
        let mut nx = T::zero();
        for i in k..m {
            nx += r[(i, k)] * r[(i, k)];
        }
        let nx = nx.sqrt();
        if nx < tiny {
            continue;
        }
        // reflector v, normalized
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        if v[0] >= T::zero() {
            v[0] += nx;
        } else {
            v[0] -= nx;
        }
        let mut nv = T::zero();
        for &vi in &v {
            nv += vi * vi;
        }
        let nv = nv.sqrt();
        if nv < tiny {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= nv;
        }
        // R[k.., k..] -= 2 v (v' R[k.., k..])
        let two = T::of(2.0);
        for j in k..n {
            let mut dot = T::zero();
            for (off, &vi) in v.iter().enumerate() {
                dot += vi * r[(k + off, j)];
            }
            let s = two * dot;
            for (off, &vi) in v.iter().enumerate() {
                r[(k + off, j)] -= s * vi;
            }
        }
        // Q[.., k..] -= 2 (Q[.., k..] v) v'
        for i in 0..m {
            let mut dot = T::zero();
            for (off, &vi) in v.iter().enumerate() {
                dot += q[(i, k + off)] * vi;
            }
            let s = two * dot;
            for (off, &vi) in v.iter().enumerate() {
                q[(i, k + off)] -= s * vi;
            }
        }
    }
    PivotedQr { q, r, perm }
}

/// Householder QR with column pivoting (explicit Q).
pub fn qr_col_pivot<T: Real>(a: &DenseMatrix<T>) -> PivotedQr<T> {
    householder_qr(a, true)
}

/// Plain Householder QR (no pivoting), used inside the least-squares kernel.
pub(crate) fn qr_plain<T: Real>(a: &DenseMatrix<T>) -> PivotedQr<T> {
    householder_qr(a, false)
}

/// Minimum-norm least-squares solution of `A x ~= b` for any shape or rank.
///
/// Complete orthogonal decomposition: a pivoted QR exposes the rank, a second
/// QR of the leading rows' transpose restricts the solution to the row space,
/// which is what makes it minimum-norm.
pub fn min_norm_least_squares<T: Real>(a: &DenseMatrix<T>, b: &DenseVector<T>) -> DenseVector<T> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m, "least squares length mismatch");
    if m == 0 || n == 0 {
        return DenseVector::zeros(n);
    }
    let f = qr_col_pivot(a);
    let rank = f.rank(RANK_TOL);
    if rank == 0 {
        return DenseVector::zeros(n);
    }
    let qtb = f.q.tr_matvec(b);
    // R1 = leading `rank` rows of R (r x n); factor R1' = U S
    let r1t = DenseMatrix::from_fn(n, rank, |i, j| f.r[(j, i)]);
    let g = qr_plain(&r1t);
    // solve S' w = c by forward substitution (S upper triangular in g.r)
    let mut w: Vec<T> = (0..rank).map(|i| qtb[i]).collect();
    for i in 0..rank {
        for j in 0..i {
            let s = g.r[(j, i)] * w[j];
            w[i] = w[i] - s;
        }
        w[i] = w[i] / g.r[(i, i)];
    }
    // y = U w lives in the row space; undo the column permutation
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        let mut yi = T::zero();
        for (j, &wj) in w.iter().enumerate() {
            yi += g.q[(i, j)] * wj;
        }
        x[f.perm[i]] = yi;
    }
    DenseVector::from_vec_unchecked(x)
}

/// Spectral radius by the power method.
///
/// Nonnegative matrices are iterated with a diagonal shift (eigenvalues
/// translate exactly) so periodic listening structures cannot stall the
/// iteration, falling back to the plain iteration if the shift stalls on a
/// defective matrix. The plain iteration carries a squared-matrix test that
/// resolves dominant `±rho` pairs. Matrices whose dominant modulus is carried
/// by an unresolved complex or defective cluster report `NotConverged`; starts
/// are the all-ones vector with deterministic positive restarts.
pub fn spectral_radius<T: Real>(a: &DenseMatrix<T>, tol: f64, max_iter: usize) -> Result<T> {
    assert!(a.is_square(), "spectral_radius needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    let nonneg = (0..n).all(|i| a.row(i).iter().all(|&v| v >= T::zero()));
    if nonneg {
        let shift = T::of(0.1) * (T::one() + a.max_abs());
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += shift;
        }
        if let Ok(r) = power_iterate(&b, shift, false, tol, max_iter) {
            return Ok(r);
        }
        // shifted iteration stalls on defective spectra (e.g. nilpotent
        // blocks); the plain iteration handles those via iterate death
    }
    power_iterate(a, T::zero(), true, tol, max_iter)
}

fn power_iterate<T: Real>(
    b: &DenseMatrix<T>,
    shift: T,
    square_test: bool,
    tol: f64,
    max_iter: usize,
) -> Result<T> {
    let n = b.rows();
    let tol = T::of(tol);
    let tiny = T::of(1e-300);
    let mut x = DenseVector::ones(n);
    let mut restarts = 0usize;
    let mut last_res = f64::INFINITY;
    for _ in 0..max_iter {
        let y = b.matvec(&x);
        let ny = y.norm_inf();
        if ny < tiny {
            // iterate died; restart from a deterministic positive vector, and
            // after repeated collapses conclude the radius is zero
            if restarts < 2 {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5EED + restarts as u64);
                x = DenseVector::from_f64s(
                    &(0..n).map(|_| rng.gen_range(0.5..1.5)).collect::<Vec<f64>>(),
                );
                restarts += 1;
                continue;
            }
            return Ok(T::zero());
        }
        let xx = x.dot(&x);
        let lam = x.dot(&y) / xx;
        let mut resid = y.clone();
        resid.axpy(-lam, &x);
        let res = resid.norm_inf();
        last_res = res.as_f64();
        if res <= tol * T::one().max(lam.abs()) {
            return Ok((lam.abs() - shift).max(T::zero()));
        }
        if square_test {
            // catches dominant pairs of opposite sign or pure rotation
            let z = b.matvec(&y);
            let mu = x.dot(&z) / xx;
            let mut resid2 = z;
            resid2.axpy(-mu, &x);
            if resid2.norm_inf() <= tol * T::one().max(mu.abs()) {
                return Ok(mu.abs().sqrt());
            }
        }
        x = y.scale(T::one() / ny);
    }
    Err(Error::NotConverged { iterations: max_iter, residual: last_res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[Vec<f64>]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn lu_solves_small_system() {
        let a = mat(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = DenseVector::from_f64s(&[1.0, 2.0]);
        let x = solve_linear(&a, &b, 1e-13).unwrap();
        assert_abs_diff_eq!(x[0], 1.0 / 11.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 7.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = mat(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            lu_factor(&a, 1e-13),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn invert_matches_hand_inverse() {
        let a = mat(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        let inv = invert(&a, 1e-13).unwrap();
        let expect = mat(&[vec![0.5, 0.0], vec![-0.5, 1.0]]);
        assert!(inv.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn qr_reconstructs_and_ranks() {
        let a = mat(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]);
        let f = qr_col_pivot(&a);
        // Q R should equal A with permuted columns
        let qr = f.q.matmul(&f.r);
        let ap = a.select_columns(&f.perm);
        assert!(qr.max_abs_diff(&ap) < 1e-12);
        // this matrix has rank 2
        assert_eq!(f.rank(RANK_TOL), 2);
        // orthogonality
        let qtq = f.q.transpose().matmul(&f.q);
        assert!(qtq.max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn least_squares_overdetermined() {
        // fit y = c0 + c1 t through (0,1), (1,2), (2,2.5): normal-equations
        // answer is c = (13/12, 3/4)
        let a = mat(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let b = DenseVector::from_f64s(&[1.0, 2.0, 2.5]);
        let x = min_norm_least_squares(&a, &b);
        assert_abs_diff_eq!(x[0], 13.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_underdetermined_is_min_norm() {
        // u1 + u2 = 1 has minimum-norm solution (0.5, 0.5)
        let a = mat(&[vec![1.0, 1.0]]);
        let b = DenseVector::from_f64s(&[1.0]);
        let x = min_norm_least_squares(&a, &b);
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn least_squares_rank_deficient() {
        // both columns identical: residual is minimized with the symmetric
        // minimum-norm split
        let a = mat(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = DenseVector::from_f64s(&[2.0, 2.0]);
        let x = min_norm_least_squares(&a, &b);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_inconsistent_system() {
        // overdetermined inconsistent: projection onto the column span
        let a = mat(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = DenseVector::from_f64s(&[1.0, 3.0, 5.0]);
        let x = min_norm_least_squares(&a, &b);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_radius_diagonal() {
        let a = mat(&[vec![0.3, 0.0], vec![0.0, 0.9]]);
        let r = spectral_radius(&a, 1e-10, 10_000).unwrap();
        assert_abs_diff_eq!(r, 0.9, epsilon = 1e-8);
    }

    #[test]
    fn spectral_radius_bipartite_pair() {
        // eigenvalues are exactly +-0.5; the plain power method would cycle
        let a = mat(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        let r = spectral_radius(&a, 1e-10, 10_000).unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn spectral_radius_three_cycle() {
        // directed 3-cycle with weights a, b, c has radius (abc)^(1/3)
        let a = mat(&[
            vec![0.0, 0.8, 0.0],
            vec![0.0, 0.0, 0.5],
            vec![0.2, 0.0, 0.0],
        ]);
        let r = spectral_radius(&a, 1e-10, 10_000).unwrap();
        assert_abs_diff_eq!(r, (0.8f64 * 0.5 * 0.2).powf(1.0 / 3.0), epsilon = 1e-8);
    }

    #[test]
    fn spectral_radius_zero_and_nilpotent() {
        let z = DenseMatrix::<f64>::zeros(3, 3);
        assert_abs_diff_eq!(spectral_radius(&z, 1e-10, 100).unwrap(), 0.0);
        let nil = mat(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_abs_diff_eq!(spectral_radius(&nil, 1e-10, 10_000).unwrap(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn spectral_radius_negative_rotation() {
        // +-i pair, radius 1, needs the squared-matrix test
        let a = mat(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let r = spectral_radius(&a, 1e-10, 10_000).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-8);
    }
}
