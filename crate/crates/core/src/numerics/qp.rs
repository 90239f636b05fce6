use super::linalg::{min_norm_least_squares, qr_col_pivot, RANK_TOL};
use super::{DenseMatrix, DenseVector};
use crate::{Error, Real, Result};
use std::collections::BTreeMap;

/// Which side of its box a variable sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// One box constraint active at the solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveBound {
    pub index: usize,
    pub side: BoundSide,
}

/// Convex quadratic program `min ½uᵀPu + qᵀu  s.t.  Eu = f, lo ≤ u ≤ hi`.
///
/// The Hessian is symmetrized on construction; bounds are finite by
/// construction (vectors reject non-finite entries) and must satisfy
/// `lo ≤ hi` componentwise.
#[derive(Clone, Debug)]
pub struct QpProblem<T> {
    hessian: DenseMatrix<T>,
    linear: DenseVector<T>,
    eq_matrix: DenseMatrix<T>,
    eq_rhs: DenseVector<T>,
    lower: DenseVector<T>,
    upper: DenseVector<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(
        hessian: DenseMatrix<T>,
        linear: DenseVector<T>,
        eq_matrix: DenseMatrix<T>,
        eq_rhs: DenseVector<T>,
        lower: DenseVector<T>,
        upper: DenseVector<T>,
    ) -> Result<Self> {
        let d = linear.len();
        if !hessian.is_square() || hessian.rows() != d {
            return Err(Error::DimensionMismatch {
                context: "qp hessian",
                expected: d,
                got: hessian.rows(),
            });
        }
        if eq_matrix.cols() != d && eq_matrix.rows() > 0 {
            return Err(Error::DimensionMismatch {
                context: "qp equality matrix",
                expected: d,
                got: eq_matrix.cols(),
            });
        }
        if eq_rhs.len() != eq_matrix.rows() {
            return Err(Error::DimensionMismatch {
                context: "qp equality rhs",
                expected: eq_matrix.rows(),
                got: eq_rhs.len(),
            });
        }
        if lower.len() != d || upper.len() != d {
            return Err(Error::DimensionMismatch {
                context: "qp bounds",
                expected: d,
                got: lower.len().min(upper.len()),
            });
        }
        for i in 0..d {
            if lower[i] > upper[i] {
                return Err(Error::QpFailure {
                    reason: format!("lower bound exceeds upper bound at index {i}"),
                });
            }
        }
        let half = T::of(0.5);
        let sym = hessian.add(&hessian.transpose()).scale(half);
        Ok(Self { hessian: sym, linear, eq_matrix, eq_rhs, lower, upper })
    }

    /// Box-constrained problem without equality rows.
    pub fn boxed(
        hessian: DenseMatrix<T>,
        linear: DenseVector<T>,
        lower: DenseVector<T>,
        upper: DenseVector<T>,
    ) -> Result<Self> {
        let d = linear.len();
        Self::new(hessian, linear, DenseMatrix::zeros(0, d), DenseVector::zeros(0), lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn eq_count(&self) -> usize {
        self.eq_matrix.rows()
    }

    pub fn hessian(&self) -> &DenseMatrix<T> {
        &self.hessian
    }

    pub fn linear(&self) -> &DenseVector<T> {
        &self.linear
    }

    /// Objective value `½uᵀPu + qᵀu` at a point.
    pub fn objective(&self, u: &DenseVector<T>) -> T {
        T::of(0.5) * u.dot(&self.hessian.matvec(u)) + self.linear.dot(u)
    }
}

/// Solver verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Solver output: the point, its objective, a KKT residual certificate and
/// the box constraints active at the end.
#[derive(Clone, Debug)]
pub struct QpSolution<T> {
    pub point: DenseVector<T>,
    pub objective: T,
    pub status: QpStatus,
    pub kkt_residual: T,
    pub active_set: Vec<ActiveBound>,
    pub iterations: usize,
}

/// Solves the program cold.
pub fn solve_qp<T: Real>(problem: &QpProblem<T>, tol: f64, max_iter: usize) -> QpSolution<T> {
    solve_qp_warm(problem, tol, max_iter, None)
}

/// Solves the program from an optional warm-start point.
///
/// Null-space active-set method: independent equality rows are selected by a
/// rank-revealing QR (redundant rows are checked for consistency and
/// dropped), a feasible start comes from clamping/projection or a
/// bounded-variable least-squares phase 1, and each working-set iteration
/// minimizes over the null space of the pinned equality system. Constraint
/// release follows the lowest-index rule.
pub fn solve_qp_warm<T: Real>(
    problem: &QpProblem<T>,
    tol: f64,
    max_iter: usize,
    warm: Option<&DenseVector<T>>,
) -> QpSolution<T> {
    let d = problem.dim();
    let m = problem.eq_count();
    let p = &problem.hessian;
    let q = &problem.linear;
    let lo = &problem.lower;
    let hi = &problem.upper;
    let tol_t = T::of(tol);

    // --- equality preprocessing: independent rows + redundancy bookkeeping ---
    let (keep, drop) = if m > 0 {
        let f = qr_col_pivot(&problem.eq_matrix.transpose());
        let r = f.rank(RANK_TOL);
        (f.perm[..r].to_vec(), f.perm[r..].to_vec())
    } else {
        (Vec::new(), Vec::new())
    };
    let r_rows = keep.len();
    let er = problem.eq_matrix.select_rows(&keep);
    let fr = DenseVector::from_vec_unchecked(keep.iter().map(|&i| problem.eq_rhs[i]).collect());
    let scale_f = T::one() + problem.eq_rhs.norm_inf();

    let eq_resid = |u: &DenseVector<T>| -> T {
        if r_rows == 0 {
            T::zero()
        } else {
            er.matvec(u).sub(&fr).norm_inf()
        }
    };

    // minimum-norm solution of `Er c = rhs` via QR of Erᵀ (rows independent)
    let eq_factor = if r_rows > 0 { Some(qr_col_pivot(&er.transpose())) } else { None };
    let min_norm_eq = |rhs: &DenseVector<T>| -> DenseVector<T> {
        let f = eq_factor.as_ref().expect("equality factor");
        let mut z: Vec<T> = (0..r_rows).map(|i| rhs[f.perm[i]]).collect();
        for i in 0..r_rows {
            for j in 0..i {
                let s = f.r[(j, i)] * z[j];
                z[i] = z[i] - s;
            }
            z[i] = z[i] / f.r[(i, i)];
        }
        let mut c = vec![T::zero(); d];
        for (i, ci) in c.iter_mut().enumerate() {
            for (j, &zj) in z.iter().enumerate() {
                *ci += f.q[(i, j)] * zj;
            }
        }
        DenseVector::from_vec_unchecked(c)
    };

    let accept = T::of(1e-8) * scale_f;
    let infeas_cut = T::of(1e-7) * scale_f;

    // --- starting point ---
    let mut u: Option<DenseVector<T>> = None;
    if let Some(w) = warm {
        let w1 = w.clamp_box(lo, hi);
        if eq_resid(&w1) <= accept {
            u = Some(w1);
        } else if r_rows > 0 {
            let corr = min_norm_eq(&fr.sub(&er.matvec(&w1)));
            let w2 = w1.add(&corr).clamp_box(lo, hi);
            if eq_resid(&w2) <= accept {
                u = Some(w2);
            }
        }
    }
    let mut u = match u {
        Some(u) => u,
        None => {
            if r_rows > 0 {
                let u0 = min_norm_eq(&fr).clamp_box(lo, hi);
                if eq_resid(&u0) <= accept {
                    u0
                } else {
                    // phase 1: bounded-variable least squares on the equalities
                    let (u1, resid) =
                        bvls_feasible(&er, &fr, lo, hi, T::of(1e-9) * scale_f, Some(&u0));
                    if resid > infeas_cut {
                        return QpSolution {
                            point: u1,
                            objective: T::infinity(),
                            status: QpStatus::Infeasible,
                            kkt_residual: resid,
                            active_set: Vec::new(),
                            iterations: 0,
                        };
                    }
                    u1
                }
            } else {
                DenseVector::zeros(d).clamp_box(lo, hi)
            }
        }
    };

    // dropped redundant rows must agree with the feasible point
    if !drop.is_empty() {
        let mut worst = T::zero();
        for &i in &drop {
            let row = problem.eq_matrix.row(i);
            let mut dot = T::zero();
            for (j, &v) in row.iter().enumerate() {
                dot += v * u[j];
            }
            worst = worst.max((dot - problem.eq_rhs[i]).abs());
        }
        if worst > infeas_cut {
            return QpSolution {
                point: u,
                objective: T::infinity(),
                status: QpStatus::Infeasible,
                kkt_residual: worst,
                active_set: Vec::new(),
                iterations: 0,
            };
        }
    }

    // --- working set: boxes active at the start ---
    let pin = T::of(1e-14);
    let snap = T::of(1e-12);
    let mut active: BTreeMap<usize, BoundSide> = BTreeMap::new();
    for i in 0..d {
        if hi[i] - lo[i] < pin {
            active.insert(i, BoundSide::Lower);
        } else if u[i] <= lo[i] + snap {
            u[i] = lo[i];
            active.insert(i, BoundSide::Lower);
        } else if u[i] >= hi[i] - snap {
            u[i] = hi[i];
            active.insert(i, BoundSide::Upper);
        }
    }

    for it in 0..max_iter {
        let free: Vec<bool> = (0..d).map(|i| !active.contains_key(&i)).collect();
        let g = p.matvec(&u).add(q);
        let (step, ray) = eq_subproblem(p, &g, &er, &free);
        if let Some(ray) = ray {
            // descent direction unbounded in the null space; with finite boxes
            // a blocking bound always exists
            let (alpha, blk) = ratio_test(&u, &ray, &free, lo, hi, T::infinity());
            match blk {
                Some((i, side)) => {
                    u.axpy(alpha, &ray);
                    u[i] = if side == BoundSide::Lower { lo[i] } else { hi[i] };
                    active.insert(i, side);
                    continue;
                }
                None => {
                    // unreachable with finite boxes; report honestly
                    let objective = problem.objective(&u);
                    return QpSolution {
                        point: u,
                        objective,
                        status: QpStatus::MaxIterations,
                        kkt_residual: T::infinity(),
                        active_set: active_list(&active),
                        iterations: it,
                    };
                }
            }
        }
        let pstep = step.expect("either step or ray");
        if pstep.norm_inf() > T::of(1e-11) * (T::one() + u.norm_inf()) {
            let (alpha, blk) = ratio_test(&u, &pstep, &free, lo, hi, T::one());
            u.axpy(alpha, &pstep);
            if let Some((i, side)) = blk {
                u[i] = if side == BoundSide::Lower { lo[i] } else { hi[i] };
                active.insert(i, side);
                continue;
            }
            // full step taken; fall through to the multiplier check
        }
        // multipliers from the stationarity system on the free variables
        let g = p.matvec(&u).add(q);
        let f_idx: Vec<usize> = (0..d).filter(|i| !active.contains_key(i)).collect();
        let gred = if r_rows > 0 {
            let eft = er.select_columns(&f_idx).transpose();
            let gf = DenseVector::from_vec_unchecked(f_idx.iter().map(|&i| g[i]).collect());
            let nu = min_norm_least_squares(&eft, &gf);
            g.sub(&er.tr_matvec(&nu))
        } else {
            g.clone()
        };
        let mut release: Option<usize> = None;
        for (&i, &side) in active.iter() {
            if hi[i] - lo[i] < pin {
                continue; // pinned variable, never released
            }
            let mu = if side == BoundSide::Lower { gred[i] } else { -gred[i] };
            if mu < -tol_t {
                release = Some(i);
                break; // lowest-index rule
            }
        }
        match release {
            Some(i) => {
                active.remove(&i);
                continue;
            }
            None => {
                // optimal: assemble the KKT residual certificate
                let mut stat = T::zero();
                for i in 0..d {
                    if !active.contains_key(&i) {
                        stat = stat.max(gred[i].abs());
                    }
                }
                let mut box_violation = T::zero();
                for i in 0..d {
                    box_violation = box_violation.max(lo[i] - u[i]).max(u[i] - hi[i]);
                }
                let kkt = stat.max(eq_resid(&u)).max(box_violation.max(T::zero()));
                let objective = problem.objective(&u);
                return QpSolution {
                    point: u,
                    objective,
                    status: QpStatus::Optimal,
                    kkt_residual: kkt,
                    active_set: active_list(&active),
                    iterations: it + 1,
                };
            }
        }
    }
    let objective = problem.objective(&u);
    QpSolution {
        point: u,
        objective,
        status: QpStatus::MaxIterations,
        kkt_residual: T::infinity(),
        active_set: active_list(&active),
        iterations: max_iter,
    }
}

fn active_list(active: &BTreeMap<usize, BoundSide>) -> Vec<ActiveBound> {
    active.iter().map(|(&index, &side)| ActiveBound { index, side }).collect()
}

/// First blocking box along direction `p` from `u`, capped at `cap`.
///
/// Strictly smaller step lengths win; on (near-)ties the lowest index is kept.
fn ratio_test<T: Real>(
    u: &DenseVector<T>,
    p: &DenseVector<T>,
    free: &[bool],
    lo: &DenseVector<T>,
    hi: &DenseVector<T>,
    cap: T,
) -> (T, Option<(usize, BoundSide)>) {
    let floor = T::of(1e-14);
    let slack = T::of(1e-15);
    let mut alpha = cap;
    let mut blk = None;
    for i in 0..u.len() {
        if !free[i] || p[i].abs() <= floor {
            continue;
        }
        let (a, side) = if p[i] > T::zero() {
            ((hi[i] - u[i]) / p[i], BoundSide::Upper)
        } else {
            ((lo[i] - u[i]) / p[i], BoundSide::Lower)
        };
        if a < alpha - slack {
            alpha = a;
            blk = Some((i, side));
        }
    }
    (alpha, blk)
}

/// Equality-constrained subproblem on the free variables:
/// `min ½pᵀPp + gᵀp  s.t.  E_F p_F = 0, p fixed = 0`.
///
/// Returns `(step, ray)`: a finite minimizer, or an unbounded descent ray when
/// the reduced gradient has a component in the null space of the reduced
/// Hessian.
fn eq_subproblem<T: Real>(
    p: &DenseMatrix<T>,
    g: &DenseVector<T>,
    er: &DenseMatrix<T>,
    free: &[bool],
) -> (Option<DenseVector<T>>, Option<DenseVector<T>>) {
    let d = g.len();
    let f_idx: Vec<usize> = (0..d).filter(|&i| free[i]).collect();
    if f_idx.is_empty() {
        return (Some(DenseVector::zeros(d)), None);
    }
    // null basis of E_F via QR of E_Fᵀ
    let z = if er.rows() > 0 {
        let ef_t = er.select_columns(&f_idx).transpose();
        let f = qr_col_pivot(&ef_t);
        let r = f.rank(RANK_TOL);
        let cols: Vec<usize> = (r..f_idx.len()).collect();
        f.q.select_columns(&cols)
    } else {
        DenseMatrix::identity(f_idx.len())
    };
    if z.cols() == 0 {
        return (Some(DenseVector::zeros(d)), None);
    }
    let pff = p.select_block(&f_idx, &f_idx);
    let gf = DenseVector::from_vec_unchecked(f_idx.iter().map(|&i| g[i]).collect());
    let s = z.transpose().matmul(&pff).matmul(&z);
    let b = z.tr_matvec(&gf).scale(-T::one());
    // minimum-norm pseudo-solve of the reduced system
    let y = min_norm_least_squares(&s, &b);
    let resid = b.sub(&s.matvec(&y));
    let consistent = resid.norm_inf() <= T::of(1e-9) * T::one().max(b.norm_inf());
    let embed = |vals: &DenseVector<T>| -> DenseVector<T> {
        let mut full = DenseVector::zeros(d);
        for (k, &i) in f_idx.iter().enumerate() {
            full[i] = vals[k];
        }
        full
    };
    if !consistent {
        let ray_f = z.matvec(&resid);
        return (None, Some(embed(&ray_f)));
    }
    let step_f = z.matvec(&y);
    (Some(embed(&step_f)), None)
}

/// Bounded-variable least squares: `min ‖Eu − f‖₂  s.t.  lo ≤ u ≤ hi`.
///
/// Active-set method with minimum-norm least-squares steps. The release rule
/// picks the most negative multiplier normalized by column and residual norm
/// (so tiny-column variables are not missed), ties to the lowest index.
/// Returns the final point and its infinity-norm residual.
fn bvls_feasible<T: Real>(
    e: &DenseMatrix<T>,
    f: &DenseVector<T>,
    lo: &DenseVector<T>,
    hi: &DenseVector<T>,
    tol: T,
    start: Option<&DenseVector<T>>,
) -> (DenseVector<T>, T) {
    let d = e.cols();
    let max_iter = 10 * d + 100;
    let scale = T::one() + f.norm_inf();
    let mut u = match start {
        Some(s) => s.clamp_box(lo, hi),
        None => DenseVector::zeros(d).clamp_box(lo, hi),
    };
    let edge = T::of(1e-14);
    let mut state: BTreeMap<usize, BoundSide> = BTreeMap::new();
    for i in 0..d {
        if u[i] <= lo[i] + edge {
            u[i] = lo[i];
            state.insert(i, BoundSide::Lower);
        } else if u[i] >= hi[i] - edge {
            u[i] = hi[i];
            state.insert(i, BoundSide::Upper);
        }
    }
    let step_cut = T::of(1e-13) * scale;
    let release_cut = T::of(-1e-8);
    let tiny = T::of(1e-300);
    for _ in 0..max_iter {
        let f_idx: Vec<usize> = (0..d).filter(|i| !state.contains_key(i)).collect();
        let r = f.sub(&e.matvec(&u));
        if r.norm_inf() <= tol {
            return (u, r.norm_inf());
        }
        let mut moved = false;
        if !f_idx.is_empty() {
            let ef = e.select_columns(&f_idx);
            let df = min_norm_least_squares(&ef, &r);
            // stationary when the step's effect on the residual sits at
            // rounding level for the problem's scale
            if ef.matvec(&df).norm2() > step_cut {
                let free: Vec<bool> = (0..d).map(|i| !state.contains_key(&i)).collect();
                let full = DenseVector::from_vec_unchecked({
                    let mut v = vec![T::zero(); d];
                    for (k, &i) in f_idx.iter().enumerate() {
                        v[i] = df[k];
                    }
                    v
                });
                let (alpha, blk) = ratio_test(&u, &full, &free, lo, hi, T::one());
                u.axpy(alpha, &full);
                if let Some((i, side)) = blk {
                    u[i] = if side == BoundSide::Lower { lo[i] } else { hi[i] };
                    state.insert(i, side);
                }
                moved = true;
            }
        }
        if !moved {
            // stationary on the free set: release the most negative
            // normalized multiplier
            let r = f.sub(&e.matvec(&u));
            let rnorm = r.norm2();
            let g1 = e.tr_matvec(&r).scale(-T::one());
            let mut release: Option<usize> = None;
            let mut best = release_cut;
            for (&i, &side) in state.iter() {
                let cn = e.column(i).norm2();
                if cn < tiny || rnorm < tiny {
                    continue;
                }
                let mu = if side == BoundSide::Lower { g1[i] } else { -g1[i] } / (cn * rnorm);
                if mu < best {
                    release = Some(i);
                    best = mu;
                }
            }
            match release {
                Some(i) => {
                    state.remove(&i);
                }
                None => return (u, r.norm_inf()),
            }
        }
    }
    let r = f.sub(&e.matvec(&u));
    (u, r.norm_inf())
}
