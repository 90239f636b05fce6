//! Receding-horizon planner over the scalar recommendation.
//!
//! The horizon-`T` optimal control problem is condensed onto the input
//! sequence alone: states are eliminated through the affine dynamics, leaving
//! a strictly convex box-constrained QP in `u_0..u_{T−1}` with (optionally)
//! a terminal equality pinning the predicted endpoint to the
//! engagement-optimal steady state.

use super::{mb_target, MbTarget};
use crate::numerics::{
    solve_qp_warm, DenseMatrix, DenseVector, NumericSettings, QpProblem, QpStatus,
};
use crate::plant::ControlledPlant;
use crate::{Error, Real, Result};

/// Weight that makes the soft terminal penalty behave like the constraint.
pub const DEFAULT_SOFT_WEIGHT: f64 = 1e6;

/// How the planner treats the horizon endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalMode {
    /// Equality constraint: the predicted endpoint must hit the target.
    Exact,
    /// Quadratic penalty with this weight on missing the target.
    Soft(f64),
}

/// One solved horizon problem.
#[derive(Clone, Debug)]
pub struct OcpSolution<T> {
    /// Planned inputs `u_0..u_{T−1}`.
    pub inputs: DenseVector<T>,
    /// Predicted opinions `x_0..x_T` under those inputs.
    pub predicted_states: Vec<DenseVector<T>>,
    /// Full horizon cost including the state-only constant term.
    pub cost: T,
    pub kkt_residual: T,
    pub iterations: usize,
}

/// Plans over a fixed horizon, applies the first input, and warm-starts the
/// next solve with the shifted plan.
#[derive(Clone, Debug)]
pub struct MpcController<T> {
    plant: ControlledPlant<T>,
    horizon: usize,
    mode: TerminalMode,
    settings: NumericSettings,
    target: MbTarget<T>,
    /// `A^k` for `k = 0..=T`.
    apow: Vec<DenseMatrix<T>>,
    /// Accumulated anchor term `c_k = Σ_{j<k} A^j Λx(0)` for `k = 0..=T`.
    ck: Vec<DenseVector<T>>,
    /// Condensed Hessian (soft terminal penalty folded in when active).
    p: DenseMatrix<T>,
    /// State-dependent part of the linear term: `q(x) = Qx·x + q0`.
    qx: DenseMatrix<T>,
    q0: DenseVector<T>,
    /// Terminal response: column `j` is `A^{T−1−j} B`.
    e: DenseMatrix<T>,
    lower: DenseVector<T>,
    upper: DenseVector<T>,
    warm: Option<DenseVector<T>>,
}

impl<T: Real> MpcController<T> {
    pub fn new(
        plant: ControlledPlant<T>,
        horizon: usize,
        mode: TerminalMode,
        settings: NumericSettings,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::DimensionMismatch {
                context: "mpc horizon",
                expected: 1,
                got: 0,
            });
        }
        let target = mb_target(&plant, &settings)?;
        let n = plant.n_users();
        let t_len = horizon;
        let forcing = plant.forcing();

        let mut apow = Vec::with_capacity(t_len + 1);
        apow.push(DenseMatrix::identity(n));
        let mut ck = Vec::with_capacity(t_len + 1);
        ck.push(DenseVector::zeros(n));
        let mut powb = Vec::with_capacity(t_len);
        powb.push(plant.b().clone());
        for k in 0..t_len {
            apow.push(plant.a().matmul(&apow[k]));
            let mut next_c = plant.a().matvec(&ck[k]);
            next_c.axpy(T::one(), &forcing);
            ck.push(next_c);
            if k + 1 < t_len {
                powb.push(plant.a().matvec(&powb[k]));
            }
        }

        // stage matrices: stage k couples u through M_k = [A^{k−1−j}B]_{j<k}
        // with −1 in column k (the recommendation the stage cost compares to)
        let mut p = DenseMatrix::zeros(t_len, t_len);
        let mut qx = DenseMatrix::zeros(t_len, n);
        let mut q0 = DenseVector::zeros(t_len);
        for k in 0..t_len {
            let mk = DenseMatrix::from_fn(n, t_len, |i, j| {
                if j < k {
                    powb[k - 1 - j][i]
                } else if j == k {
                    -T::one()
                } else {
                    T::zero()
                }
            });
            let mkt = mk.transpose();
            p = p.add(&mkt.matmul(&mk));
            qx = qx.add(&mkt.matmul(&apow[k]));
            q0.axpy(T::one(), &mkt.matvec(&ck[k]));
        }
        let two = T::of(2.0);
        p = p.scale(two);
        qx = qx.scale(two);
        q0 = q0.scale(two);

        let e = DenseMatrix::from_fn(n, t_len, |i, j| powb[t_len - 1 - j][i]);

        if let TerminalMode::Soft(w) = mode {
            // fold w‖E u − f(x)‖² into the quadratic data; f(x) = x* − Aᵀx − c_T
            let tw = T::of(2.0 * w);
            let et = e.transpose();
            p = p.add(&et.matmul(&e).scale(tw));
            qx = qx.add(&et.matmul(&apow[t_len]).scale(tw));
            let mut miss = target.x_star.clone();
            miss.axpy(-T::one(), &ck[t_len]);
            q0.axpy(-tw, &et.matvec(&miss));
        }

        Ok(Self {
            plant,
            horizon,
            mode,
            settings,
            target,
            apow,
            ck,
            p,
            qx,
            q0,
            e,
            lower: DenseVector::zeros(t_len),
            upper: DenseVector::constant(t_len, T::one()),
            warm: None,
        })
    }

    pub fn plant(&self) -> &ControlledPlant<T> {
        &self.plant
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn target(&self) -> &MbTarget<T> {
        &self.target
    }

    pub fn mode(&self) -> TerminalMode {
        self.mode
    }

    /// Terminal miss `x* − A^T x − c_T`: what the endpoint map must produce.
    fn terminal_rhs(&self, x: &DenseVector<T>) -> DenseVector<T> {
        let mut f = self.target.x_star.clone();
        f.axpy(-T::one(), &self.apow[self.horizon].matvec(x));
        f.axpy(-T::one(), &self.ck[self.horizon]);
        f
    }

    /// Solves the horizon problem from state `x`, optionally warm-started.
    pub fn solve_ocp(
        &self,
        x: &DenseVector<T>,
        warm: Option<&DenseVector<T>>,
    ) -> Result<OcpSolution<T>> {
        let n = self.plant.n_users();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "ocp state",
                expected: n,
                got: x.len(),
            });
        }
        let mut q = self.qx.matvec(x);
        q.axpy(T::one(), &self.q0);

        // state-only part of the cost, invisible to the optimizer but part
        // of the horizon value (descent checks depend on it)
        let mut constant = T::zero();
        for k in 0..self.horizon {
            let mut s = self.apow[k].matvec(x);
            s.axpy(T::one(), &self.ck[k]);
            constant += s.dot(&s);
        }
        let f = self.terminal_rhs(x);
        let problem = match self.mode {
            TerminalMode::Exact => QpProblem::new(
                self.p.clone(),
                q,
                self.e.clone(),
                f,
                self.lower.clone(),
                self.upper.clone(),
            )?,
            TerminalMode::Soft(w) => {
                constant += T::of(w) * f.dot(&f);
                QpProblem::boxed(self.p.clone(), q, self.lower.clone(), self.upper.clone())?
            }
        };
        let sol = solve_qp_warm(&problem, self.settings.qp_tol, self.settings.qp_max_iter, warm);
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => return Err(Error::TerminalInfeasible),
            QpStatus::MaxIterations => {
                return Err(Error::NotConverged {
                    iterations: sol.iterations,
                    residual: sol.kkt_residual.as_f64(),
                })
            }
        }
        let mut predicted_states = Vec::with_capacity(self.horizon + 1);
        predicted_states.push(x.clone());
        for k in 0..self.horizon {
            let next = self.plant.step(&predicted_states[k], sol.point[k])?;
            predicted_states.push(next);
        }
        Ok(OcpSolution {
            inputs: sol.point,
            predicted_states,
            cost: sol.objective + constant,
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
        })
    }

    /// Receding-horizon step: plan from `x`, keep the shifted plan as the
    /// next warm start, return the first input.
    pub fn mpc_input(&mut self, x: &DenseVector<T>) -> Result<T> {
        let warm = self.warm.take();
        let sol = self.solve_ocp(x, warm.as_ref())?;
        let u0 = sol.inputs[0];
        let mut shifted: Vec<T> = sol.inputs.as_slice()[1..].to_vec();
        shifted.push(self.target.u_star);
        self.warm = Some(DenseVector::from_vec_unchecked(shifted));
        Ok(u0)
    }
}

impl<T: Real> super::Controller<T> for MpcController<T> {
    fn input(&mut self, x: &DenseVector<T>) -> Result<T> {
        self.mpc_input(x)
    }

    fn name(&self) -> &'static str {
        "mb"
    }
}
