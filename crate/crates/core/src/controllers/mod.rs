//! Engagement-maximizing controllers for the controlled plant.
//!
//! Engagement of user `i` under recommendation `u` is `1 − (x_i − u)²`, so
//! maximizing total engagement is minimizing the stage cost
//! `θ(x, u) = ‖x − u·1‖²`. Two controllers are provided: a model-free one
//! that recommends the average current opinion, and a model-based one that
//! plans over a horizon towards the engagement-optimal steady state.

mod mpc;

pub use mpc::{MpcController, OcpSolution, TerminalMode, DEFAULT_SOFT_WEIGHT};

use crate::numerics::{
    lu_factor, solve_qp, DenseMatrix, DenseVector, NumericSettings, QpProblem, QpStatus,
};
use crate::plant::ControlledPlant;
use crate::{Error, Real, Result};

/// Disagreement above which the closed-form target defers to the QP solve.
const TARGET_CROSS_CHECK_TOL: f64 = 1e-7;
/// `‖1 − v̄‖²` below this means every input is equally good: no target.
const DEGENERATE_DIRECTION_TOL: f64 = 1e-14;

/// Stage cost `θ(x, u) = ‖x − u·1‖²`: squared disengagement.
pub fn theta<T: Real>(x: &DenseVector<T>, u: T) -> T {
    x.iter().fold(T::zero(), |acc, &xi| {
        let d = xi - u;
        acc + d * d
    })
}

/// The input minimizing the instantaneous stage cost: the mean opinion.
pub fn mf_input<T: Real>(x: &DenseVector<T>) -> T {
    x.mean()
}

/// Matrix of the quadratic form `θ` over the stacked variable `(x, u)`:
/// identity block, `−1` coupling column/row, and `n` in the corner.
pub fn stage_cost_matrix<T: Real>(n: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i < n && j < n {
            if i == j {
                T::one()
            } else {
                T::zero()
            }
        } else if i == n && j == n {
            T::from_usize(n).expect("user count fits the scalar")
        } else {
            -T::one()
        }
    })
}

/// Closed-loop map of the model-free controller: `A + (1/n) B 1ᵀ`.
pub fn mf_closed_loop_map<T: Real>(plant: &ControlledPlant<T>) -> DenseMatrix<T> {
    let n = plant.n_users();
    let inv_n = T::one() / T::from_usize(n).expect("user count fits the scalar");
    DenseMatrix::from_fn(n, n, |i, j| plant.a()[(i, j)] + plant.b()[i] * inv_n)
}

/// Steady state of the model-free loop: solves
/// `(I − A − (1/n) B 1ᵀ) x = Λ x(0)`.
pub fn mf_equilibrium<T: Real>(
    plant: &ControlledPlant<T>,
    settings: &NumericSettings,
) -> Result<DenseVector<T>> {
    let n = plant.n_users();
    let f = mf_closed_loop_map(plant);
    let g = DenseMatrix::from_fn(n, n, |i, j| {
        let idt = if i == j { T::one() } else { T::zero() };
        idt - f[(i, j)]
    });
    let factors = lu_factor(&g, settings.pivot_tol)?;
    Ok(factors.solve(&plant.forcing()))
}

/// Engagement-optimal steady state: the recommendation `u*` and the user
/// opinions `x*` it settles into, with the cost `θ*` paid there.
#[derive(Clone, Debug)]
pub struct MbTarget<T> {
    pub x_star: DenseVector<T>,
    pub u_star: T,
    pub theta_star: T,
}

/// Best steady state over constant inputs: minimizes `θ(x, u)` subject to
/// `(I − A) x = B u + Λ x(0)` and `u ∈ [0, 1]`.
///
/// Solved in closed form via the steady-state response line
/// `x(u) = l + u v̄`, then cross-checked against an active-set QP solve of
/// the same problem; on disagreement beyond working precision the QP answer
/// wins (and the mismatch is logged).
pub fn mb_target<T: Real>(
    plant: &ControlledPlant<T>,
    settings: &NumericSettings,
) -> Result<MbTarget<T>> {
    let n = plant.n_users();
    let factors = lu_factor(&plant.i_minus_a(), settings.pivot_tol)?;
    let l = factors.solve(&plant.forcing());
    let vbar = factors.solve(plant.b());
    let mut direction = DenseVector::zeros(n);
    for i in 0..n {
        direction[i] = T::one() - vbar[i];
    }
    let denom = direction.dot(&direction);
    if denom < T::of(DEGENERATE_DIRECTION_TOL) {
        // every steady state is a consensus at the input: θ vanishes for any
        // u and the target direction is lost
        return Err(Error::SingularMatrix { step: n, pivot: denom.as_f64() });
    }
    let u_free = direction.dot(&l) / denom;
    let u_star = u_free.max(T::zero()).min(T::one());
    let mut x_star = l.clone();
    x_star.axpy(u_star, &vbar);
    let theta_star = theta(&x_star, u_star);

    // independent route: minimize the same quadratic over (x, u) directly
    let hessian = stage_cost_matrix::<T>(n).scale(T::of(2.0));
    let eq = DenseMatrix::from_fn(n, n + 1, |i, j| {
        if j < n {
            let idt = if i == j { T::one() } else { T::zero() };
            idt - plant.a()[(i, j)]
        } else {
            -plant.b()[i]
        }
    });
    let problem = QpProblem::new(
        hessian,
        DenseVector::zeros(n + 1),
        eq,
        plant.forcing(),
        DenseVector::zeros(n + 1),
        DenseVector::constant(n + 1, T::one()),
    )?;
    let sol = solve_qp(&problem, settings.qp_tol, settings.qp_max_iter);
    if sol.status == QpStatus::Optimal {
        let u_qp = sol.point[n];
        let x_qp =
            DenseVector::from_vec_unchecked(sol.point.as_slice()[..n].to_vec());
        let gap = (u_qp - u_star).abs().max(x_qp.max_abs_diff(&x_star));
        if gap > T::of(TARGET_CROSS_CHECK_TOL) {
            log::warn!(
                "steady-state target routes disagree by {}; keeping the constrained solve",
                gap.as_f64()
            );
            let theta_qp = theta(&x_qp, u_qp);
            return Ok(MbTarget { x_star: x_qp, u_star: u_qp, theta_star: theta_qp });
        }
    } else {
        log::warn!("steady-state target cross-check did not converge; keeping the closed form");
    }
    Ok(MbTarget { x_star, u_star, theta_star })
}

/// A feedback law mapping the current user opinions to a recommendation.
pub trait Controller<T: Real> {
    /// Next recommendation for the observed opinions.
    fn input(&mut self, x: &DenseVector<T>) -> Result<T>;
    /// Short label used in reports.
    fn name(&self) -> &'static str;
}

/// Recommends the average current opinion; needs no model.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelFree;

impl<T: Real> Controller<T> for ModelFree {
    fn input(&mut self, x: &DenseVector<T>) -> Result<T> {
        Ok(mf_input(x))
    }

    fn name(&self) -> &'static str {
        "mf"
    }
}

/// Closed-loop run: states, the inputs chosen at each state, and the stage
/// costs paid. All three have `steps + 1` entries; the final input is chosen
/// at the final state but never applied.
#[derive(Clone, Debug)]
pub struct ClosedLoopRecord<T> {
    pub states: Vec<DenseVector<T>>,
    pub inputs: Vec<T>,
    pub costs: Vec<T>,
}

impl<T: Real> ClosedLoopRecord<T> {
    /// Total cost over the applied inputs (the final, unapplied one is not
    /// counted).
    pub fn cumulative_cost(&self) -> T {
        self.costs[..self.costs.len() - 1]
            .iter()
            .fold(T::zero(), |acc, &c| acc + c)
    }

    /// Stage cost at the final state under the input chosen there.
    pub fn steady_state_cost(&self) -> T {
        *self.costs.last().expect("record always holds the initial step")
    }

    pub fn final_state(&self) -> &DenseVector<T> {
        self.states.last().expect("record always holds the initial state")
    }
}

/// Runs `controller` on `plant` for `steps` updates from the plant's initial
/// opinions.
pub fn closed_loop<T: Real, C: Controller<T> + ?Sized>(
    plant: &ControlledPlant<T>,
    controller: &mut C,
    steps: usize,
) -> Result<ClosedLoopRecord<T>> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut costs = Vec::with_capacity(steps + 1);
    let mut x = plant.x0().clone();
    states.push(x.clone());
    for t in 0..=steps {
        let u = controller.input(&x)?;
        inputs.push(u);
        costs.push(theta(&x, u));
        if t < steps {
            x = plant.step(&x, u)?;
            states.push(x.clone());
        }
    }
    Ok(ClosedLoopRecord { states, inputs, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opinion_model::OpinionNetwork;
    use crate::plant::extract_plant;
    use approx::assert_abs_diff_eq;

    fn small_plant() -> ControlledPlant<f64> {
        let net = OpinionNetwork::new(
            DenseMatrix::<f64>::from_rows(&[
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
            DenseVector::<f64>::from_f64s(&[0.2, 0.4, 1.0]),
            DenseVector::<f64>::from_f64s(&[1.0, 0.5, 0.5]),
        )
        .unwrap();
        extract_plant(&net, 2, &NumericSettings::default()).unwrap()
    }

    #[test]
    fn theta_matches_hand_value_and_quadratic_form() {
        let x = DenseVector::<f64>::from_f64s(&[0.2, 0.8]);
        assert_abs_diff_eq!(theta(&x, 0.5), 0.18, epsilon = 1e-15);
        // same number through the stacked quadratic form
        let h = stage_cost_matrix::<f64>(2);
        let z = DenseVector::<f64>::from_f64s(&[0.2, 0.8, 0.5]);
        assert_abs_diff_eq!(z.dot(&h.matvec(&z)), 0.18, epsilon = 1e-15);
    }

    #[test]
    fn mf_input_is_the_mean() {
        let x = DenseVector::<f64>::from_f64s(&[0.25, 0.5, 0.75]);
        assert_abs_diff_eq!(mf_input(&x), 0.5);
    }

    #[test]
    fn mf_equilibrium_matches_long_closed_loop() {
        let plant = small_plant();
        let eq = mf_equilibrium(&plant, &NumericSettings::default()).unwrap();
        let record = closed_loop(&plant, &mut ModelFree, 2_000).unwrap();
        assert!(record.final_state().max_abs_diff(&eq) < 1e-12);
    }

    #[test]
    fn mf_loop_rows_still_average_with_the_anchor() {
        let plant = small_plant();
        let f = mf_closed_loop_map(&plant);
        for i in 0..plant.n_users() {
            let row: f64 = f.row(i).iter().sum();
            assert_abs_diff_eq!(row + plant.lambda()[i], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mb_target_beats_mf_equilibrium_on_cost() {
        let plant = small_plant();
        let settings = NumericSettings::default();
        let target = mb_target(&plant, &settings).unwrap();
        let mf_eq = mf_equilibrium(&plant, &settings).unwrap();
        let theta_mf = theta(&mf_eq, mf_input(&mf_eq));
        assert!(target.theta_star <= theta_mf + 1e-12);
        assert!((0.0..=1.0).contains(&target.u_star));
        // target is a genuine fixed point of the plant under u*
        let next = plant.step(&target.x_star, target.u_star).unwrap();
        assert!(next.max_abs_diff(&target.x_star) < 1e-12);
    }

    #[test]
    fn consensus_start_pins_both_controllers_to_it() {
        // both users start at 0.7: averaging and planning both just hold it
        let net = OpinionNetwork::new(
            DenseMatrix::<f64>::from_rows(&[
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
            DenseVector::<f64>::from_f64s(&[0.2, 0.4, 1.0]),
            DenseVector::<f64>::from_f64s(&[0.7, 0.7, 0.5]),
        )
        .unwrap();
        let plant = extract_plant(&net, 2, &NumericSettings::default()).unwrap();
        let settings = NumericSettings::default();
        let mf_eq = mf_equilibrium(&plant, &settings).unwrap();
        let target = mb_target(&plant, &settings).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(mf_eq[i], 0.7, epsilon = 1e-12);
            assert_abs_diff_eq!(target.x_star[i], 0.7, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(target.u_star, 0.7, epsilon = 1e-12);
        assert!(target.theta_star < 1e-20);
    }

    #[test]
    fn closed_loop_record_shapes_and_costs() {
        let plant = small_plant();
        let record = closed_loop(&plant, &mut ModelFree, 5).unwrap();
        assert_eq!(record.states.len(), 6);
        assert_eq!(record.inputs.len(), 6);
        assert_eq!(record.costs.len(), 6);
        let by_hand: f64 =
            (0..5).map(|t| theta(&record.states[t], record.inputs[t])).sum();
        assert_abs_diff_eq!(record.cumulative_cost(), by_hand, epsilon = 1e-15);
        assert_abs_diff_eq!(
            record.steady_state_cost(),
            theta(&record.states[5], record.inputs[5]),
            epsilon = 1e-15
        );
    }
}
