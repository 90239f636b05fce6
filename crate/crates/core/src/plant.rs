//! Controlled plant: the network seen from a single controlled node.
//!
//! One agent (the recommender slot) is carved out of the network and its
//! opinion becomes the scalar input `u ∈ [0, 1]`. The remaining users evolve
//! as `x ← A x + B u + Λ x(0)` with `A` the user-to-user influence block and
//! `B` the weights users put on the controlled node.

use crate::numerics::{lu_factor, spectral_radius, DenseMatrix, DenseVector, NumericSettings};
use crate::opinion_model::OpinionNetwork;
use crate::{Error, Real, Result};

/// Inputs may stray outside [0, 1] by at most this before being rejected.
const INPUT_TOL: f64 = 1e-12;
/// Contraction margin below this counts as not lambda-connected.
const MARGIN_TOL: f64 = 1e-9;

/// Componentwise steady-state envelope over constant inputs `u ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct ReachabilityBounds<T> {
    /// Steady state under `u = 0`; no reachable state sits below it.
    pub lower: DenseVector<T>,
    /// Steady state under `u = 1`; no reachable state sits above it.
    pub upper: DenseVector<T>,
}

/// User-side dynamics with the controlled node factored out.
#[derive(Clone, Debug)]
pub struct ControlledPlant<T> {
    a: DenseMatrix<T>,
    b: DenseVector<T>,
    lambda: DenseVector<T>,
    x0: DenseVector<T>,
    rs_index: usize,
    contraction_margin: T,
}

impl<T: Real> ControlledPlant<T> {
    /// User-to-user influence block `(I−Λ)W` restricted to users.
    pub fn a(&self) -> &DenseMatrix<T> {
        &self.a
    }

    /// Input channel: discounted weights users put on the controlled node.
    pub fn b(&self) -> &DenseVector<T> {
        &self.b
    }

    /// User stubbornness.
    pub fn lambda(&self) -> &DenseVector<T> {
        &self.lambda
    }

    /// User initial opinions.
    pub fn x0(&self) -> &DenseVector<T> {
        &self.x0
    }

    /// Index the controlled node had in the original network.
    pub fn rs_index(&self) -> usize {
        self.rs_index
    }

    pub fn n_users(&self) -> usize {
        self.a.rows()
    }

    /// `1 − ρ(A)`: how strongly the user block contracts.
    pub fn contraction_margin(&self) -> T {
        self.contraction_margin
    }

    /// Constant anchor term `Λ x(0)`.
    pub fn forcing(&self) -> DenseVector<T> {
        DenseVector::from_vec_unchecked(
            (0..self.n_users()).map(|i| self.lambda[i] * self.x0[i]).collect(),
        )
    }

    /// One update `x ← A x + B u + Λ x(0)`.
    pub fn step(&self, x: &DenseVector<T>, u: T) -> Result<DenseVector<T>> {
        let n = self.n_users();
        if x.len() != n {
            return Err(Error::DimensionMismatch { context: "plant step state", expected: n, got: x.len() });
        }
        let u = checked_input(u)?;
        let mut out = self.a.matvec(x);
        for i in 0..n {
            out[i] += self.b[i] * u + self.lambda[i] * self.x0[i];
        }
        Ok(out)
    }

    /// Fixed point of [`step`](Self::step) under a constant input:
    /// `(I − A)⁻¹ (B u + Λ x(0))`.
    pub fn constant_input_steady_state(
        &self,
        u: T,
        settings: &NumericSettings,
    ) -> Result<DenseVector<T>> {
        let u = checked_input(u)?;
        let n = self.n_users();
        let m = self.i_minus_a();
        let mut rhs = self.forcing();
        for i in 0..n {
            rhs[i] += self.b[i] * u;
        }
        let factors = lu_factor(&m, settings.pivot_tol)?;
        Ok(factors.solve(&rhs))
    }

    /// Envelope of all constant-input steady states.
    pub fn reachability_bounds(&self, settings: &NumericSettings) -> Result<ReachabilityBounds<T>> {
        let factors = lu_factor(&self.i_minus_a(), settings.pivot_tol)?;
        let lower = factors.solve(&self.forcing());
        let mut upper_rhs = self.forcing();
        for i in 0..self.n_users() {
            upper_rhs[i] += self.b[i];
        }
        let upper = factors.solve(&upper_rhs);
        Ok(ReachabilityBounds { lower, upper })
    }

    /// `I − A`, the matrix behind every steady-state solve.
    pub fn i_minus_a(&self) -> DenseMatrix<T> {
        let n = self.n_users();
        DenseMatrix::from_fn(n, n, |i, j| {
            let idt = if i == j { T::one() } else { T::zero() };
            idt - self.a[(i, j)]
        })
    }
}

/// Validates `u ∈ [0, 1]` (within a hair) and clamps it exactly.
fn checked_input<T: Real>(u: T) -> Result<T> {
    if !(u.as_f64()).is_finite() || u < T::of(-INPUT_TOL) || u > T::of(1.0 + INPUT_TOL) {
        return Err(Error::InputOutOfRange { value: u.as_f64() });
    }
    Ok(u.max(T::zero()).min(T::one()))
}

/// Carves the controlled node `rs_index` out of `net` and checks that the
/// remaining user block is a contraction (fails with `NotLambdaConnected`
/// otherwise, since some user group would then ignore every anchor).
pub fn extract_plant<T: Real>(
    net: &OpinionNetwork<T>,
    rs_index: usize,
    settings: &NumericSettings,
) -> Result<ControlledPlant<T>> {
    let n = net.n_agents();
    if rs_index >= n {
        return Err(Error::InvalidIndex { index: rs_index, len: n });
    }
    if n < 2 {
        return Err(Error::DimensionMismatch { context: "plant users", expected: 2, got: n });
    }
    let users: Vec<usize> = (0..n).filter(|&i| i != rs_index).collect();
    let w = net.adjacency();
    let a = DenseMatrix::from_fn(users.len(), users.len(), |i, j| {
        (T::one() - net.stubbornness()[users[i]]) * w[(users[i], users[j])]
    });
    let b = DenseVector::from_vec_unchecked(
        users
            .iter()
            .map(|&i| (T::one() - net.stubbornness()[i]) * w[(i, rs_index)])
            .collect(),
    );
    let lambda = DenseVector::from_vec_unchecked(
        users.iter().map(|&i| net.stubbornness()[i]).collect(),
    );
    let x0 = DenseVector::from_vec_unchecked(
        users.iter().map(|&i| net.initial_opinions()[i]).collect(),
    );
    let rho = spectral_radius(&a, settings.power_tol, settings.power_max_iter)?;
    let contraction_margin = T::one() - rho;
    if contraction_margin <= T::of(MARGIN_TOL) {
        return Err(Error::NotLambdaConnected);
    }
    Ok(ControlledPlant { a, b, lambda, x0, rs_index, contraction_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Two users plus a controlled node at index 2.
    fn small_net() -> OpinionNetwork<f64> {
        OpinionNetwork::new(
            DenseMatrix::<f64>::from_rows(&[
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
            DenseVector::<f64>::from_f64s(&[0.2, 0.4, 1.0]),
            DenseVector::<f64>::from_f64s(&[1.0, 0.5, 0.5]),
        )
        .unwrap()
    }

    #[test]
    fn extraction_matches_hand_blocks() {
        let plant = extract_plant(&small_net(), 2, &NumericSettings::default()).unwrap();
        assert_eq!(plant.n_users(), 2);
        assert_abs_diff_eq!(plant.a()[(0, 1)], 0.4);
        assert_abs_diff_eq!(plant.a()[(1, 0)], 0.3);
        assert_abs_diff_eq!(plant.b()[0], 0.4);
        assert_abs_diff_eq!(plant.b()[1], 0.3);
        // each row of the update map still averages: rowsum(A) + B + λ = 1
        for i in 0..2 {
            let row: f64 = plant.a().row(i).iter().sum();
            assert_abs_diff_eq!(row + plant.b()[i] + plant.lambda()[i], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn step_matches_hand_update() {
        let plant = extract_plant(&small_net(), 2, &NumericSettings::default()).unwrap();
        let x = DenseVector::<f64>::from_f64s(&[1.0, 0.5]);
        let next = plant.step(&x, 0.0).unwrap();
        assert_abs_diff_eq!(next[0], 0.4, epsilon = 1e-15); // 0.4·0.5 + 0.2·1.0
        assert_abs_diff_eq!(next[1], 0.5, epsilon = 1e-15); // 0.3·1.0 + 0.4·0.5
    }

    #[test]
    fn step_rejects_out_of_range_inputs() {
        let plant = extract_plant(&small_net(), 2, &NumericSettings::default()).unwrap();
        let x = DenseVector::<f64>::from_f64s(&[0.5, 0.5]);
        assert!(matches!(plant.step(&x, 1.5), Err(Error::InputOutOfRange { .. })));
        assert!(matches!(plant.step(&x, -0.1), Err(Error::InputOutOfRange { .. })));
        // a hair outside is clamped, not rejected
        plant.step(&x, 1.0 + 1e-13).unwrap();
    }

    #[test]
    fn extraction_rejects_bad_index() {
        assert!(matches!(
            extract_plant(&small_net(), 3, &NumericSettings::default()),
            Err(Error::InvalidIndex { index: 3, len: 3 })
        ));
    }

    #[test]
    fn reachability_bounds_match_frozen_solves() {
        let plant = extract_plant(&small_net(), 2, &NumericSettings::default()).unwrap();
        let bounds = plant.reachability_bounds(&NumericSettings::default()).unwrap();
        // (I−A)⁻¹ = [[1, 0.4], [0.3, 1]] / 0.88 applied by hand
        assert_abs_diff_eq!(bounds.lower[0], 0.28 / 0.88, epsilon = 1e-14);
        assert_abs_diff_eq!(bounds.lower[1], 0.26 / 0.88, epsilon = 1e-14);
        assert_abs_diff_eq!(bounds.upper[0], 0.80 / 0.88, epsilon = 1e-14);
        assert_abs_diff_eq!(bounds.upper[1], 0.68 / 0.88, epsilon = 1e-14);
        // constant-input steady states interpolate and stay inside
        let mid = plant.constant_input_steady_state(0.5, &NumericSettings::default()).unwrap();
        for i in 0..2 {
            assert!(bounds.lower[i] <= mid[i] && mid[i] <= bounds.upper[i]);
        }
    }

    #[test]
    fn disconnected_user_block_is_rejected() {
        // user 1 listens only to itself and has no stubbornness
        let net = OpinionNetwork::new(
            DenseMatrix::<f64>::from_rows(&[
                vec![0.0, 0.5, 0.5],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
            DenseVector::<f64>::from_f64s(&[0.2, 0.0, 1.0]),
            DenseVector::<f64>::from_f64s(&[1.0, 0.5, 0.5]),
        )
        .unwrap();
        assert!(matches!(
            extract_plant(&net, 2, &NumericSettings::default()),
            Err(Error::NotLambdaConnected)
        ));
    }
}
