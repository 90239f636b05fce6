/// Shared numeric tolerances and iteration budgets.
///
/// Stored as `f64` and converted at use sites so one settings value serves
/// every scalar type.
#[derive(Clone, Copy, Debug)]
pub struct NumericSettings {
    /// Residual tolerance for linear solves and equilibrium checks.
    pub linear_tol: f64,
    /// Pivot magnitude below which a factorization is declared singular.
    pub pivot_tol: f64,
    /// KKT residual tolerance for the quadratic-program solver.
    pub qp_tol: f64,
    /// Working-set iteration budget for the quadratic-program solver.
    pub qp_max_iter: usize,
    /// Relative change tolerance for the power iteration.
    pub power_tol: f64,
    /// Iteration budget for the power iteration.
    pub power_max_iter: usize,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            linear_tol: 1e-10,
            pivot_tol: 1e-13,
            qp_tol: 1e-9,
            qp_max_iter: 500,
            power_tol: 1e-10,
            power_max_iter: 10_000,
        }
    }
}
