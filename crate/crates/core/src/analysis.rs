//! Comparative analysis: controller equivalence certificates, opinion-shift
//! accounting against the recommender-free network, and head-to-head
//! controller runs.

use crate::controllers::{
    closed_loop, mf_equilibrium, theta, ClosedLoopRecord, ModelFree, MpcController, TerminalMode,
};
use crate::numerics::{invert, DenseMatrix, DenseVector, NumericSettings};
use crate::opinion_model::{fj_equilibrium, OpinionNetwork};
use crate::plant::{extract_plant, ControlledPlant};
use crate::{Error, Real, Result};
use rand::Rng;

/// Free steady states smaller than this are excluded from relative shifts.
const SHIFT_BASE_EPS: f64 = 1e-9;
/// Cumulative costs smaller than this make percentage improvements moot.
const COST_FLOOR: f64 = 1e-300;

/// Certificate relating the two controllers' steady states.
///
/// The model-free equilibrium and the engagement-optimal steady state
/// coincide exactly when the model-free equilibrium is orthogonal to the
/// `kernel` direction; `gap` measures that inner product. The certificate
/// also carries a rank-one inverse identity check (`woodbury_residual`)
/// tying the model-free loop matrix to the open-loop response.
#[derive(Clone, Debug)]
pub struct EquivalenceCertificate<T> {
    /// Steady-state input response `(I − A)⁻¹ B`.
    pub response: DenseVector<T>,
    /// Direction whose inner product with the model-free equilibrium decides
    /// equivalence; sums to zero by construction.
    pub kernel: DenseVector<T>,
    /// Scaling `n (1ᵀresponse − n)` attached to the kernel.
    pub alpha: T,
    /// `|kernelᵀ x*|` at the model-free equilibrium: zero means the two
    /// controllers settle identically.
    pub gap: T,
    /// Largest entry of `G⁻¹ − ((I−A)⁻¹ + response·1ᵀ(I−A)⁻¹ / (n − 1ᵀresponse))`.
    pub woodbury_residual: T,
}

/// Builds the [`EquivalenceCertificate`] for a plant.
pub fn equivalence_certificate<T: Real>(
    plant: &ControlledPlant<T>,
    settings: &NumericSettings,
) -> Result<EquivalenceCertificate<T>> {
    let n = plant.n_users();
    let n_t = T::from_usize(n).expect("user count fits the scalar");
    let i_minus_a_inv = invert(&plant.i_minus_a(), settings.pivot_tol)?;
    let response = i_minus_a_inv.matvec(plant.b());
    let response_sum = response.sum();
    let mut kernel = DenseVector::zeros(n);
    for i in 0..n {
        kernel[i] = response_sum - n_t * response[i];
    }
    let alpha = n_t * (response_sum - n_t);
    let x_mf = mf_equilibrium(plant, settings)?;
    let gap = kernel.dot(&x_mf).abs();

    // rank-one update identity for the model-free loop inverse
    let g = DenseMatrix::from_fn(n, n, |i, j| {
        let idt = if i == j { T::one() } else { T::zero() };
        idt - plant.a()[(i, j)] - plant.b()[i] / n_t
    });
    let g_inv = invert(&g, settings.pivot_tol)?;
    let row_sums_inv = DenseVector::from_vec_unchecked(
        (0..n).map(|j| (0..n).fold(T::zero(), |acc, i| acc + i_minus_a_inv[(i, j)])).collect(),
    );
    let denom = n_t - response_sum;
    let reconstructed = DenseMatrix::from_fn(n, n, |i, j| {
        i_minus_a_inv[(i, j)] + response[i] * row_sums_inv[j] / denom
    });
    let woodbury_residual = g_inv.max_abs_diff(&reconstructed);

    Ok(EquivalenceCertificate { response, kernel, alpha, gap, woodbury_residual })
}

/// Relative opinion shifts against the recommender-free steady state.
#[derive(Clone, Debug)]
pub struct ShiftReport<T> {
    /// Per-user shift in percent; `None` where the free opinion is too close
    /// to zero for a relative measure.
    pub per_user_pct: Vec<Option<T>>,
    pub avg_pct: T,
    pub max_pct: T,
    /// How many users were excluded from the average and maximum.
    pub excluded: usize,
}

/// Percentage change of each final opinion against the free steady state.
pub fn opinion_shift<T: Real>(
    x_final: &DenseVector<T>,
    x_free: &DenseVector<T>,
) -> Result<ShiftReport<T>> {
    if x_final.len() != x_free.len() {
        return Err(Error::DimensionMismatch {
            context: "shift report states",
            expected: x_free.len(),
            got: x_final.len(),
        });
    }
    let hundred = T::of(100.0);
    let mut per_user_pct = Vec::with_capacity(x_free.len());
    let mut sum = T::zero();
    let mut max = T::zero();
    let mut included = 0usize;
    for i in 0..x_free.len() {
        if x_free[i].abs() <= T::of(SHIFT_BASE_EPS) {
            per_user_pct.push(None);
            continue;
        }
        let pct = hundred * (x_final[i] - x_free[i]).abs() / x_free[i].abs();
        per_user_pct.push(Some(pct));
        sum += pct;
        max = max.max(pct);
        included += 1;
    }
    let avg_pct = if included > 0 {
        sum / T::from_usize(included).expect("user count fits the scalar")
    } else {
        T::zero()
    };
    Ok(ShiftReport { per_user_pct, avg_pct, max_pct: max, excluded: x_free.len() - included })
}

/// Steady state of the network once the controlled node is removed.
///
/// Remaining rows are renormalized proportionally; users who listened only
/// to the removed node fall back to holding their own opinion.
pub fn free_evolution_steady_state<T: Real>(
    net: &OpinionNetwork<T>,
    rs_index: usize,
    settings: &NumericSettings,
) -> Result<DenseVector<T>> {
    let n = net.n_agents();
    if rs_index >= n {
        return Err(Error::InvalidIndex { index: rs_index, len: n });
    }
    let users: Vec<usize> = (0..n).filter(|&i| i != rs_index).collect();
    let m = users.len();
    let mut adjacency = DenseMatrix::zeros(m, m);
    for (i, &ui) in users.iter().enumerate() {
        let mut row_sum = T::zero();
        for (j, &uj) in users.iter().enumerate() {
            let w = net.adjacency()[(ui, uj)];
            adjacency.row_mut(i)[j] = w;
            row_sum += w;
        }
        if row_sum > T::of(SHIFT_BASE_EPS) {
            for v in adjacency.row_mut(i) {
                *v /= row_sum;
            }
        } else {
            adjacency.row_mut(i)[i] = T::one();
        }
    }
    let stubbornness = DenseVector::from_vec_unchecked(
        users.iter().map(|&i| net.stubbornness()[i]).collect(),
    );
    let initial = DenseVector::from_vec_unchecked(
        users.iter().map(|&i| net.initial_opinions()[i]).collect(),
    );
    let reduced = OpinionNetwork::new(adjacency, stubbornness, initial)?;
    fj_equilibrium(&reduced, settings)
}

/// Samples one engagement event per user: user `i` engages with probability
/// `1 − (x_i − u)²`.
pub fn sample_engagement<T: Real, R: Rng>(
    x: &DenseVector<T>,
    u: T,
    rng: &mut R,
) -> Vec<bool> {
    x.iter()
        .map(|&xi| {
            let d = (xi - u).as_f64();
            let p = (1.0 - d * d).clamp(0.0, 1.0);
            rng.gen_bool(p)
        })
        .collect()
}

/// Head-to-head outcome of the two controllers on one network.
#[derive(Clone, Debug)]
pub struct ComparisonReport<T> {
    pub x_free: DenseVector<T>,
    pub x_mf: DenseVector<T>,
    pub x_mb: DenseVector<T>,
    pub cost_mf_cum: T,
    pub cost_mb_cum: T,
    pub cost_mf_ss: T,
    pub cost_mb_ss: T,
    /// Cumulative-cost improvement of the planner over averaging, percent.
    pub improvement_pct: T,
    /// Steady-state cost improvement, percent.
    pub improvement_ss_pct: T,
    pub shift_mf: ShiftReport<T>,
    pub shift_mb: ShiftReport<T>,
    /// Percentage-point gap between the average shifts (planner − averaging).
    pub avg_shift_gap_pct: T,
}

/// Runs both controllers for `steps` updates and reports costs and opinion
/// shifts against the recommender-free steady state.
pub fn compare_controllers<T: Real>(
    net: &OpinionNetwork<T>,
    rs_index: usize,
    steps: usize,
    horizon: usize,
    mode: TerminalMode,
    settings: &NumericSettings,
) -> Result<ComparisonReport<T>> {
    let plant = extract_plant(net, rs_index, settings)?;
    let mf_record = closed_loop(&plant, &mut ModelFree, steps)?;
    let mut mpc = MpcController::new(plant.clone(), horizon, mode, settings.clone())?;
    let mb_record = closed_loop(&plant, &mut mpc, steps)?;
    let x_free = free_evolution_steady_state(net, rs_index, settings)?;
    comparison_from_records(&mf_record, &mb_record, x_free)
}

/// Assembles the report from two finished runs and the free steady state.
pub fn comparison_from_records<T: Real>(
    mf_record: &ClosedLoopRecord<T>,
    mb_record: &ClosedLoopRecord<T>,
    x_free: DenseVector<T>,
) -> Result<ComparisonReport<T>> {
    let cost_mf_cum = mf_record.cumulative_cost();
    let cost_mb_cum = mb_record.cumulative_cost();
    let cost_mf_ss = mf_record.steady_state_cost();
    let cost_mb_ss = mb_record.steady_state_cost();
    let shift_mf = opinion_shift(mf_record.final_state(), &x_free)?;
    let shift_mb = opinion_shift(mb_record.final_state(), &x_free)?;
    let improvement_pct = percent_drop(cost_mf_cum, cost_mb_cum);
    let improvement_ss_pct = percent_drop(cost_mf_ss, cost_mb_ss);
    let avg_shift_gap_pct = shift_mb.avg_pct - shift_mf.avg_pct;
    Ok(ComparisonReport {
        x_free,
        x_mf: mf_record.final_state().clone(),
        x_mb: mb_record.final_state().clone(),
        cost_mf_cum,
        cost_mb_cum,
        cost_mf_ss,
        cost_mb_ss,
        improvement_pct,
        improvement_ss_pct,
        shift_mf,
        shift_mb,
        avg_shift_gap_pct,
    })
}

/// `100 (base − improved) / base`, zero when the base cost vanishes.
fn percent_drop<T: Real>(base: T, improved: T) -> T {
    if base.abs() <= T::of(COST_FLOOR) {
        T::zero()
    } else {
        T::of(100.0) * (base - improved) / base
    }
}

/// Expected per-step engagement across users: `n − θ(x, u)`.
pub fn expected_engagement<T: Real>(x: &DenseVector<T>, u: T) -> T {
    T::from_usize(x.len()).expect("user count fits the scalar") - theta(x, u)
}
