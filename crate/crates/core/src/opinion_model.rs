//! Friedkin-Johnsen opinion dynamics on a weighted listening network.
//!
//! Each agent `i` updates `o_i ← (1−λ_i) Σ_j w_ij o_j + λ_i o_i(0)`: a
//! weighted average over who it listens to, anchored to its initial opinion
//! by its stubbornness `λ_i`.

use crate::numerics::{solve_linear, DenseMatrix, DenseVector, NumericSettings};
use crate::{Error, Real, Result};

/// Stubbornness above this counts as an anchor for connectivity purposes.
const STUBBORN_EPS: f64 = 1e-12;
/// Listening weights above this count as edges.
const EDGE_EPS: f64 = 1e-12;
/// Row sums may deviate from one by at most this before being reported.
const ROW_SUM_TOL: f64 = 1e-9;

/// A content problem found by [`OpinionNetwork::validate`]. Violations are
/// data, not faults: invalid networks can be held and inspected.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NegativeWeight { row: usize, col: usize, value: f64 },
    RowSumOff { row: usize, sum: f64 },
    StubbornnessOutOfRange { agent: usize, value: f64 },
    OpinionOutOfRange { agent: usize, value: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NegativeWeight { row, col, value } => {
                write!(f, "negative weight {value} at ({row}, {col})")
            }
            Violation::RowSumOff { row, sum } => {
                write!(f, "row {row} sums to {sum}, expected 1")
            }
            Violation::StubbornnessOutOfRange { agent, value } => {
                write!(f, "stubbornness {value} of agent {agent} outside [0, 1]")
            }
            Violation::OpinionOutOfRange { agent, value } => {
                write!(f, "initial opinion {value} of agent {agent} outside [0, 1]")
            }
        }
    }
}

/// Who anchors the network and who is reached by the anchors.
#[derive(Clone, Debug)]
pub struct ConnectivityReport {
    /// Agents with positive stubbornness.
    pub stubborn_agents: Vec<usize>,
    /// `influenced[i]`: agent `i` has a listening path to some stubborn agent.
    pub influenced: Vec<bool>,
    /// Every agent is influenced by an anchor.
    pub lambda_connected: bool,
}

/// Opinion network: row-stochastic listening weights, stubbornness and
/// initial opinions, one row per agent.
#[derive(Clone, Debug)]
pub struct OpinionNetwork<T> {
    adjacency: DenseMatrix<T>,
    stubbornness: DenseVector<T>,
    initial_opinions: DenseVector<T>,
}

impl<T: Real> OpinionNetwork<T> {
    /// Builds a network, checking shapes only; content checks are reported by
    /// [`validate`](Self::validate).
    pub fn new(
        adjacency: DenseMatrix<T>,
        stubbornness: DenseVector<T>,
        initial_opinions: DenseVector<T>,
    ) -> Result<Self> {
        let n = adjacency.rows();
        if !adjacency.is_square() {
            return Err(Error::DimensionMismatch {
                context: "network adjacency",
                expected: n,
                got: adjacency.cols(),
            });
        }
        if stubbornness.len() != n {
            return Err(Error::DimensionMismatch {
                context: "network stubbornness",
                expected: n,
                got: stubbornness.len(),
            });
        }
        if initial_opinions.len() != n {
            return Err(Error::DimensionMismatch {
                context: "network initial opinions",
                expected: n,
                got: initial_opinions.len(),
            });
        }
        Ok(Self { adjacency, stubbornness, initial_opinions })
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &DenseMatrix<T> {
        &self.adjacency
    }

    pub fn stubbornness(&self) -> &DenseVector<T> {
        &self.stubbornness
    }

    pub fn initial_opinions(&self) -> &DenseVector<T> {
        &self.initial_opinions
    }

    /// Copy with every row scaled to sum to one. Rows with (near-)zero sum
    /// are left as they are and will still show up in `validate`.
    pub fn with_renormalized_rows(&self) -> Self {
        let n = self.n_agents();
        let mut adjacency = self.adjacency.clone();
        for i in 0..n {
            let s: T = adjacency.row(i).iter().fold(T::zero(), |acc, &v| acc + v);
            if s.abs() > T::of(EDGE_EPS) {
                for v in adjacency.row_mut(i) {
                    *v /= s;
                }
            }
        }
        Self {
            adjacency,
            stubbornness: self.stubbornness.clone(),
            initial_opinions: self.initial_opinions.clone(),
        }
    }

    /// Content violations: weight signs, row sums, ranges.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n_agents();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.adjacency[(i, j)];
                if v < T::zero() {
                    out.push(Violation::NegativeWeight { row: i, col: j, value: v.as_f64() });
                }
            }
            let sum = self.adjacency.row(i).iter().fold(T::zero(), |acc, &v| acc + v);
            if (sum - T::one()).abs() > T::of(ROW_SUM_TOL) {
                out.push(Violation::RowSumOff { row: i, sum: sum.as_f64() });
            }
            let lam = self.stubbornness[i];
            if lam < T::zero() || lam > T::one() {
                out.push(Violation::StubbornnessOutOfRange { agent: i, value: lam.as_f64() });
            }
            let o = self.initial_opinions[i];
            if o < T::zero() || o > T::one() {
                out.push(Violation::OpinionOutOfRange { agent: i, value: o.as_f64() });
            }
        }
        out
    }

    /// `(I − Λ) W`: the influence part of the update map.
    pub fn influence_matrix(&self) -> DenseMatrix<T> {
        let n = self.n_agents();
        DenseMatrix::from_fn(n, n, |i, j| (T::one() - self.stubbornness[i]) * self.adjacency[(i, j)])
    }
}

/// Anchors and reachability: which agents are (transitively) influenced by a
/// stubborn agent along listening edges.
pub fn connectivity<T: Real>(net: &OpinionNetwork<T>) -> ConnectivityReport {
    let n = net.n_agents();
    let stubborn: Vec<usize> =
        (0..n).filter(|&i| net.stubbornness()[i] > T::of(STUBBORN_EPS)).collect();
    let mut influenced = vec![false; n];
    let mut queue: std::collections::VecDeque<usize> = Default::default();
    for &i in &stubborn {
        influenced[i] = true;
        queue.push_back(i);
    }
    // walk listening edges backwards: if i listens to j, influence flows j → i
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !influenced[i] && net.adjacency()[(i, j)] > T::of(EDGE_EPS) {
                influenced[i] = true;
                queue.push_back(i);
            }
        }
    }
    let lambda_connected = influenced.iter().all(|&v| v);
    ConnectivityReport { stubborn_agents: stubborn, influenced, lambda_connected }
}

/// One synchronous opinion update.
pub fn fj_step<T: Real>(net: &OpinionNetwork<T>, opinions: &DenseVector<T>) -> Result<DenseVector<T>> {
    let n = net.n_agents();
    if opinions.len() != n {
        return Err(Error::DimensionMismatch { context: "fj_step opinions", expected: n, got: opinions.len() });
    }
    let wo = net.adjacency().matvec(opinions);
    let mut out = DenseVector::zeros(n);
    for i in 0..n {
        let lam = net.stubbornness()[i];
        out[i] = (T::one() - lam) * wo[i] + lam * net.initial_opinions()[i];
    }
    Ok(out)
}

/// Trajectory of `steps` updates starting from the initial opinions
/// (`steps + 1` entries including the start).
pub fn fj_simulate<T: Real>(net: &OpinionNetwork<T>, steps: usize) -> Vec<DenseVector<T>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut o = net.initial_opinions().clone();
    out.push(o.clone());
    for _ in 0..steps {
        o = fj_step(net, &o).expect("trajectory dimensions are internally consistent");
        out.push(o.clone());
    }
    out
}

/// Steady state `(I − (I−Λ)W)⁻¹ Λ o(0)`; requires lambda-connectivity.
pub fn fj_equilibrium<T: Real>(
    net: &OpinionNetwork<T>,
    settings: &NumericSettings,
) -> Result<DenseVector<T>> {
    if !connectivity(net).lambda_connected {
        return Err(Error::NotLambdaConnected);
    }
    let n = net.n_agents();
    let infl = net.influence_matrix();
    let m = DenseMatrix::from_fn(n, n, |i, j| {
        let idt = if i == j { T::one() } else { T::zero() };
        idt - infl[(i, j)]
    });
    let rhs = DenseVector::from_vec_unchecked(
        (0..n)
            .map(|i| net.stubbornness()[i] * net.initial_opinions()[i])
            .collect(),
    );
    solve_linear(&m, &rhs, settings.pivot_tol)
}
