//! Experiment harness: scenario fixtures, reproducible network generation,
//! and batched controller comparisons with CSV/JSON export.

mod batch;

pub use batch::{
    csv_string, export_csv, export_json, run_batch, trajectory_json, BatchConfig, BatchOutcome,
    BatchSummary, ConnectivityBucket, TrajectoryJson, TrialRecord, CSV_HEADER,
};

use crate::numerics::{DenseMatrix, DenseVector};
use crate::opinion_model::{connectivity, OpinionNetwork};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How many fresh draws to try before giving up on a connected network.
const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Serializable network fixture: everything needed to rebuild an
/// [`OpinionNetwork`] plus which node the recommender controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub name: String,
    pub adjacency: Vec<Vec<f64>>,
    pub stubbornness: Vec<f64>,
    pub initial_opinions: Vec<f64>,
    pub rs_index: usize,
}

impl NetworkScenario {
    /// Materializes the network (shape-checked).
    pub fn network(&self) -> Result<OpinionNetwork<f64>> {
        OpinionNetwork::new(
            DenseMatrix::from_rows(&self.adjacency)?,
            DenseVector::from_f64s(&self.stubbornness),
            DenseVector::from_f64s(&self.initial_opinions),
        )
    }

    /// Captures a network and controlled index into a fixture.
    pub fn from_network(name: &str, net: &OpinionNetwork<f64>, rs_index: usize) -> Self {
        let n = net.n_agents();
        Self {
            name: name.to_string(),
            adjacency: (0..n).map(|i| net.adjacency().row(i).to_vec()).collect(),
            stubbornness: net.stubbornness().to_f64s(),
            initial_opinions: net.initial_opinions().to_f64s(),
            rs_index,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        Ok(std::fs::write(path, text)?)
    }
}

/// Seven-node fixture with one fully stubborn contrarian: user 4 never
/// listens and holds opinion 0, while everyone else leans positive. The
/// recommender sits at the last index.
pub fn radical_user_scenario() -> NetworkScenario {
    NetworkScenario {
        name: "radical-user".to_string(),
        adjacency: vec![
            vec![0.000, 0.041, 0.000, 0.397, 0.000, 0.000, 0.562],
            vec![0.000, 0.191, 0.000, 0.000, 0.000, 0.011, 0.798],
            vec![0.000, 0.000, 0.000, 0.000, 0.000, 0.224, 0.776],
            vec![1.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000],
            vec![0.000, 0.000, 0.472, 0.357, 0.000, 0.171, 0.000],
            vec![0.000, 0.000, 0.000, 1.000, 0.000, 0.000, 0.000],
            vec![0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 1.000],
        ],
        stubbornness: vec![0.011, 0.001, 0.092, 0.064, 1.000, 0.055, 1.000],
        initial_opinions: vec![0.67, 0.74, 0.83, 0.68, 0.00, 0.59, 0.50],
        rs_index: 6,
    }
}

/// Splitmix-style seed derivation: one master seed fans out to independent
/// per-trial seeds without using the RNG itself.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a random `n_users + 1` network with the recommender at the last
/// index. Each user always listens to itself and to the recommender, and to
/// each other user with probability `connectivity_pct / 100`; weights are
/// uniform before row normalization. Stubbornness is uniform on
/// `[0.01, 0.99]`, so every user is anchored and the draw is always usable —
/// the connectivity check is a guard, not a filter.
pub fn generate_network<R: Rng>(
    n_users: usize,
    connectivity_pct: f64,
    rng: &mut R,
) -> Result<OpinionNetwork<f64>> {
    if n_users == 0 {
        return Err(Error::DimensionMismatch { context: "generated users", expected: 1, got: 0 });
    }
    if !(0.0..=100.0).contains(&connectivity_pct) {
        return Err(Error::InputOutOfRange { value: connectivity_pct });
    }
    let n = n_users + 1;
    let rs = n_users;
    let p_edge = connectivity_pct / 100.0;
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut adjacency = DenseMatrix::<f64>::zeros(n, n);
        let mut stubbornness = DenseVector::<f64>::zeros(n);
        let mut initial = DenseVector::<f64>::zeros(n);
        for i in 0..n_users {
            let row = adjacency.row_mut(i);
            for j in 0..n_users {
                if j == i {
                    row[j] = rng.gen_range(0.0..1.0);
                } else if rng.gen_range(0.0..1.0) < p_edge {
                    row[j] = rng.gen_range(0.0..1.0);
                }
            }
            row[rs] = rng.gen_range(0.0..1.0);
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            stubbornness[i] = rng.gen_range(0.01..0.99);
            initial[i] = rng.gen_range(0.0..1.0);
        }
        adjacency.row_mut(rs)[rs] = 1.0;
        stubbornness[rs] = 1.0;
        initial[rs] = 0.5;
        let net = OpinionNetwork::new(adjacency, stubbornness, initial)?;
        if connectivity(&net).lambda_connected {
            return Ok(net);
        }
    }
    Err(Error::GenerationFailed { attempts: MAX_GENERATION_ATTEMPTS })
}
