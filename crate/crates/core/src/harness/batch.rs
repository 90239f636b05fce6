//! Batched controller comparisons across connectivity levels, with
//! deterministic per-trial seeding and CSV/JSON export.

use super::{derive_seed, generate_network};
use crate::analysis::{comparison_from_records, free_evolution_steady_state, opinion_shift};
use crate::controllers::{closed_loop, ClosedLoopRecord, ModelFree, MpcController, TerminalMode};
use crate::numerics::NumericSettings;
use crate::plant::extract_plant;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Column order of the batch CSV; kept stable for downstream tooling.
pub const CSV_HEADER: &str = "trial_id,seed,n_users,connectivity_pct,mpc_feasible,\
cost_mf_cum,cost_mb_cum,cost_mf_ss,cost_mb_ss,improvement_pct,\
avg_shift_mf_pct,avg_shift_mb_pct,max_shift_mf_pct,max_shift_mb_pct,wall_time_ms";

/// One trial's outcome. Model-based fields are NaN when the horizon problem
/// was infeasible at the start (`mpc_feasible` false).
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub n_users: usize,
    pub connectivity_pct: f64,
    pub mpc_feasible: bool,
    pub cost_mf_cum: f64,
    pub cost_mb_cum: f64,
    pub cost_mf_ss: f64,
    pub cost_mb_ss: f64,
    pub improvement_pct: f64,
    pub avg_shift_mf_pct: f64,
    pub avg_shift_mb_pct: f64,
    pub max_shift_mf_pct: f64,
    pub max_shift_mb_pct: f64,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial_id,
            self.seed,
            self.n_users,
            self.connectivity_pct,
            self.mpc_feasible,
            self.cost_mf_cum,
            self.cost_mb_cum,
            self.cost_mf_ss,
            self.cost_mb_ss,
            self.improvement_pct,
            self.avg_shift_mf_pct,
            self.avg_shift_mb_pct,
            self.max_shift_mf_pct,
            self.max_shift_mb_pct,
            self.wall_time_ms,
        )
    }
}

/// Batch setup. Trials cycle through `connectivity_cycle` in order; each
/// trial draws its network from `derive_seed(master_seed, trial_id)`, so
/// results are independent of `workers`.
#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub n_users: usize,
    pub steps: usize,
    pub horizon: usize,
    pub workers: usize,
    pub mode: TerminalMode,
    pub connectivity_cycle: Vec<f64>,
}

impl BatchConfig {
    pub fn new(trials: usize, master_seed: u64) -> Self {
        Self {
            trials,
            master_seed,
            n_users: 20,
            steps: 50,
            horizon: 50,
            workers: 1,
            mode: TerminalMode::Exact,
            connectivity_cycle: vec![25.0, 50.0, 75.0, 100.0],
        }
    }
}

/// Medians over the feasible trials of one connectivity level.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectivityBucket {
    pub connectivity_pct: f64,
    pub trials: usize,
    pub feasible: usize,
    pub median_improvement_pct: f64,
    pub median_avg_shift_mf_pct: f64,
    pub median_avg_shift_mb_pct: f64,
    pub median_max_shift_mb_pct: f64,
}

/// Aggregates over a finished batch.
#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub feasible: usize,
    pub median_improvement_pct: f64,
    pub per_connectivity: Vec<ConnectivityBucket>,
}

/// Records plus their summary.
#[derive(Clone, Debug, Serialize)]
pub struct BatchOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: BatchSummary,
}

/// Runs the batch on `workers` threads. Work is handed out through a shared
/// counter and written back by trial id, so the output order and content are
/// identical for any worker count.
pub fn run_batch(config: &BatchConfig) -> Result<BatchOutcome> {
    if config.connectivity_cycle.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "connectivity cycle",
            expected: 1,
            got: 0,
        });
    }
    let slots: Vec<Mutex<Option<Result<TrialRecord>>>> =
        (0..config.trials).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.workers.max(1).min(config.trials.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= config.trials {
                    break;
                }
                let outcome = run_trial(config, i);
                *slots[i].lock().expect("trial slot lock") = Some(outcome);
            });
        }
    });
    let mut records = Vec::with_capacity(config.trials);
    for slot in slots {
        let outcome = slot
            .into_inner()
            .expect("trial slot lock")
            .expect("every handed-out trial writes its slot");
        records.push(outcome?);
    }
    let summary = summarize(&records, &config.connectivity_cycle);
    Ok(BatchOutcome { records, summary })
}

/// One generated network, both controllers, one record.
fn run_trial(config: &BatchConfig, trial_id: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let connectivity_pct =
        config.connectivity_cycle[trial_id % config.connectivity_cycle.len()];
    let seed = derive_seed(config.master_seed, trial_id as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = generate_network(config.n_users, connectivity_pct, &mut rng)?;
    let settings = NumericSettings::default();
    let rs = config.n_users;
    let plant = extract_plant(&net, rs, &settings)?;
    let mf_record = closed_loop(&plant, &mut ModelFree, config.steps)?;
    let x_free = free_evolution_steady_state(&net, rs, &settings)?;
    let mb_outcome = MpcController::new(plant.clone(), config.horizon, config.mode, settings)
        .and_then(|mut mpc| closed_loop(&plant, &mut mpc, config.steps));
    let mut record = match mb_outcome {
        Ok(mb_record) => {
            let report = comparison_from_records(&mf_record, &mb_record, x_free)?;
            TrialRecord {
                trial_id,
                seed,
                n_users: config.n_users,
                connectivity_pct,
                mpc_feasible: true,
                cost_mf_cum: report.cost_mf_cum,
                cost_mb_cum: report.cost_mb_cum,
                cost_mf_ss: report.cost_mf_ss,
                cost_mb_ss: report.cost_mb_ss,
                improvement_pct: report.improvement_pct,
                avg_shift_mf_pct: report.shift_mf.avg_pct,
                avg_shift_mb_pct: report.shift_mb.avg_pct,
                max_shift_mf_pct: report.shift_mf.max_pct,
                max_shift_mb_pct: report.shift_mb.max_pct,
                wall_time_ms: 0.0,
            }
        }
        Err(Error::TerminalInfeasible) => {
            let shift_mf = opinion_shift(mf_record.final_state(), &x_free)?;
            TrialRecord {
                trial_id,
                seed,
                n_users: config.n_users,
                connectivity_pct,
                mpc_feasible: false,
                cost_mf_cum: mf_record.cumulative_cost(),
                cost_mb_cum: f64::NAN,
                cost_mf_ss: mf_record.steady_state_cost(),
                cost_mb_ss: f64::NAN,
                improvement_pct: f64::NAN,
                avg_shift_mf_pct: shift_mf.avg_pct,
                avg_shift_mb_pct: f64::NAN,
                max_shift_mf_pct: shift_mf.max_pct,
                max_shift_mb_pct: f64::NAN,
                wall_time_ms: 0.0,
            }
        }
        Err(e) => return Err(e),
    };
    record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(record)
}

fn summarize(records: &[TrialRecord], cycle: &[f64]) -> BatchSummary {
    let mut levels: Vec<f64> = Vec::new();
    for &pct in cycle {
        if !levels.contains(&pct) {
            levels.push(pct);
        }
    }
    let feasible_all: Vec<&TrialRecord> = records.iter().filter(|r| r.mpc_feasible).collect();
    let per_connectivity = levels
        .into_iter()
        .map(|pct| {
            let subset: Vec<&TrialRecord> =
                records.iter().filter(|r| r.connectivity_pct == pct).collect();
            let feasible: Vec<&&TrialRecord> =
                subset.iter().filter(|r| r.mpc_feasible).collect();
            ConnectivityBucket {
                connectivity_pct: pct,
                trials: subset.len(),
                feasible: feasible.len(),
                median_improvement_pct: median(
                    feasible.iter().map(|r| r.improvement_pct).collect(),
                ),
                median_avg_shift_mf_pct: median(
                    feasible.iter().map(|r| r.avg_shift_mf_pct).collect(),
                ),
                median_avg_shift_mb_pct: median(
                    feasible.iter().map(|r| r.avg_shift_mb_pct).collect(),
                ),
                median_max_shift_mb_pct: median(
                    feasible.iter().map(|r| r.max_shift_mb_pct).collect(),
                ),
            }
        })
        .collect();
    BatchSummary {
        trials: records.len(),
        feasible: feasible_all.len(),
        median_improvement_pct: median(
            feasible_all.iter().map(|r| r.improvement_pct).collect(),
        ),
        per_connectivity,
    }
}

/// Median of the values; NaN when empty.
fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("medians are over finite values"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Renders records as CSV with [`CSV_HEADER`] on top.
pub fn csv_string(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for record in records {
        out.push_str(&record.csv_row());
        out.push('\n');
    }
    out
}

pub fn export_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    Ok(std::fs::write(path, csv_string(records))?)
}

pub fn export_json(path: &Path, outcome: &BatchOutcome) -> Result<()> {
    Ok(std::fs::write(path, serde_json::to_string_pretty(outcome)?)?)
}

/// Serializable closed-loop trajectory for single-run exports.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryJson {
    pub scenario: String,
    pub controller: String,
    pub steps: usize,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
    pub costs: Vec<f64>,
    pub cumulative_cost: f64,
    pub steady_state_cost: f64,
}

/// Packages a finished run for JSON export.
pub fn trajectory_json(
    scenario: &str,
    controller: &str,
    record: &ClosedLoopRecord<f64>,
) -> TrajectoryJson {
    TrajectoryJson {
        scenario: scenario.to_string(),
        controller: controller.to_string(),
        steps: record.states.len() - 1,
        states: record.states.iter().map(|s| s.to_f64s()).collect(),
        inputs: record.inputs.clone(),
        costs: record.costs.clone(),
        cumulative_cost: record.cumulative_cost(),
        steady_state_cost: record.steady_state_cost(),
    }
}
