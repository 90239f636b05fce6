//! Command-line front end for the opinion-control laboratory: single runs,
//! seeded batch studies, bundled scenarios, and steady-state diagnostics.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fjlab::analysis::{compare_controllers, equivalence_certificate, ComparisonReport};
use fjlab::controllers::{closed_loop, ModelFree, MpcController, TerminalMode};
use fjlab::harness::{
    export_csv, export_json, radical_user_scenario, run_batch, trajectory_json, BatchConfig,
    NetworkScenario,
};
use fjlab::opinion_model::OpinionNetwork;
use fjlab::plant::extract_plant;
use fjlab::NumericSettings;

#[derive(Parser)]
#[command(
    name = "fjlab",
    version,
    about = "Laboratory for recommendation control of Friedkin-Johnsen opinion networks"
)]
struct Cli {
    /// Replace the hard terminal-target constraint of the model-based
    /// planner with a soft penalty of this weight.
    #[arg(long, global = true, value_name = "WEIGHT")]
    soft_terminal: Option<f64>,

    /// Rescale adjacency rows to sum to one before running.
    #[arg(long, global = true)]
    renormalize_rows: bool,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerKind {
    /// Model-free averaging: recommend the mean opinion.
    Mf,
    /// Model-based receding-horizon planner.
    Mb,
}

impl ControllerKind {
    fn name(self) -> &'static str {
        match self {
            ControllerKind::Mf => "mf",
            ControllerKind::Mb => "mb",
        }
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Run one controller on a scenario and report the trajectory.
    Simulate {
        /// Scenario JSON, as written by `scenario` or by hand.
        #[arg(long)]
        scenario: PathBuf,
        /// Which controller drives the recommender.
        #[arg(long, value_enum, default_value_t = ControllerKind::Mb)]
        controller: ControllerKind,
        /// Number of opinion updates to simulate.
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Planning horizon of the model-based controller.
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Write the full trajectory as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded batch study over randomly generated networks.
    Batch {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Master seed; each trial derives its own stream from it.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Users per generated network (the recommender is added on top).
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Worker threads; results are identical for any worker count.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write one CSV row per trial to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write records plus summary as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Emit a bundled scenario and run the head-to-head comparison on it.
    Scenario {
        /// Bundled scenario name (available: radical-user).
        name: String,
        /// Write the scenario JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
    },
    /// Print the steady-state envelope reachable by constant inputs.
    Bounds {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print the certificate comparing the two controllers at steady state.
    Equivalence {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let settings = NumericSettings::default();
    let mode = match cli.soft_terminal {
        Some(weight) => TerminalMode::Soft(weight),
        None => TerminalMode::Exact,
    };

    match cli.command {
        Commands::Simulate { scenario, controller, steps, horizon, out } => {
            let (net, meta) = load_network(&scenario, cli.renormalize_rows)?;
            let plant = extract_plant(&net, meta.rs_index, &settings)?;
            let record = match controller {
                ControllerKind::Mf => closed_loop(&plant, &mut ModelFree, steps)?,
                ControllerKind::Mb => {
                    let mut mpc = MpcController::new(plant.clone(), horizon, mode, settings)?;
                    closed_loop(&plant, &mut mpc, steps)?
                }
            };
            println!(
                "{} on '{}': cumulative cost {:.6}, steady-state cost {:.6}, final input {:.6}",
                controller.name(),
                meta.name,
                record.cumulative_cost(),
                record.steady_state_cost(),
                record.inputs.last().copied().unwrap_or(f64::NAN),
            );
            if let Some(path) = out {
                let doc = trajectory_json(&meta.name, controller.name(), &record);
                std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
                    .with_context(|| format!("writing trajectory to {}", path.display()))?;
                println!("wrote {}", path.display());
            }
        }
        Commands::Batch { trials, seed, users, steps, horizon, workers, out, json } => {
            let mut config = BatchConfig::new(trials, seed);
            config.n_users = users;
            config.steps = steps;
            config.horizon = horizon;
            config.workers = workers;
            config.mode = mode;
            let outcome = run_batch(&config)?;
            let summary = &outcome.summary;
            println!(
                "{} trials (seed {seed}, {users} users): {} feasible, median improvement {:.2}%",
                summary.trials, summary.feasible, summary.median_improvement_pct
            );
            for bucket in &summary.per_connectivity {
                println!(
                    "  {:>5.1}% connectivity: {}/{} feasible, median improvement {:.2}%, \
                     median max shift (planner) {:.2}%",
                    bucket.connectivity_pct,
                    bucket.feasible,
                    bucket.trials,
                    bucket.median_improvement_pct,
                    bucket.median_max_shift_mb_pct,
                );
            }
            if let Some(path) = out {
                export_csv(&path, &outcome.records)?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = json {
                export_json(&path, &outcome)?;
                println!("wrote {}", path.display());
            }
        }
        Commands::Scenario { name, out, steps, horizon } => {
            let scenario = bundled_scenario(&name)?;
            if let Some(path) = &out {
                scenario.save(path)?;
                println!("wrote {}", path.display());
            }
            let mut net = scenario.network()?;
            if cli.renormalize_rows {
                net = net.with_renormalized_rows();
            }
            let report =
                compare_controllers(&net, scenario.rs_index, steps, horizon, mode, &settings)?;
            print_comparison(&report);
        }
        Commands::Bounds { scenario } => {
            let (net, meta) = load_network(&scenario, cli.renormalize_rows)?;
            let plant = extract_plant(&net, meta.rs_index, &settings)?;
            let bounds = plant.reachability_bounds(&settings)?;
            println!("contraction margin {:.3e}", plant.contraction_margin());
            println!("user      lower      upper");
            for i in 0..plant.n_users() {
                println!("{i:>4}   {:.6}   {:.6}", bounds.lower[i], bounds.upper[i]);
            }
        }
        Commands::Equivalence { scenario } => {
            let (net, meta) = load_network(&scenario, cli.renormalize_rows)?;
            let plant = extract_plant(&net, meta.rs_index, &settings)?;
            let cert = equivalence_certificate(&plant, &settings)?;
            println!("alpha {:.6}", cert.alpha);
            println!("gap |kernel . equilibrium| = {:.3e}", cert.gap);
            println!("inverse-identity residual {:.3e}", cert.woodbury_residual);
            if cert.gap <= 1e-9 {
                println!("verdict: the two controllers settle on the same opinions");
            } else {
                println!("verdict: the two controllers settle on different opinions");
            }
        }
    }
    Ok(())
}

fn bundled_scenario(name: &str) -> Result<NetworkScenario> {
    match name {
        "radical-user" => Ok(radical_user_scenario()),
        other => bail!("unknown scenario '{other}' (available: radical-user)"),
    }
}

/// Loads a scenario file and materializes a validated network from it.
fn load_network(path: &Path, renormalize: bool) -> Result<(OpinionNetwork<f64>, NetworkScenario)> {
    let scenario = NetworkScenario::load(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    let mut net = scenario.network()?;
    if renormalize {
        net = net.with_renormalized_rows();
    }
    let violations = net.validate();
    if !violations.is_empty() {
        let listing: Vec<String> = violations.iter().map(ToString::to_string).collect();
        bail!("scenario {} is not a valid network:\n  {}", path.display(), listing.join("\n  "));
    }
    Ok((net, scenario))
}

fn print_comparison(report: &ComparisonReport<f64>) {
    println!(
        "cumulative cost   averaging {:.6}   planner {:.6}   improvement {:.2}%",
        report.cost_mf_cum, report.cost_mb_cum, report.improvement_pct
    );
    println!(
        "steady-state cost averaging {:.6}   planner {:.6}   improvement {:.2}%",
        report.cost_mf_ss, report.cost_mb_ss, report.improvement_ss_pct
    );
    println!(
        "opinion shift vs free network: averaging avg {:.2}% max {:.2}%, \
         planner avg {:.2}% max {:.2}% (gap {:.2} points)",
        report.shift_mf.avg_pct,
        report.shift_mf.max_pct,
        report.shift_mb.avg_pct,
        report.shift_mb.max_pct,
        report.avg_shift_gap_pct,
    );
    if report.shift_mf.excluded > 0 {
        println!(
            "  ({} user(s) excluded from shift percentages: free opinion too close to zero)",
            report.shift_mf.excluded
        );
    }
}
