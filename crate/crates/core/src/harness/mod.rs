//! Scenario-driven runs: configuration files, sweeps, ensembles and CSV
//! output.
//!
//! Output layout under `<out>/<name>/`:
//! - `sweep.csv`: one row per sweep point, model and scheme;
//! - `metadata.json`: config hash, seeds, per-point parameters, degree
//!   supports, erased-edge counts and integrator diagnostics;
//! - `pNNN/gillespie/`: `mean_trajectory.csv`, `summary.csv`, optional
//!   `decomposition.csv` and `run-NNN/{trajectory,events}.csv`;
//! - `pNNN/pair_approx-<scheme>/`: `pa_trajectory.csv`, optional
//!   `pa_full_state.csv`;
//! - `pNNN/fully_mixed/fm_trajectory.csv`.

mod config;
mod run;

pub use config::{
    point_seed, sweep_grid, sweepable_names, CouplingConfig, LayerConfig, ModelKind, NetworkConfig, Scenario,
    SweepAxis, SweepPoint,
};
pub use run::{basic_size, config_hash, run_scenario, ScenarioReport, SweepRow};
