//! Scenario construction, repeated runs, parameter sweeps and result files.
//!
//! A scenario fixes the network (reference topology, one latency, some
//! eavesdroppers), the protocol mode and the leech. Each run fetches a fresh
//! random file with freshly created nodes; its seed is derived from the
//! scenario seed and the run index, so runs can execute in any order.

mod results;
mod scenario;
mod sweep;

pub use results::{format_size, parse_size, write_results, CONFIG_FILE, RUNS_FILE, SUMMARY_FILE};
pub use scenario::{
    default_runs, predict, run_once, run_scenario, run_seed, LeechPosition, Mode, RunResult,
    ScenarioConfig,
};
pub use sweep::{
    cell_seed, run_single, sweep, CellKey, CellRun, CellSummary, SweepGrid, SweepSummary,
};
