//! Scenario files, single runs, Monte Carlo sweeps and plot data.

mod montecarlo;
mod plots;
mod run;
mod scenario;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use montecarlo::{
    apply_sweep_value, match_targets, random_range_limit, random_targets, run_monte_carlo, run_trial, summarize,
    MatchTolerance, Matching, McSummary, SweepVariable, TrialOutcome,
};
pub use plots::{emit_plot_data, PlotData, PlotKind};
pub use run::{
    ber_sweep, comm_noise_var_for_snr, draw_frames, prepare_precoder, run_scenario, scenario_channel,
    simulate_and_estimate, write_ber_csv, BeampatternRow, BerRow, PreparedPrecoder, RangeProfileRow, ScenarioOutput,
    SubcarrierClass,
};
pub use scenario::{CommSpec, MonteCarloSpec, OptimizeSpec, PrecoderSource, Scenario, TargetSpec};

use crate::Result;

/// Index of an output directory: the command, its seed, the scenario and the
/// files produced (relative paths, sorted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, scenario: &Scenario, mut files: Vec<PathBuf>) -> Self {
        files.sort();
        files.dedup();
        Self { command: command.to_string(), seed: scenario.seed, scenario: scenario.clone(), files }
    }

    /// Write `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
