//! Target parameter estimation: coarse angles, range correlation, Doppler,
//! virtual-array sparse recovery and the iterative angle-range loop.

mod coarse;
mod doppler;
mod iterative;
mod range;
mod ssr;

pub use coarse::{bin_angle, bin_frequency, coarse_angle_estimate, AngleBin};
pub use doppler::doppler_estimate;
pub use iterative::{
    angle_grid_deg, iterative_angle_range, EstimationReport, EstimatorParams, IterationRecord, Provenance,
    TargetEstimate,
};
pub use range::{
    merge_range_peaks, peaks_of_profile, range_estimate, range_profile, range_values_at, RangePeak, RangeProfile,
};
pub use ssr::{
    build_ssr_dictionary, build_va_snapshot, sparse_solve, va_noise_var, SolverKind, SolverParams, SparseSolution,
    SsrProblem,
};
