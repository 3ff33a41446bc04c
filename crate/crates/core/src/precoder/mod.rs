//! Precoder co-design: transmit beampattern, communication SNR, the joint
//! loss with its analytic gradient, and Adam optimization.

mod adam;
mod objective;

pub use adam::{adam_optimize, write_trace_csv, AdamParams, PrecoderState};
pub use objective::{
    band_power_ratio, beampattern, beampattern_error, beampattern_instantaneous, comm_snr, loss, loss_gradient,
    BeampatternSpec, LossParts, PrecoderProblem,
};

#[cfg(test)]
mod tests;
