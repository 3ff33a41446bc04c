//! Simulator for a shared-subcarrier OFDM dual-function radar-communication
//! (DFRC) system.
//!
//! A monostatic MIMO radar transmits precoded CP-OFDM waveforms in which every
//! subcarrier may carry superimposed symbols from all transmit antennas
//! ("shared" subcarriers). A small set of "private" subcarriers, each owned by
//! a single antenna, is reserved to synthesize a virtual array whose samples
//! feed a sparse-recovery angle refinement.
//!
//! The crate is organized by processing stage:
//!
//! - [`config`] and [`steering`]: system parameters, array manifolds and
//!   resolution formulas.
//! - [`waveform`]: QPSK mapping, precoded symbol frames and OFDM (de)modulation.
//! - [`channel`]: radar echo synthesis (frequency and time domain) and the
//!   multipath communication channel.
//! - [`radar`]: coarse angle, range, Doppler, virtual-array sparse recovery and
//!   the iterative angle-range estimator.
//! - [`precoder`]: beampattern / communication SNR co-design with Adam.
//! - [`comm`]: least-squares and private-subcarrier decoding, BER and rate
//!   accounting.
//! - [`harness`]: scenarios, Monte Carlo sweeps and plot-data emission.

pub mod channel;
pub mod comm;
pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod precoder;
pub mod radar;
pub mod rng;
pub mod steering;
pub mod waveform;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
