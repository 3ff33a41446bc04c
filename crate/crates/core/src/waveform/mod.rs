//! Source bits, QPSK mapping, precoded symbol frames and CP-OFDM.

mod frame;
mod ofdm;
mod qpsk;

pub use frame::{build_symbol_frame, random_symbol_frame, SymbolFrame};
pub use ofdm::{ofdm_demodulate, ofdm_modulate, ofdm_modulate_matrix, TimeFrame};
pub use qpsk::{qpsk_demodulate, qpsk_map, qpsk_modulate, qpsk_slice, QPSK_POINTS};
