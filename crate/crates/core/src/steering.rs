//! Uniform-linear-array steering vectors.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::SystemConfig;
use crate::{C64, CVector, Error, Result};

/// Which of the three arrays a steering vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrayKind {
    Tx,
    RadarRx,
    CommRx,
}

impl ArrayKind {
    pub fn size(self, cfg: &SystemConfig) -> usize {
        match self {
            ArrayKind::Tx => cfg.num_tx,
            ArrayKind::RadarRx => cfg.num_radar_rx,
            ArrayKind::CommRx => cfg.num_comm_rx,
        }
    }

    pub fn spacing(self, cfg: &SystemConfig) -> f64 {
        match self {
            ArrayKind::Tx => cfg.tx_spacing_m,
            ArrayKind::RadarRx => cfg.radar_rx_spacing_m,
            ArrayKind::CommRx => cfg.comm_rx_spacing_m,
        }
    }
}

/// Steering vector of array `kind` towards `angle` (radians) on subcarrier
/// `subcarrier`. Element n is exp(-j 2 pi n d sin(angle) (f_c + i Δf) / c).
pub fn steering_vector(
    kind: ArrayKind,
    angle: f64,
    subcarrier: usize,
    cfg: &SystemConfig,
) -> Result<CVector> {
    if subcarrier >= cfg.num_subcarriers {
        return Err(Error::invalid(format!(
            "subcarrier {subcarrier} outside 0..{}",
            cfg.num_subcarriers
        )));
    }
    check_angle(angle)?;
    Ok(ula_response(
        kind.size(cfg),
        kind.spacing(cfg),
        angle.sin(),
        cfg.subcarrier_freq(subcarrier),
        cfg.c(),
    ))
}

pub(crate) fn check_angle(angle: f64) -> Result<()> {
    if !angle.is_finite() || angle.abs() > FRAC_PI_2 {
        return Err(Error::invalid(format!("angle {angle} rad outside [-pi/2, pi/2]")));
    }
    Ok(())
}

/// Raw ULA response for a given direction sine and absolute frequency.
pub fn ula_response(len: usize, spacing: f64, sin_theta: f64, freq: f64, c: f64) -> CVector {
    let step = -2.0 * PI * spacing * sin_theta * freq / c;
    CVector::from_iterator(len, (0..len).map(|n| C64::from_polar(1.0, step * n as f64)))
}
