use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::rng::{complex_coefficient, complex_normal};
use crate::steering::{check_angle, ula_response};
use crate::waveform::SymbolFrame;
use crate::{C64, CMatrix, CVector, Error, Result};

/// Direct-path geometry between the transmitter and the communication
/// receiver: distance, departure angle at the transmit array and incidence
/// angle at the receive array (radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommGeometry {
    pub range_m: f64,
    pub departure_rad: f64,
    pub incidence_rad: f64,
}

/// One scattering path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub departure_rad: f64,
    pub incidence_rad: f64,
    pub coeff: C64,
}

/// How random path coefficients and scatterer angles are drawn.
///
/// Coefficients are complex Gaussian with the given mean and total variance;
/// scatterer angles are uniform in [-max_angle, max_angle].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererLaw {
    pub count: usize,
    pub coeff_mean: f64,
    pub coeff_var: f64,
    pub max_angle_rad: f64,
}

impl Default for ScattererLaw {
    fn default() -> Self {
        Self { count: 32, coeff_mean: 0.1, coeff_var: 0.01, max_angle_rad: 80f64.to_radians() }
    }
}

/// Per-subcarrier channel matrices H_i (N_c x N_t).
#[derive(Clone, Debug, PartialEq)]
pub struct CommChannel {
    pub h: Vec<CMatrix>,
    pub geometry: CommGeometry,
    pub beta: C64,
    pub scatterers: Vec<Scatterer>,
}

impl CommChannel {
    pub fn num_subcarriers(&self) -> usize {
        self.h.len()
    }
}

/// H_i = beta exp(-j 2 pi i Δf R_c / c) a_c(phi, i) a_t(theta, i)^T
///       + sum_k c_k a_c(phi_k, i) a_t(theta_k, i)^T
pub fn comm_channel_from_parts(
    cfg: &SystemConfig,
    geometry: CommGeometry,
    beta: C64,
    scatterers: Vec<Scatterer>,
) -> Result<CommChannel> {
    check_angle(geometry.departure_rad)?;
    check_angle(geometry.incidence_rad)?;
    for s in &scatterers {
        check_angle(s.departure_rad)?;
        check_angle(s.incidence_rad)?;
    }
    if !(geometry.range_m >= 0.0) {
        return Err(Error::invalid(format!("communication range {} m", geometry.range_m)));
    }
    let c = cfg.c();
    let rx = |angle: f64, f: f64| ula_response(cfg.num_comm_rx, cfg.comm_rx_spacing_m, angle.sin(), f, c);
    let tx = |angle: f64, f: f64| ula_response(cfg.num_tx, cfg.tx_spacing_m, angle.sin(), f, c);
    let h = (0..cfg.num_subcarriers)
        .map(|i| {
            let f = cfg.subcarrier_freq(i);
            let delay = C64::from_polar(1.0, -2.0 * PI * i as f64 * cfg.subcarrier_spacing_hz * geometry.range_m / c);
            let mut hi = rx(geometry.incidence_rad, f) * tx(geometry.departure_rad, f).transpose() * (beta * delay);
            for s in &scatterers {
                hi += rx(s.incidence_rad, f) * tx(s.departure_rad, f).transpose() * s.coeff;
            }
            hi
        })
        .collect();
    Ok(CommChannel { h, geometry, beta, scatterers })
}

/// Draw the direct-path coefficient and `law.count` scatterers from `rng`,
/// then build the channel.
pub fn build_comm_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    geometry: CommGeometry,
    law: &ScattererLaw,
    rng: &mut R,
) -> Result<CommChannel> {
    let mean = C64::new(law.coeff_mean, 0.0);
    let beta = complex_coefficient(rng, mean, law.coeff_var);
    let a = law.max_angle_rad.abs().min(std::f64::consts::FRAC_PI_2);
    let scatterers = (0..law.count)
        .map(|_| Scatterer {
            departure_rad: rng.random_range(-a..=a),
            incidence_rad: rng.random_range(-a..=a),
            coeff: complex_coefficient(rng, mean, law.coeff_var),
        })
        .collect();
    comm_channel_from_parts(cfg, geometry, beta, scatterers)
}

/// Received vectors r_i = H_i d_i + u_i as the columns of an N_c x N_s matrix.
pub fn apply_comm_channel<R: Rng + ?Sized>(
    ch: &CommChannel,
    frame: &SymbolFrame,
    noise_var: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    let ns = frame.num_subcarriers();
    if ch.h.len() != ns {
        return Err(Error::invalid(format!("channel has {} subcarriers, frame {ns}", ch.h.len())));
    }
    let nc = ch.h.first().map_or(0, |h| h.nrows());
    let mut r = CMatrix::zeros(nc, ns);
    for (i, hi) in ch.h.iter().enumerate() {
        if hi.ncols() != frame.num_tx() {
            return Err(Error::invalid(format!(
                "H_{i} has {} columns, frame has {} transmit rows",
                hi.ncols(),
                frame.num_tx()
            )));
        }
        let d: CVector = frame.transmit.column(i).into_owned();
        let mut ri = hi * d;
        if noise_var > 0.0 {
            for v in ri.iter_mut() {
                *v += complex_normal(rng, noise_var);
            }
        }
        r.set_column(i, &ri);
    }
    Ok(r)
}
