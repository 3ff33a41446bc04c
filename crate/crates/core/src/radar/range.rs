use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coarse::circular_peaks;
use crate::channel::RadarCube;
use crate::config::{resolutions, SystemConfig};
use crate::linalg::{ifft, robust_threshold};
use crate::steering::ula_response;
use crate::waveform::SymbolFrame;
use crate::{CVector, C64};

/// A detected range cell for one look direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangePeak {
    pub angle_rad: f64,
    pub lag: usize,
    pub range_m: f64,
    /// Correlation power at the lag on the detection symbols.
    pub power: f64,
    /// Normalized correlation value at the lag for each OFDM symbol; for an
    /// isolated on-grid target this is beta exp(j 2 pi mu T_p f_d).
    pub values: Vec<C64>,
}

/// Range correlation profile for one look direction.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeProfile {
    pub angle_rad: f64,
    /// Normalized correlation, symbol-major: values[mu][lag].
    pub values: Vec<Vec<C64>>,
}

impl RangeProfile {
    /// Sum over the given symbols of |correlation|^2, one entry per lag.
    pub fn power(&self, symbols: &[usize]) -> Vec<f64> {
        let n = self.values.first().map_or(0, |v| v.len());
        let mut power = vec![0.0; n];
        for &mu in symbols {
            if let Some(v) = self.values.get(mu) {
                for (p, x) in power.iter_mut().zip(v) {
                    *p += x.norm_sqr();
                }
            }
        }
        power
    }
}

/// Correlation of one symbol at look angle `sin_theta`.
///
/// A(i) beamforms the receive snapshot towards the angle, A'(i) is the
/// transmitted symbol vector projected on the transmit steering vector, and
/// the IDFT over subcarriers of A conj(A') peaks at lag 2 R N_s Δf / c.
/// The result is divided by sum_i |A'(i)|^2 so that a lone target yields its
/// coefficient.
fn symbol_correlation(cube: &RadarCube, frame: &SymbolFrame, mu: usize, steer: &[(CVector, CVector)]) -> Vec<C64> {
    let nr = cube.dims().0 as f64;
    let mut x = Vec::with_capacity(steer.len());
    let mut norm = 0.0;
    for (i, (ar, at)) in steer.iter().enumerate() {
        let a: C64 = ar.iter().zip(cube.snapshot(i, mu)).map(|(s, d)| s.conj() * d).sum::<C64>() / nr;
        let ap: C64 = frame.transmit.column(i).iter().zip(at.iter()).map(|(d, s)| d * s).sum();
        norm += ap.norm_sqr();
        x.push(a * ap.conj());
    }
    ifft(&mut x);
    if norm > 0.0 {
        for v in &mut x {
            *v /= norm;
        }
    }
    x
}

/// Correlation profiles over all OFDM symbols for one look direction.
pub fn range_profile(cube: &RadarCube, frames: &[SymbolFrame], angle_rad: f64, cfg: &SystemConfig) -> RangeProfile {
    let s = angle_rad.sin();
    let c = cfg.c();
    let steer: Vec<(CVector, CVector)> = (0..cfg.num_subcarriers)
        .map(|i| {
            let f = cfg.subcarrier_freq(i);
            (
                ula_response(cfg.num_radar_rx, cfg.radar_rx_spacing_m, s, f, c),
                ula_response(cfg.num_tx, cfg.tx_spacing_m, s, f, c),
            )
        })
        .collect();
    let np = cube.dims().2.min(frames.len());
    let values: Vec<Vec<C64>> = (0..np)
        .into_par_iter()
        .map(|mu| symbol_correlation(cube, &frames[mu], mu, &steer))
        .collect();
    RangeProfile { angle_rad, values }
}

/// Per-symbol correlation values at a single lag.
pub fn range_values_at(cube: &RadarCube, frames: &[SymbolFrame], angle_rad: f64, lag: usize, cfg: &SystemConfig) -> Vec<C64> {
    range_profile(cube, frames, angle_rad, cfg).values.into_iter().map(|v| v[lag]).collect()
}

/// Range peaks along look direction `angle_rad`.
///
/// Peaks are detected on the correlation of symbol `mu`: local maxima above
/// median + `threshold_k` MAD of its magnitude, reported at range
/// lag * range_res. Every peak carries the correlation values of all symbols.
pub fn range_estimate(
    cube: &RadarCube,
    frames: &[SymbolFrame],
    angle_rad: f64,
    cfg: &SystemConfig,
    threshold_k: f64,
    mu: usize,
) -> Vec<RangePeak> {
    let prof = range_profile(cube, frames, angle_rad, cfg);
    peaks_of_profile(&prof, cfg, threshold_k, &[mu])
}

/// Peaks of a profile whose power is summed over `detect_symbols`.
pub fn peaks_of_profile(prof: &RangeProfile, cfg: &SystemConfig, threshold_k: f64, detect_symbols: &[usize]) -> Vec<RangePeak> {
    let res = resolutions(cfg).range_res_m;
    let power = prof.power(detect_symbols);
    let mag: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
    let thr = robust_threshold(&mag, threshold_k);
    circular_peaks(&mag, thr)
        .into_iter()
        .map(|lag| RangePeak {
            angle_rad: prof.angle_rad,
            lag,
            range_m: lag as f64 * res,
            power: power[lag],
            values: prof.values.iter().map(|v| v[lag]).collect(),
        })
        .collect()
}

/// Union of peaks found along several directions. Peaks whose lags differ by
/// at most `merge_lags` are treated as one and the stronger is kept.
pub fn merge_range_peaks(mut peaks: Vec<RangePeak>, merge_lags: usize) -> Vec<RangePeak> {
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    let mut kept: Vec<RangePeak> = Vec::new();
    for p in peaks {
        if kept.iter().all(|k| k.lag.abs_diff(p.lag) > merge_lags) {
            kept.push(p);
        }
    }
    kept.sort_by_key(|p| p.lag);
    kept
}
