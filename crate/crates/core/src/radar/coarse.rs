use serde::{Deserialize, Serialize};

use crate::channel::RadarCube;
use crate::config::SystemConfig;
use crate::linalg::{fft, robust_threshold};
use crate::C64;

/// A receive-array DFT bin that peaked on at least one subcarrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleBin {
    pub bin: usize,
    pub angle_rad: f64,
    pub subcarrier_support: Vec<usize>,
}

impl AngleBin {
    pub fn angle_deg(&self) -> f64 {
        self.angle_rad.to_degrees()
    }
}

/// Normalized spatial frequency of DFT bin `k` of an `n`-point DFT, wrapped to
/// (-1/2, 1/2].
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let w = k as f64 / n as f64;
    if w > 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Angle whose receive phase progression equals DFT bin `k` at absolute
/// frequency `freq`: arcsin(-w c / (g_r f)). None when |sin| would exceed 1.
pub fn bin_angle(k: usize, freq: f64, cfg: &SystemConfig) -> Option<f64> {
    let s = -bin_frequency(k, cfg.num_radar_rx) * cfg.c() / (cfg.radar_rx_spacing_m * freq);
    (s.abs() <= 1.0).then(|| s.asin())
}

/// Local maxima of a circular spectrum that exceed `threshold`.
pub(crate) fn circular_peaks(mag: &[f64], threshold: f64) -> Vec<usize> {
    let n = mag.len();
    (0..n)
        .filter(|&k| {
            let v = mag[k];
            if v <= threshold || n < 2 {
                return v > threshold && n == 1;
            }
            let l = mag[(k + n - 1) % n];
            let r = mag[(k + 1) % n];
            v >= l && v > r
        })
        .collect()
}

/// Coarse angle estimation on OFDM symbol `mu`.
///
/// Every subcarrier's receive snapshot is transformed with an N_r-point DFT;
/// local maxima of its magnitude above median + `threshold_k` MAD are
/// detections. Detected bins are merged across subcarriers and each is
/// reported at the angle it represents on the carrier frequency. Bins that map
/// outside the visible region are dropped.
pub fn coarse_angle_estimate(cube: &RadarCube, mu: usize, cfg: &SystemConfig, threshold_k: f64) -> Vec<AngleBin> {
    let (nr, ns, _) = cube.dims();
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); nr];
    let mut buf = vec![C64::new(0.0, 0.0); nr];
    let mut mag = vec![0.0; nr];
    for i in 0..ns {
        buf.copy_from_slice(cube.snapshot(i, mu));
        fft(&mut buf);
        for (m, b) in mag.iter_mut().zip(&buf) {
            *m = b.norm();
        }
        let thr = robust_threshold(&mag, threshold_k);
        for k in circular_peaks(&mag, thr) {
            support[k].push(i);
        }
    }
    support
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .filter_map(|(k, s)| {
            bin_angle(k, cfg.carrier_freq_hz, cfg).map(|a| AngleBin { bin: k, angle_rad: a, subcarrier_support: s })
        })
        .collect()
}
