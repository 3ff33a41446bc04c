use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{resolutions, SystemConfig};
use crate::rng::{child_rng, complex_normal, Stream};
use crate::steering::{check_angle, ula_response};
use crate::waveform::SymbolFrame;
use crate::{C64, Error, Result};

/// A point target: angle (rad), range (m), radial velocity (m/s) and complex
/// reflection coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub angle_rad: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub beta: C64,
}

impl TargetRecord {
    pub fn new(angle_deg: f64, range_m: f64, velocity_mps: f64, beta: C64) -> Self {
        Self { angle_rad: angle_deg.to_radians(), range_m, velocity_mps, beta }
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_rad.to_degrees()
    }

    /// Checks range in [0, range_max), |v| < vel_max / 2 and a valid angle.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        check_angle(self.angle_rad)?;
        let res = resolutions(cfg);
        if !(self.range_m >= 0.0 && self.range_m < res.range_max_m) {
            return Err(Error::invalid(format!(
                "target range {} m outside [0, {})",
                self.range_m, res.range_max_m
            )));
        }
        if !(self.velocity_mps.abs() < res.vel_max_mps / 2.0) {
            return Err(Error::invalid(format!(
                "target velocity {} m/s exceeds the unambiguous {}",
                self.velocity_mps,
                res.vel_max_mps / 2.0
            )));
        }
        Ok(())
    }
}

/// Received frequency-domain radar symbols d_r(m, i, mu).
///
/// Stored flat with the receive antenna fastest: index (mu N_s + i) N_r + m,
/// so the array snapshot of one subcarrier is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarCube {
    num_rx: usize,
    num_subcarriers: usize,
    num_symbols: usize,
    data: Vec<C64>,
}

impl RadarCube {
    pub fn zeros(num_rx: usize, num_subcarriers: usize, num_symbols: usize) -> Self {
        Self {
            num_rx,
            num_subcarriers,
            num_symbols,
            data: vec![C64::new(0.0, 0.0); num_rx * num_subcarriers * num_symbols],
        }
    }

    pub fn from_vec(num_rx: usize, num_subcarriers: usize, num_symbols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != num_rx * num_subcarriers * num_symbols {
            return Err(Error::invalid(format!(
                "cube data has {} samples, expected {}x{}x{}",
                data.len(),
                num_rx,
                num_subcarriers,
                num_symbols
            )));
        }
        Ok(Self { num_rx, num_subcarriers, num_symbols, data })
    }

    /// (N_r, N_s, N_p)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_rx, self.num_subcarriers, self.num_symbols)
    }

    #[inline]
    fn idx(&self, m: usize, i: usize, mu: usize) -> usize {
        (mu * self.num_subcarriers + i) * self.num_rx + m
    }

    pub fn get(&self, m: usize, i: usize, mu: usize) -> C64 {
        self.data[self.idx(m, i, mu)]
    }

    pub fn set(&mut self, m: usize, i: usize, mu: usize, v: C64) {
        let k = self.idx(m, i, mu);
        self.data[k] = v;
    }

    /// Receive-array snapshot of subcarrier `i` in symbol `mu`.
    pub fn snapshot(&self, i: usize, mu: usize) -> &[C64] {
        let k = self.idx(0, i, mu);
        &self.data[k..k + self.num_rx]
    }

    /// All N_s snapshots of symbol `mu`, subcarrier-major.
    pub fn symbol(&self, mu: usize) -> &[C64] {
        let n = self.num_rx * self.num_subcarriers;
        &self.data[mu * n..(mu + 1) * n]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Mean |d_r|^2 over all entries.
    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    fn symbol_mut(&mut self, mu: usize) -> &mut [C64] {
        let n = self.num_rx * self.num_subcarriers;
        &mut self.data[mu * n..(mu + 1) * n]
    }
}

fn check_frames(frames: &[SymbolFrame], cfg: &SystemConfig) -> Result<()> {
    if frames.len() != cfg.num_ofdm_symbols {
        return Err(Error::invalid(format!(
            "{} frames supplied for {} OFDM symbols",
            frames.len(),
            cfg.num_ofdm_symbols
        )));
    }
    for f in frames {
        if f.transmit.shape() != (cfg.num_tx, cfg.num_subcarriers) {
            return Err(Error::invalid(format!(
                "frame {} has shape {:?}, expected ({}, {})",
                f.symbol_index,
                f.transmit.shape(),
                cfg.num_tx,
                cfg.num_subcarriers
            )));
        }
    }
    Ok(())
}

/// Noise-free received symbols for the given targets and transmit frames.
pub fn synthesize_radar_freq_noiseless(
    targets: &[TargetRecord],
    frames: &[SymbolFrame],
    cfg: &SystemConfig,
) -> Result<RadarCube> {
    check_frames(frames, cfg)?;
    for t in targets {
        t.validate(cfg)?;
    }
    let (nr, ns, np) = (cfg.num_radar_rx, cfg.num_subcarriers, cfg.num_ofdm_symbols);
    let c = cfg.c();
    // Per-target, per-subcarrier factors that do not depend on mu.
    let per_target: Vec<(Vec<Vec<C64>>, Vec<Vec<C64>>, Vec<C64>)> = targets
        .iter()
        .map(|t| {
            let s = t.angle_rad.sin();
            let mut tx = Vec::with_capacity(ns);
            let mut rx = Vec::with_capacity(ns);
            let mut delay = Vec::with_capacity(ns);
            for i in 0..ns {
                let f = cfg.subcarrier_freq(i);
                tx.push(ula_response(cfg.num_tx, cfg.tx_spacing_m, s, f, c).as_slice().to_vec());
                rx.push(ula_response(nr, cfg.radar_rx_spacing_m, s, f, c).as_slice().to_vec());
                let ph = -2.0 * PI * i as f64 * cfg.subcarrier_spacing_hz * 2.0 * t.range_m / c;
                delay.push(t.beta * C64::from_polar(1.0, ph));
            }
            (tx, rx, delay)
        })
        .collect();

    let mut cube = RadarCube::zeros(nr, ns, np);
    let blocks: Vec<Vec<C64>> = (0..np)
        .into_par_iter()
        .map(|mu| {
            let d = &frames[mu].transmit;
            let mut out = vec![C64::new(0.0, 0.0); nr * ns];
            for (k, t) in targets.iter().enumerate() {
                let (tx, rx, delay) = &per_target[k];
                let dop = C64::from_polar(1.0, 2.0 * PI * mu as f64 * cfg.ofdm_symbol_duration_s * cfg.doppler_hz(t.velocity_mps));
                for i in 0..ns {
                    let mut s = C64::new(0.0, 0.0);
                    for n in 0..cfg.num_tx {
                        s += d[(n, i)] * tx[i][n];
                    }
                    let g = s * delay[i] * dop;
                    let row = &mut out[i * nr..(i + 1) * nr];
                    for (o, a) in row.iter_mut().zip(&rx[i]) {
                        *o += g * a;
                    }
                }
            }
            out
        })
        .collect();
    for (mu, b) in blocks.into_iter().enumerate() {
        cube.symbol_mut(mu).copy_from_slice(&b);
    }
    Ok(cube)
}

/// Add white complex Gaussian noise of variance `var`. Noise for receive
/// antenna m of symbol mu comes from its own child stream (index mu N_r + m).
pub fn add_radar_noise(cube: &mut RadarCube, var: f64, seed: u64) {
    if var <= 0.0 {
        return;
    }
    let (nr, ns, _) = cube.dims();
    let n = nr * ns;
    cube.data.par_chunks_mut(n).enumerate().for_each(|(mu, block)| {
        for m in 0..nr {
            let mut rng = child_rng(seed, Stream::RadarNoise, (mu * nr + m) as u64);
            for i in 0..ns {
                block[i * nr + m] += complex_normal(&mut rng, var);
            }
        }
    });
}

/// Noise variance giving per-element SNR `snr_db` against a noiseless cube.
pub fn noise_var_for_snr(noiseless: &RadarCube, snr_db: f64) -> f64 {
    noiseless.mean_power() / 10f64.powf(snr_db / 10.0)
}

/// Received symbols with noise of variance `cfg.radar_noise_var` drawn from
/// `cfg.rng_seed`.
pub fn synthesize_radar_freq(
    targets: &[TargetRecord],
    frames: &[SymbolFrame],
    cfg: &SystemConfig,
) -> Result<RadarCube> {
    let mut cube = synthesize_radar_freq_noiseless(targets, frames, cfg)?;
    add_radar_noise(&mut cube, cfg.radar_noise_var, cfg.rng_seed);
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::random_symbol_frame;
    use crate::CMatrix;

    fn small() -> SystemConfig {
        let mut c = SystemConfig::reference_config(4, 2);
        c.num_subcarriers = 32;
        c.num_ofdm_symbols = 6;
        c.num_radar_rx = 5;
        c
    }

    fn frames(cfg: &SystemConfig, seed: u64) -> Vec<SymbolFrame> {
        let p = CMatrix::identity(cfg.num_tx, cfg.num_tx);
        let mut rng = child_rng(seed, Stream::Bits, 0);
        (0..cfg.num_ofdm_symbols)
            .map(|mu| random_symbol_frame(&p, cfg, mu, &mut rng).unwrap().0)
            .collect()
    }

    #[test]
    fn no_targets_no_noise_is_zero() {
        let cfg = small();
        let cube = synthesize_radar_freq(&[], &frames(&cfg, 1), &cfg).unwrap();
        assert!(cube.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn trivial_target_echoes_the_transmit_symbol() {
        let mut cfg = small();
        cfg.num_tx = 1;
        cfg.private_set.clear();
        let fr = frames(&cfg, 2);
        let t = TargetRecord::new(0.0, 0.0, 0.0, C64::new(1.0, 0.0));
        let cube = synthesize_radar_freq(&[t], &fr, &cfg).unwrap();
        for mu in 0..cfg.num_ofdm_symbols {
            for i in 0..cfg.num_subcarriers {
                for m in 0..cfg.num_radar_rx {
                    assert!((cube.get(m, i, mu) - fr[mu].transmit[(0, i)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matches_closed_form_entrywise() {
        let cfg = small();
        let fr = frames(&cfg, 3);
        let t = TargetRecord::new(-21.0, 37.0, 6.0, C64::new(0.3, -0.2));
        let cube = synthesize_radar_freq(&[t], &fr, &cfg).unwrap();
        let c = cfg.c();
        let s = t.angle_rad.sin();
        let fd = 2.0 * t.velocity_mps * cfg.carrier_freq_hz / c;
        for &(m, i, mu) in &[(0, 0, 0), (4, 31, 5), (2, 17, 3)] {
            let f = cfg.subcarrier_freq(i);
            let mut v = C64::new(0.0, 0.0);
            for n in 0..cfg.num_tx {
                let ph = -2.0 * PI * (m as f64 * cfg.radar_rx_spacing_m + n as f64 * cfg.tx_spacing_m) * s * f / c
                    - 2.0 * PI * i as f64 * cfg.subcarrier_spacing_hz * 2.0 * t.range_m / c
                    + 2.0 * PI * mu as f64 * cfg.ofdm_symbol_duration_s * fd;
                v += t.beta * fr[mu].transmit[(n, i)] * C64::from_polar(1.0, ph);
            }
            assert!((cube.get(m, i, mu) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn superposition_over_targets() {
        let cfg = small();
        let fr = frames(&cfg, 4);
        let a = TargetRecord::new(10.0, 20.0, 1.0, C64::new(0.1, 0.0));
        let b = TargetRecord::new(-40.0, 80.0, -3.0, C64::new(0.0, 0.2));
        let ca = synthesize_radar_freq(&[a], &fr, &cfg).unwrap();
        let cb = synthesize_radar_freq(&[b], &fr, &cfg).unwrap();
        let cab = synthesize_radar_freq(&[a, b], &fr, &cfg).unwrap();
        for k in 0..cab.as_slice().len() {
            assert!((cab.as_slice()[k] - ca.as_slice()[k] - cb.as_slice()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_and_determinism() {
        let mut cfg = small();
        cfg.num_subcarriers = 512;
        cfg.num_radar_rx = 32;
        cfg.num_ofdm_symbols = 64;
        cfg.radar_noise_var = 0.7;
        cfg.private_set.clear();
        let mut a = RadarCube::zeros(32, 512, 64);
        add_radar_noise(&mut a, 0.7, 11);
        let mut b = RadarCube::zeros(32, 512, 64);
        add_radar_noise(&mut b, 0.7, 11);
        assert_eq!(a, b);
        let var = a.mean_power();
        assert!(a.as_slice().len() >= 1_000_000);
        assert!((var / 0.7 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn target_bounds_enforced() {
        let cfg = small();
        let res = resolutions(&cfg);
        assert!(TargetRecord::new(0.0, res.range_max_m, 0.0, C64::new(1.0, 0.0)).validate(&cfg).is_err());
        assert!(TargetRecord::new(0.0, 1.0, res.vel_max_mps, C64::new(1.0, 0.0)).validate(&cfg).is_err());
        assert!(TargetRecord::new(95.0, 1.0, 0.0, C64::new(1.0, 0.0)).validate(&cfg).is_err());
    }

    #[test]
    fn snr_scaling() {
        let cfg = small();
        let fr = frames(&cfg, 5);
        let t = TargetRecord::new(5.0, 20.0, 0.0, C64::new(1.0, 0.0));
        let cube = synthesize_radar_freq_noiseless(&[t], &fr, &cfg).unwrap();
        let v = noise_var_for_snr(&cube, 10.0);
        assert!((cube.mean_power() / v - 10.0).abs() < 1e-9);
    }
}
