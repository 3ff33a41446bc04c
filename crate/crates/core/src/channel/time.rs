use std::f64::consts::PI;

use rayon::prelude::*;

use super::radar::{RadarCube, TargetRecord};
use crate::config::SystemConfig;
use crate::linalg::ifft;
use crate::rng::{child_rng, complex_normal, Stream};
use crate::waveform::{ofdm_demodulate, TimeFrame};
use crate::{C64, CMatrix, Error, Result};

/// Largest round-trip delay 2R/c + (n g_t + m g_r) sin(theta) / c over all
/// targets and transmit/receive element pairs.
pub fn max_delay_s(targets: &[TargetRecord], cfg: &SystemConfig) -> f64 {
    targets
        .iter()
        .flat_map(|t| element_delays(t, cfg).into_iter().flatten())
        .fold(f64::NEG_INFINITY, f64::max)
}

// delays[n][m]
fn element_delays(t: &TargetRecord, cfg: &SystemConfig) -> Vec<Vec<f64>> {
    let c = cfg.c();
    let s = t.angle_rad.sin();
    (0..cfg.num_tx)
        .map(|n| {
            (0..cfg.num_radar_rx)
                .map(|m| {
                    2.0 * t.range_m / c
                        + (n as f64 * cfg.tx_spacing_m + m as f64 * cfg.radar_rx_spacing_m) * s / c
                })
                .collect()
        })
        .collect()
}

/// Time-domain reference synthesis of the radar echo.
///
/// Each (target, transmit element, receive element) path delays the
/// continuous CP-OFDM waveform by its exact delay tau. Within a symbol the
/// waveform is periodic in 1/Δf, so the delayed samples are obtained by a
/// per-subcarrier phase ramp exp(-j 2 pi i Δf tau) followed by an IDFT;
/// samples that reach back before the start of the cyclic prefix come from
/// the previous symbol (silence before symbol 0). The carrier contributes
/// exp(-j 2 pi f_c (tau - 2R/c)): the carrier phase of the common round trip
/// is part of beta, as in the frequency-domain model. Doppler is one phase per
/// symbol.
///
/// Every delay must lie in [0, T_cp]; anything else is rejected instead of
/// being aliased. Noise of variance `cfg.radar_noise_var` is added per sample.
pub fn synthesize_radar_time(
    targets: &[TargetRecord],
    time_frames: &[TimeFrame],
    cfg: &SystemConfig,
) -> Result<Vec<TimeFrame>> {
    let (nt, nr, ns, np) = (cfg.num_tx, cfg.num_radar_rx, cfg.num_subcarriers, cfg.num_ofdm_symbols);
    let cp = cfg.cp_samples().min(ns);
    if time_frames.len() != np {
        return Err(Error::invalid(format!("{} time frames for {np} OFDM symbols", time_frames.len())));
    }
    for t in targets {
        t.validate(cfg)?;
    }
    let delays: Vec<Vec<Vec<f64>>> = targets.iter().map(|t| element_delays(t, cfg)).collect();
    for d in delays.iter().flatten().flatten() {
        if *d < 0.0 {
            return Err(Error::invalid(format!("negative path delay {d} s")));
        }
        if *d > cfg.cp_duration_s {
            return Err(Error::CyclicPrefixViolation { delay_s: *d, cp_s: cfg.cp_duration_s });
        }
    }

    // Transmit spectra, recovered exactly from the useful part of each symbol.
    let mut spectra = Vec::with_capacity(np);
    for tf in time_frames {
        if tf.samples.shape() != (nt, cp + ns) {
            return Err(Error::invalid(format!(
                "time frame shape {:?}, expected ({nt}, {})",
                tf.samples.shape(),
                cp + ns
            )));
        }
        spectra.push(ofdm_demodulate(tf, cfg)?);
    }

    let fs = cfg.sample_rate();
    let t_p = cfg.ofdm_symbol_duration_s;
    let scale = 1.0 / (ns as f64).sqrt();
    let len = cp + ns;

    // Periodic waveform of `spec` row n delayed by tau: p(s / fs - tau), s = 0..ns.
    let delayed = |spec: &CMatrix, n: usize, tau: f64, buf: &mut Vec<C64>| {
        buf.clear();
        buf.extend((0..ns).map(|i| {
            spec[(n, i)] * C64::from_polar(scale, -2.0 * PI * i as f64 * cfg.subcarrier_spacing_hz * tau)
        }));
        ifft(buf);
    };

    let per_rx: Vec<Vec<C64>> = (0..nr)
        .into_par_iter()
        .map(|m| {
            let mut out = vec![C64::new(0.0, 0.0); np * len];
            let mut cur = Vec::with_capacity(ns);
            let mut prev = Vec::with_capacity(ns);
            for (k, t) in targets.iter().enumerate() {
                let fd = cfg.doppler_hz(t.velocity_mps);
                for n in 0..nt {
                    let tau = delays[k][n][m];
                    let carrier =
                        t.beta * C64::from_polar(1.0, -2.0 * PI * cfg.carrier_freq_hz * (tau - 2.0 * t.range_m / cfg.c()));
                    // First sample whose delayed time still lies inside the current symbol.
                    let first_current = (tau * fs - 1e-9).ceil().max(0.0) as usize;
                    for mu in 0..np {
                        let g = carrier * C64::from_polar(1.0, 2.0 * PI * mu as f64 * t_p * fd);
                        delayed(&spectra[mu], n, tau, &mut cur);
                        let has_prev = mu > 0 && first_current > 0;
                        if has_prev {
                            delayed(&spectra[mu - 1], n, tau, &mut prev);
                        }
                        let row = &mut out[mu * len..(mu + 1) * len];
                        for (s, o) in row.iter_mut().enumerate() {
                            let idx = (s + ns - cp % ns) % ns;
                            if s >= first_current {
                                *o += g * cur[idx];
                            } else if has_prev {
                                // Previous symbol's tail, one full symbol period earlier.
                                *o += g * prev[(idx + cp) % ns];
                            }
                        }
                    }
                }
            }
            if cfg.radar_noise_var > 0.0 {
                for mu in 0..np {
                    let mut rng = child_rng(cfg.rng_seed, Stream::TimeNoise, (mu * nr + m) as u64);
                    for o in &mut out[mu * len..(mu + 1) * len] {
                        *o += complex_normal(&mut rng, cfg.radar_noise_var);
                    }
                }
            }
            out
        })
        .collect();

    Ok((0..np)
        .map(|mu| TimeFrame {
            samples: CMatrix::from_fn(nr, len, |m, s| per_rx[m][mu * len + s]),
            cp_len: cp,
            sample_rate: fs,
        })
        .collect())
}

/// Demodulate per-symbol receive samples into a radar cube.
pub fn cube_from_time(frames: &[TimeFrame], cfg: &SystemConfig) -> Result<RadarCube> {
    let (nr, ns, np) = (cfg.num_radar_rx, cfg.num_subcarriers, frames.len());
    let mut cube = RadarCube::zeros(nr, ns, np);
    for (mu, tf) in frames.iter().enumerate() {
        let d = ofdm_demodulate(tf, cfg)?;
        if d.nrows() != nr {
            return Err(Error::invalid(format!("time frame has {} rows, expected {nr}", d.nrows())));
        }
        for i in 0..ns {
            for m in 0..nr {
                cube.set(m, i, mu, d[(m, i)]);
            }
        }
    }
    Ok(cube)
}
