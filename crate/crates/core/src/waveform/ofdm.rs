use super::frame::SymbolFrame;
use crate::config::SystemConfig;
use crate::linalg::{fft, ifft};
use crate::{C64, CMatrix, Error, Result};

/// Baseband samples of one OFDM symbol, one row per transmit stream, each row
/// `cp_len + N_s` samples long at `sample_rate` = N_s Δf.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrame {
    pub samples: CMatrix,
    pub cp_len: usize,
    pub sample_rate: f64,
}

/// Unitary N_s-point IDFT of every row of the frame's transmit symbols,
/// followed by the cyclic prefix.
pub fn ofdm_modulate(frame: &SymbolFrame, cfg: &SystemConfig) -> TimeFrame {
    ofdm_modulate_matrix(&frame.transmit, cfg)
}

pub fn ofdm_modulate_matrix(symbols: &CMatrix, cfg: &SystemConfig) -> TimeFrame {
    let ns = symbols.ncols();
    let cp = cfg.cp_samples().min(ns);
    let scale = 1.0 / (ns as f64).sqrt();
    let mut samples = CMatrix::zeros(symbols.nrows(), cp + ns);
    let mut buf = vec![C64::new(0.0, 0.0); ns];
    for r in 0..symbols.nrows() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = symbols[(r, i)];
        }
        ifft(&mut buf);
        for s in 0..ns {
            samples[(r, cp + s)] = buf[s] * scale;
        }
        for s in 0..cp {
            samples[(r, s)] = samples[(r, ns + s)];
        }
    }
    TimeFrame { samples, cp_len: cp, sample_rate: cfg.sample_rate() }
}

/// Strip the cyclic prefix and apply the unitary N_s-point DFT per row.
pub fn ofdm_demodulate(time: &TimeFrame, cfg: &SystemConfig) -> Result<CMatrix> {
    let ns = cfg.num_subcarriers;
    let cp = cfg.cp_samples().min(ns);
    if time.samples.ncols() != ns + cp {
        return Err(Error::invalid(format!(
            "time frame has {} samples per stream, expected {}",
            time.samples.ncols(),
            ns + cp
        )));
    }
    let scale = 1.0 / (ns as f64).sqrt();
    let mut out = CMatrix::zeros(time.samples.nrows(), ns);
    let mut buf = vec![C64::new(0.0, 0.0); ns];
    for r in 0..time.samples.nrows() {
        for (s, b) in buf.iter_mut().enumerate() {
            *b = time.samples[(r, cp + s)];
        }
        fft(&mut buf);
        for i in 0..ns {
            out[(r, i)] = buf[i] * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{child_rng, complex_normal, Stream};

    fn cfg() -> SystemConfig {
        let mut c = SystemConfig::reference_config(3, 0);
        c.num_subcarriers = 64;
        c.subcarrier_spacing_hz = 1.0e6;
        c.cp_duration_s = 16.0 / 64.0e6;
        c.ofdm_symbol_duration_s = 1.0 / c.subcarrier_spacing_hz + c.cp_duration_s;
        c
    }

    fn random_d(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = child_rng(seed, Stream::Bits, 0);
        CMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0))
    }

    #[test]
    fn dc_bin_gives_constant_samples() {
        let c = cfg();
        let mut d = CMatrix::zeros(3, 64);
        let v = C64::new(0.7, -1.3);
        d[(0, 0)] = v;
        let t = ofdm_modulate_matrix(&d, &c);
        assert_eq!(t.cp_len, 16);
        for s in 0..80 {
            assert!((t.samples[(0, s)] - v / 8.0).norm() < 1e-12);
            assert!(t.samples[(1, s)].norm() < 1e-15);
        }
    }

    #[test]
    fn cyclic_prefix_replicates_tail() {
        let c = cfg();
        let t = ofdm_modulate_matrix(&random_d(3, 64, 1), &c);
        for r in 0..3 {
            for s in 0..16 {
                assert_eq!(t.samples[(r, s)], t.samples[(r, 64 + s)]);
            }
        }
    }

    #[test]
    fn roundtrip_many_frames() {
        let c = cfg();
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let d = random_d(3, 64, seed);
            let back = ofdm_demodulate(&ofdm_modulate_matrix(&d, &c), &c).unwrap();
            worst = worst.max((back - d).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn energy_includes_cp_replication() {
        let c = cfg();
        let d = random_d(3, 64, 42);
        let t = ofdm_modulate_matrix(&d, &c);
        let e_time = t.samples.norm_squared();
        let e_freq = d.norm_squared();
        // Parseval holds per row; the CP re-sends 16 of 64 samples, which on
        // average carry 16/64 of the row energy. Compare the exact form.
        let mut expected = 0.0;
        for r in 0..3 {
            let tail: f64 = (64..80).map(|s| t.samples[(r, s)].norm_sqr()).sum();
            expected += d.row(r).norm_squared() + tail;
        }
        assert!((e_time - expected).abs() < 1e-9 * e_time);
        // and the expected-value statement: ||D||^2 (1 + N_cp / N_s)
        assert!((e_time / (e_freq * 1.25) - 1.0).abs() < 0.2);
    }

    #[test]
    fn zero_in_zero_out_and_tone() {
        let c = cfg();
        let z = TimeFrame { samples: CMatrix::zeros(2, 80), cp_len: 16, sample_rate: 64e6 };
        assert_eq!(ofdm_demodulate(&z, &c).unwrap(), CMatrix::zeros(2, 64));
        let k = 5;
        let tone = CMatrix::from_fn(1, 80, |_, s| {
            C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * (s as f64 - 16.0) / 64.0)
        });
        let out = ofdm_demodulate(&TimeFrame { samples: tone, cp_len: 16, sample_rate: 64e6 }, &c).unwrap();
        for i in 0..64 {
            if i == k {
                assert!((out[(0, i)].norm() - 8.0).abs() < 1e-9);
            } else {
                assert!(out[(0, i)].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let c = cfg();
        let t = TimeFrame { samples: CMatrix::zeros(1, 70), cp_len: 6, sample_rate: 1.0 };
        assert!(ofdm_demodulate(&t, &c).is_err());
    }
}
