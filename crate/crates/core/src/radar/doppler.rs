use crate::config::SystemConfig;
use crate::linalg::fft;
use crate::C64;

/// Velocity and coefficient from per-symbol peak values.
///
/// The values are zero-padded to `pad` times their length and transformed;
/// the strongest bin is read as a signed Doppler frequency (bins past half
/// wrap to negative). Velocity is bin * c / (2 f_c pad N_p T_p); the
/// coefficient is the peak DFT value divided by N_p.
pub fn doppler_estimate(values: &[C64], cfg: &SystemConfig, pad: usize) -> (f64, C64) {
    let np = values.len();
    if np == 0 {
        return (0.0, C64::new(0.0, 0.0));
    }
    let n = np * pad.max(1);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..np].copy_from_slice(values);
    fft(&mut buf);
    let (k, peak) = buf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(k, v)| (k, *v))
        .expect("non-empty");
    let signed = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    let v = signed * cfg.c() / (2.0 * cfg.carrier_freq_hz * n as f64 * cfg.ofdm_symbol_duration_s);
    (v, peak / np as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(cfg: &SystemConfig, v: f64, beta: C64) -> Vec<C64> {
        let fd = cfg.doppler_hz(v);
        (0..cfg.num_ofdm_symbols)
            .map(|mu| beta * C64::from_polar(1.0, 2.0 * PI * mu as f64 * cfg.ofdm_symbol_duration_s * fd))
            .collect()
    }

    #[test]
    fn static_target_bin_zero() {
        let cfg = SystemConfig::reference_config(8, 0);
        let (v, b) = doppler_estimate(&tone(&cfg, 0.0, C64::new(0.3, 0.4)), &cfg, 8);
        assert_eq!(v, 0.0);
        assert!((b - C64::new(0.3, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn on_grid_velocity_exact_without_padding() {
        let cfg = SystemConfig::reference_config(8, 0);
        let res = crate::config::resolutions(&cfg).vel_res_mps;
        for k in [-7i32, -1, 1, 3, 20] {
            let (v, b) = doppler_estimate(&tone(&cfg, k as f64 * res, C64::new(1.0, 0.0)), &cfg, 1);
            assert!((v - k as f64 * res).abs() < 1e-9, "k={k} v={v}");
            assert!((b - C64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn padded_estimate_within_half_cell() {
        let cfg = SystemConfig::reference_config(8, 0);
        let cell = crate::config::resolutions(&cfg).vel_res_mps / 8.0;
        for v in [13.0, 20.0, -10.0, 10.0, 0.3] {
            let (e, _) = doppler_estimate(&tone(&cfg, v, C64::new(1.0, 0.0)), &cfg, 8);
            assert!((e - v).abs() <= cell / 2.0 + 1e-9, "{v} -> {e}");
        }
    }
}
