//! System parameters, resolution formulas and the text configuration format.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Vacuum speed of light in m/s. This is the default propagation speed.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// One private subcarrier and the transmit antenna that owns it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateAssignment {
    pub subcarrier: usize,
    pub antenna: usize,
}

/// All physical and processing parameters of the radar, the OFDM numerology
/// and the communication receiver array.
///
/// Angles never appear here; spacings are in metres, times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    pub num_ofdm_symbols: usize,
    pub num_tx: usize,
    pub num_radar_rx: usize,
    pub num_comm_rx: usize,
    pub tx_spacing_m: f64,
    pub radar_rx_spacing_m: f64,
    pub comm_rx_spacing_m: f64,
    pub ofdm_symbol_duration_s: f64,
    pub cp_duration_s: f64,
    pub radar_noise_var: f64,
    pub comm_noise_var: f64,
    #[serde(default)]
    pub private_set: Vec<PrivateAssignment>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_speed_of_light")]
    pub speed_of_light_mps: f64,
}

fn default_speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

/// Range and velocity resolution / ambiguity limits of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    pub range_res_m: f64,
    pub range_max_m: f64,
    pub vel_res_mps: f64,
    pub vel_max_mps: f64,
}

impl SystemConfig {
    /// The reference 24 GHz configuration: 0.25 MHz spacing, 512 subcarriers,
    /// 256 OFDM symbols of 5 us (1 us CP), 32 radar receivers, 64
    /// communication receivers, half-wavelength spacing at the carrier.
    ///
    /// Uses the rounded propagation speed c = 3e8 m/s so that the range and
    /// velocity grids are round numbers (1.171875 m range cells,
    /// 4.8828 m/s velocity cells). `num_private` private subcarriers are
    /// assigned as subcarrier i to antenna i.
    pub fn reference_config(num_tx: usize, num_private: usize) -> Self {
        let c = 3.0e8;
        let fc = 24.0e9;
        let half_lambda = 0.5 * c / fc;
        let mut cfg = SystemConfig {
            carrier_freq_hz: fc,
            subcarrier_spacing_hz: 0.25e6,
            num_subcarriers: 512,
            num_ofdm_symbols: 256,
            num_tx,
            num_radar_rx: 32,
            num_comm_rx: 64,
            tx_spacing_m: half_lambda,
            radar_rx_spacing_m: half_lambda,
            comm_rx_spacing_m: half_lambda,
            ofdm_symbol_duration_s: 5.0e-6,
            cp_duration_s: 1.0e-6,
            radar_noise_var: 0.0,
            comm_noise_var: 1.0,
            private_set: Vec::new(),
            rng_seed: 0,
            speed_of_light_mps: c,
        };
        cfg.private_set = default_private_set(num_private);
        cfg
    }

    /// Replace the private set with the default assignment {(i, i)}.
    pub fn with_private_count(mut self, num_private: usize) -> Self {
        self.private_set = default_private_set(num_private);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_subcarriers", self.num_subcarriers),
            ("num_ofdm_symbols", self.num_ofdm_symbols),
            ("num_tx", self.num_tx),
            ("num_radar_rx", self.num_radar_rx),
            ("num_comm_rx", self.num_comm_rx),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("tx_spacing_m", self.tx_spacing_m),
            ("radar_rx_spacing_m", self.radar_rx_spacing_m),
            ("comm_rx_spacing_m", self.comm_rx_spacing_m),
            ("ofdm_symbol_duration_s", self.ofdm_symbol_duration_s),
            ("speed_of_light_mps", self.speed_of_light_mps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("cp_duration_s", self.cp_duration_s),
            ("radar_noise_var", self.radar_noise_var),
            ("comm_noise_var", self.comm_noise_var),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        let expected_tp = 1.0 / self.subcarrier_spacing_hz + self.cp_duration_s;
        if ((self.ofdm_symbol_duration_s - expected_tp) / expected_tp).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "ofdm_symbol_duration_s ({}) must equal 1/subcarrier_spacing + cp_duration ({expected_tp})",
                self.ofdm_symbol_duration_s
            )));
        }
        if self.private_set.len() > self.num_tx {
            return Err(Error::Config(format!(
                "{} private subcarriers exceed the {} transmit antennas",
                self.private_set.len(),
                self.num_tx
            )));
        }
        let mut seen = vec![false; self.num_subcarriers];
        for a in &self.private_set {
            if a.subcarrier >= self.num_subcarriers {
                return Err(Error::Config(format!("private subcarrier {} out of range", a.subcarrier)));
            }
            if a.antenna >= self.num_tx {
                return Err(Error::Config(format!("private owner antenna {} out of range", a.antenna)));
            }
            if std::mem::replace(&mut seen[a.subcarrier], true) {
                return Err(Error::Config(format!("private subcarrier {} listed twice", a.subcarrier)));
            }
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.speed_of_light_mps
    }

    /// Carrier wavelength c / f_c.
    pub fn lambda0(&self) -> f64 {
        self.c() / self.carrier_freq_hz
    }

    /// Absolute frequency f_c + i Δf of subcarrier `i`.
    pub fn subcarrier_freq(&self, i: usize) -> f64 {
        self.carrier_freq_hz + i as f64 * self.subcarrier_spacing_hz
    }

    /// Baseband sample rate N_s Δf.
    pub fn sample_rate(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// Cyclic-prefix length in samples, round(T_cp N_s Δf).
    pub fn cp_samples(&self) -> usize {
        (self.cp_duration_s * self.sample_rate()).round() as usize
    }

    pub fn num_private(&self) -> usize {
        self.private_set.len()
    }

    /// Owner antenna of subcarrier `i` if it is private.
    pub fn private_owner(&self, i: usize) -> Option<usize> {
        self.private_set.iter().find(|a| a.subcarrier == i).map(|a| a.antenna)
    }

    /// Per-subcarrier owner table (None for shared subcarriers).
    pub fn owner_table(&self) -> Vec<Option<usize>> {
        let mut t = vec![None; self.num_subcarriers];
        for a in &self.private_set {
            if a.subcarrier < t.len() {
                t[a.subcarrier] = Some(a.antenna);
            }
        }
        t
    }

    pub fn doppler_hz(&self, velocity_mps: f64) -> f64 {
        2.0 * velocity_mps * self.carrier_freq_hz / self.c()
    }

    /// Information bits carried by one OFDM symbol: 2 (N_t (N_s - M) + M).
    pub fn bits_per_ofdm_symbol(&self) -> usize {
        let m = self.num_private();
        2 * (self.num_tx * (self.num_subcarriers - m) + m)
    }

    /// Communication bit rate in bits per second.
    pub fn bit_rate_bps(&self) -> f64 {
        self.bits_per_ofdm_symbol() as f64 / self.ofdm_symbol_duration_s
    }

    /// Bit-rate reduction caused by turning one shared subcarrier private:
    /// 2 (N_t - 1) / T_p.
    pub fn rate_loss_per_private_bps(&self) -> f64 {
        2.0 * (self.num_tx as f64 - 1.0) / self.ofdm_symbol_duration_s
    }

    /// Parse a TOML document holding exactly one `SystemConfig` table.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The default private set: subcarrier i owned by antenna i, i = 0..M-1.
pub fn default_private_set(num_private: usize) -> Vec<PrivateAssignment> {
    (0..num_private)
        .map(|i| PrivateAssignment { subcarrier: i, antenna: i })
        .collect()
}

/// Range/velocity resolution and maximum detectable values.
///
/// range_res = c / (2 N_s Δf), range_max = c / (2 Δf),
/// vel_res = c / (2 f_c N_p T_p), vel_max = c / (2 f_c T_p).
pub fn resolutions(cfg: &SystemConfig) -> Resolutions {
    let c = cfg.c();
    let range_res_m = c / (2.0 * cfg.num_subcarriers as f64 * cfg.subcarrier_spacing_hz);
    let vel_max_mps = c / (2.0 * cfg.carrier_freq_hz * cfg.ofdm_symbol_duration_s);
    Resolutions {
        range_res_m,
        range_max_m: range_res_m * cfg.num_subcarriers as f64,
        vel_res_mps: vel_max_mps / cfg.num_ofdm_symbols as f64,
        vel_max_mps,
    }
}
