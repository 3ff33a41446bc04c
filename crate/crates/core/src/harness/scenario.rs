use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{CommGeometry, ScattererLaw, TargetRecord};
use crate::config::{default_private_set, SystemConfig};
use crate::precoder::{AdamParams, BeampatternSpec};
use crate::radar::EstimatorParams;
use crate::rng::{child_rng, complex_coefficient, Stream};
use crate::{C64, Error, Result};

/// A target as written in a scenario file. A missing coefficient is drawn
/// from CN(0.1, 0.01) on the scenario's target stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub angle_deg: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    #[serde(default)]
    pub beta_re: Option<f64>,
    #[serde(default)]
    pub beta_im: Option<f64>,
}

/// Communication link: direct path plus random scatterers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommSpec {
    pub range_m: f64,
    pub departure_deg: f64,
    pub incidence_deg: f64,
    pub scatterers: usize,
    pub coeff_mean: f64,
    pub coeff_var: f64,
    pub max_scatter_angle_deg: f64,
}

impl Default for CommSpec {
    fn default() -> Self {
        let law = ScattererLaw::default();
        Self {
            range_m: 50.0,
            departure_deg: 30.0,
            incidence_deg: -45.0,
            scatterers: law.count,
            coeff_mean: law.coeff_mean,
            coeff_var: law.coeff_var,
            max_scatter_angle_deg: law.max_angle_rad.to_degrees(),
        }
    }
}

impl CommSpec {
    pub fn geometry(&self) -> CommGeometry {
        CommGeometry {
            range_m: self.range_m,
            departure_rad: self.departure_deg.to_radians(),
            incidence_rad: self.incidence_deg.to_radians(),
        }
    }

    pub fn law(&self) -> ScattererLaw {
        ScattererLaw {
            count: self.scatterers,
            coeff_mean: self.coeff_mean,
            coeff_var: self.coeff_var,
            max_angle_rad: self.max_scatter_angle_deg.to_radians(),
        }
    }
}

/// Settings of the beampattern / SNR co-design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSpec {
    pub alpha_b: f64,
    pub alpha_snr: f64,
    pub bands_deg: Vec<(f64, f64)>,
    pub band_level: f64,
    pub grid_start_deg: f64,
    pub grid_stop_deg: f64,
    pub grid_step_deg: f64,
    pub adam: AdamParams,
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            alpha_b: 1e-4,
            alpha_snr: 0.8,
            bands_deg: vec![(-52.0, -37.0), (29.0, 31.0)],
            band_level: 1.0,
            grid_start_deg: -90.0,
            grid_stop_deg: 90.0,
            grid_step_deg: 1.0,
            adam: AdamParams::default(),
        }
    }
}

impl OptimizeSpec {
    pub fn beampattern_spec(&self) -> Result<BeampatternSpec> {
        BeampatternSpec::bands(self.grid_start_deg, self.grid_stop_deg, self.grid_step_deg, &self.bands_deg, self.band_level)
    }
}

/// Where the precoding matrix comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum PrecoderSource {
    Identity,
    /// Complex-matrix dump; relative paths resolve against the scenario file.
    File { path: PathBuf },
    Optimize(OptimizeSpec),
}

impl Default for PrecoderSource {
    fn default() -> Self {
        PrecoderSource::Identity
    }
}

/// Random-scene settings for Monte Carlo sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub num_targets: usize,
    /// Overrides the number of OFDM symbols per trial to keep sweeps cheap.
    pub num_ofdm_symbols: Option<usize>,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub range_min_m: f64,
    /// Upper range bound as a fraction of min(range_max, CP-limited range).
    pub range_fraction: f64,
    /// Speed bound as a fraction of vel_max.
    pub velocity_fraction: f64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            num_targets: 6,
            num_ofdm_symbols: Some(16),
            angle_min_deg: -60.0,
            angle_max_deg: 60.0,
            range_min_m: 10.0,
            range_fraction: 0.9,
            velocity_fraction: 0.25,
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub targets: Vec<TargetSpec>,
    pub comm: CommSpec,
    pub precoder: PrecoderSource,
    pub radar_snr_db: f64,
    /// Per-receive-element SNRs of the BER sweep; empty skips decoding.
    pub comm_snr_db: Vec<f64>,
    pub trials: usize,
    pub out_dir: Option<PathBuf>,
    pub estimator: EstimatorParams,
    pub monte_carlo: MonteCarloSpec,
    pub seed: u64,
}

/// On-disk form: `[system]` holds overrides on top of the reference
/// configuration, plus a `num_private` shortcut for the default private set.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    system: toml::Table,
    #[serde(default)]
    targets: Vec<TargetSpec>,
    #[serde(default)]
    comm: CommSpec,
    #[serde(default)]
    precoder: PrecoderSource,
    #[serde(default = "default_snr")]
    radar_snr_db: f64,
    #[serde(default)]
    comm_snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    estimator: EstimatorParams,
    #[serde(default)]
    monte_carlo: MonteCarloSpec,
    #[serde(default)]
    seed: u64,
}

fn default_snr() -> f64 {
    15.0
}

fn default_trials() -> usize {
    1
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn system_from_table(mut t: toml::Table) -> Result<SystemConfig> {
    let num_tx = match t.get("num_tx") {
        Some(v) => v.as_integer().ok_or_else(|| config_error("num_tx must be an integer"))? as usize,
        None => 8,
    };
    let num_private = match t.remove("num_private") {
        Some(v) => Some(v.as_integer().ok_or_else(|| config_error("num_private must be an integer"))? as usize),
        None => None,
    };
    let base = SystemConfig::reference_config(num_tx, 0);
    let mut merged = toml::Table::try_from(&base).map_err(config_error)?;
    for (k, v) in t {
        if !merged.contains_key(&k) {
            return Err(config_error(format!("unknown system key `{k}`")));
        }
        merged.insert(k, v);
    }
    let mut cfg: SystemConfig = merged.try_into().map_err(config_error)?;
    if let Some(m) = num_private {
        cfg.private_set = default_private_set(m);
    }
    Ok(cfg)
}

impl Scenario {
    /// Parse a TOML scenario. Relative file paths resolve against `base_dir`.
    pub fn from_toml_str(s: &str, base_dir: Option<&Path>) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(s).map_err(config_error)?;
        let mut sc = Scenario {
            system: system_from_table(f.system)?,
            targets: f.targets,
            comm: f.comm,
            precoder: f.precoder,
            radar_snr_db: f.radar_snr_db,
            comm_snr_db: f.comm_snr_db,
            trials: f.trials,
            out_dir: f.out_dir,
            estimator: f.estimator,
            monte_carlo: f.monte_carlo,
            seed: f.seed,
        };
        if let Some(dir) = base_dir {
            if let PrecoderSource::File { path } = &mut sc.precoder {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        }
        sc.system.rng_seed = sc.seed;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.system.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let PrecoderSource::File { path } = &self.precoder {
            if !path.is_file() {
                return Err(Error::Config(format!("precoder file {} does not exist", path.display())));
            }
        }
        if !self.radar_snr_db.is_finite() || self.comm_snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        for t in &self.targets {
            let rec = TargetRecord::new(t.angle_deg, t.range_m, t.velocity_mps, C64::new(0.0, 0.0));
            rec.validate(&self.system).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Targets with coefficients filled in from the target stream.
    pub fn target_records(&self) -> Vec<TargetRecord> {
        let mut rng = child_rng(self.seed, Stream::Targets, 0);
        self.targets
            .iter()
            .map(|t| {
                let drawn = complex_coefficient(&mut rng, C64::new(0.1, 0.0), 0.01);
                let beta = match (t.beta_re, t.beta_im) {
                    (None, None) => drawn,
                    (re, im) => C64::new(re.unwrap_or(0.0), im.unwrap_or(0.0)),
                };
                TargetRecord::new(t.angle_deg, t.range_m, t.velocity_mps, beta)
            })
            .collect()
    }

    /// Reference configuration with N_t = 8, M = 8, the four-target scene at
    /// (-43 deg, 50 m, 13 m/s), (-43 deg, 80 m, 20 m/s), (-46 deg, 45 m,
    /// -10 m/s), (-48 deg, 100 m, 10 m/s), 15 dB radar SNR and the
    /// co-designed precoder for a receiver 50 m away at 30 deg.
    pub fn four_target_reference(seed: u64) -> Self {
        let targets = [(-43.0, 50.0, 13.0), (-43.0, 80.0, 20.0), (-46.0, 45.0, -10.0), (-48.0, 100.0, 10.0)]
            .iter()
            .map(|&(a, r, v)| TargetSpec { angle_deg: a, range_m: r, velocity_mps: v, beta_re: None, beta_im: None })
            .collect();
        Scenario {
            system: SystemConfig::reference_config(8, 8).with_seed(seed),
            targets,
            comm: CommSpec::default(),
            precoder: PrecoderSource::Optimize(OptimizeSpec::default()),
            radar_snr_db: 15.0,
            comm_snr_db: Vec::new(),
            trials: 1,
            out_dir: None,
            estimator: EstimatorParams::default(),
            monte_carlo: MonteCarloSpec::default(),
            seed,
        }
    }
}
