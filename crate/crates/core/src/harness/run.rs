use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{PrecoderSource, Scenario};
use crate::channel::{
    add_radar_noise, build_comm_channel, noise_var_for_snr, synthesize_radar_freq_noiseless, CommChannel, RadarCube, TargetRecord,
};
use crate::comm::{bit_classes, CommReceiver};
use crate::config::SystemConfig;
use crate::io;
use crate::precoder::{adam_optimize, beampattern, write_trace_csv, PrecoderProblem, PrecoderState};
use crate::radar::{iterative_angle_range, range_profile, EstimationReport};
use crate::rng::{child_rng, complex_normal, Stream};
use crate::waveform::{random_symbol_frame, SymbolFrame};
use crate::{CMatrix, Error, Result};

/// Precoder plus the optimizer history when it was designed here.
#[derive(Clone, Debug)]
pub struct PreparedPrecoder {
    pub p: CMatrix,
    pub state: Option<PrecoderState>,
}

/// Communication channel of a scenario, drawn from its channel stream.
pub fn scenario_channel(sc: &Scenario, cfg: &SystemConfig) -> Result<CommChannel> {
    build_comm_channel(cfg, sc.comm.geometry(), &sc.comm.law(), &mut child_rng(sc.seed, Stream::Channel, 0))
}

/// Resolve the scenario's precoder for `cfg` (which may differ from the
/// scenario's own system in N_t during sweeps).
pub fn prepare_precoder(sc: &Scenario, cfg: &SystemConfig, channel: &CommChannel) -> Result<PreparedPrecoder> {
    let nt = cfg.num_tx;
    match &sc.precoder {
        PrecoderSource::Identity => Ok(PreparedPrecoder { p: CMatrix::identity(nt, nt), state: None }),
        PrecoderSource::File { path } => {
            let p = io::read_precoder(path)?;
            if p.nrows() != nt || p.ncols() != nt {
                return Err(Error::Config(format!(
                    "precoder in {} is {}x{}, expected {nt}x{nt}",
                    path.display(),
                    p.nrows(),
                    p.ncols()
                )));
            }
            Ok(PreparedPrecoder { p, state: None })
        }
        PrecoderSource::Optimize(spec) => {
            let problem = PrecoderProblem::new(spec.beampattern_spec()?, channel, cfg, spec.alpha_b, spec.alpha_snr)?;
            let state = adam_optimize(&CMatrix::identity(nt, nt), &problem, &spec.adam)?;
            Ok(PreparedPrecoder { p: state.p.clone(), state: Some(state) })
        }
    }
}

/// Frames for every OFDM symbol of the CPI, drawn from the bit stream of
/// `seed`.
pub fn draw_frames(p: &CMatrix, cfg: &SystemConfig, seed: u64) -> Result<Vec<SymbolFrame>> {
    let mut rng = child_rng(seed, Stream::Bits, 0);
    (0..cfg.num_ofdm_symbols)
        .map(|mu| random_symbol_frame(p, cfg, mu, &mut rng).map(|(f, _)| f))
        .collect()
}

/// Synthesize the noisy radar cube at `snr_db` and estimate. Returns the
/// report, the configuration with the noise variance filled in and the cube.
pub fn simulate_and_estimate(
    targets: &[TargetRecord],
    frames: &[SymbolFrame],
    cfg: &SystemConfig,
    snr_db: f64,
    seed: u64,
    params: &crate::radar::EstimatorParams,
) -> Result<(EstimationReport, SystemConfig, RadarCube)> {
    let mut cfg = cfg.clone();
    let mut cube = synthesize_radar_freq_noiseless(targets, frames, &cfg)?;
    let var = if targets.is_empty() { 1.0 } else { noise_var_for_snr(&cube, snr_db) };
    add_radar_noise(&mut cube, var, seed);
    cfg.radar_noise_var = var;
    let report = iterative_angle_range(&cube, frames, &cfg, params)?;
    Ok((report, cfg, cube))
}

/// Average received signal power per receive element and subcarrier for
/// unit-power symbols, divided by the linear SNR.
pub fn comm_noise_var_for_snr(channel: &CommChannel, p: &CMatrix, cfg: &SystemConfig, snr_db: f64) -> f64 {
    let pf2 = p.norm_squared();
    let owners = cfg.owner_table();
    let nc = channel.h.first().map_or(1, |h| h.nrows()) as f64;
    let total: f64 = channel
        .h
        .iter()
        .zip(&owners)
        .map(|(h, o)| match o {
            Some(n) => pf2 * h.column(*n).norm_squared(),
            None => (h * p).norm_squared(),
        })
        .sum();
    total / (nc * channel.h.len() as f64) / 10f64.powf(snr_db / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubcarrierClass {
    Shared,
    Private,
}

impl SubcarrierClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Shared => "shared",
            Self::Private => "private",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub snr_db: f64,
    pub n_tx: usize,
    pub class: SubcarrierClass,
    pub ber: f64,
    pub trials: usize,
    pub errors: u64,
    pub bits: u64,
}

/// BER of shared and private subcarriers over an SNR sweep.
///
/// Trial t draws its bits from the trial stream and one unit-variance noise
/// realization from the comm-noise stream; the same realization, scaled, is
/// used at every SNR. The receiver knows the private allocation.
pub fn ber_sweep(
    cfg: &SystemConfig,
    channel: &CommChannel,
    p: &CMatrix,
    snr_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<BerRow>> {
    let rx = CommReceiver::new(channel, p, false)?;
    let classes = bit_classes(cfg);
    let sigmas: Vec<f64> = snr_db.iter().map(|&s| comm_noise_var_for_snr(channel, p, cfg, s).sqrt()).collect();
    let per_trial: Vec<Result<Vec<[u64; 2]>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (frame, bits) = random_symbol_frame(p, cfg, 0, &mut child_rng(seed, Stream::Trial, t as u64))?;
            let clean = crate::channel::apply_comm_channel(channel, &frame, 0.0, &mut child_rng(seed, Stream::CommNoise, t as u64))?;
            let mut nrng = child_rng(seed, Stream::CommNoise, t as u64);
            let noise = CMatrix::from_fn(clean.nrows(), clean.ncols(), |_, _| complex_normal(&mut nrng, 1.0));
            sigmas
                .iter()
                .map(|&s| {
                    let r = &clean + &noise * crate::C64::new(s, 0.0);
                    let dec = rx.decode(&r, Some(&cfg.private_set))?;
                    let mut err = [0u64; 2];
                    for ((a, b), private) in bits.iter().zip(&dec.bits).zip(&classes) {
                        if a != b {
                            err[*private as usize] += 1;
                        }
                    }
                    Ok(err)
                })
                .collect()
        })
        .collect();
    let mut errors = vec![[0u64; 2]; snr_db.len()];
    for t in per_trial {
        for (acc, e) in errors.iter_mut().zip(t?) {
            acc[0] += e[0];
            acc[1] += e[1];
        }
    }
    let private_bits = classes.iter().filter(|c| **c).count() as u64;
    let shared_bits = classes.len() as u64 - private_bits;
    let mut rows = Vec::new();
    for (k, &s) in snr_db.iter().enumerate() {
        for (class, per, idx) in [(SubcarrierClass::Shared, shared_bits, 0), (SubcarrierClass::Private, private_bits, 1)] {
            if per == 0 {
                continue;
            }
            let bits = per * trials as u64;
            rows.push(BerRow {
                snr_db: s,
                n_tx: cfg.num_tx,
                class,
                ber: errors[k][idx] as f64 / bits as f64,
                trials,
                errors: errors[k][idx],
                bits,
            });
        }
    }
    Ok(rows)
}

/// Range-correlation power on the detection symbol along one look direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeProfileRow {
    pub angle_deg: f64,
    pub lag: usize,
    pub range_m: f64,
    pub power: f64,
}

/// Transmit power towards one angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeampatternRow {
    pub angle_deg: f64,
    pub power: f64,
}

/// Everything a single scenario run produced.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub config: SystemConfig,
    pub targets: Vec<TargetRecord>,
    pub report: EstimationReport,
    pub precoder: PreparedPrecoder,
    pub range_profiles: Vec<RangeProfileRow>,
    pub beampattern: Vec<BeampatternRow>,
    pub ber: Vec<BerRow>,
    /// Files written, relative to the output directory.
    pub files: Vec<PathBuf>,
}

/// Synthesize, estimate and optionally decode one realization of `sc`.
///
/// When `out` is given the estimates (JSON), coarse range profiles (CSV), the
/// iteration log (JSON lines), the precoder and, if requested, the BER sweep
/// are written there.
pub fn run_scenario(sc: &Scenario, out: Option<&Path>) -> Result<ScenarioOutput> {
    sc.validate()?;
    let cfg = sc.system.clone().with_seed(sc.seed);
    let channel = scenario_channel(sc, &cfg)?;
    let precoder = prepare_precoder(sc, &cfg, &channel)?;
    let frames = draw_frames(&precoder.p, &cfg, sc.seed)?;
    let targets = sc.target_records();
    let (report, cfg, cube) = simulate_and_estimate(&targets, &frames, &cfg, sc.radar_snr_db, sc.seed, &sc.estimator)?;
    info!(
        "{} estimates after {} iterations",
        report.estimates.len(),
        report.iterations
    );

    let res = crate::config::resolutions(&cfg).range_res_m;
    let mut range_profiles = Vec::new();
    if !report.coarse_bins.is_empty() {
        for b in &report.coarse_bins {
            let prof = range_profile(&cube, &frames, b.angle_rad, &cfg);
            for (lag, pw) in prof.power(&[sc.estimator.coarse_symbol]).into_iter().enumerate() {
                range_profiles.push(RangeProfileRow { angle_deg: b.angle_deg(), lag, range_m: lag as f64 * res, power: pw });
            }
        }
    }

    let grid = crate::radar::angle_grid_deg(-90.0, 90.0, 0.5);
    let rad: Vec<f64> = grid.iter().map(|a| a.to_radians()).collect();
    let beampattern = grid
        .iter()
        .zip(beampattern(&precoder.p, &cfg, &rad))
        .map(|(&angle_deg, power)| BeampatternRow { angle_deg, power })
        .collect();

    let ber = if sc.comm_snr_db.is_empty() {
        Vec::new()
    } else {
        ber_sweep(&cfg, &channel, &precoder.p, &sc.comm_snr_db, sc.trials, sc.seed)?
    };

    let mut output = ScenarioOutput {
        config: cfg,
        targets,
        report,
        precoder,
        range_profiles,
        beampattern,
        ber,
        files: Vec::new(),
    };
    if let Some(dir) = out {
        output.files = write_scenario_outputs(&output, dir)?;
    }
    Ok(output)
}

fn write_scenario_outputs(o: &ScenarioOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str| {
        files.push(PathBuf::from(name));
        dir.join(name)
    };
    io::write_estimates_json(&put("estimates.json"), &o.report.estimates)?;
    io::write_estimates_json(&put("coarse_estimates.json"), &o.report.coarse_estimates)?;
    io::write_iteration_log(&put("iterations.jsonl"), &o.report.log)?;
    let mut w = csv::Writer::from_path(put("range_profile.csv"))?;
    w.write_record(["angle_deg", "lag", "range_m", "power"])?;
    for r in &o.range_profiles {
        w.serialize((r.angle_deg, r.lag, r.range_m, r.power))?;
    }
    w.flush()?;
    io::write_precoder(&put("precoder.bin"), &o.precoder.p)?;
    if let Some(st) = &o.precoder.state {
        write_trace_csv(st, &put("precoder_trace.csv"))?;
    }
    if !o.ber.is_empty() {
        write_ber_csv(&o.ber, &put("ber.csv"))?;
    }
    Ok(files)
}

/// BER table: snr_db, n_tx, subcarrier_class, ber, trials.
pub fn write_ber_csv(rows: &[BerRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["snr_db", "n_tx", "subcarrier_class", "ber", "trials"])?;
    for r in rows {
        w.serialize((r.snr_db, r.n_tx, r.class.as_str(), r.ber, r.trials))?;
    }
    w.flush()?;
    Ok(())
}
