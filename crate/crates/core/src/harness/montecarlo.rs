use std::collections::HashMap;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{draw_frames, prepare_precoder, scenario_channel, simulate_and_estimate};
use super::scenario::{MonteCarloSpec, Scenario};
use crate::channel::TargetRecord;
use crate::config::{resolutions, SystemConfig};
use crate::radar::TargetEstimate;
use crate::rng::{child_rng, trial_seed, Stream};
use crate::{C64, CMatrix, Error, Result};

/// Swept scenario parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Number of private subcarriers.
    M,
    SnrDb,
    NTx,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::M => "m",
            Self::SnrDb => "snr_db",
            Self::NTx => "n_tx",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" | "M" => Ok(Self::M),
            "snr_db" | "snr" => Ok(Self::SnrDb),
            "n_tx" | "nt" => Ok(Self::NTx),
            _ => Err(Error::invalid(format!("unknown sweep variable `{s}` (expected m, snr_db or n_tx)"))),
        }
    }
}

/// Per-parameter tolerance of a correct estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchTolerance {
    pub angle_deg: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
}

impl MatchTolerance {
    /// Angle grid step, range cell and velocity cell of `cfg`.
    pub fn for_config(cfg: &SystemConfig, angle_step_deg: f64) -> Self {
        let r = resolutions(cfg);
        Self { angle_deg: angle_step_deg, range_m: r.range_res_m, velocity_mps: r.vel_res_mps }
    }
}

/// Nearest-neighbour pairing of truths and estimates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    /// (truth index, estimate index, within tolerance in every parameter).
    pub pairs: Vec<(usize, usize, bool)>,
    pub correct: usize,
    /// Estimates that are unmatched or out of tolerance.
    pub wrong: usize,
    /// Truths that are unmatched or matched out of tolerance.
    pub missed: usize,
}

/// Greedy assignment: repeatedly pair the closest remaining truth and
/// estimate under the tolerance-normalized distance.
pub fn match_targets(truth: &[TargetRecord], est: &[TargetEstimate], tol: MatchTolerance) -> Matching {
    let mut cand = Vec::with_capacity(truth.len() * est.len());
    for (t, tr) in truth.iter().enumerate() {
        for (e, es) in est.iter().enumerate() {
            let da = (es.angle_deg - tr.angle_deg()) / tol.angle_deg;
            let dr = (es.range_m - tr.range_m) / tol.range_m;
            let dv = (es.velocity_mps - tr.velocity_mps) / tol.velocity_mps;
            cand.push((da * da + dr * dr + dv * dv, t, e));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; est.len()];
    let mut m = Matching::default();
    for (_, t, e) in cand {
        if used_t[t] || used_e[e] {
            continue;
        }
        used_t[t] = true;
        used_e[e] = true;
        let (tr, es) = (&truth[t], &est[e]);
        let ok = (es.angle_deg - tr.angle_deg()).abs() <= tol.angle_deg
            && (es.range_m - tr.range_m).abs() <= tol.range_m
            && (es.velocity_mps - tr.velocity_mps).abs() <= tol.velocity_mps;
        m.pairs.push((t, e, ok));
        m.correct += ok as usize;
    }
    m.pairs.sort_unstable();
    m.wrong = est.len() - m.correct;
    m.missed = truth.len() - m.correct;
    m
}

/// Upper bound of random target ranges: a fraction of the smaller of the
/// unambiguous range and the range whose round trip fits in the CP.
pub fn random_range_limit(cfg: &SystemConfig, spec: &MonteCarloSpec) -> f64 {
    let cp_range = cfg.c() * cfg.cp_duration_s / 2.0;
    let r = resolutions(cfg).range_max_m;
    spec.range_fraction * if cp_range > 0.0 { r.min(cp_range) } else { r }
}

/// Draw `spec.num_targets` targets with unit-magnitude, random-phase
/// coefficients. Every pair is at least one angle step apart in angle or one
/// range cell apart in range.
pub fn random_targets<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    spec: &MonteCarloSpec,
    angle_step_deg: f64,
    rng: &mut R,
) -> Result<Vec<TargetRecord>> {
    let res = resolutions(cfg);
    let rmax = random_range_limit(cfg, spec);
    let vmax = spec.velocity_fraction * res.vel_max_mps;
    if !(rmax > spec.range_min_m) || !(spec.angle_max_deg > spec.angle_min_deg) {
        return Err(Error::Config("empty target-generation region".into()));
    }
    let mut out: Vec<TargetRecord> = Vec::with_capacity(spec.num_targets);
    let mut attempts = 0;
    while out.len() < spec.num_targets {
        attempts += 1;
        if attempts > 10_000 * spec.num_targets.max(1) {
            return Err(Error::Config("cannot place targets with the required separation".into()));
        }
        let a = rng.random_range(spec.angle_min_deg..spec.angle_max_deg);
        let r = rng.random_range(spec.range_min_m..rmax);
        let v = if vmax > 0.0 { rng.random_range(-vmax..vmax) } else { 0.0 };
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let t = TargetRecord::new(a, r, v, C64::from_polar(1.0, phase));
        let separated = out.iter().all(|o| {
            (o.angle_deg() - a).abs() >= angle_step_deg || (o.range_m - r).abs() >= res.range_res_m
        });
        if separated {
            out.push(t);
        }
    }
    Ok(out)
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub all_correct: bool,
    pub correct: usize,
    pub wrong: usize,
    pub missed: usize,
    pub num_estimates: usize,
    pub num_targets: usize,
    /// (angle deg, range m, velocity m/s) errors of matched pairs.
    pub errors: Vec<(f64, f64, f64)>,
    /// Angle errors of the coarse stage's matched pairs.
    pub coarse_angle_errors: Vec<f64>,
    pub iterations_to_converge: usize,
}

/// Aggregate metrics for one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub variable: SweepVariable,
    pub value: f64,
    pub trials: usize,
    /// Fraction of trials in which every target was estimated correctly and
    /// nothing else was reported.
    pub detection_probability: f64,
    /// Wrong estimates over all estimates.
    pub wrong_ratio: f64,
    /// Missed targets over all estimates.
    pub missed_ratio: f64,
    pub angle_mse_deg2: f64,
    pub coarse_angle_mse_deg2: f64,
    pub range_mse_m2: f64,
    pub doppler_mse_m2s2: f64,
    pub mean_iterations: f64,
    pub num_private: usize,
    pub bit_rate_bps: f64,
    /// Bit rate lost relative to the same configuration without private
    /// subcarriers.
    pub rate_loss_bps: f64,
}

fn mean_sq(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Fold trial outcomes into a summary.
pub fn summarize(variable: SweepVariable, value: f64, cfg: &SystemConfig, outcomes: &[TrialOutcome]) -> McSummary {
    let n = outcomes.len().max(1) as f64;
    let est: usize = outcomes.iter().map(|o| o.num_estimates).sum();
    let wrong: usize = outcomes.iter().map(|o| o.wrong).sum();
    let missed: usize = outcomes.iter().map(|o| o.missed).sum();
    let errs = || outcomes.iter().flat_map(|o| o.errors.iter());
    let no_private = SystemConfig { private_set: Vec::new(), ..cfg.clone() };
    McSummary {
        variable,
        value,
        trials: outcomes.len(),
        detection_probability: outcomes.iter().filter(|o| o.all_correct).count() as f64 / n,
        wrong_ratio: wrong as f64 / est.max(1) as f64,
        missed_ratio: missed as f64 / est.max(1) as f64,
        angle_mse_deg2: mean_sq(errs().map(|e| e.0)),
        coarse_angle_mse_deg2: mean_sq(outcomes.iter().flat_map(|o| o.coarse_angle_errors.iter().copied())),
        range_mse_m2: mean_sq(errs().map(|e| e.1)),
        doppler_mse_m2s2: mean_sq(errs().map(|e| e.2)),
        mean_iterations: outcomes.iter().map(|o| o.iterations_to_converge as f64).sum::<f64>() / n,
        num_private: cfg.num_private(),
        bit_rate_bps: cfg.bit_rate_bps(),
        rate_loss_bps: no_private.bit_rate_bps() - cfg.bit_rate_bps(),
    }
}

/// Configuration and radar SNR of `sc` with `variable` set to `value`.
pub fn apply_sweep_value(sc: &Scenario, variable: SweepVariable, value: f64) -> Result<(SystemConfig, f64)> {
    let mut cfg = sc.system.clone();
    if let Some(np) = sc.monte_carlo.num_ofdm_symbols {
        cfg.num_ofdm_symbols = np;
    }
    let mut snr = sc.radar_snr_db;
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("sweep value {v} is not a count")))
        }
    };
    match variable {
        SweepVariable::M => cfg = cfg.with_private_count(as_count(value)?),
        SweepVariable::SnrDb => snr = value,
        SweepVariable::NTx => {
            let nt = as_count(value)?;
            let m = cfg.num_private().min(nt);
            cfg.num_tx = nt;
            cfg = cfg.with_private_count(m);
        }
    }
    cfg.validate()?;
    Ok((cfg, snr))
}

/// One trial of a sweep cell: targets and bits come from `trial_seed(seed,
/// trial)`, so every sweep value sees the same scenes.
pub fn run_trial(sc: &Scenario, cfg: &SystemConfig, p: &CMatrix, snr_db: f64, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(sc.seed, trial as u64);
    let step = sc.estimator.angle_grid_step_deg;
    let targets = random_targets(cfg, &sc.monte_carlo, step, &mut child_rng(seed, Stream::Targets, 0))?;
    let frames = draw_frames(p, cfg, seed)?;
    let (report, cfg, _) = simulate_and_estimate(&targets, &frames, cfg, snr_db, seed, &sc.estimator)?;
    let tol = MatchTolerance::for_config(&cfg, step);
    let m = match_targets(&targets, &report.estimates, tol);
    let errors = m
        .pairs
        .iter()
        .map(|&(t, e, _)| {
            let (tr, es) = (&targets[t], &report.estimates[e]);
            (es.angle_deg - tr.angle_deg(), es.range_m - tr.range_m, es.velocity_mps - tr.velocity_mps)
        })
        .collect();
    let cm = match_targets(&targets, &report.coarse_estimates, tol);
    let coarse_angle_errors = cm
        .pairs
        .iter()
        .map(|&(t, e, _)| report.coarse_estimates[e].angle_deg - targets[t].angle_deg())
        .collect();
    Ok(TrialOutcome {
        all_correct: m.correct == targets.len() && m.wrong == 0,
        correct: m.correct,
        wrong: m.wrong,
        missed: m.missed,
        num_estimates: report.estimates.len(),
        num_targets: targets.len(),
        errors,
        coarse_angle_errors,
        iterations_to_converge: report.iterations_to_converge,
    })
}

/// Sweep `variable` over `values`, running `sc.trials` random scenes per
/// value. Trials run on the rayon pool; results do not depend on its size.
pub fn run_monte_carlo(sc: &Scenario, variable: SweepVariable, values: &[f64]) -> Result<Vec<McSummary>> {
    sc.validate()?;
    let mut precoders: HashMap<usize, CMatrix> = HashMap::new();
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let (cfg, snr) = apply_sweep_value(sc, variable, value)?;
        if !precoders.contains_key(&cfg.num_tx) {
            let channel = scenario_channel(sc, &cfg)?;
            precoders.insert(cfg.num_tx, prepare_precoder(sc, &cfg, &channel)?.p);
        }
        let p = &precoders[&cfg.num_tx];
        let outcomes = (0..sc.trials)
            .into_par_iter()
            .map(|t| run_trial(sc, &cfg, p, snr, t))
            .collect::<Result<Vec<_>>>()?;
        out.push(summarize(variable, value, &cfg, &outcomes));
    }
    Ok(out)
}
