use std::collections::HashMap;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::coarse::{coarse_angle_estimate, AngleBin};
use super::doppler::doppler_estimate;
use super::range::{merge_range_peaks, peaks_of_profile, range_profile, RangePeak, RangeProfile};
use super::ssr::{build_va_snapshot, sparse_solve, va_noise_var, SolverParams, SsrProblem};
use crate::channel::RadarCube;
use crate::config::{resolutions, SystemConfig};
use crate::waveform::SymbolFrame;
use crate::{C64, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Coarse,
    SsrRefined,
}

/// One estimated target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub angle_deg: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub provenance: Provenance,
    pub iteration: usize,
}

impl TargetEstimate {
    pub fn beta(&self) -> C64 {
        C64::new(self.beta_re, self.beta_im)
    }
}

/// Knobs of the estimation chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorParams {
    /// Robust threshold multiplier (median + k MAD) for angle-spectrum peaks.
    pub angle_threshold_k: f64,
    /// Same for range-correlation peaks.
    pub range_threshold_k: f64,
    /// Range peaks from different look directions within this many lags merge.
    pub range_merge_lags: usize,
    pub doppler_pad: usize,
    pub angle_grid_start_deg: f64,
    pub angle_grid_stop_deg: f64,
    pub angle_grid_step_deg: f64,
    pub wavelength_approx: bool,
    /// Number of OFDM symbols, spread evenly over the frame, whose
    /// virtual-array snapshots are recovered jointly.
    pub ssr_snapshots: usize,
    pub max_iterations: usize,
    /// OFDM symbol used for coarse angle and range detection.
    pub coarse_symbol: usize,
    /// Number of consecutive symbols, starting at `coarse_symbol`, whose
    /// range-correlation power is summed before peak detection.
    pub range_integration: usize,
    /// A coarse angle bin must peak on at least this fraction of subcarriers.
    pub angle_min_support: f64,
    /// Recovered atoms at the same range within this many grid steps of a
    /// stronger atom are dropped (an off-grid target excites its neighbours).
    pub atom_merge_steps: usize,
    pub solver: SolverParams,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            angle_threshold_k: 10.0,
            range_threshold_k: 10.0,
            range_merge_lags: 1,
            doppler_pad: 8,
            angle_grid_start_deg: -90.0,
            angle_grid_stop_deg: 90.0,
            angle_grid_step_deg: 1.0,
            wavelength_approx: true,
            ssr_snapshots: 16,
            max_iterations: 5,
            coarse_symbol: 0,
            range_integration: 1,
            angle_min_support: 0.02,
            atom_merge_steps: 1,
            solver: SolverParams::default(),
        }
    }
}

/// Inclusive grid start, start + step, ..., up to stop.
pub fn angle_grid_deg(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// State of one pass of the angle-range loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub angles_deg: Vec<f64>,
    pub ranges_m: Vec<f64>,
    /// (angle_deg, range_m) pairs selected by sparse recovery.
    pub support: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimates: Vec<TargetEstimate>,
    /// Estimates of the coarse stage alone (coarse angle bin x its range peaks).
    pub coarse_estimates: Vec<TargetEstimate>,
    pub coarse_bins: Vec<AngleBin>,
    /// Merged range peaks of the coarse stage.
    pub coarse_ranges: Vec<RangePeak>,
    pub log: Vec<IterationRecord>,
    /// Loop passes executed, including the pass that confirmed convergence.
    pub iterations: usize,
    /// Passes up to and including the last one that changed the support.
    pub iterations_to_converge: usize,
    pub converged: bool,
}

struct ProfileCache<'a> {
    cube: &'a RadarCube,
    frames: &'a [SymbolFrame],
    cfg: &'a SystemConfig,
    map: HashMap<u64, RangeProfile>,
}

impl<'a> ProfileCache<'a> {
    fn get(&mut self, angle_rad: f64) -> &RangeProfile {
        let (cube, frames, cfg) = (self.cube, self.frames, self.cfg);
        self.map
            .entry(angle_rad.to_bits())
            .or_insert_with(|| range_profile(cube, frames, angle_rad, cfg))
    }
}

fn estimate_from(peak_values: &[C64], angle_rad: f64, lag: usize, cfg: &SystemConfig, params: &EstimatorParams, provenance: Provenance, iteration: usize) -> TargetEstimate {
    let (v, beta) = doppler_estimate(peak_values, cfg, params.doppler_pad);
    TargetEstimate {
        angle_deg: angle_rad.to_degrees(),
        range_m: lag as f64 * resolutions(cfg).range_res_m,
        velocity_mps: v,
        beta_re: beta.re,
        beta_im: beta.im,
        provenance,
        iteration,
    }
}

fn detect_symbols(params: &EstimatorParams) -> Vec<usize> {
    (params.coarse_symbol..params.coarse_symbol + params.range_integration.max(1)).collect()
}

fn ranges_for(
    cache: &mut ProfileCache,
    angles: &[f64],
    cfg: &SystemConfig,
    params: &EstimatorParams,
) -> Vec<RangePeak> {
    let mut all = Vec::new();
    for &a in angles {
        let prof = cache.get(a);
        all.extend(peaks_of_profile(prof, cfg, params.range_threshold_k, &detect_symbols(params)));
    }
    merge_range_peaks(all, params.range_merge_lags)
}

/// Keep, among atoms sharing a range lag, only those that are not within
/// `steps` grid points of a stronger kept atom. Returns sorted cells.
fn merge_adjacent_atoms(mut cells: Vec<(usize, usize, f64)>, steps: usize) -> Vec<(usize, usize)> {
    cells.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut kept: Vec<(usize, usize)> = Vec::with_capacity(cells.len());
    for (a, lag, _) in cells {
        if !kept.iter().any(|&(ka, kl)| kl == lag && ka.abs_diff(a) <= steps) {
            kept.push((a, lag));
        }
    }
    kept.sort_unstable();
    kept
}

/// Angle-range estimation with virtual-array refinement.
///
/// Coarse angles come from the receive-array DFT. Each pass then estimates
/// ranges along the current angles, builds an angle x range dictionary from
/// those ranges and solves the sparse virtual-array problem; the angles of
/// the recovered support become the next pass's angles. The loop ends when a
/// pass reproduces the previous support. Each surviving (angle, range) pair
/// gets a Doppler estimate from the range correlation at that angle.
///
/// Without private subcarriers the coarse estimates are returned as they are.
pub fn iterative_angle_range(
    cube: &RadarCube,
    frames: &[SymbolFrame],
    cfg: &SystemConfig,
    params: &EstimatorParams,
) -> Result<EstimationReport> {
    let res = resolutions(cfg).range_res_m;
    let min_support = (params.angle_min_support * cfg.num_subcarriers as f64).ceil() as usize;
    let coarse_bins: Vec<AngleBin> = coarse_angle_estimate(cube, params.coarse_symbol, cfg, params.angle_threshold_k)
        .into_iter()
        .filter(|b| b.subcarrier_support.len() >= min_support.max(1))
        .collect();
    let mut cache = ProfileCache { cube, frames, cfg, map: HashMap::new() };

    // Coarse stage: every bin with its own range peaks, merged across bins.
    let mut coarse_peaks = Vec::new();
    for b in &coarse_bins {
        coarse_peaks.extend(peaks_of_profile(cache.get(b.angle_rad), cfg, params.range_threshold_k, &detect_symbols(params)));
    }
    let coarse_ranges = merge_range_peaks(coarse_peaks, params.range_merge_lags);
    let coarse_estimates: Vec<TargetEstimate> = coarse_ranges
        .iter()
        .map(|p| estimate_from(&p.values, p.angle_rad, p.lag, cfg, params, Provenance::Coarse, 0))
        .collect();
    debug!(
        "coarse angles {:?}",
        coarse_bins.iter().map(|b| b.angle_deg()).collect::<Vec<_>>()
    );

    let mut report = EstimationReport {
        estimates: Vec::new(),
        coarse_estimates: coarse_estimates.clone(),
        coarse_bins: coarse_bins.clone(),
        coarse_ranges: coarse_ranges.clone(),
        log: Vec::new(),
        iterations: 1,
        iterations_to_converge: 1,
        converged: true,
    };
    if cfg.num_private() == 0 {
        info!("no private subcarriers; skipping virtual-array refinement");
        report.estimates = coarse_estimates;
        return Ok(report);
    }
    if coarse_bins.is_empty() || coarse_ranges.is_empty() {
        report.log.push(IterationRecord {
            iteration: 1,
            angles_deg: coarse_bins.iter().map(|b| b.angle_deg()).collect(),
            ranges_m: Vec::new(),
            support: Vec::new(),
        });
        return Ok(report);
    }

    let grid: Vec<f64> = angle_grid_deg(params.angle_grid_start_deg, params.angle_grid_stop_deg, params.angle_grid_step_deg)
        .into_iter()
        .map(f64::to_radians)
        .collect();
    let np = cube.dims().2.min(frames.len());
    let n_snap = params.ssr_snapshots.clamp(1, np.max(1));
    let symbols: Vec<usize> = (0..n_snap).map(|s| s * np / n_snap).collect();
    let snapshots = symbols
        .iter()
        .map(|&mu| build_va_snapshot(cube, frames, cfg, mu))
        .collect::<Result<Vec<_>>>()?;
    let noise_var = symbols.iter().map(|&mu| va_noise_var(frames, cfg, mu)).sum::<f64>() / n_snap as f64;

    let mut angles: Vec<f64> = coarse_bins.iter().map(|b| b.angle_rad).collect();
    let mut prev: Option<Vec<(usize, usize)>> = None;
    let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
    report.converged = false;
    let mut final_support: Vec<(usize, usize)> = Vec::new();
    for it in 1..=params.max_iterations.max(1) {
        let ranges = ranges_for(&mut cache, &angles, cfg, params);
        let lags: Vec<usize> = ranges.iter().map(|p| p.lag).collect();
        let ranges_m: Vec<f64> = lags.iter().map(|&l| l as f64 * res).collect();
        // Support as (grid index, lag) so that it is comparable across passes.
        let support: Vec<(usize, usize)> = if lags.is_empty() {
            Vec::new()
        } else {
            let problem = SsrProblem::new(snapshots.clone(), &grid, &ranges_m, cfg, params.wavelength_approx, noise_var)?;
            let sol = sparse_solve(&problem, &params.solver)?;
            let cells: Vec<(usize, usize, f64)> = sol
                .support
                .iter()
                .zip(&sol.amplitudes)
                .map(|(&c, amp)| {
                    let (a, r) = problem.column_cell(c);
                    (a, lags[r], amp.norm())
                })
                .collect();
            merge_adjacent_atoms(cells, params.atom_merge_steps)
        };
        for cell in &support {
            first_seen.entry(*cell).or_insert(it);
        }
        report.log.push(IterationRecord {
            iteration: it,
            angles_deg: angles.iter().map(|a| a.to_degrees()).collect(),
            ranges_m,
            support: support.iter().map(|&(a, l)| (grid[a].to_degrees(), l as f64 * res)).collect(),
        });
        report.iterations = it;
        let same = prev.as_ref() == Some(&support);
        if !same {
            report.iterations_to_converge = it;
        }
        final_support = support.clone();
        if same || support.is_empty() {
            report.converged = true;
            break;
        }
        let mut next: Vec<usize> = support.iter().map(|c| c.0).collect();
        next.dedup();
        angles = next.into_iter().map(|a| grid[a]).collect();
        prev = Some(support);
    }

    report.estimates = final_support
        .iter()
        .map(|&(a, lag)| {
            let values: Vec<C64> = cache.get(grid[a]).values.iter().map(|v| v[lag]).collect();
            let it = first_seen.get(&(a, lag)).copied().unwrap_or(report.iterations);
            estimate_from(&values, grid[a], lag, cfg, params, Provenance::SsrRefined, it)
        })
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::merge_adjacent_atoms;

    #[test]
    fn neighbours_on_the_same_lag_collapse() {
        let cells = vec![(10, 3, 1.0), (11, 3, 4.0), (12, 3, 0.5), (11, 4, 0.2), (20, 3, 0.3)];
        assert_eq!(merge_adjacent_atoms(cells.clone(), 1), vec![(11, 3), (11, 4), (20, 3)]);
        assert_eq!(merge_adjacent_atoms(cells, 0).len(), 5);
    }
}
