use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::channel::CommChannel;
use crate::config::SystemConfig;
use crate::steering::{check_angle, ula_response};
use crate::{C64, CMatrix, Error, Result};

/// Desired transmit power over an angle grid, with per-angle weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeampatternSpec {
    pub angles_rad: Vec<f64>,
    pub desired: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BeampatternSpec {
    pub fn new(angles_rad: Vec<f64>, desired: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if angles_rad.len() < 2 {
            return Err(Error::invalid("beampattern grid needs at least two angles"));
        }
        if desired.len() != angles_rad.len() || weights.len() != angles_rad.len() {
            return Err(Error::invalid("beampattern grid, desired power and weights differ in length"));
        }
        if desired.iter().chain(&weights).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("desired power and weights must be finite and non-negative"));
        }
        for &a in &angles_rad {
            check_angle(a)?;
        }
        Ok(Self { angles_rad, desired, weights })
    }

    /// `level` inside any of the closed `bands_deg`, 0 elsewhere, unit
    /// weights, on a grid from `start_deg` to `stop_deg` in `step_deg` steps.
    pub fn bands(start_deg: f64, stop_deg: f64, step_deg: f64, bands_deg: &[(f64, f64)], level: f64) -> Result<Self> {
        let grid = crate::radar::angle_grid_deg(start_deg, stop_deg, step_deg);
        let desired = grid
            .iter()
            .map(|a| if in_bands(*a, bands_deg) { level } else { 0.0 })
            .collect();
        let w = vec![1.0; grid.len()];
        Self::new(grid.iter().map(|a| a.to_radians()).collect(), desired, w)
    }

    /// One-degree grid over [-90, 90] with unit power on [-52, -37] and
    /// [29, 31] degrees.
    pub fn two_band_default() -> Self {
        Self::bands(-90.0, 90.0, 1.0, &[(-52.0, -37.0), (29.0, 31.0)], 1.0).expect("static spec is valid")
    }

    pub fn in_band(&self) -> Vec<bool> {
        self.desired.iter().map(|d| *d > 0.0).collect()
    }
}

fn in_bands(a: f64, bands: &[(f64, f64)]) -> bool {
    bands.iter().any(|(lo, hi)| a >= lo - 1e-9 && a <= hi + 1e-9)
}

/// B_g = (1/N_s) sum_i conj(a_t(theta_g, i)) a_t(theta_g, i)^T, so that the
/// transmitted power towards theta_g is tr(P^H B_g P).
fn pattern_kernels(angles: &[f64], cfg: &SystemConfig) -> Vec<CMatrix> {
    let nt = cfg.num_tx;
    let ns = cfg.num_subcarriers;
    let c = cfg.c();
    angles
        .iter()
        .map(|&theta| {
            let s = theta.sin();
            // Entry (n, n') depends on n - n' only; accumulate by difference.
            let mut diff = vec![C64::new(0.0, 0.0); 2 * nt - 1];
            for i in 0..ns {
                let a = ula_response(nt, cfg.tx_spacing_m, s, cfg.subcarrier_freq(i), c);
                for d in 0..nt {
                    // conj(a_n) a_n' with n - n' = d  ->  conj(a_d)
                    diff[nt - 1 + d] += a[d].conj();
                }
            }
            for d in 1..nt {
                diff[nt - 1 - d] = diff[nt - 1 + d].conj();
            }
            CMatrix::from_fn(nt, nt, |n, m| diff[(nt - 1 + n) - m] / ns as f64)
        })
        .collect()
}

fn quad(p: &CMatrix, b: &CMatrix) -> f64 {
    // tr(P^H B P), real for Hermitian B.
    let bp = b * p;
    p.iter().zip(bp.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Transmitted power towards each angle, (1/N_s) sum_i ||P^T a_t(theta, i)||^2,
/// assuming white unit-power source symbols.
pub fn beampattern(p: &CMatrix, cfg: &SystemConfig, angles_rad: &[f64]) -> Vec<f64> {
    pattern_kernels(angles_rad, cfg).iter().map(|b| quad(p, b)).collect()
}

/// Beampattern of one realized symbol matrix Q: (1/N_s) sum_i |a_t^T P q_i|^2.
pub fn beampattern_instantaneous(p: &CMatrix, q: &CMatrix, cfg: &SystemConfig, angles_rad: &[f64]) -> Vec<f64> {
    let pq = p * q;
    let c = cfg.c();
    angles_rad
        .iter()
        .map(|&theta| {
            let s = theta.sin();
            (0..cfg.num_subcarriers)
                .map(|i| {
                    let a = ula_response(cfg.num_tx, cfg.tx_spacing_m, s, cfg.subcarrier_freq(i), c);
                    a.iter().zip(pq.column(i).iter()).map(|(x, y)| x * y).sum::<C64>().norm_sqr()
                })
                .sum::<f64>()
                / cfg.num_subcarriers as f64
        })
        .collect()
}

/// Weighted squared error sum_g gamma_g (p(theta_g) - p_hat(theta_g))^2.
pub fn beampattern_error(p: &CMatrix, spec: &BeampatternSpec, cfg: &SystemConfig) -> f64 {
    let achieved = beampattern(p, cfg, &spec.angles_rad);
    weighted_error(&achieved, spec)
}

fn weighted_error(achieved: &[f64], spec: &BeampatternSpec) -> f64 {
    achieved
        .iter()
        .zip(&spec.desired)
        .zip(&spec.weights)
        .map(|((a, d), w)| w * (d - a).powi(2))
        .sum()
}

/// Mean achieved power on in-band angles over mean power elsewhere.
pub fn band_power_ratio(p: &CMatrix, spec: &BeampatternSpec, cfg: &SystemConfig) -> f64 {
    let bp = beampattern(p, cfg, &spec.angles_rad);
    let (mut inb, mut nin, mut out, mut nout) = (0.0, 0, 0.0, 0);
    for (v, d) in bp.iter().zip(&spec.desired) {
        if *d > 0.0 {
            inb += v;
            nin += 1;
        } else {
            out += v;
            nout += 1;
        }
    }
    (inb / nin.max(1) as f64) / (out / nout.max(1) as f64)
}

/// Fixed pieces of the co-design loss for one configuration, spec and
/// channel.
///
/// The expected received signal power is tr(P^H C P) with
/// C = sum_{shared i} H_i^H H_i + kappa I, where kappa = sum over private
/// subcarriers of ||h_{n_i}||^2: a private column carries one symbol scaled by
/// ||P||_F on its owner antenna.
#[derive(Clone, Debug)]
pub struct PrecoderProblem {
    pub spec: BeampatternSpec,
    pub alpha_b: f64,
    pub alpha_snr: f64,
    kernels: Vec<CMatrix>,
    signal: CMatrix,
    noise: f64,
}

/// Loss value with its two terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub loss: f64,
    pub beampattern_error: f64,
    pub snr: f64,
}

impl LossParts {
    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }
}

impl PrecoderProblem {
    pub fn new(spec: BeampatternSpec, channel: &CommChannel, cfg: &SystemConfig, alpha_b: f64, alpha_snr: f64) -> Result<Self> {
        if !(alpha_b >= 0.0 && alpha_snr >= 0.0) {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        if !(cfg.comm_noise_var > 0.0) {
            return Err(Error::invalid("communication SNR needs a positive noise variance"));
        }
        if channel.h.len() != cfg.num_subcarriers {
            return Err(Error::invalid(format!(
                "channel has {} subcarriers, config {}",
                channel.h.len(),
                cfg.num_subcarriers
            )));
        }
        let nt = cfg.num_tx;
        let owners = cfg.owner_table();
        let mut signal = CMatrix::zeros(nt, nt);
        let mut kappa = 0.0;
        for (h, owner) in channel.h.iter().zip(&owners) {
            if h.ncols() != nt {
                return Err(Error::invalid(format!("channel has {} transmit columns, expected {nt}", h.ncols())));
            }
            match owner {
                Some(n) => kappa += h.column(*n).norm_squared(),
                None => signal += h.adjoint() * h,
            }
        }
        for n in 0..nt {
            signal[(n, n)] += C64::new(kappa, 0.0);
        }
        Ok(Self {
            kernels: pattern_kernels(&spec.angles_rad, cfg),
            spec,
            alpha_b,
            alpha_snr,
            signal,
            noise: cfg.num_subcarriers as f64 * cfg.comm_noise_var,
        })
    }

    pub fn beampattern(&self, p: &CMatrix) -> Vec<f64> {
        self.kernels.iter().map(|b| quad(p, b)).collect()
    }

    pub fn snr(&self, p: &CMatrix) -> f64 {
        quad(p, &self.signal) / self.noise
    }

    pub fn evaluate(&self, p: &CMatrix) -> Result<LossParts> {
        let err = weighted_error(&self.beampattern(p), &self.spec);
        let snr = self.snr(p);
        let snr_term = if self.alpha_snr == 0.0 {
            0.0
        } else if snr > 0.0 {
            -self.alpha_snr * 10.0 * snr.log10()
        } else {
            return Err(Error::Numerical("communication SNR is zero; loss diverges".into()));
        };
        Ok(LossParts { loss: self.alpha_b * err + snr_term, beampattern_error: err, snr })
    }

    /// dL/dP* (conjugate Wirtinger gradient). The gradient with respect to
    /// the real and imaginary parts of P is twice its real and imaginary
    /// parts.
    pub fn gradient(&self, p: &CMatrix) -> Result<CMatrix> {
        let nt = p.nrows();
        let mut g = CMatrix::zeros(nt, p.ncols());
        if self.alpha_b != 0.0 {
            let achieved = self.beampattern(p);
            let mut acc = CMatrix::zeros(nt, nt);
            for ((b, a), (d, w)) in self.kernels.iter().zip(&achieved).zip(self.spec.desired.iter().zip(&self.spec.weights)) {
                let coef = 2.0 * w * (a - d);
                if coef != 0.0 {
                    acc += b * C64::new(coef, 0.0);
                }
            }
            g += acc * p * C64::new(self.alpha_b, 0.0);
        }
        if self.alpha_snr != 0.0 {
            let s = quad(p, &self.signal);
            if !(s > 0.0) {
                return Err(Error::Numerical("communication SNR is zero; gradient undefined".into()));
            }
            g -= &self.signal * p * C64::new(self.alpha_snr * 10.0 / LN_10 / s, 0.0);
        }
        Ok(g)
    }
}

/// Expected communication SNR (linear) of precoder `p` over `channel`.
pub fn comm_snr(p: &CMatrix, channel: &CommChannel, cfg: &SystemConfig) -> Result<f64> {
    let spec = BeampatternSpec::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0])?;
    Ok(PrecoderProblem::new(spec, channel, cfg, 0.0, 0.0)?.snr(p))
}

/// alpha_b * beampattern_error + alpha_snr * 10 log10(1 / SNR).
pub fn loss(
    p: &CMatrix,
    spec: &BeampatternSpec,
    channel: &CommChannel,
    alpha_b: f64,
    alpha_snr: f64,
    cfg: &SystemConfig,
) -> Result<f64> {
    Ok(PrecoderProblem::new(spec.clone(), channel, cfg, alpha_b, alpha_snr)?.evaluate(p)?.loss)
}

pub fn loss_gradient(
    p: &CMatrix,
    spec: &BeampatternSpec,
    channel: &CommChannel,
    alpha_b: f64,
    alpha_snr: f64,
    cfg: &SystemConfig,
) -> Result<CMatrix> {
    PrecoderProblem::new(spec.clone(), channel, cfg, alpha_b, alpha_snr)?.gradient(p)
}
