use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::PrecoderProblem;
use crate::{C64, CMatrix, Error, Result};

/// Adam settings. Each learning rate is an independent restart from the same
/// initial precoder; the restart with the lowest final loss wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub learning_rates: Vec<f64>,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale P to ||P||_F^2 = N_t after every step.
    pub renormalize: bool,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.02, 0.01, 0.005],
            steps: 150,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            renormalize: false,
        }
    }
}

/// Optimized precoder with its history.
///
/// Traces have `steps + 1` entries: index 0 is the initial precoder.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderState {
    pub p: CMatrix,
    pub loss_trace: Vec<f64>,
    pub error_trace: Vec<f64>,
    pub snr_db_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub learning_rate: f64,
    pub alpha_b: f64,
    pub alpha_snr: f64,
    pub steps: usize,
    /// First and second moment estimates after the last step; the second
    /// moment of the real and imaginary parts is stored in re / im.
    pub moment1: CMatrix,
    pub moment2: CMatrix,
    /// Final loss of every restart, in learning-rate order.
    pub restarts: Vec<(f64, f64)>,
}

impl PrecoderState {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace never empty")
    }
}

fn run_one(p0: &CMatrix, problem: &PrecoderProblem, params: &AdamParams, lr: f64) -> Result<PrecoderState> {
    let nt = p0.nrows();
    let mut p = p0.clone();
    let mut m = CMatrix::zeros(p.nrows(), p.ncols());
    let mut v = CMatrix::zeros(p.nrows(), p.ncols());
    let mut st = PrecoderState {
        p: p.clone(),
        loss_trace: Vec::with_capacity(params.steps + 1),
        error_trace: Vec::with_capacity(params.steps + 1),
        snr_db_trace: Vec::with_capacity(params.steps + 1),
        grad_norm_trace: Vec::with_capacity(params.steps + 1),
        learning_rate: lr,
        alpha_b: problem.alpha_b,
        alpha_snr: problem.alpha_snr,
        steps: params.steps,
        moment1: m.clone(),
        moment2: v.clone(),
        restarts: Vec::new(),
    };
    let record = |st: &mut PrecoderState, p: &CMatrix, g: &CMatrix| -> Result<()> {
        let parts = problem.evaluate(p)?;
        st.loss_trace.push(parts.loss);
        st.error_trace.push(parts.beampattern_error);
        st.snr_db_trace.push(parts.snr_db());
        st.grad_norm_trace.push(g.norm());
        if !parts.loss.is_finite() || p.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite loss at step {} (lr {lr}); loss trace so far: {:?}",
                st.loss_trace.len() - 1,
                st.loss_trace
            )));
        }
        Ok(())
    };
    let mut g = problem.gradient(&p)?;
    record(&mut st, &p, &g)?;
    for t in 1..=params.steps {
        // Real gradient of the loss: 2 dL/dP*, split into re / im.
        let bc1 = 1.0 - params.beta1.powi(t as i32);
        let bc2 = 1.0 - params.beta2.powi(t as i32);
        for k in 0..p.len() {
            let gr = 2.0 * g[k].re;
            let gi = 2.0 * g[k].im;
            let mk = params.beta1 * m[k] + (1.0 - params.beta1) * C64::new(gr, gi);
            let vk = params.beta2 * v[k] + (1.0 - params.beta2) * C64::new(gr * gr, gi * gi);
            m[k] = mk;
            v[k] = vk;
            let step_re = lr * (mk.re / bc1) / ((vk.re / bc2).sqrt() + params.epsilon);
            let step_im = lr * (mk.im / bc1) / ((vk.im / bc2).sqrt() + params.epsilon);
            p[k] -= C64::new(step_re, step_im);
        }
        if params.renormalize {
            let n = p.norm();
            if n > 0.0 {
                p *= C64::new((nt as f64).sqrt() / n, 0.0);
            }
        }
        g = problem.gradient(&p)?;
        record(&mut st, &p, &g)?;
    }
    st.p = p;
    st.moment1 = m;
    st.moment2 = v;
    Ok(st)
}

/// Minimize the co-design loss from `p0` with Adam, one run per learning rate.
///
/// The complex gradient is treated as a real vector of dimension 2 N_t^2.
/// Restarts run in parallel; a non-finite loss aborts with the trace so far.
pub fn adam_optimize(p0: &CMatrix, problem: &PrecoderProblem, params: &AdamParams) -> Result<PrecoderState> {
    if params.steps == 0 {
        return Err(Error::invalid("Adam needs at least one step"));
    }
    if params.learning_rates.is_empty() || params.learning_rates.iter().any(|lr| !(*lr > 0.0)) {
        return Err(Error::invalid("learning rates must be positive and non-empty"));
    }
    let runs: Vec<Result<PrecoderState>> = params
        .learning_rates
        .par_iter()
        .map(|&lr| run_one(p0, problem, params, lr))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let restarts: Vec<(f64, f64)> = runs.iter().map(|r| (r.learning_rate, r.final_loss())).collect();
    let mut best = runs
        .into_iter()
        .min_by(|a, b| a.final_loss().total_cmp(&b.final_loss()))
        .expect("at least one restart");
    best.restarts = restarts;
    Ok(best)
}

/// Per-step CSV: step, loss, beampattern_error, snr_db, grad_norm.
pub fn write_trace_csv(state: &PrecoderState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "loss", "beampattern_error", "snr_db", "grad_norm"])?;
    for k in 0..state.loss_trace.len() {
        w.write_record(&[
            k.to_string(),
            state.loss_trace[k].to_string(),
            state.error_trace[k].to_string(),
            state.snr_db_trace[k].to_string(),
            state.grad_norm_trace[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
