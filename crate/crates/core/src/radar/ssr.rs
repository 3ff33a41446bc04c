use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::RadarCube;
use crate::config::SystemConfig;
use crate::linalg::LeastSquares;
use crate::steering::check_angle;
use crate::waveform::SymbolFrame;
use crate::{C64, CMatrix, CVector, Error, Result};

/// Virtual-array snapshot of OFDM symbol `mu`.
///
/// For each private subcarrier i_j (owner n_j) and receive antenna m the
/// received symbol is divided by the known transmitted symbol, giving
/// z[m M + j] = sum_k beta_k e^{j 2 pi mu T_p f_dk} a_r(theta_k, i_j)[m]
/// a_t(theta_k, i_j)[n_j] exp(-j 2 pi i_j Δf 2 R_k / c) + noise.
pub fn build_va_snapshot(cube: &RadarCube, frames: &[SymbolFrame], cfg: &SystemConfig, mu: usize) -> Result<CVector> {
    let m_priv = cfg.num_private();
    if m_priv == 0 {
        return Err(Error::invalid("virtual-array snapshot needs at least one private subcarrier"));
    }
    let frame = frames
        .get(mu)
        .ok_or_else(|| Error::invalid(format!("no frame for symbol {mu}")))?;
    let nr = cube.dims().0;
    let mut z = CVector::zeros(nr * m_priv);
    for (j, a) in cfg.private_set.iter().enumerate() {
        let d = frame.transmit[(a.antenna, a.subcarrier)];
        if d.norm() == 0.0 {
            return Err(Error::Numerical(format!("private symbol on subcarrier {} is zero", a.subcarrier)));
        }
        let snap = cube.snapshot(a.subcarrier, mu);
        for m in 0..nr {
            z[m * m_priv + j] = snap[m] / d;
        }
    }
    Ok(z)
}

/// Noise variance of a virtual-array entry: sigma_r^2 / |d|^2 averaged over
/// the private symbols.
pub fn va_noise_var(frames: &[SymbolFrame], cfg: &SystemConfig, mu: usize) -> f64 {
    let Some(frame) = frames.get(mu) else { return 0.0 };
    let m = cfg.num_private();
    if m == 0 {
        return 0.0;
    }
    cfg.private_set
        .iter()
        .map(|a| cfg.radar_noise_var / frame.transmit[(a.antenna, a.subcarrier)].norm_sqr())
        .sum::<f64>()
        / m as f64
}

/// Angle x range dictionary for virtual-array sparse recovery.
///
/// Column `a * ranges.len() + r` models a target at `angles[a]`, `ranges[r]`.
/// Columns are stored with unit l2 norm; `norms` keeps the original norms so
/// amplitudes can be mapped back to target coefficients.
#[derive(Clone, Debug)]
pub struct SsrProblem {
    pub snapshots: Vec<CVector>,
    pub columns: CMatrix,
    pub norms: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub ranges_m: Vec<f64>,
    /// Per-entry noise variance of the snapshots (0 when unknown).
    pub noise_var: f64,
}

impl SsrProblem {
    pub fn num_columns(&self) -> usize {
        self.columns.ncols()
    }

    /// (angle index, range index) of a column.
    pub fn column_cell(&self, col: usize) -> (usize, usize) {
        (col / self.ranges_m.len(), col % self.ranges_m.len())
    }
}

/// Dictionary columns a_r(theta) kron (a_t^p(theta) . b(R)) over the grid.
///
/// With `wavelength_approx` every private subcarrier uses the carrier
/// wavelength in the array phases; otherwise each uses its own frequency.
pub fn build_ssr_dictionary(
    angles_rad: &[f64],
    ranges_m: &[f64],
    cfg: &SystemConfig,
    wavelength_approx: bool,
) -> Result<(CMatrix, Vec<f64>)> {
    if ranges_m.is_empty() || angles_rad.is_empty() {
        return Err(Error::invalid("dictionary needs at least one angle and one range"));
    }
    for &a in angles_rad {
        check_angle(a)?;
    }
    let (nr, mp) = (cfg.num_radar_rx, cfg.num_private());
    if mp == 0 {
        return Err(Error::invalid("dictionary needs at least one private subcarrier"));
    }
    let c = cfg.c();
    let n_rows = nr * mp;
    let mut cols = CMatrix::zeros(n_rows, angles_rad.len() * ranges_m.len());
    let mut norms = Vec::with_capacity(cols.ncols());
    for (ai, &theta) in angles_rad.iter().enumerate() {
        let s = theta.sin();
        for (ri, &r) in ranges_m.iter().enumerate() {
            let col = ai * ranges_m.len() + ri;
            for (j, p) in cfg.private_set.iter().enumerate() {
                let f = if wavelength_approx { cfg.carrier_freq_hz } else { cfg.subcarrier_freq(p.subcarrier) };
                let b = -2.0 * PI * p.subcarrier as f64 * cfg.subcarrier_spacing_hz * 2.0 * r / c;
                let tx = -2.0 * PI * p.antenna as f64 * cfg.tx_spacing_m * s * f / c;
                for m in 0..nr {
                    let rx = -2.0 * PI * m as f64 * cfg.radar_rx_spacing_m * s * f / c;
                    cols[(m * mp + j, col)] = C64::from_polar(1.0, rx + tx + b);
                }
            }
            let n = cols.column(col).norm();
            cols.column_mut(col).unscale_mut(n);
            norms.push(n);
        }
    }
    Ok((cols, norms))
}

impl SsrProblem {
    pub fn new(
        snapshots: Vec<CVector>,
        angles_rad: &[f64],
        ranges_m: &[f64],
        cfg: &SystemConfig,
        wavelength_approx: bool,
        noise_var: f64,
    ) -> Result<Self> {
        let (columns, norms) = build_ssr_dictionary(angles_rad, ranges_m, cfg, wavelength_approx)?;
        if snapshots.is_empty() || snapshots.iter().any(|z| z.len() != columns.nrows()) {
            return Err(Error::invalid(format!("snapshots must be non-empty with length {}", columns.nrows())));
        }
        Ok(Self {
            snapshots,
            columns,
            norms,
            angles_rad: angles_rad.to_vec(),
            ranges_m: ranges_m.to_vec(),
            noise_var,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Omp,
    Fista,
}

/// Sparse solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub kind: SolverKind,
    pub max_sparsity: usize,
    /// Stop once the residual energy per snapshot falls to this value.
    pub residual_tol: f64,
    /// False-alarm rate per column for the noise-floor stopping rule: greedy
    /// selection stops when no column correlates with the residual above
    /// ln(columns / false_alarm) times the noise floor.
    pub false_alarm: f64,
    /// After the greedy pass, swap atoms and add or drop atoms against the
    /// noise floor until the support settles.
    pub swap_refine: bool,
    /// Keep atoms whose amplitude is at least this fraction of the largest.
    pub amplitude_threshold: f64,
    /// l1 weight for the proximal solver; None derives it from the noise floor.
    pub l1_weight: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            kind: SolverKind::Omp,
            max_sparsity: 12,
            residual_tol: 0.0,
            false_alarm: 1e-3,
            swap_refine: true,
            amplitude_threshold: 0.1,
            l1_weight: None,
            max_iterations: 5000,
            tolerance: 1e-8,
        }
    }
}

/// Recovered support (column indices, ascending) with amplitudes for the
/// first snapshot, already divided by the column norms.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSolution {
    pub support: Vec<usize>,
    pub amplitudes: Vec<C64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Cached inner products for greedy selection. All quantities for a
/// support S come from A^H z_s and the Gram columns A^H a_t of the atoms in
/// S through the Cholesky factor of A_S^H A_S, so no residual vector is ever
/// formed.
struct Workspace<'a> {
    problem: &'a SsrProblem,
    /// A^H z_s, ncols x snapshots.
    corr0: CMatrix,
    z_energy: f64,
    gram: HashMap<usize, CVector>,
}

/// Projection data of one support: y = Q^H z_s (K x snapshots) and, when
/// requested, wq = Q^H A (K x ncols), with Q an orthonormal basis of A_S.
struct Fit {
    y: CMatrix,
    wq: Option<CMatrix>,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a SsrProblem) -> Self {
        let z = CMatrix::from_columns(&problem.snapshots);
        let corr0 = problem.columns.adjoint() * &z;
        let z_energy = z.norm_squared();
        Self { problem, corr0, z_energy, gram: HashMap::new() }
    }

    fn gram_col(&mut self, t: usize) -> &CVector {
        let cols = &self.problem.columns;
        self.gram.entry(t).or_insert_with(|| cols.adjoint() * cols.column(t))
    }

    fn fit(&mut self, support: &[usize], with_wq: bool) -> Option<Fit> {
        let k = support.len();
        let ns = self.corr0.ncols();
        let ncols = self.corr0.nrows();
        if k == 0 {
            return Some(Fit { y: CMatrix::zeros(0, ns), wq: with_wq.then(|| CMatrix::zeros(0, ncols)) });
        }
        for &t in support {
            self.gram_col(t);
        }
        let g = &self.gram;
        // M[p][q] = a_{S_p}^H a_{S_q} = (A^H a_{S_q})[S_p]
        let m = CMatrix::from_fn(k, k, |p, q| g[&support[q]][support[p]]);
        let l = nalgebra::linalg::Cholesky::new(m)?.unpack();
        let cs = CMatrix::from_fn(k, ns, |p, s| self.corr0[(support[p], s)]);
        let y = l.solve_lower_triangular(&cs)?;
        let wq = if with_wq {
            let x = CMatrix::from_fn(k, ncols, |p, j| g[&support[p]][j].conj());
            Some(l.solve_lower_triangular(&x)?)
        } else {
            None
        };
        if !y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return None;
        }
        Some(Fit { y, wq })
    }

    /// Residual energy summed over snapshots after projecting out `support`.
    fn residual_energy(&mut self, support: &[usize]) -> f64 {
        match self.fit(support, false) {
            Some(f) => (self.z_energy - f.y.norm_squared()).max(0.0),
            None => f64::INFINITY,
        }
    }

    /// Correlation energy of every column with the residuals of `support`;
    /// with `normalized`, divided by the column energy the support leaves.
    fn gains(&mut self, support: &[usize], normalized: bool) -> Option<Vec<f64>> {
        let fit = self.fit(support, true)?;
        let wq = fit.wq.as_ref().expect("requested");
        let k = support.len();
        let ns = self.corr0.ncols();
        Some(
            (0..self.corr0.nrows())
                .map(|j| {
                    let mut e = 0.0;
                    for s in 0..ns {
                        let mut v = self.corr0[(j, s)];
                        for p in 0..k {
                            v -= wq[(p, j)].conj() * fit.y[(p, s)];
                        }
                        e += v.norm_sqr();
                    }
                    if !normalized || k == 0 {
                        return e;
                    }
                    let left = 1.0 - (0..k).map(|p| wq[(p, j)].norm_sqr()).sum::<f64>();
                    if left < 1e-10 {
                        0.0
                    } else {
                        e / left
                    }
                })
                .collect(),
        )
    }
}

fn argmax(v: &[f64], exclude: &[usize]) -> Option<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(j, _)| !exclude.contains(j))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, x)| (j, *x))
}

fn noise_floor(problem: &SsrProblem, params: &SolverParams) -> f64 {
    let gamma = (problem.num_columns() as f64 / params.false_alarm.clamp(1e-300, 1.0)).ln().max(1.0);
    gamma * problem.noise_var * problem.snapshots.len() as f64
}

fn omp(ws: &mut Workspace, params: &SolverParams) -> (Vec<usize>, usize) {
    let problem = ws.problem;
    let floor = noise_floor(problem, params);
    let n_snap = problem.snapshots.len() as f64;
    let limit = params.max_sparsity.min(problem.columns.nrows().saturating_sub(1));
    let mut support = Vec::new();
    let mut iterations = 0;
    let total = ws.z_energy;
    while support.len() < limit {
        let res = ws.residual_energy(&support);
        if res / n_snap <= params.residual_tol || res <= 1e-24 * total.max(1e-300) {
            break;
        }
        let Some(corr) = ws.gains(&support, false) else { break };
        let Some((j, c)) = argmax(&corr, &support) else { break };
        if c <= floor || c <= 1e-20 * total {
            break;
        }
        iterations += 1;
        support.push(j);
    }
    (support, iterations)
}

/// Replace one atom at a time by the column that best explains what the
/// other atoms leave unexplained, until no replacement helps.
fn swap_pass(ws: &mut Workspace, support: &mut [usize]) {
    if support.len() < 2 {
        return;
    }
    for _ in 0..10 * support.len() {
        let mut changed = false;
        for p in 0..support.len() {
            let others: Vec<usize> = support.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, j)| *j).collect();
            let Some(gain) = ws.gains(&others, true) else { continue };
            let Some((best, g)) = argmax(&gain, &others) else { continue };
            if best != support[p] && g > gain[support[p]] * (1.0 + 1e-9) {
                support[p] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Alternate swaps with removal of atoms that explain less than the noise
/// floor and addition of atoms that explain more, until the support settles.
fn stepwise_refine(ws: &mut Workspace, params: &SolverParams, support: &mut Vec<usize>) {
    let problem = ws.problem;
    let floor = noise_floor(problem, params);
    let limit = params.max_sparsity.min(problem.columns.nrows().saturating_sub(1));
    for _ in 0..4 * limit.max(1) {
        swap_pass(ws, support);
        let full = ws.residual_energy(support);
        let weakest = (0..support.len())
            .map(|p| {
                let mut rest = support.clone();
                rest.remove(p);
                (p, ws.residual_energy(&rest) - full)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((p, loss)) = weakest {
            if loss < floor {
                support.remove(p);
                continue;
            }
        }
        if support.len() < limit {
            if let Some(gain) = ws.gains(support, true) {
                if let Some((j, g)) = argmax(&gain, support) {
                    if g > floor && g > 1e-20 * full.max(1e-300) {
                        support.push(j);
                        continue;
                    }
                }
            }
        }
        break;
    }
}

fn fista(problem: &SsrProblem, params: &SolverParams) -> Result<(Vec<usize>, usize)> {
    let a = &problem.columns;
    let n = a.ncols();
    let s = problem.snapshots.len();
    let zs = CMatrix::from_columns(&problem.snapshots);
    let lipschitz = {
        // Power iteration for ||A||_2^2.
        let mut v = CVector::from_element(n, C64::new(1.0, 0.0));
        let mut l = 0.0;
        for _ in 0..100 {
            let w = a.adjoint() * (a * &v);
            l = w.norm();
            if l == 0.0 {
                break;
            }
            v = w / C64::new(l, 0.0);
        }
        l.max(1e-300)
    };
    let ahz = a.adjoint() * &zs;
    let lambda = params.l1_weight.unwrap_or_else(|| {
        let floor = noise_floor(problem, params) / s as f64;
        if floor > 0.0 {
            floor.sqrt()
        } else {
            1e-3 * ahz.iter().map(|v| v.norm()).fold(0.0, f64::max)
        }
    });
    let step = 1.0 / lipschitz;
    let mut x = CMatrix::zeros(n, s);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let aha = a.adjoint() * a;
    for it in 1..=params.max_iterations {
        let grad = &aha * &y - &ahz;
        let mut next = &y - grad * C64::new(step, 0.0);
        // Row-wise (group) soft threshold.
        for mut row in next.row_iter_mut() {
            let nrm = row.norm();
            let keep = if nrm > 0.0 { (1.0 - lambda * step / nrm).max(0.0) } else { 0.0 };
            row *= C64::new(keep, 0.0);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let delta = (&next - &x).norm();
        let scale = next.norm().max(1e-300);
        y = &next + (&next - &x) * C64::new((t - 1.0) / t_next, 0.0);
        x = next;
        t = t_next;
        if delta <= params.tolerance * scale {
            let strength: Vec<f64> = x.row_iter().map(|r| r.norm()).collect();
            let max = strength.iter().cloned().fold(0.0, f64::max);
            let support = (0..n).filter(|&j| max > 0.0 && strength[j] > 1e-6 * max).collect();
            return Ok((support, it));
        }
    }
    let residual = (&zs - a * &x).norm();
    Err(Error::NotConverged { iterations: params.max_iterations, residual })
}

/// Sparse recovery of the snapshots over the dictionary.
///
/// The greedy solver adds the column with the largest correlation energy
/// until the noise-floor rule, `residual_tol` or `max_sparsity` stops it,
/// then optionally refines the support by swaps. The proximal solver runs
/// FISTA on the group-l1 problem. Both finish with least-squares amplitudes
/// on the support, dropping atoms weaker than `amplitude_threshold` times the
/// strongest.
pub fn sparse_solve(problem: &SsrProblem, params: &SolverParams) -> Result<SparseSolution> {
    if params.max_sparsity >= problem.columns.nrows() {
        return Err(Error::invalid(format!(
            "max_sparsity {} must be below the {} measurements",
            params.max_sparsity,
            problem.columns.nrows()
        )));
    }
    let (mut support, iterations) = match params.kind {
        SolverKind::Omp => {
            let mut ws = Workspace::new(problem);
            let (mut support, it) = omp(&mut ws, params);
            if params.swap_refine {
                stepwise_refine(&mut ws, params, &mut support);
            }
            (support, it)
        }
        SolverKind::Fista => fista(problem, params)?,
    };
    support.sort_unstable();
    support.dedup();
    if support.len() > params.max_sparsity {
        // Keep the strongest atoms when the proximal solver is too dense.
        let amps = ls_amplitudes(problem, &support)?;
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| amps[b].total_cmp(&amps[a]));
        let mut kept: Vec<usize> = order.into_iter().take(params.max_sparsity).map(|k| support[k]).collect();
        kept.sort_unstable();
        support = kept;
    }
    loop {
        if support.is_empty() {
            break;
        }
        let strength = ls_amplitudes(problem, &support)?;
        let max = strength.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = support
            .iter()
            .zip(&strength)
            .filter(|(_, s)| **s >= params.amplitude_threshold * max)
            .map(|(j, _)| *j)
            .collect();
        if keep.len() == support.len() {
            break;
        }
        support = keep;
    }
    let (amplitudes, residual_norm) = if support.is_empty() {
        (Vec::new(), problem.snapshots[0].norm())
    } else {
        let sub = problem.columns.select_columns(&support);
        let ls = LeastSquares::new(&sub)?;
        let x = ls.solve(&problem.snapshots[0]);
        let res = (&problem.snapshots[0] - &sub * &x).norm();
        (support.iter().zip(x.iter()).map(|(j, v)| v / problem.norms[*j]).collect(), res)
    };
    Ok(SparseSolution { support, amplitudes, residual_norm, iterations })
}

/// RMS (over snapshots) least-squares amplitude of each support atom, in
/// normalized-column units.
fn ls_amplitudes(problem: &SsrProblem, support: &[usize]) -> Result<Vec<f64>> {
    let sub = problem.columns.select_columns(support);
    let ls = LeastSquares::new(&sub)?;
    let mut acc = vec![0.0; support.len()];
    for z in &problem.snapshots {
        let x = ls.solve(z);
        for (a, v) in acc.iter_mut().zip(x.iter()) {
            *a += v.norm_sqr();
        }
    }
    Ok(acc.into_iter().map(|a| (a / problem.snapshots.len() as f64).sqrt()).collect())
}
