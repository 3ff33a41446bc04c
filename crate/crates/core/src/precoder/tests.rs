use super::*;
use crate::channel::{build_comm_channel, CommChannel, CommGeometry, ScattererLaw};
use crate::config::SystemConfig;
use crate::rng::{child_rng, complex_normal, Stream};
use crate::{C64, CMatrix};

fn small_cfg(nt: usize, m: usize) -> SystemConfig {
    let mut c = SystemConfig::reference_config(nt, m);
    c.num_subcarriers = 16;
    c.num_comm_rx = 2 * nt;
    c
}

fn identity_channel(cfg: &SystemConfig) -> CommChannel {
    CommChannel {
        h: vec![CMatrix::identity(cfg.num_tx, cfg.num_tx); cfg.num_subcarriers],
        geometry: CommGeometry { range_m: 0.0, departure_rad: 0.0, incidence_rad: 0.0 },
        beta: C64::new(1.0, 0.0),
        scatterers: Vec::new(),
    }
}

fn random_channel(cfg: &SystemConfig, seed: u64) -> CommChannel {
    let g = CommGeometry { range_m: 50.0, departure_rad: 0.5, incidence_rad: -0.7 };
    build_comm_channel(cfg, g, &ScattererLaw::default(), &mut child_rng(seed, Stream::Channel, 0)).unwrap()
}

fn random_p(nt: usize, seed: u64) -> CMatrix {
    let mut rng = child_rng(seed, Stream::Precoder, 0);
    CMatrix::from_fn(nt, nt, |_, _| complex_normal(&mut rng, 1.0))
}

fn grid() -> Vec<f64> {
    (-80..=80).step_by(10).map(|d| (d as f64).to_radians()).collect()
}

#[test]
fn identity_pattern_is_flat_at_nt() {
    let cfg = small_cfg(6, 0);
    for v in beampattern(&CMatrix::identity(6, 6), &cfg, &grid()) {
        assert!((v - 6.0).abs() < 1e-9, "{v}");
    }
}

#[test]
fn single_element_pattern_is_isotropic() {
    let cfg = small_cfg(5, 0);
    let mut p = CMatrix::zeros(5, 5);
    p[(4, 4)] = C64::new(1.0, 0.0);
    for v in beampattern(&p, &cfg, &grid()) {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pattern_scales_quadratically_and_is_non_negative() {
    let cfg = small_cfg(4, 0);
    let p = random_p(4, 1);
    let a = C64::new(0.3, -1.2);
    let base = beampattern(&p, &cfg, &grid());
    let scaled = beampattern(&(&p * a), &cfg, &grid());
    for (b, s) in base.iter().zip(&scaled) {
        assert!(*b >= 0.0);
        assert!((s - a.norm_sqr() * b).abs() < 1e-9 * s.abs().max(1.0));
    }
}

#[test]
fn expected_pattern_matches_average_of_instantaneous_patterns() {
    let cfg = small_cfg(4, 0);
    let p = random_p(4, 2);
    let g = grid();
    let expected = beampattern(&p, &cfg, &g);
    let trials = 400;
    let mut avg = vec![0.0; g.len()];
    let mut rng = child_rng(3, Stream::Bits, 0);
    for _ in 0..trials {
        let q = CMatrix::from_fn(4, cfg.num_subcarriers, |_, _| complex_normal(&mut rng, 1.0));
        for (a, v) in avg.iter_mut().zip(beampattern_instantaneous(&p, &q, &cfg, &g)) {
            *a += v / trials as f64;
        }
    }
    for (a, e) in avg.iter().zip(&expected) {
        assert!((a - e).abs() < 0.1 * e.max(1.0), "{a} vs {e}");
    }
}

#[test]
fn beampattern_error_cases() {
    let cfg = small_cfg(4, 0);
    let g = grid();
    let n = g.len();
    let p = random_p(4, 4);
    let achieved = beampattern(&p, &cfg, &g);
    let exact = BeampatternSpec::new(g.clone(), achieved, vec![1.0; n]).unwrap();
    assert!(beampattern_error(&p, &exact, &cfg) < 1e-18);
    let unweighted = BeampatternSpec::new(g.clone(), vec![0.0; n], vec![0.0; n]).unwrap();
    assert_eq!(beampattern_error(&p, &unweighted, &cfg), 0.0);
    let eye = CMatrix::identity(4, 4);
    let flat = BeampatternSpec::new(g.clone(), vec![4.0; n], vec![1.0; n]).unwrap();
    assert!(beampattern_error(&eye, &flat, &cfg) < 1e-15);
    let zero = BeampatternSpec::new(g, vec![0.0; n], vec![1.0; n]).unwrap();
    assert!((beampattern_error(&eye, &zero, &cfg) - (n * 16) as f64).abs() < 1e-8);
}

#[test]
fn spec_validation() {
    assert!(BeampatternSpec::new(vec![0.0], vec![1.0], vec![1.0]).is_err());
    assert!(BeampatternSpec::new(vec![0.0, 0.1], vec![1.0], vec![1.0, 1.0]).is_err());
    assert!(BeampatternSpec::new(vec![0.0, 0.1], vec![-1.0, 0.0], vec![1.0, 1.0]).is_err());
    let s = BeampatternSpec::two_band_default();
    assert_eq!(s.angles_rad.len(), 181);
    assert_eq!(s.in_band().iter().filter(|b| **b).count(), 16 + 3);
}

#[test]
fn snr_with_identity_channel_is_nt() {
    let cfg = small_cfg(4, 0);
    let ch = identity_channel(&cfg);
    assert!((comm_snr(&CMatrix::identity(4, 4), &ch, &cfg).unwrap() - 4.0).abs() < 1e-12);
    let p = random_p(4, 5);
    let a = C64::new(-2.0, 0.5);
    let s1 = comm_snr(&p, &ch, &cfg).unwrap();
    let s2 = comm_snr(&(&p * a), &ch, &cfg).unwrap();
    assert!((s2 - a.norm_sqr() * s1).abs() < 1e-9 * s2);
}

#[test]
fn zero_channel_gives_zero_snr_and_loss_error() {
    let cfg = small_cfg(3, 0);
    let mut ch = identity_channel(&cfg);
    for h in &mut ch.h {
        h.fill(C64::new(0.0, 0.0));
    }
    let p = CMatrix::identity(3, 3);
    assert_eq!(comm_snr(&p, &ch, &cfg).unwrap(), 0.0);
    let spec = BeampatternSpec::new(grid(), vec![0.0; 17], vec![1.0; 17]).unwrap();
    assert!(matches!(loss(&p, &spec, &ch, 1e-4, 0.8, &cfg), Err(crate::Error::Numerical(_))));
}

#[test]
fn zero_noise_variance_is_rejected() {
    let mut cfg = small_cfg(3, 0);
    cfg.comm_noise_var = 0.0;
    assert!(comm_snr(&CMatrix::identity(3, 3), &identity_channel(&cfg), &cfg).is_err());
}

#[test]
fn private_subcarrier_power_counts_through_frobenius_norm() {
    let cfg = small_cfg(3, 2);
    let ch = random_channel(&cfg, 6);
    let p = random_p(3, 7);
    let mut expected = 0.0;
    for (i, h) in ch.h.iter().enumerate() {
        expected += match cfg.private_owner(i) {
            Some(n) => p.norm_squared() * h.column(n).norm_squared(),
            None => (h * &p).norm_squared(),
        };
    }
    expected /= cfg.num_subcarriers as f64 * cfg.comm_noise_var;
    let got = comm_snr(&p, &ch, &cfg).unwrap();
    assert!((got - expected).abs() < 1e-9 * expected);
}

#[test]
fn loss_reductions() {
    let cfg = small_cfg(4, 0);
    let ch = random_channel(&cfg, 8);
    let p = random_p(4, 9);
    let g = grid();
    let spec = BeampatternSpec::new(g.clone(), vec![1.0; g.len()], vec![1.0; g.len()]).unwrap();
    let snr = comm_snr(&p, &ch, &cfg).unwrap();
    let l = loss(&p, &spec, &ch, 0.0, 0.8, &cfg).unwrap();
    assert!((l + 0.8 * 10.0 * snr.log10()).abs() < 1e-12);
    let exact = BeampatternSpec::new(g.clone(), beampattern(&p, &cfg, &g), vec![1.0; g.len()]).unwrap();
    assert!(loss(&p, &exact, &ch, 1.0, 0.0, &cfg).unwrap().abs() < 1e-18);
}

/// Central differences of the loss along the real and imaginary part of
/// every entry; returns max |2G - fd| / max|fd|.
fn fd_mismatch(problem: &PrecoderProblem, p: &CMatrix) -> f64 {
    let g = problem.gradient(p).unwrap();
    let h = 1e-6;
    let f = |q: &CMatrix| problem.evaluate(q).unwrap().loss;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for k in 0..p.len() {
        for (dir, analytic) in [(C64::new(h, 0.0), 2.0 * g[k].re), (C64::new(0.0, h), 2.0 * g[k].im)] {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[k] += dir;
            minus[k] -= dir;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            worst = worst.max((fd - analytic).abs());
            scale = scale.max(fd.abs());
        }
    }
    worst / scale
}

#[test]
fn gradient_matches_finite_differences() {
    let cfg = small_cfg(4, 1);
    for seed in 0..4 {
        let ch = random_channel(&cfg, 10 + seed);
        let spec = BeampatternSpec::bands(-90.0, 90.0, 2.0, &[(-50.0, -30.0)], 2.0).unwrap();
        let problem = PrecoderProblem::new(spec, &ch, &cfg, 1e-2, 0.8).unwrap();
        let p = random_p(4, 20 + seed);
        let e = fd_mismatch(&problem, &p);
        assert!(e < 1e-5, "seed {seed}: {e}");
    }
}

#[test]
fn snr_term_gradient_is_nonzero_near_zero_precoder() {
    let cfg = small_cfg(3, 0);
    let ch = random_channel(&cfg, 11);
    let spec = BeampatternSpec::two_band_default();
    let problem = PrecoderProblem::new(spec, &ch, &cfg, 0.0, 0.8).unwrap();
    let g = problem.gradient(&(CMatrix::identity(3, 3) * C64::new(1e-3, 0.0))).unwrap();
    assert!(g.norm() > 0.0);
}

#[test]
fn uniform_weight_scaling_keeps_gradient_direction() {
    let cfg = small_cfg(4, 0);
    let ch = random_channel(&cfg, 12);
    let base = BeampatternSpec::bands(-90.0, 90.0, 3.0, &[(10.0, 40.0)], 1.0).unwrap();
    let mut scaled = base.clone();
    scaled.weights.iter_mut().for_each(|w| *w *= 7.5);
    let p = random_p(4, 13);
    let g1 = PrecoderProblem::new(base, &ch, &cfg, 1.0, 0.0).unwrap().gradient(&p).unwrap();
    let g2 = PrecoderProblem::new(scaled, &ch, &cfg, 1.0, 0.0).unwrap().gradient(&p).unwrap();
    let d = (&g1 / C64::new(g1.norm(), 0.0) - &g2 / C64::new(g2.norm(), 0.0)).norm();
    assert!(d < 1e-12);
}

#[test]
fn zero_loss_weights_leave_precoder_unchanged() {
    let cfg = small_cfg(3, 0);
    let ch = random_channel(&cfg, 14);
    let problem = PrecoderProblem::new(BeampatternSpec::two_band_default(), &ch, &cfg, 0.0, 0.0).unwrap();
    let p0 = random_p(3, 15);
    let st = adam_optimize(&p0, &problem, &AdamParams { steps: 25, ..Default::default() }).unwrap();
    assert_eq!(st.p, p0);
    assert_eq!(st.loss_trace.len(), 26);
    assert_eq!(st.snr_db_trace.len(), 26);
}

#[test]
fn adam_reduces_loss_and_records_restarts() {
    let cfg = small_cfg(4, 0);
    let ch = random_channel(&cfg, 16);
    let problem = PrecoderProblem::new(BeampatternSpec::two_band_default(), &ch, &cfg, 1e-4, 0.8).unwrap();
    let st = adam_optimize(&CMatrix::identity(4, 4), &problem, &AdamParams::default()).unwrap();
    assert!(st.final_loss() < st.loss_trace[0]);
    assert_eq!(st.restarts.len(), 3);
    assert!(st.restarts.iter().all(|(_, l)| *l >= st.final_loss()));
    assert!(st.loss_trace.iter().all(|v| v.is_finite()));
}

#[test]
fn renormalization_holds_frobenius_norm() {
    let cfg = small_cfg(3, 0);
    let ch = random_channel(&cfg, 17);
    let problem = PrecoderProblem::new(BeampatternSpec::two_band_default(), &ch, &cfg, 0.0, 0.8).unwrap();
    let params = AdamParams { steps: 20, renormalize: true, learning_rates: vec![0.05], ..Default::default() };
    let st = adam_optimize(&CMatrix::identity(3, 3), &problem, &params).unwrap();
    assert!((st.p.norm_squared() - 3.0).abs() < 1e-9);
}

#[test]
fn divergence_aborts_with_trace() {
    let cfg = small_cfg(2, 0);
    let ch = random_channel(&cfg, 18);
    let problem = PrecoderProblem::new(BeampatternSpec::two_band_default(), &ch, &cfg, 1e-4, 0.8).unwrap();
    let params = AdamParams { learning_rates: vec![1e200], steps: 5, ..Default::default() };
    let err = adam_optimize(&CMatrix::identity(2, 2), &problem, &params).unwrap_err();
    assert!(err.to_string().contains("loss trace"), "{err}");
}

#[test]
fn trace_csv_has_one_row_per_step() {
    let cfg = small_cfg(2, 0);
    let ch = random_channel(&cfg, 19);
    let problem = PrecoderProblem::new(BeampatternSpec::two_band_default(), &ch, &cfg, 1e-4, 0.8).unwrap();
    let st = adam_optimize(&CMatrix::identity(2, 2), &problem, &AdamParams { steps: 5, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&st, &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,loss,beampattern_error,snr_db,grad_norm");
    assert_eq!(lines.len(), 7);
}
