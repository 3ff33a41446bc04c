use std::fs;

use ssdfrc::channel::TargetRecord;
use ssdfrc::config::{resolutions, SystemConfig};
use ssdfrc::harness::{
    emit_plot_data, match_targets, random_targets, run_monte_carlo, run_scenario, summarize, BeampatternRow, Manifest,
    MatchTolerance, MonteCarloSpec, PlotData, PlotKind, PrecoderSource, Scenario, SweepVariable, TrialOutcome,
};
use ssdfrc::radar::{Provenance, TargetEstimate};
use ssdfrc::rng::{child_rng, Stream};
use ssdfrc::{Error, C64};

const SMALL: &str = r#"
seed = 5
radar_snr_db = 20.0
comm_snr_db = [10.0]
trials = 2

[system]
num_tx = 4
num_private = 4
num_subcarriers = 64
num_ofdm_symbols = 8

[[targets]]
angle_deg = -20.0
range_m = 37.5
velocity_mps = 0.0
beta_re = 1.0

[precoder]
source = "identity"
"#;

fn estimate(angle_deg: f64, range_m: f64, velocity_mps: f64) -> TargetEstimate {
    TargetEstimate {
        angle_deg,
        range_m,
        velocity_mps,
        beta_re: 1.0,
        beta_im: 0.0,
        provenance: Provenance::SsrRefined,
        iteration: 1,
    }
}

#[test]
fn scenario_overrides_apply_on_reference_config() {
    let sc = Scenario::from_toml_str(SMALL, None).unwrap();
    assert_eq!(sc.system.num_tx, 4);
    assert_eq!(sc.system.num_private(), 4);
    assert_eq!(sc.system.num_subcarriers, 64);
    assert_eq!(sc.system.num_radar_rx, 32);
    assert_eq!(sc.system.rng_seed, 5);
    assert_eq!(sc.precoder, PrecoderSource::Identity);
    let t = sc.target_records();
    assert_eq!(t[0].beta, C64::new(1.0, 0.0));
}

#[test]
fn bad_scenarios_are_config_errors() {
    for text in [
        "[system]\nbogus = 1\n",
        "trials = 0\n",
        "unknown_top = 3\n",
        "[precoder]\nsource = \"file\"\npath = \"/nonexistent/p.bin\"\n",
        "[[targets]]\nangle_deg = 95.0\nrange_m = 10.0\nvelocity_mps = 0.0\n",
    ] {
        let err = Scenario::from_toml_str(text, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{text}: {err:?}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn drawn_coefficients_follow_the_seed() {
    let text = "[[targets]]\nangle_deg = 0.0\nrange_m = 10.0\nvelocity_mps = 0.0\n";
    let a = Scenario::from_toml_str(text, None).unwrap();
    let b = a.clone().with_seed(9);
    assert_eq!(a.target_records(), Scenario::from_toml_str(text, None).unwrap().target_records());
    assert_ne!(a.target_records()[0].beta, b.target_records()[0].beta);
}

#[test]
fn matching_counts_correct_wrong_and_missed() {
    let cfg = SystemConfig::reference_config(8, 8);
    let tol = MatchTolerance::for_config(&cfg, 1.0);
    let truth = [TargetRecord::new(-43.0, 50.0, 13.0, C64::new(1.0, 0.0)), TargetRecord::new(10.0, 80.0, 0.0, C64::new(1.0, 0.0))];
    let est = [estimate(-43.0, 50.39, 12.8), estimate(10.0, 80.0, 30.0), estimate(40.0, 20.0, 0.0)];
    let m = match_targets(&truth, &est, tol);
    assert_eq!((m.correct, m.wrong, m.missed), (1, 2, 1));
    assert_eq!(m.pairs, vec![(0, 0, true), (1, 1, false)]);
    let none = match_targets(&truth, &[], tol);
    assert_eq!((none.correct, none.wrong, none.missed), (0, 0, 2));
}

#[test]
fn random_targets_respect_bounds_and_separation() {
    let mut cfg = SystemConfig::reference_config(8, 8);
    cfg.num_ofdm_symbols = 16;
    let spec = MonteCarloSpec::default();
    let res = resolutions(&cfg);
    let mut rng = child_rng(3, Stream::Targets, 0);
    for _ in 0..20 {
        let t = random_targets(&cfg, &spec, 1.0, &mut rng).unwrap();
        assert_eq!(t.len(), 6);
        for (i, a) in t.iter().enumerate() {
            assert!(a.angle_deg().abs() <= 60.0);
            assert!(a.range_m >= 10.0 && a.range_m <= 135.0 + 1e-9);
            assert!(a.velocity_mps.abs() <= res.vel_max_mps / 4.0);
            assert!((a.beta.norm() - 1.0).abs() < 1e-12);
            for b in &t[..i] {
                assert!((a.angle_deg() - b.angle_deg()).abs() >= 1.0 || (a.range_m - b.range_m).abs() >= res.range_res_m);
            }
        }
    }
}

#[test]
fn summary_rate_loss_grows_with_private_count() {
    let outcome = TrialOutcome {
        all_correct: true,
        correct: 1,
        wrong: 0,
        missed: 0,
        num_estimates: 1,
        num_targets: 1,
        errors: vec![(0.5, 1.0, -2.0)],
        coarse_angle_errors: vec![1.5],
        iterations_to_converge: 1,
    };
    let mut last = -1.0;
    for m in 0..=8 {
        let cfg = SystemConfig::reference_config(8, m);
        let s = summarize(SweepVariable::M, m as f64, &cfg, std::slice::from_ref(&outcome));
        assert!((s.rate_loss_bps - m as f64 * cfg.rate_loss_per_private_bps()).abs() < 1e-6);
        assert!(s.rate_loss_bps > last);
        last = s.rate_loss_bps;
        assert_eq!((s.angle_mse_deg2, s.range_mse_m2, s.doppler_mse_m2s2), (0.25, 1.0, 4.0));
        assert_eq!(s.coarse_angle_mse_deg2, 2.25);
        assert_eq!(s.detection_probability, 1.0);
    }
}

#[test]
fn plot_kinds_have_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = PlotData {
        beampattern: vec![BeampatternRow { angle_deg: -1.0, power: 2.0 }, BeampatternRow { angle_deg: 0.0, power: 8.0 }],
        ..PlotData::default()
    };
    let path = emit_plot_data(&data, "beampattern", dir.path()).unwrap();
    let first = fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), PlotKind::Beampattern.columns().join(","));
    assert_eq!(text.lines().count(), 3);
    emit_plot_data(&data, "beampattern", dir.path()).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);

    assert!(matches!(emit_plot_data(&data, "heatmap", dir.path()), Err(Error::InvalidArgument(_))));
    assert!(matches!(emit_plot_data(&data, "ber_curve", dir.path()), Err(Error::InvalidArgument(_))));
    for kind in ["beampattern", "range_profile", "ber_curve", "mse_curve", "tradeoff"] {
        let k: PlotKind = kind.parse().unwrap();
        assert_eq!(k.name(), kind);
        assert!(!k.columns().is_empty());
    }
}

#[test]
fn scenario_run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::from_toml_str(SMALL, None).unwrap();
    let out = run_scenario(&sc, Some(dir.path())).unwrap();
    assert_eq!(out.report.estimates.len(), 1);
    let e = &out.report.estimates[0];
    assert_eq!(e.angle_deg, -20.0);
    assert!((e.range_m - 37.5).abs() < 1e-9);
    assert_eq!(out.beampattern.len(), 361);
    assert_eq!(out.ber.len(), 2);
    for name in ["estimates.json", "coarse_estimates.json", "iterations.jsonl", "range_profile.csv", "precoder.bin", "ber.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let manifest = Manifest::new("simulate-radar", &sc, out.files.clone()).write(dir.path()).unwrap();
    let back: Manifest = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(back.seed, 5);
    assert_eq!(back.files.len(), out.files.len());

    let again = run_scenario(&sc, None).unwrap();
    assert_eq!(again.report.estimates, out.report.estimates);
}

#[test]
fn monte_carlo_is_reproducible() {
    let mut sc = Scenario::from_toml_str(SMALL, None).unwrap();
    sc.monte_carlo.num_targets = 2;
    sc.monte_carlo.num_ofdm_symbols = Some(4);
    let a = run_monte_carlo(&sc, SweepVariable::SnrDb, &[5.0, 15.0]).unwrap();
    let b = run_monte_carlo(&sc, SweepVariable::SnrDb, &[5.0, 15.0]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|s| s.trials == 2 && (0.0..=1.0).contains(&s.detection_probability)));
    assert!(run_monte_carlo(&sc, SweepVariable::M, &[1.5]).is_err());
}
