use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ssdfrc::harness::{
    ber_sweep, emit_plot_data, prepare_precoder, run_monte_carlo, run_scenario, scenario_channel, write_ber_csv,
    BeampatternRow, Manifest, McSummary, OptimizeSpec, PlotData, PlotKind, PrecoderSource, Scenario, SweepVariable,
};
use ssdfrc::precoder::{beampattern, write_trace_csv};
use ssdfrc::radar::angle_grid_deg;
use ssdfrc::{io, CMatrix, Error, Result};

#[derive(Parser)]
#[command(name = "ssdfrc", version, about = "Shared-subcarrier OFDM radar-communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML; the four-target reference scene when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's out_dir, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the radar echo and run the angle-range-Doppler estimator.
    SimulateRadar(Common),
    /// Optimize the precoder for the scenario's channel and beampattern.
    DesignPrecoder(Common),
    /// BER of shared and private subcarriers over an SNR sweep.
    SimulateComm {
        #[command(flatten)]
        common: Common,
        /// Per-element SNRs in dB (default: the scenario's comm_snr_db).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        snr: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Random-scene sweep over M, snr_db or n_tx.
    MonteCarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "m")]
        sweep: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write plot-ready CSV tables.
    EmitPlots {
        #[command(flatten)]
        common: Common,
        /// beampattern, range_profile, ber_curve, mse_curve, tradeoff.
        #[arg(long, value_delimiter = ',', default_value = "beampattern,range_profile,ber_curve")]
        kind: Vec<String>,
        /// Radar SNRs of the MSE curve.
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15", allow_negative_numbers = true)]
        snr_values: Vec<f64>,
        /// Private-subcarrier counts of the trade-off table.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
        m_values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

const DEFAULT_COMM_SNR: [f64; 7] = [-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0];

fn load(common: &Common) -> Result<(Scenario, PathBuf)> {
    let mut sc = match &common.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::four_target_reference(0),
    };
    if let Some(seed) = common.seed {
        sc = sc.with_seed(seed);
    }
    let out = common.out.clone().or_else(|| sc.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    Ok((sc, out))
}

fn finish(command: &str, sc: &Scenario, out: &Path, files: Vec<PathBuf>) -> Result<()> {
    let manifest = Manifest::new(command, sc, files).write(out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn simulate_radar(common: &Common) -> Result<()> {
    let (mut sc, out) = load(common)?;
    sc.comm_snr_db.clear();
    let res = run_scenario(&sc, Some(&out))?;
    println!("{:>10} {:>10} {:>10}  stage", "angle_deg", "range_m", "vel_mps");
    for e in &res.report.estimates {
        println!("{:>10.2} {:>10.2} {:>10.2}  {:?}", e.angle_deg, e.range_m, e.velocity_mps, e.provenance);
    }
    println!("{} passes, converged: {}", res.report.iterations, res.report.converged);
    finish("simulate-radar", &sc, &out, res.files)
}

fn design_precoder(common: &Common) -> Result<()> {
    let (mut sc, out) = load(common)?;
    if !matches!(sc.precoder, PrecoderSource::Optimize(_)) {
        sc.precoder = PrecoderSource::Optimize(OptimizeSpec::default());
    }
    let cfg = sc.system.clone();
    let channel = scenario_channel(&sc, &cfg)?;
    let prepared = prepare_precoder(&sc, &cfg, &channel)?;
    let state = prepared.state.as_ref().ok_or_else(|| Error::Numerical("optimizer returned no trace".into()))?;
    io::write_precoder(&out.join("precoder.bin"), &prepared.p)?;
    write_trace_csv(state, &out.join("precoder_trace.csv"))?;
    let data = PlotData { beampattern: pattern_rows(&sc, &prepared.p), ..PlotData::default() };
    emit_plot_data(&data, "beampattern", &out)?;
    println!(
        "lr {} loss {:.6} -> {:.6}, SNR {:.2} dB",
        state.learning_rate,
        state.loss_trace[0],
        state.final_loss(),
        state.snr_db_trace.last().copied().unwrap_or(f64::NAN)
    );
    let files = ["precoder.bin", "precoder_trace.csv", "beampattern.csv"].map(PathBuf::from).to_vec();
    finish("design-precoder", &sc, &out, files)
}

fn pattern_rows(sc: &Scenario, p: &CMatrix) -> Vec<BeampatternRow> {
    let grid = angle_grid_deg(-90.0, 90.0, 0.5);
    let rad: Vec<f64> = grid.iter().map(|a| a.to_radians()).collect();
    grid.iter()
        .zip(beampattern(p, &sc.system, &rad))
        .map(|(&angle_deg, power)| BeampatternRow { angle_deg, power })
        .collect()
}

fn simulate_comm(common: &Common, snr: &[f64], trials: Option<usize>) -> Result<()> {
    let (mut sc, out) = load(common)?;
    if let Some(t) = trials {
        sc.trials = t;
    }
    let snr = match (snr.is_empty(), sc.comm_snr_db.is_empty()) {
        (false, _) => snr.to_vec(),
        (true, false) => sc.comm_snr_db.clone(),
        (true, true) => DEFAULT_COMM_SNR.to_vec(),
    };
    sc.comm_snr_db = snr.clone();
    sc.validate()?;
    let cfg = sc.system.clone();
    let channel = scenario_channel(&sc, &cfg)?;
    let p = prepare_precoder(&sc, &cfg, &channel)?.p;
    let rows = ber_sweep(&cfg, &channel, &p, &snr, sc.trials, sc.seed)?;
    write_ber_csv(&rows, &out.join("ber.csv"))?;
    for r in &rows {
        println!("{:>7.1} dB {:>8} {:.3e} ({} / {})", r.snr_db, r.class.as_str(), r.ber, r.errors, r.bits);
    }
    finish("simulate-comm", &sc, &out, vec![PathBuf::from("ber.csv")])
}

fn write_summaries(rows: &[McSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn monte_carlo(common: &Common, sweep: &str, values: &[f64], trials: Option<usize>) -> Result<()> {
    let (mut sc, out) = load(common)?;
    if let Some(t) = trials {
        sc.trials = t;
    }
    let var: SweepVariable = sweep.parse()?;
    let rows = run_monte_carlo(&sc, var, values)?;
    write_summaries(&rows, &out.join("monte_carlo.csv"))?;
    std::fs::write(out.join("monte_carlo.json"), serde_json::to_string_pretty(&rows)?)?;
    for r in &rows {
        println!(
            "{}={} P_d {:.3} wrong {:.3} missed {:.3} angle MSE {:.4} iterations {:.2}",
            var.as_str(),
            r.value,
            r.detection_probability,
            r.wrong_ratio,
            r.missed_ratio,
            r.angle_mse_deg2,
            r.mean_iterations
        );
    }
    let files = ["monte_carlo.csv", "monte_carlo.json"].map(PathBuf::from).to_vec();
    finish("monte-carlo", &sc, &out, files)
}

fn emit_plots(common: &Common, kinds: &[String], snr_values: &[f64], m_values: &[f64], trials: Option<usize>) -> Result<()> {
    let (mut sc, out) = load(common)?;
    if let Some(t) = trials {
        sc.trials = t;
    }
    let kinds: Vec<PlotKind> = kinds.iter().map(|k| k.parse()).collect::<Result<_>>()?;
    let mut data = PlotData::default();
    let needs = |k: PlotKind| kinds.contains(&k);
    if needs(PlotKind::Beampattern) || needs(PlotKind::RangeProfile) || needs(PlotKind::BerCurve) {
        if needs(PlotKind::BerCurve) && sc.comm_snr_db.is_empty() {
            sc.comm_snr_db = DEFAULT_COMM_SNR.to_vec();
        }
        let res = run_scenario(&sc, None)?;
        data.beampattern = res.beampattern;
        data.range_profile = res.range_profiles;
        data.ber = res.ber;
    }
    if needs(PlotKind::MseCurve) {
        data.mse = run_monte_carlo(&sc, SweepVariable::SnrDb, snr_values)?;
    }
    if needs(PlotKind::Tradeoff) {
        data.tradeoff = run_monte_carlo(&sc, SweepVariable::M, m_values)?;
    }
    let mut files = Vec::new();
    for k in &kinds {
        let path = emit_plot_data(&data, k.name(), &out)?;
        info!("wrote {}", path.display());
        files.push(PathBuf::from(path.file_name().expect("csv file name")));
    }
    finish("emit-plots", &sc, &out, files)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SimulateRadar(c) => simulate_radar(c),
        Command::DesignPrecoder(c) => design_precoder(c),
        Command::SimulateComm { common, snr, trials } => simulate_comm(common, snr, *trials),
        Command::MonteCarlo { common, sweep, values, trials } => monte_carlo(common, sweep, values, *trials),
        Command::EmitPlots { common, kind, snr_values, m_values, trials } => {
            emit_plots(common, kind, snr_values, m_values, *trials)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
