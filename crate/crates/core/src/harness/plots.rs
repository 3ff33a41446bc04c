use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::montecarlo::McSummary;
use super::run::{BeampatternRow, BerRow, RangeProfileRow};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Beampattern,
    RangeProfile,
    BerCurve,
    MseCurve,
    Tradeoff,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::Beampattern,
        PlotKind::RangeProfile,
        PlotKind::BerCurve,
        PlotKind::MseCurve,
        PlotKind::Tradeoff,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Beampattern => "beampattern",
            Self::RangeProfile => "range_profile",
            Self::BerCurve => "ber_curve",
            Self::MseCurve => "mse_curve",
            Self::Tradeoff => "tradeoff",
        }
    }

    /// CSV header of this kind.
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            Self::Beampattern => &["angle_deg", "power_linear", "power_db"],
            Self::RangeProfile => &["angle_deg", "lag", "range_m", "power"],
            Self::BerCurve => &["snr_db", "n_tx", "class", "ber"],
            Self::MseCurve => &[
                "variable",
                "value",
                "trials",
                "angle_mse_deg2",
                "coarse_angle_mse_deg2",
                "range_mse_m2",
                "doppler_mse_m2s2",
            ],
            Self::Tradeoff => &[
                "num_private",
                "detection_probability",
                "wrong_ratio",
                "missed_ratio",
                "mean_iterations",
                "bit_rate_bps",
                "rate_loss_bps",
            ],
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown plot kind `{s}`")))
    }
}

/// Inputs for plot emission. Empty sections cannot be plotted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub beampattern: Vec<BeampatternRow>,
    pub range_profile: Vec<RangeProfileRow>,
    pub ber: Vec<BerRow>,
    pub mse: Vec<McSummary>,
    /// Summaries of a sweep over the number of private subcarriers.
    pub tradeoff: Vec<McSummary>,
}

fn num(v: f64) -> String {
    // Shortest representation that round-trips; identical on every run.
    format!("{v:?}")
}

fn rows(data: &PlotData, kind: PlotKind) -> Vec<Vec<String>> {
    match kind {
        PlotKind::Beampattern => data
            .beampattern
            .iter()
            .map(|r| vec![num(r.angle_deg), num(r.power), num(10.0 * r.power.max(1e-300).log10())])
            .collect(),
        PlotKind::RangeProfile => data
            .range_profile
            .iter()
            .map(|r| vec![num(r.angle_deg), r.lag.to_string(), num(r.range_m), num(r.power)])
            .collect(),
        PlotKind::BerCurve => data
            .ber
            .iter()
            .map(|r| vec![num(r.snr_db), r.n_tx.to_string(), r.class.as_str().to_string(), num(r.ber)])
            .collect(),
        PlotKind::MseCurve => data
            .mse
            .iter()
            .map(|s| {
                vec![
                    s.variable.as_str().to_string(),
                    num(s.value),
                    s.trials.to_string(),
                    num(s.angle_mse_deg2),
                    num(s.coarse_angle_mse_deg2),
                    num(s.range_mse_m2),
                    num(s.doppler_mse_m2s2),
                ]
            })
            .collect(),
        PlotKind::Tradeoff => data
            .tradeoff
            .iter()
            .map(|s| {
                vec![
                    s.num_private.to_string(),
                    num(s.detection_probability),
                    num(s.wrong_ratio),
                    num(s.missed_ratio),
                    num(s.mean_iterations),
                    num(s.bit_rate_bps),
                    num(s.rate_loss_bps),
                ]
            })
            .collect(),
    }
}

/// Write `<dir>/<kind>.csv` and return its path.
pub fn emit_plot_data(data: &PlotData, kind: &str, dir: &Path) -> Result<PathBuf> {
    let kind: PlotKind = kind.parse()?;
    let body = rows(data, kind);
    if body.is_empty() {
        return Err(Error::invalid(format!("no data for plot kind `{}`", kind.name())));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", kind.name()));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(kind.columns())?;
    for r in body {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(path)
}
