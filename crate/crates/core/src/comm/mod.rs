//! Communication receiver: least-squares decoding of shared subcarriers,
//! nearest-point decoding of private subcarriers, blind private-subcarrier
//! detection and bit error accounting.

use serde::{Deserialize, Serialize};

use crate::channel::CommChannel;
use crate::config::{PrivateAssignment, SystemConfig};
use crate::linalg::LeastSquares;
use crate::waveform::{qpsk_demodulate, qpsk_slice, QPSK_POINTS};
use crate::{C64, CMatrix, CVector, Error, Result};

/// Least-squares estimate of the source vector on one shared subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct LsDecode {
    /// Unsliced argmin_q ||r - H P q||.
    pub estimate: CVector,
    /// Estimate sliced to the nearest constellation points.
    pub symbols: CVector,
    /// ||r - H P estimate||.
    pub residual: f64,
}

fn slice_vec(v: &CVector) -> CVector {
    v.map(|s| QPSK_POINTS[qpsk_slice(s)])
}

fn ls_with(ls: &LeastSquares, hp: &CMatrix, r: &CVector) -> LsDecode {
    let estimate = ls.solve(r);
    let residual = (r - hp * &estimate).norm();
    LsDecode { symbols: slice_vec(&estimate), estimate, residual }
}

/// Decode shared subcarrier `subcarrier` from r = H P q + u.
pub fn ls_decode_shared(r: &CVector, h: &CMatrix, p: &CMatrix, subcarrier: usize) -> Result<LsDecode> {
    let hp = h * p;
    let ls = LeastSquares::new(&hp).map_err(|_| Error::RankDeficient { subcarrier })?;
    Ok(ls_with(&ls, &hp, r))
}

/// Nearest constellation point s minimizing ||r - h_n scale s||, where h_n is
/// column `owner` of `h`.
pub fn decode_private(r: &CVector, h: &CMatrix, owner: usize, scale: f64) -> C64 {
    let col = h.column(owner);
    let mut best = (f64::INFINITY, QPSK_POINTS[0]);
    for s in QPSK_POINTS {
        let d = (r - col * (s * scale)).norm_squared();
        if d < best.0 {
            best = (d, s);
        }
    }
    best.1
}

/// Owner antenna if the unprecoded LS estimate of d is 1-sparse: its largest
/// entry exceeds `ratio` times the second largest.
fn dominant_entry(d: &CVector, ratio: f64) -> Option<usize> {
    if d.len() == 1 {
        return Some(0);
    }
    let mut mags: Vec<(usize, f64)> = d.iter().map(|v| v.norm()).enumerate().collect();
    mags.sort_by(|a, b| b.1.total_cmp(&a.1));
    (mags[0].1 > ratio * mags[1].1).then_some(mags[0].0)
}

/// Blind detection of private subcarriers from received columns `r` (one per
/// subcarrier) and channels `h`.
pub fn detect_private(r: &CMatrix, h: &[CMatrix], ratio: f64) -> Result<Vec<PrivateAssignment>> {
    if r.ncols() != h.len() {
        return Err(Error::invalid(format!("{} received columns for {} channels", r.ncols(), h.len())));
    }
    let mut out = Vec::new();
    for (i, hi) in h.iter().enumerate() {
        let ls = LeastSquares::new(hi).map_err(|_| Error::RankDeficient { subcarrier: i })?;
        let d = ls.solve(&r.column(i).into_owned());
        if let Some(n) = dominant_entry(&d, ratio) {
            out.push(PrivateAssignment { subcarrier: i, antenna: n });
        }
    }
    Ok(out)
}

/// Fraction of differing bits.
pub fn ber(sent: &[u8], received: &[u8]) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::invalid(format!(
            "bit streams differ in length: {} vs {}",
            sent.len(),
            received.len()
        )));
    }
    if sent.is_empty() {
        return Ok(0.0);
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / sent.len() as f64)
}

/// For each bit of a frame (in frame order), whether it rides on a private
/// subcarrier.
pub fn bit_classes(cfg: &SystemConfig) -> Vec<bool> {
    let mut out = Vec::with_capacity(cfg.bits_per_ofdm_symbol());
    for owner in cfg.owner_table() {
        match owner {
            Some(_) => out.extend([true, true]),
            None => out.extend(std::iter::repeat(false).take(2 * cfg.num_tx)),
        }
    }
    out
}

/// Outcome of decoding one OFDM symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    #[serde(skip)]
    pub symbols: CMatrix,
    pub bits: Vec<u8>,
    /// LS residual norm per shared subcarrier (0 on private subcarriers).
    pub residuals: Vec<f64>,
    pub private_set: Vec<PrivateAssignment>,
}

/// Receiver with the per-subcarrier factorizations of H_i P (and of H_i for
/// detection) computed once for a fixed channel and precoder.
#[derive(Clone, Debug)]
pub struct CommReceiver {
    hp: Vec<CMatrix>,
    hp_ls: Vec<LeastSquares>,
    h: Vec<CMatrix>,
    h_ls: Option<Vec<LeastSquares>>,
    scale: f64,
    num_tx: usize,
    pub detection_ratio: f64,
}

impl CommReceiver {
    pub fn new(channel: &CommChannel, p: &CMatrix, with_detection: bool) -> Result<Self> {
        let mut hp = Vec::with_capacity(channel.h.len());
        let mut hp_ls = Vec::with_capacity(channel.h.len());
        for (i, h) in channel.h.iter().enumerate() {
            let m = h * p;
            hp_ls.push(LeastSquares::new(&m).map_err(|_| Error::RankDeficient { subcarrier: i })?);
            hp.push(m);
        }
        let h_ls = if with_detection {
            Some(
                channel
                    .h
                    .iter()
                    .enumerate()
                    .map(|(i, h)| LeastSquares::new(h).map_err(|_| Error::RankDeficient { subcarrier: i }))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            hp,
            hp_ls,
            h: channel.h.clone(),
            h_ls,
            scale: p.norm(),
            num_tx: p.ncols(),
            detection_ratio: 10.0,
        })
    }

    /// Detect private subcarriers in the received columns `r`.
    pub fn detect(&self, r: &CMatrix) -> Result<Vec<PrivateAssignment>> {
        let h_ls = self
            .h_ls
            .as_ref()
            .ok_or_else(|| Error::invalid("receiver was built without detection support"))?;
        Ok((0..r.ncols())
            .filter_map(|i| {
                let d = h_ls[i].solve(&r.column(i).into_owned());
                dominant_entry(&d, self.detection_ratio).map(|n| PrivateAssignment { subcarrier: i, antenna: n })
            })
            .collect())
    }

    /// Decode received columns `r`; the private set is detected when `known`
    /// is None.
    pub fn decode(&self, r: &CMatrix, known: Option<&[PrivateAssignment]>) -> Result<DecodeResult> {
        let ns = self.hp.len();
        if r.ncols() != ns {
            return Err(Error::invalid(format!("{} received columns for {ns} subcarriers", r.ncols())));
        }
        let private_set = match known {
            Some(k) => k.to_vec(),
            None => self.detect(r)?,
        };
        let mut owners = vec![None; ns];
        for a in &private_set {
            if a.subcarrier < ns {
                owners[a.subcarrier] = Some(a.antenna);
            }
        }
        let mut symbols = CMatrix::zeros(self.num_tx, ns);
        let mut residuals = vec![0.0; ns];
        let mut bits = Vec::with_capacity(2 * self.num_tx * ns);
        for i in 0..ns {
            let ri = r.column(i).into_owned();
            match owners[i] {
                Some(n) => {
                    let s = decode_private(&ri, &self.h[i], n, self.scale);
                    symbols[(n, i)] = s;
                    bits.extend(qpsk_demodulate(&[s]));
                }
                None => {
                    let d = ls_with(&self.hp_ls[i], &self.hp[i], &ri);
                    residuals[i] = d.residual;
                    bits.extend(qpsk_demodulate(d.symbols.as_slice()));
                    symbols.set_column(i, &d.symbols);
                }
            }
        }
        Ok(DecodeResult { symbols, bits, residuals, private_set })
    }
}

#[cfg(test)]
mod tests;
