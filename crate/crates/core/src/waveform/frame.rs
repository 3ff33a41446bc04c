use rand::Rng;

use super::qpsk::{qpsk_map, qpsk_modulate};
use crate::config::{PrivateAssignment, SystemConfig};
use crate::{C64, CMatrix, Error, Result};

/// Symbols of one OFDM symbol before (`source`, Q) and after (`transmit`, D)
/// precoding.
///
/// Shared columns satisfy d_i = P q_i. A private column i owned by antenna
/// n_i holds a single nonzero entry, `private_scale * Q(n_i, i)`, in row n_i.
/// The scale is ||P||_F, which makes its power equal to the expected power
/// E||P q||^2 = ||P||_F^2 of a shared column under white unit-power symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolFrame {
    pub source: CMatrix,
    pub transmit: CMatrix,
    pub symbol_index: usize,
    pub private_set: Vec<PrivateAssignment>,
    pub private_scale: f64,
}

impl SymbolFrame {
    pub fn num_tx(&self) -> usize {
        self.transmit.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.transmit.ncols()
    }

    pub fn private_owner(&self, i: usize) -> Option<usize> {
        self.private_set.iter().find(|a| a.subcarrier == i).map(|a| a.antenna)
    }
}

fn check_precoder(p: &CMatrix, cfg: &SystemConfig) -> Result<()> {
    if p.nrows() != cfg.num_tx || p.ncols() != cfg.num_tx {
        return Err(Error::invalid(format!(
            "precoder is {}x{}, expected {}x{}",
            p.nrows(),
            p.ncols(),
            cfg.num_tx,
            cfg.num_tx
        )));
    }
    Ok(())
}

/// Build the frame for OFDM symbol `mu` from `bits`.
///
/// Bits are consumed subcarrier by subcarrier: a shared subcarrier takes
/// 2 N_t bits (antenna 0 first), a private subcarrier takes 2 bits. The total
/// must be 2 (N_t (N_s - M) + M).
pub fn build_symbol_frame(bits: &[u8], p: &CMatrix, cfg: &SystemConfig, mu: usize) -> Result<SymbolFrame> {
    check_precoder(p, cfg)?;
    let expected = cfg.bits_per_ofdm_symbol();
    if bits.len() != expected {
        return Err(Error::invalid(format!("got {} bits, expected {expected}", bits.len())));
    }
    let syms = qpsk_modulate(bits)?;
    let owners = cfg.owner_table();
    let (nt, ns) = (cfg.num_tx, cfg.num_subcarriers);
    let mut q = CMatrix::zeros(nt, ns);
    let mut it = syms.into_iter();
    for (i, owner) in owners.iter().enumerate() {
        match owner {
            Some(n) => q[(*n, i)] = it.next().expect("bit budget checked"),
            None => {
                for n in 0..nt {
                    q[(n, i)] = it.next().expect("bit budget checked");
                }
            }
        }
    }
    Ok(assemble(q, p, cfg, mu, &owners))
}

/// Draw a frame with uniformly random bits; returns the frame and the bits in
/// the order [`build_symbol_frame`] consumes them.
///
/// Every subcarrier draws 2 N_t bits whether or not it is private (a private
/// subcarrier keeps only the first two), so the shared columns do not depend
/// on which subcarriers are private.
pub fn random_symbol_frame<R: Rng + ?Sized>(
    p: &CMatrix,
    cfg: &SystemConfig,
    mu: usize,
    rng: &mut R,
) -> Result<(SymbolFrame, Vec<u8>)> {
    check_precoder(p, cfg)?;
    let owners = cfg.owner_table();
    let (nt, ns) = (cfg.num_tx, cfg.num_subcarriers);
    let mut q = CMatrix::zeros(nt, ns);
    let mut bits = Vec::with_capacity(cfg.bits_per_ofdm_symbol());
    for (i, owner) in owners.iter().enumerate() {
        let draw: Vec<u8> = (0..2 * nt).map(|_| rng.random::<bool>() as u8).collect();
        match owner {
            Some(n) => {
                q[(*n, i)] = qpsk_map(draw[0], draw[1]);
                bits.extend_from_slice(&draw[..2]);
            }
            None => {
                for n in 0..nt {
                    q[(n, i)] = qpsk_map(draw[2 * n], draw[2 * n + 1]);
                }
                bits.extend_from_slice(&draw);
            }
        }
    }
    Ok((assemble(q, p, cfg, mu, &owners), bits))
}

fn assemble(q: CMatrix, p: &CMatrix, cfg: &SystemConfig, mu: usize, owners: &[Option<usize>]) -> SymbolFrame {
    let scale = p.norm();
    let mut d = p * &q;
    for (i, owner) in owners.iter().enumerate() {
        if let Some(n) = owner {
            let v = q[(*n, i)] * scale;
            d.column_mut(i).fill(C64::new(0.0, 0.0));
            d[(*n, i)] = v;
        }
    }
    SymbolFrame {
        source: q,
        transmit: d,
        symbol_index: mu,
        private_set: cfg.private_set.clone(),
        private_scale: scale,
    }
}
