//! File formats.
//!
//! Complex arrays are dumped as little-endian interleaved (re, im) `f64`
//! pairs behind a 32-byte header:
//!
//! | bytes  | field                                        |
//! |--------|----------------------------------------------|
//! | 0..4   | magic `SDFR`                                 |
//! | 4..6   | kind (1 frame, 2 radar cube, 3 precoder)     |
//! | 6..8   | reserved, zero                               |
//! | 8..20  | three `u32` dimensions                       |
//! | 20..24 | reserved, zero                               |
//! | 24..32 | `u64` tag: symbol index (frames), seed (cubes) |
//!
//! Frames and precoders store (rows, cols, 1) row-major. Cubes store
//! (N_r, N_s, N_p) with the receive index fastest, then subcarrier, then
//! symbol.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::channel::RadarCube;
use crate::radar::{IterationRecord, TargetEstimate};
use crate::{C64, CMatrix, Error, Result};

pub const MAGIC: [u8; 4] = *b"SDFR";
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum DumpKind {
    Frame = 1,
    Cube = 2,
    Precoder = 3,
}

impl DumpKind {
    fn from_u16(v: u16) -> Result<Self> {
        match v {
            1 => Ok(Self::Frame),
            2 => Ok(Self::Cube),
            3 => Ok(Self::Precoder),
            _ => Err(Error::invalid(format!("unknown dump kind {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub dims: [u32; 3],
    pub tag: u64,
}

impl DumpHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&(self.kind as u16).to_le_bytes());
        for (k, d) in self.dims.iter().enumerate() {
            b[8 + 4 * k..12 + 4 * k].copy_from_slice(&d.to_le_bytes());
        }
        b[24..32].copy_from_slice(&self.tag.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN || b[0..4] != MAGIC {
            return Err(Error::invalid("not a complex-array dump (bad magic)"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        Ok(Self {
            kind: DumpKind::from_u16(u16::from_le_bytes([b[4], b[5]]))?,
            dims: [u32_at(8), u32_at(12), u32_at(16)],
            tag: u64::from_le_bytes(b[24..32].try_into().unwrap()),
        })
    }

    fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("dimension {n} too large for dump header")))
}

/// Serialize header plus samples.
pub fn encode(header: &DumpHeader, samples: impl IntoIterator<Item = C64>) -> Vec<u8> {
    let mut out = header.to_bytes().to_vec();
    out.reserve(16 * header.len());
    for s in samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

/// Parse a dump into its header and samples.
pub fn decode(bytes: &[u8]) -> Result<(DumpHeader, Vec<C64>)> {
    let header = DumpHeader::from_bytes(bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 16 * header.len() {
        return Err(Error::invalid(format!(
            "dump body has {} bytes, header implies {}",
            body.len(),
            16 * header.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let samples = body.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
    Ok((header, samples))
}

fn matrix_bytes(m: &CMatrix, kind: DumpKind, tag: u64) -> Result<Vec<u8>> {
    let header = DumpHeader { kind, dims: [dim(m.nrows())?, dim(m.ncols())?, 1], tag };
    Ok(encode(&header, (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]))))
}

fn matrix_from(header: &DumpHeader, samples: Vec<C64>) -> CMatrix {
    CMatrix::from_row_iterator(header.dims[0] as usize, header.dims[1] as usize, samples)
}

fn read_kind(path: &Path, kind: DumpKind) -> Result<(DumpHeader, Vec<C64>)> {
    let (h, s) = decode(&fs::read(path)?)?;
    if h.kind != kind {
        return Err(Error::invalid(format!("{}: expected {:?} dump, found {:?}", path.display(), kind, h.kind)));
    }
    Ok((h, s))
}

/// Dump an N_t x N_s symbol matrix of OFDM symbol `mu`.
pub fn write_frame(path: &Path, symbols: &CMatrix, mu: usize) -> Result<()> {
    Ok(fs::write(path, matrix_bytes(symbols, DumpKind::Frame, mu as u64)?)?)
}

pub fn read_frame(path: &Path) -> Result<(CMatrix, usize)> {
    let (h, s) = read_kind(path, DumpKind::Frame)?;
    Ok((matrix_from(&h, s), h.tag as usize))
}

pub fn write_precoder(path: &Path, p: &CMatrix) -> Result<()> {
    Ok(fs::write(path, matrix_bytes(p, DumpKind::Precoder, 0)?)?)
}

pub fn read_precoder(path: &Path) -> Result<CMatrix> {
    let (h, s) = read_kind(path, DumpKind::Precoder)?;
    Ok(matrix_from(&h, s))
}

pub fn write_cube(path: &Path, cube: &RadarCube, seed: u64) -> Result<()> {
    let (nr, ns, np) = cube.dims();
    let header = DumpHeader { kind: DumpKind::Cube, dims: [dim(nr)?, dim(ns)?, dim(np)?], tag: seed };
    Ok(fs::write(path, encode(&header, cube.as_slice().iter().copied()))?)
}

pub fn read_cube(path: &Path) -> Result<(RadarCube, u64)> {
    let (h, s) = read_kind(path, DumpKind::Cube)?;
    let [nr, ns, np] = h.dims.map(|d| d as usize);
    Ok((RadarCube::from_vec(nr, ns, np, s)?, h.tag))
}

pub fn write_estimates_json(path: &Path, estimates: &[TargetEstimate]) -> Result<()> {
    Ok(fs::write(path, serde_json::to_string_pretty(estimates)?)?)
}

pub fn read_estimates_json(path: &Path) -> Result<Vec<TargetEstimate>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// One JSON object per line.
pub fn write_iteration_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for rec in log {
        serde_json::to_writer(&mut f, rec)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_iteration_log(path: &Path) -> Result<Vec<IterationRecord>> {
    BufReader::new(fs::File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> CMatrix {
        CMatrix::from_fn(3, 5, |r, c| C64::new(r as f64 + 0.25, -(c as f64) * 1.5))
    }

    #[test]
    fn header_layout() {
        let h = DumpHeader { kind: DumpKind::Cube, dims: [32, 512, 256], tag: 0xdead_beef };
        let b = h.to_bytes();
        assert_eq!(&b[0..4], b"SDFR");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 2);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 512);
        assert_eq!(DumpHeader::from_bytes(&b).unwrap(), h);
    }

    #[test]
    fn frame_roundtrip_is_bit_exact_and_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let m = sample_matrix();
        write_frame(&path, &m, 7).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 15);
        let second_re = f64::from_le_bytes(bytes[48..56].try_into().unwrap());
        assert_eq!(second_re, m[(0, 1)].re);
        let (back, mu) = read_frame(&path).unwrap();
        assert_eq!(mu, 7);
        assert_eq!(back, m);
        assert!(read_precoder(&path).is_err());
    }

    #[test]
    fn cube_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let data: Vec<C64> = (0..24).map(|k| C64::new(k as f64, 1.0 / (k + 1) as f64)).collect();
        let cube = RadarCube::from_vec(2, 3, 4, data).unwrap();
        write_cube(&path, &cube, 99).unwrap();
        let (back, seed) = read_cube(&path).unwrap();
        assert_eq!(seed, 99);
        assert_eq!(back.as_slice(), cube.as_slice());
    }

    #[test]
    fn truncated_body_is_rejected() {
        let m = sample_matrix();
        let mut b = matrix_bytes(&m, DumpKind::Precoder, 0).unwrap();
        b.pop();
        assert!(decode(&b).is_err());
        assert!(decode(b"nope").is_err());
    }
}
