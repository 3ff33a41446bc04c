use std::f64::consts::FRAC_1_SQRT_2;

use crate::{C64, Error, Result};

/// Constellation in Gray order: 00, 01, 11, 10.
pub const QPSK_POINTS: [C64; 4] = [
    C64 { re: FRAC_1_SQRT_2, im: FRAC_1_SQRT_2 },
    C64 { re: -FRAC_1_SQRT_2, im: FRAC_1_SQRT_2 },
    C64 { re: -FRAC_1_SQRT_2, im: -FRAC_1_SQRT_2 },
    C64 { re: FRAC_1_SQRT_2, im: -FRAC_1_SQRT_2 },
];

const GRAY_BITS: [[u8; 2]; 4] = [[0, 0], [0, 1], [1, 1], [1, 0]];

/// Map one bit pair to its unit-power symbol.
pub fn qpsk_map(b0: u8, b1: u8) -> C64 {
    // first bit selects the sign of the quadrature part, second the in-phase
    let re = if b1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if b0 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

pub fn qpsk_modulate(bits: &[u8]) -> Result<Vec<C64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::invalid(format!("odd bit count {}", bits.len())));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::invalid(format!("bit value {b} is not 0 or 1")));
    }
    Ok(bits.chunks_exact(2).map(|p| qpsk_map(p[0], p[1])).collect())
}

/// Index into [`QPSK_POINTS`] of the nearest point. Exact ties go to the
/// lower Gray index (so 0+1j decodes as 00 and 0-1j as 11).
pub fn qpsk_slice(s: C64) -> usize {
    match (s.re.partial_cmp(&0.0), s.im.partial_cmp(&0.0)) {
        (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Less)) => 2,
        (Some(std::cmp::Ordering::Less), _) => 1,
        (Some(std::cmp::Ordering::Equal), Some(std::cmp::Ordering::Less)) => 2,
        (_, Some(std::cmp::Ordering::Less)) => 3,
        _ => 0,
    }
}

/// Hard-decision demodulation, two bits per symbol.
pub fn qpsk_demodulate(symbols: &[C64]) -> Vec<u8> {
    symbols.iter().flat_map(|&s| GRAY_BITS[qpsk_slice(s)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S: f64 = FRAC_1_SQRT_2;

    #[test]
    fn mapping_table() {
        assert_eq!(qpsk_modulate(&[0, 0]).unwrap(), vec![C64::new(S, S)]);
        assert_eq!(
            qpsk_modulate(&[1, 1, 0, 0]).unwrap(),
            vec![C64::new(-S, -S), C64::new(S, S)]
        );
        assert_eq!(qpsk_modulate(&[0, 1]).unwrap(), vec![C64::new(-S, S)]);
        assert_eq!(qpsk_modulate(&[1, 0]).unwrap(), vec![C64::new(S, -S)]);
        for (k, bits) in GRAY_BITS.iter().enumerate() {
            assert_eq!(qpsk_map(bits[0], bits[1]), QPSK_POINTS[k]);
        }
    }

    #[test]
    fn odd_bits_rejected() {
        assert!(qpsk_modulate(&[0, 1, 1]).is_err());
        assert!(qpsk_modulate(&[0, 2]).is_err());
    }

    #[test]
    fn quadrant_decisions() {
        assert_eq!(qpsk_demodulate(&[C64::new(S, S)]), vec![0, 0]);
        assert_eq!(qpsk_demodulate(&[C64::new(0.9, 0.1)]), vec![0, 0]);
        assert_eq!(qpsk_demodulate(&[C64::new(-0.9, -1.1)]), vec![1, 1]);
    }

    #[test]
    fn boundary_ties_go_to_lower_gray_index() {
        assert_eq!(qpsk_demodulate(&[C64::new(0.0, 1.0)]), vec![0, 0]);
        assert_eq!(qpsk_demodulate(&[C64::new(-1.0, 0.0)]), vec![0, 1]);
        assert_eq!(qpsk_demodulate(&[C64::new(0.0, -1.0)]), vec![1, 1]);
        assert_eq!(qpsk_demodulate(&[C64::new(1.0, 0.0)]), vec![0, 0]);
        assert_eq!(qpsk_demodulate(&[C64::new(0.0, 0.0)]), vec![0, 0]);
    }

    #[test]
    fn slice_matches_brute_force_nearest() {
        for k in 0..400 {
            let s = C64::from_polar(0.3 + (k % 7) as f64 * 0.2, k as f64 * 0.173);
            let brute = (0..4)
                .min_by(|&a, &b| (s - QPSK_POINTS[a]).norm().total_cmp(&(s - QPSK_POINTS[b]).norm()))
                .unwrap();
            assert_eq!(qpsk_slice(s), brute);
        }
    }

    proptest! {
        #[test]
        fn roundtrip(bits in proptest::collection::vec(0u8..2, 0..64).prop_filter("even", |b| b.len() % 2 == 0)) {
            let syms = qpsk_modulate(&bits).unwrap();
            prop_assert!(syms.iter().all(|s| (s.norm() - 1.0).abs() < 1e-15));
            prop_assert_eq!(qpsk_demodulate(&syms), bits);
        }
    }
}
