use super::*;
use crate::channel::{build_comm_channel, CommGeometry, ScattererLaw};
use crate::rng::{child_rng, complex_normal, Stream};
use crate::waveform::{qpsk_modulate, random_symbol_frame};

fn cfg(nt: usize, m: usize) -> SystemConfig {
    let mut c = SystemConfig::reference_config(nt, m);
    c.num_subcarriers = 32;
    c.num_comm_rx = 2 * nt;
    c
}

fn channel(cfg: &SystemConfig, seed: u64) -> CommChannel {
    let g = CommGeometry { range_m: 50.0, departure_rad: 0.5, incidence_rad: -0.8 };
    build_comm_channel(cfg, g, &ScattererLaw::default(), &mut child_rng(seed, Stream::Channel, 0)).unwrap()
}

fn random_matrix(r: usize, c: usize, seed: u64) -> CMatrix {
    let mut rng = child_rng(seed, Stream::Precoder, 0);
    CMatrix::from_fn(r, c, |_, _| complex_normal(&mut rng, 1.0))
}

#[test]
fn identity_noiseless_recovers_symbols() {
    let bits = [0u8, 1, 1, 1, 1, 0, 0, 0];
    let q = CVector::from_vec(qpsk_modulate(&bits).unwrap());
    let d = ls_decode_shared(&q, &CMatrix::identity(4, 4), &CMatrix::identity(4, 4), 0).unwrap();
    assert_eq!(d.symbols, q);
}

#[test]
fn consistent_system_has_tiny_residual_and_orthogonal_error() {
    let h = random_matrix(12, 4, 1);
    let p = random_matrix(4, 4, 2);
    let q = CVector::from_vec(qpsk_modulate(&[0, 0, 1, 1, 0, 1, 1, 0]).unwrap());
    let r = &h * &p * &q;
    let d = ls_decode_shared(&r, &h, &p, 3).unwrap();
    assert!(d.residual < 1e-9);
    let noisy = &r + random_matrix(12, 1, 3).column(0) * C64::new(0.3, 0.0);
    let d = ls_decode_shared(&noisy, &h, &p, 3).unwrap();
    let hp = &h * &p;
    let res = &noisy - &hp * &d.estimate;
    for k in 0..4 {
        assert!(hp.column(k).dotc(&res).norm() < 1e-9);
    }
}

#[test]
fn rank_deficiency_names_subcarrier() {
    let h = random_matrix(8, 1, 4) * random_matrix(1, 4, 5);
    let r = CVector::zeros(8);
    match ls_decode_shared(&r, &h, &CMatrix::identity(4, 4), 17) {
        Err(Error::RankDeficient { subcarrier }) => assert_eq!(subcarrier, 17),
        other => panic!("{other:?}"),
    }
}

#[test]
fn private_decode_ignores_noise_orthogonal_to_owner_column() {
    let h = random_matrix(6, 3, 6);
    let s = QPSK_POINTS[2];
    let scale = 2.0;
    let clean = h.column(1) * (s * scale);
    let noise = random_matrix(6, 1, 7).column(0).into_owned() * C64::new(5.0, 0.0);
    let hn = h.column(1).into_owned();
    let orth = &noise - &hn * (hn.dotc(&noise) / hn.norm_squared());
    assert!(hn.dotc(&orth).norm() < 1e-9);
    assert_eq!(decode_private(&(&clean + &orth), &h, 1, scale), s);
    assert_eq!(decode_private(&clean, &h, 1, scale), s);
}

#[test]
fn detection_finds_exact_private_set() {
    let c = cfg(4, 2);
    let ch = channel(&c, 1);
    let p = random_matrix(4, 4, 9);
    for seed in 0..5 {
        let (f, _) = random_symbol_frame(&p, &c, 0, &mut child_rng(seed, Stream::Bits, 0)).unwrap();
        let r = crate::channel::apply_comm_channel(&ch, &f, 0.0, &mut child_rng(0, Stream::CommNoise, 0)).unwrap();
        assert_eq!(detect_private(&r, &ch.h, 10.0).unwrap(), c.private_set);
    }
    let c0 = cfg(4, 0);
    let ch0 = channel(&c0, 1);
    let (f, _) = random_symbol_frame(&p, &c0, 0, &mut child_rng(1, Stream::Bits, 0)).unwrap();
    let r = crate::channel::apply_comm_channel(&ch0, &f, 0.0, &mut child_rng(0, Stream::CommNoise, 0)).unwrap();
    assert!(detect_private(&r, &ch0.h, 10.0).unwrap().is_empty());
}

#[test]
fn noiseless_end_to_end_is_error_free_for_every_m() {
    for m in 0..=4 {
        let c = cfg(4, m);
        let ch = channel(&c, 2);
        let p = random_matrix(4, 4, 10 + m as u64);
        let rx = CommReceiver::new(&ch, &p, true).unwrap();
        let (f, bits) = random_symbol_frame(&p, &c, 0, &mut child_rng(m as u64, Stream::Bits, 0)).unwrap();
        let r = crate::channel::apply_comm_channel(&ch, &f, 0.0, &mut child_rng(0, Stream::CommNoise, 0)).unwrap();
        let known = rx.decode(&r, Some(&c.private_set)).unwrap();
        assert_eq!(ber(&bits, &known.bits).unwrap(), 0.0);
        let blind = rx.decode(&r, None).unwrap();
        assert_eq!(blind.private_set, c.private_set);
        assert_eq!(ber(&bits, &blind.bits).unwrap(), 0.0);
    }
}

#[test]
fn ber_basics() {
    let a = [0u8, 1, 1, 0];
    assert_eq!(ber(&a, &a).unwrap(), 0.0);
    assert_eq!(ber(&a, &[1, 0, 0, 1]).unwrap(), 1.0);
    assert_eq!(ber(&a, &[1, 0, 1, 0]).unwrap(), 0.5);
    assert!(ber(&a, &[0]).is_err());
}

#[test]
fn bit_classes_follow_frame_order() {
    let c = cfg(3, 2);
    let cl = bit_classes(&c);
    assert_eq!(cl.len(), c.bits_per_ofdm_symbol());
    assert_eq!(&cl[..4], &[true; 4]);
    assert!(cl[4..].iter().all(|b| !b));
}
