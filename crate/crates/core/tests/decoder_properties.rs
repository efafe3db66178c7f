//! Black-box properties of the decoder over random inputs.

use ladn_core::cascade::CascadedSystem;
use ladn_core::channel::{make_samples, CodewordMode, SnrConvention};
use ladn_core::exec::Sequential;
use ladn_core::gf2::SystematicEncoder;
use ladn_core::unfold::forward;
use ladn_core::{decode, hard_decision, Decoder, DecoderParams, MuSchedule, ParityCheckMatrix};
use proptest::prelude::*;

fn hamming() -> ParityCheckMatrix {
    ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).unwrap()
}

fn variants(k: usize) -> Vec<DecoderParams> {
    let mut i = DecoderParams::ladn_i(0.8, 1.2, k);
    if let MuSchedule::PerStage(m) = &mut i.mu {
        for (j, v) in m.iter_mut().enumerate() {
            *v = 0.9 + 0.05 * j as f64;
        }
    }
    vec![
        DecoderParams::fixed_l2(1.0, 1.2, k),
        DecoderParams::ladn(0.5, 1.0, k),
        i,
        DecoderParams::ladn_p(vec![0.45, 0.35, 0.25, 0.15, 0.05], 1.2, k),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iterates_stay_in_bounds(llr in prop::collection::vec(-8.0f64..8.0, 7), which in 0usize..4) {
        let sys = CascadedSystem::build(&hamming());
        let p = &variants(12)[which];
        let out = decode(&sys, &llr, p, true).unwrap();
        let trace = out.trace.as_ref().unwrap();
        prop_assert_eq!(trace.stages.len(), 12);
        for s in &trace.stages {
            prop_assert!(s.u.iter().all(|&u| (0.0..=1.0).contains(&u)));
            prop_assert!(s.z.iter().all(|&z| z >= 0.0));
        }
        prop_assert_eq!(&out.bits, &hard_decision(&out.u, 7));
        prop_assert!(out.residual >= 0.0);
    }

    #[test]
    fn reused_decoder_matches_fresh(a in prop::collection::vec(-8.0f64..8.0, 7), b in prop::collection::vec(-8.0f64..8.0, 7), which in 0usize..4) {
        let sys = CascadedSystem::build(&hamming());
        let p = &variants(9)[which];
        let mut dec = Decoder::new(&sys, p).unwrap();
        dec.decode(&a, false).unwrap();
        let again = dec.decode(&b, true).unwrap();
        prop_assert_eq!(again, decode(&sys, &b, p, true).unwrap());
    }

    #[test]
    fn network_forward_matches_decoder(llr in prop::collection::vec(-8.0f64..8.0, 7), which in 0usize..4) {
        let sys = CascadedSystem::build(&hamming());
        let p = &variants(7)[which];
        let out = decode(&sys, &llr, p, true).unwrap();
        let tape = forward(&sys, p, &llr).unwrap();
        let trace = out.trace.unwrap();
        for (k, s) in trace.stages.iter().enumerate() {
            prop_assert_eq!(tape.u(k), s.u.as_slice());
            prop_assert_eq!(tape.z(k), s.z.as_slice());
            prop_assert_eq!(tape.y(k), s.y.as_slice());
        }
        prop_assert_eq!(tape.residuals(), trace.residuals.as_slice());
        prop_assert_eq!(tape.hard_decision(), out.bits);
    }
}

#[test]
fn noiseless_codewords_decode_exactly() {
    let h = hamming();
    let sys = CascadedSystem::build(&h);
    let enc = SystematicEncoder::full_rank(&h).unwrap();
    for m in 0..16u8 {
        let msg: Vec<u8> = (0..4).map(|i| (m >> i) & 1).collect();
        let x = enc.encode(&msg).unwrap();
        let llr: Vec<f64> = x.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect();
        for p in variants(100) {
            assert_eq!(decode(&sys, &llr, &p, false).unwrap().bits, x, "{:?} on {x:?}", p.variant);
        }
    }
}

#[test]
fn high_snr_block_errors_are_rare() {
    let h = hamming();
    let sys = CascadedSystem::build(&h);
    let samples = make_samples(&Sequential, &h, 500, 8.0, SnrConvention::EbN0, CodewordMode::RandomMessage, 3).unwrap();
    let p = DecoderParams::fixed_l2(1.0, 1.2, 100);
    let errors = samples.iter().filter(|s| decode(&sys, &s.v, &p, false).unwrap().bits != s.x).count();
    assert!(errors <= 2, "{errors} block errors at 8 dB");
}
