use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trackwatch::channel::{transmit, ChannelParams, LossReason, TxOutcome};
use trackwatch::codec::Codeword;

fn zero_word() -> Codeword {
    Codeword::new(0, 29).unwrap()
}

#[test]
fn empirical_flip_rate_matches_distance_model() {
    let params = ChannelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for distance in [0.0, 800.0, 1600.0] {
        let p = params.bit_error_prob(distance);
        let frames = 100_000u64;
        let mut flips = 0u64;
        for _ in 0..frames {
            match transmit(&zero_word(), 0.0, distance, 20.0, 20.0, &params, &mut rng) {
                TxOutcome::Delivered { bits, flipped } => {
                    assert_eq!(bits.weight(), flipped);
                    flips += u64::from(flipped);
                }
                lost => panic!("unexpected {lost:?}"),
            }
        }
        let trials = (frames * 29) as f64;
        let sigma = (trials * p * (1.0 - p)).sqrt();
        let dev = (flips as f64 - trials * p).abs();
        assert!(
            dev <= 3.0 * sigma,
            "d={distance}: {flips} flips, expected {} ± {}",
            trials * p,
            3.0 * sigma
        );
    }
}

#[test]
fn fixed_seed_gives_identical_outcomes() {
    let params = ChannelParams::with_constant_ber(0.1);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..500)
            .map(|i| {
                transmit(
                    &zero_word(),
                    0.0,
                    f64::from(i),
                    30.0,
                    30.0,
                    &params,
                    &mut rng,
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn doppler_gate_boundary_is_strict() {
    let params = ChannelParams {
        doppler_tol_hz: 0.0,
        ..ChannelParams::noiseless()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // zero residual passes a zero tolerance
    assert!(matches!(
        transmit(&zero_word(), 0.0, 1.0, 50.0, 50.0, &params, &mut rng),
        TxOutcome::Delivered { .. }
    ));
    assert_eq!(
        transmit(&zero_word(), 0.0, 1.0, 50.0, 49.0, &params, &mut rng),
        TxOutcome::Lost(LossReason::DopplerFailure)
    );
}

proptest! {
    #[test]
    fn perfect_estimate_never_loses_to_doppler(speed in -400.0f64..400.0, d in 0.0f64..1600.0, seed in any::<u64>()) {
        let params = ChannelParams { doppler_tol_hz: 0.0, ..ChannelParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = transmit(&zero_word(), 0.0, d, speed, speed, &params, &mut rng);
        let delivered = matches!(out, TxOutcome::Delivered { .. });
        prop_assert!(delivered, "lost: {:?}", out);
    }

    #[test]
    fn beyond_range_always_lost(d in 1600.001f64..1e6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = transmit(&zero_word(), d, 0.0, 0.0, 0.0, &ChannelParams::default(), &mut rng);
        prop_assert_eq!(out, TxOutcome::Lost(LossReason::OutOfRange));
    }

    #[test]
    fn ber_monotone_in_distance(a in 0.0f64..3000.0, b in 0.0f64..3000.0) {
        let p = ChannelParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(p.bit_error_prob(lo) <= p.bit_error_prob(hi));
    }
}
