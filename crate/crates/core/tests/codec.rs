use std::sync::OnceLock;

use proptest::prelude::*;
use trackwatch::codec::{
    build_code, inspect, min_distance, parse_code_text, CodecError, Codeword, GeneratorMatrix,
    LinearCode, Payload12,
};

fn shared_code() -> &'static LinearCode {
    static CODE: OnceLock<LinearCode> = OnceLock::new();
    CODE.get_or_init(LinearCode::default_code)
}

/// `m·G` computed row-by-row from the bit strings, independent of the
/// library's packed arithmetic.
fn encode_oracle(code: &LinearCode, message: u64) -> Vec<u8> {
    let n = code.n();
    let k = code.k();
    let mut word = vec![0u8; n];
    for (i, row) in code.generator().rows().iter().enumerate() {
        if (message >> (k - 1 - i)) & 1 == 1 {
            let bits = format!("{row:0n$b}");
            for (w, b) in word.iter_mut().zip(bits.bytes()) {
                *w ^= b - b'0';
            }
        }
    }
    word
}

/// Every `n`-bit pattern of weight at most `max_weight`.
fn all_patterns(n: usize, max_weight: usize) -> Vec<u64> {
    let mut out = vec![0u64];
    let mut frontier = vec![0u64];
    for _ in 0..max_weight {
        let mut next = Vec::new();
        for &p in &frontier {
            // extend only above the highest set bit so each set is built once
            let start = if p == 0 {
                0
            } else {
                64 - p.leading_zeros() as usize
            };
            next.extend((start..n).map(|i| p | (1 << i)));
        }
        out.extend(&next);
        frontier = next;
    }
    out
}

#[test]
fn min_distance_matches_direct_enumeration() {
    let code = LinearCode::default_code();
    let direct = (1u64..(1 << 12))
        .map(|m| encode_oracle(&code, m).iter().filter(|&&b| b == 1).count())
        .min()
        .unwrap();
    assert_eq!(direct as u32, code.d_min());
    assert_eq!(min_distance(code.generator()), code.d_min());
    assert!(code.d_min() >= 5);
}

#[test]
fn encode_matches_oracle_and_is_systematic() {
    let code = LinearCode::default_code();
    for m in (0u64..4096).step_by(37).chain([0x001, 0xFFF]) {
        let cw = code.encode(m);
        let oracle: String = encode_oracle(&code, m)
            .iter()
            .map(|b| (b'0' + b) as char)
            .collect();
        assert_eq!(cw.to_string(), oracle);
        assert_eq!(&oracle[..12], format!("{m:012b}"));
    }
}

#[test]
fn round_trip_all_payloads() {
    let code = LinearCode::default_code();
    for bits in 0..=Payload12::MAX {
        let p = Payload12::from_bits(bits).unwrap();
        let (a, v, g) = p.unpack();
        let cw = code.encode_payload(Payload12::pack(a, v, g).unwrap());
        assert_eq!(code.decode_payload(&cw).unwrap(), (p, 0));
    }
}

#[test]
fn syndromes_of_correctable_patterns_are_distinct() {
    let code = LinearCode::default_code();
    // H columns straight from the parity-check rows
    let h = code.parity_check();
    let column = |pos: usize| -> u64 {
        h.iter()
            .fold(0u64, |acc, row| (acc << 1) | ((row >> (28 - pos)) & 1))
    };
    let mut seen = std::collections::HashSet::new();
    seen.insert(0u64);
    for i in 0..29 {
        assert!(seen.insert(column(i)));
        for j in i + 1..29 {
            assert!(seen.insert(column(i) ^ column(j)), "collision at ({i},{j})");
        }
    }
    assert_eq!(seen.len(), 436);
    assert_eq!(code.syndrome_table_len(), 436);
}

#[test]
fn corrects_every_pattern_up_to_two_bits() {
    let code = LinearCode::default_code();
    let patterns = all_patterns(29, 2);
    assert_eq!(patterns.len(), 436);
    for payload in [0x000u16, 0x5AB, 0xFFF, 0x123] {
        let p = Payload12::from_bits(payload).unwrap();
        let cw = code.encode_payload(p);
        for &e in &patterns {
            let (got, fixed) = code.decode_payload(&cw.with_errors(e)).unwrap();
            assert_eq!(got, p);
            assert_eq!(fixed, e.count_ones());
        }
    }
}

#[test]
fn other_parameters_meet_their_distance() {
    for (k, n, t, seed) in [
        (4, 7, 1, 0),
        (8, 16, 1, 5),
        (7, 15, 2, 3),
        (12, 29, 2, 7),
        (12, 29, 0, 1),
    ] {
        let code = build_code(k, n, t, seed).unwrap();
        assert!(code.d_min() as usize > 2 * t);
        assert_eq!(code.generator().rank(), k);
        assert!(code
            .generator()
            .times_parity_check_transposed(code.parity_check())
            .iter()
            .all(|&r| r == 0));
        for e in all_patterns(n, t) {
            let cw = code.encode(1);
            assert_eq!(code.decode(&cw.with_errors(e)).unwrap().message, 1);
        }
    }
}

#[test]
fn loaded_code_equals_generated() {
    let code = LinearCode::default_code();
    let (g, t) = parse_code_text(&code.to_text()).unwrap();
    let loaded = LinearCode::from_generator(g, t).unwrap();
    assert_eq!(loaded.generator(), code.generator());
    assert_eq!(loaded.report(), code.report());
    assert_eq!(inspect(code.generator(), 2).unwrap(), code.report());
}

#[test]
fn repetition_code_from_text() {
    let (g, t) = parse_code_text("3 1 1\n111\n").unwrap();
    let code = LinearCode::from_generator(g, t).unwrap();
    assert_eq!(code.d_min(), 3);
    let cw = Codeword::from_bit_str("101").unwrap();
    assert_eq!(code.decode(&cw).unwrap().message, 1);
    let cw = Codeword::from_bit_str("100").unwrap();
    assert_eq!(code.decode(&cw).unwrap().message, 0);
}

#[test]
fn non_systematic_generator_rejected() {
    let g = GeneratorMatrix::new(3, 1, vec![0b011]).unwrap();
    assert!(matches!(
        LinearCode::from_generator(g, 0),
        Err(CodecError::NotSystematic { row: 0 })
    ));
}

proptest! {
    #[test]
    fn encoding_is_linear(a in 0u64..4096, b in 0u64..4096) {
        let code = shared_code();
        prop_assert_eq!(code.encode(a).bits() ^ code.encode(b).bits(), code.encode(a ^ b).bits());
    }

    #[test]
    fn decode_never_guesses_past_table(p in 0u16..4096, e in any::<u32>()) {
        let code = shared_code();
        let e = u64::from(e) & ((1 << 29) - 1);
        let r = code.encode_payload(Payload12::from_bits(p).unwrap()).with_errors(e);
        match code.decode(&r) {
            Ok(d) => {
                let fixed = code.encode(d.message).bits() ^ r.bits();
                prop_assert!(fixed.count_ones() <= 2);
                prop_assert_eq!(fixed.count_ones(), d.corrected);
            }
            Err(CodecError::DecodeFailure { syndrome }) => {
                prop_assert!(code.coset_leader(syndrome).is_none());
            }
            Err(other) => prop_assert!(false, "unexpected {other}"),
        }
    }
}
