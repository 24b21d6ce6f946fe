mod common;

use common::{ordered_model, sequence, weighted_model};
use drsc_core::codec::*;
use drsc_core::numerics::{binary_interval, mbi};
use drsc_core::source::{divergence, sequence_probability};
use drsc_core::{BitString, Rational, SourceModel, UnitInterval};
use proptest::prelude::*;

/// `I(x^n)` by repeated rational subdivision.
fn rational_interval(map: &ArithmeticMap, x: &[usize]) -> UnitInterval {
    let mut i = UnitInterval::unit();
    for &s in x {
        let sub = map.symbol_interval(s).unwrap();
        i = UnitInterval::new(i.lerp(sub.low()), i.width() * sub.width()).unwrap();
    }
    i
}

/// Delay of each position by brute force: position `j` is decoded at the
/// first `t` whose emitted bits select a region inside `I(x^j)`.
fn brute_delays(map: &ArithmeticMap, x: &[usize]) -> Vec<Option<u64>> {
    let prefixes: Vec<UnitInterval> = (1..=x.len()).map(|j| rational_interval(map, &x[..j])).collect();
    let regions: Vec<UnitInterval> = (1..=x.len()).map(|t| binary_interval(&mbi(&prefixes[t - 1]))).collect();
    (0..x.len())
        .map(|j| (j..x.len()).find(|&t| regions[t].is_subset_of(&prefixes[j])).map(|t| (t - j) as u64))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip(p in ordered_model(2..=6, 9), n in 0usize..120, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        let bits = encode(&map, &x).unwrap();
        prop_assert_eq!(decode(&map, &bits, n as u64).unwrap(), x);
    }

    #[test]
    fn emitted_bits_are_mbi_of_the_interval(p in ordered_model(2..=5, 9), n in 1usize..40, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        let mut enc = ArithmeticEncoder::new(&map);
        for j in 0..n {
            enc.encode(x[j]).unwrap();
            let exact = rational_interval(&map, &x[..=j]);
            prop_assert_eq!(enc.bits(), &mbi(&exact));
            prop_assert_eq!(enc.state().true_interval(enc.bits()), exact.clone());
            prop_assert_eq!(enc.state().true_width(), sequence_probability(&p, &x[..=j]));
        }
    }

    #[test]
    fn encoding_is_prefix_consistent(p in weighted_model(2..=5, 9), n in 1usize..60, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        let mut state = EncoderState::new();
        let mut all = BitString::new();
        for (j, &s) in x.iter().enumerate() {
            let step = encode_step(&mut state, &map, s).unwrap();
            all.extend_from(&step);
            let mut again = ArithmeticEncoder::new(&map);
            for &t in &x[..=j] {
                again.encode(t).unwrap();
            }
            prop_assert_eq!(again.bits(), &all);
        }
    }

    #[test]
    fn delay_profile_matches_brute_force(p in ordered_model(2..=4, 7), n in 1usize..30, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        prop_assert_eq!(delay_profile(&map, &x).unwrap(), brute_delays(&map, &x));
    }

    #[test]
    fn incremental_decoding_follows_the_delay_profile(p in weighted_model(2..=5, 9), n in 1usize..60, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        let profile = delay_profile(&map, &x).unwrap();
        let mut state = EncoderState::new();
        let mut dec = DecoderState::new();
        let mut decoded = Vec::new();
        for (t, &s) in x.iter().enumerate() {
            let bits = encode_step(&mut state, &map, s).unwrap();
            decoded.extend(decode_feed(&mut dec, &map, &bits, n as u64));
            // Exactly the positions with delay <= t - j are out.
            let expect = profile.iter().enumerate().take_while(|(j, d)| matches!(d, Some(d) if j + *d as usize <= t)).count();
            prop_assert_eq!(decoded.len(), expect);
            prop_assert_eq!(&decoded[..], &x[..expect]);
        }
    }

    #[test]
    fn flush_terminates_inside_the_interval(p in weighted_model(2..=5, 9), n in 1usize..40, seed in any::<u64>()) {
        let map = make_arithmetic(&p);
        let x = sequence(&p, n, seed);
        let code = encode(&map, &x).unwrap();
        prop_assert!(binary_interval(&code).is_subset_of(&rational_interval(&map, &x)));
    }
}

#[test]
fn zero_probability_symbols_never_decode() {
    let p = SourceModel::from_pairs(&[(1, 3), (0, 1), (2, 3)]).unwrap();
    let map = make_arithmetic(&p);
    let x = common::sequence(&p, 200, 5);
    assert!(!x.contains(&1));
    assert_eq!(decode(&map, &encode(&map, &x).unwrap(), 200).unwrap(), x);
}

#[test]
fn truncated_stream_is_reported() {
    let p = SourceModel::uniform(3).unwrap();
    let map = make_arithmetic(&p);
    let x = common::sequence(&p, 50, 1);
    let mut code = encode(&map, &x).unwrap();
    code.truncate(code.len() / 2);
    assert!(matches!(decode(&map, &code, 50), Err(drsc_core::Error::Truncated { .. })));
}

#[test]
fn precision_ceiling_is_enforced() {
    let p = SourceModel::uniform(3).unwrap();
    let map = make_arithmetic(&p);
    let mut enc = ArithmeticEncoder::new(&map).with_precision_ceiling(64);
    let err = (0..100).map(|i| enc.encode(i % 3)).find_map(Result::err);
    assert!(matches!(err, Some(drsc_core::Error::PrecisionCeiling { ceiling: 64, .. })));
}

#[test]
fn dyadic_matched_source_has_zero_redundancy_and_delay() {
    let p = SourceModel::from_pairs(&[(1, 2), (1, 4), (1, 8), (1, 8)]).unwrap();
    let map = make_arithmetic(&p);
    let fresh = ArithmeticEncoder::new(&map);
    for n in 1..=4 {
        let r = exact_redundancy(&fresh, n, &p).unwrap();
        assert!(r.redundancy.abs() < 1e-12);
        assert!(r.excess_length.abs() < 1e-12);
    }
    let x = common::sequence(&p, 300, 2);
    assert!(delay_profile(&map, &x).unwrap().iter().all(|d| *d == Some(0)));
}

#[test]
fn mismatched_redundancy_is_the_divergence() {
    let p = SourceModel::from_pairs(&[(1, 2), (1, 4), (1, 4)]).unwrap();
    let q = SourceModel::from_pairs(&[(2, 5), (3, 10), (3, 10)]).unwrap();
    let map = make_arithmetic(&q);
    let fresh = ArithmeticEncoder::new(&map);
    let d = divergence(&p, &q).unwrap();
    for n in 1..=5 {
        let r = exact_redundancy(&fresh, n, &p).unwrap();
        assert!((r.redundancy - d).abs() < 1e-12, "n = {n}: {} vs {d}", r.redundancy);
        // Expected length never beats the induced measure.
        assert!(r.excess_length <= r.redundancy + 1e-12);
    }
}

#[test]
fn instantaneous_redundancy_of_plain_coding_is_d_times_divergence() {
    let p = SourceModel::from_pairs(&[(1, 2), (1, 4), (1, 4)]).unwrap();
    let q = SourceModel::from_pairs(&[(1, 3), (1, 3), (1, 3)]).unwrap();
    let map = make_arithmetic(&q);
    let mut enc = ArithmeticEncoder::new(&map);
    for &s in &[0, 2, 1, 0] {
        enc.encode(s).unwrap();
    }
    let d = divergence(&p, &q).unwrap();
    for depth in 1..=4 {
        let r = instantaneous_redundancy(&enc, depth, &p).unwrap();
        assert!((r - depth as f64 * d).abs() < 1e-9);
    }
}

#[test]
fn induced_measure_is_the_sequence_probability() {
    let p = SourceModel::from_pairs(&[(1, 3), (1, 5), (7, 15)]).unwrap();
    let map = make_arithmetic(&p);
    let fresh = ArithmeticEncoder::new(&map);
    let x = common::sequence(&p, 25, 9);
    assert_eq!(induced_measure(&fresh, &x).unwrap(), sequence_probability(&p, &x));
    assert_eq!(induced_measure(&fresh, &[]).unwrap(), Rational::one());
}

#[test]
fn plain_arithmetic_coding_passes_gim_checks() {
    let p = SourceModel::from_pairs(&[(1, 2), (1, 4), (1, 4)]).unwrap();
    let map = make_arithmetic(&p);
    let mut enc = ArithmeticEncoder::new(&map);
    for &s in &[0, 1, 2, 2, 0] {
        let cover = gim_representation(&enc, 2).unwrap();
        assert!(!cover.is_empty());
        enc.encode(s).unwrap();
    }
}
