use drsc_core::numerics::{binary_interval, mbi, shortest_dyadic_inside};
use drsc_core::{BitString, Rational, UnitInterval};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = UnitInterval> {
    (2u32..600).prop_flat_map(|q| (Just(q), 0..q, 1..=q)).prop_filter_map("empty", |(q, a, b)| {
        (a < b).then(|| UnitInterval::from_bounds(Rational::new(a, q).unwrap(), Rational::new(b, q).unwrap()).unwrap())
    })
}

fn all_strings(len: usize) -> impl Iterator<Item = BitString> {
    (0u64..1 << len).map(move |v| (0..len).rev().map(|j| v >> j & 1 == 1).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mbi_is_the_longest_cover(i in interval()) {
        let b = mbi(&i);
        prop_assert!(i.is_subset_of(&binary_interval(&b)));
        // The longest covering string is unique and no longer cover exists.
        let longest = (0..=12).rev()
            .flat_map(all_strings)
            .find(|c| i.is_subset_of(&binary_interval(c)))
            .unwrap();
        prop_assert_eq!(&b, &longest);
    }

    #[test]
    fn shortest_inside_is_minimal_and_leftmost(i in interval()) {
        let b = shortest_dyadic_inside(&i);
        prop_assert!(binary_interval(&b).is_subset_of(&i));
        let brute = (0..=12).flat_map(all_strings).find(|c| binary_interval(c).is_subset_of(&i)).unwrap();
        prop_assert_eq!(b, brute);
    }

    #[test]
    fn bit_strings_roundtrip_through_text(bits in prop::collection::vec(any::<bool>(), 0..80)) {
        let b = BitString::from_bits(bits);
        prop_assert_eq!(b.to_string().parse::<BitString>().unwrap(), b);
    }

    #[test]
    fn rationals_roundtrip_through_text(n in -10_000i64..10_000, d in 1i64..10_000) {
        let r = Rational::new(n, d).unwrap();
        prop_assert_eq!(r.to_string().parse::<Rational>().unwrap(), r.clone());
        prop_assert!((r.to_f64() - n as f64 / d as f64).abs() < 1e-12);
    }

    #[test]
    fn log2_tracks_floating_point(n in 1u64..u64::MAX, shift in 0u32..300) {
        let r = Rational::new(n, 1u32).unwrap() * Rational::dyadic(shift as u64);
        prop_assert!((r.log2() - ((n as f64).log2() - shift as f64)).abs() < 1e-9);
    }
}

#[test]
fn decimals_parse_exactly() {
    assert_eq!("0.125".parse::<Rational>().unwrap(), Rational::new(1, 8).unwrap());
    assert_eq!("-1.5".parse::<Rational>().unwrap(), Rational::new(-3, 2).unwrap());
    assert_eq!(" 3 / 6 ".parse::<Rational>().unwrap(), Rational::new(1, 2).unwrap());
    assert!("1/0".parse::<Rational>().is_err());
    assert!("1.".parse::<Rational>().is_err());
    assert!("abc".parse::<Rational>().is_err());
    assert!("012x".parse::<BitString>().is_err());
}

#[test]
fn dyadic_intervals_are_their_own_mbi() {
    for b in (0..=6).flat_map(all_strings) {
        let i = binary_interval(&b);
        assert_eq!(mbi(&i), b);
        assert_eq!(shortest_dyadic_inside(&i), b);
    }
}
