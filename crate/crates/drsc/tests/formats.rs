use drsc::container::{read_container, write_container, MAGIC, VERSION};
use drsc::pmf::{format_pmf, parse_pmf, unescape_token};
use drsc_core::delay_codec::{build_extended_model, dc_decode, dc_encode, StreamHeader};
use drsc_core::source::sample;
use drsc_core::{BitString, Rational, SourceModel};
use proptest::prelude::*;

fn header() -> impl Strategy<Value = StreamHeader> {
    (prop::collection::vec(1u64..1 << 40, 2..10), 1u64..1 << 20, any::<u64>()).prop_map(|(w, d, n)| {
        let total: u64 = w.iter().sum();
        StreamHeader { pmf: w.iter().map(|&x| Rational::new(x, total).unwrap()).collect(), d, n }
    })
}

/// The container by hand: fixed prefix, LEB128 by repeated 7-bit groups,
/// payload packed MSB-first.
fn manual_bytes(h: &StreamHeader, bits: &[bool]) -> Vec<u8> {
    fn leb(out: &mut Vec<u8>, mut v: u64) {
        loop {
            let group = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                out.push(group);
                return;
            }
            out.push(group | 0x80);
        }
    }
    let mut out = b"DRSC\x01".to_vec();
    leb(&mut out, h.pmf.len() as u64);
    for p in &h.pmf {
        leb(&mut out, p.numer().try_into().unwrap());
        leb(&mut out, p.denom().try_into().unwrap());
    }
    leb(&mut out, h.d);
    leb(&mut out, h.n);
    for chunk in bits.chunks(8) {
        let mut b = 0u8;
        for (i, &bit) in chunk.iter().enumerate() {
            if bit {
                b |= 0x80 >> i;
            }
        }
        out.push(b);
    }
    out
}

fn token() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![Just(' '), Just('\t'), Just('\n'), Just('\\'), Just('#'), Just('x'), Just('é'), Just('/')], 1..5)
        .prop_map(|c| c.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn container_roundtrips_bit_exactly(h in header(), bits in prop::collection::vec(any::<bool>(), 0..200)) {
        let bytes = write_container(&h, &BitString::from_bits(bits.clone())).unwrap();
        prop_assert_eq!(&bytes, &manual_bytes(&h, &bits));
        let (back, payload, start) = read_container(&bytes).unwrap();
        prop_assert_eq!(back, h);
        prop_assert_eq!(start as usize + bits.len().div_ceil(8), bytes.len());
        // Zero padding up to the byte boundary.
        prop_assert_eq!(&payload.bits()[..bits.len()], &bits[..]);
        prop_assert!(payload.bits()[bits.len()..].iter().all(|&b| !b));
        prop_assert_eq!(payload.len(), bits.len().div_ceil(8) * 8);
    }

    #[test]
    fn truncated_headers_report_their_offset(h in header(), cut in any::<prop::sample::Index>()) {
        let bytes = write_container(&h, &BitString::new()).unwrap();
        let at = cut.index(bytes.len());
        let e = read_container(&bytes[..at]).unwrap_err();
        prop_assert!(e.offset <= at as u64);
    }

    #[test]
    fn pmf_text_roundtrips(tokens in prop::collection::hash_set(token(), 2..6), seed in 1u64..1000) {
        let tokens: Vec<String> = tokens.into_iter().collect();
        let w: Vec<u64> = (0..tokens.len() as u64).map(|i| 1 + (seed * (i + 3)) % 11).collect();
        let total: u64 = w.iter().sum();
        let pmf = w.iter().map(|&x| Rational::new(x, total).unwrap()).collect();
        let m = SourceModel::with_tokens(pmf, tokens).unwrap();
        let back = parse_pmf(&format_pmf(&m)).unwrap();
        prop_assert_eq!(back.tokens(), m.tokens());
        prop_assert_eq!(back.pmf(), m.pmf());
    }
}

#[test]
fn encoded_streams_survive_the_container() {
    let p = SourceModel::from_pairs(&[(1, 3), (1, 3), (1, 6), (1, 6)]).unwrap();
    let model = build_extended_model(&p, 6).unwrap();
    let x = sample(&p, 2000, 3);
    let (h, bits, _) = dc_encode(&model, &x).unwrap();
    let bytes = write_container(&h, &bits).unwrap();
    let (h2, bits2, _) = read_container(&bytes).unwrap();
    assert_eq!(dc_decode(&h2, &bits2).unwrap(), x);
}

#[test]
fn bad_containers_are_rejected() {
    let h = StreamHeader { pmf: vec![Rational::new(1, 2).unwrap(); 2], d: 3, n: 4 };
    let good = write_container(&h, &BitString::from_bits(vec![true, false, true])).unwrap();
    assert_eq!(&good[..5], &[MAGIC[0], MAGIC[1], MAGIC[2], MAGIC[3], VERSION]);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(read_container(&bad).unwrap_err().offset, 0);
    let mut bad = good.clone();
    bad[4] = 2;
    assert_eq!(read_container(&bad).unwrap_err().offset, 4);
    // K = 1.
    let mut bad = good.clone();
    bad[5] = 1;
    assert_eq!(read_container(&bad).unwrap_err().offset, 5);
    // Zero denominator on the second symbol.
    let mut bad = good.clone();
    bad[9] = 0;
    assert_eq!(read_container(&bad).unwrap_err().offset, 9);
    // d = 0.
    let mut bad = good.clone();
    bad[10] = 0;
    assert_eq!(read_container(&bad).unwrap_err().offset, 10);
    // Probabilities that do not sum to one.
    let mut bad = good.clone();
    bad[6] = 2;
    assert!(read_container(&bad).unwrap_err().detail.contains("sum"));
    // An unterminated varint.
    let mut bad = good[..6].to_vec();
    bad.push(0x80);
    assert_eq!(read_container(&bad).unwrap_err().offset, 6);
}

#[test]
fn token_escapes() {
    assert_eq!(unescape_token("\\s\\t\\n\\\\\\#").unwrap(), " \t\n\\#");
    assert!(unescape_token("a\\").is_err());
    let m = parse_pmf("x 0.25\ny 3/4 # trailing\n\n").unwrap();
    assert_eq!(m.pmf(), &[Rational::new(1, 4).unwrap(), Rational::new(3, 4).unwrap()]);
}
