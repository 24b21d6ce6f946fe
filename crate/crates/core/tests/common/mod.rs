#![allow(dead_code)]

use drsc_core::{Rational, SourceModel};
use proptest::prelude::*;

/// Models with weights `w_i / sum(w)`, so denominators are small but rarely
/// dyadic.
pub fn weighted_model(k: std::ops::RangeInclusive<usize>, max_weight: u32) -> impl Strategy<Value = SourceModel> {
    prop::collection::vec(1..=max_weight, k).prop_map(|w| {
        let total: u32 = w.iter().sum();
        SourceModel::new(w.iter().map(|&x| Rational::new(x, total).unwrap()).collect()).unwrap()
    })
}

/// Same, but with a random coding order.
pub fn ordered_model(k: std::ops::RangeInclusive<usize>, max_weight: u32) -> impl Strategy<Value = SourceModel> {
    weighted_model(k, max_weight)
        .prop_flat_map(|m| {
            let order: Vec<usize> = (0..m.size()).collect();
            (Just(m), Just(order).prop_shuffle())
        })
        .prop_map(|(m, order)| m.with_new_order(order).unwrap())
}

/// A symbol sequence drawn from `p` with a proptest-chosen seed.
pub fn sequence(p: &SourceModel, n: usize, seed: u64) -> Vec<usize> {
    drsc_core::source::sample(p, n, seed)
}

pub fn r(s: &str) -> Rational {
    s.parse().unwrap()
}
