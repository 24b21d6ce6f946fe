//! Forbidden points of an interval.
//!
//! For `I = [a, b)` let `m(I)` be the midpoint of `mbi(I)`. The forbidden
//! points `S0(I)` are `m(I)` together with its iterated left adjacents (which
//! descend towards `a`) and right adjacents (which climb towards `b`). A next
//! interval that strictly contains none of them is fully decodable inside `I`.
//!
//! `S0(I)` is infinite in general, so it is never materialized: all queries
//! walk the chains lazily and stop once they leave the probed range.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::One;

use crate::numerics::{binary_interval, mbi, Rational, UnitInterval};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

/// Which fictitious region of an interval is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    L,
    R,
}

/// Midpoint of `mbi(i)`; always a member of `i`.
pub fn midpoint_of_mbi(i: &UnitInterval) -> Rational {
    let b = binary_interval(&mbi(i));
    b.low() + &(b.width() * &Rational::new(1, 2).expect("nonzero"))
}

/// Smallest `k >= 1` with `2^-k <= g` (`strict == false`) or `2^-k < g`.
fn min_exponent(g: &Rational, strict: bool) -> u64 {
    debug_assert!(g.is_positive());
    let fits = |k: u64| {
        // 2^-k (<|<=) n/d  <=>  d (<|<=) n * 2^k
        let lhs = g.denom();
        let rhs: BigInt = g.numer() << k;
        if strict {
            lhs < &rhs
        } else {
            lhs <= &rhs
        }
    };
    // Start from a bit-length estimate; it is off by at most one or two.
    let est = (g.denom().bits() as i64 - g.numer().bits() as i64 - 1).max(1) as u64;
    let mut k = est;
    while k > 1 && fits(k - 1) {
        k -= 1;
    }
    while !fits(k) {
        k += 1;
    }
    k
}

/// `min { x in [a, p) : x = p - 2^-k, k >= 1 }`, or `None` when `p = a`.
pub fn left_adjacent(i: &UnitInterval, p: &Rational) -> Option<Rational> {
    let gap = p - i.low();
    if !gap.is_positive() {
        return None;
    }
    let k = min_exponent(&gap, false);
    Some(p - &Rational::dyadic(k))
}

/// `max { x in (p, b) : x = p + 2^-k, k >= 1 }`.
pub fn right_adjacent(i: &UnitInterval, p: &Rational) -> Option<Rational> {
    let gap = i.high() - p;
    if !gap.is_positive() {
        return None;
    }
    let k = min_exponent(&gap, true);
    Some(p + &Rational::dyadic(k))
}

/// The t-adjacents `l^(t)(p)` or `r^(t)(p)` for `t = 1, 2, ...`.
#[derive(Debug, Clone)]
pub struct AdjacentChain {
    host: UnitInterval,
    direction: Direction,
    current: Option<Rational>,
}

impl AdjacentChain {
    pub fn new(host: &UnitInterval, anchor: Rational, direction: Direction) -> Self {
        AdjacentChain { host: host.clone(), direction, current: Some(anchor) }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }
}

impl Iterator for AdjacentChain {
    type Item = Rational;

    fn next(&mut self) -> Option<Rational> {
        let p = self.current.take()?;
        let next = match self.direction {
            Direction::Left => left_adjacent(&self.host, &p),
            Direction::Right => right_adjacent(&self.host, &p),
        };
        self.current = next.clone();
        next
    }
}

fn is_dyadic(x: &Rational) -> bool {
    let d = x.denom();
    d.is_one() || (d.bits() > 0 && d.trailing_zeros() == Some(d.bits() - 1))
}

/// Range queries over `S0(host)`.
#[derive(Debug, Clone)]
pub struct ForbiddenSet {
    host: UnitInterval,
    center: Rational,
}

impl ForbiddenSet {
    pub fn new(host: &UnitInterval) -> Self {
        ForbiddenSet { host: host.clone(), center: midpoint_of_mbi(host) }
    }

    pub fn host(&self) -> &UnitInterval {
        &self.host
    }

    /// `m(host)`.
    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn left_chain(&self) -> AdjacentChain {
        AdjacentChain::new(&self.host, self.center.clone(), Direction::Left)
    }

    pub fn right_chain(&self) -> AdjacentChain {
        AdjacentChain::new(&self.host, self.center.clone(), Direction::Right)
    }

    /// Points of `S0(host)` lying strictly inside `(lo, hi)`, with
    /// `host.low <= lo < hi <= host.high`. Returned in increasing order.
    pub fn points_between(&self, lo: &Rational, hi: &Rational) -> Result<Vec<Rational>, Error> {
        let host_hi = self.host.high();
        if hi >= &host_hi && &self.center < hi {
            // The right chain accumulates at host.high.
            return Err(Error::UnboundedQuery);
        }
        if lo <= self.host.low() && &self.center > lo && !is_dyadic(&(&self.center - self.host.low())) {
            // An infinite left chain accumulates at host.low.
            return Err(Error::UnboundedQuery);
        }
        let mut left = Vec::new();
        if &self.center > lo {
            for p in self.left_chain() {
                if &p <= lo {
                    break;
                }
                if &p < hi {
                    left.push(p);
                }
            }
        }
        left.reverse();
        let mut out = left;
        if &self.center > lo && &self.center < hi {
            out.push(self.center.clone());
        }
        if &self.center < hi {
            for p in self.right_chain() {
                if &p >= hi {
                    break;
                }
                if &p > lo {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }

    /// Whether any point of `S0(host)` lies strictly inside `(lo, hi)`.
    pub fn hits_open(&self, lo: &Rational, hi: &Rational) -> Result<bool, Error> {
        self.points_between(lo, hi).map(|v| !v.is_empty())
    }
}

/// All points of `S0(host)` strictly interior to `probe`; a point equal to
/// `probe.low` is not reported (left-edge coincidence is harmless).
pub fn forbidden_points_in(host: &UnitInterval, probe: &UnitInterval) -> Result<Vec<Rational>, Error> {
    if !probe.is_subset_of(host) {
        return Err(Error::Unsupported(alloc::format!("probe {probe:?} is not inside host {host:?}")));
    }
    ForbiddenSet::new(host).points_between(probe.low(), &probe.high())
}

/// `S_delta(host)`: chain points of `m(host)` (including `m(host)` itself)
/// lying in `[low + delta, high - delta)`.
pub fn adjacent_delta_set(host: &UnitInterval, delta: &Rational) -> Result<Vec<Rational>, Error> {
    if !delta.is_positive() || delta >= host.width() {
        return Err(Error::Unsupported(alloc::format!("delta {delta} must lie in (0, {})", host.width())));
    }
    let lo = host.low() + delta;
    let hi = host.high() - delta;
    if lo >= hi {
        return Ok(Vec::new());
    }
    let set = ForbiddenSet::new(host);
    let in_range = |p: &Rational| p >= &lo && p < &hi;
    let mut out: Vec<Rational> = Vec::new();
    for p in set.left_chain() {
        if p < lo {
            break;
        }
        if in_range(&p) {
            out.push(p);
        }
    }
    out.reverse();
    if in_range(set.center()) {
        out.push(set.center().clone());
    }
    for p in set.right_chain() {
        if p >= hi {
            break;
        }
        if in_range(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `1 + 2 log2(|I| / delta)`.
pub fn delta_set_size_bound(host: &UnitInterval, delta: &Rational) -> f64 {
    1.0 + 2.0 * (host.width() / delta).log2()
}

/// The fictitious regions `I_L = (phi(3/8), phi(1/2))` and
/// `I_R = (phi(1/2), phi(5/8))` with `phi(t) = (1 - t) low + t high`.
///
/// They are returned as half-open probes `[phi(3/8), phi(1/2))` and
/// `[phi(1/2), phi(5/8))`; forbidden-point membership only counts strictly
/// interior points, so the probes carry the open-interval semantics.
pub fn lr_subintervals(i: &UnitInterval) -> (UnitInterval, UnitInterval) {
    let t = |n: i64| Rational::new(n, 8).expect("nonzero");
    let a = i.lerp(&t(3));
    let b = i.lerp(&t(4));
    let c = i.lerp(&t(5));
    let left = UnitInterval::from_bounds(a, b.clone()).expect("nested in i");
    let right = UnitInterval::from_bounds(b, c).expect("nested in i");
    (left, right)
}

/// A side whose open region contains no forbidden point of `i`, preferring
/// `L` when both are free. One of the two is always free.
pub fn forbidden_free_side(i: &UnitInterval) -> Side {
    let (left, right) = lr_subintervals(i);
    let set = ForbiddenSet::new(i);
    let free = |probe: &UnitInterval| {
        !set.hits_open(probe.low(), &probe.high()).expect("probe is strictly inside the host")
    };
    if free(&left) {
        Side::L
    } else {
        assert!(free(&right), "both fictitious regions of {i:?} contain forbidden points");
        Side::R
    }
}
