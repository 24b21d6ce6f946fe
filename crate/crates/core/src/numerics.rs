//! Exact rationals, half-open unit subintervals and binary (dyadic) intervals.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};
use core::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

/// Arbitrary-precision fraction, always kept in lowest terms with a positive
/// denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self, Error> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(numer.into(), denom)))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^(-k)`.
    pub fn dyadic(k: u64) -> Self {
        Rational(BigRational::new_raw(BigInt::one(), BigInt::one() << k))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rational(num_traits::Pow::pow(&self.0, exp))
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> BigInt {
        self.numer().div_floor(self.denom())
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> BigInt {
        self.numer().div_ceil(self.denom())
    }

    /// Multiply by `2^k` (`k` may be negative).
    pub fn scale_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            Rational(BigRational::new(self.numer() << (k as u64), self.denom().clone()))
        } else {
            Rational(BigRational::new(self.numer().clone(), self.denom() << ((-k) as u64)))
        }
    }

    pub fn min<'a>(&'a self, other: &'a Self) -> &'a Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max<'a>(&'a self, other: &'a Self) -> &'a Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.numer(), self.denom())
    }

    /// `log2(self)` for positive values, accurate to double precision even
    /// when numerator and denominator have millions of bits.
    pub fn log2(&self) -> f64 {
        if !self.is_positive() {
            return if self.is_zero() { f64::NEG_INFINITY } else { f64::NAN };
        }
        log2_big(self.numer().magnitude()) - log2_big(self.denom().magnitude())
    }
}

/// `log2` of a positive big integer using its leading 64 bits.
pub(crate) fn log2_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        return libm::log2(n.to_u64().unwrap_or(0) as f64);
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().unwrap_or(u64::MAX);
    libm::log2(top as f64) + shift as f64
}

/// Quotient of two big integers as `f64` without overflowing intermediates.
pub(crate) fn ratio_to_f64(numer: &BigInt, denom: &BigInt) -> f64 {
    if numer.is_zero() {
        return 0.0;
    }
    let sign = if (numer.sign() == Sign::Minus) != (denom.sign() == Sign::Minus) { -1.0 } else { 1.0 };
    let n = numer.magnitude();
    let d = denom.magnitude();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    // Bring the quotient to ~64 significant bits.
    let shift = 64 - (nb - db);
    let q = if shift >= 0 { (n << (shift as u64)) / d } else { n / (d << ((-shift) as u64)) };
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    sign * libm::ldexp(qf, -(shift as i32))
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom().is_one() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `n`, `n/d` or a finite decimal such as `0.125`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::ParseRational(String::from(s));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            return Rational::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let neg = int.starts_with('-');
            let int: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| bad())? };
            let frac_n: BigInt = frac.parse().map_err(|_| bad())?;
            let scale = num_traits::pow(BigInt::from(10u32), frac.len());
            let frac_r = Rational::new(frac_n, scale)?;
            let int_r = Rational::from_integer(int);
            return Ok(if neg { int_r - frac_r } else { int_r + frac_r });
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rational::from_integer(n))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl core::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> core::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl core::iter::Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_integer(n)
    }
}

/// Half-open interval `[low, low + width)` inside `[0, 1)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UnitInterval {
    low: Rational,
    width: Rational,
}

impl UnitInterval {
    pub fn new(low: Rational, width: Rational) -> Result<Self, Error> {
        if low.is_negative() || !width.is_positive() || &low + &width > Rational::one() {
            return Err(Error::InvalidInterval { low: Box::new(low), width: Box::new(width) });
        }
        Ok(UnitInterval { low, width })
    }

    /// `[low, high)`.
    pub fn from_bounds(low: Rational, high: Rational) -> Result<Self, Error> {
        let width = &high - &low;
        UnitInterval::new(low, width)
    }

    pub fn unit() -> Self {
        UnitInterval { low: Rational::zero(), width: Rational::one() }
    }

    pub fn low(&self) -> &Rational {
        &self.low
    }

    pub fn width(&self) -> &Rational {
        &self.width
    }

    /// The excluded supremum `low + width`.
    pub fn high(&self) -> Rational {
        &self.low + &self.width
    }

    pub fn contains(&self, p: &Rational) -> bool {
        p >= &self.low && p < &self.high()
    }

    /// `p` lies in the open interval `(low, high)`.
    pub fn contains_strictly(&self, p: &Rational) -> bool {
        p > &self.low && p < &self.high()
    }

    pub fn is_subset_of(&self, other: &UnitInterval) -> bool {
        self.low >= other.low && self.high() <= other.high()
    }

    pub fn intersects(&self, other: &UnitInterval) -> bool {
        self.low < other.high() && other.low < self.high()
    }

    /// `(1 - t) * low + t * high`.
    pub fn lerp(&self, t: &Rational) -> Rational {
        &self.low + &self.width * t
    }
}

impl fmt::Debug for UnitInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.low, self.high())
    }
}

/// Finite bit string; `bits[0]` is the most significant.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    /// Bits `[start..]` as a new string.
    pub fn suffix(&self, start: usize) -> BitString {
        BitString { bits: self.bits[start.min(self.bits.len())..].to_vec() }
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.starts_with(&self.bits)
    }

    /// Value of the bits as a big unsigned integer.
    pub fn to_biguint(&self) -> BigUint {
        let mut v = BigUint::zero();
        for &b in &self.bits {
            v <<= 1u32;
            if b {
                v += 1u32;
            }
        }
        v
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::ParseBits(String::from(s))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString::from_bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", self)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        BitString { bits: iter.into_iter().collect() }
    }
}

/// `B[b] = [0.b0, 0.b1)`, of width `2^-len(b)`.
pub fn binary_interval(b: &BitString) -> UnitInterval {
    let k = b.len() as u64;
    let low = Rational(BigRational::new(BigInt::from(b.to_biguint()), BigInt::one() << k));
    UnitInterval { low, width: Rational::dyadic(k) }
}

/// Bits of the minimal binary interval containing `i`, found by bisection.
pub fn mbi(i: &UnitInterval) -> BitString {
    // Work in coordinates where the current dyadic cell is [0, 1).
    let mut low = i.low.clone();
    let mut high = i.high();
    let half = Rational::new(1, 2).expect("nonzero");
    let mut out = BitString::new();
    loop {
        if high <= half {
            out.push(false);
            low = low.scale_pow2(1);
            high = high.scale_pow2(1);
        } else if low >= half {
            out.push(true);
            low = low.scale_pow2(1) - Rational::one();
            high = high.scale_pow2(1) - Rational::one();
        } else {
            return out;
        }
    }
}

/// Shortest `b` with `B[b] ⊆ i`; among equally short candidates the leftmost.
pub fn shortest_dyadic_inside(i: &UnitInterval) -> BitString {
    let high = i.high();
    let mut k: u64 = 0;
    loop {
        // Leftmost multiple of 2^-k that is >= low.
        let scaled_low = i.low.scale_pow2(k as i64);
        let q = scaled_low.ceil();
        let end = Rational::from_integer(&q + 1u32).scale_pow2(-(k as i64));
        if end <= high {
            let q = q.to_biguint().expect("nonnegative");
            return bits_of(&q, k);
        }
        k += 1;
    }
}

/// The `k`-bit big-endian representation of `v`.
pub(crate) fn bits_of(v: &BigUint, k: u64) -> BitString {
    (0..k).rev().map(|j| v.bit(j)).collect()
}
