//! Interval-mapping arithmetic coding with exact arithmetic.
//!
//! The encoder keeps its current interval `J` in a *frame*: after the bits
//! `e` have been emitted, the true interval is `B[e]` scaled down onto the
//! frame coordinates `[lo/den, hi/den)`. Every symbol multiplies `den` by the
//! common denominator `D` of the coding table, so coordinates are plain
//! integers and the integrity property (emitted bits equal `mbi` of the true
//! interval) holds exactly after every step.
//!
//! The frame removes emitted bits but does not bound the size of `den`: the
//! true interval endpoints have denominator `D^n`, so coordinate size grows
//! linearly with the number of encoded symbols. A precision ceiling turns
//! runaway growth into an error.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::numerics::{binary_interval, bits_of, mbi, BitString, Rational, UnitInterval};
use crate::source::{SourceModel, Symbol};
use crate::Error;

/// Default cap on the bit length of frame denominators.
pub const DEFAULT_PRECISION_CEILING: u64 = 1 << 26;

/// The arithmetic map `f1` of a coding distribution `Q` under its order,
/// together with its integer table over the common denominator `D`.
#[derive(Debug, Clone)]
pub struct ArithmeticMap {
    model: SourceModel,
    cumulative: Vec<Rational>,
    scale: BigUint,
    cum: Vec<BigUint>,
    width: Vec<BigUint>,
    rank_cum: Vec<BigUint>,
    rank_cum_f64: Vec<f64>,
    width_bits: u64,
    small: Option<SmallTable>,
}

/// The integer table again as machine words, when `D` fits in one.
#[derive(Debug, Clone)]
struct SmallTable {
    scale: u64,
    cum: Vec<u64>,
    high: Vec<u64>,
}

pub fn make_arithmetic(model: &SourceModel) -> ArithmeticMap {
    let k = model.size();
    let mut cumulative = vec![Rational::zero(); k];
    let mut acc = Rational::zero();
    for &x in model.order() {
        cumulative[x] = acc.clone();
        acc = &acc + model.prob(x);
    }
    let scale = model
        .pmf()
        .iter()
        .fold(BigInt::one(), |l, p| l.lcm(p.denom()))
        .to_biguint()
        .expect("positive");
    let as_units = |r: &Rational| -> BigUint {
        let v = r.numer() * (BigInt::from(scale.clone()) / r.denom());
        v.to_biguint().expect("nonnegative")
    };
    let cum: Vec<BigUint> = cumulative.iter().map(as_units).collect();
    let width: Vec<BigUint> = model.pmf().iter().map(as_units).collect();
    let rank_cum: Vec<BigUint> = model.order().iter().map(|&x| cum[x].clone()).collect();
    let mut rank_cum_f64: Vec<f64> = rank_cum.iter().map(|c| ratio(c, &scale)).collect();
    rank_cum_f64.push(1.0);
    let width_bits = width.iter().map(|c| c.bits()).max().unwrap_or(0);
    let small = scale.to_u64().map(|s| SmallTable {
        scale: s,
        cum: cum.iter().map(|c| c.to_u64().expect("below D")).collect(),
        high: cum.iter().zip(&width).map(|(c, w)| (c + w).to_u64().expect("at most D")).collect(),
    });
    ArithmeticMap { model: model.clone(), cumulative, scale, cum, width, rank_cum, rank_cum_f64, width_bits, small }
}

/// `x / y` to about 50 significant bits, from the leading words of each.
pub(crate) fn ratio(x: &BigUint, y: &BigUint) -> f64 {
    let (mx, ex) = leading(x);
    let (my, ey) = leading(y);
    if mx == 0.0 {
        return 0.0;
    }
    libm::scalbn(mx / my, (ex - ey) as i32)
}

/// `x ~ m 2^e` with the top 64 bits of `x` in `m`.
fn leading(x: &BigUint) -> (f64, i64) {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits") as f64, 0);
    }
    let shift = bits - 64;
    let (idx, off) = ((shift / 64) as usize, shift % 64);
    let mut it = x.iter_u64_digits();
    let low = it.nth(idx).expect("in range");
    let top = if off == 0 { low } else { (low >> off) | (it.next().unwrap_or(0) << (64 - off)) };
    (top as f64, shift as i64)
}

impl ArithmeticMap {
    pub fn model(&self) -> &SourceModel {
        &self.model
    }

    /// `f1(x)`: total coding mass of the symbols preceding `x`.
    pub fn offset(&self, x: Symbol) -> &Rational {
        &self.cumulative[x]
    }

    pub fn cumulative(&self) -> &[Rational] {
        &self.cumulative
    }

    /// The common denominator `D` of the coding probabilities.
    pub fn scale(&self) -> &BigUint {
        &self.scale
    }

    /// The subinterval `[f1(x), f1(x) + Q(x))` of `[0, 1)`.
    pub fn symbol_interval(&self, x: Symbol) -> Result<UnitInterval, Error> {
        self.check(x)?;
        UnitInterval::new(self.cumulative[x].clone(), self.model.prob(x).clone())
    }

    fn check(&self, x: Symbol) -> Result<(), Error> {
        let size = self.model.size();
        if x >= size {
            return Err(Error::SymbolOutOfRange { symbol: x, size });
        }
        if self.width[x].is_zero() {
            return Err(Error::ZeroProbability(x));
        }
        Ok(())
    }

    pub fn can_encode(&self, x: Symbol) -> bool {
        x < self.width.len() && !self.width[x].is_zero()
    }
}

/// Encoder interval in the rescaled frame.
#[derive(Debug, Clone)]
pub struct EncoderState {
    lo: BigUint,
    hi: BigUint,
    den: BigUint,
    scratch: BigUint,
    emitted: u64,
    consumed: u64,
    ceiling: u64,
}

impl Default for EncoderState {
    fn default() -> Self {
        Self::new()
    }
}

/// Slack on float comparisons against `1/2`; well above the error of
/// [`ratio`].
const TOL: f64 = 1.0 / (1u64 << 40) as f64;

impl EncoderState {
    pub fn new() -> Self {
        EncoderState {
            lo: BigUint::zero(),
            hi: BigUint::one(),
            den: BigUint::one(),
            scratch: BigUint::zero(),
            emitted: 0,
            consumed: 0,
            ceiling: DEFAULT_PRECISION_CEILING,
        }
    }

    pub fn with_precision_ceiling(mut self, bits: u64) -> Self {
        self.ceiling = bits;
        self
    }

    pub fn precision_ceiling(&self) -> u64 {
        self.ceiling
    }

    /// Bits emitted so far (the scale exponent of the frame).
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Symbols encoded so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    /// `(lo, hi, den)` of the frame interval.
    pub(crate) fn raw(&self) -> (&BigUint, &BigUint, &BigUint) {
        (&self.lo, &self.hi, &self.den)
    }

    /// Bit length of the frame denominator.
    pub fn precision_bits(&self) -> u64 {
        self.den.bits()
    }

    /// The frame interval `[lo/den, hi/den)`.
    pub fn frame(&self) -> UnitInterval {
        let den = BigInt::from(self.den.clone());
        UnitInterval::from_bounds(
            Rational::new(BigInt::from(self.lo.clone()), den.clone()).expect("den > 0"),
            Rational::new(BigInt::from(self.hi.clone()), den).expect("den > 0"),
        )
        .expect("frame interval is nonempty")
    }

    /// The true interval given the bits emitted so far.
    pub fn true_interval(&self, emitted: &BitString) -> UnitInterval {
        let cell = binary_interval(emitted);
        let f = self.frame();
        let low = cell.lerp(f.low());
        let width = f.width() * cell.width();
        UnitInterval::new(low, width).expect("nested in the emitted cell")
    }

    /// `|J|` of the true interval.
    pub fn true_width(&self) -> Rational {
        let w = BigInt::from(&self.hi - &self.lo);
        let den = BigInt::from(self.den.clone()) << self.emitted;
        Rational::new(w, den).expect("den > 0")
    }

    /// Narrows the interval to the subinterval of `x` without emitting.
    pub(crate) fn narrow(&mut self, map: &ArithmeticMap, x: Symbol) -> Result<(), Error> {
        map.check(x)?;
        let mut w = core::mem::take(&mut self.scratch);
        w.clone_from(&self.hi);
        w -= &self.lo;
        match &map.small {
            Some(t) => {
                self.lo *= t.scale;
                self.hi.clone_from(&self.lo);
                self.hi += &w * t.high[x];
                w *= t.cum[x];
                self.lo += &w;
                self.den *= t.scale;
            }
            None => {
                self.lo *= &map.scale;
                self.hi.clone_from(&self.lo);
                self.lo += &w * &map.cum[x];
                self.hi += &w * (&map.cum[x] + &map.width[x]);
                self.den *= &map.scale;
            }
        }
        self.scratch = w;
        self.consumed += 1;
        let bits = self.den.bits();
        if bits > self.ceiling {
            return Err(Error::PrecisionCeiling { bits, ceiling: self.ceiling });
        }
        Ok(())
    }

    /// Emits every bit that `mbi` of the true interval now determines.
    ///
    /// Runs of bits are read off float images of `lo/den` and `hi/den` and
    /// applied with one shift; only comparisons within [`TOL`] of a cell
    /// boundary fall back to exact arithmetic.
    pub(crate) fn emit(&mut self, out: &mut BitString) {
        loop {
            let mut a = ratio(&self.lo, &self.den);
            let mut b = ratio(&self.hi, &self.den);
            let mut tol = TOL;
            let mut run: u64 = 0;
            let mut t = 0usize;
            let settled = loop {
                if t == 32 {
                    break false;
                }
                let bit = if b < 0.5 - tol {
                    false
                } else if a >= 0.5 + tol {
                    true
                } else {
                    break a < 0.5 - tol && b > 0.5 + tol;
                };
                if bit {
                    a = 2.0 * a - 1.0;
                    b = 2.0 * b - 1.0;
                } else {
                    a *= 2.0;
                    b *= 2.0;
                }
                tol *= 2.0;
                run = run << 1 | bit as u64;
                out.push(bit);
                t += 1;
            };
            if t > 0 {
                self.lo <<= t;
                self.hi <<= t;
                if run > 0 {
                    self.scratch.clone_from(&self.den);
                    self.scratch *= run;
                    self.lo -= &self.scratch;
                    self.hi -= &self.scratch;
                }
                self.emitted += t as u64;
            }
            if settled {
                return;
            }
            if t == 32 {
                continue;
            }
            if !self.emit_exact(out) {
                return;
            }
        }
    }

    /// One exactly decided bit; `false` when the frame straddles `1/2`.
    fn emit_exact(&mut self, out: &mut BitString) -> bool {
        self.scratch.clone_from(&self.hi);
        self.scratch <<= 1usize;
        if self.scratch <= self.den {
            self.lo <<= 1usize;
            self.hi <<= 1usize;
            out.push(false);
        } else {
            self.scratch.clone_from(&self.lo);
            self.scratch <<= 1usize;
            if self.scratch < self.den {
                return false;
            }
            self.lo <<= 1usize;
            self.lo -= &self.den;
            self.hi <<= 1usize;
            self.hi -= &self.den;
            out.push(true);
        }
        self.emitted += 1;
        true
    }

    /// Encodes `x`, appending the newly determined bits to `out`.
    pub fn step_into(&mut self, map: &ArithmeticMap, x: Symbol, out: &mut BitString) -> Result<(), Error> {
        self.narrow(map, x)?;
        self.emit(out);
        Ok(())
    }

    /// Bits of the shortest binary interval inside the frame interval; they
    /// terminate the stream decodably.
    pub fn flush_bits(&self) -> BitString {
        let mut k: u64 = 0;
        loop {
            let scaled = &self.lo << k;
            let (q, r) = scaled.div_rem(&self.den);
            let q = if r.is_zero() { q } else { q + 1u32 };
            if (&q + 1u32) * &self.den <= &self.hi << k {
                return bits_of(&q, k);
            }
            k += 1;
        }
    }
}

/// Encodes one symbol and returns the bits it made emittable.
pub fn encode_step(state: &mut EncoderState, map: &ArithmeticMap, x: Symbol) -> Result<BitString, Error> {
    let mut out = BitString::new();
    state.step_into(map, x, &mut out)?;
    Ok(out)
}

/// Ancestors `I(x^j)` of the current interval whose symbols the decoder
/// cannot yet determine, oldest first.
///
/// An ancestor is held relative to the current frame interval `[lo, hi)` of
/// width `w` as `[lo - w*a/c, lo + w*b/c)`, which is invariant under bit
/// emission and cheap to update per encoded symbol.
#[derive(Debug, Clone, Default)]
pub struct PendingLedger {
    entries: VecDeque<Pending>,
}

#[derive(Debug, Clone)]
struct Pending {
    index: u64,
    a: BigUint,
    b: BigUint,
    c: BigUint,
}

impl PendingLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the oldest undecodable entry.
    pub fn oldest(&self) -> Option<u64> {
        self.entries.front().map(|p| p.index)
    }

    /// Re-expresses every entry after the interval was narrowed to symbol `x`.
    pub fn advance(&mut self, map: &ArithmeticMap, x: Symbol) {
        let d = &map.scale;
        let cum = &map.cum[x];
        let w = &map.width[x];
        for p in self.entries.iter_mut() {
            let shift = cum * &p.c;
            p.a *= d;
            p.a += &shift;
            p.b *= d;
            p.b -= &shift;
            p.c *= w;
        }
    }

    /// Records the current interval as the ancestor with the given index.
    pub fn push(&mut self, index: u64) {
        self.entries.push_back(Pending { index, a: BigUint::zero(), b: BigUint::one(), c: BigUint::one() });
    }

    /// Pops every entry whose interval now contains the whole frame (the
    /// received region `B[emitted]`), calling `on_decoded` with its index.
    pub fn drain_decodable(&mut self, state: &EncoderState, mut on_decoded: impl FnMut(u64)) {
        if self.entries.is_empty() {
            return;
        }
        let w = &state.hi - &state.lo;
        let fl = ratio(&state.lo, &state.den);
        let fw = ratio(&w, &state.den);
        while let Some(p) = self.entries.front() {
            // lo - w a / c <= 0  and  lo + w b / c >= den
            let (fa, fb) = (fw * ratio(&p.a, &p.c), fw * ratio(&p.b, &p.c));
            let tol = TOL * (1.0 + fa + fb);
            let (left, right) = (fa - fl, fl + fb - 1.0);
            let decodable = if left < -tol || right < -tol {
                false
            } else if left > tol && right > tol {
                true
            } else {
                let loc = &state.lo * &p.c;
                loc <= &w * &p.a && loc + &w * &p.b >= &state.den * &p.c
            };
            if !decodable {
                break;
            }
            on_decoded(p.index);
            self.entries.pop_front();
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Plain arithmetic encoder over a fixed map, emitting into an owned buffer.
#[derive(Debug, Clone)]
pub struct ArithmeticEncoder<'m> {
    map: &'m ArithmeticMap,
    state: EncoderState,
    bits: BitString,
}

impl<'m> ArithmeticEncoder<'m> {
    pub fn new(map: &'m ArithmeticMap) -> Self {
        ArithmeticEncoder { map, state: EncoderState::new(), bits: BitString::new() }
    }

    pub fn with_precision_ceiling(mut self, bits: u64) -> Self {
        self.state = self.state.with_precision_ceiling(bits);
        self
    }

    pub fn state(&self) -> &EncoderState {
        &self.state
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn encode(&mut self, x: Symbol) -> Result<(), Error> {
        self.state.step_into(self.map, x, &mut self.bits)
    }

    /// Appends the flush bits and returns the complete codeword.
    pub fn finish(mut self) -> BitString {
        let tail = self.state.flush_bits();
        self.bits.extend_from(&tail);
        self.bits
    }
}

/// `E(x) + flush` for the plain arithmetic encoder.
pub fn encode(map: &ArithmeticMap, x: &[Symbol]) -> Result<BitString, Error> {
    let mut enc = ArithmeticEncoder::new(map);
    for &s in x {
        enc.encode(s)?;
    }
    Ok(enc.finish())
}

/// The symbol whose subinterval of the frame interval contains the region
/// selected by `extra`, the received bits beyond those `state` has emitted.
///
/// Float images of the frame only rule candidates out; every positive answer
/// is checked exactly.
pub(crate) fn locate(state: &EncoderState, map: &ArithmeticMap, extra: &[bool]) -> Option<Symbol> {
    let k = extra.len() as u64;
    let w = &state.hi - &state.lo;
    // The region has width den / 2^k, a child at most w c_max / D.
    if state.den.bits() + map.scale.bits() >= w.bits() + map.width_bits + k + 2 {
        return None;
    }
    let u = extra.iter().take(64).rev().fold(0.0f64, |acc, &b| (acc + b as u8 as f64) * 0.5);
    let fl = ratio(&state.lo, &state.den);
    let fw = ratio(&w, &state.den);
    let pos = (u - fl) / fw;
    let end = (u + libm::scalbn(1.0, -(k.min(1000) as i32)) - fl) / fw;
    let tol = 4.0 * TOL * (1.0 + pos.abs() + end.abs()) / fw;
    let cumf = &map.rank_cum_f64;
    let ranks = cumf.len() - 1;
    if tol.is_nan() || tol >= 1e-3 {
        return locate_exact(state, map, extra);
    }
    if pos < -tol || end > 1.0 + tol {
        return None;
    }
    let r = cumf.partition_point(|&c| c <= pos).clamp(1, ranks) - 1;
    if end > cumf[r + 1] + tol && pos < cumf[r + 1] - tol {
        return None;
    }
    verify_candidates(state, map, &w, extra, [r, r.wrapping_sub(1), r + 1])
}

/// [`locate`] without the float filter: the candidate rank comes from an
/// exact division.
pub(crate) fn locate_exact(state: &EncoderState, map: &ArithmeticMap, extra: &[bool]) -> Option<Symbol> {
    let k = extra.len() as u64;
    let w = &state.hi - &state.lo;
    let v = BitString::from_bits(extra.to_vec()).to_biguint();
    let num = &v * &state.den * &map.scale;
    let base = (&state.lo * &map.scale) << k;
    if num < base {
        return None;
    }
    // Offset of the region's low end in units of the coding table.
    let target = (num - base) / (&w << k);
    let r = map.rank_cum.partition_point(|c| c <= &target) - 1;
    verify_candidates(state, map, &w, extra, [r, usize::MAX, usize::MAX])
}

fn verify_candidates(state: &EncoderState, map: &ArithmeticMap, w: &BigUint, extra: &[bool], ranks: [usize; 3]) -> Option<Symbol> {
    let k = extra.len() as u64;
    let v = BitString::from_bits(extra.to_vec()).to_biguint();
    let cell = &state.den * &map.scale;
    let region_lo = &v * &cell;
    let region_hi = region_lo.clone() + cell;
    let base = &state.lo * &map.scale;
    for r in ranks.into_iter().filter(|&r| r < map.rank_cum.len()) {
        let x = map.model.order()[r];
        if map.width[x].is_zero() {
            continue;
        }
        let child_lo = (&base + w * &map.cum[x]) << k;
        if child_lo > region_lo {
            continue;
        }
        let child_hi = (&base + w * (&map.cum[x] + &map.width[x])) << k;
        if child_hi >= region_hi {
            return Some(x);
        }
    }
    None
}

/// Greedy decoder. It mirrors the encoder: the decoded prefix is held as an
/// [`EncoderState`], followed by the received bits that state has not yet
/// emitted.
#[derive(Debug, Clone)]
pub struct DecoderState {
    state: EncoderState,
    scratch: BitString,
    buf: Vec<bool>,
    head: usize,
    received: u64,
    decoded: u64,
}

impl Default for DecoderState {
    fn default() -> Self {
        Self::new()
    }
}

impl DecoderState {
    pub fn new() -> Self {
        DecoderState {
            state: EncoderState::new().with_precision_ceiling(u64::MAX),
            scratch: BitString::new(),
            buf: Vec::new(),
            head: 0,
            received: 0,
            decoded: 0,
        }
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn decoded(&self) -> u64 {
        self.decoded
    }

    /// Narrows the received region by one bit.
    pub fn receive(&mut self, bit: bool) {
        self.buf.push(bit);
        self.received += 1;
    }

    /// Decodes the next symbol if its subinterval contains the received
    /// region.
    pub fn try_decode(&mut self, map: &ArithmeticMap) -> Option<Symbol> {
        let x = locate(&self.state, map, &self.buf[self.head..])?;
        self.scratch.truncate(0);
        self.state.narrow(map, x).expect("no precision ceiling");
        self.state.emit(&mut self.scratch);
        debug_assert_eq!(self.scratch.bits(), &self.buf[self.head..self.head + self.scratch.len()]);
        self.head += self.scratch.len();
        if self.head > 4096 && self.head * 2 > self.buf.len() {
            self.buf.drain(..self.head);
            self.head = 0;
        }
        self.decoded += 1;
        Some(x)
    }

    /// Feeds `bits` and returns every symbol that became decodable, stopping
    /// once `limit` symbols have been decoded in total.
    pub fn feed(&mut self, map: &ArithmeticMap, bits: &BitString, limit: u64) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.drain(map, limit, &mut out);
        for &b in bits.bits() {
            self.receive(b);
            self.drain(map, limit, &mut out);
        }
        out
    }

    fn drain(&mut self, map: &ArithmeticMap, limit: u64, out: &mut Vec<Symbol>) {
        while self.decoded < limit {
            match self.try_decode(map) {
                Some(x) => out.push(x),
                None => break,
            }
        }
    }
}

/// Decodes `n` symbols from `bits` (the encoder output including flush).
pub fn decode(map: &ArithmeticMap, bits: &BitString, n: u64) -> Result<Vec<Symbol>, Error> {
    let mut dec = DecoderState::new();
    let out = dec.feed(map, bits, n);
    if dec.decoded() < n {
        return Err(Error::Truncated { bits: bits.len() as u64, decoded: dec.decoded(), expected: n });
    }
    Ok(out)
}

/// `decode_feed`: one incremental decoding call.
pub fn decode_feed(state: &mut DecoderState, map: &ArithmeticMap, bits: &BitString, limit: u64) -> Vec<Symbol> {
    state.feed(map, bits, limit)
}

/// Per-position decoding delays of the plain encoder over `x`: entry `j` is
/// the number of symbols encoded after `x_{j+1}` before it became decodable,
/// or `None` if it never did within `x` (no flush).
pub fn delay_profile(map: &ArithmeticMap, x: &[Symbol]) -> Result<Vec<Option<u64>>, Error> {
    delay_profile_with_ceiling(map, x, DEFAULT_PRECISION_CEILING)
}

/// [`delay_profile`] with an explicit precision ceiling.
pub fn delay_profile_with_ceiling(map: &ArithmeticMap, x: &[Symbol], ceiling: u64) -> Result<Vec<Option<u64>>, Error> {
    let mut out = vec![None; x.len()];
    let mut state = EncoderState::new().with_precision_ceiling(ceiling);
    let mut ledger = PendingLedger::new();
    let mut sink = BitString::new();
    for (i, &s) in x.iter().enumerate() {
        state.narrow(map, s)?;
        ledger.advance(map, s);
        ledger.push(i as u64);
        state.emit(&mut sink);
        sink.truncate(0);
        let now = (i + 1) as u64;
        ledger.drain_decodable(&state, |j| out[j as usize] = Some(now - (j + 1)));
    }
    Ok(out)
}

/// Delay of a position, or a censoring marker at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delay {
    Decoded(u64),
    Censored(u64),
}

/// Minimal `k` such that after encoding `x_1..x_{n+k}` the decoder has
/// output at least `n` symbols, censored at `horizon`.
pub fn delay_of_position(map: &ArithmeticMap, x: &[Symbol], n: usize, horizon: usize) -> Result<Delay, Error> {
    if n + horizon > x.len() {
        return Err(Error::Unsupported(format!("position {n} plus horizon {horizon} exceeds length {}", x.len())));
    }
    if n == 0 {
        return Ok(Delay::Decoded(0));
    }
    let profile = delay_profile(map, &x[..n + horizon])?;
    Ok(match profile[n - 1] {
        Some(k) => Delay::Decoded(k),
        None => Delay::Censored(horizon as u64),
    })
}

/// A sequential encoder that can be forked to explore continuations.
pub trait SequentialEncoder: Clone {
    fn alphabet_size(&self) -> usize;
    /// Whether `x` has positive coding probability in the current state.
    fn can_encode(&self, x: Symbol) -> bool;
    fn push(&mut self, x: Symbol) -> Result<(), Error>;
    /// `E(s)` for the symbols pushed so far.
    fn emitted(&self) -> &BitString;
    /// `|I^E(s)|`, the induced measure of the symbols pushed so far.
    fn interval_width(&self) -> Rational;
}

impl SequentialEncoder for ArithmeticEncoder<'_> {
    fn alphabet_size(&self) -> usize {
        self.map.model.size()
    }

    fn can_encode(&self, x: Symbol) -> bool {
        self.map.can_encode(x)
    }

    fn push(&mut self, x: Symbol) -> Result<(), Error> {
        self.encode(x)
    }

    fn emitted(&self) -> &BitString {
        &self.bits
    }

    fn interval_width(&self) -> Rational {
        self.state.true_width()
    }
}

/// `mu_n(x) = |I^E(x)|`.
pub fn induced_measure<E: SequentialEncoder>(fresh: &E, x: &[Symbol]) -> Result<Rational, Error> {
    let mut enc = fresh.clone();
    for &s in x {
        enc.push(s)?;
    }
    Ok(enc.interval_width())
}

/// Every continuation `x^d` with positive coding probability.
fn continuations<E: SequentialEncoder>(enc: &E, d: usize, visit: &mut impl FnMut(&E) -> Result<(), Error>) -> Result<(), Error> {
    if d == 0 {
        return visit(enc);
    }
    for x in 0..enc.alphabet_size() {
        if enc.can_encode(x) {
            let mut next = enc.clone();
            next.push(x)?;
            continuations(&next, d - 1, visit)?;
        }
    }
    Ok(())
}

/// Drops every string that has a proper prefix in the set.
fn minimal_strings(mut set: Vec<BitString>) -> Vec<BitString> {
    set.sort_by(|a, b| a.bits().cmp(b.bits()));
    set.dedup();
    let mut out: Vec<BitString> = Vec::new();
    for s in set {
        if out.last().is_none_or(|p| !p.is_prefix_of(&s)) {
            out.push(s);
        }
    }
    out
}

/// The generalized interval-mapping view of `enc` at its current prefix `s`:
/// the binary intervals `B[E(s x^d)]` over all continuations, reduced to a
/// minimal cover.
///
/// Verifies that `mbi` of their hull is `B[E(s)]`, that the covers of the
/// one-symbol extensions `s y` nest inside it, and that the covers of
/// distinct `y` are disjoint. A failure means `enc` is not `d`-delay
/// constrained at `s`, or that it withholds bits every continuation agrees on.
pub fn gim_representation<E: SequentialEncoder>(enc: &E, d: usize) -> Result<Vec<UnitInterval>, Error> {
    gim_check(enc, d, true)
}

/// As [`gim_representation`], but only requires `E(s)` to be a prefix of the
/// hull's `mbi`. Encoders that emit `mbi` of their own coding interval while
/// forced steps shrink the reachable set pass this and may fail the strict form.
pub fn gim_nesting<E: SequentialEncoder>(enc: &E, d: usize) -> Result<Vec<UnitInterval>, Error> {
    gim_check(enc, d, false)
}

fn gim_check<E: SequentialEncoder>(enc: &E, d: usize, strict: bool) -> Result<Vec<UnitInterval>, Error> {
    let mut parent = Vec::new();
    continuations(enc, d, &mut |e| {
        parent.push(e.emitted().clone());
        Ok(())
    })?;
    let parent = minimal_strings(parent);
    if parent.is_empty() {
        return Err(Error::NotDelayConstrained("no continuation has positive probability".to_string()));
    }

    let hull_low = parent.iter().map(|b| binary_interval(b).low().clone()).min().expect("nonempty");
    let hull_high = parent.iter().map(|b| binary_interval(b).high()).max().expect("nonempty");
    let hull = UnitInterval::from_bounds(hull_low, hull_high)?;
    let outer = mbi(&hull);
    let holds = if strict { &outer == enc.emitted() } else { enc.emitted().is_prefix_of(&outer) };
    if !holds {
        return Err(Error::NotDelayConstrained(format!(
            "mbi of the union is {} but E(s) is {}",
            outer,
            enc.emitted()
        )));
    }

    let mut labelled: Vec<(BitString, Symbol)> = Vec::new();
    for y in 0..enc.alphabet_size() {
        if !enc.can_encode(y) {
            continue;
        }
        let mut child = enc.clone();
        child.push(y)?;
        let mut set = Vec::new();
        continuations(&child, d, &mut |e| {
            set.push(e.emitted().clone());
            Ok(())
        })?;
        for b in minimal_strings(set) {
            if !parent.iter().any(|p| p.is_prefix_of(&b)) {
                return Err(Error::NotDelayConstrained(format!("B[{b}] under symbol {y} escapes the parent union")));
            }
            labelled.push((b, y));
        }
    }
    // Sorted, a string is preceded by all its prefixes; within one label the
    // strings form an antichain, so any prefix relation crosses labels.
    labelled.sort_by(|a, b| a.0.bits().cmp(b.0.bits()));
    let mut stack: Vec<&(BitString, Symbol)> = Vec::new();
    for item in &labelled {
        while stack.last().is_some_and(|top| !top.0.is_prefix_of(&item.0)) {
            stack.pop();
        }
        if let Some(top) = stack.last() {
            return Err(Error::NotDelayConstrained(format!(
                "B[{}] (symbol {}) overlaps B[{}] (symbol {})",
                top.0, top.1, item.0, item.1
            )));
        }
        stack.push(item);
    }

    Ok(parent.iter().map(binary_interval).collect())
}

/// Exact redundancy and the matching operational codeword-length term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedundancyReport {
    /// `R_n = (1/n) D(P^n || mu_n)`.
    pub redundancy: f64,
    /// `E|E(X^n)| / n - H(P)`, without flush.
    pub excess_length: f64,
}

/// `R_n^E(P)` by enumerating every `x^n` with `P(x^n) > 0`.
pub fn exact_redundancy<E: SequentialEncoder>(fresh: &E, n: usize, p: &SourceModel) -> Result<RedundancyReport, Error> {
    if n == 0 {
        return Err(Error::Unsupported("redundancy needs n >= 1".to_string()));
    }
    let mut divergence = 0.0;
    let mut length = 0.0;
    walk_support(fresh, p, n, Rational::one(), &mut |enc, prob| {
        let mu = enc.interval_width();
        let pf = prob.to_f64();
        divergence += pf * (prob / &mu).log2();
        length += pf * enc.emitted().len() as f64;
        Ok(())
    })?;
    let h = crate::source::entropy(p);
    Ok(RedundancyReport { redundancy: divergence / n as f64, excess_length: length / n as f64 - h })
}

fn walk_support<E: SequentialEncoder>(
    enc: &E,
    p: &SourceModel,
    depth: usize,
    prob: Rational,
    visit: &mut impl FnMut(&E, &Rational) -> Result<(), Error>,
) -> Result<(), Error> {
    if depth == 0 {
        return visit(enc, &prob);
    }
    for x in 0..p.size() {
        if p.prob(x).is_positive() {
            let mut next = enc.clone();
            next.push(x)?;
            walk_support(&next, p, depth - 1, &prob * p.prob(x), visit)?;
        }
    }
    Ok(())
}

/// `r_d(x^n) = D(P^d || mu_d(. | x^n))` for an encoder already fed `x^n`.
///
/// The conditional measure may sum to less than one; the divergence is
/// still nonnegative.
pub fn instantaneous_redundancy<E: SequentialEncoder>(enc: &E, d: usize, p: &SourceModel) -> Result<f64, Error> {
    let base = enc.interval_width();
    let mut r = 0.0;
    walk_support(enc, p, d, Rational::one(), &mut |e, prob| {
        let cond = &e.interval_width() / &base;
        r += prob.to_f64() * (prob / &cond).log2();
        Ok(())
    })?;
    Ok(r)
}
