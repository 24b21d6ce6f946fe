//! Hard-delay coding by fictitious-symbol insertion.
//!
//! Source symbols are aggregated into super-symbols until the largest
//! super-symbol probability drops below 1/16. Two fictitious symbols `x_L`
//! and `x_R` of coding mass `eps` are spliced into the order so that their
//! intervals sit inside `I_L` and `I_R` of the current interval. The encoder
//! emulates the decoder; once `d~ + 1` real super-symbols are pending it
//! encodes whichever fictitious symbol avoids every forbidden point, which
//! makes all pending symbols decodable at once.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use num_bigint::BigUint;

use crate::codec::{locate, make_arithmetic, ArithmeticMap, EncoderState, PendingLedger, SequentialEncoder};
use crate::geometry::Side;
use crate::numerics::{BitString, Rational};
use crate::source::{super_digits, super_id, Sampler, SourceModel, Symbol};
use crate::Error;

/// Default cap on the number of super-symbols `K^k`.
pub const DEFAULT_AGGREGATION_CEILING: u128 = 1 << 16;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub aggregation_ceiling: u128,
    pub precision_ceiling: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            aggregation_ceiling: DEFAULT_AGGREGATION_CEILING,
            precision_ceiling: crate::codec::DEFAULT_PRECISION_CEILING,
        }
    }
}

/// The extended coding model: `P^k` plus `x_L`, `x_R`, under `P+_eps`.
#[derive(Debug, Clone)]
pub struct ExtendedModel {
    base: SourceModel,
    d: u64,
    k: u32,
    d_tilde: u64,
    super_model: SourceModel,
    epsilon: Rational,
    epsilon_clamped: bool,
    coding: SourceModel,
    map: ArithmeticMap,
    precision_ceiling: u64,
}

fn sixteenth() -> Rational {
    Rational::new(1, 16).expect("nonzero")
}

/// `eps = pmax^d~`, halved down to `min(1/16, pmin)/2` when it reaches that cap.
pub fn fictitious_mass(super_model: &SourceModel, d_tilde: u64) -> (Rational, bool) {
    let eps = super_model.pmax().pow(d_tilde as u32);
    let sixteenth = sixteenth();
    let cap = Rational::min(&sixteenth, super_model.pmin()).clone();
    if eps >= cap {
        (&cap * &Rational::new(1, 2).expect("nonzero"), true)
    } else {
        (eps, false)
    }
}

/// Splices `x_L = m` and `x_R = m + 1` into `real_order`: `x_L` goes at the
/// first running offset `>= 3/8`, then `x_R` at the first offset `>= 1/2`.
/// Returns the extended order and the offsets `f1(x_L)`, `f1(x_R)`.
pub fn splice_fictitious(real_order: &[Symbol], coding: &[Rational], eps: &Rational) -> (Vec<Symbol>, Rational, Rational) {
    let m = real_order.len();
    let three_eighths = Rational::new(3, 8).expect("nonzero");
    let half = Rational::new(1, 2).expect("nonzero");
    let mut order = Vec::with_capacity(m + 2);
    let mut f = Rational::zero();
    let mut f_left = None;
    let mut f_right = None;
    let place = |f: &mut Rational, order: &mut Vec<Symbol>, f_left: &mut Option<Rational>, f_right: &mut Option<Rational>| {
        if f_left.is_none() && *f >= three_eighths {
            *f_left = Some(f.clone());
            order.push(m);
            *f = &*f + eps;
        }
        if f_left.is_some() && f_right.is_none() && *f >= half {
            *f_right = Some(f.clone());
            order.push(m + 1);
            *f = &*f + eps;
        }
    };
    for &x in real_order {
        place(&mut f, &mut order, &mut f_left, &mut f_right);
        order.push(x);
        f = &f + &coding[x];
    }
    place(&mut f, &mut order, &mut f_left, &mut f_right);
    (order, f_left.expect("offsets reach 1"), f_right.expect("offsets reach 1"))
}

pub fn build_extended_model(p: &SourceModel, d: u64) -> Result<ExtendedModel, Error> {
    build_extended_model_with(p, d, &BuildOptions::default())
}

pub fn build_extended_model_with(p: &SourceModel, d: u64, opts: &BuildOptions) -> Result<ExtendedModel, Error> {
    if p.is_deterministic() {
        return Err(Error::InvalidModel("a deterministic source cannot be aggregated below 1/16".to_string()));
    }
    let pmax = p.pmax();
    let mut k: u32 = 1;
    while pmax.pow(k) >= sixteenth() {
        k += 1;
    }
    let size = (p.size() as u128).checked_pow(k).unwrap_or(u128::MAX);
    if size > opts.aggregation_ceiling {
        return Err(Error::AggregationInfeasible { size, ceiling: opts.aggregation_ceiling });
    }
    let k64 = k as u64;
    // d~ = floor((d + 1)/k - 1) >= 1 iff d >= 2k - 1
    if d + 1 < 2 * k64 {
        return Err(Error::DelayTooSmall { d, min_d: 2 * k64 - 1 });
    }
    let d_tilde = (d + 1) / k64 - 1;
    let super_model = p.power(k)?;
    let (epsilon, epsilon_clamped) = fictitious_mass(&super_model, d_tilde);
    let m = super_model.size();
    let scale = Rational::one() - &epsilon * &Rational::from(2);
    let mut coding: Vec<Rational> = super_model.pmf().iter().map(|q| q * &scale).collect();
    coding.push(epsilon.clone());
    coding.push(epsilon.clone());
    let (order, f_left, f_right) = splice_fictitious(super_model.order(), &coding, &epsilon);
    let half = Rational::new(1, 2)?;
    let ok_left = f_left >= Rational::new(3, 8)? && f_left <= &half - &epsilon;
    let ok_right = f_right >= half && f_right <= &Rational::new(5, 8)? - &epsilon;
    if !ok_left || !ok_right {
        return Err(Error::Invariant(format!("fictitious offsets {f_left}, {f_right} out of range")));
    }
    let mut tokens: Vec<String> = super_model.tokens().to_vec();
    tokens.push("<xL>".to_string());
    tokens.push("<xR>".to_string());
    let coding_model = SourceModel::with_order(coding, tokens, order)?;
    let map = make_arithmetic(&coding_model);
    debug_assert_eq!(map.offset(m), &f_left);
    debug_assert_eq!(map.offset(m + 1), &f_right);
    Ok(ExtendedModel {
        base: p.clone(),
        d,
        k,
        d_tilde,
        super_model,
        epsilon,
        epsilon_clamped,
        coding: coding_model,
        map,
        precision_ceiling: opts.precision_ceiling,
    })
}

impl ExtendedModel {
    pub fn base(&self) -> &SourceModel {
        &self.base
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    /// Aggregation factor.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Effective threshold on pending super-symbols.
    pub fn d_tilde(&self) -> u64 {
        self.d_tilde
    }

    pub fn super_model(&self) -> &SourceModel {
        &self.super_model
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    /// Whether `eps` was lowered below `pmax^d~`.
    pub fn epsilon_clamped(&self) -> bool {
        self.epsilon_clamped
    }

    /// `P+_eps` with its extended order.
    pub fn coding_model(&self) -> &SourceModel {
        &self.coding
    }

    pub fn map(&self) -> &ArithmeticMap {
        &self.map
    }

    pub fn x_left(&self) -> Symbol {
        self.super_model.size()
    }

    pub fn x_right(&self) -> Symbol {
        self.super_model.size() + 1
    }

    pub fn fictitious(&self, side: Side) -> Symbol {
        match side {
            Side::L => self.x_left(),
            Side::R => self.x_right(),
        }
    }

    pub fn f_left(&self) -> &Rational {
        self.map.offset(self.x_left())
    }

    pub fn f_right(&self) -> &Rational {
        self.map.offset(self.x_right())
    }

    pub fn precision_ceiling(&self) -> u64 {
        self.precision_ceiling
    }

    /// Log2 of the per-step mismatch factor, `log2(1/(1 - 2 eps))`.
    pub fn mismatch_term(&self) -> f64 {
        -(Rational::one() - &self.epsilon * &Rational::from(2)).log2()
    }

    pub fn header(&self, n: u64) -> StreamHeader {
        StreamHeader {
            pmf: self.base.order().iter().map(|&x| self.base.prob(x).clone()).collect(),
            d: self.d,
            n,
        }
    }
}

/// Whether a forbidden-point chain in the frame reaches the open window
/// `(lo_t, hi_t)`.
///
/// The chain is described by residuals `r_t`, distances from the chain
/// points to the end they accumulate at, in units where `unit` is 1. Each
/// step subtracts the largest power of two below (`strict`) or at most the
/// residual, so the residuals are the partial remainders of its binary
/// expansion.
fn chain_hits(r0: BigUint, unit: &BigUint, strict: bool, lo_t: &BigUint, hi_t: &BigUint) -> bool {
    let mut r = r0;
    let mut lo = lo_t.clone();
    let mut hi = hi_t.clone();
    loop {
        if r < hi {
            return r > lo;
        }
        r <<= 1usize;
        lo <<= 1usize;
        hi <<= 1usize;
        if r > *unit || (!strict && r == *unit) {
            r -= unit;
        }
    }
}

/// The fictitious side whose region avoids every forbidden point of the
/// current frame interval, preferring `L`.
///
/// The frame interval straddles 1/2 (no bit is pending), so `1/2` is the
/// centre of its forbidden set. Coordinates are scaled by `8 den` so that
/// the region boundaries are integers.
pub fn frame_free_side(state: &EncoderState) -> Result<Side, Error> {
    let (lo, hi, den) = state.raw();
    let w = hi - lo;
    let unit: BigUint = den << 3usize;
    let half: BigUint = den << 2usize;
    let r_right = (hi << 3usize) - &half;
    let r_left = &half - (lo << 3usize);
    let w3 = &w * 3u32;
    let w4 = &w << 2usize;
    let w5 = &w * 5u32;
    // Right-chain residual h - p, left-chain residual p - a.
    // I_L: h - p in (4w, 5w) or p - a in (3w, 4w); I_R the other way round.
    let left_free = !chain_hits(r_right.clone(), &unit, true, &w4, &w5) && !chain_hits(r_left.clone(), &unit, false, &w3, &w4);
    if left_free {
        return Ok(Side::L);
    }
    let right_free = !chain_hits(r_right, &unit, true, &w3, &w4) && !chain_hits(r_left, &unit, false, &w4, &w5);
    if right_free {
        Ok(Side::R)
    } else {
        Err(Error::Invariant("both fictitious regions contain forbidden points".to_string()))
    }
}

/// Encoder-side delay accounting, in original source symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelayLedger {
    /// Source symbols consumed.
    pub consumed: u64,
    /// Source symbols the emulated decoder has determined.
    pub decodable: u64,
    /// Fictitious symbols inserted.
    pub insertions: u64,
    /// Real super-symbols encoded, including padding.
    pub super_steps: u64,
    /// Largest per-position delay observed so far.
    pub max_delay: u64,
    /// Per-position delays, when tracing is enabled.
    pub delays: Option<Vec<u64>>,
}

/// The streaming hard-delay encoder.
#[derive(Debug, Clone)]
pub struct DcEncoder<'m> {
    model: &'m ExtendedModel,
    state: EncoderState,
    pending: PendingLedger,
    bits: BitString,
    buffer: Vec<Symbol>,
    ledger: DelayLedger,
    symbols: Option<Vec<Symbol>>,
    cross_check: bool,
}

impl<'m> DcEncoder<'m> {
    pub fn new(model: &'m ExtendedModel) -> Self {
        DcEncoder {
            model,
            state: EncoderState::new().with_precision_ceiling(model.precision_ceiling),
            pending: PendingLedger::new(),
            bits: BitString::new(),
            buffer: Vec::with_capacity(model.k as usize),
            ledger: DelayLedger::default(),
            symbols: None,
            cross_check: false,
        }
    }

    /// Records every position's delay in the ledger.
    pub fn with_trace(mut self) -> Self {
        self.ledger.delays = Some(Vec::new());
        self
    }

    /// Records the extended-symbol sequence actually encoded.
    pub fn with_symbol_trace(mut self) -> Self {
        self.symbols = Some(Vec::new());
        self
    }

    /// Re-checks every insertion against the exact forbidden-point geometry.
    pub fn with_geometry_check(mut self) -> Self {
        self.cross_check = true;
        self
    }

    pub fn ledger(&self) -> &DelayLedger {
        &self.ledger
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn state(&self) -> &EncoderState {
        &self.state
    }

    /// Extended symbols encoded so far, when tracing.
    pub fn symbol_trace(&self) -> Option<&[Symbol]> {
        self.symbols.as_deref()
    }

    pub fn push(&mut self, x: Symbol) -> Result<(), Error> {
        let size = self.model.base.size();
        if x >= size {
            return Err(Error::SymbolOutOfRange { symbol: x, size });
        }
        if !self.model.base.prob(x).is_positive() {
            return Err(Error::ZeroProbability(x));
        }
        self.buffer.push(x);
        self.ledger.consumed += 1;
        if let Some(delays) = self.ledger.delays.as_mut() {
            delays.push(u64::MAX);
        }
        if self.buffer.len() == self.model.k as usize {
            self.encode_buffer()?;
        }
        Ok(())
    }

    fn encode_buffer(&mut self) -> Result<(), Error> {
        let id = super_id(&self.buffer, self.model.base.size());
        self.buffer.clear();
        self.encode_extended(id)?;
        self.ledger.super_steps += 1;
        self.pending.push(self.ledger.super_steps);
        self.settle();
        if self.pending.len() as u64 > self.model.d_tilde {
            self.insert()?;
        }
        Ok(())
    }

    fn encode_extended(&mut self, x: Symbol) -> Result<(), Error> {
        self.state.narrow(&self.model.map, x)?;
        self.pending.advance(&self.model.map, x);
        if let Some(s) = self.symbols.as_mut() {
            s.push(x);
        }
        Ok(())
    }

    /// Emits pending bits and retires every super-symbol that became decodable.
    fn settle(&mut self) {
        self.state.emit(&mut self.bits);
        let k = self.model.k as u64;
        let now = self.ledger.super_steps;
        let consumed = self.ledger.consumed;
        let ledger = &mut self.ledger;
        self.pending.drain_decodable(&self.state, |t| {
            let reached = (k * now).min(consumed);
            let first = k * (t - 1) + 1;
            let last = (k * t).min(consumed);
            for j in first..=last {
                let delay = reached - j;
                ledger.max_delay = ledger.max_delay.max(delay);
                if let Some(v) = ledger.delays.as_mut() {
                    v[(j - 1) as usize] = delay;
                }
            }
            ledger.decodable = last;
        });
    }

    fn insert(&mut self) -> Result<(), Error> {
        let side = frame_free_side(&self.state)?;
        if self.cross_check {
            let frame = self.state.frame();
            let exact = crate::geometry::forbidden_free_side(&frame);
            if exact != side {
                return Err(Error::Invariant(format!("frame side {side:?} disagrees with geometry side {exact:?}")));
            }
        }
        self.encode_extended(self.model.fictitious(side))?;
        self.ledger.insertions += 1;
        self.settle();
        if !self.pending.is_empty() {
            return Err(Error::Invariant(format!(
                "{} super-symbols still pending after an insertion",
                self.pending.len()
            )));
        }
        Ok(())
    }

    /// Pads the last super-symbol with the smallest base symbol, appends the
    /// flush bits and closes the ledger.
    pub fn finish(mut self) -> Result<(BitString, DelayLedger), Error> {
        if !self.buffer.is_empty() {
            let pad = self.model.base.order()[0];
            while self.buffer.len() < self.model.k as usize {
                self.buffer.push(pad);
            }
            self.encode_buffer()?;
        }
        let tail = self.state.flush_bits();
        self.bits.extend_from(&tail);
        let n = self.ledger.consumed;
        if let Some(v) = self.ledger.delays.as_mut() {
            for (j, slot) in v.iter_mut().enumerate() {
                if *slot == u64::MAX {
                    *slot = n - (j as u64 + 1);
                    self.ledger.max_delay = self.ledger.max_delay.max(*slot);
                }
            }
        }
        if self.ledger.decodable < n {
            let oldest = self.ledger.decodable + 1;
            self.ledger.max_delay = self.ledger.max_delay.max(n - oldest);
            self.ledger.decodable = n;
        }
        self.pending.clear();
        Ok((self.bits, self.ledger))
    }
}

impl SequentialEncoder for DcEncoder<'_> {
    fn alphabet_size(&self) -> usize {
        self.model.base.size()
    }

    fn can_encode(&self, x: Symbol) -> bool {
        x < self.model.base.size() && self.model.base.prob(x).is_positive()
    }

    fn push(&mut self, x: Symbol) -> Result<(), Error> {
        DcEncoder::push(self, x)
    }

    fn emitted(&self) -> &BitString {
        &self.bits
    }

    /// With a partial super-symbol buffered, sums the widths over every
    /// completion.
    fn interval_width(&self) -> Rational {
        if self.buffer.is_empty() {
            return self.state.true_width();
        }
        let mut total = Rational::zero();
        for x in 0..self.model.base.size() {
            if self.can_encode(x) {
                let mut next = self.clone();
                next.push(x).expect("positive probability");
                total = &total + &next.interval_width();
            }
        }
        total
    }
}

/// Fields stored in front of a payload. `pmf` lists the probabilities in the
/// base order; decoded symbols are indices into this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub pmf: Vec<Rational>,
    pub d: u64,
    pub n: u64,
}

impl StreamHeader {
    pub fn alphabet_size(&self) -> usize {
        self.pmf.len()
    }

    /// The source model in header indexing (identity order).
    pub fn model(&self) -> Result<SourceModel, Error> {
        SourceModel::new(self.pmf.clone())
    }
}

pub fn dc_encode(model: &ExtendedModel, input: &[Symbol]) -> Result<(StreamHeader, BitString, DelayLedger), Error> {
    let mut enc = DcEncoder::new(model);
    for &x in input {
        enc.push(x)?;
    }
    let (bits, ledger) = enc.finish()?;
    Ok((model.header(input.len() as u64), bits, ledger))
}

/// Decodes a stream. Symbols are indices into `header.pmf`; bits past the
/// codeword must be zero.
pub fn dc_decode(header: &StreamHeader, bits: &BitString) -> Result<Vec<Symbol>, Error> {
    dc_decode_with(header, bits, &BuildOptions::default())
}

pub fn dc_decode_with(header: &StreamHeader, bits: &BitString, opts: &BuildOptions) -> Result<Vec<Symbol>, Error> {
    let p = header.model()?;
    let model = build_extended_model_with(&p, header.d, opts)?;
    let k = model.k as u64;
    let base = p.size();
    let m = model.super_model.size();
    let n = header.n;
    let supers = n.div_ceil(k);
    let pad = model.base.order()[0];
    let mut out: Vec<Symbol> = Vec::with_capacity((supers * k) as usize);
    // The decoder runs the encoder on what it has decoded so far, so the
    // insertions are replayed rather than decoded, and every bit the replay
    // emits must match the payload.
    let mut mirror = DcEncoder::new(&model);
    let received = bits.bits();
    let mut pos = 0usize;
    let mut real = 0u64;
    while real < supers {
        let start = mirror.bits().len();
        pos = pos.max(start);
        let Some(x) = locate(mirror.state(), &model.map, &received[start..pos]) else {
            if pos == received.len() {
                return Err(Error::Truncated { bits: bits.len() as u64, decoded: (real * k).min(n), expected: n });
            }
            pos += 1;
            continue;
        };
        if x >= m {
            return Err(Error::Corrupt { bit: start as u64, detail: "fictitious symbol outside an insertion point".to_string() });
        }
        let digits = super_digits(x, base, model.k);
        let keep = (n - real * k).min(k) as usize;
        if digits[keep..].iter().any(|&s| s != pad) {
            return Err(Error::Corrupt { bit: start as u64, detail: "final super-symbol has a non-padding tail".to_string() });
        }
        for &s in &digits[..keep] {
            mirror.push(s)?;
        }
        out.extend_from_slice(&digits[..keep]);
        real += 1;
        check_prefix(mirror.bits(), received, start)?;
    }
    let (again, _) = mirror.finish()?;
    check_prefix(&again, received, 0)?;
    if let Some(i) = (again.len()..received.len()).find(|&i| received[i]) {
        return Err(Error::Corrupt { bit: i as u64, detail: "nonzero bit after the codeword".to_string() });
    }
    Ok(out)
}

/// The replayed codeword `again` must agree with the payload from `from` on.
fn check_prefix(again: &BitString, received: &[bool], from: usize) -> Result<(), Error> {
    let again = again.bits();
    if let Some(i) = (from..again.len().min(received.len())).find(|&i| again[i] != received[i]) {
        return Err(Error::Corrupt { bit: i as u64, detail: "payload is not the codeword of its decoded symbols".to_string() });
    }
    if again.len() > received.len() {
        return Err(Error::Corrupt { bit: received.len() as u64, detail: "payload ends inside the codeword".to_string() });
    }
    Ok(())
}

/// Per-position delays of the hard-delay encoder over `input`.
pub fn online_delay_trace(model: &ExtendedModel, input: &[Symbol]) -> Result<Vec<u64>, Error> {
    let mut enc = DcEncoder::new(model).with_trace();
    for &x in input {
        enc.push(x)?;
    }
    let (_, ledger) = enc.finish()?;
    Ok(ledger.delays.expect("tracing enabled"))
}

/// `order` rotated so that `pivot` comes first.
pub fn make_rotated_order(order: &[Symbol], pivot: Symbol) -> Result<Vec<Symbol>, Error> {
    let at = order
        .iter()
        .position(|&x| x == pivot)
        .ok_or_else(|| Error::Unsupported(format!("pivot {pivot} is not in the order")))?;
    let mut out = Vec::with_capacity(order.len());
    out.extend_from_slice(&order[at..]);
    out.extend_from_slice(&order[..at]);
    Ok(out)
}

/// Order of `X^d` with each type class contiguous, lexicographic inside a
/// class, classes sorted by decreasing count of the first base symbol.
pub fn type_grouped_order(p: &SourceModel, d: u32) -> Vec<Symbol> {
    let base = p.size();
    let m = base.pow(d);
    let mut keyed: Vec<(Vec<u32>, Vec<usize>, Symbol)> = (0..m)
        .map(|id| {
            let ranks: Vec<usize> = super_digits(id, base, d).iter().map(|&x| p.rank_of(x)).collect();
            let mut counts = vec![0u32; base];
            for &r in &ranks {
                counts[r] += 1;
            }
            (counts, ranks, id)
        })
        .collect();
    keyed.sort_by(|a, b| Reverse(&a.0).cmp(&Reverse(&b.0)).then_with(|| a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, id)| id).collect()
}

/// The random-rotation ensemble: a unit-delay extended coder for `P^d`
/// whose order is rotated to a random pivot at every super-step.
#[derive(Debug, Clone)]
pub struct RotationEnsemble {
    super_model: SourceModel,
    order: Vec<Symbol>,
    cum: Vec<Rational>,
    epsilon: Rational,
    point: Rational,
}

/// Hit-rate estimate of the rotation ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub trials: u64,
    pub hits: u64,
    /// Exact ensemble hit probability.
    pub exact: Rational,
    /// `2^(-d H_2(P))`.
    pub renyi_reference: f64,
}

impl RotationEnsemble {
    pub fn new(p: &SourceModel, d: u32, ceiling: usize) -> Result<Self, Error> {
        let size = (p.size() as u128).checked_pow(d).unwrap_or(u128::MAX);
        if size > ceiling as u128 {
            return Err(Error::AggregationInfeasible { size, ceiling: ceiling as u128 });
        }
        let power = p.power(d)?;
        let order = type_grouped_order(p, d);
        let super_model = power.with_new_order(order.clone())?;
        let (epsilon, _) = fictitious_mass(&super_model, 1);
        let mut cum = Vec::with_capacity(order.len() + 1);
        let mut acc = Rational::zero();
        cum.push(acc.clone());
        for &x in &order {
            acc = &acc + super_model.prob(x);
            cum.push(acc.clone());
        }
        Ok(RotationEnsemble { super_model, order, cum, epsilon, point: Rational::new(1, 2)? })
    }

    /// Uses `point` (relative to the current interval) as the fixed point.
    pub fn with_point(mut self, point: Rational) -> Self {
        self.point = point;
        self
    }

    pub fn super_model(&self) -> &SourceModel {
        &self.super_model
    }

    /// The type-grouped base order.
    pub fn order(&self) -> &[Symbol] {
        &self.order
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn point(&self) -> &Rational {
        &self.point
    }

    /// Mass of the first `j` symbols of the order rotated to rank `p`.
    fn rotated_mass(&self, p: usize, j: usize) -> Rational {
        let m = self.order.len();
        if p + j <= m {
            &self.cum[p + j] - &self.cum[p]
        } else {
            &(Rational::one() - &self.cum[p]) + &self.cum[p + j - m]
        }
    }

    /// Smallest `j` in `lo..=m` satisfying a monotone predicate.
    fn first_index(lo: usize, m: usize, pred: impl Fn(usize) -> bool) -> usize {
        let (mut a, mut b) = (lo, m);
        while a < b {
            let mid = (a + b) / 2;
            if pred(mid) {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        a
    }

    /// The real super-symbol whose interval contains the fixed point when
    /// the order is rotated to `pivot`, or `None` if the point falls in a
    /// fictitious interval.
    pub fn hit_symbol(&self, pivot: Symbol) -> Option<Symbol> {
        let m = self.order.len();
        let p = self.super_model.rank_of(pivot);
        let s = Rational::one() - &self.epsilon * &Rational::from(2);
        let eps = &self.epsilon;
        let three_eighths = Rational::new(3, 8).expect("nonzero");
        let half = Rational::new(1, 2).expect("nonzero");
        let real_offset = |j: usize| &s * &self.rotated_mass(p, j);
        let jl = Self::first_index(0, m, |j| real_offset(j) >= three_eighths);
        let jr = Self::first_index(jl, m, |j| &real_offset(j) + eps >= half);
        let offset = |j: usize| {
            let shifts = (j >= jl) as i64 + (j >= jr) as i64;
            &real_offset(j) + &(eps * &Rational::from_integer(shifts))
        };
        // Last index whose offset is at or below the point.
        let j = Self::first_index(0, m, |j| offset(j) > self.point);
        if j == 0 {
            return None;
        }
        let j = j - 1;
        let x = self.order[(p + j) % m];
        let end = &offset(j) + &(&s * self.super_model.prob(x));
        (self.point < end).then_some(x)
    }

    /// `sum_y P(y) P(x*(y))`.
    pub fn exact_hit_probability(&self) -> Rational {
        self.order
            .iter()
            .filter_map(|&y| self.hit_symbol(y).map(|x| self.super_model.prob(y) * self.super_model.prob(x)))
            .sum()
    }

    /// Draws a pivot and a next super-symbol per trial; counts the trials
    /// in which the super-symbol's interval contains the fixed point.
    pub fn simulate(&self, trials: u64, seed: u64) -> u64 {
        let mut sampler = Sampler::new(&self.super_model, seed);
        let mut cache: Vec<Option<Option<Symbol>>> = vec![None; self.order.len()];
        let mut hits = 0;
        for _ in 0..trials {
            let y = sampler.next_symbol();
            let x = sampler.next_symbol();
            let target = *cache[y].get_or_insert_with(|| self.hit_symbol(y));
            if target == Some(x) {
                hits += 1;
            }
        }
        hits
    }
}

/// Monte Carlo hit rate of the rotation ensemble for `P^d`, with its exact
/// value and the `2^(-d H_2)` reference.
pub fn ensemble_simulate(p: &SourceModel, d: u32, trials: u64, seed: u64, ceiling: usize) -> Result<EnsembleOutcome, Error> {
    let ens = RotationEnsemble::new(p, d, ceiling)?;
    let hits = ens.simulate(trials, seed);
    let h2 = crate::source::collision_entropy(p);
    Ok(EnsembleOutcome {
        trials,
        hits,
        exact: ens.exact_hit_probability(),
        renyi_reference: libm::exp2(-(d as f64) * h2),
    })
}

/// Exact `|I|` for an extended-symbol sequence under `model`.
pub fn extended_measure(model: &ExtendedModel, symbols: &[Symbol]) -> Rational {
    symbols.iter().map(|&x| model.coding.prob(x).clone()).product()
}
