//! Discrete memoryless sources and their information measures.
//!
//! Probabilities are exact. Entropies, divergences and Rényi entropies are
//! reported as `f64` bits; they are never fed back into coding decisions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::numerics::Rational;
use crate::Error;

/// Index of a symbol in its alphabet.
pub type Symbol = usize;

/// A finite alphabet with an exact pmf and a total order `<`.
///
/// `order[r]` is the symbol of rank `r`; cumulative offsets of the arithmetic
/// map are taken along this order.
#[derive(Clone, PartialEq, Eq)]
pub struct SourceModel {
    pmf: Vec<Rational>,
    order: Vec<Symbol>,
    rank: Vec<usize>,
    tokens: Vec<String>,
}

impl core::fmt::Debug for SourceModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SourceModel").field("pmf", &self.pmf).field("order", &self.order).finish()
    }
}

impl SourceModel {
    /// Model with identity order and tokens `"0"`, `"1"`, ...
    pub fn new(pmf: Vec<Rational>) -> Result<Self, Error> {
        let tokens = (0..pmf.len()).map(|i| i.to_string()).collect();
        Self::with_tokens(pmf, tokens)
    }

    pub fn with_tokens(pmf: Vec<Rational>, tokens: Vec<String>) -> Result<Self, Error> {
        let order = (0..pmf.len()).collect();
        Self::with_order(pmf, tokens, order)
    }

    pub fn with_order(pmf: Vec<Rational>, tokens: Vec<String>, order: Vec<Symbol>) -> Result<Self, Error> {
        let k = pmf.len();
        if k < 2 {
            return Err(Error::InvalidModel(format!("alphabet needs at least 2 symbols, got {k}")));
        }
        if let Some((i, p)) = pmf.iter().enumerate().find(|(_, p)| p.is_negative()) {
            return Err(Error::InvalidModel(format!("symbol {i} has negative probability {p}")));
        }
        let total: Rational = pmf.iter().sum();
        if total != Rational::one() {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        if tokens.len() != k {
            return Err(Error::InvalidModel(format!("{} tokens for {k} symbols", tokens.len())));
        }
        let mut sorted: Vec<&String> = tokens.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("duplicate symbol tokens".to_string()));
        }
        let mut rank = vec![usize::MAX; k];
        if order.len() != k {
            return Err(Error::InvalidModel("order is not a permutation of the alphabet".to_string()));
        }
        for (r, &x) in order.iter().enumerate() {
            if x >= k || rank[x] != usize::MAX {
                return Err(Error::InvalidModel("order is not a permutation of the alphabet".to_string()));
            }
            rank[x] = r;
        }
        Ok(SourceModel { pmf, order, rank, tokens })
    }

    /// Uniform distribution over `k` symbols.
    pub fn uniform(k: usize) -> Result<Self, Error> {
        let p = Rational::new(1, k as i64)?;
        Self::new(vec![p; k])
    }

    /// Model from `(numerator, denominator)` pairs.
    pub fn from_pairs(pairs: &[(i64, i64)]) -> Result<Self, Error> {
        let pmf = pairs.iter().map(|&(n, d)| Rational::new(n, d)).collect::<Result<Vec<_>, _>>()?;
        Self::new(pmf)
    }

    pub fn size(&self) -> usize {
        self.pmf.len()
    }

    pub fn prob(&self, x: Symbol) -> &Rational {
        &self.pmf[x]
    }

    pub fn pmf(&self) -> &[Rational] {
        &self.pmf
    }

    pub fn order(&self) -> &[Symbol] {
        &self.order
    }

    pub fn rank_of(&self, x: Symbol) -> usize {
        self.rank[x]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, x: Symbol) -> &str {
        &self.tokens[x]
    }

    pub fn symbol_of(&self, token: &str) -> Option<Symbol> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn with_new_order(&self, order: Vec<Symbol>) -> Result<Self, Error> {
        Self::with_order(self.pmf.clone(), self.tokens.clone(), order)
    }

    pub fn pmax(&self) -> &Rational {
        self.pmf.iter().max().expect("nonempty")
    }

    /// Smallest positive probability.
    pub fn pmin(&self) -> &Rational {
        self.pmf.iter().filter(|p| p.is_positive()).min().expect("pmf sums to one")
    }

    pub fn is_deterministic(&self) -> bool {
        self.pmax() == &Rational::one()
    }

    /// Every probability is zero or a power of 1/2.
    pub fn is_dyadic(&self) -> bool {
        self.pmf.iter().all(|p| {
            p.is_zero() || (p.numer() == &BigInt::from(1) && p.denom().magnitude().count_ones() == 1)
        })
    }

    /// `P^k` over super-symbols `x_1..x_k`, encoded as `sum x_i K^(k-i)`,
    /// ordered lexicographically by the base order.
    pub fn power(&self, k: u32) -> Result<Self, Error> {
        let base = self.size();
        let count = base.checked_pow(k).ok_or_else(|| Error::Unsupported("alphabet power overflows".to_string()))?;
        let mut pmf = Vec::with_capacity(count);
        let mut tokens = Vec::with_capacity(count);
        for id in 0..count {
            let digits = super_digits(id, base, k);
            pmf.push(digits.iter().map(|&x| self.pmf[x].clone()).product());
            tokens.push(digits.iter().map(|&x| self.tokens[x].as_str()).collect::<Vec<_>>().join("."));
        }
        let order = (0..count)
            .map(|r| {
                let ranks = super_digits(r, base, k);
                ranks.iter().fold(0usize, |acc, &rk| acc * base + self.order[rk])
            })
            .collect();
        Self::with_order(pmf, tokens, order)
    }
}

/// Base-`base` digits of `id`, most significant first, padded to `k`.
pub fn super_digits(mut id: usize, base: usize, k: u32) -> Vec<Symbol> {
    let mut out = vec![0; k as usize];
    for slot in out.iter_mut().rev() {
        *slot = id % base;
        id /= base;
    }
    out
}

/// Inverse of [`super_digits`].
pub fn super_id(digits: &[Symbol], base: usize) -> usize {
    digits.iter().fold(0, |acc, &x| acc * base + x)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * libm::log2(p)
    } else {
        0.0
    }
}

/// `H(P)` in bits.
pub fn entropy(p: &SourceModel) -> f64 {
    -p.pmf().iter().map(|x| plogp(x.to_f64())).sum::<f64>()
}

fn entropy_of(q: &[f64]) -> f64 {
    -q.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// `H_alpha(P) = log2(sum P^alpha) / (1 - alpha)`.
pub fn renyi_entropy(p: &SourceModel, alpha: f64) -> Result<f64, Error> {
    if alpha.is_nan() || alpha <= 0.0 || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidOrder(alpha));
    }
    let s: f64 = p.pmf().iter().map(|x| x.to_f64()).filter(|&x| x > 0.0).map(|x| libm::pow(x, alpha)).sum();
    Ok(libm::log2(s) / (1.0 - alpha))
}

/// Collision entropy `H_2(P) = -log2 sum P(x)^2`, computed exactly before the log.
pub fn collision_entropy(p: &SourceModel) -> f64 {
    let s: Rational = p.pmf().iter().map(|x| x * x).sum();
    -s.log2()
}

fn divergence_f64(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * libm::log2(a / b);
        }
    }
    d
}

/// Grid minimum of `alpha/(alpha-1) D(Q||P) + H(Q)` over the probability
/// simplex with resolution `grid_step`, for `alpha > 1` and at most 4 symbols.
pub fn renyi_variational(p: &SourceModel, alpha: f64, grid_step: f64) -> Result<f64, Error> {
    if alpha.is_nan() || alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidOrder(alpha));
    }
    if p.size() > 4 {
        return Err(Error::Unsupported(format!("grid search over {} symbols is infeasible", p.size())));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::Unsupported(format!("grid step {grid_step} out of range")));
    }
    let m = libm::round(1.0 / grid_step) as u32;
    let pf: Vec<f64> = p.pmf().iter().map(|x| x.to_f64()).collect();
    let weight = alpha / (alpha - 1.0);
    let mut best = f64::INFINITY;
    let mut counts = vec![0u32; p.size()];
    let mut q = vec![0.0; p.size()];
    grid_walk(&mut counts, 0, m, &mut |c| {
        for (qi, &ci) in q.iter_mut().zip(c.iter()) {
            *qi = ci as f64 / m as f64;
        }
        let v = weight * divergence_f64(&q, &pf) + entropy_of(&q);
        if v < best {
            best = v;
        }
    });
    Ok(best)
}

/// Visit every composition of `remaining` into `counts[pos..]`.
fn grid_walk(counts: &mut [u32], pos: usize, remaining: u32, visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        grid_walk(counts, pos + 1, remaining - c, visit);
    }
}

fn same_alphabet(p: &SourceModel, q: &SourceModel) -> Result<(), Error> {
    if p.size() != q.size() {
        return Err(Error::AlphabetMismatch(p.size(), q.size()));
    }
    Ok(())
}

/// `D(P||Q)` in bits; `+inf` when `P` is not absolutely continuous w.r.t. `Q`.
pub fn divergence(p: &SourceModel, q: &SourceModel) -> Result<f64, Error> {
    same_alphabet(p, q)?;
    let mut d = 0.0;
    for (a, b) in p.pmf().iter().zip(q.pmf()) {
        if a.is_positive() {
            if !b.is_positive() {
                return Ok(f64::INFINITY);
            }
            d += a.to_f64() * (a / b).log2();
        }
    }
    Ok(d)
}

/// `nu(P, Q) = max over supp(P) of P(x)/Q(x)`; `None` stands for infinity.
pub fn nu(p: &SourceModel, q: &SourceModel) -> Result<Option<Rational>, Error> {
    same_alphabet(p, q)?;
    let mut best: Option<Rational> = None;
    for (a, b) in p.pmf().iter().zip(q.pmf()) {
        if a.is_positive() {
            if !b.is_positive() {
                return Ok(None);
            }
            let ratio = a / b;
            if best.as_ref().is_none_or(|cur| &ratio > cur) {
                best = Some(ratio);
            }
        }
    }
    Ok(best)
}

/// Exact `P(x^n)`.
pub fn sequence_probability(p: &SourceModel, x: &[Symbol]) -> Rational {
    x.iter().map(|&s| p.prob(s).clone()).product()
}

/// Occurrence counts of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeVector {
    counts: Vec<u64>,
    n: u64,
}

impl TypeVector {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The empirical pmf `counts / n` as floats.
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    /// `D(Q||P) + H(Q)` where `Q` is this type: the per-symbol exponent of
    /// `P(x^n)` for any sequence of this type.
    pub fn probability_exponent(&self, p: &SourceModel) -> f64 {
        let q = self.frequencies();
        let pf: Vec<f64> = p.pmf().iter().map(|x| x.to_f64()).collect();
        divergence_f64(&q, &pf) + entropy_of(&q)
    }
}

pub fn type_of(x: &[Symbol], k: usize) -> Result<TypeVector, Error> {
    let mut counts = vec![0u64; k];
    for &s in x {
        if s >= k {
            return Err(Error::SymbolOutOfRange { symbol: s, size: k });
        }
        counts[s] += 1;
    }
    Ok(TypeVector { counts, n: x.len() as u64 })
}

/// Seeded i.i.d. sampler by exact inversion of 64-bit uniform draws.
///
/// A draw `u` selects the symbol whose cumulative range `[F(x-), F(x))`
/// contains `u / 2^64`; each symbol's probability is thus reproduced up to an
/// error of at most `2^-64`.
#[derive(Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    // thresholds[i] = ceil(F_i * 2^64) for the cumulative sum through symbol i
    thresholds: Vec<u128>,
    seed: u64,
}

impl Sampler {
    pub fn new(p: &SourceModel, seed: u64) -> Self {
        let mut acc = Rational::zero();
        let thresholds = p
            .pmf()
            .iter()
            .map(|x| {
                acc = &acc + x;
                acc.scale_pow2(64).ceil().to_u128().expect("at most 2^64")
            })
            .collect();
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), thresholds, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_symbol(&mut self) -> Symbol {
        let u = self.rng.next_u64() as u128;
        // First symbol with u < ceil(F * 2^64), i.e. u / 2^64 < F.
        self.thresholds.partition_point(|&t| t <= u)
    }

    pub fn fill(&mut self, n: usize) -> Vec<Symbol> {
        (0..n).map(|_| self.next_symbol()).collect()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// `n` i.i.d. draws from `p` with a deterministic generator.
pub fn sample(p: &SourceModel, n: usize, seed: u64) -> Vec<Symbol> {
    Sampler::new(p, seed).fill(n)
}

/// Derives a per-stream seed from a base seed and an index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
