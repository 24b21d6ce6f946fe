//! Exact, delay-constrained arithmetic coding for memoryless sources.
//!
//! The crate is `no_std` (with `alloc`). Every coding decision is made in
//! exact integer or rational arithmetic. Floating point appears in reported
//! information measures and closed-form bounds, and inside the codec as a
//! filter that settles clear-cut comparisons and hands the rest to an exact
//! check.
//!
//! - [`numerics`]: exact rationals, unit intervals, binary intervals, `mbi`.
//! - [`geometry`]: forbidden points of an interval and the fictitious-symbol
//!   regions `I_L` / `I_R`.
//! - [`source`]: memoryless source models, sampling and information measures.
//! - [`codec`]: interval-mapping arithmetic encoder/decoder, delay
//!   instrumentation and redundancy oracles.
//! - [`delay_codec`]: the hard-delay codec built on fictitious-symbol insertion.
//! - [`bounds`]: closed-form delay-tail, insertion and redundancy bounds.
#![no_std]

extern crate alloc;

use alloc::boxed::Box;
use alloc::string::String;

pub mod bounds;
pub mod codec;
pub mod delay_codec;
pub mod geometry;
pub mod numerics;
pub mod source;

pub use numerics::{BitString, Rational, UnitInterval};
pub use source::{SourceModel, Symbol};

/// Errors surfaced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse rational {0:?}")]
    ParseRational(String),
    #[error("cannot parse bit string {0:?}")]
    ParseBits(String),
    #[error("invalid unit interval: low {low}, width {width}")]
    InvalidInterval { low: Box<Rational>, width: Box<Rational> },
    #[error("invalid source model: {0}")]
    InvalidModel(String),
    #[error("models are over different alphabets ({0} vs {1} symbols)")]
    AlphabetMismatch(usize, usize),
    #[error("invalid Rényi order {0}")]
    InvalidOrder(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error("symbol {symbol} is outside the alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("symbol {0} has zero coding probability")]
    ZeroProbability(usize),
    #[error("forbidden-point query touches an accumulation point of the adjacent chains")]
    UnboundedQuery,
    #[error("interval coordinates reached {bits} bits, above the ceiling of {ceiling}")]
    PrecisionCeiling { bits: u64, ceiling: u64 },
    #[error("delay budget d = {d} is too small for this source; the minimal workable d is {min_d}")]
    DelayTooSmall { d: u64, min_d: u64 },
    #[error("aggregated alphabet of {size} super-symbols exceeds the ceiling of {ceiling}")]
    AggregationInfeasible { size: u128, ceiling: u128 },
    #[error("bitstream ended after {bits} bits with {decoded} of {expected} symbols decoded")]
    Truncated { bits: u64, decoded: u64, expected: u64 },
    #[error("corrupt bitstream at bit {bit}: {detail}")]
    Corrupt { bit: u64, detail: String },
    #[error("codec invariant violated: {0}")]
    Invariant(String),
    #[error("generalized interval-mapping check failed: {0}")]
    NotDelayConstrained(String),
}
