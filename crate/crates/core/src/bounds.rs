//! Closed-form delay-tail, insertion and redundancy-delay bounds.

use alloc::format;
use alloc::string::ToString;

use crate::numerics::Rational;
use crate::source::{collision_entropy, nu, SourceModel};
use crate::Error;

/// `kappa = log2(sqrt(2) e / log2 e)`.
pub const KAPPA: f64 = 1.413_928_667_944_066;

fn powi(x: f64, n: u64) -> f64 {
    libm::pow(x, n as f64)
}

/// Delay-tail bound for an arithmetic encoder matched to `q` applied to `p`:
/// `2 pmax^d (d log2(nu/pmax) + kappa) + 2 qmax^d nu^d`.
///
/// Returns `+inf` when `nu(p, q)` is infinite. Values above one are not
/// clamped.
pub fn delay_tail_bound(p: &SourceModel, q: &SourceModel, d: u64) -> Result<f64, Error> {
    let Some(nu) = nu(p, q)? else {
        return Ok(f64::INFINITY);
    };
    let pmax = p.pmax().to_f64();
    let qmax = q.pmax().to_f64();
    let nu = nu.to_f64();
    let df = d as f64;
    Ok(2.0 * powi(pmax, d) * (df * libm::log2(nu / pmax) + KAPPA) + 2.0 * powi(qmax, d) * powi(nu, d))
}

/// Matched form `2 pmax^d (d log2(1/pmax) + kappa + 1)`.
pub fn matched_tail_bound(p: &SourceModel, d: u64) -> f64 {
    let pmax = p.pmax().to_f64();
    2.0 * powi(pmax, d) * (d as f64 * libm::log2(1.0 / pmax) + KAPPA + 1.0)
}

/// `qmax * nu(p, q)`; the tail bound decays exponentially iff this is below one.
pub fn mismatch_rate(p: &SourceModel, q: &SourceModel) -> Result<Option<Rational>, Error> {
    Ok(nu(p, q)?.map(|nu| q.pmax() * &nu))
}

/// Bound on the probability of an insertion at a given step:
/// `2 pmax^d (d log2(1/((1 - 2 eps) pmax)) + kappa + 1)`, with `pmax` taken
/// from `p` (the super-symbol model) and `d` the effective threshold.
pub fn insertion_prob_bound(p: &SourceModel, d_tilde: u64, eps: &Rational) -> Result<f64, Error> {
    if eps.is_negative() || eps >= &Rational::new(1, 2)? {
        return Err(Error::Unsupported(format!("epsilon {eps} must lie in [0, 1/2)")));
    }
    let pmax = p.pmax().to_f64();
    let scaled = (1.0 - 2.0 * eps.to_f64()) * pmax;
    Ok(2.0 * powi(pmax, d_tilde) * (d_tilde as f64 * libm::log2(1.0 / scaled) + KAPPA + 1.0))
}

/// `c(x) = 0` for `x < 1/16`, else `2 floor(1 / log2(2/x)) - 1`.
///
/// For every `x` in `[1/16, 1)` this evaluates to `-1`.
pub fn c_func(x: f64) -> i64 {
    if x < 1.0 / 16.0 {
        0
    } else {
        2 * libm::floor(1.0 / libm::log2(2.0 / x)) as i64 - 1
    }
}

/// `2 pmax^(d-c) ((d-c) log2(2/pmax) + 1 + kappa)^2` with `c = c(pmax)`.
pub fn redundancy_delay_bound(p: &SourceModel, d: u64) -> Result<f64, Error> {
    let pmax = p.pmax().to_f64();
    let c = c_func(pmax);
    let e = d as i64 - c;
    if e <= 0 {
        return Err(Error::Unsupported(format!("bound undefined for d = {d} <= c = {c}")));
    }
    let ef = e as f64;
    let inner = ef * libm::log2(2.0 / pmax) + 1.0 + KAPPA;
    Ok(2.0 * libm::pow(pmax, ef) * inner * inner)
}

/// Lower and upper redundancy-delay exponents of a source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSummary {
    /// `log2(1/pmax)`.
    pub lower_pmax: f64,
    /// `H_2(P)`.
    pub lower_renyi: f64,
    /// `8 log2(K/pmin)`.
    pub upper_general: f64,
    /// `8 log2(1/pmin)`, for interval-mapping encoders.
    pub upper_interval_mapping: f64,
    /// Dyadic sources reach zero redundancy at zero delay, so the upper
    /// bounds do not apply to them.
    pub dyadic: bool,
}

pub fn exponent_summary(p: &SourceModel) -> Result<ExponentSummary, Error> {
    if p.is_deterministic() {
        return Err(Error::Unsupported("deterministic source: all exponents are degenerate".to_string()));
    }
    let pmin = p.pmin().to_f64();
    let s = ExponentSummary {
        lower_pmax: -p.pmax().log2(),
        lower_renyi: collision_entropy(p),
        upper_general: 8.0 * libm::log2(p.size() as f64 / pmin),
        upper_interval_mapping: 8.0 * -p.pmin().log2(),
        dyadic: p.is_dyadic(),
    };
    let tol = 1e-9;
    if s.lower_renyi + tol < s.lower_pmax {
        return Err(Error::Invariant(format!("H2 = {} below log2(1/pmax) = {}", s.lower_renyi, s.lower_pmax)));
    }
    if s.lower_renyi > s.upper_interval_mapping + tol || s.upper_interval_mapping > s.upper_general + tol {
        return Err(Error::Invariant(format!("exponent bounds out of order: {s:?}")));
    }
    Ok(s)
}
