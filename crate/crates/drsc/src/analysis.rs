//! Monte Carlo estimators for the delay tail, the redundancy of the
//! hard-delay codec and the rotation ensemble, with their CSV schemas.
//!
//! Every estimator splits its work into streams with seeds derived from the
//! master seed and the stream index. Per-stream results are integer counts
//! merged by summation, so output does not depend on the thread count.

use std::io::{self, Write};
use std::thread;

use drsc_core::bounds::{delay_tail_bound, insertion_prob_bound, redundancy_delay_bound};
use drsc_core::codec::{delay_profile_with_ceiling, make_arithmetic, DEFAULT_PRECISION_CEILING};
use drsc_core::delay_codec::{build_extended_model_with, BuildOptions, DcEncoder, RotationEnsemble};
use drsc_core::source::{derive_seed, entropy, Sampler};
use drsc_core::{Error, Rational, SourceModel};

use crate::pmf::pmf_summary;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Runs `job(i)` for `i in 0..jobs` on up to `threads` workers and returns
/// the results in index order.
pub fn run_jobs<T, F>(jobs: u64, threads: usize, job: F) -> Result<Vec<T>, Error>
where
    T: Send,
    F: Fn(u64) -> Result<T, Error> + Sync,
{
    let threads = threads.clamp(1, jobs.max(1) as usize);
    if threads == 1 {
        return (0..jobs).map(&job).collect();
    }
    let job = &job;
    let mut slots: Vec<Option<Result<T, Error>>> = (0..jobs).map(|_| None).collect();
    thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| s.spawn(move || (t as u64..jobs).step_by(threads).map(|i| (i, job(i))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i as usize] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9e}")
    } else if x.is_nan() {
        "undefined".to_string()
    } else {
        "inf".to_string()
    }
}

#[derive(Debug, Clone)]
pub struct TailConfig {
    pub d_max: u64,
    pub samples: u64,
    pub horizon: u64,
    pub seed: u64,
    pub threads: usize,
    /// Positions observed per stream.
    pub per_stream: u64,
    /// Gap between observed positions within a stream.
    pub spacing: u64,
    pub precision_ceiling: u64,
}

impl TailConfig {
    pub fn new(d_max: u64, samples: u64, horizon: u64, seed: u64) -> Self {
        TailConfig {
            d_max,
            samples,
            horizon,
            seed,
            threads: 1,
            per_stream: 100,
            spacing: 10,
            precision_ceiling: DEFAULT_PRECISION_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailPoint {
    pub d: u64,
    pub exceedances: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub seed: u64,
    pub samples: u64,
    pub horizon: u64,
    /// Positions not decoded within the horizon; counted as exceedances at every `d`.
    pub censored: u64,
    pub max_observed: u64,
    pub points: Vec<TailPoint>,
    pub p: String,
    pub q: String,
}

impl TailEstimate {
    pub fn violations(&self, bound_scale: f64) -> Vec<u64> {
        self.points.iter().filter(|pt| pt.ci_hi > pt.bound * bound_scale).map(|pt| pt.d).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# delay-tail seed={} samples={} horizon={} censored={} p={} q={}",
            self.seed, self.samples, self.horizon, self.censored, self.p, self.q
        )?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["d", "samples", "exceedances", "p_hat", "ci_hi", "bound"])?;
        for pt in &self.points {
            c.write_record([
                pt.d.to_string(),
                self.samples.to_string(),
                pt.exceedances.to_string(),
                fmt_f(pt.p_hat),
                fmt_f(pt.ci_hi),
                fmt_f(pt.bound),
            ])?;
        }
        c.flush()
    }
}

/// Empirical `Pr(delay > d)` for `p` encoded with the plain arithmetic coder
/// matched to `q`, at uniformly spaced positions of independent streams.
pub fn estimate_delay_tail(p: &SourceModel, q: &SourceModel, cfg: &TailConfig) -> Result<TailEstimate, Error> {
    if cfg.horizon <= cfg.d_max {
        return Err(Error::Unsupported(format!("horizon {} must exceed d_max {}", cfg.horizon, cfg.d_max)));
    }
    if p.size() != q.size() {
        return Err(Error::AlphabetMismatch(p.size(), q.size()));
    }
    let map = make_arithmetic(q);
    let per = cfg.per_stream.max(1);
    let streams = cfg.samples.div_ceil(per);
    // Per stream: histogram of delays 0..=d_max, then censored, then "> d_max".
    let width = cfg.d_max as usize + 3;
    let counts = run_jobs(streams, cfg.threads, |s| {
        let take = per.min(cfg.samples - s * per);
        let len = (take - 1) * cfg.spacing + 1 + cfg.horizon;
        let x = Sampler::new(p, derive_seed(cfg.seed, s)).fill(len as usize);
        let profile = delay_profile_with_ceiling(&map, &x, cfg.precision_ceiling)?;
        let mut hist = vec![0u64; width];
        let mut max_seen = 0;
        for i in 0..take {
            let j = (i * cfg.spacing) as usize;
            match profile[j] {
                Some(delay) if delay <= cfg.horizon => {
                    max_seen = max_seen.max(delay);
                    let slot = if delay > cfg.d_max { cfg.d_max + 2 } else { delay };
                    hist[slot as usize] += 1;
                }
                _ => hist[cfg.d_max as usize + 1] += 1,
            }
        }
        Ok((hist, max_seen))
    })?;
    let mut hist = vec![0u64; width];
    let mut max_observed = 0;
    for (h, m) in counts {
        hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        max_observed = max_observed.max(m);
    }
    let censored = hist[cfg.d_max as usize + 1];
    let n = cfg.samples;
    let mut points = Vec::new();
    for d in 1..=cfg.d_max {
        let within: u64 = hist[..=d as usize].iter().sum();
        let exceed = n - within;
        let (ci_lo, ci_hi) = wilson(exceed, n, Z95);
        points.push(TailPoint {
            d,
            exceedances: exceed,
            p_hat: exceed as f64 / n as f64,
            ci_lo,
            ci_hi,
            bound: delay_tail_bound(p, q, d)?,
        });
    }
    Ok(TailEstimate {
        seed: cfg.seed,
        samples: n,
        horizon: cfg.horizon,
        censored,
        max_observed,
        points,
        p: pmf_summary(p),
        q: pmf_summary(q),
    })
}

#[derive(Debug, Clone)]
pub struct RedundancyConfig {
    /// Source symbols per delay budget.
    pub samples: u64,
    /// Stream length.
    pub horizon: u64,
    pub seed: u64,
    pub threads: usize,
    pub options: BuildOptions,
}

impl RedundancyConfig {
    pub fn new(samples: u64, horizon: u64, seed: u64) -> Self {
        RedundancyConfig { samples, horizon, seed, threads: 1, options: BuildOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyEstimate {
    pub d: u64,
    pub k: u32,
    pub d_tilde: u64,
    pub epsilon: Rational,
    pub symbols: u64,
    pub super_steps: u64,
    pub insertions: u64,
    /// `log2(1/(1 - 2 eps))` per source symbol.
    pub mismatch_term: f64,
    pub insertion_rate: f64,
    pub rate_ci_hi: f64,
    /// Mismatch term plus `log2(1/eps)` times the insertion rate, per source symbol.
    pub combined: f64,
    pub combined_ci_hi: f64,
    /// Payload bits per source symbol minus `H(P)`, flush included.
    pub direct: f64,
    /// Flush bits per source symbol, part of `direct`.
    pub flush_overhead: f64,
    /// Redundancy-delay bound at `d`; `NaN` where undefined.
    pub theorem2_bound: f64,
    /// Bound on the per-step insertion probability.
    pub insertion_bound: f64,
}

impl RedundancyEstimate {
    pub fn violates(&self, bound_scale: f64) -> bool {
        let over = |x: f64, b: f64| b.is_finite() && x > b * bound_scale;
        over(self.combined_ci_hi, self.theorem2_bound) || over(self.rate_ci_hi, self.insertion_bound)
    }
}

/// Runs the hard-delay codec over independent streams of length `horizon`
/// and decomposes its redundancy into the exact mismatch term and the
/// insertion cost.
pub fn estimate_redundancy(p: &SourceModel, d: u64, cfg: &RedundancyConfig) -> Result<RedundancyEstimate, Error> {
    let model = build_extended_model_with(p, d, &cfg.options)?;
    let k = model.k() as u64;
    let horizon = cfg.horizon.max(k).div_ceil(k) * k;
    let streams = cfg.samples.div_ceil(horizon);
    let per_stream = run_jobs(streams, cfg.threads, |s| {
        let len = horizon.min(cfg.samples - s * horizon);
        let mut sampler = Sampler::new(p, derive_seed(derive_seed(cfg.seed, d), s));
        let mut enc = DcEncoder::new(&model);
        for _ in 0..len {
            enc.push(sampler.next_symbol())?;
        }
        let body = enc.bits().len() as u64;
        let (bits, ledger) = enc.finish()?;
        Ok([len, ledger.super_steps, ledger.insertions, bits.len() as u64, bits.len() as u64 - body])
    })?;
    let mut tot = [0u64; 5];
    for r in per_stream {
        tot.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let [symbols, supers, insertions, bits, flush] = tot;
    let kf = k as f64;
    let eps = model.epsilon();
    let cost = -eps.log2();
    let mismatch = model.mismatch_term() / kf;
    let rate = insertions as f64 / supers as f64;
    let (_, rate_hi) = wilson(insertions, supers, Z95);
    let theorem2 = redundancy_delay_bound(p, d).unwrap_or(f64::NAN);
    Ok(RedundancyEstimate {
        d,
        k: model.k(),
        d_tilde: model.d_tilde(),
        epsilon: eps.clone(),
        symbols,
        super_steps: supers,
        insertions,
        mismatch_term: mismatch,
        insertion_rate: rate,
        rate_ci_hi: rate_hi,
        combined: mismatch + cost * rate / kf,
        combined_ci_hi: mismatch + cost * rate_hi / kf,
        direct: bits as f64 / symbols as f64 - entropy(p),
        flush_overhead: flush as f64 / symbols as f64,
        theorem2_bound: theorem2,
        insertion_bound: insertion_prob_bound(model.super_model(), model.d_tilde(), eps)?,
    })
}

pub fn write_redundancy_csv<W: Write>(mut w: W, p: &SourceModel, cfg: &RedundancyConfig, rows: &[RedundancyEstimate]) -> io::Result<()> {
    writeln!(w, "# redundancy seed={} samples={} horizon={} p={}", cfg.seed, cfg.samples, cfg.horizon, pmf_summary(p))?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["d", "mismatch_term", "insertion_rate", "rate_ci_hi", "combined", "combined_ci_hi", "theorem2_bound"])?;
    for r in rows {
        c.write_record([
            r.d.to_string(),
            fmt_f(r.mismatch_term),
            fmt_f(r.insertion_rate),
            fmt_f(r.rate_ci_hi),
            fmt_f(r.combined),
            fmt_f(r.combined_ci_hi),
            fmt_f(r.theorem2_bound),
        ])?;
    }
    c.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub d: u32,
    pub trials: u64,
    pub hits: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exact: Rational,
    pub renyi_reference: f64,
}

/// Trials per ensemble job; fixed so results do not depend on threads.
const ENSEMBLE_CHUNK: u64 = 100_000;

pub fn ensemble_rows(p: &SourceModel, d_max: u32, trials: u64, seed: u64, threads: usize, ceiling: usize) -> Result<Vec<EnsembleRow>, Error> {
    let h2 = drsc_core::source::collision_entropy(p);
    let mut rows = Vec::new();
    for d in 1..=d_max {
        let ens = RotationEnsemble::new(p, d, ceiling)?;
        let jobs = trials.div_ceil(ENSEMBLE_CHUNK);
        let hits: u64 = run_jobs(jobs, threads, |j| {
            let n = ENSEMBLE_CHUNK.min(trials - j * ENSEMBLE_CHUNK);
            Ok(ens.simulate(n, derive_seed(derive_seed(seed, d as u64), j)))
        })?
        .into_iter()
        .sum();
        let (ci_lo, ci_hi) = wilson(hits, trials, Z95);
        rows.push(EnsembleRow {
            d,
            trials,
            hits,
            ci_lo,
            ci_hi,
            exact: ens.exact_hit_probability(),
            renyi_reference: (-(d as f64) * h2).exp2(),
        });
    }
    Ok(rows)
}

pub fn write_ensemble_csv<W: Write>(mut w: W, p: &SourceModel, seed: u64, rows: &[EnsembleRow]) -> io::Result<()> {
    writeln!(w, "# ensemble seed={} p={}", seed, pmf_summary(p))?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["d", "trials", "hits", "hit_rate", "ci_lo", "ci_hi", "exact", "renyi_reference"])?;
    for r in rows {
        c.write_record([
            r.d.to_string(),
            r.trials.to_string(),
            r.hits.to_string(),
            fmt_f(r.hits as f64 / r.trials.max(1) as f64),
            fmt_f(r.ci_lo),
            fmt_f(r.ci_hi),
            fmt_f(r.exact.to_f64()),
            fmt_f(r.renyi_reference),
        ])?;
    }
    c.flush()
}
