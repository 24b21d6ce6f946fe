//! Randomized property suites behind `drsc verify`.

use drsc_core::codec::gim_nesting;
use drsc_core::delay_codec::{build_extended_model_with, dc_decode_with, dc_encode, online_delay_trace, BuildOptions, DcEncoder, ExtendedModel};
use drsc_core::geometry::{adjacent_delta_set, delta_set_size_bound, forbidden_free_side, forbidden_points_in, lr_subintervals, midpoint_of_mbi, Side};
use drsc_core::source::{derive_seed, Sampler};
use drsc_core::{BitString, Error, Rational, SourceModel, UnitInterval};

pub struct Suite {
    pub name: &'static str,
    pub about: &'static str,
    run: fn(&mut Draw, bool) -> Result<(), String>,
}

pub const SUITES: &[Suite] = &[
    Suite { name: "roundtrip", about: "hard-delay encode then decode returns the input", run: roundtrip },
    Suite { name: "hard-delay", about: "no position waits more than d symbols", run: hard_delay },
    Suite { name: "fictitious-placement", about: "x_L and x_R sit in their eighths with mass below pmin", run: placement },
    Suite { name: "delta-set", about: "adjacent delta sets stay within their size bound", run: delta_set },
    Suite { name: "free-side", about: "one of I_L, I_R holds no forbidden point", run: free_side },
    Suite { name: "gim", about: "continuation covers nest disjointly under E(s) at super-symbol boundaries", run: gim },
];

/// Random draws for one case.
pub struct Draw(Sampler);

impl Draw {
    pub fn new(seed: u64) -> Self {
        Draw(Sampler::new(&SourceModel::uniform(2).expect("valid"), seed))
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn seed(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Model with weights `1..=max_weight` over `k` symbols.
    pub fn model(&mut self, k: usize, max_weight: u64) -> SourceModel {
        let w: Vec<u64> = (0..k).map(|_| self.range(1, max_weight)).collect();
        let total: u64 = w.iter().sum();
        SourceModel::new(w.iter().map(|&x| Rational::new(x, total).expect("nonzero")).collect()).expect("valid")
    }

    /// `[a/q, b/q)` with `q < 2000`.
    pub fn interval(&mut self) -> UnitInterval {
        let q = self.range(2, 1999);
        let a = self.below(q);
        let b = self.range(a + 1, q);
        UnitInterval::from_bounds(Rational::new(a, q).expect("q > 0"), Rational::new(b, q).expect("q > 0")).expect("a < b")
    }
}

fn opts() -> BuildOptions {
    BuildOptions { aggregation_ceiling: 1 << 10, ..BuildOptions::default() }
}

fn min_d(p: &SourceModel) -> Option<u64> {
    match build_extended_model_with(p, 0, &opts()) {
        Err(Error::DelayTooSmall { min_d, .. }) => Some(min_d),
        _ => None,
    }
}

/// A workable model over 2..=5 symbols, or `None` if aggregation is too large.
fn random_model(r: &mut Draw) -> Option<ExtendedModel> {
    let k = r.range(2, 5) as usize;
    let p = r.model(k, 6);
    let d = min_d(&p)? + r.below(3);
    build_extended_model_with(&p, d, &opts()).ok()
}

fn roundtrip(r: &mut Draw, inject: bool) -> Result<(), String> {
    let Some(model) = random_model(r) else { return Ok(()) };
    let x = Sampler::new(model.base(), r.seed()).fill(r.below(300) as usize + 1);
    let (header, mut bits, _) = dc_encode(&model, &x).map_err(|e| e.to_string())?;
    if inject {
        let mut raw = bits.bits().to_vec();
        let i = raw.len() / 2;
        raw[i] = !raw[i];
        bits = BitString::from_bits(raw);
    }
    match dc_decode_with(&header, &bits, &opts()) {
        Ok(y) if y == x => Ok(()),
        Ok(_) => Err(format!("decoded sequence differs (n = {}, d = {})", x.len(), model.d())),
        Err(e) => Err(format!("decode failed (n = {}, d = {}): {e}", x.len(), model.d())),
    }
}

fn hard_delay(r: &mut Draw, inject: bool) -> Result<(), String> {
    let Some(model) = random_model(r) else { return Ok(()) };
    let x = Sampler::new(model.base(), r.seed()).fill(r.below(400) as usize + 1);
    let trace = online_delay_trace(&model, &x).map_err(|e| e.to_string())?;
    let budget = if inject { 0 } else { model.d() };
    match trace.iter().enumerate().find(|(_, &t)| t > budget) {
        Some((j, t)) => Err(format!("position {} waited {t} > {budget} symbols", j + 1)),
        None => Ok(()),
    }
}

fn placement(r: &mut Draw, inject: bool) -> Result<(), String> {
    let Some(model) = random_model(r) else { return Ok(()) };
    let eps = model.epsilon();
    let q = |a, b| Rational::new(a, b).expect("nonzero");
    let shift = if inject { q(1, 4) } else { Rational::zero() };
    let fl = model.f_left() - &shift;
    let fr = model.f_right();
    let half = q(1, 2);
    let ok = fl >= q(3, 8)
        && fl <= &half - eps
        && fr >= &half
        && fr <= &(&q(5, 8) - eps)
        && eps < &q(1, 16)
        && eps < model.super_model().pmin();
    if ok {
        Ok(())
    } else {
        Err(format!("offsets {fl}, {fr} with epsilon {eps} out of place"))
    }
}

fn delta_set(r: &mut Draw, inject: bool) -> Result<(), String> {
    let host = r.interval();
    let delta = host.width() * &Rational::new(r.range(1, 999), 1000u32).expect("nonzero");
    let set = adjacent_delta_set(&host, &delta).map_err(|e| e.to_string())?;
    let bound = if inject { 0.0 } else { delta_set_size_bound(&host, &delta) };
    if set.len() as f64 <= bound + 1e-9 {
        Ok(())
    } else {
        Err(format!("{} points above the bound {bound} for {host:?}", set.len()))
    }
}

fn free_side(r: &mut Draw, inject: bool) -> Result<(), String> {
    let host = r.interval();
    let probe = if inject {
        let m = midpoint_of_mbi(&host);
        let two = Rational::from_integer(2);
        let lo = &(host.low() + &m) / &two;
        let hi = &(&m + &host.high()) / &two;
        match UnitInterval::from_bounds(lo, hi) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        }
    } else {
        let (l, rr) = lr_subintervals(&host);
        if forbidden_free_side(&host) == Side::L {
            l
        } else {
            rr
        }
    };
    match forbidden_points_in(&host, &probe) {
        Ok(pts) if pts.is_empty() => Ok(()),
        Ok(pts) => Err(format!("{} forbidden points in the chosen side of {host:?}", pts.len())),
        Err(e) => Err(e.to_string()),
    }
}

fn gim(r: &mut Draw, inject: bool) -> Result<(), String> {
    let p = r.model(3, 4);
    let Some(d) = min_d(&p) else { return Ok(()) };
    let Ok(model) = build_extended_model_with(&p, d, &opts()) else { return Ok(()) };
    let k = model.k() as usize;
    let supers = r.below(6) as usize;
    let x = Sampler::new(&p, r.seed()).fill(supers * k);
    let mut enc = DcEncoder::new(&model);
    for &s in &x {
        enc.push(s).map_err(|e| e.to_string())?;
    }
    let depth = if inject { 1 } else { d as usize };
    gim_nesting(&enc, depth).map(|_| ()).map_err(|e| format!("prefix of {} symbols at d = {d}: {e}", x.len()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: u64,
    pub failures: Vec<String>,
}

pub fn find_suite(name: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.name == name)
}

/// Runs every suite for `cases` cases; `inject` names a suite to corrupt.
pub fn run_suites(seed: u64, cases: u64, inject: Option<&str>) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .enumerate()
        .map(|(i, suite)| {
            let corrupt = inject == Some(suite.name);
            let mut failures = Vec::new();
            for c in 0..cases {
                let mut draw = Draw::new(derive_seed(derive_seed(seed, i as u64), c));
                if let Err(e) = (suite.run)(&mut draw, corrupt) {
                    failures.push(format!("case {c}: {e}"));
                }
            }
            SuiteReport { name: suite.name, cases, failures }
        })
        .collect()
}
